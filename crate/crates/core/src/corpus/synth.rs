//! Seeded synthetic discharge-report generator with known ground truth.
//!
//! Each document gets structured covariates, a latent positive/rest state for
//! the five studied variables, and a binary DNR/DNI outcome drawn from a
//! logistic model over those. A variable is mentioned in the social-history
//! section only when it is "documented"; otherwise it is missing.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::jsonl::Record;
use super::templates::{self, Cell, Context};
use super::types::{levels, AnnotatedDocument, EventType, SdohEvent, SdohVariable, Span, StructuredRecord, Subtype};
use crate::error::{Error, Result};

/// Template dialect; the two institutions write their notes differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Marginals {
    pub age_mean: f64,
    pub age_sd: f64,
    pub gender: BTreeMap<String, f64>,
    pub ethnicity: BTreeMap<String, f64>,
    pub religion: BTreeMap<String, f64>,
    pub admission_type: BTreeMap<String, f64>,
    pub marital_status: BTreeMap<String, f64>,
    pub admission_location: BTreeMap<String, f64>,
    pub insurance: BTreeMap<String, f64>,
    pub marital_status_missing: f64,
    pub admission_location_missing: f64,
    pub insurance_missing: f64,
}

fn map(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl Default for Marginals {
    fn default() -> Self {
        Marginals {
            age_mean: 63.0,
            age_sd: 17.0,
            gender: map(&[("Female", 0.43), ("Male", 0.57)]),
            ethnicity: map(&[
                ("Asian", 0.009),
                ("Black", 0.097),
                ("Hispanic", 0.036),
                ("Not specified", 0.088),
                ("Other", 0.053),
                ("White", 0.717),
            ]),
            religion: map(&[
                ("Catholic", 0.373),
                ("Jewish", 0.081),
                ("Not specified", 0.322),
                ("Other", 0.224),
            ]),
            admission_type: map(&[("Elective", 0.145), ("Emergency", 0.834), ("Urgent", 0.021)]),
            marital_status: map(&[
                ("Divorced", 0.07),
                ("Married", 0.46),
                ("Separated", 0.03),
                ("Single", 0.29),
                ("Widowed", 0.15),
            ]),
            admission_location: map(&[
                ("Clinic referral", 0.10),
                ("Emergency room", 0.50),
                ("Physician referral", 0.20),
                ("Transfer from hospital", 0.20),
            ]),
            insurance: map(&[
                ("Government", 0.03),
                ("Medicaid", 0.10),
                ("Medicare", 0.50),
                ("Private", 0.33),
                ("Self pay", 0.04),
            ]),
            marital_status_missing: 0.05,
            admission_location_missing: 0.03,
            insurance_missing: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_documents: usize,
    /// Generating log-odds-ratio per studied variable (keyed by variable name).
    pub true_log_odds: BTreeMap<String, f64>,
    pub intercept: f64,
    /// `"age"` is per year above 60; other keys are `"<variable>=<level>"` indicators.
    pub covariate_effects: BTreeMap<String, f64>,
    /// Probability that a variable is mentioned at all.
    pub sdoh_documentation_rates: BTreeMap<String, f64>,
    /// Probability of the positive level of each latent variable.
    pub sdoh_prevalence: BTreeMap<String, f64>,
    /// Per-sentence probability of a surface perturbation.
    pub template_noise: f64,
    pub rng_seed: u64,
    pub dialect: Dialect,
    pub doc_id_prefix: String,
    pub marginals: Marginals,
    /// Chance that a DNR/DNI outcome is recorded in structured data rather than text only.
    pub structured_code_status_rate: f64,
    /// Chance of a past-tense living mention when living status is undocumented.
    pub past_living_mention_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::institution_b(2000, 1)
    }
}

fn sdoh_map(values: [f64; 5]) -> BTreeMap<String, f64> {
    SdohVariable::ALL
        .iter()
        .map(|v| (v.as_str().to_string(), values[v.index()]))
        .collect()
}

impl SynthConfig {
    /// Local institution: dialect B, documentation and prevalence shaped after
    /// the labeled-subset characteristics table.
    pub fn institution_b(n_documents: usize, rng_seed: u64) -> Self {
        SynthConfig {
            n_documents,
            // living_status, employment, alcohol, drug, tobacco
            true_log_odds: sdoh_map([-0.4, -0.8, 0.0, 0.5, 0.2]),
            intercept: -2.61,
            covariate_effects: map(&[
                ("age", 0.04),
                ("gender=Female", 0.2),
                ("religion=Jewish", 0.3),
                ("ethnicity=Black", -0.3),
            ]),
            sdoh_documentation_rates: sdoh_map([0.48, 0.46, 0.76, 0.51, 0.72]),
            sdoh_prevalence: sdoh_map([0.66, 0.46, 0.69, 0.40, 0.71]),
            template_noise: 0.1,
            rng_seed,
            dialect: Dialect::B,
            doc_id_prefix: "B".to_string(),
            marginals: Marginals::default(),
            structured_code_status_rate: 0.75,
            past_living_mention_rate: 0.15,
        }
    }

    /// External institution: dialect A, richer documentation, shifted prevalences.
    pub fn institution_a(n_documents: usize, rng_seed: u64) -> Self {
        SynthConfig {
            sdoh_documentation_rates: sdoh_map([0.8, 0.8, 0.85, 0.75, 0.85]),
            sdoh_prevalence: sdoh_map([0.55, 0.55, 0.6, 0.3, 0.6]),
            dialect: Dialect::A,
            doc_id_prefix: "A".to_string(),
            ..SynthConfig::institution_b(n_documents, rng_seed)
        }
    }

    fn sdoh_value(map: &BTreeMap<String, f64>, var: SdohVariable) -> f64 {
        map.get(var.as_str()).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_documents == 0 {
            return Err(Error::Config("n_documents must be at least 1".into()));
        }
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability")))
            }
        };
        for (label, m) in [
            ("sdoh_documentation_rates", &self.sdoh_documentation_rates),
            ("sdoh_prevalence", &self.sdoh_prevalence),
        ] {
            for (k, p) in m {
                k.parse::<SdohVariable>()
                    .map_err(|_| Error::Config(format!("{label}: unknown variable '{k}'")))?;
                prob(&format!("{label}.{k}"), *p)?;
            }
        }
        for (k, v) in &self.true_log_odds {
            k.parse::<SdohVariable>()
                .map_err(|_| Error::Config(format!("true_log_odds: unknown variable '{k}'")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("true_log_odds.{k} is not finite")));
            }
        }
        for key in self.covariate_effects.keys() {
            if key == "age" {
                continue;
            }
            let (var, level) = key
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("covariate effect '{key}' is not 'variable=level'")))?;
            let allowed = covariate_levels(var)
                .ok_or_else(|| Error::Config(format!("unknown covariate '{var}'")))?;
            levels::check(var, allowed, level).map_err(|e| Error::Config(e.to_string()))?;
        }
        prob("template_noise", self.template_noise)?;
        prob("structured_code_status_rate", self.structured_code_status_rate)?;
        prob("past_living_mention_rate", self.past_living_mention_rate)?;
        let m = &self.marginals;
        prob("marital_status_missing", m.marital_status_missing)?;
        prob("admission_location_missing", m.admission_location_missing)?;
        prob("insurance_missing", m.insurance_missing)?;
        if !(m.age_sd > 0.0 && m.age_mean.is_finite()) {
            return Err(Error::Config("age distribution parameters are invalid".into()));
        }
        for (var, dist) in m.categorical() {
            let allowed = covariate_levels(var).expect("known covariate");
            if dist.is_empty() || dist.values().any(|p| !(*p >= 0.0)) || dist.values().sum::<f64>() <= 0.0 {
                return Err(Error::Config(format!("marginal for {var} is not a distribution")));
            }
            for level in dist.keys() {
                levels::check(var, allowed, level).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }
}

impl Marginals {
    fn categorical(&self) -> [(&'static str, &BTreeMap<String, f64>); 7] {
        [
            ("gender", &self.gender),
            ("ethnicity", &self.ethnicity),
            ("religion", &self.religion),
            ("admission_type", &self.admission_type),
            ("marital_status", &self.marital_status),
            ("admission_location", &self.admission_location),
            ("insurance", &self.insurance),
        ]
    }
}

pub(crate) fn covariate_levels(var: &str) -> Option<&'static [&'static str]> {
    Some(match var {
        "gender" => levels::GENDER,
        "ethnicity" => levels::ETHNICITY,
        "religion" => levels::RELIGION,
        "admission_type" => levels::ADMISSION_TYPE,
        "marital_status" => levels::MARITAL_STATUS,
        "admission_location" => levels::ADMISSION_LOCATION,
        "insurance" => levels::INSURANCE,
        _ => return None,
    })
}

/// What the generator knows about one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentTruth {
    pub doc_id: String,
    /// Latent positive level per variable, indexed by `SdohVariable::index`.
    pub positive: [bool; 5],
    pub documented: [bool; 5],
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<Record>,
    pub truth: Vec<LatentTruth>,
}

fn draw_level<R: Rng>(dist: &BTreeMap<String, f64>, rng: &mut R) -> String {
    let keys: Vec<&String> = dist.keys().collect();
    let weights = WeightedIndex::new(dist.values().copied()).expect("validated distribution");
    keys[weights.sample(rng)].clone()
}

fn draw_optional<R: Rng>(dist: &BTreeMap<String, f64>, missing: f64, rng: &mut R) -> Option<String> {
    let value = draw_level(dist, rng);
    if rng.gen_bool(missing) {
        None
    } else {
        Some(value)
    }
}

fn draw_structured<R: Rng>(config: &SynthConfig, doc_id: &str, rng: &mut R) -> StructuredRecord {
    let m = &config.marginals;
    let normal = Normal::new(m.age_mean, m.age_sd).expect("validated");
    let age = normal.sample(rng).round().clamp(18.0, 89.0) as i64;
    StructuredRecord {
        doc_id: doc_id.to_string(),
        age,
        gender: draw_level(&m.gender, rng),
        ethnicity: draw_level(&m.ethnicity, rng),
        religion: draw_level(&m.religion, rng),
        marital_status: draw_optional(&m.marital_status, m.marital_status_missing, rng),
        admission_location: draw_optional(&m.admission_location, m.admission_location_missing, rng),
        insurance: draw_optional(&m.insurance, m.insurance_missing, rng),
        admission_type: draw_level(&m.admission_type, rng),
        code_status_entries: Vec::new(),
    }
}

fn draw_latent<R: Rng>(config: &SynthConfig, rng: &mut R) -> ([bool; 5], [bool; 5]) {
    let mut positive = [false; 5];
    let mut documented = [false; 5];
    for var in SdohVariable::ALL {
        positive[var.index()] = rng.gen_bool(SynthConfig::sdoh_value(&config.sdoh_prevalence, *var));
        documented[var.index()] =
            rng.gen_bool(SynthConfig::sdoh_value(&config.sdoh_documentation_rates, *var));
    }
    (positive, documented)
}

/// The generating model's linear predictor.
pub fn linear_predictor(config: &SynthConfig, structured: &StructuredRecord, positive: &[bool; 5]) -> f64 {
    let mut eta = config.intercept;
    for var in SdohVariable::ALL {
        if positive[var.index()] {
            eta += SynthConfig::sdoh_value(&config.true_log_odds, *var);
        }
    }
    for (key, effect) in &config.covariate_effects {
        if key == "age" {
            eta += effect * (structured.age as f64 - 60.0);
            continue;
        }
        if let Some((var, level)) = key.split_once('=') {
            let value = match var {
                "gender" => Some(structured.gender.as_str()),
                "ethnicity" => Some(structured.ethnicity.as_str()),
                "religion" => Some(structured.religion.as_str()),
                "admission_type" => Some(structured.admission_type.as_str()),
                "marital_status" => structured.marital_status.as_deref(),
                "admission_location" => structured.admission_location.as_deref(),
                "insurance" => structured.insurance.as_deref(),
                _ => None,
            };
            if value == Some(level) {
                eta += effect;
            }
        }
    }
    eta
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean outcome probability of the generating model over `draws` Monte Carlo patients.
pub fn expected_prevalence(config: &SynthConfig, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..draws {
        let s = draw_structured(config, "mc", &mut rng);
        let (positive, _) = draw_latent(config, &mut rng);
        total += sigmoid(linear_predictor(config, &s, &positive));
    }
    total / draws as f64
}

/// Bisects the intercept so that the model-average outcome probability hits `target`.
pub fn calibrate_intercept(config: &SynthConfig, target: f64, draws: usize, seed: u64) -> f64 {
    let mut lo = -15.0;
    let mut hi = 15.0;
    let mut trial = config.clone();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        trial.intercept = mid;
        if expected_prevalence(&trial, draws, seed) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn capitalize_first(s: &mut String) {
    if let Some((i, c)) = s.char_indices().find(|(_, c)| c.is_ascii_alphabetic()) {
        if c.is_ascii_lowercase() {
            s.replace_range(i..i + 1, &c.to_ascii_uppercase().to_string());
        }
    }
}

struct Sentence {
    text: String,
    event: Option<SdohEvent>,
}

impl Sentence {
    fn shift(&mut self, by: usize) {
        if let Some(ev) = &mut self.event {
            ev.trigger = ev.trigger.shifted(by);
            for a in &mut ev.arguments {
                a.span = a.span.shifted(by);
            }
        }
    }
}

const NOISE_PREFIXES: &[&str] = &["Per pt, ", "Reportedly ", "Per family, ", "Pt states "];

fn apply_noise<R: Rng>(sentence: &mut Sentence, noise: f64, rng: &mut R) {
    capitalize_first(&mut sentence.text);
    if !rng.gen_bool(noise) {
        return;
    }
    match rng.gen_range(0..3) {
        0 => sentence.text = sentence.text.to_ascii_lowercase(),
        1 => sentence.text = sentence.text.to_ascii_uppercase(),
        _ => {
            let prefix = *NOISE_PREFIXES.choose(rng).expect("non-empty");
            sentence.text.insert_str(0, prefix);
            sentence.shift(prefix.chars().count());
        }
    }
}

fn substance_status<R: Rng>(positive: bool, rng: &mut R) -> Subtype {
    if !positive {
        Subtype::None
    } else if rng.gen_bool(0.5) {
        Subtype::Current
    } else {
        Subtype::Past
    }
}

fn employment_status<R: Rng>(positive: bool, age: i64, rng: &mut R) -> Subtype {
    if positive {
        return Subtype::Employed;
    }
    let weights: [f64; 5] = if age >= 65 {
        [0.12, 0.7, 0.1, 0.06, 0.02]
    } else {
        [0.35, 0.15, 0.3, 0.1, 0.1]
    };
    let opts = [
        Subtype::Unemployed,
        Subtype::Retired,
        Subtype::OnDisability,
        Subtype::Homemaker,
        Subtype::Student,
    ];
    opts[WeightedIndex::new(weights).expect("static weights").sample(rng)]
}

fn living_rest<R: Rng>(rng: &mut R) -> Subtype {
    let opts = [Subtype::Alone, Subtype::WithOthers, Subtype::Homeless];
    opts[WeightedIndex::new([0.55, 0.3, 0.15]).expect("static weights").sample(rng)]
}

fn render_event<R: Rng>(
    cell: Cell,
    event: EventType,
    subtype: Subtype,
    dialect: Dialect,
    rng: &mut R,
) -> Sentence {
    let (status_time, status_employ, type_living, pick) = match cell {
        Cell::Substance(st) => (Some(st), None, None, None),
        Cell::Employment => (None, Some(subtype), None, Some(subtype)),
        Cell::Living => (Some(Subtype::Current), None, Some(subtype), Some(subtype)),
        Cell::LivingPast => (Some(Subtype::Past), None, Some(subtype), None),
    };
    let options = templates::weighted_candidates(cell, event, pick, dialect);
    let (template, _) = options.choose_weighted(rng, |o| o.1).expect("every cell has templates");
    let ctx = Context {
        event,
        status_time,
        status_employ,
        type_living,
        dialect,
    };
    let r = templates::render(template, &ctx, rng);
    Sentence {
        text: r.text,
        event: r.event,
    }
}

fn social_sentences<R: Rng>(
    config: &SynthConfig,
    age: i64,
    positive: &[bool; 5],
    documented: &[bool; 5],
    rng: &mut R,
) -> Vec<Sentence> {
    let dialect = config.dialect;
    let mut out = Vec::new();
    for var in SdohVariable::ALL {
        let pos = positive[var.index()];
        if !documented[var.index()] {
            if *var == SdohVariable::LivingStatus && rng.gen_bool(config.past_living_mention_rate) {
                let st = if rng.gen_bool(0.5) { Subtype::WithFamily } else { living_rest(rng) };
                out.push(render_event(Cell::LivingPast, EventType::LivingStatus, st, dialect, rng));
            }
            continue;
        }
        let sentence = match var {
            SdohVariable::LivingStatus => {
                let st = if pos { Subtype::WithFamily } else { living_rest(rng) };
                render_event(Cell::Living, EventType::LivingStatus, st, dialect, rng)
            }
            SdohVariable::Employment => {
                let st = employment_status(pos, age, rng);
                render_event(Cell::Employment, EventType::Employment, st, dialect, rng)
            }
            _ => {
                let st = substance_status(pos, rng);
                render_event(Cell::Substance(st), var.event_type(), st, dialect, rng)
            }
        };
        out.push(sentence);
    }
    let fillers = match rng.gen_range(0..10) {
        0..=4 => 0,
        5..=8 => 1,
        _ => 2,
    };
    for _ in 0..fillers {
        out.push(Sentence {
            text: templates::render_filler(dialect, rng),
            event: None,
        });
    }
    if out.is_empty() {
        out.push(Sentence {
            text: "Not obtained.".to_string(),
            event: None,
        });
    }
    out.shuffle(rng);
    for s in &mut out {
        apply_noise(s, config.template_noise, rng);
    }
    out
}

/// Joins sentences into the section body; returns the text and events with section-local offsets.
fn layout_section<R: Rng>(dialect: Dialect, sentences: Vec<Sentence>, rng: &mut R) -> (String, Vec<SdohEvent>) {
    let mut text = String::new();
    let mut chars = 0usize;
    let mut events = Vec::new();
    let bullets = dialect == Dialect::B && rng.gen_bool(0.5);
    let n = sentences.len();
    for (i, mut s) in sentences.into_iter().enumerate() {
        if i > 0 {
            let sep = match dialect {
                Dialect::A => {
                    if rng.gen_bool(0.2) {
                        "\n"
                    } else {
                        " "
                    }
                }
                Dialect::B => "\n",
            };
            text.push_str(sep);
            chars += sep.chars().count();
        }
        if bullets {
            text.push_str("- ");
            chars += 2;
        }
        if dialect == Dialect::A && i + 1 < n && rng.gen_bool(0.1) && s.text.ends_with('.') {
            s.text.pop();
            s.text.push(';');
        }
        s.shift(chars);
        chars += s.text.chars().count();
        text.push_str(&s.text);
        if let Some(ev) = s.event {
            events.push(ev);
        }
    }
    (text, events)
}

const CHIEF_COMPLAINTS: &[&str] = &[
    "shortness of breath",
    "chest pain",
    "altered mental status",
    "fever",
    "abdominal pain",
    "hypotension",
    "GI bleed",
];
const PMH_ITEMS: &[&str] = &[
    "CAD s/p CABG",
    "COPD",
    "HTN",
    "DM2",
    "CHF with EF 30%",
    "afib on coumadin",
    "CKD stage III",
    "h/o EtOH withdrawal",
    "hep C",
];
const FAMILY_HISTORY: &[&str] = &[
    "Non-contributory.",
    "Mother with breast cancer.",
    "Father died of MI at 60.",
    "Brother with diabetes.",
];

struct Headers {
    social: &'static [&'static str],
    family: &'static str,
    cc: &'static str,
    hpi: &'static str,
    pmh: &'static str,
    exam: &'static str,
    course: &'static str,
    dispo: &'static str,
}

fn headers(dialect: Dialect) -> Headers {
    match dialect {
        Dialect::A => Headers {
            social: &["Social History:", "SOCIAL HISTORY:", "Social Hx:"],
            family: "Family History:",
            cc: "Chief Complaint:",
            hpi: "History of Present Illness:",
            pmh: "Past Medical History:",
            exam: "Physical Exam:",
            course: "Brief Hospital Course:",
            dispo: "Discharge Disposition:",
        },
        Dialect::B => Headers {
            social: &["SHx:", "Psych-social history:", "Social/Family History:"],
            family: "FHx:",
            cc: "CHIEF COMPLAINT:",
            hpi: "HPI:",
            pmh: "PMH:",
            exam: "PE:",
            course: "HOSPITAL COURSE:",
            dispo: "DISPO:",
        },
    }
}

const DNR_STRUCTURED: &[&str] = &["DNR/DNI", "Do Not Resuscitate", "DNR (do not resuscitate)", "Do Not Intubate", "DNI"];
const DNR_TEXT: &[&str] = &[
    "Code status: DNR/DNI.",
    "Code status was changed to DNR after discussion with family.",
    "Pt made DNI per HCP.",
    "Family meeting held; patient is do not resuscitate.",
];

/// Sets code-status entries and returns the hospital-course sentence about code status.
fn code_status<R: Rng>(config: &SynthConfig, outcome: bool, s: &mut StructuredRecord, rng: &mut R) -> String {
    if outcome {
        if rng.gen_bool(config.structured_code_status_rate) {
            if rng.gen_bool(0.3) {
                s.code_status_entries.push("Full code".to_string());
            }
            s.code_status_entries
                .push(DNR_STRUCTURED.choose(rng).expect("non-empty").to_string());
            match rng.gen_range(0..3) {
                0 => String::new(),
                1 => "Full code on admission, later changed to DNR/DNI.".to_string(),
                _ => DNR_TEXT.choose(rng).expect("non-empty").to_string(),
            }
        } else {
            if rng.gen_bool(0.3) {
                s.code_status_entries.push("Full code".to_string());
            }
            DNR_TEXT.choose(rng).expect("non-empty").to_string()
        }
    } else {
        if rng.gen_bool(0.6) {
            s.code_status_entries.push("Full code".to_string());
        }
        match rng.gen_range(0..10) {
            0 => "DNR/DNI was discussed but patient wishes to remain full code.".to_string(),
            1..=5 => "Code status: Full code.".to_string(),
            _ => String::new(),
        }
    }
}

/// Mixes the id prefix into the seed so two institutions sharing a seed still differ.
fn document_seed(config: &SynthConfig) -> u64 {
    config
        .doc_id_prefix
        .bytes()
        .fold(config.rng_seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

fn generate_one(config: &SynthConfig, index: usize) -> (Record, LatentTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(document_seed(config));
    rng.set_stream(index as u64);
    let doc_id = format!("{}-{:06}", config.doc_id_prefix, index);
    let mut structured = draw_structured(config, &doc_id, &mut rng);
    let (positive, documented) = draw_latent(config, &mut rng);
    let p = sigmoid(linear_predictor(config, &structured, &positive));
    let outcome = rng.gen_bool(p);
    let code_sentence = code_status(config, outcome, &mut structured, &mut rng);

    let sentences = social_sentences(config, structured.age, &positive, &documented, &mut rng);
    let (body, local_events) = layout_section(config.dialect, sentences, &mut rng);

    let h = headers(config.dialect);
    let sex_word = if structured.gender == "Female" { "woman" } else { "man" };
    let cc = *CHIEF_COMPLAINTS.choose(&mut rng).expect("non-empty");
    let pmh: Vec<&str> = PMH_ITEMS.choose_multiple(&mut rng, 3).copied().collect();

    let mut text = String::new();
    text.push_str(&format!(
        "Admission Date: [**2150-{}-{}**]\nService: MEDICINE\n\n",
        rng.gen_range(1..13),
        rng.gen_range(1..29)
    ));
    text.push_str(&format!("{}\n{cc}\n\n", h.cc));
    text.push_str(&format!(
        "{}\n{} y/o {sex_word} with {} presenting with {cc}.\n\n",
        h.hpi, structured.age, pmh[0]
    ));
    text.push_str(&format!("{}\n{}\n\n", h.pmh, pmh.join(", ")));
    let social_header = *h.social.choose(&mut rng).expect("non-empty");
    let same_line = config.dialect == Dialect::B && rng.gen_bool(0.3);
    text.push_str(social_header);
    text.push_str(if same_line { " " } else { "\n" });
    let section_start = text.chars().count();
    text.push_str(&body);
    let section_end = text.chars().count();
    text.push_str(&format!(
        "\n\n{}\n{}\n\n",
        h.family,
        FAMILY_HISTORY.choose(&mut rng).expect("non-empty")
    ));
    text.push_str(&format!("{}\nVS stable. NAD. Lungs with crackles.\n\n", h.exam));
    text.push_str(&format!("{}\nPt was treated for {cc}.", h.course));
    if !code_sentence.is_empty() {
        text.push(' ');
        text.push_str(&code_sentence);
    }
    text.push_str(&format!(
        "\n\n{}\n{}\n",
        h.dispo,
        if rng.gen_bool(0.6) { "Home" } else { "Extended Care" }
    ));

    let events = local_events
        .into_iter()
        .map(|mut ev| {
            ev.trigger = ev.trigger.shifted(section_start);
            for a in &mut ev.arguments {
                a.span = a.span.shifted(section_start);
            }
            ev
        })
        .collect();
    let document = AnnotatedDocument {
        doc_id: doc_id.clone(),
        text,
        social_history: Some(Span::new(section_start, section_end)),
        events,
    };
    let truth = LatentTruth {
        doc_id,
        positive,
        documented,
        outcome,
    };
    (Record::new(document, Some(structured)), truth)
}

/// Generates `config.n_documents` records; fully determined by the config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let (records, truth) = (0..config.n_documents).map(|i| generate_one(config, i)).unzip();
    Ok(SyntheticCorpus { records, truth })
}
