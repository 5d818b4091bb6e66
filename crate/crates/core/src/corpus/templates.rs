//! Sentence templates and lexicons for the synthetic social-history generator.
//!
//! Template markup:
//! - `[text](L1,L2)` annotated span; labels are `T` (trigger), `ST`/`SE`/`TL`
//!   (status argument taking the cell's subtype), `ST.past` style explicit
//!   subtypes, or a bare role name (`Amount`, `Type`, ...).
//! - `<...>` optional group, kept with probability one half.
//! - `{a|b}` inline alternatives, `$name` lexicon lookup.
//!
//! Lexicon lookups are contextual: `$trig` inside an alcohol sentence resolves
//! `trig.alcohol` first, then `trig.<subtype>`, then plain `trig`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::synth::Dialect;
use super::types::{Argument, EventType, Role, SdohEvent, Span, Subtype};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cell {
    /// Alcohol/Drug/Tobacco with StatusTime current, past or none.
    Substance(Subtype),
    Employment,
    /// Current living situation; the TypeLiving subtype comes from the sentence context.
    Living,
    LivingPast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Only {
    Any,
    A,
    B,
}

pub(crate) struct Template {
    cell: Cell,
    dialect: Only,
    event: Option<EventType>,
    subtype: Option<Subtype>,
    pub(crate) text: &'static str,
}

const fn t(cell: Cell, dialect: Only, text: &'static str) -> Template {
    Template {
        cell,
        dialect,
        event: None,
        subtype: None,
        text,
    }
}

const fn te(cell: Cell, dialect: Only, event: EventType, text: &'static str) -> Template {
    Template {
        cell,
        dialect,
        event: Some(event),
        subtype: None,
        text,
    }
}

const fn ts(cell: Cell, dialect: Only, subtype: Subtype, text: &'static str) -> Template {
    Template {
        cell,
        dialect,
        event: None,
        subtype: Some(subtype),
        text,
    }
}

use Cell::*;
use Only::{Any, A, B};

const NONE: Cell = Substance(Subtype::None);
const CUR: Cell = Substance(Subtype::Current);
const PAST: Cell = Substance(Subtype::Past);

pub(crate) static TEMPLATES: &[Template] = &[
    // substance use, negated
    t(NONE, Any, "[Denies](ST) [$trig](T)."),
    t(NONE, Any, "[Denies](ST) any [$trig](T) use."),
    t(NONE, Any, "[No](ST) [$trig](T)."),
    t(NONE, Any, "[$trig](T): [denies](ST)."),
    t(NONE, Any, "[Never](ST) used [$trig](T)."),
    t(NONE, Any, "[Negative](ST) for [$trig](T)."),
    t(NONE, Any, "Pt [denies](ST) [$trig](T) {use|history}."),
    t(NONE, Any, "[$trig](T) - [none](ST)."),
    t(NONE, A, "[No](ST) history of [$trig](T) use."),
    t(NONE, A, "[$trig](T) use: [never](ST)."),
    t(NONE, B, "[$trig](T): [neg](ST)."),
    t(NONE, B, "[No](ST) [$trig](T) reported."),
    t(NONE, B, "[Neg](ST) {for|re} [$trig](T)."),
    te(NONE, Any, EventType::Tobacco, "[Non](ST)-[smoker](T)."),
    te(NONE, B, EventType::Tobacco, "[Never](ST) [smoker](T)."),
    te(NONE, A, EventType::Alcohol, "[Does not](ST) [drink](T)."),
    // substance use, current
    t(CUR, Any, "[Current](ST) [$trig](T) use< [$freq](Frequency)>."),
    t(CUR, Any, "[Reports](ST) [$trig](T) use< of [$amount](Amount)>< [$freq](Frequency)>."),
    t(CUR, Any, "[$trig](T): [current](ST)<, [$amount](Amount)>."),
    t(CUR, Any, "[Currently](ST) uses [$trig](T)< [$freq](Frequency)>."),
    t(CUR, Any, "[Active](ST) [$trig](T) use< [$dur](Duration)>."),
    t(CUR, Any, "[$trig](T) - [yes](ST)<, [$type](Type)>."),
    t(CUR, Any, "[Uses](ST) [$trig](T)< [$freq](Frequency)>< [$dur](Duration)>."),
    t(CUR, A, "[+](ST) [$trig](T)<, [$amount](Amount) [$freq](Frequency)>."),
    t(CUR, A, "[Still](ST) using [$trig](T)< [$freq](Frequency)>."),
    t(CUR, B, "[$trig](T): [pos](ST)<, [$freq](Frequency)>."),
    t(CUR, B, "[Ongoing](ST) [$trig](T) use< [$dur](Duration)>."),
    te(CUR, Any, EventType::Alcohol, "[Drinks](T,ST) [$amount](Amount) [$freq](Frequency)."),
    te(CUR, Any, EventType::Alcohol, "[Drinks](T,ST) [$type](Type)< [$freq](Frequency)>."),
    te(CUR, Any, EventType::Tobacco, "[Smokes](T,ST) [$amount](Amount)< [$dur](Duration)>."),
    te(CUR, Any, EventType::Tobacco, "[Current](ST) [smoker](T)<, [$amount](Amount)>."),
    te(CUR, Any, EventType::Drug, "[Active](ST) [$type](T,Type) use<, [$method](Method)>."),
    te(CUR, B, EventType::Drug, "[Uses](ST) [$type](T,Type) [$method](Method)< [$freq](Frequency)>."),
    // substance use, past
    t(PAST, Any, "[Former](ST) [$trig](T) use<, quit [$hist](History)>."),
    t(PAST, Any, "[Previously](ST) used [$trig](T)< [$dur](Duration)>."),
    t(PAST, Any, "[History of](ST) [$trig](T) use<, quit [$hist](History)>."),
    t(PAST, Any, "[Remote](ST) [$trig](T) use."),
    t(PAST, Any, "[$trig](T): [former](ST)<, quit [$hist](History)>."),
    t(PAST, Any, "[Quit](ST) [$trig](T) [$hist](History)."),
    t(PAST, Any, "[Past](ST) [$trig](T) use< [$dur](Duration)>."),
    t(PAST, Any, "[Prior](ST) [$trig](T) use<, [$amount](Amount)>."),
    t(PAST, B, "[Hx](ST) of [$trig](T) use< [$dur](Duration)>."),
    t(PAST, B, "[$trig](T): [quit](ST) [$hist](History)."),
    t(PAST, A, "[Stopped](ST) [$trig](T) [$hist](History)."),
    te(PAST, Any, EventType::Tobacco, "[Former](ST) [smoker](T)<, [$amount](Amount)><, quit [$hist](History)>."),
    te(PAST, B, EventType::Tobacco, "[Ex](ST)-[smoker](T)< [$dur](Duration)>."),
    te(PAST, Any, EventType::Drug, "[Former](ST) [$type](T,Type) use<, [$method](Method)>."),
    te(PAST, A, EventType::Alcohol, "[Used to](ST) [drink](T) [$type](Type)."),
    // employment; $emp resolves per StatusEmploy subtype
    t(Employment, Any, "[$emp](T,SE)< as a [$job](Type)>."),
    t(Employment, Any, "Pt is [$emp](T,SE)<, [$job](Type)>."),
    t(Employment, Any, "Employment: [$emp](T,SE)."),
    t(Employment, Any, "[$emp](T,SE)< [$empdur](Duration)>."),
    t(Employment, Any, "Occupation: [$emp](T,SE)<, [$job](Type)>."),
    t(Employment, Any, "{He|She} is [$emp](T,SE)."),
    t(Employment, Any, "[$emp](T,SE), previously [$job](Type)."),
    t(Employment, Any, "Work: [$emp](T,SE)< [$empdur](Duration)>."),
    t(Employment, A, "Currently [$emp](T,SE)."),
    t(Employment, B, "Occ: [$emp](T,SE)<, [$job](Type)>."),
    t(Employment, B, "Job status: [$emp](T,SE)."),
    ts(Employment, Any, Subtype::Employed, "[Works](T,SE) as a [$job](Type)< [$empdur](Duration)>."),
    ts(Employment, Any, Subtype::Retired, "[Retired](T,SE) [$job](Type)."),
    ts(Employment, B, Subtype::OnDisability, "[Receives disability](T,SE)< since [$year](Duration)>."),
    // living situation, current
    t(Living, Any, "[$live](T,ST) [$lt](TL)< in $place>."),
    t(Living, Any, "Pt [$live](T,ST) [$lt](TL)."),
    t(Living, Any, "Living situation: [$live](T,ST) [$lt](TL)."),
    t(Living, Any, "[$live](T,ST) at home [$lt](TL)."),
    t(Living, Any, "Home: [$live](T,ST) [$lt](TL)."),
    t(Living, Any, "{He|She} [$live](T,ST) [$lt](TL)< in $place>."),
    t(Living, Any, "[$live](T,ST) [$lt](TL)<, $filler>."),
    t(Living, Any, "Social: [$live](T,ST) [$lt](TL)."),
    t(Living, A, "[Currently](ST) [resides](T) [$lt](TL)."),
    t(Living, B, "[Lives](T,ST): [$lt](TL)."),
    t(Living, B, "[$live](T,ST) [$lt](TL) {at baseline|now}."),
    ts(Living, Any, Subtype::Homeless, "[Currently](ST) [homeless](T,TL)."),
    ts(Living, Any, Subtype::Homeless, "Pt is [currently](ST) [homeless](T,TL)."),
    ts(Living, B, Subtype::Homeless, "[Undomiciled](T,TL) [now](ST)."),
    // living situation, past (never derives a current status)
    t(LivingPast, Any, "[Previously](ST.past) [lived](T) [$lt](TL)."),
    t(LivingPast, Any, "[Formerly](ST.past) [resided](T) [$lt](TL)."),
    t(LivingPast, Any, "[Used to](ST.past) [live](T) [$lt](TL)."),
];

pub(crate) static FILLERS: &[&str] = &[
    "Originally from $city.",
    "Enjoys fishing.",
    "Has a dog.",
    "Attends church weekly.",
    "Pt is a poor historian.",
    "Speaks Spanish and English.",
    "Veteran.",
    "Likes to garden.",
    "Unable to obtain further details.",
];

/// (key, dialect, entries). Within a row, entries are drawn with Zipf-like
/// weights (earlier entries more often). Rows tagged with the other dialect
/// still leak in at a low rate, so the dialects differ mostly in frequency.
static LEXICON: &[(&str, Only, &[&str])] = &[
    ("trig.alcohol", Any, &["alcohol", "EtOH", "etoh", "drinking", "booze", "spirits", "alcoholic beverages", "liquor", "wine", "beer", "ethanol", "alcoholic drinks", "spirits/liquor", "alcohol products", "drinks", "hard alcohol", "EtOH products"]),
    ("trig.alcohol", A, &["ETOH", "alcohol", "beer", "EtOH"]),
    ("trig.alcohol", B, &["alc", "ethanol", "drinking", "EtOH"]),
    ("trig.drug", Any, &["drugs", "illicit drugs", "drug", "illicits", "recreational drugs", "street drugs", "illegal drugs", "IV drugs", "cocaine", "heroin", "marijuana", "opiates", "IVDU", "substances", "controlled substances", "narcotics", "intravenous drugs", "drugs of abuse", "polysubstance", "IV drug use", "injection drugs", "pills"]),
    ("trig.drug", A, &["IVDU", "illicits", "recreational drug", "drugs"]),
    ("trig.drug", B, &["ivdu", "substance", "street drug", "illicit drugs"]),
    ("trig.tobacco", Any, &["tobacco", "smoking", "cigarettes", "tob", "cigs", "nicotine", "cigars", "smokeless tobacco", "chew", "snuff", "vaping", "pipe", "cigarette smoking", "tobacco products", "cigs/cigars", "nicotine products", "rolled cigarettes", "menthols"]),
    ("trig.tobacco", A, &["tob", "TOB", "cig", "tobacco"]),
    ("trig.tobacco", B, &["tobacco product", "cigs", "nicotine", "smoking"]),
    ("type.alcohol", Any, &["beer", "wine", "vodka", "liquor", "whiskey", "rum", "gin", "hard liquor", "tequila", "brandy", "scotch", "bourbon", "malt liquor"]),
    ("type.alcohol", B, &["hard liquor", "whiskey", "mixed drinks"]),
    ("type.drug", Any, &["cocaine", "heroin", "marijuana", "crack", "MJ", "opioids", "meth", "benzos", "oxycodone", "LSD", "ecstasy", "mushrooms", "methamphetamine", "fentanyl", "ketamine", "PCP", "percocet", "crack cocaine"]),
    ("type.drug", A, &["MJ", "opioids", "cannabis"]),
    ("type.drug", B, &["meth", "benzos", "weed"]),
    ("type.tobacco", Any, &["cigarettes", "cigars", "pipe", "chewing tobacco", "vape", "e-cigarettes", "snuff", "hookah", "cigarillos"]),
    ("type.tobacco", B, &["chewing tobacco", "vape", "dip"]),
    ("amount.alcohol", Any, &["2 drinks", "1-2 drinks", "3-4 beers", "a pint", "6 beers", "a bottle of wine", "2 glasses of wine", "a few beers"]),
    ("amount.alcohol", A, &["a six pack", "one glass"]),
    ("amount.alcohol", B, &["a fifth", "several drinks"]),
    ("amount.drug", Any, &["1 g", "a few lines", "2 bags", "$50 worth", "a gram"]),
    ("amount.tobacco", Any, &["1 ppd", "1/2 ppd", "2 packs per day", "half a pack", "1 pack a day", "3 cigarettes a day", "2 ppd"]),
    ("amount.tobacco", A, &["40 pack-year", "10 cigarettes a day"]),
    ("amount.tobacco", B, &["1 pk/day", "20 pk-yr"]),
    ("freq", Any, &["daily", "occasionally", "on weekends", "weekly", "rarely", "every day", "twice a week", "monthly"]),
    ("freq", A, &["nightly", "socially"]),
    ("freq", B, &["2-3x/week", "most days"]),
    ("dur", Any, &["for 20 years", "for many years", "for 5 years", "since his 20s", "for 30 years", "since high school"]),
    ("dur", A, &["x 10 yrs", "for decades"]),
    ("dur", B, &["since age 15", "x20y"]),
    ("hist", Any, &["5 years ago", "in 2010", "10 yrs ago", "20 years ago", "in the 1990s", "2 months ago", "in 1985"]),
    ("hist", A, &["several years ago", "last year"]),
    ("hist", B, &["in 2001", "3y ago"]),
    ("method.drug", Any, &["IV", "intranasal", "smoked", "snorted", "by injection", "orally"]),
    ("method.drug", B, &["inhaled", "injected"]),
    ("emp.employed", Any, &["employed", "working", "works", "employed full time", "working part time", "self-employed", "employed part time", "gainfully employed", "working as a contractor", "works two jobs", "works nights", "employed as a temp"]),
    ("emp.employed", A, &["works full time", "employed full-time"]),
    ("emp.employed", B, &["working ft", "currently working"]),
    ("emp.unemployed", Any, &["unemployed", "not working", "out of work", "without a job", "not employed", "between jobs", "recently laid off", "seeking work", "currently unemployed"]),
    ("emp.unemployed", A, &["out of work"]),
    ("emp.unemployed", B, &["jobless", "laid off"]),
    ("emp.retired", Any, &["retired", "a retiree", "now retired", "recently retired", "retired early"]),
    ("emp.retired", A, &["a retiree"]),
    ("emp.retired", B, &["now retired"]),
    ("emp.on_disability", Any, &["on disability", "disabled", "on SSDI", "receiving disability", "on SSI", "on long term disability", "on medical disability", "on permanent disability"]),
    ("emp.on_disability", A, &["on SSDI"]),
    ("emp.on_disability", B, &["receiving SSI", "on disability benefits"]),
    ("emp.homemaker", Any, &["a homemaker", "homemaker", "a housewife"]),
    ("emp.homemaker", A, &["a housewife"]),
    ("emp.homemaker", B, &["stay at home parent"]),
    ("emp.student", Any, &["a student", "student", "a college student"]),
    ("emp.student", A, &["a college student"]),
    ("emp.student", B, &["in grad school"]),
    ("job", Any, &[
        "teacher", "nurse", "mechanic", "cashier", "electrician", "plumber", "accountant", "lawyer",
        "carpenter", "engineer", "waitress", "security guard", "janitor", "chef", "painter", "salesman",
        "firefighter", "police officer", "librarian", "pharmacist", "farmer", "barber", "welder", "postal worker",
        "secretary", "dentist", "professor", "social worker", "machinist", "bartender",
    ]),
    ("job", A, &["construction worker", "truck driver", "fisherman"]),
    ("job", B, &["bus driver", "line cook", "MBTA worker"]),
    ("empdur", Any, &["for 10 years", "since 2005", "for 2 years", "for 25 years", "since 1999"]),
    ("empdur", B, &["x 3 yrs"]),
    ("year", Any, &["2008", "2012", "2015", "1998"]),
    ("live", Any, &["lives", "resides", "living", "is living", "currently lives", "stays", "resides at home", "lives at home", "dwells", "lodges", "has been living", "now lives"]),
    ("live", A, &["living", "currently lives"]),
    ("live", B, &["stays", "lives at home"]),
    ("lt.with_family", Any, &[
        "with wife", "with husband", "with family", "with daughter", "with son", "with his wife", "with her husband",
        "with parents", "with mother", "with sister", "with brother", "with children", "with partner", "with spouse",
        "with grandchildren", "with niece", "with fiance", "with girlfriend", "with boyfriend", "with aunt", "with cousin",
        "with stepson", "with granddaughter", "with in-laws", "with nephew", "with twin sister", "with adult son", "with adult daughter",
    ]),
    ("lt.with_family", A, &["with his wife", "with her husband", "with parents"]),
    ("lt.with_family", B, &["w/ wife", "with son and grandchildren"]),
    ("lt.alone", Any, &["alone", "by himself", "by herself", "independently alone", "on his own", "on her own", "alone in an apartment", "independently", "by self", "without others"]),
    ("lt.alone", B, &["on own", "solo"]),
    ("lt.with_others", Any, &["with roommate", "with a friend", "with friends", "with roommates", "with housemates", "with a caregiver", "with a boarder", "with a landlord", "with a coworker", "in group home", "with a tenant", "with a companion", "in assisted living"]),
    ("lt.with_others", A, &["with roommates"]),
    ("lt.with_others", B, &["w/ roommate", "with housemates"]),
    ("lt.homeless", Any, &["in a shelter", "on the street", "in a homeless shelter", "in shelters", "in his car", "couch surfing", "on the streets", "outdoors", "in transitional housing", "in a motel", "in a tent", "with no fixed address"]),
    ("lt.homeless", A, &["in a homeless shelter"]),
    ("lt.homeless", B, &["in his car", "in shelters"]),
    ("place", Any, &["an apartment", "a house", "Boston", "a condo", "Quincy", "Dorchester", "a trailer", "senior housing"]),
    ("place", B, &["a condo", "Quincy"]),
    ("filler", Any, &["independent in ADLs", "has stairs at home", "uses a cane", "has VNA services"]),
    ("city", Any, &["Ohio", "Haiti", "Boston", "Ireland", "Puerto Rico", "Vietnam", "Texas", "Italy"]),
];

/// Weight of a row entry: Zipf over its position, scaled by how the row's
/// dialect relates to the sampling dialect.
fn entry_weight(only: Only, dialect: Dialect, rank: usize) -> f64 {
    let base = match only {
        Any => 1.0,
        _ if dialect_ok(only, dialect) => 2.0,
        _ => 0.1,
    };
    base / ((rank + 1) as f64).powf(0.7)
}

fn weighted_entries(key: &str, dialect: Dialect) -> Vec<(&'static str, f64)> {
    LEXICON
        .iter()
        .filter(|(k, _, _)| *k == key)
        .flat_map(|(_, only, entries)| {
            entries
                .iter()
                .enumerate()
                .map(move |(rank, e)| (*e, entry_weight(*only, dialect, rank)))
        })
        .collect()
}

fn dialect_ok(only: Only, dialect: Dialect) -> bool {
    match only {
        Any => true,
        A => dialect == Dialect::A,
        B => dialect == Dialect::B,
    }
}

/// Entries a dialect prefers (shared rows plus its own rows).
#[cfg(test)]
fn lexicon_entries(key: &str, dialect: Dialect) -> Vec<&'static str> {
    LEXICON
        .iter()
        .filter(|(k, only, _)| *k == key && dialect_ok(*only, dialect))
        .flat_map(|(_, _, entries)| entries.iter().copied())
        .collect()
}

fn event_key(event: EventType) -> &'static str {
    match event {
        EventType::Alcohol => "alcohol",
        EventType::Drug => "drug",
        EventType::Tobacco => "tobacco",
        EventType::Employment => "employment",
        EventType::LivingStatus => "living",
    }
}

/// The templates usable for a (cell, event, subtype) combination in a dialect.
pub(crate) fn candidates(
    cell: Cell,
    event: EventType,
    subtype: Option<Subtype>,
    dialect: Dialect,
) -> Vec<&'static Template> {
    TEMPLATES
        .iter()
        .filter(|t| t.cell == cell && dialect_ok(t.dialect, dialect))
        .filter(|t| t.event.map_or(true, |e| e == event))
        .filter(|t| match t.subtype {
            Some(st) => Some(st) == subtype,
            // homeless uses its own lexicon entries with the generic templates too
            None => true,
        })
        .collect()
}

/// Relative weight of a template written for the other dialect.
const TEMPLATE_LEAK: f64 = 0.1;

/// All templates for the combination with sampling weights: the dialect's own
/// and shared templates at 1, the other dialect's at a small leak weight.
pub(crate) fn weighted_candidates(
    cell: Cell,
    event: EventType,
    subtype: Option<Subtype>,
    dialect: Dialect,
) -> Vec<(&'static Template, f64)> {
    let other = match dialect {
        Dialect::A => Dialect::B,
        Dialect::B => Dialect::A,
    };
    let own = candidates(cell, event, subtype, dialect);
    let leaked = candidates(cell, event, subtype, other)
        .into_iter()
        .filter(|t| t.dialect != Any)
        .map(|t| (t, TEMPLATE_LEAK));
    own.into_iter().map(|t| (t, 1.0)).chain(leaked).collect()
}

/// Rendering context for one sentence.
pub(crate) struct Context {
    pub event: EventType,
    /// Subtype for `ST`, `SE` and `TL` labels.
    pub status_time: Option<Subtype>,
    pub status_employ: Option<Subtype>,
    pub type_living: Option<Subtype>,
    pub dialect: Dialect,
}

impl Context {
    fn lookup<R: Rng>(&self, name: &str, rng: &mut R) -> &'static str {
        let mut keys = vec![format!("{name}.{}", event_key(self.event))];
        for st in [self.status_employ, self.type_living].into_iter().flatten() {
            keys.push(format!("{name}.{}", st.as_str()));
        }
        keys.push(name.to_string());
        for key in keys {
            let entries = weighted_entries(&key, self.dialect);
            if let Ok((entry, _)) = entries.choose_weighted(rng, |e| e.1) {
                return entry;
            }
        }
        panic!("no lexicon entry for ${name}");
    }
}

/// A rendered sentence: text plus the event its labels describe.
pub(crate) struct Rendered {
    pub text: String,
    pub event: Option<SdohEvent>,
}

struct Writer {
    out: String,
    chars: usize,
}

impl Writer {
    fn push(&mut self, s: &str) {
        self.out.push_str(s);
        self.chars += s.chars().count();
    }
}

fn find_close(src: &[char], open_at: usize, open: char, close: char) -> usize {
    let mut depth = 0;
    for (i, &c) in src.iter().enumerate().skip(open_at) {
        if c == open {
            depth += 1;
        } else if c == close {
            depth -= 1;
            if depth == 0 {
                return i;
            }
        }
    }
    panic!("unbalanced '{open}' in template");
}

fn render_into<R: Rng>(src: &[char], ctx: &Context, rng: &mut R, w: &mut Writer, labels: &mut Vec<(usize, usize, String)>) {
    let mut i = 0;
    while i < src.len() {
        match src[i] {
            '[' => {
                let close = find_close(src, i, '[', ']');
                assert_eq!(src.get(close + 1), Some(&'('), "label list must follow ']'");
                let paren = find_close(src, close + 1, '(', ')');
                let start = w.chars;
                render_into(&src[i + 1..close], ctx, rng, w, labels);
                let end = w.chars;
                let label_text: String = src[close + 2..paren].iter().collect();
                for label in label_text.split(',') {
                    labels.push((start, end, label.trim().to_string()));
                }
                i = paren + 1;
            }
            '<' => {
                let close = find_close(src, i, '<', '>');
                if rng.gen_bool(0.5) {
                    render_into(&src[i + 1..close], ctx, rng, w, labels);
                }
                i = close + 1;
            }
            '{' => {
                let close = find_close(src, i, '{', '}');
                let body: String = src[i + 1..close].iter().collect();
                let options: Vec<&str> = body.split('|').collect();
                w.push(options.choose(rng).copied().unwrap_or(""));
                i = close + 1;
            }
            '$' => {
                let mut j = i + 1;
                while j < src.len() && (src[j].is_ascii_lowercase() || src[j] == '_') {
                    j += 1;
                }
                let name: String = src[i + 1..j].iter().collect();
                let value = ctx.lookup(&name, rng);
                w.push(value);
                i = j;
            }
            c => {
                let mut buf = [0u8; 4];
                w.push(c.encode_utf8(&mut buf));
                i += 1;
            }
        }
    }
}

fn role_for(label: &str) -> Option<Role> {
    Some(match label {
        "ST" => Role::StatusTime,
        "SE" => Role::StatusEmploy,
        "TL" => Role::TypeLiving,
        "Amount" => Role::Amount,
        "Duration" => Role::Duration,
        "Frequency" => Role::Frequency,
        "History" => Role::History,
        "Method" => Role::Method,
        "Type" => Role::Type,
        _ => return None,
    })
}

/// Renders a template into sentence text plus its annotated event (offsets local to the sentence).
pub(crate) fn render<R: Rng>(template: &Template, ctx: &Context, rng: &mut R) -> Rendered {
    let src: Vec<char> = template.text.chars().collect();
    let mut w = Writer {
        out: String::new(),
        chars: 0,
    };
    let mut labels = Vec::new();
    render_into(&src, ctx, rng, &mut w, &mut labels);

    let mut trigger = None;
    let mut arguments = Vec::new();
    for (start, end, label) in labels {
        let span = Span::new(start, end);
        if label == "T" {
            trigger = Some(span);
            continue;
        }
        let (base, explicit) = match label.split_once('.') {
            Some((b, st)) => (b.to_string(), Some(st.parse::<Subtype>().expect("template subtype"))),
            None => (label.clone(), None),
        };
        let role = role_for(&base).unwrap_or_else(|| panic!("unknown template label {label}"));
        let subtype = explicit.or(match role {
            Role::StatusTime => ctx.status_time,
            Role::StatusEmploy => ctx.status_employ,
            Role::TypeLiving => ctx.type_living,
            _ => None,
        });
        arguments.push(Argument::new(role, span, subtype));
    }
    let event = trigger.map(|trigger| SdohEvent {
        event_type: ctx.event,
        trigger,
        arguments,
    });
    Rendered { text: w.out, event }
}

/// Renders a filler sentence carrying no annotation.
pub(crate) fn render_filler<R: Rng>(dialect: Dialect, rng: &mut R) -> String {
    let template = FILLERS.choose(rng).copied().unwrap_or("Veteran.");
    let ctx = Context {
        event: EventType::LivingStatus,
        status_time: None,
        status_employ: None,
        type_living: None,
        dialect,
    };
    let src: Vec<char> = template.chars().collect();
    let mut w = Writer {
        out: String::new(),
        chars: 0,
    };
    let mut labels = Vec::new();
    render_into(&src, &ctx, rng, &mut w, &mut labels);
    w.out
}
