//! Adam training from random initialization and fine-tuning of an existing model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bio::{encode_bio, LabelAlphabet};
use super::model::{Hyper, Params, Provenance, TaggerModel, Vocabulary};
use super::tokenize::{tokenize_span, Token};
use crate::corpus::{AnnotatedDocument, Span};
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adam moment estimates for every parameter tensor.
pub struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

impl Adam {
    pub fn new(params: &Params) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        let ps = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        let gs = grad.tensors();
        for (((p, m), v), g) in ps.into_iter().zip(ms).zip(vs).zip(gs) {
            for (((pi, mi), vi), gi) in p.1.iter_mut().zip(m.1.iter_mut()).zip(v.1.iter_mut()).zip(g.1) {
                *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                *pi -= lr * (*mi / c1) / ((*vi / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// One document as index sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub trigger: Vec<usize>,
    pub argument: Vec<usize>,
}

/// The text region a document is tagged over: its social-history span, or the whole text.
pub fn tagging_region(doc: &AnnotatedDocument) -> Span {
    doc.social_history.unwrap_or_else(|| Span::new(0, doc.char_len()))
}

pub fn document_tokens(doc: &AnnotatedDocument) -> Vec<Token> {
    let region = tagging_region(doc);
    if region.is_empty() {
        return Vec::new();
    }
    tokenize_span(&doc.text, region)
}

fn label_ids(tags: &[String], alphabet: &LabelAlphabet, doc_id: &str) -> Result<Vec<usize>> {
    tags.iter()
        .map(|t| {
            alphabet
                .index_of(t)
                .ok_or_else(|| Error::Transfer(format!("label '{t}' in document {doc_id} is not in the model alphabet")))
        })
        .collect()
}

/// Encodes gold documents against a model's vocabulary and alphabets.
pub fn prepare_examples(model: &TaggerModel, docs: &[AnnotatedDocument]) -> Result<Vec<Example>> {
    docs.iter()
        .map(|doc| {
            let tokens = document_tokens(doc);
            let tags = encode_bio(doc, &tokens, false)?;
            Ok(Example {
                ids: model.token_ids(tokens.iter().map(|t| t.surface.as_str())),
                trigger: label_ids(&tags.trigger_tags, &model.trigger_alphabet, &doc.doc_id)?,
                argument: label_ids(&tags.argument_tags, &model.argument_alphabet, &doc.doc_id)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-document loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub model: TaggerModel,
    pub seed: u64,
}

fn run_epochs(
    model: &mut TaggerModel,
    examples: &[Example],
    epochs: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut adam = Adam::new(&model.params);
    let mut grad = model.params.zeros_like();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &examples[i];
            for (_, g) in grad.tensors_mut() {
                g.fill(0.0);
            }
            total += model.accumulate_gradient(&ex.ids, &ex.trigger, &ex.argument, 1.0, &mut grad);
            adam.update(&mut model.params, &grad, lr);
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training(format!("non-finite loss in epoch {}", epoch + 1)));
        }
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        losses.push(mean);
    }
    Ok(losses)
}

/// Trains a new model on gold documents. The vocabulary comes from these documents.
pub fn train(docs: &[AnnotatedDocument], hyper: &Hyper) -> Result<TrainReport> {
    if docs.is_empty() {
        return Err(Error::Training("training corpus is empty".into()));
    }
    if hyper.d_emb == 0 || hyper.d_h == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::Config("tagger dimensions and learning rate must be positive".into()));
    }
    let token_lists: Vec<Vec<Token>> = docs.iter().map(document_tokens).collect();
    let vocab = Vocabulary::build(token_lists.iter().flatten().map(|t| t.surface.as_str()), hyper.min_count);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let trig = LabelAlphabet::for_layer(super::bio::Layer::Trigger).len();
    let arg = LabelAlphabet::for_layer(super::bio::Layer::Argument).len();
    let params = Params::random(vocab.len(), hyper.d_emb, hyper.d_h, trig, arg, &mut rng);
    let mut model = TaggerModel::new(vocab, hyper.clone(), params, Provenance::Scratch)?;
    let examples = prepare_examples(&model, docs)?;
    let epoch_losses = run_epochs(&mut model, &examples, hyper.epochs, hyper.learning_rate, &mut rng)?;
    Ok(TrainReport {
        epoch_losses,
        model,
        seed: hyper.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 250,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

/// Continues training `model` on local gold documents with a fresh optimizer
/// state. The vocabulary stays fixed; unseen tokens map to UNK.
pub fn finetune(model: &TaggerModel, docs: &[AnnotatedDocument], config: &FinetuneConfig) -> Result<TrainReport> {
    let examples = prepare_examples(model, docs)?;
    if config.epochs == 0 {
        return Ok(TrainReport {
            epoch_losses: Vec::new(),
            model: model.clone(),
            seed: config.seed,
        });
    }
    if docs.is_empty() {
        return Err(Error::Training("fine-tuning corpus is empty".into()));
    }
    let mut tuned = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let epoch_losses = run_epochs(&mut tuned, &examples, config.epochs, config.learning_rate, &mut rng)?;
    tuned.provenance = Provenance::Transferred;
    tuned.hyper.epochs = config.epochs;
    tuned.hyper.learning_rate = config.learning_rate;
    tuned.hyper.seed = config.seed;
    Ok(TrainReport {
        epoch_losses,
        model: tuned,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventType, Role, SdohEvent, Subtype};

    fn doc(id: &str, text: &str, events: Vec<SdohEvent>) -> AnnotatedDocument {
        let mut d = AnnotatedDocument::new(id, text);
        d.events = events;
        d
    }

    pub(crate) fn toy_corpus() -> Vec<AnnotatedDocument> {
        vec![
            doc(
                "t1",
                "Denies alcohol use.",
                vec![SdohEvent::new(EventType::Alcohol, Span::new(7, 14)).with_argument(
                    Role::StatusTime,
                    Span::new(0, 6),
                    Some(Subtype::None),
                )],
            ),
            doc(
                "t2",
                "Former smoker.",
                vec![SdohEvent::new(EventType::Tobacco, Span::new(7, 13)).with_argument(
                    Role::StatusTime,
                    Span::new(0, 6),
                    Some(Subtype::Past),
                )],
            ),
            doc(
                "t3",
                "Lives with wife.",
                vec![SdohEvent::new(EventType::LivingStatus, Span::new(0, 5))
                    .with_argument(Role::StatusTime, Span::new(0, 5), Some(Subtype::Current))
                    .with_argument(Role::TypeLiving, Span::new(6, 15), Some(Subtype::WithFamily))],
            ),
            doc(
                "t4",
                "Works as a nurse.",
                vec![SdohEvent::new(EventType::Employment, Span::new(0, 5))
                    .with_argument(Role::StatusEmploy, Span::new(0, 5), Some(Subtype::Employed))
                    .with_argument(Role::Type, Span::new(11, 16), None)],
            ),
            doc(
                "t5",
                "Uses cocaine daily.",
                vec![SdohEvent::new(EventType::Drug, Span::new(5, 12))
                    .with_argument(Role::StatusTime, Span::new(0, 4), Some(Subtype::Current))
                    .with_argument(Role::Frequency, Span::new(13, 18), None)],
            ),
        ]
    }

    fn toy_hyper(epochs: usize) -> Hyper {
        Hyper {
            d_emb: 8,
            d_h: 8,
            epochs,
            learning_rate: 0.01,
            seed: 11,
            min_count: 1,
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(train(&[], &Hyper::default()), Err(Error::Training(_))));
    }

    #[test]
    fn loss_decreases_on_toy_corpus() {
        let report = train(&toy_corpus(), &toy_hyper(25)).unwrap();
        assert!(report.epoch_losses[0] > report.epoch_losses[24]);
        assert!(report.epoch_losses.iter().all(|l| l.is_finite() && *l >= 0.0));
    }

    #[test]
    fn equal_seeds_give_identical_parameters() {
        let a = train(&toy_corpus(), &toy_hyper(3)).unwrap();
        let b = train(&toy_corpus(), &toy_hyper(3)).unwrap();
        assert_eq!(a.model.params, b.model.params);
    }

    #[test]
    fn finetune_with_zero_epochs_is_identity() {
        let base = train(&toy_corpus(), &toy_hyper(2)).unwrap().model;
        let cfg = FinetuneConfig {
            epochs: 0,
            ..FinetuneConfig::default()
        };
        let tuned = finetune(&base, &toy_corpus(), &cfg).unwrap();
        assert_eq!(tuned.model, base);
    }

    #[test]
    fn finetune_defaults() {
        let cfg = FinetuneConfig::default();
        assert_eq!((cfg.epochs, cfg.learning_rate), (250, 0.001));
    }

    #[test]
    fn finetune_marks_transfer_and_changes_parameters() {
        let base = train(&toy_corpus(), &toy_hyper(2)).unwrap().model;
        let cfg = FinetuneConfig {
            epochs: 2,
            ..FinetuneConfig::default()
        };
        let tuned = finetune(&base, &toy_corpus(), &cfg).unwrap().model;
        assert_eq!(tuned.provenance, Provenance::Transferred);
        assert_ne!(tuned.params, base.params);
        assert_eq!(tuned.vocab, base.vocab);
    }

    #[test]
    fn finetune_rejects_foreign_alphabet() {
        let mut base = train(&toy_corpus(), &toy_hyper(1)).unwrap().model;
        let mut labels = base.trigger_alphabet.labels().to_vec();
        labels.retain(|l| !l.ends_with("Tobacco"));
        base.trigger_alphabet = LabelAlphabet::from_labels(labels).unwrap();
        let n = base.trigger_alphabet.len();
        base.params.trig_w = ndarray::Array2::zeros((n, base.params.d_h()));
        base.params.trig_b = ndarray::Array1::zeros(n);
        assert!(matches!(
            finetune(&base, &toy_corpus(), &FinetuneConfig::default()),
            Err(Error::Transfer(_))
        ));
    }
}
