//! Versioned JSON checkpoints.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::bio::LabelAlphabet;
use super::model::{Hyper, Params, Provenance, TaggerModel, Vocabulary, TENSOR_NAMES};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Alphabets {
    trigger: LabelAlphabet,
    argument: LabelAlphabet,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    provenance: Provenance,
    hyper: Hyper,
    vocab: Vec<String>,
    label_alphabets: Alphabets,
    weights: BTreeMap<String, Tensor>,
}

pub fn to_json(model: &TaggerModel) -> Result<String> {
    let shapes = model.params.shapes();
    let weights = model
        .params
        .tensors()
        .into_iter()
        .zip(shapes)
        .map(|((name, data), shape)| {
            (
                name.to_string(),
                Tensor {
                    shape,
                    data: data.to_vec(),
                },
            )
        })
        .collect();
    let ckpt = Checkpoint {
        format_version: FORMAT_VERSION,
        provenance: model.provenance,
        hyper: model.hyper.clone(),
        vocab: model.vocab.tokens().to_vec(),
        label_alphabets: Alphabets {
            trigger: model.trigger_alphabet.clone(),
            argument: model.argument_alphabet.clone(),
        },
        weights,
    };
    Ok(serde_json::to_string(&ckpt)?)
}

fn matrix(weights: &mut BTreeMap<String, Tensor>, name: &str) -> Result<Array2<f64>> {
    let t = weights
        .remove(name)
        .ok_or_else(|| Error::Validation(format!("checkpoint lacks tensor {name}")))?;
    match t.shape[..] {
        [r, c] => Array2::from_shape_vec((r, c), t.data)
            .map_err(|e| Error::Validation(format!("tensor {name}: {e}"))),
        _ => Err(Error::Validation(format!("tensor {name} must be two-dimensional"))),
    }
}

fn vector(weights: &mut BTreeMap<String, Tensor>, name: &str) -> Result<Array1<f64>> {
    let t = weights
        .remove(name)
        .ok_or_else(|| Error::Validation(format!("checkpoint lacks tensor {name}")))?;
    if t.shape != [t.data.len()] {
        return Err(Error::Validation(format!("tensor {name} has a bad shape")));
    }
    Ok(Array1::from_vec(t.data))
}

pub fn from_json(json: &str) -> Result<TaggerModel> {
    let mut ckpt: Checkpoint = serde_json::from_str(json)?;
    if ckpt.format_version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported checkpoint format version {}",
            ckpt.format_version
        )));
    }
    let w = &mut ckpt.weights;
    let params = Params {
        embedding: matrix(w, TENSOR_NAMES[0])?,
        w_ih: matrix(w, TENSOR_NAMES[1])?,
        w_hh: matrix(w, TENSOR_NAMES[2])?,
        bias: vector(w, TENSOR_NAMES[3])?,
        trig_w: matrix(w, TENSOR_NAMES[4])?,
        trig_b: vector(w, TENSOR_NAMES[5])?,
        arg_w: matrix(w, TENSOR_NAMES[6])?,
        arg_b: vector(w, TENSOR_NAMES[7])?,
    };
    if let Some(extra) = w.keys().next() {
        return Err(Error::Validation(format!("unexpected tensor {extra}")));
    }
    let model = TaggerModel {
        vocab: Vocabulary::from_tokens(ckpt.vocab)?,
        trigger_alphabet: ckpt.label_alphabets.trigger,
        argument_alphabet: ckpt.label_alphabets.argument,
        hyper: ckpt.hyper,
        provenance: ckpt.provenance,
        params,
    };
    model.validate()?;
    Ok(model)
}

pub fn save(model: &TaggerModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TaggerModel> {
    from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> TaggerModel {
        let vocab = Vocabulary::build(["x", "y"], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = Params::random(vocab.len(), 3, 2, 11, 41, &mut rng);
        TaggerModel::new(vocab, Hyper::default(), params, Provenance::Scratch).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = from_json(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.forward(&[2, 3, 1]), m.forward(&[2, 3, 1]));
        assert_eq!(to_json(&back).unwrap(), to_json(&m).unwrap());
    }

    #[test]
    fn layout_fields() {
        let v: serde_json::Value = serde_json::from_str(&to_json(&model()).unwrap()).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["provenance"], "scratch");
        assert_eq!(v["weights"]["lstm.weight_hh"]["shape"], serde_json::json!([8, 2]));
        assert_eq!(v["label_alphabets"]["trigger"][0], "O");
    }

    #[test]
    fn rejects_other_versions_and_bad_shapes() {
        let json = to_json(&model()).unwrap();
        assert!(from_json(&json.replacen("\"format_version\":1", "\"format_version\":2", 1)).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["weights"]["lstm.bias"]["shape"] = serde_json::json!([3]);
        assert!(from_json(&v.to_string()).is_err());
    }
}
