//! Embedding → single-direction LSTM → two softmax heads, with hand-written
//! backpropagation through time.

use std::collections::HashMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bio::{LabelAlphabet, Layer};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub d_emb: usize,
    pub d_h: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Tokens seen fewer times than this in training map to UNK, so the UNK row gets trained.
    pub min_count: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            d_emb: 32,
            d_h: 64,
            epochs: 250,
            learning_rate: 0.001,
            seed: 0,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Scratch,
    Transferred,
}

/// Lowercased token → dense index; 0 is PAD, 1 is UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != "<pad>" || tokens[UNK] != "<unk>" {
            return Err(Error::Validation("vocabulary must start with <pad>, <unk>".into()));
        }
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(Error::Validation("duplicate vocabulary entry".into()));
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Sorted vocabulary of the lowercased surfaces occurring at least `min_count` times.
    pub fn build<'a>(surfaces: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for s in surfaces {
            *counts.entry(s.to_lowercase()).or_default() += 1;
        }
        let mut kept: Vec<String> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count.max(1) && t != "<pad>" && t != "<unk>")
            .map(|(t, _)| t)
            .collect();
        kept.sort();
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(kept);
        Vocabulary::from_tokens(tokens).expect("well-formed")
    }

    pub fn lookup(&self, surface: &str) -> usize {
        self.index.get(&surface.to_lowercase()).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// All trainable tensors. LSTM gate blocks are stacked input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embedding: Array2<f64>,
    pub w_ih: Array2<f64>,
    pub w_hh: Array2<f64>,
    pub bias: Array1<f64>,
    pub trig_w: Array2<f64>,
    pub trig_b: Array1<f64>,
    pub arg_w: Array2<f64>,
    pub arg_b: Array1<f64>,
}

pub const TENSOR_NAMES: [&str; 8] = [
    "embedding",
    "lstm.weight_ih",
    "lstm.weight_hh",
    "lstm.bias",
    "trigger_head.weight",
    "trigger_head.bias",
    "argument_head.weight",
    "argument_head.bias",
];

impl Params {
    pub fn zeros(vocab: usize, d_emb: usize, d_h: usize, n_trig: usize, n_arg: usize) -> Self {
        Params {
            embedding: Array2::zeros((vocab, d_emb)),
            w_ih: Array2::zeros((4 * d_h, d_emb)),
            w_hh: Array2::zeros((4 * d_h, d_h)),
            bias: Array1::zeros(4 * d_h),
            trig_w: Array2::zeros((n_trig, d_h)),
            trig_b: Array1::zeros(n_trig),
            arg_w: Array2::zeros((n_arg, d_h)),
            arg_b: Array1::zeros(n_arg),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params::zeros(
            self.embedding.nrows(),
            self.embedding.ncols(),
            self.w_hh.ncols(),
            self.trig_w.nrows(),
            self.arg_w.nrows(),
        )
    }

    /// Every entry from uniform(-0.1, 0.1), drawn tensor by tensor in `TENSOR_NAMES` order.
    pub fn random<R: Rng>(vocab: usize, d_emb: usize, d_h: usize, n_trig: usize, n_arg: usize, rng: &mut R) -> Self {
        let mut p = Params::zeros(vocab, d_emb, d_h, n_trig, n_arg);
        let dist = Uniform::new(-0.1, 0.1);
        for (_, data) in p.tensors_mut() {
            for x in data {
                *x = dist.sample(rng);
            }
        }
        p
    }

    pub fn d_emb(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn d_h(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn shapes(&self) -> [Vec<usize>; 8] {
        [
            self.embedding.shape().to_vec(),
            self.w_ih.shape().to_vec(),
            self.w_hh.shape().to_vec(),
            self.bias.shape().to_vec(),
            self.trig_w.shape().to_vec(),
            self.trig_b.shape().to_vec(),
            self.arg_w.shape().to_vec(),
            self.arg_b.shape().to_vec(),
        ]
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 8] {
        fn s(a: Option<&[f64]>) -> &[f64] {
            a.expect("standard layout")
        }
        [
            (TENSOR_NAMES[0], s(self.embedding.as_slice())),
            (TENSOR_NAMES[1], s(self.w_ih.as_slice())),
            (TENSOR_NAMES[2], s(self.w_hh.as_slice())),
            (TENSOR_NAMES[3], s(self.bias.as_slice())),
            (TENSOR_NAMES[4], s(self.trig_w.as_slice())),
            (TENSOR_NAMES[5], s(self.trig_b.as_slice())),
            (TENSOR_NAMES[6], s(self.arg_w.as_slice())),
            (TENSOR_NAMES[7], s(self.arg_b.as_slice())),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 8] {
        fn s<'a>(a: Option<&'a mut [f64]>) -> &'a mut [f64] {
            a.expect("standard layout")
        }
        [
            (TENSOR_NAMES[0], s(self.embedding.as_slice_mut())),
            (TENSOR_NAMES[1], s(self.w_ih.as_slice_mut())),
            (TENSOR_NAMES[2], s(self.w_hh.as_slice_mut())),
            (TENSOR_NAMES[3], s(self.bias.as_slice_mut())),
            (TENSOR_NAMES[4], s(self.trig_w.as_slice_mut())),
            (TENSOR_NAMES[5], s(self.trig_b.as_slice_mut())),
            (TENSOR_NAMES[6], s(self.arg_w.as_slice_mut())),
            (TENSOR_NAMES[7], s(self.arg_b.as_slice_mut())),
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, d)| d.iter().all(|x| x.is_finite()))
    }

    pub fn check_dims(&self) -> Result<()> {
        let (e, h) = (self.d_emb(), self.d_h());
        let ok = self.w_ih.shape() == [4 * h, e]
            && self.w_hh.shape() == [4 * h, h]
            && self.bias.len() == 4 * h
            && self.trig_w.ncols() == h
            && self.trig_b.len() == self.trig_w.nrows()
            && self.arg_w.ncols() == h
            && self.arg_b.len() == self.arg_w.nrows();
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("inconsistent tagger parameter shapes".into()))
        }
    }
}

/// Per-token label distributions of both layers (rows sum to one).
#[derive(Debug, Clone, PartialEq)]
pub struct Distributions {
    pub trigger: Array2<f64>,
    pub argument: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub vocab: Vocabulary,
    pub trigger_alphabet: LabelAlphabet,
    pub argument_alphabet: LabelAlphabet,
    pub hyper: Hyper,
    pub provenance: Provenance,
    pub params: Params,
}

struct Cache {
    x: Array2<f64>,
    /// Activated gates per step: i, f, o, g.
    gates: Array2<f64>,
    c: Array2<f64>,
    h: Array2<f64>,
    p_trig: Array2<f64>,
    p_arg: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax in place.
fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|p| p / sum);
    }
}

/// Summed negative log-likelihood of `gold` under row-wise softmax of `logits`.
fn nll(logits: &Array2<f64>, gold: &[usize]) -> f64 {
    logits
        .rows()
        .into_iter()
        .zip(gold)
        .map(|(row, &y)| {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = row.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
            lse - row[y]
        })
        .sum()
}

impl TaggerModel {
    /// A model with the standard label alphabets and the given parameters.
    pub fn new(vocab: Vocabulary, hyper: Hyper, params: Params, provenance: Provenance) -> Result<Self> {
        let model = TaggerModel {
            vocab,
            trigger_alphabet: LabelAlphabet::for_layer(Layer::Trigger),
            argument_alphabet: LabelAlphabet::for_layer(Layer::Argument),
            hyper,
            provenance,
            params,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.check_dims()?;
        let p = &self.params;
        if p.embedding.nrows() != self.vocab.len()
            || p.trig_w.nrows() != self.trigger_alphabet.len()
            || p.arg_w.nrows() != self.argument_alphabet.len()
        {
            return Err(Error::Validation("tagger parameters do not match vocabulary or alphabets".into()));
        }
        if !p.all_finite() {
            return Err(Error::Validation("tagger parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn token_ids<'a>(&self, surfaces: impl IntoIterator<Item = &'a str>) -> Vec<usize> {
        surfaces.into_iter().map(|s| self.vocab.lookup(s)).collect()
    }

    fn hidden_states(&self, ids: &[usize]) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
        let p = &self.params;
        let (t_len, d_h) = (ids.len(), p.d_h());
        let x = p.embedding.select(Axis(0), ids);
        let mut gates = x.dot(&p.w_ih.t());
        gates += &p.bias;
        let mut c = Array2::<f64>::zeros((t_len, d_h));
        let mut h = Array2::<f64>::zeros((t_len, d_h));
        let w_hh = p.w_hh.as_slice().expect("standard layout");
        let mut h_prev = vec![0.0; d_h];
        let mut c_prev = vec![0.0; d_h];
        for t in 0..t_len {
            let mut z = gates.row_mut(t);
            let z = z.as_slice_mut().expect("row contiguous");
            if t > 0 {
                for (r, zr) in z.iter_mut().enumerate() {
                    let row = &w_hh[r * d_h..(r + 1) * d_h];
                    *zr += row.iter().zip(&h_prev).map(|(w, hv)| w * hv).sum::<f64>();
                }
            }
            for v in &mut z[..3 * d_h] {
                *v = sigmoid(*v);
            }
            for v in &mut z[3 * d_h..] {
                *v = v.tanh();
            }
            let mut c_row = c.row_mut(t);
            let mut h_row = h.row_mut(t);
            for k in 0..d_h {
                let (i, f, o, g) = (z[k], z[d_h + k], z[2 * d_h + k], z[3 * d_h + k]);
                let ck = f * c_prev[k] + i * g;
                let hk = o * ck.tanh();
                c_row[k] = ck;
                h_row[k] = hk;
                c_prev[k] = ck;
                h_prev[k] = hk;
            }
        }
        (x, gates, c, h)
    }

    fn logits(&self, h: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let p = &self.params;
        let mut lt = h.dot(&p.trig_w.t());
        lt += &p.trig_b;
        let mut la = h.dot(&p.arg_w.t());
        la += &p.arg_b;
        (lt, la)
    }

    fn forward_cache(&self, ids: &[usize]) -> Cache {
        let (x, gates, c, h) = self.hidden_states(ids);
        let (mut p_trig, mut p_arg) = self.logits(&h);
        softmax_rows(&mut p_trig);
        softmax_rows(&mut p_arg);
        Cache {
            x,
            gates,
            c,
            h,
            p_trig,
            p_arg,
        }
    }

    /// Label distributions for a sequence of vocabulary ids.
    pub fn forward(&self, ids: &[usize]) -> Distributions {
        let cache = self.forward_cache(ids);
        Distributions {
            trigger: cache.p_trig,
            argument: cache.p_arg,
        }
    }

    /// Summed token cross-entropy of both layers.
    pub fn loss(&self, ids: &[usize], gold_trig: &[usize], gold_arg: &[usize]) -> f64 {
        if ids.is_empty() {
            return 0.0;
        }
        let (_, _, _, h) = self.hidden_states(ids);
        let (lt, la) = self.logits(&h);
        nll(&lt, gold_trig) + nll(&la, gold_arg)
    }

    /// Loss times `scale`, adding the gradient of that scaled loss into `grad`.
    pub fn accumulate_gradient(
        &self,
        ids: &[usize],
        gold_trig: &[usize],
        gold_arg: &[usize],
        scale: f64,
        grad: &mut Params,
    ) -> f64 {
        let t_len = ids.len();
        if t_len == 0 {
            return 0.0;
        }
        let p = &self.params;
        let d_h = p.d_h();
        let cache = self.forward_cache(ids);

        let mut loss = 0.0;
        let mut d_trig = cache.p_trig.clone();
        let mut d_arg = cache.p_arg.clone();
        for t in 0..t_len {
            loss -= cache.p_trig[[t, gold_trig[t]]].ln() + cache.p_arg[[t, gold_arg[t]]].ln();
            d_trig[[t, gold_trig[t]]] -= 1.0;
            d_arg[[t, gold_arg[t]]] -= 1.0;
        }
        d_trig *= scale;
        d_arg *= scale;

        general_mat_mul(1.0, &d_trig.t(), &cache.h, 1.0, &mut grad.trig_w);
        grad.trig_b += &d_trig.sum_axis(Axis(0));
        general_mat_mul(1.0, &d_arg.t(), &cache.h, 1.0, &mut grad.arg_w);
        grad.arg_b += &d_arg.sum_axis(Axis(0));

        let mut d_h_out = d_trig.dot(&p.trig_w);
        general_mat_mul(1.0, &d_arg, &p.arg_w, 1.0, &mut d_h_out);

        let w_hh = p.w_hh.as_slice().expect("standard layout");
        let mut dz = Array2::<f64>::zeros((t_len, 4 * d_h));
        let mut dh_next = vec![0.0; d_h];
        let mut dc_next = vec![0.0; d_h];
        for t in (0..t_len).rev() {
            let z = cache.gates.row(t);
            let c = cache.c.row(t);
            let mut dz_row = dz.row_mut(t);
            let dz_t = dz_row.as_slice_mut().expect("row contiguous");
            for k in 0..d_h {
                let (i, f, o, g) = (z[k], z[d_h + k], z[2 * d_h + k], z[3 * d_h + k]);
                let tc = c[k].tanh();
                let dh = d_h_out[[t, k]] + dh_next[k];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                let c_prev = if t > 0 { cache.c[[t - 1, k]] } else { 0.0 };
                dz_t[k] = dc * g * i * (1.0 - i);
                dz_t[d_h + k] = dc * c_prev * f * (1.0 - f);
                dz_t[2 * d_h + k] = d_o * o * (1.0 - o);
                dz_t[3 * d_h + k] = dc * i * (1.0 - g * g);
                dc_next[k] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            if t > 0 {
                for (r, &dzr) in dz_t.iter().enumerate() {
                    let row = &w_hh[r * d_h..(r + 1) * d_h];
                    for (acc, w) in dh_next.iter_mut().zip(row) {
                        *acc += dzr * w;
                    }
                }
            }
        }

        general_mat_mul(1.0, &dz.t(), &cache.x, 1.0, &mut grad.w_ih);
        if t_len > 1 {
            let dz_tail = dz.slice(ndarray::s![1.., ..]);
            let h_head = cache.h.slice(ndarray::s![..t_len - 1, ..]);
            general_mat_mul(1.0, &dz_tail.t(), &h_head, 1.0, &mut grad.w_hh);
        }
        grad.bias += &dz.sum_axis(Axis(0));
        let dx = dz.dot(&p.w_ih);
        for (t, &id) in ids.iter().enumerate() {
            let mut row = grad.embedding.row_mut(id);
            row += &dx.row(t);
        }
        loss * scale
    }

    /// Loss and a fresh gradient of `scale` times the loss.
    pub fn loss_and_gradient(&self, ids: &[usize], gold_trig: &[usize], gold_arg: &[usize], scale: f64) -> (f64, Params) {
        let mut grad = self.params.zeros_like();
        let loss = self.accumulate_gradient(ids, gold_trig, gold_arg, scale, &mut grad);
        (loss, grad)
    }

    /// Most probable label index per token and layer; ties go to the lower index.
    pub fn predict(&self, ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
        if ids.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let (_, _, _, h) = self.hidden_states(ids);
        let (lt, la) = self.logits(&h);
        let argmax = |m: &Array2<f64>| -> Vec<usize> {
            m.rows()
                .into_iter()
                .map(|row| {
                    let mut best = 0;
                    for (j, v) in row.iter().enumerate() {
                        if *v > row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect()
        };
        (argmax(&lt), argmax(&la))
    }
}
