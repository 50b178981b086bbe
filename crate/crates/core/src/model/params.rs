use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Hyperparams;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub is_norm: bool,
}

impl ParamTensor {
    pub fn zeros(name: &str, shape: &[usize], is_norm: bool) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
            values: alloc::vec![0.0; shape.iter().product()],
            is_norm,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn same_layout(&self, other: &ParamTensor) -> bool {
        self.name == other.name && self.shape == other.shape && self.is_norm == other.is_norm
    }
}

/// Named tensors in a fixed order. Gradients share the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub tensors: Vec<ParamTensor>,
    pub seed: u64,
}

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    /// Same names, shapes and flags, all values zero.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    values: alloc::vec![0.0; t.values.len()],
                    is_norm: t.is_norm,
                })
                .collect(),
            seed: self.seed,
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(|t| t.values.len()).sum()
    }

    /// Canonical flattening in tensor order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.values.iter().copied()).collect()
    }

    pub fn check_congruent(&self, other: &ParamSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} tensors vs {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if !a.same_layout(b) || a.values.len() != b.values.len() {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "tensor {:?}{:?} vs {:?}{:?}",
                    a.name,
                    a.shape,
                    b.name,
                    b.shape
                )));
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.values.iter().all(|v| v.is_finite()))
    }

    pub fn norm_tensor_count(&self) -> usize {
        self.tensors.iter().filter(|t| t.is_norm).count()
    }
}

pub(crate) mod names {
    pub const EMBEDDING: &str = "embedding";
    pub const ENC_W_IH: &str = "encoder.w_ih";
    pub const ENC_W_HH: &str = "encoder.w_hh";
    pub const ENC_B_IH: &str = "encoder.b_ih";
    pub const ENC_B_HH: &str = "encoder.b_hh";
    pub const ENC_GAIN: &str = "encoder_norm.gain";
    pub const ENC_BIAS: &str = "encoder_norm.bias";
    pub const AGG_W_IH: &str = "aggregator.w_ih";
    pub const AGG_W_HH: &str = "aggregator.w_hh";
    pub const AGG_B_IH: &str = "aggregator.b_ih";
    pub const AGG_B_HH: &str = "aggregator.b_hh";
    pub const AGG_GAIN: &str = "aggregator_norm.gain";
    pub const AGG_BIAS: &str = "aggregator_norm.bias";
    pub const HEAD_W: &str = "head.weight";
    pub const HEAD_B: &str = "head.bias";
}

/// Tensor order and shapes for a set of hyperparameters.
pub(crate) fn layout(hp: &Hyperparams) -> Vec<(&'static str, Vec<usize>, bool)> {
    use names::*;
    let (v, e, h, d) = (hp.vocab_size, hp.embed_dim, hp.hidden_dim, hp.head_dim());
    let mut out = alloc::vec![
        (EMBEDDING, alloc::vec![v, e], false),
        (ENC_W_IH, alloc::vec![3 * h, e], false),
        (ENC_W_HH, alloc::vec![3 * h, h], false),
        (ENC_B_IH, alloc::vec![3 * h], false),
        (ENC_B_HH, alloc::vec![3 * h], false),
    ];
    if hp.layer_norm {
        out.push((ENC_GAIN, alloc::vec![h], true));
        out.push((ENC_BIAS, alloc::vec![h], true));
    }
    out.extend([
        (AGG_W_IH, alloc::vec![3 * h, h], false),
        (AGG_W_HH, alloc::vec![3 * h, h], false),
        (AGG_B_IH, alloc::vec![3 * h], false),
        (AGG_B_HH, alloc::vec![3 * h], false),
    ]);
    if hp.layer_norm {
        out.push((AGG_GAIN, alloc::vec![h], true));
        out.push((AGG_BIAS, alloc::vec![h], true));
    }
    out.push((HEAD_W, alloc::vec![d, h], false));
    out.push((HEAD_B, alloc::vec![d], false));
    out
}

/// Checks that a parameter set was built for these hyperparameters.
pub(crate) fn check_layout(params: &ParamSet, hp: &Hyperparams) -> Result<()> {
    let expected = layout(hp);
    if expected.len() != params.tensors.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "expected {} tensors, found {}",
            expected.len(),
            params.tensors.len()
        )));
    }
    for ((name, shape, is_norm), t) in expected.iter().zip(&params.tensors) {
        let n: usize = shape.iter().product();
        if t.name != *name || &t.shape != shape || t.is_norm != *is_norm || t.values.len() != n {
            return Err(Error::ShapeMismatch(alloc::format!(
                "tensor {:?}{:?} does not match expected {:?}{:?}",
                t.name,
                t.shape,
                name,
                shape
            )));
        }
    }
    Ok(())
}

/// Uniform `[-k, k]` weights with `k = 1/sqrt(hidden_dim)`; layer-norm gain
/// one and bias zero; head bias zero.
pub fn init_params(hp: &Hyperparams, seed: u64) -> Result<ParamSet> {
    hp.validate()?;
    let k = 1.0 / libm::sqrt(hp.hidden_dim as f64);
    let mut rng = rng::stream(seed, rng::domain::INIT, 0, 0);
    let tensors = layout(hp)
        .into_iter()
        .map(|(name, shape, is_norm)| {
            let mut t = ParamTensor::zeros(name, &shape, is_norm);
            if name == names::ENC_GAIN || name == names::AGG_GAIN {
                t.values.fill(1.0);
            } else if !is_norm && name != names::HEAD_B {
                for v in &mut t.values {
                    *v = rng.random_range(-k..=k);
                }
            }
            t
        })
        .collect();
    Ok(ParamSet { tensors, seed })
}
