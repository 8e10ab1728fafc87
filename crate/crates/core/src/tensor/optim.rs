use std::path::Path;

use super::{read_checkpoint, write_checkpoint, Gradients, Real, Tensor};
use crate::{Error, Result};

/// Index of a parameter inside its [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 norm cap on the gradient; `None` leaves gradients untouched.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }
}

#[derive(Clone, Debug)]
struct Param<S> {
    name: String,
    value: Tensor<S>,
    m: Vec<S>,
    v: Vec<S>,
    grad: Option<Vec<S>>,
}

/// Named parameters with Adam moment buffers.
#[derive(Clone, Debug)]
pub struct ParameterStore<S: Real = f32> {
    params: Vec<Param<S>>,
    step: u64,
    adam: AdamConfig,
    frozen: bool,
}

impl<S: Real> ParameterStore<S> {
    pub fn new(adam: AdamConfig) -> Self {
        Self {
            params: Vec::new(),
            step: 0,
            adam,
            frozen: false,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::contract(format!("duplicate parameter '{name}'")));
        }
        let n = value.numel();
        self.params.push(Param {
            name,
            value,
            m: vec![S::zero(); n],
            v: vec![S::zero(); n],
            grad: None,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&[S]> {
        self.params[id.0].grad.as_deref()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn adam(&self) -> &AdamConfig {
        &self.adam
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.adam.learning_rate = lr;
    }

    pub fn set_clip_norm(&mut self, clip: Option<f64>) {
        self.adam.clip_norm = clip;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// After freezing, every mutating call fails.
    pub fn freeze(&mut self) {
        self.frozen = true;
        for p in &mut self.params {
            p.grad = None;
        }
    }

    fn ensure_mutable(&self) -> Result<()> {
        if self.frozen {
            return Err(Error::contract("parameter store is frozen"));
        }
        Ok(())
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor<S>) -> Result<()> {
        self.ensure_mutable()?;
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::Shape {
                op: "set_value",
                left: p.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        p.value = value;
        Ok(())
    }

    /// Adds a backward sweep's parameter gradients into the gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients<S>) -> Result<()> {
        self.ensure_mutable()?;
        for (id, g) in grads.params() {
            let p = &mut self.params[id.0];
            match &mut p.grad {
                Some(slot) => slot.iter_mut().zip(g).for_each(|(x, &y)| *x += y),
                None => p.grad = Some(g.to_vec()),
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .filter_map(|p| p.grad.as_ref())
            .flat_map(|g| g.iter().map(|x| x.as_f64().powi(2)))
            .sum::<f64>()
            .sqrt()
    }

    /// One bias-corrected Adam update over every parameter, then clears gradients.
    pub fn adam_step(&mut self) -> Result<()> {
        self.ensure_mutable()?;
        if let Some(p) = self.params.iter().find(|p| p.grad.is_none()) {
            return Err(Error::contract(format!("parameter '{}' has no gradient", p.name)));
        }
        let clip = match self.adam.clip_norm {
            Some(max) => {
                let norm = self.grad_norm();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
            ..
        } = self.adam;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (S::of(beta1), S::of(beta2));
        let (one_b1, one_b2) = (S::of(1.0 - beta1), S::of(1.0 - beta2));
        let step_size = S::of(learning_rate / bc1);
        let inv_bc2 = S::of(1.0 / bc2);
        let eps = S::of(eps);
        let clip = S::of(clip);
        for p in &mut self.params {
            let g = p.grad.take().expect("checked above");
            for (((x, m), v), &gi) in p.value.data_mut().iter_mut().zip(&mut p.m).zip(&mut p.v).zip(&g) {
                let gi = gi * clip;
                *m = b1 * *m + one_b1 * gi;
                *v = b2 * *v + one_b2 * gi * gi;
                *x -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Stable content hash of all parameter values (names, shapes, bits).
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for p in &self.params {
            p.name.hash(&mut h);
            p.value.shape().hash(&mut h);
            for x in p.value.data() {
                x.as_f64().to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Copy of all values, for best-checkpoint snapshots.
    pub fn snapshot(&self) -> Vec<Tensor<S>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor<S>]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::contract("snapshot parameter count mismatch"));
        }
        for (i, v) in values.iter().enumerate() {
            self.set_value(ParamId(i), v.clone())?;
        }
        Ok(())
    }

    /// Writes every parameter as `prefix + name` in the checkpoint format.
    pub fn save(&self, path: &Path, prefix: &str) -> Result<()> {
        let named: Vec<(String, Tensor<f32>)> = self
            .params
            .iter()
            .map(|p| (format!("{prefix}{}", p.name), p.value.cast()))
            .collect();
        write_checkpoint(path, &named)
    }

    /// Loads values for every parameter of this store from a checkpoint;
    /// names and shapes must match exactly.
    pub fn load(&mut self, path: &Path, prefix: &str) -> Result<()> {
        let entries = read_checkpoint(path)?;
        for i in 0..self.params.len() {
            let want = format!("{prefix}{}", self.params[i].name);
            let (_, t) = entries
                .iter()
                .find(|(n, _)| *n == want)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter '{want}'")))?;
            if t.shape() != self.params[i].value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter '{want}' has shape {:?}, expected {:?}",
                    t.shape(),
                    self.params[i].value.shape()
                )));
            }
            self.set_value(ParamId(i), t.cast())?;
        }
        Ok(())
    }
}
