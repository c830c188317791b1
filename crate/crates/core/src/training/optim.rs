use crate::policy::Grad;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant,
    /// Linear warmup, then cosine decay to zero.
    Cosine,
    /// Linear warmup, then linear decay to zero.
    Linear,
}

/// Learning rate at update `step` (0-based) of `total`.
pub fn lr_at(base: f64, schedule: Schedule, warmup: usize, step: usize, total: usize) -> f64 {
    if warmup > 0 && step < warmup {
        return base * (step + 1) as f64 / (warmup + 1) as f64;
    }
    let span = total.saturating_sub(warmup).max(1) as f64;
    let progress = ((step - warmup.min(step)) as f64 / span).min(1.0);
    match schedule {
        Schedule::Constant => base,
        Schedule::Cosine => base * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()),
        Schedule::Linear => base * (1.0 - progress),
    }
}

/// Adam with decoupled weight decay over named weights. Returns updates to add.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: BTreeMap<String, f64>,
    v: BTreeMap<String, f64>,
    t: i32,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, m: BTreeMap::new(), v: BTreeMap::new(), t: 0 }
    }

    /// Update for a descent step on `grad`. `current` looks up a weight for the decay term.
    pub fn step(&mut self, grad: &Grad, lr: f64, current: impl Fn(&str) -> f64) -> Grad {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let mut out = Grad::new();
        for (k, g) in grad {
            let m = self.m.entry(k.clone()).or_insert(0.0);
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            let v = self.v.entry(k.clone()).or_insert(0.0);
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            let decay = self.weight_decay * current(k);
            out.insert(k.clone(), -lr * (mhat / (vhat.sqrt() + self.eps) + decay));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_warm_up_then_decay() {
        assert!((lr_at(1.0, Schedule::Cosine, 2, 0, 10) - 1.0 / 3.0).abs() < 1e-12);
        assert!((lr_at(1.0, Schedule::Cosine, 2, 2, 10) - 1.0).abs() < 1e-12);
        assert!(lr_at(1.0, Schedule::Cosine, 2, 10, 10).abs() < 1e-12);
        assert!((lr_at(1.0, Schedule::Linear, 0, 5, 10) - 0.5).abs() < 1e-12);
        assert_eq!(lr_at(0.3, Schedule::Constant, 0, 7, 10), 0.3);
    }

    #[test]
    fn adam_first_step_has_lr_magnitude() {
        let mut opt = AdamW::new(0.0);
        let g: Grad = [("a".to_string(), 5.0), ("b".to_string(), -0.01)].into();
        let u = opt.step(&g, 0.1, |_| 0.0);
        assert!((u["a"] + 0.1).abs() < 1e-6);
        assert!((u["b"] - 0.1).abs() < 1e-4);
    }
}
