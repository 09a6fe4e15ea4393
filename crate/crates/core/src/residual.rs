//! Aggregation of per-sample residuals into max-normalized summaries.

use serde::{Deserialize, Serialize};

use crate::scalar::{to_f64, Real};

/// Running maximum of `residual / scale` over samples, plus skipped-sample
/// diagnostics. Aggregation is order-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub n_samples: usize,
    /// Largest scaled residual seen.
    pub max_residual: f64,
    /// Largest unscaled residual seen.
    pub max_abs: f64,
    pub skipped: Vec<String>,
    #[serde(skip)]
    scaled: Vec<f64>,
}

impl Residual {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            n_samples: 0,
            max_residual: 0.0,
            max_abs: 0.0,
            skipped: Vec::new(),
            scaled: Vec::new(),
        }
    }

    pub fn record<T: Real>(&mut self, residual: T, scale: T) {
        let r = to_f64(residual);
        let s = to_f64(scale);
        self.n_samples += 1;
        let scaled = if r.is_finite() && s.is_finite() { r / s } else { f64::INFINITY };
        self.max_residual = self.max_residual.max(scaled);
        self.scaled.push(scaled);
        self.max_abs = self.max_abs.max(if r.is_finite() { r } else { f64::INFINITY });
    }

    pub fn skip(&mut self, reason: impl Into<String>) {
        self.skipped.push(reason.into());
    }

    /// True when at least one sample was evaluated and all are within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.n_samples > 0 && self.max_residual <= tol
    }

    /// Number of evaluated samples whose scaled residual exceeds `tol`.
    pub fn count_above(&self, tol: f64) -> usize {
        self.scaled.iter().filter(|&&r| !(r <= tol)).count()
    }

    /// Smallest scaled residual seen, or `None` before any sample.
    pub fn min_residual(&self) -> Option<f64> {
        self.scaled.iter().copied().reduce(f64::min)
    }

    pub fn merge(&mut self, other: &Residual) {
        self.n_samples += other.n_samples;
        self.max_residual = self.max_residual.max(other.max_residual);
        self.max_abs = self.max_abs.max(other.max_abs);
        self.skipped.extend(other.skipped.iter().cloned());
        self.scaled.extend(other.scaled.iter().copied());
    }
}

/// A named collection of residual summaries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<Residual>,
}

impl ResidualReport {
    pub fn with_entries(names: &[&str]) -> Self {
        Self {
            entries: names.iter().map(|n| Residual::new(*n)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.entries.iter().find(|r| r.name == name)
    }

    pub fn entry(&mut self, name: &str) -> &mut Residual {
        if let Some(i) = self.entries.iter().position(|r| r.name == name) {
            &mut self.entries[i]
        } else {
            self.entries.push(Residual::new(name));
            self.entries.last_mut().unwrap()
        }
    }

    pub fn all_pass(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.passes(tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_keeps_scaled_maximum() {
        let mut r = Residual::new("x");
        r.record(1e-7, 10.0);
        r.record(1e-7, 1.0);
        assert_eq!(r.n_samples, 2);
        assert_eq!(r.max_residual, 1e-7);
        assert!(r.passes(1e-6));
        assert!(!r.passes(1e-8));
    }

    #[test]
    fn nan_never_passes() {
        let mut r = Residual::new("x");
        r.record(f64::NAN, 1.0);
        assert!(!r.passes(1.0));
        assert!(!Residual::new("empty").passes(1.0));
    }
}
