//! Seeded families of smooth test fields used by the verifiers.
//!
//! Verifiers never accept arbitrary closures for their probe fields; they draw
//! parameters from these fixed families so residual reports are reproducible.

use nalgebra::DVector;
use rand::Rng;

use crate::geometry::{ScalarField, VectorField};
use crate::scalar::{lit, Real};

/// A vector-field family member with `f64` parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldFamily {
    /// `∂_axis`.
    Coordinate { dim: usize, axis: usize },
    /// `X(p) = A p + b`, `A` stored row-major.
    Linear { dim: usize, a: Vec<f64>, b: Vec<f64> },
    /// `Xᵏ(p) = cₖ + aₖ sin(ωₖ·p + φₖ)`.
    Trig {
        dim: usize,
        offset: Vec<f64>,
        amp: Vec<f64>,
        freq: Vec<Vec<f64>>,
        phase: Vec<f64>,
    },
}

fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

impl FieldFamily {
    pub fn draw(rng: &mut impl Rng, dim: usize) -> Self {
        match rng.random_range(0..3u8) {
            0 => FieldFamily::Coordinate {
                dim,
                axis: rng.random_range(0..dim),
            },
            1 => FieldFamily::Linear {
                dim,
                a: uniform(rng, dim * dim, -0.5, 0.5),
                b: uniform(rng, dim, -1.0, 1.0),
            },
            _ => FieldFamily::Trig {
                dim,
                offset: uniform(rng, dim, -1.0, 1.0),
                amp: uniform(rng, dim, -0.5, 0.5),
                freq: (0..dim).map(|_| uniform(rng, dim, -1.0, 1.0)).collect(),
                phase: uniform(rng, dim, 0.0, std::f64::consts::TAU),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FieldFamily::Coordinate { dim, .. }
            | FieldFamily::Linear { dim, .. }
            | FieldFamily::Trig { dim, .. } => *dim,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            FieldFamily::Coordinate { .. } => "coordinate",
            FieldFamily::Linear { .. } => "linear",
            FieldFamily::Trig { .. } => "trig",
        }
    }

    pub fn to_field<T: Real>(&self) -> VectorField<T> {
        match self.clone() {
            FieldFamily::Coordinate { dim, axis } => VectorField::coordinate(dim, axis),
            FieldFamily::Linear { dim, a, b } => {
                let a: Vec<T> = a.into_iter().map(lit).collect();
                let b: Vec<T> = b.into_iter().map(lit).collect();
                VectorField::new(dim, move |p| {
                    DVector::from_fn(dim, |k, _| {
                        (0..dim).fold(b[k], |s, j| s + a[k * dim + j] * p[j])
                    })
                })
            }
            FieldFamily::Trig {
                dim,
                offset,
                amp,
                freq,
                phase,
            } => {
                let offset: Vec<T> = offset.into_iter().map(lit).collect();
                let amp: Vec<T> = amp.into_iter().map(lit).collect();
                let phase: Vec<T> = phase.into_iter().map(lit).collect();
                let freq: Vec<Vec<T>> = freq
                    .into_iter()
                    .map(|row| row.into_iter().map(lit).collect())
                    .collect();
                VectorField::new(dim, move |p| {
                    DVector::from_fn(dim, |k, _| {
                        let arg = (0..dim).fold(phase[k], |s, j| s + freq[k][j] * p[j]);
                        offset[k] + amp[k] * arg.sin()
                    })
                })
            }
        }
    }
}

/// A scalar-field family member.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFamily {
    /// `w·p + c`.
    Linear { w: Vec<f64>, c: f64 },
    /// `Σ qᵢ pᵢ² + w·p`.
    Quadratic { q: Vec<f64>, w: Vec<f64> },
    /// `a sin(ω·p + φ)`.
    Trig { a: f64, freq: Vec<f64>, phase: f64 },
}

impl ScalarFamily {
    pub fn draw(rng: &mut impl Rng, dim: usize) -> Self {
        match rng.random_range(0..3u8) {
            0 => ScalarFamily::Linear {
                w: uniform(rng, dim, -1.0, 1.0),
                c: rng.random_range(-1.0..1.0),
            },
            1 => ScalarFamily::Quadratic {
                q: uniform(rng, dim, -0.5, 0.5),
                w: uniform(rng, dim, -1.0, 1.0),
            },
            _ => ScalarFamily::Trig {
                a: rng.random_range(0.2..1.0),
                freq: uniform(rng, dim, -1.0, 1.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            },
        }
    }

    pub fn to_field<T: Real>(&self) -> ScalarField<T> {
        match self.clone() {
            ScalarFamily::Linear { w, c } => {
                let w: Vec<T> = w.into_iter().map(lit).collect();
                let c: T = lit(c);
                ScalarField::new(move |p| w.iter().zip(p.iter()).fold(c, |s, (&a, &x)| s + a * x))
            }
            ScalarFamily::Quadratic { q, w } => {
                let q: Vec<T> = q.into_iter().map(lit).collect();
                let w: Vec<T> = w.into_iter().map(lit).collect();
                ScalarField::new(move |p| {
                    (0..p.len()).fold(T::zero(), |s, i| s + q[i] * p[i] * p[i] + w[i] * p[i])
                })
            }
            ScalarFamily::Trig { a, freq, phase } => {
                let a: T = lit(a);
                let phase: T = lit(phase);
                let freq: Vec<T> = freq.into_iter().map(lit).collect();
                ScalarField::new(move |p| {
                    a * freq
                        .iter()
                        .zip(p.iter())
                        .fold(phase, |s, (&w, &x)| s + w * x)
                        .sin()
                })
            }
        }
    }
}
