use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{coords_f64, Domain};
use crate::error::{GeometryError, Result};
use crate::scalar::{lit, to_f64, Real};

/// Finite-difference stencil family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `(f(x+h) − f(x−h)) / 2h`, second order.
    Central2,
    /// Five-point stencil, fourth order.
    Central4,
    /// Central-2 at `h` and `h/2` combined by one Richardson step.
    Richardson,
}

impl Scheme {
    /// Farthest stencil offset in multiples of `h`.
    fn reach(self) -> u32 {
        match self {
            Scheme::Central4 => 2,
            Scheme::Central2 | Scheme::Richardson => 1,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Central2 => "central2",
            Scheme::Central4 => "central4",
            Scheme::Richardson => "richardson",
        })
    }
}

impl FromStr for Scheme {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central2" | "central-2" => Ok(Scheme::Central2),
            "central4" | "central-4" => Ok(Scheme::Central4),
            "richardson" => Ok(Scheme::Richardson),
            other => Err(GeometryError::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Values that can be combined linearly inside a stencil.
pub trait FdValue<T>: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> {}

impl<T, V> FdValue<T> for V where V: Clone + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V> {}

/// Numerical differentiation engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffEngine<T> {
    pub scheme: Scheme,
    pub step: T,
    pub fd_check_tol: T,
    /// Smallest step the boundary shrinking may fall back to.
    pub min_step: T,
}

impl<T: Real> Default for DiffEngine<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::Central2,
            step: lit(1e-5),
            fd_check_tol: lit(1e-5),
            min_step: lit(1e-9),
        }
    }
}

impl<T: Real> DiffEngine<T> {
    pub fn new(scheme: Scheme, step: T) -> Self {
        Self {
            scheme,
            step,
            ..Self::default()
        }
    }

    /// Step actually used along `axis` at `p`, shrunk so the stencil stays in the domain.
    pub fn effective_step(&self, domain: &Domain<T>, p: &DVector<T>, axis: usize) -> Result<T> {
        domain.check(p)?;
        let reach = lit::<T>(f64::from(self.scheme.reach()));
        let mut h = self.step;
        if let Some(d) = domain.axes()[axis].distance_to_boundary(p[axis]) {
            // keep the outermost stencil node strictly inside
            let limit = d / (reach * lit(1.25));
            if h * reach >= d {
                h = limit;
            }
        }
        if !(h >= self.min_step) {
            return Err(GeometryError::Stencil {
                coords: coords_f64(p),
                axis,
                step: to_f64(h),
            });
        }
        Ok(h)
    }

    /// `∂f/∂x_axis` at `p`.
    pub fn partial<V, F>(&self, domain: &Domain<T>, p: &DVector<T>, axis: usize, f: F) -> Result<V>
    where
        V: FdValue<T>,
        F: Fn(&DVector<T>) -> Result<V>,
    {
        let h = self.effective_step(domain, p, axis)?;
        match self.scheme {
            Scheme::Central2 => central2(p, axis, h, &f),
            Scheme::Central4 => {
                let x = p[axis];
                let at = |k: f64| {
                    let mut q = p.clone();
                    q[axis] = x + h * lit(k);
                    f(&q)
                };
                let num = (at(-2.0)? - at(2.0)?) + (at(1.0)? - at(-1.0)?) * lit(8.0);
                Ok(num * (T::one() / (h * lit(12.0))))
            }
            Scheme::Richardson => {
                let coarse = central2(p, axis, h, &f)?;
                let fine = central2(p, axis, h * lit(0.5), &f)?;
                Ok((fine * lit(4.0) - coarse) * (T::one() / lit(3.0)))
            }
        }
    }

    /// `Σᵢ dirⁱ ∂ᵢf` at `p`; axes with a zero coefficient are skipped.
    pub fn directional<V, F>(
        &self,
        domain: &Domain<T>,
        p: &DVector<T>,
        dir: &DVector<T>,
        zero: V,
        f: F,
    ) -> Result<V>
    where
        V: FdValue<T>,
        F: Fn(&DVector<T>) -> Result<V>,
    {
        let mut acc = zero;
        for (axis, &c) in dir.iter().enumerate() {
            if c != T::zero() {
                acc = acc + self.partial(domain, p, axis, &f)? * c;
            }
        }
        Ok(acc)
    }
}

fn central2<T: Real, V: FdValue<T>>(
    p: &DVector<T>,
    axis: usize,
    h: T,
    f: &impl Fn(&DVector<T>) -> Result<V>,
) -> Result<V> {
    let x = p[axis];
    let mut plus = p.clone();
    plus[axis] = x + h;
    let mut minus = p.clone();
    minus[axis] = x - h;
    // representable spacing, not the nominal 2h
    let width = plus[axis] - minus[axis];
    Ok((f(&plus)? - f(&minus)?) * (T::one() / width))
}
