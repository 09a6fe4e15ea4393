//! Levi-Civita connection in chart coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};
use crate::geometry::{ChartManifold, DiffEngine, Domain, Point, TangentVector, VectorField};
use crate::scalar::{lit, Real};

/// Christoffel symbols `Γᵏᵢⱼ` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelAt<T: Real> {
    pub point: Point<T>,
    dim: usize,
    gamma: Vec<T>,
}

impl<T: Real> ChristoffelAt<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Γᵏᵢⱼ`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.gamma[(k * self.dim + i) * self.dim + j]
    }

    /// `Γ(x, y)ᵏ = Γᵏᵢⱼ xⁱ yʲ`.
    pub fn contract(&self, x: &DVector<T>, y: &DVector<T>) -> DVector<T> {
        let n = self.dim;
        DVector::from_fn(n, |k, _| {
            let mut s = T::zero();
            for i in 0..n {
                if x[i] == T::zero() {
                    continue;
                }
                for j in 0..n {
                    s += self.get(k, i, j) * x[i] * y[j];
                }
            }
            s
        })
    }

    /// Largest `|Γᵏᵢⱼ − Γᵏⱼᵢ|`.
    pub fn asymmetry(&self) -> T {
        let n = self.dim;
        let mut m = T::zero();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m = m.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        m
    }
}

/// `Γᵏᵢⱼ = ½ gᵏˡ(∂ᵢgⱼₗ + ∂ⱼgᵢₗ − ∂ₗgᵢⱼ)`.
pub fn christoffel<T: Real>(
    m: &ChartManifold<T>,
    engine: &DiffEngine<T>,
    p: &Point<T>,
) -> Result<ChristoffelAt<T>> {
    christoffel_at(m, engine, &p.coords)
}

pub(crate) fn christoffel_at<T: Real>(
    m: &ChartManifold<T>,
    engine: &DiffEngine<T>,
    p: &DVector<T>,
) -> Result<ChristoffelAt<T>> {
    let n = m.dim();
    let ginv = m.metric_inverse_at(p)?;
    let dg: Vec<DMatrix<T>> = (0..n)
        .map(|axis| m.metric_partial(engine, p, axis))
        .collect::<Result<_>>()?;
    let half = lit::<T>(0.5);
    let mut gamma = vec![T::zero(); n * n * n];
    for i in 0..n {
        for j in i..n {
            // lowered symbol Γ_{ij,l}
            let lowered = DVector::from_fn(n, |l, _| {
                half * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])
            });
            let raised = &ginv * lowered;
            for k in 0..n {
                gamma[(k * n + i) * n + j] = raised[k];
                gamma[(k * n + j) * n + i] = raised[k];
            }
        }
    }
    Ok(ChristoffelAt {
        point: Point::new(p.clone()),
        dim: n,
        gamma,
    })
}

/// `∇_X Y = Xⁱ∂ᵢYᵏ + ΓᵏᵢⱼXⁱYʲ` at `p`.
pub fn covariant_derivative<T: Real>(
    m: &ChartManifold<T>,
    engine: &DiffEngine<T>,
    x: &VectorField<T>,
    y: &VectorField<T>,
    p: &Point<T>,
) -> Result<TangentVector<T>> {
    let xv = x.eval(&p.coords)?;
    let gamma = christoffel_at(m, engine, &p.coords)?;
    let v = covariant_derivative_along(m, engine, &xv, y, &p.coords, &gamma)?;
    TangentVector::new(p.clone(), v)
}

/// `∇_x Y` for a single direction `x` at `p`, reusing precomputed symbols.
pub(crate) fn covariant_derivative_along<T: Real>(
    m: &ChartManifold<T>,
    engine: &DiffEngine<T>,
    x: &DVector<T>,
    y: &VectorField<T>,
    p: &DVector<T>,
    gamma: &ChristoffelAt<T>,
) -> Result<DVector<T>> {
    let n = m.dim();
    let dy = engine.directional(m.domain(), p, x, DVector::zeros(n), |q| y.eval(q))?;
    let yv = y.eval(p)?;
    Ok(dy + gamma.contract(x, &yv))
}

/// `[X, Y]ᵏ = Xⁱ∂ᵢYᵏ − Yⁱ∂ᵢXᵏ`.
pub fn lie_bracket<T: Real>(
    engine: &DiffEngine<T>,
    domain: &Domain<T>,
    x: &VectorField<T>,
    y: &VectorField<T>,
    p: &Point<T>,
) -> Result<TangentVector<T>> {
    let v = lie_bracket_at(engine, domain, x, y, &p.coords)?;
    TangentVector::new(p.clone(), v)
}

pub(crate) fn lie_bracket_at<T: Real>(
    engine: &DiffEngine<T>,
    domain: &Domain<T>,
    x: &VectorField<T>,
    y: &VectorField<T>,
    p: &DVector<T>,
) -> Result<DVector<T>> {
    let n = domain.dim();
    let xv = x.eval(p)?;
    let yv = y.eval(p)?;
    let dy = engine.directional(domain, p, &xv, DVector::zeros(n), |q| y.eval(q))?;
    let dx = engine.directional(domain, p, &yv, DVector::zeros(n), |q| x.eval(q))?;
    Ok(dy - dx)
}

/// Second fundamental form of a coordinate-aligned submanifold at a point.
///
/// `values[a][b] = nor(∇_{∂a} ∂b)` for the tangent axes `a, b`, where `nor` is
/// the `g`-orthogonal projection onto the normal space.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondFundamentalFormAt<T: Real> {
    pub point: Point<T>,
    pub tangent_axes: Vec<usize>,
    pub induced_metric: DMatrix<T>,
    pub values: Vec<Vec<DVector<T>>>,
    pub mean_curvature: DVector<T>,
}

impl<T: Real> SecondFundamentalFormAt<T> {
    /// `II(u, w)` for `u, w` given in tangent-axis components.
    pub fn apply(&self, u: &DVector<T>, w: &DVector<T>) -> DVector<T> {
        let n = self.point.dim();
        let mut out = DVector::zeros(n);
        for (a, row) in self.values.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                out += v * (u[a] * w[b]);
            }
        }
        out
    }

    /// `max ‖II(eₐ, e_b) − h(eₐ, e_b) H‖∞` over coordinate pairs; zero iff umbilical.
    pub fn umbilicity_residual(&self) -> T {
        let mut m = T::zero();
        for (a, row) in self.values.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let r = v - &self.mean_curvature * self.induced_metric[(a, b)];
                m = m.max(r.amax());
            }
        }
        m
    }

    pub fn max_norm(&self) -> T {
        self.values
            .iter()
            .flatten()
            .fold(T::zero(), |m, v| m.max(v.amax()))
    }
}

/// Normal projector `I − B(BᵀgB)⁻¹Bᵀg` for the span of the coordinate axes.
pub(crate) fn normal_projector<T: Real>(g: &DMatrix<T>, axes: &[usize]) -> Result<DMatrix<T>> {
    let n = g.nrows();
    let b = DMatrix::from_fn(n, axes.len(), |r, c| {
        if axes[c] == r {
            T::one()
        } else {
            T::zero()
        }
    });
    let h = b.transpose() * g * &b;
    let hinv = h.try_inverse().ok_or_else(|| {
        GeometryError::Config("induced metric of coordinate submanifold is singular".into())
    })?;
    Ok(DMatrix::identity(n, n) - &b * hinv * b.transpose() * g)
}

pub fn coordinate_submanifold_sff<T: Real>(
    m: &ChartManifold<T>,
    engine: &DiffEngine<T>,
    tangent_axes: &[usize],
    p: &Point<T>,
) -> Result<SecondFundamentalFormAt<T>> {
    let g = m.metric_at(&p.coords)?;
    let gamma = christoffel_at(m, engine, &p.coords)?;
    let nor = normal_projector(&g, tangent_axes)?;
    let n = m.dim();
    let k = tangent_axes.len();
    let induced = DMatrix::from_fn(k, k, |a, b| g[(tangent_axes[a], tangent_axes[b])]);
    let hinv = induced.clone().try_inverse().ok_or_else(|| {
        GeometryError::Config("induced metric of coordinate submanifold is singular".into())
    })?;
    let values: Vec<Vec<DVector<T>>> = tangent_axes
        .iter()
        .map(|&a| {
            tangent_axes
                .iter()
                .map(|&b| {
                    let nabla = DVector::from_fn(n, |c, _| gamma.get(c, a, b));
                    &nor * nabla
                })
                .collect()
        })
        .collect();
    let mut mean = DVector::zeros(n);
    for a in 0..k {
        for b in 0..k {
            mean += &values[a][b] * hinv[(a, b)];
        }
    }
    mean /= lit::<T>(k as f64);
    Ok(SecondFundamentalFormAt {
        point: p.clone(),
        tangent_axes: tangent_axes.to_vec(),
        induced_metric: induced,
        values,
        mean_curvature: mean,
    })
}
