//! Coordinate charts, points, tangent vectors and fields.
//!
//! Every manifold in this crate is a single global chart on an axis-aligned
//! open box. Fields are stored as shared closures so that derived fields
//! (projections, lifts, rescalings) can be composed cheaply and evaluated from
//! finite-difference stencils.

mod diff;

pub use diff::{DiffEngine, FdValue, Scheme};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GeometryError, Result};
use crate::scalar::{lit, scale_of, to_f64, Real};

pub(crate) type Eval<T, V> = Arc<dyn Fn(&DVector<T>) -> Result<V> + Send + Sync>;

pub(crate) fn coords_f64<T: Real>(p: &DVector<T>) -> Vec<f64> {
    p.iter().map(|&x| to_f64(x)).collect()
}

/// One axis of a chart domain. `None` marks an infinite bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Real> Interval<T> {
    pub fn new(lower: T, upper: T) -> Self {
        Self {
            lower: Some(lower),
            upper: Some(upper),
        }
    }

    pub fn unbounded() -> Self {
        Self {
            lower: None,
            upper: None,
        }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lower.is_none_or(|lo| x > lo) && self.upper.is_none_or(|hi| x < hi)
    }

    /// Distance from `x` to the nearest finite bound, `None` if both are infinite.
    pub fn distance_to_boundary(&self, x: T) -> Option<T> {
        match (self.lower, self.upper) {
            (None, None) => None,
            (Some(lo), None) => Some(x - lo),
            (None, Some(hi)) => Some(hi - x),
            (Some(lo), Some(hi)) => Some((x - lo).min(hi - x)),
        }
    }
}

/// Axis-aligned open box, possibly with infinite sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain<T> {
    axes: Vec<Interval<T>>,
}

impl<T: Real> Domain<T> {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            axes: vec![Interval::unbounded(); dim],
        }
    }

    pub fn from_intervals(axes: Vec<Interval<T>>) -> Self {
        Self { axes }
    }

    /// Finite box from `(lower, upper)` pairs.
    pub fn boxed(bounds: &[(T, T)]) -> Self {
        Self {
            axes: bounds.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect(),
        }
    }

    /// Cartesian product, axes of `self` first.
    pub fn product(&self, other: &Self) -> Self {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        Self { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Interval<T>] {
        &self.axes
    }

    pub fn contains(&self, p: &DVector<T>) -> bool {
        p.len() == self.axes.len() && self.axes.iter().zip(p.iter()).all(|(i, &x)| i.contains(x))
    }

    pub fn check(&self, p: &DVector<T>) -> Result<()> {
        if p.len() != self.axes.len() {
            return Err(GeometryError::Dimension {
                expected: self.axes.len(),
                found: p.len(),
            });
        }
        for (axis, (interval, &x)) in self.axes.iter().zip(p.iter()).enumerate() {
            if !interval.contains(x) {
                return Err(GeometryError::Domain {
                    coords: coords_f64(p),
                    axis,
                });
            }
        }
        Ok(())
    }

    /// A bounded sub-box used for probing positivity and rank conditions.
    /// Infinite sides are replaced by a unit-width extension from the finite
    /// side, or by `[-1, 1]` when both sides are open.
    pub fn probe_box(&self) -> Vec<(T, T)> {
        let one = T::one();
        self.axes
            .iter()
            .map(|i| match (i.lower, i.upper) {
                (Some(lo), Some(hi)) => (lo, hi),
                (Some(lo), None) => (lo, lo + one + one),
                (None, Some(hi)) => (hi - one - one, hi),
                (None, None) => (-one, one),
            })
            .collect()
    }

    /// Deterministic lattice of interior points (quartiles of the probe box per axis),
    /// capped at `max_points` by striding.
    pub fn probe_points(&self, max_points: usize) -> Vec<DVector<T>> {
        let bounds = self.probe_box();
        let fractions = [lit::<T>(0.25), lit::<T>(0.5), lit::<T>(0.75)];
        let dim = bounds.len();
        let total = 3usize.pow(dim as u32);
        let stride = (total / max_points.max(1)).max(1);
        (0..total)
            .step_by(stride)
            .map(|mut idx| {
                DVector::from_iterator(
                    dim,
                    bounds.iter().map(|&(lo, hi)| {
                        let k = idx % 3;
                        idx /= 3;
                        lo + (hi - lo) * fractions[k]
                    }),
                )
            })
            .collect()
    }
}

/// A point in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T: Real> {
    pub coords: DVector<T>,
}

impl<T: Real> Point<T> {
    pub fn new(coords: DVector<T>) -> Self {
        Self { coords }
    }

    pub fn from_slice(coords: &[T]) -> Self {
        Self {
            coords: DVector::from_column_slice(coords),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl<T: Real> From<DVector<T>> for Point<T> {
    fn from(coords: DVector<T>) -> Self {
        Self { coords }
    }
}

/// A tangent vector in coordinate components, anchored at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<T: Real> {
    pub base: Point<T>,
    pub components: DVector<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(base: Point<T>, components: DVector<T>) -> Result<Self> {
        if base.dim() != components.len() {
            return Err(GeometryError::Dimension {
                expected: base.dim(),
                found: components.len(),
            });
        }
        Ok(Self { base, components })
    }

    pub fn from_slice(base: &Point<T>, components: &[T]) -> Result<Self> {
        Self::new(base.clone(), DVector::from_column_slice(components))
    }
}

/// A real-valued function on chart coordinates, with an optional analytic differential.
#[derive(Clone)]
pub struct ScalarField<T: Real> {
    eval: Eval<T, T>,
    differential: Option<Eval<T, DVector<T>>>,
}

impl<T: Real> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("analytic_differential", &self.differential.is_some())
            .finish()
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(f: impl Fn(&DVector<T>) -> T + Send + Sync + 'static) -> Self {
        Self::try_new(move |p| Ok(f(p)))
    }

    pub fn try_new(f: impl Fn(&DVector<T>) -> Result<T> + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(f),
            differential: None,
        }
    }

    pub fn constant(c: T) -> Self {
        Self::new(move |_| c)
    }

    /// Attaches the coordinate differential `(∂₀φ, …, ∂ₙ₋₁φ)`.
    pub fn with_differential(
        mut self,
        d: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        self.differential = Some(Arc::new(move |p| Ok(d(p))));
        self
    }

    pub fn has_differential(&self) -> bool {
        self.differential.is_some()
    }

    pub fn eval(&self, p: &DVector<T>) -> Result<T> {
        (self.eval)(p)
    }

    pub fn at(&self, p: &Point<T>) -> Result<T> {
        self.eval(&p.coords)
    }

    /// Pointwise post-composition `g ∘ φ`. The analytic differential is dropped.
    pub fn map(&self, g: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        let inner = self.eval.clone();
        Self::try_new(move |p| inner(p).map(&g))
    }

    /// Pointwise combination of two fields.
    pub fn zip_with(
        &self,
        other: &Self,
        g: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Self {
        let a = self.eval.clone();
        let b = other.eval.clone();
        Self::try_new(move |p| Ok(g(a(p)?, b(p)?)))
    }

    /// Pre-composition with a coordinate map (used for lifts along projections).
    pub fn precompose(
        &self,
        proj: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        let inner = self.eval.clone();
        Self::try_new(move |p| inner(&proj(p)))
    }

    /// Coordinate partials at `p`: analytic if attached, else finite differences.
    pub fn differential_at(
        &self,
        engine: &DiffEngine<T>,
        domain: &Domain<T>,
        p: &DVector<T>,
    ) -> Result<DVector<T>> {
        match &self.differential {
            Some(d) => d(p),
            None => self.fd_differential(engine, domain, p),
        }
    }

    pub fn fd_differential(
        &self,
        engine: &DiffEngine<T>,
        domain: &Domain<T>,
        p: &DVector<T>,
    ) -> Result<DVector<T>> {
        let mut out = DVector::zeros(p.len());
        for axis in 0..p.len() {
            out[axis] = engine.partial(domain, p, axis, |q| self.eval(q))?;
        }
        Ok(out)
    }

    /// Maximum scaled discrepancy between the analytic and finite-difference
    /// differentials, or `None` if no analytic differential is attached.
    pub fn check_differential(
        &self,
        engine: &DiffEngine<T>,
        domain: &Domain<T>,
        p: &DVector<T>,
    ) -> Result<Option<T>> {
        let Some(d) = &self.differential else {
            return Ok(None);
        };
        let analytic = d(p)?;
        let fd = self.fd_differential(engine, domain, p)?;
        let scale = scale_of(analytic.iter().chain(fd.iter()).copied());
        Ok(Some((analytic - fd).amax() / scale))
    }
}

/// A vector field given by its coordinate components.
#[derive(Clone)]
pub struct VectorField<T: Real> {
    dim: usize,
    eval: Eval<T, DVector<T>>,
}

impl<T: Real> fmt::Debug for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dim", &self.dim).finish()
    }
}

impl<T: Real> VectorField<T> {
    pub fn new(dim: usize, f: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static) -> Self {
        Self::try_new(dim, move |p| Ok(f(p)))
    }

    pub fn try_new(
        dim: usize,
        f: impl Fn(&DVector<T>) -> Result<DVector<T>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            eval: Arc::new(f),
        }
    }

    pub fn constant(components: DVector<T>) -> Self {
        Self::new(components.len(), move |_| components.clone())
    }

    /// The coordinate field `∂_axis`.
    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut e = DVector::zeros(dim);
        e[axis] = T::one();
        Self::constant(e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, p: &DVector<T>) -> Result<DVector<T>> {
        let v = (self.eval)(p)?;
        if v.len() != self.dim {
            return Err(GeometryError::Dimension {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(v)
    }

    pub fn at(&self, p: &Point<T>) -> Result<TangentVector<T>> {
        TangentVector::new(p.clone(), self.eval(&p.coords)?)
    }

    /// `φ·X`.
    pub fn scaled_by(&self, phi: &ScalarField<T>) -> Self {
        let inner = self.eval.clone();
        let phi = phi.clone();
        Self::try_new(self.dim, move |p| Ok(inner(p)? * phi.eval(p)?))
    }

    /// Applies a pointwise linear map depending on the base point.
    pub fn transformed(
        &self,
        dim: usize,
        g: impl Fn(&DVector<T>, DVector<T>) -> Result<DVector<T>> + Send + Sync + 'static,
    ) -> Self {
        let inner = self.eval.clone();
        Self::try_new(dim, move |p| g(p, inner(p)?))
    }
}

/// Symmetric matrix-valued field on a chart.
pub type MetricField<T> = Eval<T, DMatrix<T>>;

/// A manifold presented by a single chart on an open box.
#[derive(Clone)]
pub struct ChartManifold<T: Real> {
    domain: Domain<T>,
    metric: MetricField<T>,
    spd_floor: T,
    sym_tol: T,
}

impl<T: Real> fmt::Debug for ChartManifold<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartManifold")
            .field("dim", &self.dim())
            .field("domain", &self.domain)
            .finish()
    }
}

impl<T: Real> ChartManifold<T> {
    pub fn new(
        domain: Domain<T>,
        metric: impl Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self::try_new(domain, move |p| Ok(metric(p)))
    }

    pub fn try_new(
        domain: Domain<T>,
        metric: impl Fn(&DVector<T>) -> Result<DMatrix<T>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            domain,
            metric: Arc::new(metric),
            spd_floor: lit(1e-10),
            sym_tol: lit(1e-10),
        }
    }

    /// Flat metric on the whole of ℝⁿ.
    pub fn euclidean(dim: usize) -> Self {
        Self::euclidean_on(Domain::unbounded(dim))
    }

    pub fn euclidean_on(domain: Domain<T>) -> Self {
        let dim = domain.dim();
        Self::new(domain, move |_| DMatrix::identity(dim, dim))
    }

    pub fn with_spd_floor(mut self, floor: T) -> Self {
        self.spd_floor = floor;
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub(crate) fn metric_field(&self) -> MetricField<T> {
        self.metric.clone()
    }

    /// Metric matrix without domain, symmetry or definiteness checks; used
    /// inside finite-difference stencils around an already validated point.
    pub fn raw_metric(&self, p: &DVector<T>) -> Result<DMatrix<T>> {
        let g = (self.metric)(p)?;
        let n = self.dim();
        if g.nrows() != n || g.ncols() != n {
            return Err(GeometryError::Dimension {
                expected: n,
                found: g.nrows(),
            });
        }
        Ok(g)
    }

    /// Validated, symmetrized metric at `p`.
    pub fn metric_at(&self, p: &DVector<T>) -> Result<DMatrix<T>> {
        self.domain.check(p)?;
        let g = self.raw_metric(p)?;
        let asym = (&g - g.transpose()).amax();
        let scale = scale_of(g.iter().copied());
        if !(asym <= self.sym_tol * scale) {
            return Err(GeometryError::AsymmetricMetric {
                coords: coords_f64(p),
                asymmetry: to_f64(asym),
            });
        }
        let g = (&g + g.transpose()) * lit::<T>(0.5);
        let min_eig = SymmetricEigen::new(g.clone()).eigenvalues.min();
        if !(min_eig > self.spd_floor) {
            return Err(GeometryError::DegenerateMetric {
                coords: coords_f64(p),
                min_eigenvalue: to_f64(min_eig),
                floor: to_f64(self.spd_floor),
            });
        }
        Ok(g)
    }

    pub fn metric_inverse_at(&self, p: &DVector<T>) -> Result<DMatrix<T>> {
        let g = self.metric_at(p)?;
        g.try_inverse().ok_or_else(|| GeometryError::DegenerateMetric {
            coords: coords_f64(p),
            min_eigenvalue: 0.0,
            floor: to_f64(self.spd_floor),
        })
    }

    /// `uᵀ g(p) v`.
    pub fn metric_inner(
        &self,
        p: &Point<T>,
        u: &TangentVector<T>,
        v: &TangentVector<T>,
    ) -> Result<T> {
        for w in [u, v] {
            if w.components.len() != self.dim() {
                return Err(GeometryError::Dimension {
                    expected: self.dim(),
                    found: w.components.len(),
                });
            }
        }
        let g = self.metric_at(&p.coords)?;
        Ok(u.components.dot(&(g * &v.components)))
    }

    /// `∂_axis g` at `p`.
    pub fn metric_partial(
        &self,
        engine: &DiffEngine<T>,
        p: &DVector<T>,
        axis: usize,
    ) -> Result<DMatrix<T>> {
        engine.partial(&self.domain, p, axis, |q| self.raw_metric(q))
    }

    /// Riemannian gradient `(Dφ)ᵏ = gᵏˡ ∂ₗφ`.
    pub fn gradient(
        &self,
        engine: &DiffEngine<T>,
        phi: &ScalarField<T>,
        p: &Point<T>,
    ) -> Result<TangentVector<T>> {
        let v = self.gradient_at(engine, phi, &p.coords)?;
        TangentVector::new(p.clone(), v)
    }

    pub(crate) fn gradient_at(
        &self,
        engine: &DiffEngine<T>,
        phi: &ScalarField<T>,
        p: &DVector<T>,
    ) -> Result<DVector<T>> {
        let ginv = self.metric_inverse_at(p)?;
        let d = phi.differential_at(engine, &self.domain, p)?;
        Ok(ginv * d)
    }

    /// The conformally related manifold with metric `factor(p)·g(p)`.
    pub fn conformally_rescaled(&self, factor: &ScalarField<T>) -> Self {
        let metric = self.metric.clone();
        let factor = factor.clone();
        Self {
            domain: self.domain.clone(),
            metric: Arc::new(move |p| Ok(metric(p)? * factor.eval(p)?)),
            spd_floor: self.spd_floor,
            sym_tol: self.sym_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar() -> ChartManifold<f64> {
        ChartManifold::new(
            Domain::from_intervals(vec![
                Interval {
                    lower: Some(0.0),
                    upper: None,
                },
                Interval::unbounded(),
            ]),
            |p| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, p[0] * p[0]])),
        )
    }

    fn tv(p: &Point<f64>, c: &[f64]) -> TangentVector<f64> {
        TangentVector::from_slice(p, c).unwrap()
    }

    #[test]
    fn euclidean_inner_products() {
        let m = ChartManifold::<f64>::euclidean(2);
        let o = Point::from_slice(&[0.0, 0.0]);
        assert_eq!(m.metric_inner(&o, &tv(&o, &[1.0, 0.0]), &tv(&o, &[1.0, 0.0])).unwrap(), 1.0);
        let p = Point::from_slice(&[3.0, 4.0]);
        assert_eq!(m.metric_inner(&p, &tv(&p, &[1.0, 0.0]), &tv(&p, &[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn polar_angular_norm() {
        let m = polar();
        let p = Point::from_slice(&[2.0, 0.0]);
        let u = tv(&p, &[0.0, 1.0]);
        assert_eq!(m.metric_inner(&p, &u, &u).unwrap(), 4.0);
    }

    #[test]
    fn outside_domain_is_rejected() {
        let m = polar();
        let p = Point::from_slice(&[-1.0, 0.0]);
        let u = tv(&p, &[1.0, 0.0]);
        assert!(matches!(
            m.metric_inner(&p, &u, &u),
            Err(GeometryError::Domain { axis: 0, .. })
        ));
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let m = ChartManifold::<f64>::new(Domain::unbounded(2), |p| {
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, p[0]]))
        });
        let p = Point::from_slice(&[0.0, 0.0]);
        let u = tv(&p, &[1.0, 0.0]);
        match m.metric_inner(&p, &u, &u) {
            Err(GeometryError::DegenerateMetric { min_eigenvalue, .. }) => {
                assert_eq!(min_eigenvalue, 0.0)
            }
            other => panic!("expected degenerate metric, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_metric_is_rejected() {
        let m = ChartManifold::<f64>::new(Domain::unbounded(2), |_| {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])
        });
        assert!(matches!(
            m.metric_at(&DVector::from_vec(vec![0.0, 0.0])),
            Err(GeometryError::AsymmetricMetric { .. })
        ));
    }

    #[test]
    fn gradient_examples() {
        let engine = DiffEngine::default();
        let flat = ChartManifold::<f64>::euclidean(2);
        let x = ScalarField::new(|p: &DVector<f64>| p[0]);
        let g = flat.gradient(&engine, &x, &Point::from_slice(&[0.3, -2.0])).unwrap();
        assert!((g.components - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-9);

        let warped_line = ChartManifold::<f64>::new(Domain::unbounded(2), |p| {
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, (2.0 * p[0]).exp()]))
        });
        let second = ScalarField::new(|p: &DVector<f64>| p[1]);
        let g = warped_line
            .gradient(&engine, &second, &Point::from_slice(&[0.0, 0.0]))
            .unwrap();
        assert!((g.components - DVector::from_vec(vec![0.0, 1.0])).amax() < 1e-9);

        let theta = ScalarField::new(|p: &DVector<f64>| p[1]);
        let g = polar()
            .gradient(&engine, &theta, &Point::from_slice(&[2.0, 0.0]))
            .unwrap();
        assert!((g.components - DVector::from_vec(vec![0.0, 0.25])).amax() < 1e-9);
    }

    #[test]
    fn analytic_differential_is_checked_against_fd() {
        let engine = DiffEngine::default();
        let domain = Domain::unbounded(2);
        let good = ScalarField::new(|p: &DVector<f64>| p[0].sin() * p[1])
            .with_differential(|p| DVector::from_vec(vec![p[0].cos() * p[1], p[0].sin()]));
        let p = DVector::from_vec(vec![0.4, 1.3]);
        assert!(good.check_differential(&engine, &domain, &p).unwrap().unwrap() < 1e-5);
        let bad = ScalarField::new(|p: &DVector<f64>| p[0] * p[0])
            .with_differential(|p| DVector::from_vec(vec![p[0], 0.0]));
        assert!(bad.check_differential(&engine, &domain, &p).unwrap().unwrap() > 1e-2);
    }

    #[test]
    fn probe_points_are_interior() {
        let d = Domain::from_intervals(vec![
            Interval::new(0.0, std::f64::consts::PI),
            Interval {
                lower: Some(1.0),
                upper: None,
            },
        ]);
        let pts = d.probe_points(64);
        assert_eq!(pts.len(), 9);
        assert!(pts.iter().all(|p| d.contains(p)));
    }

    #[test]
    fn single_precision_metric() {
        let m = ChartManifold::<f32>::new(Domain::unbounded(2), |p| {
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, p[0] * p[0]]))
        });
        let p = Point::from_slice(&[2.0f32, 0.0]);
        let u = TangentVector::from_slice(&p, &[0.0, 1.0]).unwrap();
        assert_eq!(m.metric_inner(&p, &u, &u).unwrap(), 4.0f32);
    }
}
