//! Smooth maps between charts, the vertical/horizontal splitting of a
//! submersion, dilation estimates and the O'Neill tensors `A` and `T`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::connection::{christoffel_at, covariant_derivative_along, lie_bracket_at};
use crate::error::{GeometryError, Result};
use crate::geometry::{coords_f64, ChartManifold, DiffEngine, Eval, Point, ScalarField, TangentVector, VectorField};
use crate::scalar::{lit, to_f64, Real};

/// A coordinate map `source → target`, optionally carrying its analytic Jacobian.
#[derive(Clone)]
pub struct SmoothMap<T: Real> {
    source: ChartManifold<T>,
    target: ChartManifold<T>,
    map: Eval<T, DVector<T>>,
    jacobian: Option<Eval<T, DMatrix<T>>>,
}

impl<T: Real> fmt::Debug for SmoothMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("source_dim", &self.source.dim())
            .field("target_dim", &self.target.dim())
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl<T: Real> SmoothMap<T> {
    pub fn new(
        source: ChartManifold<T>,
        target: ChartManifold<T>,
        map: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            source,
            target,
            map: Arc::new(move |p| Ok(map(p))),
            jacobian: None,
        }
    }

    pub(crate) fn from_parts(
        source: ChartManifold<T>,
        target: ChartManifold<T>,
        map: Eval<T, DVector<T>>,
        jacobian: Option<Eval<T, DMatrix<T>>>,
    ) -> Self {
        Self {
            source,
            target,
            map,
            jacobian,
        }
    }

    /// Attaches an analytic Jacobian (`target.dim × source.dim`).
    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&DVector<T>) -> DMatrix<T> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(move |p| Ok(jac(p))));
        self
    }

    /// Same map with the analytic Jacobian dropped, forcing the finite-difference path.
    pub fn numeric(&self) -> Self {
        Self {
            jacobian: None,
            ..self.clone()
        }
    }

    /// Same map on a different (e.g. conformally rescaled) source chart.
    pub fn with_source(&self, source: ChartManifold<T>) -> Self {
        Self {
            source,
            ..self.clone()
        }
    }

    pub fn source(&self) -> &ChartManifold<T> {
        &self.source
    }

    pub fn target(&self) -> &ChartManifold<T> {
        &self.target
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn eval(&self, p: &DVector<T>) -> Result<DVector<T>> {
        let q = (self.map)(p)?;
        self.target.domain().check(&q)?;
        Ok(q)
    }

    pub fn fd_jacobian(&self, engine: &DiffEngine<T>, p: &DVector<T>) -> Result<DMatrix<T>> {
        let n = self.source.dim();
        let m = self.target.dim();
        let mut j = DMatrix::zeros(m, n);
        for axis in 0..n {
            let col = engine.partial(self.source.domain(), p, axis, |q| (self.map)(q))?;
            j.set_column(axis, &col);
        }
        Ok(j)
    }

    pub fn jacobian_at(&self, engine: &DiffEngine<T>, p: &DVector<T>) -> Result<DMatrix<T>> {
        let j = match &self.jacobian {
            Some(jac) => jac(p)?,
            None => self.fd_jacobian(engine, p)?,
        };
        if j.nrows() != self.target.dim() || j.ncols() != self.source.dim() {
            return Err(GeometryError::Dimension {
                expected: self.target.dim() * self.source.dim(),
                found: j.nrows() * j.ncols(),
            });
        }
        Ok(j)
    }

    /// Scaled discrepancy between analytic and finite-difference Jacobians.
    pub fn check_jacobian(&self, engine: &DiffEngine<T>, p: &DVector<T>) -> Result<Option<T>> {
        let Some(jac) = &self.jacobian else {
            return Ok(None);
        };
        let a = jac(p)?;
        let fd = self.fd_jacobian(engine, p)?;
        let scale = T::one() + a.amax().max(fd.amax());
        Ok(Some((a - fd).amax() / scale))
    }

    /// `F_* v`, anchored at `F(p)`.
    pub fn pushforward(&self, engine: &DiffEngine<T>, v: &TangentVector<T>) -> Result<TangentVector<T>> {
        let p = &v.base.coords;
        self.source.domain().check(p)?;
        let j = self.jacobian_at(engine, p)?;
        TangentVector::new(Point::new(self.eval(p)?), j * &v.components)
    }
}

/// Orthonormal vertical and horizontal frames of a submersion at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFrame<T: Real> {
    pub point: Point<T>,
    pub metric: DMatrix<T>,
    pub jacobian: DMatrix<T>,
    /// `g`-orthonormal basis of `ker F_*`, one column per vector.
    pub vertical: DMatrix<T>,
    /// `g`-orthonormal basis of the `g`-orthogonal complement of `ker F_*`.
    pub horizontal: DMatrix<T>,
    pub rank: usize,
    pub singular_values: Vec<T>,
}

impl<T: Real> SplitFrame<T> {
    pub fn vertical_part(&self, v: &DVector<T>) -> DVector<T> {
        project(&self.vertical, &self.metric, v)
    }

    pub fn horizontal_part(&self, v: &DVector<T>) -> DVector<T> {
        project(&self.horizontal, &self.metric, v)
    }

    pub fn inner(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        u.dot(&(&self.metric * v))
    }
}

fn project<T: Real>(basis: &DMatrix<T>, g: &DMatrix<T>, v: &DVector<T>) -> DVector<T> {
    basis * (basis.transpose() * (g * v))
}

/// Modified Gram-Schmidt in the `g` inner product, with one reorthogonalization pass.
fn gram_schmidt<T: Real>(g: &DMatrix<T>, vectors: &[DVector<T>]) -> DMatrix<T> {
    let n = g.nrows();
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&(g * &w));
                w -= b * c;
            }
        }
        let norm = w.dot(&(g * &w)).sqrt();
        basis.push(w / norm);
    }
    if basis.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Pointwise conformality diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationEstimate<T: Real> {
    pub point: Point<T>,
    /// Mean horizontal Rayleigh quotient `g_N(F_*X, F_*X) / g_M(X, X)`.
    pub lambda_sq: T,
    /// Largest over smallest Rayleigh quotient on the horizontal space.
    pub anisotropy: T,
    pub min_quotient: T,
    pub max_quotient: T,
}

impl<T: Real> DilationEstimate<T> {
    pub fn is_conformal(&self, conf_tol: T) -> bool {
        self.anisotropy - T::one() <= conf_tol
    }
}

/// A map plus the pointwise splitting machinery of a submersion.
#[derive(Debug, Clone)]
pub struct SubmersionContext<T: Real> {
    map: SmoothMap<T>,
    /// Engine used for numeric Jacobians.
    jacobian_engine: DiffEngine<T>,
    /// Singular values below `rank_tol · σ_max` count as zero.
    pub rank_tol: T,
    pub conf_tol: T,
}

impl<T: Real> SubmersionContext<T> {
    pub fn new(map: SmoothMap<T>, engine: DiffEngine<T>) -> Self {
        Self {
            map,
            jacobian_engine: engine,
            rank_tol: lit(1e-8),
            conf_tol: lit(1e-6),
        }
    }

    pub fn map(&self) -> &SmoothMap<T> {
        &self.map
    }

    pub fn source(&self) -> &ChartManifold<T> {
        self.map.source()
    }

    pub fn target(&self) -> &ChartManifold<T> {
        self.map.target()
    }

    pub fn with_map(&self, map: SmoothMap<T>) -> Self {
        Self { map, ..self.clone() }
    }

    pub fn frame_at(&self, p: &DVector<T>) -> Result<SplitFrame<T>> {
        let n = self.source().dim();
        let m = self.target().dim();
        let g = self.source().metric_at(p)?;
        let j = self.map.jacobian_at(&self.jacobian_engine, p)?;
        if m > n {
            return Err(GeometryError::Rank {
                coords: coords_f64(p),
                rank: n,
                expected: m,
                singular_values: Vec::new(),
            });
        }
        let mut padded = DMatrix::zeros(n, n);
        padded.view_mut((0, 0), (m, n)).copy_from(&j);
        let svd = SVD::new(padded, false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let sigma: Vec<T> = svd.singular_values.iter().copied().collect();
        let sigma_max = sigma.iter().fold(T::zero(), |a, &b| a.max(b));
        let threshold = self.rank_tol * sigma_max;
        let mut kernel = Vec::new();
        let mut row_space = Vec::new();
        for (i, &s) in sigma.iter().enumerate() {
            let v = v_t.row(i).transpose();
            if s > threshold && sigma_max > T::zero() {
                row_space.push(v);
            } else {
                kernel.push(v);
            }
        }
        if row_space.len() != m {
            return Err(GeometryError::Rank {
                coords: coords_f64(p),
                rank: row_space.len(),
                expected: m,
                singular_values: sigma.iter().map(|&s| to_f64(s)).collect(),
            });
        }
        let ginv = g.clone().try_inverse().ok_or_else(|| GeometryError::DegenerateMetric {
            coords: coords_f64(p),
            min_eigenvalue: 0.0,
            floor: 0.0,
        })?;
        let raised: Vec<DVector<T>> = row_space.iter().map(|r| &ginv * r).collect();
        let vertical = gram_schmidt(&g, &kernel);
        let horizontal = gram_schmidt(&g, &raised);
        Ok(SplitFrame {
            point: Point::new(p.clone()),
            metric: g,
            jacobian: j,
            vertical,
            horizontal,
            rank: m,
            singular_values: sigma,
        })
    }

    /// `v = 𝓥v + 𝓗v`.
    pub fn split(&self, v: &TangentVector<T>) -> Result<(TangentVector<T>, TangentVector<T>)> {
        let frame = self.frame_at(&v.base.coords)?;
        Ok((
            TangentVector::new(v.base.clone(), frame.vertical_part(&v.components))?,
            TangentVector::new(v.base.clone(), frame.horizontal_part(&v.components))?,
        ))
    }

    pub fn dilation(&self, p: &Point<T>) -> Result<DilationEstimate<T>> {
        self.dilation_at(&p.coords)
    }

    pub(crate) fn dilation_at(&self, p: &DVector<T>) -> Result<DilationEstimate<T>> {
        let frame = self.frame_at(p)?;
        let gn = self.target().metric_at(&self.map.eval(p)?)?;
        let pushed = &frame.jacobian * &frame.horizontal;
        let q = pushed.transpose() * gn * &pushed;
        let r = q.nrows();
        let eig = SymmetricEigen::new(q.clone()).eigenvalues;
        let min_q = eig.min();
        let max_q = eig.max();
        Ok(DilationEstimate {
            point: Point::new(p.clone()),
            lambda_sq: q.trace() / lit(r as f64),
            anisotropy: max_q / min_q,
            min_quotient: min_q,
            max_quotient: max_q,
        })
    }

    /// `p ↦ λ²(p)` from the dilation estimate.
    pub fn lambda_sq_field(&self) -> ScalarField<T> {
        let ctx = self.clone();
        ScalarField::try_new(move |p| Ok(ctx.dilation_at(p)?.lambda_sq))
    }

    /// `𝓥X` as a field, recomputing the splitting at every evaluation point.
    pub fn vertical_field(&self, x: &VectorField<T>) -> VectorField<T> {
        let ctx = self.clone();
        x.transformed(x.dim(), move |p, v| Ok(ctx.frame_at(p)?.vertical_part(&v)))
    }

    pub fn horizontal_field(&self, x: &VectorField<T>) -> VectorField<T> {
        let ctx = self.clone();
        x.transformed(x.dim(), move |p, v| Ok(ctx.frame_at(p)?.horizontal_part(&v)))
    }

    /// `A_E F = 𝓗∇_{𝓗E}𝓥F + 𝓥∇_{𝓗E}𝓗F`.
    pub fn oneill_a(
        &self,
        engine: &DiffEngine<T>,
        e: &VectorField<T>,
        f: &VectorField<T>,
        p: &Point<T>,
    ) -> Result<TangentVector<T>> {
        TangentVector::new(p.clone(), self.oneill(engine, e, f, &p.coords, Part::Horizontal)?)
    }

    /// `T_E F = 𝓗∇_{𝓥E}𝓥F + 𝓥∇_{𝓥E}𝓗F`.
    pub fn oneill_t(
        &self,
        engine: &DiffEngine<T>,
        e: &VectorField<T>,
        f: &VectorField<T>,
        p: &Point<T>,
    ) -> Result<TangentVector<T>> {
        TangentVector::new(p.clone(), self.oneill(engine, e, f, &p.coords, Part::Vertical)?)
    }

    fn oneill(
        &self,
        engine: &DiffEngine<T>,
        e: &VectorField<T>,
        f: &VectorField<T>,
        p: &DVector<T>,
        direction: Part,
    ) -> Result<DVector<T>> {
        let m = self.source();
        let frame = self.frame_at(p)?;
        let ev = e.eval(p)?;
        let dir = match direction {
            Part::Horizontal => frame.horizontal_part(&ev),
            Part::Vertical => frame.vertical_part(&ev),
        };
        let gamma = christoffel_at(m, engine, p)?;
        let vf = self.vertical_field(f);
        let hf = self.horizontal_field(f);
        let a = covariant_derivative_along(m, engine, &dir, &vf, p, &gamma)?;
        let b = covariant_derivative_along(m, engine, &dir, &hf, p, &gamma)?;
        Ok(frame.horizontal_part(&a) + frame.vertical_part(&b))
    }

    /// Mean curvature vector of the fiber through `p`: `(1/k) Σ T_{eₐ}eₐ` over a
    /// `g`-orthonormal vertical frame.
    pub fn fiber_mean_curvature(&self, engine: &DiffEngine<T>, p: &Point<T>) -> Result<TangentVector<T>> {
        let frame = self.frame_at(&p.coords)?;
        let basis: Vec<DVector<T>> = frame.vertical.column_iter().map(|c| c.into_owned()).collect();
        self.sub_bundle_mean_curvature(engine, &basis, p)
    }

    /// Mean curvature of the trace of `T` over the span of `basis`, which must be a
    /// `g`-orthonormal family of vertical vectors at `p`.
    pub fn sub_bundle_mean_curvature(
        &self,
        engine: &DiffEngine<T>,
        basis: &[DVector<T>],
        p: &Point<T>,
    ) -> Result<TangentVector<T>> {
        let mut h = DVector::zeros(self.source().dim());
        for e in basis {
            let field = VectorField::constant(e.clone());
            h += self.oneill(engine, &field, &field, &p.coords, Part::Vertical)?;
        }
        if !basis.is_empty() {
            h /= lit::<T>(basis.len() as f64);
        }
        TangentVector::new(p.clone(), h)
    }

    /// `𝓥(grad φ)`.
    pub fn vertical_gradient(
        &self,
        engine: &DiffEngine<T>,
        phi: &ScalarField<T>,
        p: &Point<T>,
    ) -> Result<TangentVector<T>> {
        TangentVector::new(p.clone(), self.vertical_gradient_at(engine, phi, &p.coords)?)
    }

    pub(crate) fn vertical_gradient_at(
        &self,
        engine: &DiffEngine<T>,
        phi: &ScalarField<T>,
        p: &DVector<T>,
    ) -> Result<DVector<T>> {
        let frame = self.frame_at(p)?;
        let grad = self.source().gradient_at(engine, phi, p)?;
        Ok(frame.vertical_part(&grad))
    }

    /// `½{𝓥[X, Y] − λ² g(X, Y) grad_𝓥(1/λ²)}` with `λ²` taken from the dilation
    /// estimate. Fails if the map is not conformal at `p`.
    pub fn conformal_a_formula(
        &self,
        engine: &DiffEngine<T>,
        x: &VectorField<T>,
        y: &VectorField<T>,
        p: &Point<T>,
    ) -> Result<TangentVector<T>> {
        let d = self.dilation_at(&p.coords)?;
        if !d.is_conformal(self.conf_tol) {
            return Err(GeometryError::ConformalityViolation {
                coords: coords_f64(&p.coords),
                anisotropy: to_f64(d.anisotropy),
            });
        }
        let inv = self.lambda_sq_field().map(|l| T::one() / l);
        self.a_formula_with(engine, x, y, p, d.lambda_sq, &inv)
    }

    /// The same formula with an externally supplied dilation: `lambda_sq` at `p`
    /// and the field `1/λ²` whose vertical gradient is taken.
    pub fn a_formula_with(
        &self,
        engine: &DiffEngine<T>,
        x: &VectorField<T>,
        y: &VectorField<T>,
        p: &Point<T>,
        lambda_sq: T,
        inv_lambda_sq: &ScalarField<T>,
    ) -> Result<TangentVector<T>> {
        let q = &p.coords;
        let frame = self.frame_at(q)?;
        let hx = self.horizontal_field(x);
        let hy = self.horizontal_field(y);
        let bracket = lie_bracket_at(engine, self.source().domain(), &hx, &hy, q)?;
        let gxy = frame.inner(&hx.eval(q)?, &hy.eval(q)?);
        let grad = self.vertical_gradient_at(engine, inv_lambda_sq, q)?;
        let v = (frame.vertical_part(&bracket) - grad * (lambda_sq * gxy)) * lit::<T>(0.5);
        TangentVector::new(p.clone(), v)
    }
}

#[derive(Clone, Copy)]
enum Part {
    Horizontal,
    Vertical,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::warped::WarpedProduct;

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    fn pt(c: &[f64]) -> Point<f64> {
        Point::from_slice(c)
    }

    /// `(x₁..x₄) ↦ (e^{x₃} sin x₄, e^{x₃} cos x₄)`.
    fn r4_example_map() -> SmoothMap<f64> {
        SmoothMap::new(ChartManifold::euclidean(4), ChartManifold::euclidean(2), |p: &DVector<f64>| {
            let r = p[2].exp();
            v(&[r * p[3].sin(), r * p[3].cos()])
        })
        .with_jacobian(|p| {
            let r = p[2].exp();
            let (s, c) = p[3].sin_cos();
            DMatrix::from_row_slice(2, 4, &[0.0, 0.0, r * s, r * c, 0.0, 0.0, r * c, -r * s])
        })
    }

    fn ctx(map: SmoothMap<f64>) -> SubmersionContext<f64> {
        SubmersionContext::new(map, DiffEngine::default())
    }

    fn warped_line_projection() -> SubmersionContext<f64> {
        let w = WarpedProduct::new(
            ChartManifold::euclidean(1),
            ChartManifold::euclidean(1),
            ScalarField::new(|p: &DVector<f64>| p[0].exp()),
        )
        .unwrap();
        ctx(SmoothMap::new(w.ambient().clone(), ChartManifold::euclidean(1), |p: &DVector<f64>| v(&[p[0]]))
            .with_jacobian(|_| DMatrix::from_row_slice(1, 2, &[1.0, 0.0])))
    }

    #[test]
    fn pushforward_examples() {
        let e = DiffEngine::default();
        let id = SmoothMap::new(ChartManifold::euclidean(2), ChartManifold::euclidean(2), |p| p.clone());
        let o = pt(&[0.5, 0.5]);
        let w = TangentVector::from_slice(&o, &[1.0, -2.0]).unwrap();
        assert!((id.pushforward(&e, &w).unwrap().components - v(&[1.0, -2.0])).amax() < 1e-9);

        let f = r4_example_map();
        let o = pt(&[0.0; 4]);
        let d3 = TangentVector::from_slice(&o, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f.pushforward(&e, &d3).unwrap().components, v(&[0.0, 1.0]));
        let d1 = TangentVector::from_slice(&o, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.pushforward(&e, &d1).unwrap().components, v(&[0.0, 0.0]));
        assert!(f.check_jacobian(&e, &v(&[0.1, 0.2, 0.3, 0.4])).unwrap().unwrap() < 1e-9);
    }

    #[test]
    fn split_examples() {
        let c = ctx(r4_example_map());
        let o = pt(&[0.0; 4]);
        let vert = TangentVector::from_slice(&o, &[1.0, 2.0, 0.0, 0.0]).unwrap();
        let (a, b) = c.split(&vert).unwrap();
        assert!((a.components - v(&[1.0, 2.0, 0.0, 0.0])).amax() < 1e-12);
        assert!(b.components.amax() < 1e-12);

        let mixed = TangentVector::from_slice(&o, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        let (a, b) = c.split(&mixed).unwrap();
        assert!((a.components - v(&[1.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
        assert!((b.components.clone() - v(&[0.0, 0.0, 1.0, 0.0])).amax() < 1e-12);
        let (a2, b2) = c.split(&b).unwrap();
        assert!(a2.components.amax() < 1e-12);
        assert!((b2.components - b.components).amax() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let collapse = SmoothMap::new(ChartManifold::euclidean(3), ChartManifold::euclidean(2), |p: &DVector<f64>| {
            v(&[p[0], 2.0 * p[0]])
        })
        .with_jacobian(|_| DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]));
        match ctx(collapse).frame_at(&v(&[0.0, 0.0, 0.0])) {
            Err(GeometryError::Rank { rank, expected, singular_values, .. }) => {
                assert_eq!((rank, expected), (1, 2));
                assert_eq!(singular_values.len(), 3);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn dilation_examples() {
        let d = warped_line_projection().dilation(&pt(&[0.3, 0.1])).unwrap();
        assert!((d.lambda_sq - 1.0).abs() < 1e-12);
        assert!((d.anisotropy - 1.0).abs() < 1e-12);

        let c = ctx(r4_example_map());
        for x3 in [-0.7, 0.0, 0.4] {
            let d = c.dilation(&pt(&[0.0, 0.0, x3, 0.9])).unwrap();
            assert!((d.lambda_sq - (2.0 * x3).exp()).abs() <= 1e-12 * (2.0 * x3).exp());
            assert!(d.anisotropy - 1.0 <= 1e-12);
        }

        let stretch = SmoothMap::new(ChartManifold::euclidean(3), ChartManifold::euclidean(2), |p: &DVector<f64>| {
            v(&[p[0], 2.0 * p[1]])
        });
        let d = ctx(stretch).dilation(&pt(&[0.1, 0.2, 0.3])).unwrap();
        assert!((d.anisotropy - 4.0).abs() < 1e-8);
        assert!(!d.is_conformal(1e-6));
    }

    #[test]
    fn a_vanishes_on_vertical_and_on_product_leaves() {
        let e = DiffEngine::default();
        let c = ctx(r4_example_map());
        let p = pt(&[0.1, -0.2, 0.3, 0.4]);
        let vert = VectorField::coordinate(4, 0);
        let any = VectorField::new(4, |q: &DVector<f64>| v(&[q[1], 1.0, q[0], 0.5]));
        assert!(c.oneill_a(&e, &vert, &any, &p).unwrap().components.amax() < 1e-12);

        let proj = warped_line_projection();
        let dt = VectorField::coordinate(2, 0);
        assert!(proj.oneill_a(&e, &dt, &dt, &pt(&[0.2, 0.5])).unwrap().components.amax() < 1e-8);
    }

    #[test]
    fn r4_example_a_matches_formula() {
        let e = DiffEngine::default();
        let c = ctx(r4_example_map());
        let p = pt(&[0.0; 4]);
        let d3 = VectorField::coordinate(4, 2);
        let d4 = VectorField::coordinate(4, 3);
        let a = c.oneill_a(&e, &d3, &d4, &p).unwrap();
        let formula = c.conformal_a_formula(&e, &d3, &d4, &p).unwrap();
        assert!(formula.components.amax() < 1e-9);
        assert!((a.components - formula.components).amax() < 1e-5);
    }

    #[test]
    fn t_examples() {
        let e = DiffEngine::default();
        // horizontal E
        let proj = warped_line_projection();
        let dt = VectorField::coordinate(2, 0);
        let dx = VectorField::coordinate(2, 1);
        let p = pt(&[0.0, 0.0]);
        assert!(proj.oneill_t(&e, &dt, &dx, &p).unwrap().components.amax() < 1e-12);
        // fibers of π₁ are umbilical with H = −D ln f
        let t = proj.oneill_t(&e, &dx, &dx, &p).unwrap();
        assert!((t.components - v(&[-1.0, 0.0])).amax() < 1e-8);
        let h = proj.fiber_mean_curvature(&e, &p).unwrap();
        assert!((h.components - v(&[-1.0, 0.0])).amax() < 1e-8);

        // projection onto the second factor: fibers are the leaves ℝ×{x}
        let w = WarpedProduct::new(
            ChartManifold::euclidean(1),
            ChartManifold::euclidean(1),
            ScalarField::new(|p: &DVector<f64>| p[0].exp()),
        )
        .unwrap();
        let second = ctx(SmoothMap::new(w.ambient().clone(), ChartManifold::euclidean(1), |p: &DVector<f64>| v(&[p[1]])));
        assert!(second.oneill_t(&e, &dt, &dt, &pt(&[0.3, -0.2])).unwrap().components.amax() < 1e-8);
    }

    #[test]
    fn vertical_gradient_examples() {
        let e = DiffEngine::default();
        let c = ctx(r4_example_map());
        let p = pt(&[0.2, 0.1, -0.3, 0.5]);
        assert!(c.vertical_gradient(&e, &ScalarField::constant(3.0), &p).unwrap().components.amax() == 0.0);
        let inv = ScalarField::new(|q: &DVector<f64>| (-2.0 * q[2]).exp());
        assert!(c.vertical_gradient(&e, &inv, &p).unwrap().components.amax() < 1e-12);

        let proj = warped_line_projection();
        let x = ScalarField::new(|q: &DVector<f64>| q[1]);
        let t = 0.4f64;
        let g = proj.vertical_gradient(&e, &x, &pt(&[t, 0.7])).unwrap();
        assert!((g.components - v(&[0.0, (-2.0 * t).exp()])).amax() < 1e-9);
    }

    #[test]
    fn formula_reduces_for_constant_dilation() {
        // twisted submersion with target scaled by 9: λ ≡ 3
        let heis = ChartManifold::new(Domain::unbounded(3), |p: &DVector<f64>| {
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0 + p[0] * p[0], -p[0], 0.0, -p[0], 1.0])
        });
        let target = ChartManifold::new(Domain::unbounded(2), |_| DMatrix::identity(2, 2) * 9.0);
        let c = ctx(SmoothMap::new(heis, target, |p| v(&[p[0], p[1]]))
            .with_jacobian(|_| DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])));
        let e = DiffEngine::default();
        let p = pt(&[0.3, -0.1, 0.2]);
        let x = VectorField::coordinate(3, 0);
        let y = VectorField::coordinate(3, 1);
        let formula = c.conformal_a_formula(&e, &x, &y, &p).unwrap();
        let bracket = lie_bracket_at(&e, c.source().domain(), &c.horizontal_field(&x), &c.horizontal_field(&y), &p.coords).unwrap();
        let half = c.frame_at(&p.coords).unwrap().vertical_part(&bracket) * 0.5;
        assert!((formula.components.clone() - half).amax() < 1e-6);
        assert!(formula.components.amax() > 0.1);
        let a = c.oneill_a(&e, &c.horizontal_field(&x), &c.horizontal_field(&y), &p).unwrap();
        assert!((a.components - formula.components).amax() < 1e-5);
    }

    #[test]
    fn non_conformal_formula_is_an_error() {
        let stretch = SmoothMap::new(ChartManifold::euclidean(3), ChartManifold::euclidean(2), |p: &DVector<f64>| {
            v(&[p[0], 2.0 * p[1]])
        });
        let x = VectorField::coordinate(3, 0);
        let err = ctx(stretch)
            .conformal_a_formula(&DiffEngine::default(), &x, &x, &pt(&[0.0, 0.0, 0.0]))
            .unwrap_err();
        assert!(matches!(err, GeometryError::ConformalityViolation { anisotropy, .. } if (anisotropy - 4.0).abs() < 1e-6));
    }
}
