//! Warped products `M₁ ×_f M₂` with metric `g₁ + f²g₂`.
//!
//! Ambient coordinates are `(first-factor coords, second-factor coords)`, so
//! membership in the lifts of either factor is decided by index ranges.

use nalgebra::{DMatrix, DVector};

use crate::connection::{
    christoffel_at, coordinate_submanifold_sff, covariant_derivative_along, normal_projector,
    SecondFundamentalFormAt,
};
use crate::error::{GeometryError, Result};
use crate::geometry::{coords_f64, ChartManifold, DiffEngine, Point, ScalarField, VectorField};
use crate::residual::ResidualReport;
use crate::scalar::{scale_of, to_f64, Real};
use crate::testfields::FieldFamily;

/// Which factor of a warped product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Coordinate-aligned submanifold through a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    /// `M₁ × {y}`.
    Leaf,
    /// `{x} × M₂`.
    Fiber,
}

#[derive(Debug, Clone)]
pub struct WarpedProduct<T: Real> {
    first: ChartManifold<T>,
    second: ChartManifold<T>,
    warp: ScalarField<T>,
    ambient: ChartManifold<T>,
}

/// A factor vector field together with its lift to the product.
#[derive(Debug, Clone)]
pub struct LiftedField<T: Real> {
    pub origin: Factor,
    pub factor_field: VectorField<T>,
    pub ambient_field: VectorField<T>,
}

impl<T: Real> WarpedProduct<T> {
    /// Builds `M₁ ×_f M₂`, rejecting warps that are not positive on the probe
    /// lattice of the first factor.
    pub fn new(first: ChartManifold<T>, second: ChartManifold<T>, warp: ScalarField<T>) -> Result<Self> {
        for p1 in first.domain().probe_points(81) {
            check_warp(&warp, &p1)?;
        }
        let m1 = first.dim();
        let m2 = second.dim();
        let g1 = first.metric_field();
        let g2 = second.metric_field();
        let f = warp.clone();
        let domain = first.domain().product(second.domain());
        let ambient = ChartManifold::try_new(domain, move |p| {
            let p1 = p.rows(0, m1).into_owned();
            let p2 = p.rows(m1, m2).into_owned();
            let a = g1(&p1)?;
            let fv = f.eval(&p1)?;
            let b = g2(&p2)? * (fv * fv);
            let mut g = DMatrix::zeros(m1 + m2, m1 + m2);
            g.view_mut((0, 0), (m1, m1)).copy_from(&a);
            g.view_mut((m1, m1), (m2, m2)).copy_from(&b);
            Ok(g)
        });
        Ok(Self {
            first,
            second,
            warp,
            ambient,
        })
    }

    pub fn first(&self) -> &ChartManifold<T> {
        &self.first
    }

    pub fn second(&self) -> &ChartManifold<T> {
        &self.second
    }

    pub fn warp(&self) -> &ScalarField<T> {
        &self.warp
    }

    pub fn ambient(&self) -> &ChartManifold<T> {
        &self.ambient
    }

    pub fn first_dim(&self) -> usize {
        self.first.dim()
    }

    pub fn second_dim(&self) -> usize {
        self.second.dim()
    }

    pub fn axes(&self, factor: Factor) -> Vec<usize> {
        let m1 = self.first_dim();
        match factor {
            Factor::First => (0..m1).collect(),
            Factor::Second => (m1..m1 + self.second_dim()).collect(),
        }
    }

    pub fn split_point(&self, p: &DVector<T>) -> (DVector<T>, DVector<T>) {
        let m1 = self.first_dim();
        (
            p.rows(0, m1).into_owned(),
            p.rows(m1, self.second_dim()).into_owned(),
        )
    }

    pub fn join(p1: &DVector<T>, p2: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(p1.len() + p2.len(), p1.iter().chain(p2.iter()).copied())
    }

    /// `π_{i*}`: the factor block of an ambient vector.
    pub fn push_down(&self, origin: Factor, v: &DVector<T>) -> DVector<T> {
        let m1 = self.first_dim();
        match origin {
            Factor::First => v.rows(0, m1).into_owned(),
            Factor::Second => v.rows(m1, self.second_dim()).into_owned(),
        }
    }

    /// Zero-pads a factor vector into ambient components.
    pub fn pad(&self, origin: Factor, v: &DVector<T>) -> DVector<T> {
        let m1 = self.first_dim();
        let mut out = DVector::zeros(m1 + self.second_dim());
        match origin {
            Factor::First => out.rows_mut(0, m1).copy_from(v),
            Factor::Second => out.rows_mut(m1, self.second_dim()).copy_from(v),
        }
        out
    }

    pub fn lift_vector(&self, origin: Factor, field: &VectorField<T>) -> LiftedField<T> {
        let m1 = self.first_dim();
        let m2 = self.second_dim();
        let inner = field.clone();
        let ambient_field = VectorField::try_new(m1 + m2, move |p| {
            let mut out = DVector::zeros(m1 + m2);
            match origin {
                Factor::First => out
                    .rows_mut(0, m1)
                    .copy_from(&inner.eval(&p.rows(0, m1).into_owned())?),
                Factor::Second => out
                    .rows_mut(m1, m2)
                    .copy_from(&inner.eval(&p.rows(m1, m2).into_owned())?),
            }
            Ok(out)
        });
        LiftedField {
            origin,
            factor_field: field.clone(),
            ambient_field,
        }
    }

    /// `φ ∘ πᵢ`.
    pub fn lift_scalar(&self, origin: Factor, field: &ScalarField<T>) -> ScalarField<T> {
        let m1 = self.first_dim();
        let m2 = self.second_dim();
        match origin {
            Factor::First => field.precompose(move |p| p.rows(0, m1).into_owned()),
            Factor::Second => field.precompose(move |p| p.rows(m1, m2).into_owned()),
        }
    }

    /// `ln f ∘ π₁` on the product.
    pub fn log_warp(&self) -> ScalarField<T> {
        self.lift_scalar(Factor::First, &self.warp.map(|v| v.ln()))
    }

    /// `D ln f` on the product at `p`.
    pub fn log_warp_gradient(&self, engine: &DiffEngine<T>, p: &DVector<T>) -> Result<DVector<T>> {
        self.ambient.gradient_at(engine, &self.log_warp(), p)
    }

    pub fn second_fundamental_form(
        &self,
        engine: &DiffEngine<T>,
        which: Slice,
        p: &Point<T>,
    ) -> Result<SecondFundamentalFormAt<T>> {
        let axes = match which {
            Slice::Leaf => self.axes(Factor::First),
            Slice::Fiber => self.axes(Factor::Second),
        };
        check_warp(&self.warp, &self.split_point(&p.coords).0)?;
        coordinate_submanifold_sff(&self.ambient, engine, &axes, p)
    }
}

fn check_warp<T: Real>(warp: &ScalarField<T>, p1: &DVector<T>) -> Result<()> {
    let v = warp.eval(p1)?;
    if !(v > T::zero()) {
        return Err(GeometryError::WarpPositivity {
            coords: coords_f64(p1),
            value: to_f64(v),
        });
    }
    Ok(())
}

/// One probe of the connection lemma: an ambient point plus two fields on each factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSample<T: Real> {
    pub point: DVector<T>,
    pub e1: FieldFamily,
    pub f1: FieldFamily,
    pub e2: FieldFamily,
    pub f2: FieldFamily,
}

pub const LEMMA_ITEMS: [&str; 4] = ["item1", "item2", "item3", "item4"];

fn diff<T: Real>(a: &DVector<T>, b: &DVector<T>) -> (T, T) {
    ((a - b).amax(), scale_of(a.iter().chain(b.iter()).copied()))
}

/// Residuals of the four connection identities of a warped product:
///
/// 1. `∇_{E₁}F₁ = lift(∇¹_{E₁}F₁)`;
/// 2. `∇_{E₁}E₂ = ∇_{E₂}E₁ = (E₁f / f) E₂`;
/// 3. `nor ∇_{E₂}F₂ = −g(E₂, F₂) D ln f`;
/// 4. `tan ∇_{E₂}F₂ = lift(∇²_{E₂}F₂)`.
///
/// A failing sample is recorded as skipped with its diagnostic; it never aborts the run.
pub fn verify_warped_lemma<T: Real>(
    w: &WarpedProduct<T>,
    engine: &DiffEngine<T>,
    samples: &[LemmaSample<T>],
) -> ResidualReport {
    let mut report = ResidualReport::with_entries(&LEMMA_ITEMS);
    for s in samples {
        if let Err(e) = lemma_sample(w, engine, s, &mut report) {
            for item in LEMMA_ITEMS {
                report.entry(item).skip(format!("{:?}: {e}", coords_f64(&s.point)));
            }
        }
    }
    report
}

fn lemma_sample<T: Real>(
    w: &WarpedProduct<T>,
    engine: &DiffEngine<T>,
    s: &LemmaSample<T>,
    report: &mut ResidualReport,
) -> Result<()> {
    let m = w.ambient();
    let p = &s.point;
    let (p1, p2) = w.split_point(p);
    check_warp(&w.warp, &p1)?;
    let gamma = christoffel_at(m, engine, p)?;
    let g = m.metric_at(p)?;

    let e1 = w.lift_vector(Factor::First, &s.e1.to_field());
    let f1 = w.lift_vector(Factor::First, &s.f1.to_field());
    let e2 = w.lift_vector(Factor::Second, &s.e2.to_field());
    let f2 = w.lift_vector(Factor::Second, &s.f2.to_field());
    let e1p = e1.ambient_field.eval(p)?;
    let e2p = e2.ambient_field.eval(p)?;

    // item 1
    let lhs = covariant_derivative_along(m, engine, &e1p, &f1.ambient_field, p, &gamma)?;
    let gamma1 = christoffel_at(w.first(), engine, &p1)?;
    let e1_factor = e1.factor_field.eval(&p1)?;
    let rhs = w.pad(
        Factor::First,
        &covariant_derivative_along(w.first(), engine, &e1_factor, &f1.factor_field, &p1, &gamma1)?,
    );
    let (r, sc) = diff(&lhs, &rhs);
    report.entry("item1").record(r, sc);

    // item 2, both orders
    let df = w.warp.differential_at(engine, w.first().domain(), &p1)?;
    let ratio = df.dot(&e1_factor) / w.warp.eval(&p1)?;
    let rhs = &e2p * ratio;
    let a = covariant_derivative_along(m, engine, &e1p, &e2.ambient_field, p, &gamma)?;
    let b = covariant_derivative_along(m, engine, &e2p, &e1.ambient_field, p, &gamma)?;
    let (ra, sa) = diff(&a, &rhs);
    let (rb, sb) = diff(&b, &rhs);
    report.entry("item2").record(ra.max(rb), sa.max(sb));

    // items 3 and 4 share ∇_{E₂}F₂
    let nabla = covariant_derivative_along(m, engine, &e2p, &f2.ambient_field, p, &gamma)?;
    let nor = normal_projector(&g, &w.axes(Factor::Second))?;
    let normal = &nor * &nabla;
    let tangential = &nabla - &normal;
    let f2p = f2.ambient_field.eval(p)?;
    let inner = e2p.dot(&(&g * &f2p));
    let rhs3 = w.log_warp_gradient(engine, p)? * (-inner);
    let (r, sc) = diff(&normal, &rhs3);
    report.entry("item3").record(r, sc);

    let gamma2 = christoffel_at(w.second(), engine, &p2)?;
    let e2_factor = e2.factor_field.eval(&p2)?;
    let rhs4 = w.pad(
        Factor::Second,
        &covariant_derivative_along(w.second(), engine, &e2_factor, &f2.factor_field, &p2, &gamma2)?,
    );
    let (r, sc) = diff(&tangential, &rhs4);
    report.entry("item4").record(r, sc);
    Ok(())
}

pub const COROLLARY_ENTRIES: [&str; 3] = ["leaf_geodesic", "fiber_umbilic", "fiber_mean_curvature"];

/// Leaves are totally geodesic; fibers are totally umbilical with `H = −D ln f`.
pub fn verify_warped_corollary<T: Real>(
    w: &WarpedProduct<T>,
    engine: &DiffEngine<T>,
    points: &[DVector<T>],
) -> ResidualReport {
    let mut report = ResidualReport::with_entries(&COROLLARY_ENTRIES);
    for p in points {
        let res = (|| -> Result<()> {
            let pt = Point::new(p.clone());
            let leaf = w.second_fundamental_form(engine, Slice::Leaf, &pt)?;
            let gamma = christoffel_at(w.ambient(), engine, p)?;
            let n = w.ambient().dim();
            let mut scale = T::one();
            for &a in &leaf.tangent_axes {
                for &b in &leaf.tangent_axes {
                    for k in 0..n {
                        scale = scale.max(T::one() + gamma.get(k, a, b).abs());
                    }
                }
            }
            report.entry("leaf_geodesic").record(leaf.max_norm(), scale);

            let fiber = w.second_fundamental_form(engine, Slice::Fiber, &pt)?;
            let values = fiber.values.iter().flatten().flat_map(|v| v.iter().copied());
            let scale = scale_of(values.chain(fiber.mean_curvature.iter().copied()));
            report
                .entry("fiber_umbilic")
                .record(fiber.umbilicity_residual(), scale);
            let expected = -w.log_warp_gradient(engine, p)?;
            let (r, sc) = diff(&fiber.mean_curvature, &expected);
            report.entry("fiber_mean_curvature").record(r, sc);
            Ok(())
        })();
        if let Err(e) = res {
            for name in COROLLARY_ENTRIES {
                report.entry(name).skip(format!("{:?}: {e}", coords_f64(p)));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Interval};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn line() -> ChartManifold<f64> {
        ChartManifold::euclidean(1)
    }

    fn warped_line() -> WarpedProduct<f64> {
        WarpedProduct::new(line(), line(), ScalarField::new(|p: &DVector<f64>| p[0].exp())).unwrap()
    }

    fn sphere() -> WarpedProduct<f64> {
        let m1 = ChartManifold::euclidean_on(Domain::from_intervals(vec![Interval::new(0.0, PI)]));
        let m2 = ChartManifold::euclidean_on(Domain::from_intervals(vec![Interval::new(0.0, 2.0 * PI)]));
        WarpedProduct::new(m1, m2, ScalarField::new(|p: &DVector<f64>| p[0].sin())).unwrap()
    }

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    #[test]
    fn unit_warp_gives_product_metric() {
        let plane = ChartManifold::<f64>::new(Domain::unbounded(2), |p| {
            DMatrix::from_row_slice(2, 2, &[2.0, p[0], p[0], 3.0])
        });
        let w = WarpedProduct::new(plane.clone(), line(), ScalarField::constant(1.0)).unwrap();
        let g = w.ambient().metric_at(&v(&[0.5, 0.0, 4.0])).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 3.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(g, expected);
    }

    #[test]
    fn exponential_warp_metric() {
        let g = warped_line().ambient().metric_at(&v(&[1.0, -7.0])).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 0)], 0.0);
        assert!((g[(1, 1)] - 1f64.exp().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sphere_chart_at_equator() {
        let g = sphere().ambient().metric_at(&v(&[PI / 2.0, 1.0])).unwrap();
        assert!((g - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn nonpositive_warp_is_rejected() {
        let err = WarpedProduct::new(line(), line(), ScalarField::new(|p: &DVector<f64>| p[0])).unwrap_err();
        assert!(matches!(err, GeometryError::WarpPositivity { .. }));
    }

    #[test]
    fn lifts() {
        let w = warped_line();
        let dt = w.lift_vector(Factor::First, &VectorField::coordinate(1, 0));
        assert_eq!(dt.ambient_field.eval(&v(&[0.3, 0.9])).unwrap(), v(&[1.0, 0.0]));
        let f = w.lift_scalar(Factor::First, w.warp());
        assert!((f.eval(&v(&[2.0, 5.0])).unwrap() - 2f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn lift_pushes_down_to_the_factor_field() {
        use rand::SeedableRng;
        let plane = ChartManifold::<f64>::euclidean(2);
        let w = WarpedProduct::new(line(), plane, ScalarField::new(|p: &DVector<f64>| 1.0 + p[0] * p[0])).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = FieldFamily::draw(&mut rng, 2).to_field::<f64>();
            let lifted = w.lift_vector(Factor::Second, &x);
            let p = v(&[0.2, -0.4, 1.1]);
            let amb = lifted.ambient_field.eval(&p).unwrap();
            assert_eq!(w.push_down(Factor::Second, &amb), x.eval(&v(&[-0.4, 1.1])).unwrap());
            assert_eq!(w.push_down(Factor::First, &amb), v(&[0.0]));
            // independent of the first-factor coordinate
            assert_eq!(lifted.ambient_field.eval(&v(&[9.0, -0.4, 1.1])).unwrap(), amb);
        }
    }

    #[test]
    fn lemma_on_warped_line_coordinate_fields() {
        let coord = FieldFamily::Coordinate { dim: 1, axis: 0 };
        let s = LemmaSample {
            point: v(&[0.0, 0.0]),
            e1: coord.clone(),
            f1: coord.clone(),
            e2: coord.clone(),
            f2: coord,
        };
        let r = verify_warped_lemma(&warped_line(), &DiffEngine::default(), &[s]);
        for item in LEMMA_ITEMS {
            assert!(r.get(item).unwrap().passes(1e-6), "{item}: {:?}", r.get(item));
        }
    }

    #[test]
    fn lemma_in_product_case_has_vanishing_warp_terms() {
        let w = WarpedProduct::new(line(), line(), ScalarField::constant(1.0)).unwrap();
        let s = LemmaSample {
            point: v(&[0.4, -0.2]),
            e1: FieldFamily::Linear { dim: 1, a: vec![0.3], b: vec![1.0] },
            f1: FieldFamily::Coordinate { dim: 1, axis: 0 },
            e2: FieldFamily::Linear { dim: 1, a: vec![-0.2], b: vec![0.5] },
            f2: FieldFamily::Linear { dim: 1, a: vec![0.7], b: vec![0.1] },
        };
        let r = verify_warped_lemma(&w, &DiffEngine::default(), &[s]);
        assert!(r.all_pass(1e-6));
        assert!(w.log_warp_gradient(&DiffEngine::default(), &v(&[0.4, -0.2])).unwrap().amax() == 0.0);
    }

    #[test]
    fn sphere_item3_oracle() {
        let w = sphere();
        let e = DiffEngine::default();
        let p = v(&[FRAC_PI_4, 1.0]);
        let sff = w.second_fundamental_form(&e, Slice::Fiber, &Point::new(p.clone())).unwrap();
        let s = FRAC_PI_4.sin();
        let expected = v(&[-s * FRAC_PI_4.cos(), 0.0]);
        assert!((&sff.values[0][0] - expected).amax() < 1e-8);
    }

    #[test]
    fn leaves_geodesic_fibers_umbilic() {
        let e = DiffEngine::default();
        let w = warped_line();
        let p = Point::from_slice(&[0.0, 0.0]);
        assert!(w.second_fundamental_form(&e, Slice::Leaf, &p).unwrap().max_norm() < 1e-12);
        let fiber = w.second_fundamental_form(&e, Slice::Fiber, &p).unwrap();
        assert!((fiber.values[0][0].clone() - v(&[-1.0, 0.0])).amax() < 1e-8);
        assert!((fiber.mean_curvature.clone() - v(&[-1.0, 0.0])).amax() < 1e-8);

        let flat = WarpedProduct::new(line(), line(), ScalarField::constant(2.0)).unwrap();
        assert!(flat.second_fundamental_form(&e, Slice::Fiber, &p).unwrap().max_norm() < 1e-12);

        let r = verify_warped_corollary(&sphere(), &e, &[v(&[0.7, 2.0]), v(&[2.1, 0.3])]);
        assert!(r.get("leaf_geodesic").unwrap().passes(1e-8));
        assert!(r.get("fiber_umbilic").unwrap().passes(1e-6));
        assert!(r.get("fiber_mean_curvature").unwrap().passes(1e-6));
    }
}
