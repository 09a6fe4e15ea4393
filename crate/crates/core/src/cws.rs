//! Conformal warped product submersions `φ₁ × φ₂ : M₁ ×_f M₂ → N₁ ×_ρ N₂`.
//!
//! The dilation of the product is not postulated. At each point the two
//! horizontal blocks stretch by
//!
//! ```text
//! r1 = λ₁²(p₁)          r2 = ρ²(φ₁(p₁)) λ₂²(p₂) / f²(p₁)
//! ```
//!
//! and the product is conformal exactly where `r1 = r2`; the lifted dilation is
//! then `λ² = r1`. Points where the two disagree are reported rather than averaged away.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};
use crate::geometry::{coords_f64, DiffEngine, Point, ScalarField, VectorField};
use crate::residual::{Residual, ResidualReport};
use crate::scalar::{lit, scale_of, to_f64, Real};
use crate::submersion::{SmoothMap, SubmersionContext};
use crate::testfields::FieldFamily;
use crate::warped::{Factor, WarpedProduct};

#[derive(Debug, Clone)]
pub struct ConformalWarpedSubmersion<T: Real> {
    phi1: SubmersionContext<T>,
    phi2: SubmersionContext<T>,
    lambda1: ScalarField<T>,
    lambda2: ScalarField<T>,
    source: WarpedProduct<T>,
    target: WarpedProduct<T>,
    product: SubmersionContext<T>,
}

/// Stretch factors of the two horizontal blocks at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityEntry<T: Real> {
    pub point: Point<T>,
    pub r1: T,
    pub r2: T,
    pub conformal_here: bool,
}

impl<T: Real> CompatibilityEntry<T> {
    /// `|r1/r2 − 1|`.
    pub fn mismatch(&self) -> T {
        (self.r1 / self.r2 - T::one()).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport<T: Real> {
    pub entries: Vec<CompatibilityEntry<T>>,
    pub conformal: bool,
}

/// Which denominator the second `A`-identity uses inside `grad_𝓥(f²/λᵢ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Item2Variant {
    /// `f²/λ₁²`, as the identity is stated.
    Lambda1,
    /// `f²/λ₂²`, as it appears in the derivation.
    Lambda2,
}

impl Item2Variant {
    pub fn label(self) -> &'static str {
        match self {
            Item2Variant::Lambda1 => "lambda1",
            Item2Variant::Lambda2 => "lambda2",
        }
    }
}

/// One probe: an ambient source point and two test fields on each factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CwsSample<T: Real> {
    pub point: DVector<T>,
    pub x1: FieldFamily,
    pub y1: FieldFamily,
    pub x2: FieldFamily,
    pub y2: FieldFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item2Report {
    pub lambda1: Residual,
    pub lambda2: Residual,
    /// Scaled distance between the two right-hand sides.
    pub variant_gap: Residual,
}

impl Item2Report {
    pub fn variant(&self, v: Item2Variant) -> &Residual {
        match v {
            Item2Variant::Lambda1 => &self.lambda1,
            Item2Variant::Lambda2 => &self.lambda2,
        }
    }

    pub fn passing(&self, tol: f64) -> Vec<Item2Variant> {
        [Item2Variant::Lambda1, Item2Variant::Lambda2]
            .into_iter()
            .filter(|&v| self.variant(v).passes(tol))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescalingReport {
    /// `|dil² − 1|` under `G = λ² g`.
    pub rescaled: Residual,
    /// `|dil² − 1|` under the factor `e^{2σ} = 1/λ²`.
    pub literal_factor: Residual,
    /// `|dil² − e^{0.2}|` relative, under `G·e^{-0.2}`.
    pub perturbed: Residual,
    /// Smallest `|dil² − 1|` seen under the perturbed factor.
    pub perturbation_min_gap: f64,
    /// `|τ* − τ|` for the exponent recovered from the perturbed probe.
    pub uniqueness: Residual,
}

pub const PERTURBATION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FiberReport {
    pub h1: Residual,
    pub h2: Residual,
    pub mixed: Residual,
}

impl<T: Real> ConformalWarpedSubmersion<T> {
    /// Builds `φ₁ × φ₂` together with both warped products and checks rank,
    /// positivity and the kernel product law on the factor probe lattices.
    pub fn new(
        phi1: SmoothMap<T>,
        lambda1: ScalarField<T>,
        phi2: SmoothMap<T>,
        lambda2: ScalarField<T>,
        f: ScalarField<T>,
        rho: ScalarField<T>,
        engine: DiffEngine<T>,
    ) -> Result<Self> {
        let source = WarpedProduct::new(phi1.source().clone(), phi2.source().clone(), f)?;
        let target = WarpedProduct::new(phi1.target().clone(), phi2.target().clone(), rho)?;
        let product_map = product_map(&phi1, &phi2, &source, &target, engine);
        let cws = Self {
            phi1: SubmersionContext::new(phi1, engine),
            phi2: SubmersionContext::new(phi2, engine),
            lambda1,
            lambda2,
            product: SubmersionContext::new(product_map, engine),
            source,
            target,
        };
        let probes1 = cws.source.first().domain().probe_points(27);
        let probes2 = cws.source.second().domain().probe_points(27);
        for (i, p1) in probes1.iter().enumerate() {
            let p2 = &probes2[i % probes2.len()];
            for (field, point) in [(&cws.lambda1, p1), (&cws.lambda2, p2)] {
                let v = field.eval(point)?;
                if !(v > T::zero()) {
                    return Err(GeometryError::Config(format!(
                        "dilation is not positive at {:?}",
                        coords_f64(point)
                    )));
                }
            }
            cws.kernel_dims(&WarpedProduct::join(p1, p2))?;
        }
        Ok(cws)
    }

    pub fn phi1(&self) -> &SubmersionContext<T> {
        &self.phi1
    }

    pub fn phi2(&self) -> &SubmersionContext<T> {
        &self.phi2
    }

    pub fn lambda1(&self) -> &ScalarField<T> {
        &self.lambda1
    }

    pub fn lambda2(&self) -> &ScalarField<T> {
        &self.lambda2
    }

    pub fn source(&self) -> &WarpedProduct<T> {
        &self.source
    }

    pub fn target(&self) -> &WarpedProduct<T> {
        &self.target
    }

    pub fn product(&self) -> &SubmersionContext<T> {
        &self.product
    }

    /// `(dim ker φ_*, dim ker φ₁* + dim ker φ₂*)` at `p`.
    pub fn kernel_dims(&self, p: &DVector<T>) -> Result<(usize, usize)> {
        let (p1, p2) = self.source.split_point(p);
        let k = self.product.frame_at(p)?.vertical.ncols();
        let k1 = self.phi1.frame_at(&p1)?.vertical.ncols();
        let k2 = self.phi2.frame_at(&p2)?.vertical.ncols();
        Ok((k, k1 + k2))
    }

    /// Largest absolute entry in the off-diagonal blocks of the product Jacobian.
    pub fn jacobian_cross_block_max(&self, p: &DVector<T>) -> Result<T> {
        let j = self.product.map().jacobian_at(&DiffEngine::default(), p)?;
        let (n1, m1) = (self.target.first_dim(), self.source.first_dim());
        let mut m = T::zero();
        for r in 0..j.nrows() {
            for c in 0..j.ncols() {
                if (r < n1) != (c < m1) {
                    m = m.max(j[(r, c)].abs());
                }
            }
        }
        Ok(m)
    }

    pub fn compatibility(&self, p: &Point<T>) -> Result<CompatibilityEntry<T>> {
        let (p1, p2) = self.source.split_point(&p.coords);
        let l1 = self.lambda1.eval(&p1)?;
        let l2 = self.lambda2.eval(&p2)?;
        let f = self.source.warp().eval(&p1)?;
        let rho = self.target.warp().eval(&self.phi1.map().eval(&p1)?)?;
        let r1 = l1 * l1;
        let r2 = rho * rho * l2 * l2 / (f * f);
        let conformal_here = (r1 / r2 - T::one()).abs() <= self.product.conf_tol;
        Ok(CompatibilityEntry {
            point: p.clone(),
            r1,
            r2,
            conformal_here,
        })
    }

    pub fn compatibility_report(&self, points: &[DVector<T>]) -> Result<CompatibilityReport<T>> {
        let entries = points
            .iter()
            .map(|p| self.compatibility(&Point::new(p.clone())))
            .collect::<Result<Vec<_>>>()?;
        let conformal = entries.iter().all(|e| e.conformal_here);
        Ok(CompatibilityReport { entries, conformal })
    }

    /// The lifted dilation `λ²(p) = λ₁²(p₁)`, defined only where the blocks agree.
    pub fn lifted_lambda_sq(&self, p: &DVector<T>) -> Result<T> {
        let e = self.compatibility(&Point::new(p.clone()))?;
        if !e.conformal_here {
            return Err(GeometryError::ConformalityViolation {
                coords: coords_f64(p),
                anisotropy: to_f64((e.r1 / e.r2).max(e.r2 / e.r1)),
            });
        }
        Ok(e.r1)
    }

    fn lambda1_sq_lifted(&self) -> ScalarField<T> {
        self.source
            .lift_scalar(Factor::First, &self.lambda1.map(|l| l * l))
    }

    fn horizontal_lift(&self, factor: Factor, family: &FieldFamily) -> (VectorField<T>, VectorField<T>) {
        let ctx = match factor {
            Factor::First => &self.phi1,
            Factor::Second => &self.phi2,
        };
        let h = ctx.horizontal_field(&family.to_field());
        let lifted = self.source.lift_vector(factor, &h).ambient_field;
        (h, lifted)
    }

    fn conformal_skip(&self, p: &DVector<T>) -> Option<String> {
        match self.lifted_lambda_sq(p) {
            Ok(_) => None,
            Err(e) => Some(format!("{:?}: {e}", coords_f64(p))),
        }
    }

    /// First `A`-identity: `A(X₁, Y₁) = A₁(X₁, Y₁)` for lifted `𝓗₁` fields, with the
    /// right-hand side `½{𝓥[X₁,Y₁] − λ₁² g₁(X₁,Y₁) grad_𝓥(1/λ₁²)}`.
    ///
    /// Entries: `factor_grad` (gradient taken on `M₁`, then lifted), `ambient_grad`
    /// (gradient of the lifted function on `M`) and `conventions_agree`.
    pub fn verify_theorem_item1(&self, engine: &DiffEngine<T>, samples: &[CwsSample<T>]) -> ResidualReport {
        let mut report = ResidualReport::with_entries(&["factor_grad", "ambient_grad", "conventions_agree"]);
        for s in samples {
            if let Some(reason) = self.conformal_skip(&s.point) {
                for name in ["factor_grad", "ambient_grad", "conventions_agree"] {
                    report.entry(name).skip(reason.clone());
                }
                continue;
            }
            let res = (|| -> Result<()> {
                let p = Point::new(s.point.clone());
                let (p1, _) = self.source.split_point(&s.point);
                let (x1, xl) = self.horizontal_lift(Factor::First, &s.x1);
                let (y1, yl) = self.horizontal_lift(Factor::First, &s.y1);
                let lhs = self.product.oneill_a(engine, &xl, &yl, &p)?.components;

                let l1 = self.lambda1.eval(&p1)?;
                let inv1 = self.lambda1.map(|l| T::one() / (l * l));
                let factor_rhs = self
                    .phi1
                    .a_formula_with(engine, &x1, &y1, &Point::new(p1), l1 * l1, &inv1)?
                    .components;
                let factor_rhs = self.source.pad(Factor::First, &factor_rhs);
                let ambient_rhs = self
                    .product
                    .a_formula_with(
                        engine,
                        &xl,
                        &yl,
                        &p,
                        l1 * l1,
                        &self.source.lift_scalar(Factor::First, &inv1),
                    )?
                    .components;
                for (name, a, b) in [
                    ("factor_grad", &lhs, &factor_rhs),
                    ("ambient_grad", &lhs, &ambient_rhs),
                    ("conventions_agree", &factor_rhs, &ambient_rhs),
                ] {
                    let scale = scale_of(a.iter().chain(b.iter()).copied());
                    report.entry(name).record((a - b).amax(), scale);
                }
                Ok(())
            })();
            if let Err(e) = res {
                for name in ["factor_grad", "ambient_grad", "conventions_agree"] {
                    report.entry(name).skip(format!("{:?}: {e}", coords_f64(&s.point)));
                }
            }
        }
        report
    }

    /// Second `A`-identity for lifted `𝓗₂` fields,
    /// `A(X₂,Y₂) = ½{A₂(X₂,Y₂) − A₂(Y₂,X₂) − λ₂² g₂(X₂,Y₂) grad_𝓥(f²/λᵢ²)}`,
    /// evaluated for both denominators.
    pub fn verify_theorem_item2(&self, engine: &DiffEngine<T>, samples: &[CwsSample<T>]) -> Item2Report {
        let mut report = Item2Report {
            lambda1: Residual::new(Item2Variant::Lambda1.label()),
            lambda2: Residual::new(Item2Variant::Lambda2.label()),
            variant_gap: Residual::new("variant_gap"),
        };
        for s in samples {
            let skip = |report: &mut Item2Report, reason: String| {
                report.lambda1.skip(reason.clone());
                report.lambda2.skip(reason.clone());
                report.variant_gap.skip(reason);
            };
            if let Some(reason) = self.conformal_skip(&s.point) {
                skip(&mut report, reason);
                continue;
            }
            let res = (|| -> Result<()> {
                let p = Point::new(s.point.clone());
                let (_, p2) = self.source.split_point(&s.point);
                let q2 = Point::new(p2.clone());
                let (x2, xl) = self.horizontal_lift(Factor::Second, &s.x2);
                let (y2, yl) = self.horizontal_lift(Factor::Second, &s.y2);
                let lhs = self.product.oneill_a(engine, &xl, &yl, &p)?.components;

                let a_xy = self.phi2.oneill_a(engine, &x2, &y2, &q2)?.components;
                let a_yx = self.phi2.oneill_a(engine, &y2, &x2, &q2)?.components;
                let antisym = self.source.pad(Factor::Second, &(a_xy - a_yx));
                let g2 = self.source.second().metric_at(&p2)?;
                let g2xy = x2.eval(&p2)?.dot(&(g2 * y2.eval(&p2)?));
                let l2 = self.lambda2.eval(&p2)?;

                let f_sq = self.source.lift_scalar(Factor::First, &self.source.warp().map(|f| f * f));
                let denominators = [
                    self.lambda1_sq_lifted(),
                    self.source.lift_scalar(Factor::Second, &self.lambda2.map(|l| l * l)),
                ];
                let mut rhs = Vec::with_capacity(2);
                for den in &denominators {
                    let quotient = f_sq.zip_with(den, |a, b| a / b);
                    let grad = self.product.vertical_gradient_at(engine, &quotient, &s.point)?;
                    rhs.push((&antisym - grad * (l2 * l2 * g2xy)) * lit::<T>(0.5));
                }
                let scale_all = scale_of(
                    lhs.iter()
                        .chain(rhs[0].iter())
                        .chain(rhs[1].iter())
                        .copied(),
                );
                for (residual, r) in [(&mut report.lambda1, &rhs[0]), (&mut report.lambda2, &rhs[1])] {
                    let scale = scale_of(lhs.iter().chain(r.iter()).copied());
                    residual.record((&lhs - r).amax(), scale);
                }
                report.variant_gap.record((&rhs[0] - &rhs[1]).amax(), scale_all);
                Ok(())
            })();
            if let Err(e) = res {
                skip(&mut report, format!("{:?}: {e}", coords_f64(&s.point)));
            }
        }
        report
    }

    /// With `λ₁ ≡ λ₂ ≡ 1` and `ρ∘φ₁ = f`, the product is a Riemannian submersion.
    ///
    /// Entries: `dilation` (`|λ² − 1|`) and `horizontal_lengths`
    /// (`| |φ_*v|² − |v|² |` for the sampled horizontal vectors).
    pub fn verify_riemannian_reduction(
        &self,
        engine: &DiffEngine<T>,
        samples: &[CwsSample<T>],
    ) -> Result<ResidualReport> {
        let tight = lit::<T>(1e-12);
        for s in samples {
            let (p1, p2) = self.source.split_point(&s.point);
            let l1 = self.lambda1.eval(&p1)?;
            let l2 = self.lambda2.eval(&p2)?;
            let f = self.source.warp().eval(&p1)?;
            let rho = self.target.warp().eval(&self.phi1.map().eval(&p1)?)?;
            if (l1 - T::one()).abs() > tight || (l2 - T::one()).abs() > tight {
                return Err(GeometryError::Config(format!(
                    "Riemannian reduction needs unit dilations; found λ₁ = {}, λ₂ = {} at {:?}",
                    to_f64(l1),
                    to_f64(l2),
                    coords_f64(&s.point)
                )));
            }
            if (rho - f).abs() > tight * scale_of([rho, f]) {
                return Err(GeometryError::Config(format!(
                    "Riemannian reduction needs ρ∘φ₁ = f; found {} vs {} at {:?}",
                    to_f64(rho),
                    to_f64(f),
                    coords_f64(&s.point)
                )));
            }
        }
        let mut report = ResidualReport::with_entries(&["dilation", "horizontal_lengths"]);
        let gn_at = |q: &DVector<T>| self.target.ambient().metric_at(q);
        for s in samples {
            let res = (|| -> Result<()> {
                let d = self.product.dilation_at(&s.point)?;
                report.entry("dilation").record((d.lambda_sq - T::one()).abs(), T::one());
                let frame = self.product.frame_at(&s.point)?;
                let jac = self.product.map().jacobian_at(engine, &s.point)?;
                let gn = gn_at(&self.product.map().eval(&s.point)?)?;
                for (factor, family) in [(Factor::First, &s.x1), (Factor::Second, &s.x2)] {
                    let (_, field) = self.horizontal_lift(factor, family);
                    let v = frame.horizontal_part(&field.eval(&s.point)?);
                    let pushed = &jac * &v;
                    let len_m = frame.inner(&v, &v);
                    let len_n = pushed.dot(&(&gn * &pushed));
                    report
                        .entry("horizontal_lengths")
                        .record((len_n - len_m).abs(), scale_of([len_m, len_n]));
                }
                Ok(())
            })();
            if let Err(e) = res {
                for name in ["dilation", "horizontal_lengths"] {
                    report.entry(name).skip(format!("{:?}: {e}", coords_f64(&s.point)));
                }
            }
        }
        Ok(report)
    }

    /// Rescales the source by `G = λ² g` (equivalently `e^{-2σ} g` for `λ = e^{-σ}`)
    /// and re-estimates the dilation; also probes the factor `e^{2σ}` and a factor
    /// offset by `e^{-2·0.1}`.
    pub fn verify_rescaling_corollary(&self, points: &[DVector<T>]) -> RescalingReport {
        let lambda_sq = self.lambda1_sq_lifted();
        let offset = (-lit::<T>(2.0 * PERTURBATION)).exp();
        let make = |factor: ScalarField<T>| {
            let m = self.source.ambient().conformally_rescaled(&factor);
            self.product.with_map(self.product.map().with_source(m))
        };
        let rescaled = make(lambda_sq.clone());
        let literal = make(lambda_sq.map(|l| T::one() / l));
        let perturbed = make(lambda_sq.map(move |l| l * offset));
        let expected_perturbed = lit::<T>(2.0 * PERTURBATION).exp();

        let mut report = RescalingReport {
            rescaled: Residual::new("rescaled"),
            literal_factor: Residual::new("literal_factor"),
            perturbed: Residual::new("perturbed"),
            perturbation_min_gap: f64::INFINITY,
            uniqueness: Residual::new("uniqueness"),
        };
        for p in points {
            let res = (|| -> Result<()> {
                let l2 = self.lifted_lambda_sq(p)?;
                // G = e^{2τ} g with τ = ln λ = −σ
                let tau = l2.ln() * lit(0.5);
                let d = rescaled.dilation_at(p)?.lambda_sq;
                report.rescaled.record((d - T::one()).abs(), T::one());
                let d = literal.dilation_at(p)?.lambda_sq;
                report.literal_factor.record((d - T::one()).abs(), T::one());
                let d = perturbed.dilation_at(p)?.lambda_sq;
                report
                    .perturbed
                    .record((d - expected_perturbed).abs(), expected_perturbed);
                report.perturbation_min_gap = report.perturbation_min_gap.min(to_f64((d - T::one()).abs()));
                let tau_pert = tau - lit(PERTURBATION);
                let recovered = tau_pert + d.ln() * lit(0.5);
                report.uniqueness.record((recovered - tau).abs(), T::one() + tau.abs());
                Ok(())
            })();
            if let Err(e) = res {
                let reason = format!("{:?}: {e}", coords_f64(p));
                for r in [
                    &mut report.rescaled,
                    &mut report.literal_factor,
                    &mut report.perturbed,
                    &mut report.uniqueness,
                ] {
                    r.skip(reason.clone());
                }
            }
        }
        report
    }

    /// Mean curvatures `H₁`, `H₂` of the `𝓥₁` and `𝓥₂` parts of the fibers and the
    /// mixed values `T(E, F)`, `T(F, E)` for `E ∈ 𝓥₁`, `F ∈ 𝓥₂`.
    pub fn fiber_geometry_checks(&self, engine: &DiffEngine<T>, samples: &[CwsSample<T>]) -> FiberReport {
        let mut report = FiberReport {
            h1: Residual::new("h1"),
            h2: Residual::new("h2"),
            mixed: Residual::new("mixed"),
        };
        for s in samples {
            let res = (|| -> Result<()> {
                let p = Point::new(s.point.clone());
                let (p1, p2) = self.source.split_point(&s.point);
                let f = self.source.warp().eval(&p1)?;
                let b1: Vec<DVector<T>> = self
                    .phi1
                    .frame_at(&p1)?
                    .vertical
                    .column_iter()
                    .map(|c| self.source.pad(Factor::First, &c.into_owned()))
                    .collect();
                let b2: Vec<DVector<T>> = self
                    .phi2
                    .frame_at(&p2)?
                    .vertical
                    .column_iter()
                    .map(|c| self.source.pad(Factor::Second, &(c.into_owned() / f)))
                    .collect();
                for (residual, basis) in [(&mut report.h1, &b1), (&mut report.h2, &b2)] {
                    if basis.is_empty() {
                        residual.record(T::zero(), T::one());
                        continue;
                    }
                    let h = self.product.sub_bundle_mean_curvature(engine, basis, &p)?;
                    let scale = scale_of(basis.iter().flat_map(|b| b.iter().copied()));
                    residual.record(h.components.amax(), scale);
                }
                let e = self
                    .product
                    .vertical_field(&self.source.lift_vector(Factor::First, &s.x1.to_field()).ambient_field);
                let fv = self
                    .product
                    .vertical_field(&self.source.lift_vector(Factor::Second, &s.x2.to_field()).ambient_field);
                let ev = e.eval(&s.point)?;
                let fvv = fv.eval(&s.point)?;
                let tef = self.product.oneill_t(engine, &e, &fv, &p)?.components;
                let tfe = self.product.oneill_t(engine, &fv, &e, &p)?.components;
                let scale = scale_of(ev.iter().chain(fvv.iter()).copied());
                report.mixed.record(tef.amax().max(tfe.amax()), scale);
                Ok(())
            })();
            if let Err(e) = res {
                let reason = format!("{:?}: {e}", coords_f64(&s.point));
                report.h1.skip(reason.clone());
                report.h2.skip(reason.clone());
                report.mixed.skip(reason);
            }
        }
        report
    }
}

fn product_map<T: Real>(
    phi1: &SmoothMap<T>,
    phi2: &SmoothMap<T>,
    source: &WarpedProduct<T>,
    target: &WarpedProduct<T>,
    engine: DiffEngine<T>,
) -> SmoothMap<T> {
    let (m1, m2) = (source.first_dim(), source.second_dim());
    let (n1, n2) = (target.first_dim(), target.second_dim());
    let (a, b) = (phi1.clone(), phi2.clone());
    let map = Arc::new(move |p: &DVector<T>| {
        let q1 = a.eval(&p.rows(0, m1).into_owned())?;
        let q2 = b.eval(&p.rows(m1, m2).into_owned())?;
        Ok(WarpedProduct::join(&q1, &q2))
    });
    let (a, b) = (phi1.clone(), phi2.clone());
    let jac = Arc::new(move |p: &DVector<T>| {
        let j1 = a.jacobian_at(&engine, &p.rows(0, m1).into_owned())?;
        let j2 = b.jacobian_at(&engine, &p.rows(m1, m2).into_owned())?;
        let mut j = DMatrix::zeros(n1 + n2, m1 + m2);
        j.view_mut((0, 0), (n1, m1)).copy_from(&j1);
        j.view_mut((n1, m1), (n2, m2)).copy_from(&j2);
        Ok(j)
    });
    SmoothMap::from_parts(source.ambient().clone(), target.ambient().clone(), map, Some(jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartManifold, Domain};

    fn v(c: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(c)
    }

    fn linear_map(source: ChartManifold<f64>, rows: usize, entries: &'static [f64]) -> SmoothMap<f64> {
        let cols = source.dim();
        let a = DMatrix::from_row_slice(rows, cols, entries);
        let b = a.clone();
        SmoothMap::new(source, ChartManifold::euclidean(rows), move |p: &DVector<f64>| &a * p)
            .with_jacobian(move |_| b.clone())
    }

    fn scalar(f: fn(&DVector<f64>) -> f64) -> ScalarField<f64> {
        ScalarField::new(f)
    }

    /// `φ₁ = 2x`, `φ₂ = 2u`, `f = e^{2x}`, `ρ = eˢ` (or `ρ ≡ 1`).
    fn constant_dilation(rho_one: bool) -> ConformalWarpedSubmersion<f64> {
        let rho = if rho_one { ScalarField::constant(1.0) } else { scalar(|p| p[0].exp()) };
        ConformalWarpedSubmersion::new(
            linear_map(ChartManifold::euclidean(2), 1, &[2.0, 0.0]),
            ScalarField::constant(2.0),
            linear_map(ChartManifold::euclidean(2), 1, &[2.0, 0.0]),
            ScalarField::constant(2.0),
            scalar(|p| (2.0 * p[0]).exp()),
            rho,
            DiffEngine::default(),
        )
        .unwrap()
    }

    /// `g₁ = e^{-2y}dx² + dy²`, `φ₁ = x` (`λ₁ = eʸ`), `φ₂ = u` (`λ₂ = 1`), `f = e^{x−y}`.
    fn mixed_dilation() -> ConformalWarpedSubmersion<f64> {
        let m1 = ChartManifold::new(Domain::unbounded(2), |p: &DVector<f64>| {
            DMatrix::from_row_slice(2, 2, &[(-2.0 * p[1]).exp(), 0.0, 0.0, 1.0])
        });
        ConformalWarpedSubmersion::new(
            linear_map(m1, 1, &[1.0, 0.0]),
            scalar(|p| p[1].exp()),
            linear_map(ChartManifold::euclidean(2), 1, &[1.0, 0.0]),
            ScalarField::constant(1.0),
            scalar(|p| (p[0] - p[1]).exp()),
            scalar(|p| p[0].exp()),
            DiffEngine::default(),
        )
        .unwrap()
    }

    fn coord(dim: usize, axis: usize) -> FieldFamily {
        FieldFamily::Coordinate { dim, axis }
    }

    fn sample(p: &[f64], x1: FieldFamily, y1: FieldFamily, x2: FieldFamily, y2: FieldFamily) -> CwsSample<f64> {
        CwsSample { point: v(p), x1, y1, x2, y2 }
    }

    fn seeded_samples(points: &[[f64; 4]]) -> Vec<CwsSample<f64>> {
        let lin = |a: &[f64], b: &[f64]| FieldFamily::Linear { dim: 2, a: a.to_vec(), b: b.to_vec() };
        points
            .iter()
            .map(|p| {
                sample(
                    p,
                    lin(&[0.3, -0.2, 0.1, 0.4], &[1.0, 0.5]),
                    lin(&[-0.1, 0.2, 0.3, 0.0], &[0.2, -1.0]),
                    lin(&[0.2, 0.1, -0.3, 0.2], &[0.7, 0.3]),
                    lin(&[0.0, 0.4, 0.1, -0.2], &[-0.5, 0.9]),
                )
            })
            .collect()
    }

    const POINTS: [[f64; 4]; 3] = [[0.1, -0.2, 0.3, 0.4], [-0.3, 0.25, -0.1, 0.2], [0.2, 0.1, 0.5, -0.4]];

    #[test]
    fn identity_factors_give_an_isometry() {
        let c = ConformalWarpedSubmersion::new(
            linear_map(ChartManifold::euclidean(2), 2, &[1.0, 0.0, 0.0, 1.0]),
            ScalarField::constant(1.0),
            linear_map(ChartManifold::euclidean(1), 1, &[1.0]),
            ScalarField::constant(1.0),
            scalar(|p| p[0].exp()),
            scalar(|p| p[0].exp()),
            DiffEngine::default(),
        )
        .unwrap();
        let p = v(&[0.3, -0.4, 0.7]);
        let e = c.compatibility(&Point::new(p.clone())).unwrap();
        assert!((e.r1 - 1.0).abs() < 1e-15 && (e.r2 - 1.0).abs() < 1e-14);
        let d = c.product().dilation_at(&p).unwrap();
        assert!((d.lambda_sq - 1.0).abs() < 1e-12);
        assert_eq!(c.kernel_dims(&p).unwrap(), (0, 0));
    }

    #[test]
    fn constant_dilation_compatibility() {
        let c = constant_dilation(false);
        for p in POINTS {
            let p = v(&p);
            let e = c.compatibility(&Point::new(p.clone())).unwrap();
            assert!((e.r1 - 4.0).abs() < 1e-14);
            assert!((e.r2 - 4.0).abs() < 1e-12);
            assert!(e.conformal_here);
            let d = c.product().dilation_at(&p).unwrap();
            assert!((d.lambda_sq - 4.0).abs() < 1e-12);
            assert!((c.lifted_lambda_sq(&p).unwrap() - 4.0).abs() < 1e-14);
            assert_eq!(c.jacobian_cross_block_max(&p).unwrap(), 0.0);
            assert_eq!(c.kernel_dims(&p).unwrap(), (2, 2));
        }
    }

    #[test]
    fn incompatible_warp_is_reported() {
        let c = constant_dilation(true);
        let report = c.compatibility_report(&[v(&[0.0, 0.0, 0.0, 0.0]), v(&[0.3, 0.0, 0.0, 0.0])]).unwrap();
        assert!(!report.conformal);
        assert!(report.entries[0].conformal_here);
        let e = &report.entries[1];
        assert!((e.r1 - 4.0).abs() < 1e-14);
        assert!((e.r2 - 4.0 * (-1.2f64).exp()).abs() < 1e-12);
        assert!(!e.conformal_here);
        let d = c.product().dilation_at(&e.point.coords).unwrap();
        assert!(!d.is_conformal(1e-6));
        assert!(matches!(
            c.lifted_lambda_sq(&e.point.coords),
            Err(GeometryError::ConformalityViolation { .. })
        ));
    }

    #[test]
    fn lift_constrained_by_factor_dilations() {
        let r4 = SmoothMap::new(ChartManifold::euclidean(4), ChartManifold::euclidean(2), |p: &DVector<f64>| {
            let r = p[2].exp();
            v(&[r * p[3].sin(), r * p[3].cos()])
        });
        let c = ConformalWarpedSubmersion::new(
            r4,
            scalar(|p| p[2].exp()),
            linear_map(ChartManifold::euclidean(1), 1, &[1.0]),
            ScalarField::constant(1.0),
            ScalarField::constant(1.0),
            ScalarField::constant(1.0),
            DiffEngine::default(),
        )
        .unwrap();
        let at = |x3: f64| c.compatibility(&Point::new(v(&[0.1, 0.2, x3, 0.3, 0.5]))).unwrap();
        let e = at(0.4);
        assert!((e.r1 - 0.8f64.exp()).abs() < 1e-13 && (e.r2 - 1.0).abs() < 1e-15);
        assert!(!e.conformal_here);
        assert!(at(0.0).conformal_here);
    }

    #[test]
    fn item1_constant_dilation() {
        let c = constant_dilation(false);
        let e = DiffEngine::default();
        let coords: Vec<_> = POINTS
            .iter()
            .map(|p| sample(p, coord(2, 0), coord(2, 0), coord(2, 0), coord(2, 0)))
            .collect();
        let r = c.verify_theorem_item1(&e, &coords);
        for entry in &r.entries {
            assert_eq!(entry.n_samples, 3);
            assert!(entry.max_abs < 1e-9, "{entry:?}");
        }
        let r = c.verify_theorem_item1(&e, &seeded_samples(&POINTS));
        assert!(r.all_pass(1e-5), "{r:?}");
    }

    #[test]
    fn item1_skips_nonconformal_points() {
        let c = constant_dilation(true);
        let r = c.verify_theorem_item1(&DiffEngine::default(), &seeded_samples(&[[0.3, 0.0, 0.0, 0.0]]));
        let entry = r.get("factor_grad").unwrap();
        assert_eq!(entry.n_samples, 0);
        assert_eq!(entry.skipped.len(), 1);
        assert!(!entry.passes(1.0));
    }

    #[test]
    fn item2_variants_coincide_for_equal_dilations() {
        let c = constant_dilation(false);
        let r = c.verify_theorem_item2(&DiffEngine::default(), &seeded_samples(&POINTS));
        assert!(r.lambda1.passes(1e-5) && r.lambda2.passes(1e-5), "{r:?}");
        assert!(r.variant_gap.max_residual < 1e-14);
        assert_eq!(r.passing(1e-5), vec![Item2Variant::Lambda1, Item2Variant::Lambda2]);
    }

    #[test]
    fn item2_mixed_dilation_brute_force() {
        let c = mixed_dilation();
        let e = DiffEngine::default();
        // horizontal ∂u: A(∂u, ∂u) = 𝓥∇_{∂u}∂u = f²·𝓥(−grad ln f) = (0, e^{2x−2y}, 0, 0)
        let p = [0.2, -0.3, 0.1, 0.4];
        let uu = sample(&p, coord(2, 0), coord(2, 0), coord(2, 0), coord(2, 0));
        let (_, xl) = c.horizontal_lift(Factor::Second, &coord(2, 0));
        let a = c
            .product()
            .oneill_a(&e, &xl, &xl, &Point::new(v(&p)))
            .unwrap()
            .components;
        let oracle = v(&[0.0, (2.0 * (p[0] - p[1])).exp(), 0.0, 0.0]);
        assert!((&a - &oracle).amax() < 1e-6, "{a} vs {oracle}");

        let r = c.verify_theorem_item2(&e, &[uu]);
        assert!(r.lambda2.max_residual < 1e-6);
        assert!(r.lambda1.max_residual > 1e-2);
        let r = c.verify_theorem_item2(&e, &seeded_samples(&POINTS));
        assert_eq!(r.passing(1e-5), vec![Item2Variant::Lambda2]);
        assert!(r.variant_gap.max_residual > 1e-4);
    }

    #[test]
    fn item1_mixed_dilation_conventions_agree() {
        let c = mixed_dilation();
        let r = c.verify_theorem_item1(&DiffEngine::default(), &seeded_samples(&POINTS));
        assert!(r.all_pass(1e-5), "{r:?}");
    }

    #[test]
    fn riemannian_reduction() {
        let c = ConformalWarpedSubmersion::new(
            linear_map(ChartManifold::euclidean(2), 1, &[1.0, 0.0]),
            ScalarField::constant(1.0),
            linear_map(ChartManifold::euclidean(2), 2, &[1.0, 0.0, 0.0, 1.0]),
            ScalarField::constant(1.0),
            scalar(|p| p[0].exp()),
            scalar(|p| p[0].exp()),
            DiffEngine::default(),
        )
        .unwrap();
        let r = c
            .verify_riemannian_reduction(&DiffEngine::default(), &seeded_samples(&POINTS))
            .unwrap();
        assert!(r.all_pass(1e-8), "{r:?}");
        assert!(matches!(
            constant_dilation(false).verify_riemannian_reduction(&DiffEngine::default(), &seeded_samples(&POINTS)),
            Err(GeometryError::Config(_))
        ));
    }

    #[test]
    fn rescaling_constant_dilation() {
        let c = constant_dilation(false);
        let pts: Vec<_> = POINTS.iter().map(|p| v(p)).collect();
        let r = c.verify_rescaling_corollary(&pts);
        assert!(r.rescaled.passes(1e-8), "{r:?}");
        assert!((r.literal_factor.max_abs - 15.0).abs() < 1e-9);
        assert!(r.perturbed.passes(1e-8));
        assert!((r.perturbation_min_gap - (0.2f64.exp() - 1.0)).abs() < 1e-9);
        assert!(r.uniqueness.passes(1e-8));
    }

    #[test]
    fn fiber_geometry_constant_dilation() {
        let c = constant_dilation(false);
        let samples: Vec<_> = POINTS
            .iter()
            .map(|p| sample(p, coord(2, 1), coord(2, 1), coord(2, 1), coord(2, 1)))
            .collect();
        let r = c.fiber_geometry_checks(&DiffEngine::default(), &samples);
        assert!(r.h1.max_abs < 1e-8, "{r:?}");
        assert!(r.mixed.max_abs < 1e-8);
        // unit 𝓥₂ vector e = ∂v/f: T(e, e) = −𝓗 grad ln f = (−2, 0, 0, 0)
        assert!((r.h2.max_abs - 2.0).abs() < 1e-6);
        let r = c.fiber_geometry_checks(&DiffEngine::default(), &seeded_samples(&POINTS));
        assert!(r.mixed.passes(1e-6));
    }
}
