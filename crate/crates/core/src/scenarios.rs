//! Built-in catalog of verification scenarios.
//!
//! Every scenario is a submersion between charts; warped scenarios also carry
//! the warped product that the connection identities are checked on, and the
//! product scenarios carry the full `φ₁ × φ₂` construction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::cws::{ConformalWarpedSubmersion, Item2Variant};
use crate::error::{GeometryError, Result};
use crate::geometry::{ChartManifold, DiffEngine, Domain, ScalarField};
use crate::scalar::{lit, Real};
use crate::submersion::{SmoothMap, SubmersionContext};
use crate::warped::WarpedProduct;

/// Verdicts a product scenario is built to exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CwsExpectation {
    /// Variants of the second `A`-identity that should vanish. Informational only;
    /// adjudication is always empirical.
    pub item2: &'static [Item2Variant],
    /// `λ₁ ≡ λ₂ ≡ 1` and `ρ∘φ₁ = f`.
    pub riemannian: bool,
    /// `λ₁ ≠ λ₂` somewhere on the sample box.
    pub discriminates: bool,
    pub m1_minimal: bool,
    pub m2_minimal: bool,
    pub mixed_geodesic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expected {
    pub conformal: bool,
    pub cws: Option<CwsExpectation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioInfo {
    pub id: &'static str,
    pub description: &'static str,
    pub expected: Expected,
}

#[derive(Debug, Clone)]
pub enum Structure<T: Real> {
    Plain,
    Warped(WarpedProduct<T>),
    Product(Box<ConformalWarpedSubmersion<T>>),
}

#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub info: ScenarioInfo,
    pub submersion: SubmersionContext<T>,
    pub structure: Structure<T>,
    /// Closed-form `λ²`, when the construction provides one.
    pub reference_lambda_sq: Option<ScalarField<T>>,
    /// Box in source coordinates that samples are drawn from.
    pub sample_box: Vec<(f64, f64)>,
}

impl<T: Real> Scenario<T> {
    pub fn warped(&self) -> Option<&WarpedProduct<T>> {
        match &self.structure {
            Structure::Plain => None,
            Structure::Warped(w) => Some(w),
            Structure::Product(c) => Some(c.source()),
        }
    }

    pub fn product(&self) -> Option<&ConformalWarpedSubmersion<T>> {
        match &self.structure {
            Structure::Product(c) => Some(c),
            _ => None,
        }
    }
}

const BOTH: &[Item2Variant] = &[Item2Variant::Lambda1, Item2Variant::Lambda2];

const PLAIN_CONFORMAL: Expected = Expected {
    conformal: true,
    cws: None,
};

/// Catalog order is stable and is the order `--all` reports in.
pub const CATALOG: [ScenarioInfo; 9] = [
    ScenarioInfo {
        id: "paper-example-r4",
        description: "(x1,x2,x3,x4) -> (e^x3 sin x4, e^x3 cos x4) from flat R^4 to flat R^2, dilation e^x3",
        expected: PLAIN_CONFORMAL,
    },
    ScenarioInfo {
        id: "warped-line",
        description: "R x_{e^t} R with the projection onto the first factor",
        expected: PLAIN_CONFORMAL,
    },
    ScenarioInfo {
        id: "sphere-warped",
        description: "round sphere chart (0,pi) x_{sin} (0,2pi) with the projection onto the polar angle",
        expected: PLAIN_CONFORMAL,
    },
    ScenarioInfo {
        id: "heisenberg",
        description: "Heisenberg metric dx^2 + dy^2 + (dz - x dy)^2 onto flat R^2; non-integrable horizontal distribution",
        expected: PLAIN_CONFORMAL,
    },
    ScenarioInfo {
        id: "vertical-dilation",
        description: "e^{-2z}(dx^2 + dy^2) + dz^2 onto flat R^2 by (x,y); dilation e^z varies along fibers",
        expected: PLAIN_CONFORMAL,
    },
    ScenarioInfo {
        id: "cws-constant-dilation",
        description: "2x x 2u from R^2 x_{e^{2x}} R^2 to R x_{e^s} R; lambda = 2",
        expected: Expected {
            conformal: true,
            cws: Some(CwsExpectation {
                item2: BOTH,
                riemannian: false,
                discriminates: false,
                m1_minimal: true,
                m2_minimal: false,
                mixed_geodesic: true,
            }),
        },
    },
    ScenarioInfo {
        id: "cws-mixed-dilation",
        description: "x x u from (e^{-2y}dx^2 + dy^2) x_{e^{x-y}} R^2 to R x_{e^s} R; lambda1 = e^y, lambda2 = 1",
        expected: Expected {
            conformal: true,
            cws: Some(CwsExpectation {
                item2: &[Item2Variant::Lambda2],
                riemannian: false,
                discriminates: true,
                m1_minimal: true,
                m2_minimal: false,
                mixed_geodesic: true,
            }),
        },
    },
    ScenarioInfo {
        id: "cws-riemannian",
        description: "product of two Heisenberg submersions, Heis x_{e^{x/2}} Heis to R^2 x_{e^{a/2}} R^2; lambda = 1",
        expected: Expected {
            conformal: true,
            cws: Some(CwsExpectation {
                item2: BOTH,
                riemannian: true,
                discriminates: false,
                m1_minimal: true,
                m2_minimal: false,
                mixed_geodesic: true,
            }),
        },
    },
    ScenarioInfo {
        id: "cws-incompatible",
        description: "cws-constant-dilation with rho = 1; the two horizontal blocks stretch differently",
        expected: Expected {
            conformal: false,
            cws: Some(CwsExpectation {
                item2: &[],
                riemannian: false,
                discriminates: false,
                m1_minimal: true,
                m2_minimal: false,
                mixed_geodesic: true,
            }),
        },
    },
];

/// Scenario infos whose id contains `filter`; an empty filter yields the full catalog.
pub fn list_scenarios(filter: &str) -> Vec<ScenarioInfo> {
    CATALOG.iter().filter(|s| s.id.contains(filter)).copied().collect()
}

pub fn info(id: &str) -> Option<ScenarioInfo> {
    CATALOG.iter().find(|s| s.id == id).copied()
}

fn v<T: Real>(c: &[f64]) -> DVector<T> {
    DVector::from_iterator(c.len(), c.iter().map(|&x| lit(x)))
}

/// Constant linear map with its exact Jacobian.
fn linear<T: Real>(source: ChartManifold<T>, target: ChartManifold<T>, rows: usize, entries: &[f64]) -> SmoothMap<T> {
    let a = DMatrix::from_row_iterator(rows, source.dim(), entries.iter().map(|&x| lit::<T>(x)));
    let b = a.clone();
    SmoothMap::new(source, target, move |p: &DVector<T>| &a * p).with_jacobian(move |_| b.clone())
}

/// `dx² + dy² + (dz − x dy)²`.
fn heisenberg_metric<T: Real>() -> ChartManifold<T> {
    ChartManifold::new(Domain::unbounded(3), |p: &DVector<T>| {
        let x = p[0];
        let (o, z) = (T::one(), T::zero());
        DMatrix::from_row_slice(3, 3, &[o, z, z, z, o + x * x, -x, z, -x, o])
    })
}

fn heisenberg_projection<T: Real>() -> SmoothMap<T> {
    linear(heisenberg_metric(), ChartManifold::euclidean(2), 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
}

fn cube(dim: usize, r: f64) -> Vec<(f64, f64)> {
    vec![(-r, r); dim]
}

fn constant_dilation<T: Real>(engine: DiffEngine<T>, rho_one: bool) -> Result<ConformalWarpedSubmersion<T>> {
    let two = || linear(ChartManifold::euclidean(2), ChartManifold::euclidean(1), 1, &[2.0, 0.0]);
    let rho = if rho_one {
        ScalarField::constant(T::one())
    } else {
        ScalarField::new(|p: &DVector<T>| p[0].exp())
    };
    ConformalWarpedSubmersion::new(
        two(),
        ScalarField::constant(lit(2.0)),
        two(),
        ScalarField::constant(lit(2.0)),
        ScalarField::new(|p: &DVector<T>| (p[0] * lit(2.0)).exp()),
        rho,
        engine,
    )
}

pub fn build<T: Real>(id: &str, engine: DiffEngine<T>) -> Result<Scenario<T>> {
    let info = info(id).ok_or_else(|| GeometryError::Config(format!("unknown scenario `{id}`")))?;
    let (submersion, structure, reference, sample_box): (SmoothMap<T>, Structure<T>, Option<ScalarField<T>>, _) =
        match id {
            "paper-example-r4" => {
                let map = SmoothMap::new(ChartManifold::euclidean(4), ChartManifold::euclidean(2), |p: &DVector<T>| {
                    let r = p[2].exp();
                    DVector::from_column_slice(&[r * p[3].sin(), r * p[3].cos()])
                })
                .with_jacobian(|p: &DVector<T>| {
                    let r = p[2].exp();
                    let (s, c) = (p[3].sin(), p[3].cos());
                    let z = T::zero();
                    DMatrix::from_row_slice(2, 4, &[z, z, r * s, r * c, z, z, r * c, -r * s])
                });
                let reference = ScalarField::new(|p: &DVector<T>| (p[2] * lit(2.0)).exp());
                (map, Structure::Plain, Some(reference), cube(4, 1.0))
            }
            "warped-line" => {
                let w = WarpedProduct::new(
                    ChartManifold::euclidean(1),
                    ChartManifold::euclidean(1),
                    ScalarField::new(|p: &DVector<T>| p[0].exp()),
                )?;
                let map = linear(w.ambient().clone(), ChartManifold::euclidean(1), 1, &[1.0, 0.0]);
                (map, Structure::Warped(w), Some(ScalarField::constant(T::one())), cube(2, 1.0))
            }
            "sphere-warped" => {
                let w = WarpedProduct::new(
                    ChartManifold::euclidean_on(Domain::boxed(&[(T::zero(), lit(PI))])),
                    ChartManifold::euclidean_on(Domain::boxed(&[(T::zero(), lit(2.0 * PI))])),
                    ScalarField::new(|p: &DVector<T>| p[0].sin()),
                )?;
                let map = linear(w.ambient().clone(), ChartManifold::euclidean(1), 1, &[1.0, 0.0]);
                let sample_box = vec![(0.3, PI - 0.3), (0.3, 2.0 * PI - 0.3)];
                (map, Structure::Warped(w), Some(ScalarField::constant(T::one())), sample_box)
            }
            "heisenberg" => (
                heisenberg_projection(),
                Structure::Plain,
                Some(ScalarField::constant(T::one())),
                cube(3, 1.0),
            ),
            "vertical-dilation" => {
                let m = ChartManifold::new(Domain::unbounded(3), |p: &DVector<T>| {
                    let s = (p[2] * lit(-2.0)).exp();
                    DMatrix::from_diagonal(&DVector::from_column_slice(&[s, s, T::one()]))
                });
                let map = linear(m, ChartManifold::euclidean(2), 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
                let reference = ScalarField::new(|p: &DVector<T>| (p[2] * lit(2.0)).exp());
                (map, Structure::Plain, Some(reference), cube(3, 1.0))
            }
            "cws-constant-dilation" | "cws-incompatible" => {
                let c = constant_dilation(engine, id == "cws-incompatible")?;
                let reference = (id == "cws-constant-dilation").then(|| ScalarField::constant(lit(4.0)));
                (c.product().map().clone(), Structure::Product(Box::new(c)), reference, cube(4, 0.5))
            }
            "cws-mixed-dilation" => {
                let m1 = ChartManifold::new(Domain::unbounded(2), |p: &DVector<T>| {
                    let (o, z) = (T::one(), T::zero());
                    DMatrix::from_row_slice(2, 2, &[(p[1] * lit(-2.0)).exp(), z, z, o])
                });
                let c = ConformalWarpedSubmersion::new(
                    linear(m1, ChartManifold::euclidean(1), 1, &[1.0, 0.0]),
                    ScalarField::new(|p: &DVector<T>| p[1].exp()),
                    linear(ChartManifold::euclidean(2), ChartManifold::euclidean(1), 1, &[1.0, 0.0]),
                    ScalarField::constant(T::one()),
                    ScalarField::new(|p: &DVector<T>| (p[0] - p[1]).exp()),
                    ScalarField::new(|p: &DVector<T>| p[0].exp()),
                    engine,
                )?;
                let reference = ScalarField::new(|p: &DVector<T>| (p[1] * lit(2.0)).exp());
                (c.product().map().clone(), Structure::Product(Box::new(c)), Some(reference), cube(4, 0.5))
            }
            "cws-riemannian" => {
                let c = ConformalWarpedSubmersion::new(
                    heisenberg_projection(),
                    ScalarField::constant(T::one()),
                    heisenberg_projection(),
                    ScalarField::constant(T::one()),
                    ScalarField::new(|p: &DVector<T>| (p[0] * lit(0.5)).exp()),
                    ScalarField::new(|p: &DVector<T>| (p[0] * lit(0.5)).exp()),
                    engine,
                )?;
                (
                    c.product().map().clone(),
                    Structure::Product(Box::new(c)),
                    Some(ScalarField::constant(T::one())),
                    cube(6, 0.5),
                )
            }
            _ => unreachable!("catalog and builder out of sync"),
        };
    let scenario = Scenario {
        info,
        submersion: SubmersionContext::new(submersion, engine),
        structure,
        reference_lambda_sq: reference,
        sample_box,
    };
    let dim = scenario.submersion.source().dim();
    if scenario.sample_box.len() != dim {
        return Err(GeometryError::Dimension {
            expected: dim,
            found: scenario.sample_box.len(),
        });
    }
    let corner: Vec<f64> = scenario.sample_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    scenario.submersion.frame_at(&v(&corner))?;
    Ok(scenario)
}
