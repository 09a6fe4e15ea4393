use thiserror::Error;

/// Errors raised by the geometry engine.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar so the
/// diagnostics can be rendered and compared uniformly.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point {coords:?} lies outside the chart domain (axis {axis})")]
    Domain { coords: Vec<f64>, axis: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("metric is not symmetric at {coords:?} (asymmetry {asymmetry:e})")]
    AsymmetricMetric { coords: Vec<f64>, asymmetry: f64 },

    #[error("degenerate metric at {coords:?}: smallest eigenvalue {min_eigenvalue:e} <= floor {floor:e}")]
    DegenerateMetric {
        coords: Vec<f64>,
        min_eigenvalue: f64,
        floor: f64,
    },

    #[error("finite-difference stencil for axis {axis} does not fit in the domain at {coords:?} (step {step:e})")]
    Stencil {
        coords: Vec<f64>,
        axis: usize,
        step: f64,
    },

    #[error("warp function is not positive at {coords:?} (value {value:e})")]
    WarpPositivity { coords: Vec<f64>, value: f64 },

    #[error("map is not of maximal rank at {coords:?}: numerical rank {rank}, expected {expected}, singular values {singular_values:?}")]
    Rank {
        coords: Vec<f64>,
        rank: usize,
        expected: usize,
        singular_values: Vec<f64>,
    },

    #[error("map is not conformal at {coords:?} (anisotropy {anisotropy})")]
    ConformalityViolation { coords: Vec<f64>, anisotropy: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
