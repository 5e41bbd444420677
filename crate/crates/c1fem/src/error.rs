//! Crate-wide error type.

use thiserror::Error;

use crate::element::Flavor;

/// Errors produced by element construction, assembly and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative order ({dx},{dy}) exceeds the supported order {max} per axis")]
    DerivativeOrder { dx: usize, dy: usize, max: usize },

    #[error("coefficient count {got} does not match basis size {expected}")]
    LengthMismatch { got: usize, expected: usize },

    #[error("polynomial degree {0} exceeds the supported cap {1}")]
    DegreeCap(usize, usize),

    #[error("quadrature point count {0} outside the supported range 1..=30")]
    QuadPointCount(usize),

    #[error("rectangle side lengths must be positive, got hx={hx}, hy={hy}")]
    DegenerateRect { hx: f64, hy: f64 },

    #[error("non-finite integrand value at quadrature node ({x}, {y})")]
    NonFiniteSample { x: f64, y: f64 },

    #[error("{flavor} element of degree {degree} is not supported (valid range {min}..={max})")]
    UnsupportedDegree {
        flavor: Flavor,
        degree: usize,
        min: usize,
        max: usize,
    },

    #[error(
        "degree-of-freedom matrix is numerically singular for {flavor} k={degree} \
         (condition {cond:.3e}, bubbles {bubbles:?}); unisolvence failed"
    )]
    UnisolvenceFailure {
        flavor: Flavor,
        degree: usize,
        cond: f64,
        bubbles: Vec<usize>,
    },

    #[error("grid level {0} outside the supported range 1..=12")]
    GridLevel(usize),

    #[error("mesh must have at least one cell per direction")]
    EmptyMesh,

    #[error("dof map ({map_flavor} k={map_degree}) does not match element ({el_flavor} k={el_degree})")]
    FlavorMismatch {
        map_flavor: Flavor,
        map_degree: usize,
        el_flavor: Flavor,
        el_degree: usize,
    },

    #[error(
        "quadrature rule with {got} points per direction under-resolves degree-{degree} \
         stiffness integrands (need at least {need})"
    )]
    UnderResolvedRule {
        got: usize,
        need: usize,
        degree: usize,
    },

    #[error("matrix is singular: zero pivot at elimination step {step}")]
    SingularMatrix { step: usize },

    #[error("matrix is not symmetric positive definite: non-positive pivot {value:.6e} at row {row}")]
    NotSpd { row: usize, value: f64 },

    #[error(
        "conjugate gradients did not converge: residual {residual:.3e} after {iterations} \
         iterations (target {target:.3e})"
    )]
    CgDidNotConverge {
        residual: f64,
        target: f64,
        iterations: usize,
    },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
