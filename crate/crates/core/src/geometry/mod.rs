//! Floating-point geometry on the reduced manifold `M'` and the ambient
//! manifold `M`.
//!
//! [`ConstraintSet`] evaluates `g_star`, its Jacobian and Hessians from exact
//! symbolic derivatives. [`TangentFrame`] holds an orthonormal tangent basis
//! and the Jacobian pseudoinverse at a base point, and
//! [`TangentFrame::project`] runs the chord iteration
//! `q_{n+1} = q_n - N g(q_n)` from `q_0 = base + U w`. A projection failure
//! is the signal that the current chart no longer works around the base.
//! [`Lifter`] maps reduced points back onto `M` by solving the eliminated
//! constraints one variable at a time.

mod lift;
mod roots;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::poly::{CompiledPolynomial, Polynomial};

pub use lift::{lift, pullback_objective, Lifter, PulledBackObjective};
pub use roots::{real_roots, RootError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("Jacobian has numerical rank {rank}, need {needed}: point is not on a regular level set")]
    NotRegular { rank: usize, needed: usize },
    #[error(
        "tangent frame check failed: orthonormality error {orthonormality:e}, null-space residual {null_residual:e}"
    )]
    FrameCheck { orthonormality: f64, null_residual: f64 },
    #[error("no real root for eliminated variable `{variable}` (step {step}): {polynomial}")]
    NoRealRoot {
        step: usize,
        variable: String,
        polynomial: String,
    },
    #[error("ambiguous root for eliminated variable `{variable}` (step {step}): candidates {candidates:?}")]
    AmbiguousRoot {
        step: usize,
        variable: String,
        candidates: Vec<f64>,
    },
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered")]
    NonFinite,
}

impl GeometryError {
    pub fn code(&self) -> &'static str {
        match self {
            GeometryError::NotRegular { .. } => "NOT_REGULAR",
            GeometryError::FrameCheck { .. } => "FRAME_CHECK",
            GeometryError::NoRealRoot { .. } => "NO_REAL_ROOT",
            GeometryError::AmbiguousRoot { .. } => "AMBIGUOUS_ROOT",
            GeometryError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            GeometryError::NonFinite => "NON_FINITE",
        }
    }
}

/// Coordinates on the reduced manifold, ordered like the retained variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPoint(pub Vec<f64>);

/// Coordinates on the ambient manifold, in the original variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint(pub Vec<f64>);

impl ReducedPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl AmbientPoint {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub oracle_radius: f64,
    pub divergence_factor: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iters: 50,
            oracle_radius: 0.5,
            divergence_factor: 1e6,
        }
    }
}

/// Constraints with precompiled first and second partial derivatives.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    values: Vec<CompiledPolynomial>,
    gradients: Vec<Vec<CompiledPolynomial>>,
    hessians: Vec<Vec<Vec<CompiledPolynomial>>>,
    dim: usize,
}

impl ConstraintSet {
    /// All polynomials must share one variable order; its length is the
    /// dimension of the space the constraints live in.
    pub fn new(polys: &[Polynomial]) -> Self {
        let dim = polys.first().map_or(0, |p| p.order().len());
        let values = polys.iter().map(Polynomial::compile).collect();
        let mut gradients = Vec::with_capacity(polys.len());
        let mut hessians = Vec::with_capacity(polys.len());
        for p in polys {
            assert_eq!(p.order().len(), dim, "constraints over different orders");
            let first: Vec<Polynomial> = (0..dim).map(|j| p.partial_derivative(j)).collect();
            hessians.push(
                first
                    .iter()
                    .map(|dj| (0..dim).map(|k| dj.partial_derivative(k).compile()).collect())
                    .collect(),
            );
            gradients.push(first.iter().map(Polynomial::compile).collect());
        }
        Self {
            values,
            gradients,
            hessians,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.values.len(), self.values.iter().map(|g| g.evaluate(p)))
    }

    pub fn max_residual(&self, p: &[f64]) -> f64 {
        self.values.iter().map(|g| g.evaluate(p).abs()).fold(0.0, f64::max)
    }

    /// `(len x dim)` matrix of first partials at `p`.
    pub fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.values.len(), self.dim, |i, j| self.gradients[i][j].evaluate(p))
    }

    /// Hessian of constraint `i` at `p`.
    pub fn hessian(&self, i: usize, p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |j, k| self.hessians[i][j][k].evaluate(p))
    }
}

/// Jacobian of `g_star` at `p`; entry `(i, j)` is `dg_i/dp_j`.
pub fn jacobian(g_star: &[Polynomial], p: &ReducedPoint) -> DMatrix<f64> {
    ConstraintSet::new(g_star).jacobian(p.as_slice())
}

/// Induced infinity norm (max absolute row sum).
pub(crate) fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Orthonormal tangent basis and Jacobian pseudoinverse at a base point.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    constraints: Arc<ConstraintSet>,
    base: ReducedPoint,
    basis: DMatrix<f64>,
    pinv: DMatrix<f64>,
    jacobian: DMatrix<f64>,
}

/// Result of an SVD-based rank-revealing factorization of a Jacobian.
pub(crate) struct JacobianSvd {
    pub rank: usize,
    pub null_basis: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
}

/// Null-space basis and pseudoinverse of an `r x d` matrix, via one SVD of
/// the matrix padded with zero rows to `d x d` so the full right singular
/// basis is available.
pub(crate) fn jacobian_svd(j: &DMatrix<f64>) -> JacobianSvd {
    let (r, d) = j.shape();
    let rows = r.max(d);
    let mut padded = DMatrix::zeros(rows, d);
    padded.view_mut((0, 0), (r, d)).copy_from(j);
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;

    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let smax = idx.first().map_or(0.0, |&i| sv[i]);
    let cutoff = r.max(d) as f64 * f64::EPSILON * smax;
    let rank = idx.iter().filter(|&&i| sv[i] > cutoff && sv[i] > 0.0).count();

    let null_idx = &idx[rank.min(d)..];
    let null_basis = DMatrix::from_fn(d, null_idx.len(), |row, col| v_t[(null_idx[col], row)]);

    let mut pinv = DMatrix::zeros(d, r);
    for &i in &idx[..rank] {
        let vi = v_t.row(i).transpose();
        let ui = u.column(i).rows(0, r).transpose();
        pinv += (vi * ui) / sv[i];
    }
    JacobianSvd { rank, null_basis, pinv }
}

impl TangentFrame {
    /// Builds the frame at `base`. Fails with `NotRegular` when the Jacobian
    /// loses rank.
    pub fn new(constraints: Arc<ConstraintSet>, base: ReducedPoint) -> Result<Self, GeometryError> {
        let d = constraints.dim();
        if base.0.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                got: base.0.len(),
            });
        }
        if base.0.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let jac = constraints.jacobian(base.as_slice());
        let r = jac.nrows();
        let svd = jacobian_svd(&jac);
        if svd.rank < r {
            return Err(GeometryError::NotRegular {
                rank: svd.rank,
                needed: r,
            });
        }
        let frame = Self {
            constraints,
            base,
            basis: svd.null_basis,
            pinv: svd.pinv,
            jacobian: jac,
        };
        let (orthonormality, null_residual) = frame.check();
        if orthonormality > 1e-12 || null_residual > 1e-10 * (1.0 + inf_norm(&frame.jacobian)) {
            return Err(GeometryError::FrameCheck {
                orthonormality,
                null_residual,
            });
        }
        Ok(frame)
    }

    /// `(||U^T U - I||_inf, ||J U||_inf)`.
    pub fn check(&self) -> (f64, f64) {
        let m = self.basis.ncols();
        let gram = self.basis.transpose() * &self.basis - DMatrix::<f64>::identity(m, m);
        (inf_norm(&gram), inf_norm(&(&self.jacobian * &self.basis)))
    }

    pub fn base(&self) -> &ReducedPoint {
        &self.base
    }

    /// `d x m` orthonormal basis of the tangent space.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Moore-Penrose pseudoinverse of the Jacobian at the base.
    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn constraints(&self) -> &Arc<ConstraintSet> {
        &self.constraints
    }

    pub fn tangent_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects `base + U w` back onto the manifold with the chord iteration,
    /// reusing the pseudoinverse from the base point.
    pub fn project(&self, w: &[f64], cfg: &ProjectionConfig) -> Result<Projection, ProjectionFailure> {
        assert_eq!(w.len(), self.tangent_dim(), "tangent coordinate length");
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ProjectionFailure::NonFinite);
        }
        let q0 = self.base.to_dvector() + &self.basis * DVector::from_column_slice(w);
        let mut q = q0.clone();
        let mut initial_residual = 0.0;
        for n in 0..=cfg.max_iters {
            let r = self.constraints.residuals(q.as_slice());
            let res = r.amax();
            if !res.is_finite() {
                return Err(ProjectionFailure::NonFinite);
            }
            if res <= cfg.residual_tol {
                return Ok(Projection {
                    point: ReducedPoint(q.as_slice().to_vec()),
                    start: ReducedPoint(q0.as_slice().to_vec()),
                    iterations: n,
                });
            }
            if n == cfg.max_iters {
                break;
            }
            if n == 0 {
                initial_residual = res;
            } else if res > cfg.divergence_factor * initial_residual {
                return Err(ProjectionFailure::Diverged { iteration: n });
            }
            q -= &self.pinv * r;
            if (&q - &q0).norm() > cfg.oracle_radius {
                return Err(ProjectionFailure::LeftRadius { iteration: n + 1 });
            }
        }
        Err(ProjectionFailure::IterationLimit)
    }
}

/// Builds a tangent frame for `g_star` at `p`.
pub fn tangent_frame(g_star: &[Polynomial], p: &ReducedPoint) -> Result<TangentFrame, GeometryError> {
    TangentFrame::new(Arc::new(ConstraintSet::new(g_star)), p.clone())
}

/// Successful projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: ReducedPoint,
    /// The tangent-space start `q_0`.
    pub start: ReducedPoint,
    pub iterations: usize,
}

/// Why the projection oracle rejected a tangent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProjectionFailure {
    #[error("iterate {iteration} left the oracle radius")]
    LeftRadius { iteration: usize },
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("residual blew up at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("non-finite iterate")]
    NonFinite,
}

/// One projection solve from `frame` with tangent coordinates `w`.
pub fn project_to_manifold(
    frame: &TangentFrame,
    w: &[f64],
    cfg: &ProjectionConfig,
) -> Result<Projection, ProjectionFailure> {
    frame.project(w, cfg)
}
