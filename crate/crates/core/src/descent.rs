//! Probabilistic descent on the reduced manifold.
//!
//! Each iteration draws one random unit direction `u` in the tangent space of
//! the current base point `b` and polls the two projected points
//! `B(w ± α u)`. If either projection fails the chart is no longer usable
//! around `b`: the iteration re-bases at the current point, resets `w` to
//! zero and shrinks `α`. Otherwise the pulled-back objective decides whether
//! the poll succeeded, with sufficient decrease `ρ(α) = C α²`.
//!
//! Successful polls grow `α` by `γ` (capped at `α_max`), unsuccessful ones
//! shrink it by `θ`. The base point only moves on a re-base.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    AmbientPoint, ConstraintSet, GeometryError, ProjectionConfig, PulledBackObjective, ReducedPoint, TangentFrame,
};
use crate::triangular::WhitneyPartition;

/// `check_convergence` requires the final step size below this.
pub const ALPHA_REPORT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DescentError {
    #[error("start point is not on the reduced manifold (max residual {residual:e} > {tol:e})")]
    InvalidStart { residual: f64, tol: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("manifold is zero-dimensional; there is no direction to search")]
    ZeroDimensional,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl DescentError {
    pub fn code(&self) -> &'static str {
        match self {
            DescentError::InvalidStart { .. } => "INVALID_START",
            DescentError::InvalidConfig(_) => "INVALID_CONFIG",
            DescentError::ZeroDimensional => "ZERO_DIMENSIONAL",
            DescentError::Geometry(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    pub alpha0: f64,
    /// May be `f64::INFINITY`.
    pub alpha_max: f64,
    pub theta: f64,
    pub gamma: f64,
    /// `C` in `ρ(α) = C α²`; `None` picks `1e-4 (1 + |f(p0)|)`.
    pub c_forcing: Option<f64>,
    /// Iteration budget.
    pub max_iters: usize,
    pub seed: u64,
    /// Stop once `α` falls below this. The default only guards against
    /// halving into subnormals and then zero.
    pub alpha_min: f64,
    /// Trailing window inspected by [`check_convergence`].
    pub convergence_window: usize,
    pub projection: ProjectionConfig,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.25,
            alpha_max: 1.0,
            theta: 0.5,
            gamma: 2.0,
            c_forcing: None,
            max_iters: 5000,
            seed: 0,
            alpha_min: f64::MIN_POSITIVE,
            convergence_window: 500,
            projection: ProjectionConfig::default(),
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<(), DescentError> {
        let bad = |m: &str| Err(DescentError::InvalidConfig(m.to_string()));
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad("alpha0 must be positive and finite");
        }
        if self.alpha_max.is_nan() || self.alpha_max < self.alpha0 {
            return bad("alpha_max must be at least alpha0");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad("gamma must exceed 1");
        }
        if let Some(c) = self.c_forcing {
            if !(c > 0.0 && c.is_finite()) {
                return bad("forcing constant must be positive");
            }
        }
        if self.alpha_min.is_nan() || self.alpha_min < 0.0 {
            return bad("alpha_min must be nonnegative");
        }
        let p = &self.projection;
        if !(p.residual_tol > 0.0 && p.oracle_radius > 0.0 && p.divergence_factor > 0.0 && p.max_iters > 0) {
            return bad("projection settings must be positive");
        }
        Ok(())
    }
}

/// An objective over ambient coordinates, a partition, and a start point on
/// the reduced manifold.
pub struct DescentProblem<F> {
    pub partition: WhitneyPartition,
    pub objective: F,
    pub start: ReducedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PollEvent {
    Success,
    Unsuccessful,
    Rebase,
}

impl PollEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            PollEvent::Success => "SUCCESS",
            PollEvent::Unsuccessful => "UNSUCCESSFUL",
            PollEvent::Rebase => "REBASE",
        }
    }
}

/// State after iteration `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentRecord {
    pub j: usize,
    /// Step size used during this iteration.
    pub alpha: f64,
    /// Objective at the point kept after this iteration.
    pub f: f64,
    pub event: PollEvent,
    pub point: ReducedPoint,
    pub ambient: AmbientPoint,
    /// Base point for the next iteration.
    pub base: ReducedPoint,
    /// Tangent coordinates for the next iteration.
    pub tangent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub start: ReducedPoint,
    pub start_ambient: AmbientPoint,
    pub start_value: f64,
    pub forcing_constant: f64,
    pub records: Vec<DescentRecord>,
    /// Step size after the last iteration.
    pub final_alpha: f64,
    pub final_point: ReducedPoint,
    pub final_ambient: AmbientPoint,
    pub final_value: f64,
    pub converged: bool,
}

impl DescentTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Uniform draw from the unit sphere in `R^m`.
pub fn random_unit_direction<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    assert!(m >= 1, "direction space must be nonempty");
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// True iff the last `window` iterations contain no re-base and the final
/// step size is below [`ALPHA_REPORT_THRESHOLD`].
pub fn check_convergence(trace: &DescentTrace, window: usize) -> bool {
    let tail = &trace.records[trace.records.len().saturating_sub(window)..];
    tail.iter().all(|r| r.event != PollEvent::Rebase) && trace.final_alpha < ALPHA_REPORT_THRESHOLD
}

pub fn descend<F: Fn(&[f64]) -> f64>(
    problem: &DescentProblem<F>,
    cfg: &DescentConfig,
) -> Result<DescentTrace, DescentError> {
    descend_with(problem, cfg, |_| {})
}

/// Runs the descent, handing each record to `observe` as soon as it exists.
pub fn descend_with<F, O>(
    problem: &DescentProblem<F>,
    cfg: &DescentConfig,
    mut observe: O,
) -> Result<DescentTrace, DescentError>
where
    F: Fn(&[f64]) -> f64,
    O: FnMut(&DescentRecord),
{
    cfg.validate()?;
    let partition = &problem.partition;
    let m = partition.manifold_dim();
    if m == 0 {
        return Err(DescentError::ZeroDimensional);
    }
    let constraints = Arc::new(ConstraintSet::new(partition.reduced_g_star()));
    let start = problem.start.clone();
    if start.0.len() != partition.reduced_dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: partition.reduced_dim(),
            got: start.0.len(),
        }
        .into());
    }
    let residual = constraints.max_residual(start.as_slice());
    if residual.is_nan() || residual > cfg.projection.residual_tol {
        return Err(DescentError::InvalidStart {
            residual,
            tol: cfg.projection.residual_tol,
        });
    }

    let objective = PulledBackObjective::new(partition, &problem.objective, cfg.projection);
    let eliminated_of = |z: &AmbientPoint| -> Vec<f64> { partition.eliminated().iter().map(|&v| z.0[v]).collect() };
    let (f0, z0) = objective.evaluate_with(&start, None)?;
    let forcing = cfg.c_forcing.unwrap_or(1e-4 * (1.0 + f0.abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut frame = TangentFrame::new(Arc::clone(&constraints), start.clone())?;
    let mut point = start.clone();
    let mut ambient = z0.clone();
    let mut value = f0;
    let mut w = vec![0.0; m];
    let mut alpha = cfg.alpha0;
    let mut records = Vec::new();

    for j in 0..cfg.max_iters {
        if alpha < cfg.alpha_min {
            break;
        }
        let dir = random_unit_direction(&mut rng, m);
        let w_plus: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
        let w_minus: Vec<f64> = w.iter().zip(&dir).map(|(a, b)| a - alpha * b).collect();
        let polls = (
            frame.project(&w_plus, &cfg.projection),
            frame.project(&w_minus, &cfg.projection),
        );

        let event = match polls {
            (Ok(plus), Ok(minus)) => {
                let threshold = value - forcing * alpha * alpha;
                let warm = eliminated_of(&ambient);
                let mut accepted = None;
                for (candidate, w_candidate) in [(plus.point, &w_plus), (minus.point, &w_minus)] {
                    // A failed lift rules out this direction only.
                    if let Ok((f, z)) = objective.evaluate_with(&candidate, Some(&warm)) {
                        if f < threshold {
                            accepted = Some((candidate, w_candidate.clone(), f, z));
                            break;
                        }
                    }
                }
                match accepted {
                    Some((p, w_new, f, z)) => {
                        point = p;
                        w = w_new;
                        value = f;
                        ambient = z;
                        PollEvent::Success
                    }
                    None => PollEvent::Unsuccessful,
                }
            }
            _ => {
                frame = TangentFrame::new(Arc::clone(&constraints), point.clone())?;
                w.iter_mut().for_each(|x| *x = 0.0);
                PollEvent::Rebase
            }
        };

        let record = DescentRecord {
            j,
            alpha,
            f: value,
            event,
            point: point.clone(),
            ambient: ambient.clone(),
            base: frame.base().clone(),
            tangent: w.clone(),
        };
        observe(&record);
        records.push(record);

        alpha = match event {
            PollEvent::Success => (cfg.gamma * alpha).min(cfg.alpha_max),
            PollEvent::Unsuccessful | PollEvent::Rebase => cfg.theta * alpha,
        };
    }

    let mut trace = DescentTrace {
        start,
        start_ambient: z0,
        start_value: f0,
        forcing_constant: forcing,
        records,
        final_alpha: alpha,
        final_point: point,
        final_ambient: ambient,
        final_value: value,
        converged: false,
    };
    trace.converged = check_convergence(&trace, cfg.convergence_window);
    Ok(trace)
}
