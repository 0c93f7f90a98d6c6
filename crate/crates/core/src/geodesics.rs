//! Geodesic motion on the reduced manifold.
//!
//! With `N` the pseudoinverse of the constraint Jacobian and `H_c` the
//! Hessian of constraint `c`, the Christoffel symbols of the induced metric
//! are `Γ^i_{jk} = Σ_c N[i][c] H_c[j][k]`, and geodesics solve
//! `z''^i + Γ^i_{jk} z'^j z'^k = 0`. Integration is fixed-step classical RK4
//! followed by one projection of the endpoint back onto the manifold.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::geometry::{
    jacobian_svd, ConstraintSet, GeometryError, ProjectionConfig, ProjectionFailure, ReducedPoint, TangentFrame,
};

const SPEED_BLOWUP: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesicError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("velocity grew from {initial:e} to {current:e} at t = {time}")]
    Diverged { initial: f64, current: f64, time: f64 },
    #[error("step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("final projection failed: {0}")]
    Projection(ProjectionFailure),
}

impl GeodesicError {
    pub fn code(&self) -> &'static str {
        match self {
            GeodesicError::Geometry(e) => e.code(),
            GeodesicError::Diverged { .. } => "DIVERGED",
            GeodesicError::InvalidStep(_) => "INVALID_STEP",
            GeodesicError::Projection(_) => "PROJECTION_FAILED",
        }
    }
}

/// `gamma[i][j][k] = Γ^i_{jk}`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor {
    dim: usize,
    data: Vec<f64>,
}

impl ChristoffelTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    /// Largest `|Γ^i_{jk} - Γ^i_{kj}|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }

    /// `-Γ^i_{jk} v^j v^k`.
    pub fn acceleration(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        DVector::from_fn(d, |i, _| {
            let mut acc = 0.0;
            for j in 0..d {
                for k in 0..d {
                    acc += self.get(i, j, k) * v[j] * v[k];
                }
            }
            -acc
        })
    }
}

/// Christoffel symbols of the induced metric at `p`.
pub fn christoffel(constraints: &ConstraintSet, p: &ReducedPoint) -> Result<ChristoffelTensor, GeometryError> {
    let d = constraints.dim();
    if p.0.len() != d {
        return Err(GeometryError::DimensionMismatch {
            expected: d,
            got: p.0.len(),
        });
    }
    if p.0.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let jac = constraints.jacobian(p.as_slice());
    let svd = jacobian_svd(&jac);
    if svd.rank < jac.nrows() {
        return Err(GeometryError::NotRegular {
            rank: svd.rank,
            needed: jac.nrows(),
        });
    }
    let hessians: Vec<_> = (0..constraints.len())
        .map(|c| constraints.hessian(c, p.as_slice()))
        .collect();
    let mut data = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                data[(i * d + j) * d + k] = hessians
                    .iter()
                    .enumerate()
                    .map(|(c, h)| svd.pinv[(i, c)] * h[(j, k)])
                    .sum();
            }
        }
    }
    Ok(ChristoffelTensor { dim: d, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub time: f64,
}

impl GeodesicState {
    pub fn speed(&self) -> f64 {
        self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn rhs(
    constraints: &ConstraintSet,
    z: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
    let gamma = christoffel(constraints, &ReducedPoint(z.as_slice().to_vec()))?;
    Ok((v.clone(), gamma.acceleration(v)))
}

/// Integrates for `duration` (which may be negative) and calls `observe`
/// after every RK4 step with the unprojected state.
pub fn geodesic_integrate_with<O: FnMut(&GeodesicState)>(
    constraints: &Arc<ConstraintSet>,
    state0: &GeodesicState,
    duration: f64,
    step: f64,
    cfg: &ProjectionConfig,
    mut observe: O,
) -> Result<GeodesicState, GeodesicError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(GeodesicError::InvalidStep(step));
    }
    if duration == 0.0 {
        return Ok(state0.clone());
    }
    let steps = (duration.abs() / step).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let speed0 = state0.speed();
    let mut z = DVector::from_column_slice(&state0.position);
    let mut v = DVector::from_column_slice(&state0.velocity);
    let mut t = state0.time;
    for _ in 0..steps {
        let (k1z, k1v) = rhs(constraints, &z, &v)?;
        let (k2z, k2v) = rhs(constraints, &(&z + &k1z * (h / 2.0)), &(&v + &k1v * (h / 2.0)))?;
        let (k3z, k3v) = rhs(constraints, &(&z + &k2z * (h / 2.0)), &(&v + &k2v * (h / 2.0)))?;
        let (k4z, k4v) = rhs(constraints, &(&z + &k3z * h), &(&v + &k3v * h))?;
        z += (k1z + k2z * 2.0 + k3z * 2.0 + k4z) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        t += h;
        let speed = v.norm();
        if !speed.is_finite() || speed > SPEED_BLOWUP * speed0.max(f64::MIN_POSITIVE) {
            return Err(GeodesicError::Diverged {
                initial: speed0,
                current: speed,
                time: t,
            });
        }
        observe(&GeodesicState {
            position: z.as_slice().to_vec(),
            velocity: v.as_slice().to_vec(),
            time: t,
        });
    }
    let frame = TangentFrame::new(Arc::clone(constraints), ReducedPoint(z.as_slice().to_vec()))?;
    let w = vec![0.0; frame.tangent_dim()];
    let projected = frame.project(&w, cfg).map_err(GeodesicError::Projection)?;
    Ok(GeodesicState {
        position: projected.point.0,
        velocity: v.as_slice().to_vec(),
        time: t,
    })
}

/// Integrates the geodesic equation from `state0` for `duration`.
pub fn geodesic_integrate(
    constraints: &Arc<ConstraintSet>,
    state0: &GeodesicState,
    duration: f64,
    step: f64,
    cfg: &ProjectionConfig,
) -> Result<GeodesicState, GeodesicError> {
    geodesic_integrate_with(constraints, state0, duration, step, cfg, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, Polynomial, VariableOrder};

    fn constraints(names: &[&str], polys: &[&str]) -> Arc<ConstraintSet> {
        let o = VariableOrder::new(names.iter().copied()).unwrap();
        let ps: Vec<Polynomial> = polys.iter().map(|s| parse_polynomial(s, &o).unwrap()).collect();
        Arc::new(ConstraintSet::new(&ps))
    }

    #[test]
    fn circle_christoffel() {
        let c = constraints(&["x", "u"], &["x^2 + u^2 - 1"]);
        let g = christoffel(&c, &ReducedPoint(vec![1.0, 0.0])).unwrap();
        assert!((g.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((g.get(0, 1, 1) - 1.0).abs() < 1e-15);
        assert_eq!(g.get(0, 0, 1), 0.0);
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(g.get(1, j, k), 0.0);
            }
        }
    }

    #[test]
    fn affine_manifold_is_flat() {
        let c = constraints(&["x", "u", "w"], &["x + 2*u - w - 3"]);
        let g = christoffel(&c, &ReducedPoint(vec![0.2, 1.0, -0.6])).unwrap();
        assert_eq!(g.asymmetry(), 0.0);
        assert!((0..27).all(|n| g.data[n] == 0.0));
    }

    #[test]
    fn christoffel_not_regular() {
        let c = constraints(&["x", "u"], &["x*u"]);
        let err = christoffel(&c, &ReducedPoint(vec![0.0, 0.0])).unwrap_err();
        assert_eq!(err.code(), "NOT_REGULAR");
    }

    #[test]
    fn circle_quarter_turn() {
        let c = constraints(&["x", "u"], &["x^2 + u^2 - 1"]);
        let s0 = GeodesicState {
            position: vec![1.0, 0.0],
            velocity: vec![0.0, 1.0],
            time: 0.0,
        };
        let end = geodesic_integrate(&c, &s0, std::f64::consts::FRAC_PI_2, 1e-3, &ProjectionConfig::default()).unwrap();
        assert!(end.position[0].abs() < 1e-6);
        assert!((end.position[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_duration_and_bad_step() {
        let c = constraints(&["x", "u"], &["x^2 + u^2 - 1"]);
        let s0 = GeodesicState {
            position: vec![1.0, 0.0],
            velocity: vec![0.0, 1.0],
            time: 0.5,
        };
        let cfg = ProjectionConfig::default();
        assert_eq!(geodesic_integrate(&c, &s0, 0.0, 1e-3, &cfg).unwrap(), s0);
        assert_eq!(
            geodesic_integrate(&c, &s0, 1.0, 0.0, &cfg).unwrap_err(),
            GeodesicError::InvalidStep(0.0)
        );
    }
}
