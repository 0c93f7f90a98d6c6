use crate::poly::CompiledPolynomial;
use crate::triangular::WhitneyPartition;

use super::roots::{real_roots, RootError};
use super::{AmbientPoint, GeometryError, ProjectionConfig, ReducedPoint};

/// Distance gap below which two candidate roots count as equally near.
const AMBIGUITY_GAP: f64 = 1e-9;

/// Implicit-function map from the reduced manifold back to `M`.
///
/// Eliminated variables are solved in order: once the retained coordinates
/// and the earlier eliminated values are substituted, `g_circ[j]` is a
/// univariate polynomial in `eliminated[j]`.
#[derive(Debug, Clone)]
pub struct Lifter {
    g_circ: Vec<CompiledPolynomial>,
    g_circ_text: Vec<String>,
    eliminated: Vec<usize>,
    eliminated_names: Vec<String>,
    partition: WhitneyPartition,
}

impl Lifter {
    pub fn new(partition: &WhitneyPartition) -> Self {
        let order = partition.order();
        Self {
            g_circ: partition.g_circ().iter().map(|p| p.compile()).collect(),
            g_circ_text: partition.g_circ().iter().map(ToString::to_string).collect(),
            eliminated: partition.eliminated().to_vec(),
            eliminated_names: partition
                .eliminated()
                .iter()
                .map(|&v| order.name(v).to_string())
                .collect(),
            partition: partition.clone(),
        }
    }

    pub fn partition(&self) -> &WhitneyPartition {
        &self.partition
    }

    /// Lifts `p`, choosing for each eliminated variable the real root nearest
    /// `warm[j]` (or 0 without a warm start).
    pub fn lift(
        &self,
        p: &ReducedPoint,
        warm: Option<&[f64]>,
        cfg: &ProjectionConfig,
    ) -> Result<AmbientPoint, GeometryError> {
        let d = self.partition.reduced_dim();
        if p.0.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                got: p.0.len(),
            });
        }
        if let Some(w) = warm {
            if w.len() != self.eliminated.len() {
                return Err(GeometryError::DimensionMismatch {
                    expected: self.eliminated.len(),
                    got: w.len(),
                });
            }
        }
        if p.0.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut z = self.partition.assemble(p.as_slice(), &[]);
        for (j, (poly, &var)) in self.g_circ.iter().zip(&self.eliminated).enumerate() {
            let coeffs = poly.univariate_in(var, &z);
            let target = warm.map_or(0.0, |w| w[j]);
            z[var] = self.pick_root(j, &coeffs, target, cfg.residual_tol)?;
        }
        Ok(AmbientPoint(z))
    }

    fn pick_root(&self, j: usize, coeffs: &[f64], target: f64, tol: f64) -> Result<f64, GeometryError> {
        let no_root = || GeometryError::NoRealRoot {
            step: j,
            variable: self.eliminated_names[j].clone(),
            polynomial: format!(
                "{} with coefficients {:?} (ascending powers)",
                self.g_circ_text[j], coeffs
            ),
        };
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let roots = match real_roots(coeffs, tol) {
            Ok(r) => r,
            Err(RootError::IdenticallyZero) => {
                return Err(GeometryError::AmbiguousRoot {
                    step: j,
                    variable: self.eliminated_names[j].clone(),
                    candidates: Vec::new(),
                })
            }
        };
        let mut by_distance: Vec<f64> = roots;
        by_distance.sort_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
        match by_distance.as_slice() {
            [] => Err(no_root()),
            [only] => Ok(*only),
            [first, second, ..] => {
                let gap = (second - target).abs() - (first - target).abs();
                if gap <= AMBIGUITY_GAP {
                    Err(GeometryError::AmbiguousRoot {
                        step: j,
                        variable: self.eliminated_names[j].clone(),
                        candidates: vec![*first, *second],
                    })
                } else {
                    Ok(*first)
                }
            }
        }
    }
}

/// Lifts a reduced point onto the ambient manifold.
pub fn lift(
    partition: &WhitneyPartition,
    p: &ReducedPoint,
    warm: Option<&[f64]>,
    cfg: &ProjectionConfig,
) -> Result<AmbientPoint, GeometryError> {
    Lifter::new(partition).lift(p, warm, cfg)
}

/// An ambient objective composed with the lift. The eliminated values of the
/// last successful lift seed the next one, which keeps consecutive
/// evaluations on the same sheet.
pub struct PulledBackObjective<F> {
    lifter: Lifter,
    objective: F,
    cfg: ProjectionConfig,
    warm: Option<Vec<f64>>,
}

impl<F: Fn(&[f64]) -> f64> PulledBackObjective<F> {
    pub fn new(partition: &WhitneyPartition, objective: F, cfg: ProjectionConfig) -> Self {
        Self {
            lifter: Lifter::new(partition),
            objective,
            cfg,
            warm: None,
        }
    }

    pub fn lifter(&self) -> &Lifter {
        &self.lifter
    }

    pub fn warm_start(&self) -> Option<&[f64]> {
        self.warm.as_deref()
    }

    pub fn set_warm_start(&mut self, warm: Option<Vec<f64>>) {
        self.warm = warm;
    }

    /// Value of the pulled-back objective and the lifted point, without
    /// touching the warm-start cache.
    pub fn evaluate_with(&self, p: &ReducedPoint, warm: Option<&[f64]>) -> Result<(f64, AmbientPoint), GeometryError> {
        let z = self.lifter.lift(p, warm, &self.cfg)?;
        Ok(((self.objective)(z.as_slice()), z))
    }

    pub fn evaluate(&mut self, p: &ReducedPoint) -> Result<(f64, AmbientPoint), GeometryError> {
        let (value, z) = self.evaluate_with(p, self.warm.as_deref())?;
        self.warm = Some(self.lifter.partition().eliminated().iter().map(|&v| z.0[v]).collect());
        Ok((value, z))
    }
}

/// `f ∘ lift`, with warm-started lifts along the evaluation sequence.
pub fn pullback_objective<F: Fn(&[f64]) -> f64>(
    objective: F,
    partition: &WhitneyPartition,
    cfg: ProjectionConfig,
) -> PulledBackObjective<F> {
    PulledBackObjective::new(partition, objective, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_polynomial, VariableOrder};
    use crate::triangular::{validate_triangular, whitney_partition, Elimination};

    fn partition(names: &[&str], polys: &[&str], elim: &[&str]) -> WhitneyPartition {
        let o = VariableOrder::new(names.iter().copied()).unwrap();
        let ps = polys.iter().map(|s| parse_polynomial(s, &o).unwrap()).collect();
        let t = validate_triangular(ps, &o).unwrap();
        let elim = elim.iter().map(|n| o.index_of(n).unwrap()).collect();
        whitney_partition(&t, &Elimination::Explicit(elim)).unwrap()
    }

    fn quintic() -> WhitneyPartition {
        partition(&["u", "x", "y"], &["u^4 + x^2 - 1", "u^2 + x^3 + y^5"], &["y"])
    }

    #[test]
    fn lifts_quintic_closed_form() {
        let part = quintic();
        // (u, x) = (1, 0)
        let z = lift(&part, &ReducedPoint(vec![1.0, 0.0]), None, &ProjectionConfig::default()).unwrap();
        assert_eq!(z.0, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn lifts_eq1_system() {
        let part = partition(
            &["u", "x", "y1", "y2"],
            &["u^2*x^2 - 1", "y1 + u", "y2 + x"],
            &["y1", "y2"],
        );
        let z = lift(&part, &ReducedPoint(vec![1.0, 1.0]), None, &ProjectionConfig::default()).unwrap();
        assert_eq!(z.0, vec![1.0, 1.0, -1.0, -1.0]);
        assert!(part.system().max_residual(&z.0) <= 1e-12);
    }

    #[test]
    fn no_real_root() {
        let part = partition(&["x", "y"], &["x + 1", "y^2 - x"], &["y"]);
        let err = lift(&part, &ReducedPoint(vec![-1.0]), None, &ProjectionConfig::default()).unwrap_err();
        assert_eq!(err.code(), "NO_REAL_ROOT");
    }

    #[test]
    fn ambiguous_without_warm_start() {
        let part = partition(&["x", "y"], &["x - 4", "y^2 - x"], &["y"]);
        let cfg = ProjectionConfig::default();
        let err = lift(&part, &ReducedPoint(vec![4.0]), None, &cfg).unwrap_err();
        assert_eq!(err.code(), "AMBIGUOUS_ROOT");
        let z = lift(&part, &ReducedPoint(vec![4.0]), Some(&[1.5]), &cfg).unwrap();
        assert!((z.0[1] - 2.0).abs() < 1e-15);
        let z = lift(&part, &ReducedPoint(vec![4.0]), Some(&[-0.1]), &cfg).unwrap();
        assert!((z.0[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn pullback_examples() {
        let part = quintic();
        let cfg = ProjectionConfig::default();
        let mut f = pullback_objective(|z: &[f64]| z[2], &part, cfg);
        let (v, _) = f.evaluate(&ReducedPoint(vec![1.0, 0.0])).unwrap();
        assert_eq!(v, -1.0);
        assert_eq!(f.warm_start(), Some(&[-1.0][..]));

        let mut g = pullback_objective(|z: &[f64]| z[0] * z[0] + z[1] * z[1], &part, cfg);
        let (v, _) = g.evaluate(&ReducedPoint(vec![0.3, 0.7])).unwrap();
        assert_eq!(v, 0.3 * 0.3 + 0.7 * 0.7);

        let part = partition(
            &["u", "x", "y1", "y2"],
            &["u^2*x^2 - 1", "y1 + u", "y2 + x"],
            &["y1", "y2"],
        );
        let mut s = pullback_objective(|z: &[f64]| z.iter().sum(), &part, cfg);
        let (v, _) = s.evaluate(&ReducedPoint(vec![1.0, 1.0])).unwrap();
        assert_eq!(v, 0.0);
    }
}
