//! Triangular polynomial systems and the Whitney partition of their
//! variables into an eliminated block and a retained block.
//!
//! The system must already be triangular: every member is non-constant and
//! no two members share a main variable. Main variables are *algebraic*, the
//! rest are *free*, and the manifold dimension is the number of free
//! variables.
//!
//! A [`WhitneyPartition`] picks some algebraic variables to eliminate. Their
//! polynomials form `g_circ`, solved one variable at a time to lift a reduced
//! point back to the full space. The remaining polynomials form `g_star`,
//! which cuts out the reduced manifold the optimizer actually walks on.

mod linear;

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::poly::{Polynomial, VariableOrder};

pub use linear::{linear_whitney, LinearTriangularForm};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TriangularError {
    #[error("member {index} (`{polynomial}`) is constant")]
    ConstantMember { index: usize, polynomial: String },
    #[error("`{first}` and `{second}` share main variable `{variable}`")]
    DuplicateMvar {
        variable: String,
        first: String,
        second: String,
    },
    #[error("polynomial `{polynomial}` is over a different variable order")]
    OrderMismatch { polynomial: String },
    #[error("cannot eliminate `{variable}`: {reason}")]
    NotEliminable { variable: String, reason: String },
    #[error("every constraint was eliminated; nothing is left to descend on")]
    EmptyGStar,
    #[error("linear system precondition failed: {0}")]
    LinearPrecondition(String),
    #[error("matrix does not have full row rank (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },
}

impl TriangularError {
    pub fn code(&self) -> &'static str {
        match self {
            TriangularError::ConstantMember { .. } => "CONSTANT_MEMBER",
            TriangularError::DuplicateMvar { .. } => "DUPLICATE_MVAR",
            TriangularError::OrderMismatch { .. } => "ORDER_MISMATCH",
            TriangularError::NotEliminable { .. } => "NOT_ELIMINABLE",
            TriangularError::EmptyGStar => "EMPTY_GSTAR",
            TriangularError::LinearPrecondition(_) => "PRECONDITION",
            TriangularError::RankDeficient { .. } => "RANK_DEFICIENT",
        }
    }
}

/// Validated triangular set, members sorted by ascending main variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularSystem {
    polynomials: Vec<Polynomial>,
    order: Arc<VariableOrder>,
    algebraic: BTreeSet<usize>,
    free: BTreeSet<usize>,
}

impl TriangularSystem {
    pub fn polynomials(&self) -> &[Polynomial] {
        &self.polynomials
    }

    pub fn order(&self) -> &Arc<VariableOrder> {
        &self.order
    }

    pub fn algebraic_vars(&self) -> &BTreeSet<usize> {
        &self.algebraic
    }

    pub fn free_vars(&self) -> &BTreeSet<usize> {
        &self.free
    }

    /// Number of constraints `k`.
    pub fn num_constraints(&self) -> usize {
        self.polynomials.len()
    }

    /// Manifold dimension `m`, the number of free variables.
    pub fn manifold_dim(&self) -> usize {
        self.free.len()
    }

    pub fn num_vars(&self) -> usize {
        self.order.len()
    }

    /// The member whose main variable is `var`, if any.
    pub fn polynomial_for(&self, var: usize) -> Option<&Polynomial> {
        self.polynomials.iter().find(|p| p.main_variable() == Some(var))
    }

    /// Largest absolute residual of the system at an ambient point.
    pub fn max_residual(&self, point: &[f64]) -> f64 {
        self.polynomials
            .iter()
            .map(|p| p.evaluate(point).abs())
            .fold(0.0, f64::max)
    }
}

/// Checks the triangular-set conditions and classifies variables.
pub fn validate_triangular(
    polys: Vec<Polynomial>,
    order: &Arc<VariableOrder>,
) -> Result<TriangularSystem, TriangularError> {
    let mut with_mvar = Vec::with_capacity(polys.len());
    for (index, p) in polys.into_iter().enumerate() {
        if p.order() != order {
            return Err(TriangularError::OrderMismatch {
                polynomial: p.to_string(),
            });
        }
        match p.main_variable() {
            Some(v) => with_mvar.push((v, p)),
            None => {
                return Err(TriangularError::ConstantMember {
                    index,
                    polynomial: p.to_string(),
                })
            }
        }
    }
    with_mvar.sort_by_key(|(v, _)| *v);
    for pair in with_mvar.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(TriangularError::DuplicateMvar {
                variable: order.name(pair[0].0).to_string(),
                first: pair[0].1.to_string(),
                second: pair[1].1.to_string(),
            });
        }
    }
    let algebraic: BTreeSet<usize> = with_mvar.iter().map(|(v, _)| *v).collect();
    let free = (0..order.len()).filter(|v| !algebraic.contains(v)).collect();
    Ok(TriangularSystem {
        polynomials: with_mvar.into_iter().map(|(_, p)| p).collect(),
        order: Arc::clone(order),
        algebraic,
        free,
    })
}

/// Which variables to move into the eliminated block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Elimination {
    /// Eliminate greedily from the top until the Whitney bound is reached.
    Auto,
    /// Eliminate exactly these variables (any order; stored ascending).
    Explicit(Vec<usize>),
}

/// Whether a retained variable is algebraic (`x`) or free (`u`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetainedKind {
    Algebraic,
    Free,
}

/// Split of a triangular system into the reduced constraints `g_star` and
/// the lifting cascade `g_circ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitneyPartition {
    system: TriangularSystem,
    eliminated: Vec<usize>,
    retained: Vec<usize>,
    g_star: Vec<Polynomial>,
    g_circ: Vec<Polynomial>,
    reduced_order: Arc<VariableOrder>,
    reduced_g_star: Vec<Polynomial>,
}

impl WhitneyPartition {
    pub fn system(&self) -> &TriangularSystem {
        &self.system
    }

    pub fn order(&self) -> &Arc<VariableOrder> {
        self.system.order()
    }

    /// Eliminated variables in lifting order (ascending rank).
    pub fn eliminated(&self) -> &[usize] {
        &self.eliminated
    }

    /// Retained variables in ascending rank; reduced coordinates follow this
    /// order.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn retained_kinds(&self) -> Vec<RetainedKind> {
        self.retained
            .iter()
            .map(|v| {
                if self.system.algebraic_vars().contains(v) {
                    RetainedKind::Algebraic
                } else {
                    RetainedKind::Free
                }
            })
            .collect()
    }

    /// `g_star` over the full variable order.
    pub fn g_star(&self) -> &[Polynomial] {
        &self.g_star
    }

    /// `g_circ[j]` has main variable `eliminated[j]`, over the full order.
    pub fn g_circ(&self) -> &[Polynomial] {
        &self.g_circ
    }

    /// Order over the retained variables only.
    pub fn reduced_order(&self) -> &Arc<VariableOrder> {
        &self.reduced_order
    }

    /// `g_star` rewritten over [`Self::reduced_order`].
    pub fn reduced_g_star(&self) -> &[Polynomial] {
        &self.reduced_g_star
    }

    /// Reduced dimension `d = |retained|`.
    pub fn reduced_dim(&self) -> usize {
        self.retained.len()
    }

    pub fn manifold_dim(&self) -> usize {
        self.system.manifold_dim()
    }

    /// Extracts retained coordinates from an ambient point.
    pub fn reduce(&self, ambient: &[f64]) -> Vec<f64> {
        self.retained.iter().map(|&v| ambient[v]).collect()
    }

    /// Assembles an ambient point from reduced coordinates and the eliminated
    /// values (in [`Self::eliminated`] order).
    pub fn assemble(&self, reduced: &[f64], eliminated_values: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.system.num_vars()];
        for (&v, &x) in self.retained.iter().zip(reduced) {
            z[v] = x;
        }
        for (&v, &y) in self.eliminated.iter().zip(eliminated_values) {
            z[v] = y;
        }
        z
    }
}

/// Whether the polynomial whose main variable is `var` has exactly one real
/// root in `var`: main degree 1, or odd main degree with a constant initial.
fn unique_root_guaranteed(p: &Polynomial) -> bool {
    match p.decompose() {
        Ok(d) => d.main_degree == 1 || (d.main_degree % 2 == 1 && d.initial.is_constant()),
        Err(_) => false,
    }
}

/// Splits `system` into `g_star` and `g_circ`.
pub fn whitney_partition(
    system: &TriangularSystem,
    elimination: &Elimination,
) -> Result<WhitneyPartition, TriangularError> {
    let order = system.order();
    let eliminated: BTreeSet<usize> = match elimination {
        Elimination::Explicit(vars) => {
            let mut set = BTreeSet::new();
            for &v in vars {
                let name = || order.name(v).to_string();
                if v >= order.len() {
                    return Err(TriangularError::NotEliminable {
                        variable: format!("#{v}"),
                        reason: "no such variable".into(),
                    });
                }
                if !system.algebraic_vars().contains(&v) {
                    return Err(TriangularError::NotEliminable {
                        variable: name(),
                        reason: "it is free (not the main variable of any constraint)".into(),
                    });
                }
                if !set.insert(v) {
                    return Err(TriangularError::NotEliminable {
                        variable: name(),
                        reason: "listed twice".into(),
                    });
                }
            }
            set
        }
        Elimination::Auto => auto_elimination(system),
    };

    let mut g_star = Vec::new();
    let mut g_circ = Vec::new();
    for p in system.polynomials() {
        let mv = p.main_variable().expect("validated non-constant");
        if eliminated.contains(&mv) {
            g_circ.push(p.clone());
        } else {
            if let Some(&bad) = p.variables().iter().find(|v| eliminated.contains(v)) {
                return Err(TriangularError::NotEliminable {
                    variable: order.name(bad).to_string(),
                    reason: format!("retained constraint `{p}` still involves it"),
                });
            }
            g_star.push(p.clone());
        }
    }
    if g_star.is_empty() {
        return Err(TriangularError::EmptyGStar);
    }

    let retained: Vec<usize> = (0..order.len()).filter(|v| !eliminated.contains(v)).collect();
    let reduced_order = VariableOrder::new(retained.iter().map(|&v| order.name(v))).expect("subset of a valid order");
    let reduced_g_star = g_star
        .iter()
        .map(|p| {
            p.remap(&reduced_order, |v| retained.iter().position(|&r| r == v))
                .expect("g_star involves retained variables only")
        })
        .collect();

    Ok(WhitneyPartition {
        system: system.clone(),
        eliminated: eliminated.into_iter().collect(),
        retained,
        g_star,
        g_circ,
        reduced_order,
        reduced_g_star,
    })
}

fn auto_elimination(system: &TriangularSystem) -> BTreeSet<usize> {
    let n = system.num_vars();
    let target = (2 * system.manifold_dim() + 1).min(n);
    let mut eliminated = BTreeSet::new();
    // Candidates from the greatest-ranked algebraic variable downward.
    for &candidate in system.algebraic_vars().iter().rev() {
        if n - eliminated.len() <= target {
            break;
        }
        let owner = system
            .polynomial_for(candidate)
            .expect("algebraic variables have an owner");
        let cascade_ok = system
            .polynomials()
            .iter()
            .filter(|p| !std::ptr::eq(*p, owner))
            .filter(|p| p.main_variable().is_none_or(|mv| !eliminated.contains(&mv)))
            .all(|p| !p.involves(candidate));
        if !cascade_ok || !unique_root_guaranteed(owner) {
            break;
        }
        eliminated.insert(candidate);
    }
    eliminated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_polynomial;

    fn system(names: &[&str], polys: &[&str]) -> Result<TriangularSystem, TriangularError> {
        let o = VariableOrder::new(names.iter().copied()).unwrap();
        let ps = polys.iter().map(|s| parse_polynomial(s, &o).unwrap()).collect();
        validate_triangular(ps, &o)
    }

    #[test]
    fn classifies_textbook_example() {
        let t = system(&["z1", "z2", "z3", "z4"], &["z4 + z2", "z1^2*z2^2 - 1", "z3 + z1"]).unwrap();
        assert_eq!(t.algebraic_vars(), &BTreeSet::from([1, 2, 3]));
        assert_eq!(t.free_vars(), &BTreeSet::from([0]));
        assert_eq!(t.manifold_dim(), 1);
        let mvars: Vec<_> = t.polynomials().iter().map(|p| p.main_variable().unwrap()).collect();
        assert_eq!(mvars, vec![1, 2, 3]);
    }

    #[test]
    fn classifies_quintic_example() {
        let t = system(&["u", "x", "y"], &["u^2 + x^3 + y^5", "u^4 + x^2 - 1"]).unwrap();
        assert_eq!(t.algebraic_vars(), &BTreeSet::from([1, 2]));
        assert_eq!(t.free_vars(), &BTreeSet::from([0]));
    }

    #[test]
    fn rejects_constant_and_duplicate() {
        let err = system(&["x"], &["x - x"]).unwrap_err();
        assert_eq!(err.code(), "CONSTANT_MEMBER");
        let err = system(&["x", "y"], &["y + x", "y^2 - 1"]).unwrap_err();
        assert_eq!(
            err,
            TriangularError::DuplicateMvar {
                variable: "y".into(),
                first: "y + x".into(),
                second: "y^2 - 1".into()
            }
        );
    }

    #[test]
    fn partitions_eq1_system() {
        let t = system(&["u", "x", "y1", "y2"], &["u^2*x^2 - 1", "y1 + u", "y2 + x"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Explicit(vec![3, 2])).unwrap();
        assert_eq!(p.eliminated(), &[2, 3]);
        assert_eq!(p.retained(), &[0, 1]);
        assert_eq!(p.g_star().len(), 1);
        assert_eq!(p.g_star()[0].to_string(), "x^2*u^2 - 1");
        assert_eq!(p.g_circ()[0].to_string(), "y1 + u");
        assert_eq!(p.g_circ()[1].to_string(), "y2 + x");
        assert_eq!(p.reduced_dim(), 2);
        assert_eq!(p.retained_kinds(), vec![RetainedKind::Free, RetainedKind::Algebraic]);
        assert_eq!(p.reduced_g_star()[0].order().names(), &["u", "x"]);
    }

    #[test]
    fn partitions_quintic_system() {
        let t = system(&["u", "x", "y"], &["u^2 + x^3 + y^5", "u^4 + x^2 - 1"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Explicit(vec![2])).unwrap();
        assert_eq!(p.g_star()[0].to_string(), "u^4 + x^2 - 1");
        assert_eq!(p.g_circ()[0].to_string(), "y^5 + x^3 + u^2");

        let id = whitney_partition(&t, &Elimination::Explicit(vec![])).unwrap();
        assert_eq!(id.g_star().len(), 2);
        assert!(id.g_circ().is_empty());
        assert_eq!(id.reduced_dim(), 3);
    }

    #[test]
    fn rejects_bad_eliminations() {
        let t = system(&["u", "x", "y"], &["u^2 + x^3 + y^5", "u^4 + x^2 - 1"]).unwrap();
        // eliminating x leaves the y-constraint depending on it
        let err = whitney_partition(&t, &Elimination::Explicit(vec![1])).unwrap_err();
        assert_eq!(err.code(), "NOT_ELIMINABLE");
        let err = whitney_partition(&t, &Elimination::Explicit(vec![0])).unwrap_err();
        assert_eq!(err.code(), "NOT_ELIMINABLE");
        let err = whitney_partition(&t, &Elimination::Explicit(vec![1, 2])).unwrap_err();
        assert_eq!(err, TriangularError::EmptyGStar);
    }

    #[test]
    fn auto_stops_at_whitney_bound() {
        // m = 1, n = 4: bound 3, so only y2 goes.
        let t = system(&["u", "x", "y1", "y2"], &["u^2*x^2 - 1", "y1 + u", "y2 + x"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert_eq!(p.eliminated(), &[3]);
        assert_eq!(p.reduced_dim(), 3);

        // m = 1, n = 3: already at the bound.
        let t = system(&["u", "x", "y"], &["u^2 + x^3 + y^5", "u^4 + x^2 - 1"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert!(p.eliminated().is_empty());
    }

    #[test]
    fn auto_respects_uniqueness_guard_and_cascade() {
        // m = 1, n = 5, bound 3. The top polynomial is quadratic in its
        // main variable, so nothing is eliminated.
        let t = system(
            &["u", "x", "a", "b", "c"],
            &["u^2 + x^2 - 1", "a - x", "b - a", "c^2 - b"],
        )
        .unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert!(p.eliminated().is_empty());

        // Cubic with constant initial passes. Once `c` is eliminated its
        // constraint no longer blocks `b`.
        let t = system(
            &["u", "x", "a", "b", "c"],
            &["u^2 + x^2 - 1", "a - x", "b - a", "c^3 + c - b"],
        )
        .unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert_eq!(p.eliminated(), &[3, 4]);

        // Even-degree owner of `b` stops the cascade after `c`.
        let t = system(
            &["u", "x", "a", "b", "c"],
            &["u^2 + x^2 - 1", "a - x", "b^2 - a", "c - u"],
        )
        .unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert_eq!(p.eliminated(), &[4]);

        // Non-constant initial blocks a cubic but not a linear owner.
        let t = system(&["u", "x", "a", "b"], &["u^2 + x^2 - 1", "a - x", "u*b^3 - 1"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert!(p.eliminated().is_empty());
        let t = system(&["u", "x", "a", "b"], &["u^2 + x^2 - 1", "a - x", "u*b - 1"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Auto).unwrap();
        assert_eq!(p.eliminated(), &[3]);
    }

    #[test]
    fn assemble_and_reduce_round_trip() {
        let t = system(&["u", "x", "y1", "y2"], &["u^2*x^2 - 1", "y1 + u", "y2 + x"]).unwrap();
        let p = whitney_partition(&t, &Elimination::Explicit(vec![2, 3])).unwrap();
        let z = p.assemble(&[1.0, 1.0], &[-1.0, -1.0]);
        assert_eq!(z, vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(p.reduce(&z), vec![1.0, 1.0]);
        assert_eq!(t.max_residual(&z), 0.0);
    }
}
