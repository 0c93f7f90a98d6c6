use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use whitney_descent::poly::{parse_polynomial, VariableOrder};
use whitney_descent::triangular::{
    linear_whitney, validate_triangular, whitney_partition, Elimination, TriangularError, TriangularSystem,
};

const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];

/// Text of a polynomial whose main variable is `NAMES[v]` with degree `deg`.
fn member(v: usize, deg: u32, init: (i32, Option<(usize, i32)>), tail: &[(i32, Vec<u32>)]) -> String {
    let (c0, lin) = init;
    let init = match lin {
        Some((j, c1)) if j < v => format!("({c0} + {c1}*{})", NAMES[j]),
        _ => format!("{c0}"),
    };
    let mut s = format!("{init}*{}^{deg}", NAMES[v]);
    for (c, exps) in tail {
        let mut term = format!("{c}");
        for (i, &e) in exps.iter().enumerate().take(v + 1) {
            let e = if i == v { e % deg } else { e };
            if e > 0 {
                term.push_str(&format!("*{}^{e}", NAMES[i]));
            }
        }
        s.push_str(&format!(" + {term}"));
    }
    s
}

type Spec = (
    usize,
    Vec<bool>,
    Vec<(u32, (i32, Option<(usize, i32)>), Vec<(i32, Vec<u32>)>)>,
);

fn system_strategy() -> impl Strategy<Value = Spec> {
    (2usize..=5).prop_flat_map(|n| {
        let nonzero = prop_oneof![-3i32..=-1, 1i32..=3];
        let member = (
            1u32..=3,
            (nonzero.clone(), proptest::option::of((0usize..5, -2i32..=2))),
            proptest::collection::vec((-3i32..=3, proptest::collection::vec(0u32..3, 5)), 0..3),
        );
        (
            Just(n),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(member, n),
        )
    })
}

fn build(spec: &Spec) -> Option<TriangularSystem> {
    let (n, algebraic, members) = spec;
    let order = VariableOrder::new(NAMES[..*n].iter().copied()).unwrap();
    let polys: Vec<_> = (0..*n)
        .filter(|&v| algebraic[v])
        .map(|v| {
            let (deg, init, tail) = &members[v];
            parse_polynomial(&member(v, *deg, *init, tail), &order).unwrap()
        })
        .collect();
    if polys.is_empty() {
        return None;
    }
    Some(validate_triangular(polys, &order).unwrap())
}

fn sorted_text(ps: &[whitney_descent::poly::Polynomial]) -> Vec<String> {
    let mut v: Vec<String> = ps.iter().map(ToString::to_string).collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_conservation(spec in system_strategy()) {
        let Some(system) = build(&spec) else { return Ok(()) };
        let n = system.num_vars();
        let k = system.num_constraints();
        let algebraic: Vec<usize> = system.algebraic_vars().iter().copied().collect();
        for mask in 0u32..(1 << algebraic.len()) {
            let chosen: Vec<usize> = algebraic.iter().enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &v)| v).collect();
            let set: BTreeSet<usize> = chosen.iter().copied().collect();
            // independent validity: retained members avoid every eliminated variable
            let retained_members: Vec<_> = system.polynomials().iter()
                .filter(|p| !set.contains(&p.main_variable().unwrap())).collect();
            let valid = !retained_members.is_empty()
                && retained_members.iter().all(|p| p.variables().is_disjoint(&set));
            match whitney_partition(&system, &Elimination::Explicit(chosen.clone())) {
                Ok(part) => {
                    prop_assert!(valid);
                    let mut both = part.g_star().to_vec();
                    both.extend_from_slice(part.g_circ());
                    prop_assert_eq!(sorted_text(&both), sorted_text(system.polynomials()));
                    prop_assert_eq!(part.g_star().len() + part.g_circ().len(), k);
                    prop_assert_eq!(part.retained().len() + part.eliminated().len(), n);
                    for (j, g) in part.g_circ().iter().enumerate() {
                        let yj = part.eliminated()[j];
                        prop_assert_eq!(g.main_variable(), Some(yj));
                        for &later in &part.eliminated()[j + 1..] {
                            prop_assert!(!g.involves(later));
                        }
                    }
                    prop_assert_eq!(part.reduced_g_star().len(), part.g_star().len());
                }
                Err(e) => {
                    prop_assert!(!valid, "rejected valid choice {:?}: {}", chosen, e);
                    let expected = matches!(e, TriangularError::NotEliminable { .. } | TriangularError::EmptyGStar);
                    prop_assert!(expected);
                }
            }
        }
        let auto = whitney_partition(&system, &Elimination::Auto).unwrap();
        let m = system.manifold_dim();
        prop_assert!(auto.reduced_dim() >= (2 * m + 1).min(n));
        for g in auto.g_circ() {
            let d = g.decompose().unwrap();
            prop_assert!(d.main_degree == 1 || (d.main_degree % 2 == 1 && d.initial.is_constant()));
        }
    }
}

#[test]
fn random_linear_systems_match_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (k, m) = (4, 1);
    let mut done = 0;
    while done < 100 {
        let a = DMatrix::from_fn(k, m + k, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
        let form = linear_whitney(&a, &b, m).expect("random matrices have full row rank");
        let u = DVector::from_fn(m, |_, _| rng.gen_range(-2.0..2.0));
        let z = form.solve(&u);
        assert!((&a * &z - &b).norm() <= 1e-9);

        // direct: fix the u columns, solve the square remainder by LU
        let u_cols = &form.columns[k..];
        let rest: Vec<usize> = (0..m + k).filter(|c| !u_cols.contains(c)).collect();
        let sq = DMatrix::from_fn(k, k, |i, j| a[(i, rest[j])]);
        let mut rhs = b.clone();
        for (j, &c) in u_cols.iter().enumerate() {
            rhs -= a.column(c) * u[j];
        }
        let direct = sq.lu().solve(&rhs).unwrap();
        for (j, &c) in rest.iter().enumerate() {
            assert!((z[c] - direct[j]).abs() <= 1e-9, "{} vs {}", z[c], direct[j]);
        }
        let (_, _, u_back) = form.split(&z);
        assert_eq!(u_back, u);
        done += 1;
    }
}

#[test]
fn two_stage_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (k, m) = (5, 2);
    let a = DMatrix::from_fn(k, m + k, |_, _| rng.gen_range(-1.0..1.0));
    let b = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
    let f = linear_whitney(&a, &b, m).unwrap();
    assert_eq!((f.y_dim(), f.x_dim(), f.u_dim()), (k - m - 1, m + 1, m));
    // A11 upper triangular
    for i in 0..f.y_dim() {
        for j in 0..i {
            assert_eq!(f.a11[(i, j)], 0.0);
        }
    }
    let u = DVector::from_vec(vec![0.3, -0.7]);
    let x = f.solve_x(&u);
    assert!((&f.a22 * &x + &f.a23 * &u - &f.b2).norm() <= 1e-12);
}

#[test]
fn eq1_partitions() {
    let o = VariableOrder::new(["u", "x", "y1", "y2"]).unwrap();
    let ps = ["u^2*x^2 - 1", "y1 + u", "y2 + x"]
        .iter()
        .map(|s| parse_polynomial(s, &o).unwrap())
        .collect();
    let t = validate_triangular(ps, &o).unwrap();
    let p = whitney_partition(&t, &Elimination::Explicit(vec![3, 2])).unwrap();
    assert_eq!(p.eliminated(), &[2, 3]);
    assert_eq!(p.g_star()[0].to_string(), "x^2*u^2 - 1");
    assert_eq!(p.reduced_dim(), 2);
    let err = whitney_partition(&t, &Elimination::Explicit(vec![0])).unwrap_err();
    assert_eq!(err.code(), "NOT_ELIMINABLE");
    let err = whitney_partition(&t, &Elimination::Explicit(vec![1, 2, 3])).unwrap_err();
    assert_eq!(err.code(), "EMPTY_GSTAR");
}
