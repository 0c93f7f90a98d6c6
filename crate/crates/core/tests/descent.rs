use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use whitney_descent::descent::{
    check_convergence, descend, descend_with, random_unit_direction, DescentConfig, DescentProblem, PollEvent,
};
use whitney_descent::geometry::{ConstraintSet, ReducedPoint};
use whitney_descent::poly::{parse_polynomial, VariableOrder};
use whitney_descent::triangular::{validate_triangular, whitney_partition, Elimination, WhitneyPartition};

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

fn reciprocal() -> WhitneyPartition {
    partition(
        &["u", "x", "y1", "y2"],
        &["u^2*x^2 - 1", "y1 + u", "y2 + x"],
        &["y1", "y2"],
    )
}

/// Minimum of y over the quintic curve by sampling both sheets in u.
fn quintic_oracle() -> f64 {
    let n = 1_000_000;
    let mut best = f64::INFINITY;
    for i in 0..n {
        let u = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let r = (1.0 - u.powi(4)).max(0.0).sqrt();
        for x in [r, -r] {
            let s: f64 = u * u + x * x * x;
            let y = -(s.signum() * s.abs().powf(0.2));
            best = best.min(y);
        }
    }
    best
}

fn reciprocal_oracle() -> f64 {
    let n = 1_000_000;
    (1..=n)
        .map(|i| {
            let u = 10.0 * i as f64 / n as f64;
            let x = 1.0 / u;
            (x - 2.0).powi(2) + (u - 2.0).powi(2)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `(0, 1)` is a critical point where the pulled-back objective only drops
/// like `0.2 α²`, which never beats `ρ(α) = α²`; start off it.
fn quintic_problem() -> DescentProblem<impl Fn(&[f64]) -> f64> {
    let u: f64 = 0.3;
    DescentProblem {
        partition: quintic(),
        objective: |z: &[f64]| z[2],
        start: ReducedPoint(vec![u, (1.0 - u.powi(4)).sqrt()]),
    }
}

#[test]
fn critical_start_with_unit_forcing_cannot_move() {
    let problem = DescentProblem {
        partition: quintic(),
        objective: |z: &[f64]| z[2],
        start: ReducedPoint(vec![0.0, 1.0]),
    };
    let trace = descend(&problem, &quintic_cfg(7)).unwrap();
    assert!(trace.records.iter().all(|r| r.event != PollEvent::Success));
    // the default forcing constant is small enough to leave it
    let cfg = DescentConfig {
        c_forcing: None,
        ..quintic_cfg(7)
    };
    let trace = descend(&problem, &cfg).unwrap();
    assert!((trace.final_value - quintic_oracle()).abs() <= 1e-3);
}

fn quintic_cfg(seed: u64) -> DescentConfig {
    DescentConfig {
        alpha0: 0.25,
        c_forcing: Some(1.0),
        max_iters: 5000,
        seed,
        ..DescentConfig::default()
    }
}

#[test]
fn quintic_reaches_sweep_minimum() {
    let oracle = quintic_oracle();
    let trace = descend(&quintic_problem(), &quintic_cfg(7)).unwrap();
    assert!(
        (trace.final_value - oracle).abs() <= 1e-3,
        "{} vs {}",
        trace.final_value,
        oracle
    );
    assert!(trace.records.len() <= 5000);
    assert!(check_convergence(&trace, 500));
    assert!(trace.converged);
}

#[test]
fn reciprocal_branch_reaches_sweep_minimum() {
    let oracle = reciprocal_oracle();
    let problem = DescentProblem {
        partition: reciprocal(),
        objective: |z: &[f64]| (z[1] - 2.0).powi(2) + (z[0] - 2.0).powi(2),
        start: ReducedPoint(vec![0.5, 2.0]),
    };
    let trace = descend(
        &problem,
        &DescentConfig {
            seed: 3,
            ..DescentConfig::default()
        },
    )
    .unwrap();
    assert!(
        (trace.final_value - oracle).abs() <= 1e-3,
        "{} vs {}",
        trace.final_value,
        oracle
    );
    for r in &trace.records {
        assert!(r.point.0[0] > 0.0);
        assert!(problem.partition.system().max_residual(&r.ambient.0) <= 1e-9);
    }
}

#[test]
fn direction_uniformity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mut sums = [0.0; 3];
    for _ in 0..n {
        let d = random_unit_direction(&mut rng, 3);
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-12);
        for (s, x) in sums.iter_mut().zip(&d) {
            *s += x;
        }
    }
    // each coordinate of a uniform point on S^2 has variance 1/3
    let sigma = (1.0 / 3.0 / n as f64).sqrt();
    for s in sums {
        assert!((s / n as f64).abs() <= 3.0 * sigma);
    }
}

#[test]
fn traces_are_deterministic() {
    let problem = quintic_problem();
    let cfg = DescentConfig {
        max_iters: 300,
        ..quintic_cfg(19)
    };
    assert_eq!(descend(&problem, &cfg).unwrap(), descend(&problem, &cfg).unwrap());
}

#[test]
fn observer_sees_every_record() {
    let problem = quintic_problem();
    let cfg = DescentConfig {
        max_iters: 200,
        ..quintic_cfg(5)
    };
    let mut seen = Vec::new();
    let trace = descend_with(&problem, &cfg, |r| seen.push(r.clone())).unwrap();
    assert_eq!(seen, trace.records);
}

fn check_trace_laws(problem: &DescentProblem<impl Fn(&[f64]) -> f64>, cfg: &DescentConfig) {
    let trace = descend(problem, cfg).unwrap();
    let constraints = ConstraintSet::new(problem.partition.reduced_g_star());
    let theta = cfg.theta;
    let mut f_prev = trace.start_value;
    let mut p_prev = trace.start.clone();
    for (n, r) in trace.records.iter().enumerate() {
        assert!(r.alpha > 0.0 && r.alpha <= cfg.alpha_max);
        assert!(constraints.max_residual(r.point.as_slice()) <= cfg.projection.residual_tol);
        match r.event {
            PollEvent::Success => {
                assert!(r.f < f_prev - trace.forcing_constant * r.alpha * r.alpha);
            }
            PollEvent::Unsuccessful => {
                assert_eq!(r.f, f_prev);
                assert_eq!(r.point, p_prev);
            }
            PollEvent::Rebase => {
                assert_eq!(r.point, p_prev);
                assert_eq!(r.base, r.point);
                assert!(r.tangent.iter().all(|&w| w == 0.0));
            }
        }
        let next = trace.records.get(n + 1).map_or(trace.final_alpha, |s| s.alpha);
        let expected = match r.event {
            PollEvent::Success => (cfg.gamma * r.alpha).min(cfg.alpha_max),
            _ => theta * r.alpha,
        };
        assert_eq!(next, expected);
        f_prev = r.f;
        p_prev = r.point.clone();
    }
    assert_eq!(trace.final_value, f_prev);
}

#[test]
fn rebases_happen_and_reset_the_chart() {
    // a large alpha cap lets w outgrow the oracle radius
    let cfg = DescentConfig {
        alpha0: 0.4,
        alpha_max: f64::INFINITY,
        max_iters: 400,
        c_forcing: None,
        ..quintic_cfg(2)
    };
    let trace = descend(&quintic_problem(), &cfg).unwrap();
    assert!(trace.records.iter().any(|r| r.event == PollEvent::Rebase));
    check_trace_laws(&quintic_problem(), &cfg);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_law_monotonicity_and_feasibility(seed in any::<u64>(), alpha0 in 0.01f64..0.5, cap in 0.5f64..4.0) {
        let cfg = DescentConfig {
            alpha0,
            alpha_max: cap,
            max_iters: 150,
            c_forcing: None,
            ..quintic_cfg(seed)
        };
        check_trace_laws(&quintic_problem(), &cfg);
    }
}
