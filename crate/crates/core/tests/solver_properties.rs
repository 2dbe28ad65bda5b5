use std::sync::Arc;

use fredholm::catalog::{default_guess, exact_discrete_solution, problem, ProblemId};
use fredholm::solver::NewtonFailure;
use fredholm::{
    assemble, jacobian, newton_solve, CellVector, Function1D, InitialGuess, NewtonConfig, Nonlinearity, ProblemSpec,
    SingularFactor, SmoothFactor,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn jacobian_matches_central_differences(x in prop::collection::vec(-2.0f64..2.0, 8), alpha in 0.1f64..0.9) {
        // cubic N and a non-constant smooth factor exercise every term
        let nl = Nonlinearity::new("cube", |u| u * u * u, |u| 3.0 * u * u, |u| 6.0 * u).unwrap();
        let p = ProblemSpec::new(
            0.0,
            1.0,
            SingularFactor::power_distance(alpha).unwrap(),
            SmoothFactor::new(|s, t| 1.0 + s * t),
            nl,
            Arc::new(Function1D::new(|s: f64| s.sin())),
        )
        .unwrap();
        let g = p.grid(8).unwrap();
        let sys = assemble(&p, &g).unwrap();
        let j = jacobian(&sys, &CellVector::new(g, x.clone()).unwrap()).unwrap();
        for col in 0..8 {
            let step = 1e-6 * x[col].abs().max(1.0);
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[col] += step;
            minus[col] -= step;
            let fp = sys.residual(&CellVector::new(g, plus).unwrap()).unwrap();
            let fm = sys.residual(&CellVector::new(g, minus).unwrap()).unwrap();
            for row in 0..8 {
                let fd = (fp[row] - fm[row]) / (2.0 * step);
                prop_assert!((fd - j[(row, col)]).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    for id in ProblemId::ALL {
        let p = problem(id);
        let g = p.grid(12).unwrap();
        let cfg = NewtonConfig {
            guess: default_guess(id),
            ..Default::default()
        };
        let first = newton_solve(&assemble(&p, &g).unwrap(), &cfg, None).unwrap();
        let second = newton_solve(&assemble(&p, &g).unwrap(), &cfg, None).unwrap();
        assert_eq!(first, second, "{id}");
    }
}

#[test]
fn exact_roots_are_fixed_points() {
    for id in [ProblemId::Example1SinPi, ProblemId::Example1Sin2Pi, ProblemId::Example2] {
        let p = problem(id);
        for n in [10, 100] {
            let g = p.grid(n).unwrap();
            let root = exact_discrete_solution(id, &g).unwrap();
            let cfg = NewtonConfig {
                guess: InitialGuess::User(root.clone()),
                ..Default::default()
            };
            let rep = newton_solve(&assemble(&p, &g).unwrap(), &cfg, Some(&root)).unwrap();
            assert!(rep.step_norms[1] <= 1e-13, "{id} n={n}: {}", rep.step_norms[1]);
            assert!(rep.converged);
        }
    }
}

#[test]
fn non_convergence_is_reported_not_raised() {
    let id = ProblemId::Example1Sin2Pi;
    let p = problem(id);
    let g = p.grid(10).unwrap();
    let cfg = NewtonConfig {
        guess: default_guess(id),
        max_iter: 16,
        ..Default::default()
    };
    let rep = newton_solve(&assemble(&p, &g).unwrap(), &cfg, Some(&CellVector::constant(g, 1.0))).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.failure, Some(NewtonFailure::MaxIterations));
    assert_eq!(rep.iterates.len(), 17);
    assert_eq!(rep.relative_errors.as_ref().unwrap().len(), 17);
}

#[test]
fn damped_iteration_stays_finite() {
    let id = ProblemId::Example1SinPi;
    let p = problem(id);
    let g = p.grid(10).unwrap();
    let cfg = NewtonConfig {
        guess: InitialGuess::Constant(0.5),
        damping: true,
        ..Default::default()
    };
    let rep = newton_solve(&assemble(&p, &g).unwrap(), &cfg, None).unwrap();
    assert!(rep.residual_norms.iter().all(|r| r.is_finite()));
}

#[test]
fn guess_is_validated_against_the_interval() {
    let id = ProblemId::Example1SinPi;
    let p = problem(id);
    let g = p.grid(10).unwrap();
    let other = CellVector::zeros(fredholm::UniformGrid::new(0.0, 2.0, 10).unwrap());
    let cfg = NewtonConfig {
        guess: InitialGuess::User(other),
        ..Default::default()
    };
    assert!(newton_solve(&assemble(&p, &g).unwrap(), &cfg, None).is_err());
}
