use cpe_core::erm::{
    empirical_risk_minimizer, exact_excess_risk, exact_tail_probability, sample, true_risk_minimizer_with,
    DiscreteProblem, FeatureMap, FitOptions, LabeledSample, SqMode,
};
use cpe_core::harness::{reference_log_problem, run_convergence, ConvergenceConfig, REFERENCE_LOG_WEIGHTS};

#[test]
fn large_logistic_sample_recovers_generating_weights() {
    let problem = reference_log_problem();
    let s = sample(&problem, 100_000, 7).unwrap();
    let m = empirical_risk_minimizer(&s, "log", FeatureMap::Affine).unwrap();
    for (w, truth) in m.weights.iter().zip(REFERENCE_LOG_WEIGHTS) {
        assert!((w - truth).abs() < 0.05, "{:?}", m.weights);
    }
}

#[test]
fn exact_proportion_sample_has_no_tail() {
    // 2 eta - 1 = x / 2 is affine, so the squared loss is well specified
    let problem = DiscreteProblem::uniform_1d(&[-1.0, 0.0, 1.0], &[0.25, 0.5, 0.75], FeatureMap::Affine).unwrap();
    let s = LabeledSample::from_counts(&problem, &[1, 2, 3], &[3, 2, 1]).unwrap();
    let m = empirical_risk_minimizer(&s, "sq", FeatureMap::Affine).unwrap();
    for eps in [1e-6, 0.01, 0.5] {
        assert_eq!(exact_tail_probability(&problem, &m, eps).unwrap(), 0.0);
    }
    assert!(exact_excess_risk(&problem, &m).unwrap() < 1e-20);
}

#[test]
fn constrained_squared_fit_stays_in_the_box() {
    let problem = DiscreteProblem::uniform_1d(&[-1.0, 0.0, 3.0], &[0.0, 1.0 / 3.0, 1.0], FeatureMap::Affine).unwrap();
    let opts = FitOptions { sq_mode: SqMode::Constrained };
    let m = true_risk_minimizer_with(&problem, "sq", opts).unwrap();
    assert_eq!(m.sq_mode, SqMode::Constrained);
    for pt in problem.support() {
        assert!(m.predict(&pt.x).unwrap().abs() <= 1.0 + 1e-10);
    }
    // the box constraint is active at x = 3 and changes the fit
    let free = true_risk_minimizer_with(&problem, "sq", FitOptions::default()).unwrap();
    assert!((m.weights[0] - free.weights[0]).abs() > 1e-3);
}

#[test]
fn larger_samples_shrink_the_l1_error() {
    let cfg = ConvergenceConfig {
        problem: reference_log_problem(),
        loss_name: "log".into(),
        sample_sizes: vec![100, 10_000],
        repetitions: 200,
        epsilons: vec![0.1],
        root_seed: 42,
        misspecified: false,
    };
    let r = run_convergence(&cfg).unwrap();
    assert!(r.sizes[1].mean_l1 < r.sizes[0].mean_l1);
    assert_eq!(r.markov_violations, 0);
    assert_eq!(r.invariant_violations(), 0);
    let slope = r.l1_log_log_slope.unwrap();
    assert!(slope < 0.0, "{slope}");
}
