//! End-to-end pipeline checks against the bundled fixture portfolios.

use std::path::PathBuf;

use curerate::absorption::absorb;
use curerate::chain::{classify, read_matrix_csv, to_blocks, Verdict};
use curerate::loan_tape::{ChainConfig, StateIndex};
use curerate::matrix::Matrix;
use curerate::scalar::Scalar;
use curerate::simulate::{simulate_paths, SimConfig, StartSpec};
use curerate::survival::{build_points, check_conditions, cure_rate, fit_weibull, FitMethod};
use curerate::synth::random_applicable_chain;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn credit_card_matrix() -> curerate::TransitionMatrix64 {
    let (matrix, warnings) = read_matrix_csv(&fixture("example1_A.csv"), None).unwrap();
    assert!(warnings.is_empty(), "fixture rows sum to one exactly");
    matrix
}

#[test]
fn credit_card_portfolio_full_pipeline() {
    let matrix = credit_card_matrix();
    assert_eq!(matrix.n_states(), 10);

    let classification = classify(&matrix, 0.0);
    assert_eq!(classification.verdict, Verdict::Applicable);

    let analysis = absorb(&to_blocks(&matrix)).unwrap();
    // spot values computed independently from the same matrix
    let f = analysis.fundamental();
    assert!((f[(1, 1)] - 1.186682005376).abs() < 1e-9);
    assert!((f[(7, 7)] - 1.529437861645).abs() < 1e-9);
    assert!((analysis.expected_time()[1] - 2.025926051400).abs() < 1e-9);

    let cfg = ChainConfig::<f64>::new(8);
    let points = build_points(&analysis, &cfg).unwrap();
    assert_eq!(points.points().len(), 10);
    // the forborne point sits at delta with the forborne cure probability
    assert_eq!(points.points()[1], (0.5, 0.37));
    // raw points are non-monotone here; the checker must say so
    assert_eq!(check_conditions(&points).len(), 1);

    let fit = fit_weibull(&points, FitMethod::LoglogOls, 0.0).unwrap();
    let rate = cure_rate(&fit, &cfg);
    assert!(rate > 0.0 && rate < 1.0);
    // fitted curve is strictly decreasing over the horizon
    let mut last = fit.survival_at(0.0);
    for i in 1..=80 {
        let s = fit.survival_at(i as f64 * 0.1);
        assert!(s < last);
        last = s;
    }
}

#[test]
fn state_owned_portfolio_is_diagnosed_cyclic() {
    let (matrix, _) = read_matrix_csv::<f64>(&fixture("example2_A.csv"), None).unwrap();
    let classification = classify(&matrix, 0.0);
    assert_eq!(classification.verdict, Verdict::Cyclic);
    assert_eq!(classification.offending_classes, vec![vec![3, 5, 6]]);
    // S5 is inside a closed class, so the fundamental matrix must not exist
    assert!(absorb(&to_blocks(&matrix)).is_err());
}

#[test]
fn transient_block_powers_vanish_for_applicable_chains() {
    let mut matrices = vec![credit_card_matrix()];
    for seed in 0..10 {
        matrices.push(random_applicable_chain(seed, 4));
    }
    for matrix in &matrices {
        let blocks = to_blocks(matrix);
        let mut power = blocks.within_transient.clone();
        for _ in 0..63 {
            power = power.mul(&blocks.within_transient);
        }
        assert!(
            power.max_norm() < 1e-6,
            "S^64 must vanish, got {}",
            power.max_norm()
        );
    }
}

#[test]
fn simulation_cross_checks_absorption_on_the_fixture() {
    let matrix = credit_card_matrix();
    let analysis = absorb(&to_blocks(&matrix)).unwrap();
    let sim = simulate_paths(
        &matrix,
        &SimConfig {
            seed: 42,
            n_paths: 100_000,
            start: StartSpec::State(StateIndex::past_due(3)),
            ..Default::default()
        },
    )
    .unwrap();
    let stats = &sim.per_start[0];
    let analytic = analysis.cure_probability(StateIndex::past_due(3)).unwrap();
    assert!(
        (stats.cured_fraction - analytic).abs() <= 3.0 * stats.se_cured_fraction,
        "simulated {} vs analytic {analytic}",
        stats.cured_fraction
    );
}

#[test]
fn single_precision_pipeline_smoke() {
    let (matrix, _) = read_matrix_csv::<f32>(&fixture("example1_A.csv"), None).unwrap();
    let classification = classify(&matrix, 0.0f32);
    assert_eq!(classification.verdict, Verdict::Applicable);
    let analysis = absorb(&to_blocks(&matrix)).unwrap();
    assert!((analysis.fundamental()[(1, 1)] - 1.186682).abs() < 1e-3);

    let cfg = ChainConfig::<f32>::new(8);
    let points = build_points(&analysis, &cfg).unwrap();
    let fit = fit_weibull(&points, FitMethod::LoglogOls, 0.0f32).unwrap();
    let rate = cure_rate(&fit, &cfg);
    assert!(rate > 0.0 && rate < 1.0);
    // single precision tracks the double-precision fit loosely
    assert!((fit.k - 0.7377).abs() < 1e-2);
}

#[test]
fn fundamental_resolvent_identity_on_random_chains() {
    for seed in 100..110 {
        let matrix: curerate::TransitionMatrix64 = random_applicable_chain(seed, 5);
        let blocks = to_blocks(&matrix);
        let analysis = absorb(&blocks).unwrap();
        let f = analysis.fundamental();
        let n = f.n_rows();
        let identity_gap = f
            .sub(&blocks.within_transient.mul(f))
            .sub(&Matrix::identity(n))
            .max_norm();
        assert!(identity_gap < 1e-9, "seed {seed}: {identity_gap}");
        // residual of the inverse itself
        let residual = Matrix::identity(n)
            .sub(&blocks.within_transient)
            .mul(f)
            .sub(&Matrix::identity(n))
            .max_norm();
        assert!(residual < 1e-10, "seed {seed}: residual {residual}");
        let _ = residual.to_f64_lossy();
    }
}

