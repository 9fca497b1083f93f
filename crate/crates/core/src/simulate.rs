//! Monte Carlo verification of the absorption analysis.
//!
//! Each path gets its own counter-derived random stream: the generator is
//! seeded with the run seed and switched to stream `path_index`, so the
//! sequence a path sees depends only on `(seed, path_index)`. All
//! aggregation happens over integer accumulators. Together these make the
//! result bit-identical across runs, path orderings and worker counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::absorption::AbsorptionResult;
use crate::chain::TransitionMatrix;
use crate::diagnostics::{Warning, WarningCode};
use crate::loan_tape::StateIndex;
use crate::matrix::{vec_mul, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("start state {state} out of range for {n_states} states")]
    StartOutOfRange { state: StateIndex, n_states: usize },
    #[error("composition has {got} entries, the chain has {expected} states")]
    CompositionLength { got: usize, expected: usize },
    #[error("composition must be non-negative with positive total mass")]
    BadComposition,
    #[error("n_paths must be at least 1")]
    NoPaths,
}

/// Where simulated paths begin.
#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    /// `n_paths` from every transient state; the oracle layout.
    AllTransient,
    /// All paths from one state.
    State(StateIndex),
    /// Start states drawn from a (not necessarily normalized) composition
    /// over all chain states.
    Composition(Vec<f64>),
}

impl Default for StartSpec {
    fn default() -> Self {
        StartSpec::AllTransient
    }
}

/// Simulation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: u64,
    pub max_steps: usize,
    pub start: StartSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            n_paths: 100_000,
            max_steps: 1_000,
            start: StartSpec::default(),
        }
    }
}

/// Estimates for paths launched from one start state.
#[derive(Debug, Clone, PartialEq)]
pub struct StartStats {
    pub start_state: usize,
    pub paths: u64,
    pub cured: u64,
    pub lost: u64,
    pub unabsorbed: u64,
    pub cured_fraction: f64,
    pub lost_fraction: f64,
    pub unabsorbed_fraction: f64,
    pub se_cured_fraction: f64,
    pub se_lost_fraction: f64,
    /// Mean transitions to absorption over absorbed paths; `None` when no
    /// path absorbed.
    pub mean_steps: Option<f64>,
    pub se_mean_steps: Option<f64>,
    /// Mean visits per transient state over absorbed paths (fundamental-
    /// matrix row estimate).
    pub mean_visits: Vec<f64>,
    pub se_mean_visits: Vec<f64>,
}

/// Aggregated simulation output.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub seed: u64,
    pub n_paths: u64,
    pub max_steps: usize,
    pub per_start: Vec<StartStats>,
    pub warnings: Vec<Warning>,
}

/// One step of one path on an optional trace sink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub path_id: u64,
    pub step: usize,
    pub state: usize,
}

#[derive(Debug, Clone, Default)]
struct PathAccumulator {
    paths: u64,
    cured: u64,
    lost: u64,
    unabsorbed: u64,
    steps_sum: u64,
    steps_sq_sum: u128,
    visits_sum: Vec<u64>,
    visits_sq_sum: Vec<u128>,
}

impl PathAccumulator {
    fn new(n_transient: usize) -> Self {
        PathAccumulator {
            visits_sum: vec![0; n_transient],
            visits_sq_sum: vec![0; n_transient],
            ..Default::default()
        }
    }

    fn merge(mut self, other: PathAccumulator) -> PathAccumulator {
        self.paths += other.paths;
        self.cured += other.cured;
        self.lost += other.lost;
        self.unabsorbed += other.unabsorbed;
        self.steps_sum += other.steps_sum;
        self.steps_sq_sum += other.steps_sq_sum;
        for (a, b) in self.visits_sum.iter_mut().zip(&other.visits_sum) {
            *a += b;
        }
        for (a, b) in self.visits_sq_sum.iter_mut().zip(&other.visits_sq_sum) {
            *a += b;
        }
        self
    }
}

enum PathOutcome {
    Cured,
    Lost,
    Unabsorbed,
}

struct PathSummary {
    outcome: PathOutcome,
    steps: u64,
    visits: Vec<u32>,
}

/// Cumulative row distributions in f64 for inverse-CDF sampling.
fn cumulative_rows<T: Scalar>(matrix: &TransitionMatrix<T>) -> Vec<Vec<f64>> {
    matrix
        .entries()
        .rows_iter()
        .map(|row| {
            let mut acc = 0.0;
            row.iter()
                .map(|p| {
                    acc += p.to_f64_lossy();
                    acc
                })
                .collect()
        })
        .collect()
}

fn sample_index(cumulative: &[f64], u: f64) -> usize {
    match cumulative.iter().position(|&c| u < c) {
        Some(idx) => idx,
        // guard against the cumulative sum rounding below 1
        None => cumulative.len() - 1,
    }
}

fn walk_path(
    cumulative: &[Vec<f64>],
    n_transient: usize,
    start: usize,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<TraceRecord>>,
    path_id: u64,
) -> PathSummary {
    let mut visits = vec![0u32; n_transient];
    if start <= 1 {
        // starting in an absorbing state: resolved with zero transitions
        return PathSummary {
            outcome: if start == 0 { PathOutcome::Cured } else { PathOutcome::Lost },
            steps: 0,
            visits,
        };
    }
    let mut state = start;
    let mut steps = 0u64;
    if let Some(t) = trace.as_deref_mut() {
        t.push(TraceRecord { path_id, step: 0, state });
    }
    loop {
        visits[state - 2] += 1;
        steps += 1;
        let u: f64 = rng.random();
        let next = sample_index(&cumulative[state], u);
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRecord { path_id, step: steps as usize, state: next });
        }
        if next <= 1 {
            return PathSummary {
                outcome: if next == 0 { PathOutcome::Cured } else { PathOutcome::Lost },
                steps,
                visits,
            };
        }
        state = next;
        if steps as usize >= max_steps {
            return PathSummary {
                outcome: PathOutcome::Unabsorbed,
                steps,
                visits,
            };
        }
    }
}

fn record(acc: &mut PathAccumulator, summary: &PathSummary) {
    acc.paths += 1;
    match summary.outcome {
        PathOutcome::Cured => acc.cured += 1,
        PathOutcome::Lost => acc.lost += 1,
        PathOutcome::Unabsorbed => {
            acc.unabsorbed += 1;
            return; // censored paths are excluded from the step estimators
        }
    }
    acc.steps_sum += summary.steps;
    acc.steps_sq_sum += (summary.steps as u128) * (summary.steps as u128);
    for (i, &v) in summary.visits.iter().enumerate() {
        acc.visits_sum[i] += v as u64;
        acc.visits_sq_sum[i] += (v as u128) * (v as u128);
    }
}

fn finalize(start_state: usize, acc: &PathAccumulator) -> StartStats {
    let n = acc.paths;
    let n_f = n as f64;
    let fraction = |c: u64| c as f64 / n_f;
    let se_fraction = |p: f64| if n > 1 { (p * (1.0 - p) / n_f).sqrt() } else { 0.0 };
    let cured_fraction = fraction(acc.cured);
    let lost_fraction = fraction(acc.lost);

    let absorbed = acc.cured + acc.lost;
    let (mean_steps, se_mean_steps) = if absorbed > 0 {
        let mean = acc.steps_sum as f64 / absorbed as f64;
        let se = sample_se(acc.steps_sum as f64, acc.steps_sq_sum as f64, absorbed);
        (Some(mean), Some(se))
    } else {
        (None, None)
    };
    let mut mean_visits = Vec::with_capacity(acc.visits_sum.len());
    let mut se_mean_visits = Vec::with_capacity(acc.visits_sum.len());
    for (&sum, &sq) in acc.visits_sum.iter().zip(&acc.visits_sq_sum) {
        if absorbed > 0 {
            mean_visits.push(sum as f64 / absorbed as f64);
            se_mean_visits.push(sample_se(sum as f64, sq as f64, absorbed));
        } else {
            mean_visits.push(0.0);
            se_mean_visits.push(0.0);
        }
    }

    StartStats {
        start_state,
        paths: n,
        cured: acc.cured,
        lost: acc.lost,
        unabsorbed: acc.unabsorbed,
        cured_fraction,
        lost_fraction,
        unabsorbed_fraction: fraction(acc.unabsorbed),
        se_cured_fraction: se_fraction(cured_fraction),
        se_lost_fraction: se_fraction(lost_fraction),
        mean_steps,
        se_mean_steps,
        mean_visits,
        se_mean_visits,
    }
}

fn sample_se(sum: f64, sq_sum: f64, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let n_f = n as f64;
    let mean = sum / n_f;
    let variance = ((sq_sum - n_f * mean * mean) / (n_f - 1.0)).max(0.0);
    (variance / n_f).sqrt()
}

/// Runs the path simulation described by the config.
pub fn simulate_paths<T: Scalar>(
    matrix: &TransitionMatrix<T>,
    cfg: &SimConfig,
) -> Result<SimResult, SimError> {
    simulate_paths_traced(matrix, cfg, None)
}

/// Like [`simulate_paths`], optionally filling a per-path trace. Tracing
/// forces the serial path, so it is meant for small debugging runs.
pub fn simulate_paths_traced<T: Scalar>(
    matrix: &TransitionMatrix<T>,
    cfg: &SimConfig,
    mut trace: Option<&mut Vec<TraceRecord>>,
) -> Result<SimResult, SimError> {
    if cfg.n_paths == 0 {
        return Err(SimError::NoPaths);
    }
    let n_states = matrix.n_states();
    let n_transient = n_states - 2;
    let cumulative = cumulative_rows(matrix);

    // (bucket start state, stream offset) per launch group
    let launches: Vec<usize> = match &cfg.start {
        StartSpec::AllTransient => (2..n_states).collect(),
        StartSpec::State(state) => {
            if state.index() >= n_states {
                return Err(SimError::StartOutOfRange {
                    state: *state,
                    n_states,
                });
            }
            vec![state.index()]
        }
        StartSpec::Composition(weights) => {
            if weights.len() != n_states {
                return Err(SimError::CompositionLength {
                    got: weights.len(),
                    expected: n_states,
                });
            }
            if weights.iter().any(|&w| !(w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                return Err(SimError::BadComposition);
            }
            Vec::new() // handled separately below
        }
    };

    let mut per_start: Vec<StartStats> = Vec::new();
    if let StartSpec::Composition(weights) = &cfg.start {
        // one path per stream; the first draw picks the start state
        let total: f64 = weights.iter().sum();
        let mut start_cdf = Vec::with_capacity(weights.len());
        let mut acc_w = 0.0;
        for &w in weights {
            acc_w += w / total;
            start_cdf.push(acc_w);
        }
        let run_one = |path: u64, accs: &mut Vec<PathAccumulator>, trace: Option<&mut Vec<TraceRecord>>| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path);
            let u: f64 = rng.random();
            let start = sample_index(&start_cdf, u);
            let summary = walk_path(&cumulative, n_transient, start, cfg.max_steps, &mut rng, trace, path);
            record(&mut accs[start], &summary);
        };
        let accs = if let Some(t) = trace.as_deref_mut() {
            let mut accs = vec![PathAccumulator::new(n_transient); n_states];
            for path in 0..cfg.n_paths {
                run_one(path, &mut accs, Some(t));
            }
            accs
        } else {
            (0..cfg.n_paths)
                .into_par_iter()
                .fold(
                    || vec![PathAccumulator::new(n_transient); n_states],
                    |mut accs, path| {
                        run_one(path, &mut accs, None);
                        accs
                    },
                )
                .reduce(
                    || vec![PathAccumulator::new(n_transient); n_states],
                    |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
                )
        };
        for (state, acc) in accs.iter().enumerate() {
            if acc.paths > 0 {
                per_start.push(finalize(state, acc));
            }
        }
    } else {
        for (slot, &start) in launches.iter().enumerate() {
            let stream_base = slot as u64 * cfg.n_paths;
            let run_one = |path: u64, trace: Option<&mut Vec<TraceRecord>>| {
                let path_id = stream_base + path;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(path_id);
                walk_path(&cumulative, n_transient, start, cfg.max_steps, &mut rng, trace, path_id)
            };
            let acc = if let Some(t) = trace.as_deref_mut() {
                let mut acc = PathAccumulator::new(n_transient);
                for path in 0..cfg.n_paths {
                    let summary = run_one(path, Some(t));
                    record(&mut acc, &summary);
                }
                acc
            } else {
                (0..cfg.n_paths)
                    .into_par_iter()
                    .fold(
                        || PathAccumulator::new(n_transient),
                        |mut acc, path| {
                            let summary = run_one(path, None);
                            record(&mut acc, &summary);
                            acc
                        },
                    )
                    .reduce(|| PathAccumulator::new(n_transient), PathAccumulator::merge)
            };
            per_start.push(finalize(start, &acc));
        }
    }

    let mut warnings = Vec::new();
    let total_unabsorbed: u64 = per_start.iter().map(|s| s.unabsorbed).sum();
    if total_unabsorbed > 0 {
        warnings.push(Warning::new(
            WarningCode::UnabsorbedPaths,
            format!(
                "{total_unabsorbed} paths were still unabsorbed after {} steps; the chain may be near-cyclic",
                cfg.max_steps
            ),
        ));
    }

    Ok(SimResult {
        seed: cfg.seed,
        n_paths: cfg.n_paths,
        max_steps: cfg.max_steps,
        per_start,
        warnings,
    })
}

/// Deterministic state occupancy per year.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyProjection<T> {
    /// `occupancy[y]` is `composition * A^(y+1)`.
    pub per_year: Vec<Vec<T>>,
    /// `composition * A_infinity`, when the absorption analysis is
    /// available.
    pub limit: Option<Vec<T>>,
}

/// Propagates a portfolio composition through the chain year by year.
///
/// The limit distribution uses the absorption result when supplied: the
/// limit matrix has unit rows for the absorbing states and the absorption
/// probabilities (padded with zeros) for transient rows.
pub fn simulate_portfolio<T: Scalar>(
    matrix: &TransitionMatrix<T>,
    composition: &[T],
    horizon_years: usize,
    absorption: Option<&AbsorptionResult<T>>,
) -> Result<OccupancyProjection<T>, SimError> {
    let n = matrix.n_states();
    if composition.len() != n {
        return Err(SimError::CompositionLength {
            got: composition.len(),
            expected: n,
        });
    }
    if composition.iter().any(|&w| w < T::zero()) {
        return Err(SimError::BadComposition);
    }

    let mut per_year = Vec::with_capacity(horizon_years);
    let mut current = composition.to_vec();
    for _ in 0..horizon_years {
        current = vec_mul(&current, matrix.entries());
        per_year.push(current.clone());
    }

    let limit = absorption.map(|result| {
        let mut limit_matrix = Matrix::<T>::zeros(n, n);
        limit_matrix[(0, 0)] = T::one();
        limit_matrix[(1, 1)] = T::one();
        for i in 0..result.n_transient() {
            limit_matrix[(i + 2, 0)] = result.absorbing_probabilities()[(i, 0)];
            limit_matrix[(i + 2, 1)] = result.absorbing_probabilities()[(i, 1)];
        }
        vec_mul(composition, &limit_matrix)
    });

    Ok(OccupancyProjection { per_year, limit })
}
