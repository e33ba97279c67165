//! Imperfect-selector simulation.
//!
//! A selector with accuracy `a` picks the per-instance best algorithm on a
//! fraction `a` of the instances and applies a [`WrongPick`] policy on the
//! rest. [`enumerate_error_cases`] lists every placement of a fixed number of
//! errors; [`run_trials`] samples placements with a seeded generator and
//! [`sweep`] turns the samples into score/variance curves over a grid of
//! accuracies.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score_model::{argmax, argmin, ScoreMatrix, SelectionVector};

pub const DEFAULT_TRIALS: usize = 255;

/// Largest instance count accepted by [`enumerate_error_cases`].
pub const ENUMERATION_LIMIT: usize = 20;

/// How the number of wrong picks per trial is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    /// Exactly `round(accuracy * N)` instances get the best pick.
    #[default]
    ExactCount,
    /// Each instance independently gets the best pick with probability `accuracy`.
    Bernoulli,
}

/// What the selector chooses when it errs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrongPick {
    /// Row minimum.
    #[default]
    Worst,
    /// Uniform among the non-best algorithms.
    RandomOther,
    /// Lowest-scoring algorithm other than the row best.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub accuracy: f64,
    pub error_model: ErrorModel,
    pub wrong_pick: WrongPick,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            accuracy: 1.0,
            error_model: ErrorModel::default(),
            wrong_pick: WrongPick::default(),
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

impl SelectorConfig {
    pub fn with_accuracy(accuracy: f64) -> Self {
        Self {
            accuracy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::InvalidConfig(format!(
                "accuracy {} outside [0, 1]",
                self.accuracy
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// One simulated selection and its mean score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub selection: SelectionVector,
    pub mean_score: f64,
}

impl TrialOutcome {
    fn from_selection(m: &ScoreMatrix, choices: Vec<usize>) -> Self {
        let selection = SelectionVector(choices);
        let mean_score = selection.mean_score(m);
        Self {
            selection,
            mean_score,
        }
    }
}

/// Population variance, `(1/N) * sum |mean - x|^2`.
pub fn variance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (mean - v).powi(2)).sum::<f64>() / n)
}

/// Number of correctly selected instances under the exact-count model,
/// `accuracy * rows` rounded half up.
pub fn exact_correct_count(accuracy: f64, rows: usize) -> usize {
    // the epsilon absorbs representation error in grid accuracies such as 0.7
    let scaled = accuracy * rows as f64 + 0.5 + 1e-9;
    (scaled.floor() as usize).min(rows)
}

/// Best and wrong column for each row, restricted to `columns`.
struct RowPicks {
    best: Vec<usize>,
    wrong: Vec<usize>,
    others: Vec<Vec<usize>>,
}

impl RowPicks {
    fn new(m: &ScoreMatrix, columns: &[usize], policy: WrongPick) -> Self {
        let mut best = Vec::with_capacity(m.rows());
        let mut wrong = Vec::with_capacity(m.rows());
        let mut others = Vec::with_capacity(m.rows());
        for i in 0..m.rows() {
            let row = m.row(i);
            let b = argmax(row, columns.iter().copied());
            let rest: Vec<usize> = columns.iter().copied().filter(|&j| j != b).collect();
            let w = match policy {
                WrongPick::Worst => argmin(row, columns.iter().copied()),
                WrongPick::Adversarial | WrongPick::RandomOther if rest.is_empty() => b,
                WrongPick::Adversarial | WrongPick::RandomOther => argmin(row, rest.iter().copied()),
            };
            best.push(b);
            wrong.push(w);
            others.push(rest);
        }
        Self {
            best,
            wrong,
            others,
        }
    }
}

fn resolve_columns(m: &ScoreMatrix, allowed: Option<&[usize]>) -> Result<Vec<usize>> {
    match allowed {
        None => Ok((0..m.cols()).collect()),
        Some([]) => Err(Error::EmptySubset),
        Some(cols) => {
            let mut out = Vec::with_capacity(cols.len());
            for &index in cols {
                if index >= m.cols() {
                    return Err(Error::AlgorithmOutOfRange {
                        index,
                        count: m.cols(),
                    });
                }
                if !out.contains(&index) {
                    out.push(index);
                }
            }
            Ok(out)
        }
    }
}

/// Every way of placing `wrong_count` errors over the instances, in
/// lexicographic order of the error positions.
///
/// The random-other policy has no exhaustive form and is rejected.
pub fn enumerate_error_cases(
    m: &ScoreMatrix,
    wrong_count: usize,
    allowed: Option<&[usize]>,
    wrong_pick: WrongPick,
) -> Result<Vec<TrialOutcome>> {
    let n = m.rows();
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            rows: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if wrong_count > n {
        return Err(Error::WrongCountOutOfRange {
            wrong: wrong_count,
            rows: n,
        });
    }
    if wrong_pick == WrongPick::RandomOther {
        return Err(Error::InvalidConfig(
            "random-other wrong picks cannot be enumerated; use trials".into(),
        ));
    }
    let columns = resolve_columns(m, allowed)?;
    let picks = RowPicks::new(m, &columns, wrong_pick);

    let mut outcomes = Vec::new();
    let mut positions: Vec<usize> = (0..wrong_count).collect();
    loop {
        let mut choices = picks.best.clone();
        for &p in &positions {
            choices[p] = picks.wrong[p];
        }
        outcomes.push(TrialOutcome::from_selection(m, choices));
        if !next_combination(&mut positions, n) {
            break;
        }
    }
    Ok(outcomes)
}

fn next_combination(positions: &mut [usize], n: usize) -> bool {
    let k = positions.len();
    let Some(i) = (0..k).rev().find(|&i| positions[i] < n - k + i) else {
        return false;
    };
    positions[i] += 1;
    for j in i + 1..k {
        positions[j] = positions[j - 1] + 1;
    }
    true
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial`; depends only on the base seed and the index.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ splitmix64(trial as u64)
}

fn simulate(m: &ScoreMatrix, cfg: &SelectorConfig, picks: &RowPicks, trial: usize) -> TrialOutcome {
    let n = m.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(cfg.seed, trial));
    let mut wrong = vec![false; n];
    match cfg.error_model {
        ErrorModel::ExactCount => {
            let errors = n - exact_correct_count(cfg.accuracy, n);
            for p in sample(&mut rng, n, errors).iter() {
                wrong[p] = true;
            }
        }
        ErrorModel::Bernoulli => {
            for w in wrong.iter_mut() {
                *w = !rng.gen_bool(cfg.accuracy);
            }
        }
    }
    let choices = (0..n)
        .map(|i| {
            if !wrong[i] {
                picks.best[i]
            } else if cfg.wrong_pick == WrongPick::RandomOther && !picks.others[i].is_empty() {
                let others = &picks.others[i];
                others[rng.gen_range(0..others.len())]
            } else {
                picks.wrong[i]
            }
        })
        .collect();
    TrialOutcome::from_selection(m, choices)
}

/// Outcome of a single trial. [`run_trials`] returns exactly
/// `(0..cfg.trials).map(|t| run_trial(m, cfg, t))`.
pub fn run_trial(m: &ScoreMatrix, cfg: &SelectorConfig, trial: usize) -> Result<TrialOutcome> {
    cfg.validate()?;
    let columns: Vec<usize> = (0..m.cols()).collect();
    let picks = RowPicks::new(m, &columns, cfg.wrong_pick);
    Ok(simulate(m, cfg, &picks, trial))
}

/// Runs `cfg.trials` independent seeded trials, in parallel.
pub fn run_trials(m: &ScoreMatrix, cfg: &SelectorConfig) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let columns: Vec<usize> = (0..m.cols()).collect();
    let picks = RowPicks::new(m, &columns, cfg.wrong_pick);
    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|t| simulate(m, cfg, &picks, t))
        .collect())
}

/// One accuracy level of a sweep, in percent and percent².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub accuracy_pct: f64,
    pub mean_score_pct: f64,
    pub mean_variance_pct2: f64,
}

impl SweepPoint {
    /// Standard error of `mean_score_pct` over `trials` trials.
    pub fn standard_error_pct(&self, trials: usize) -> f64 {
        (self.mean_variance_pct2 / trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub trials_per_point: usize,
    pub seed: u64,
}

impl SweepCurve {
    /// Builds a curve from externally obtained points (e.g. measured values).
    pub fn from_points(points: Vec<SweepPoint>, trials_per_point: usize, seed: u64) -> Result<Self> {
        if trials_per_point == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        for p in &points {
            if !(p.accuracy_pct.is_finite() && p.mean_score_pct.is_finite() && p.mean_variance_pct2.is_finite()) {
                return Err(Error::InvalidConfig("curve values must be finite".into()));
            }
        }
        if points.windows(2).any(|w| w[0].accuracy_pct >= w[1].accuracy_pct) {
            return Err(Error::InvalidConfig("curve accuracies must be strictly increasing".into()));
        }
        Ok(Self {
            points,
            trials_per_point,
            seed,
        })
    }

    /// CSV with header `accuracy_pct,mean_score_pct,mean_variance_pct2`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("accuracy_pct,mean_score_pct,mean_variance_pct2\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.accuracy_pct, p.mean_score_pct, p.mean_variance_pct2
            ));
        }
        out
    }
}

/// Accuracies `0, step, 2*step, ...` followed by 1.
pub fn accuracy_grid(grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "grid step {grid_step} outside (0, 0.5]"
        )));
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let a = ((i as f64 * grid_step) * 1e12).round() / 1e12;
        if a >= 1.0 - 1e-9 {
            break;
        }
        grid.push(a);
        i += 1;
    }
    grid.push(1.0);
    Ok(grid)
}

/// Trial means and variance at every accuracy of the grid. `base_cfg`'s
/// accuracy is ignored.
pub fn sweep(m: &ScoreMatrix, base_cfg: &SelectorConfig, grid_step: f64) -> Result<SweepCurve> {
    let grid = accuracy_grid(grid_step)?;
    let points = grid
        .into_iter()
        .map(|accuracy| {
            let cfg = SelectorConfig {
                accuracy,
                ..*base_cfg
            };
            let means: Vec<f64> = run_trials(m, &cfg)?
                .into_iter()
                .map(|o| o.mean_score * 100.0)
                .collect();
            let mean_variance_pct2 = variance(&means)?;
            let mean_score_pct = means.iter().sum::<f64>() / means.len() as f64;
            Ok(SweepPoint {
                accuracy_pct: accuracy * 100.0,
                mean_score_pct,
                mean_variance_pct2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        points,
        trials_per_point: base_cfg.trials,
        seed: base_cfg.seed,
    })
}
