//! Minimal selector accuracy needed to match the best single algorithm.
//!
//! In the binary case the bound is the best algorithm's win rate. For real
//! valued scores a sweep is scanned for the first accuracy whose
//! variance-penalised criterion reaches the best column mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score_model::{column_stats, AlgorithmStats, ScoreMatrix};
use crate::selector_sim::{sweep, SelectorConfig, SweepCurve, SweepPoint};

/// Criterion values this close below the target still count as meeting it.
const CRITERION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    /// Best algorithm's win rate on a one-hot matrix.
    Binary,
    /// `mean_score(a) - variance(a)`, both on the fractional score scale.
    LemmaScore,
    /// `a - variance(a)` with `a` in percent and the variance in percent².
    LemmaLiteral,
}

impl BoundMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMode::Binary => "binary",
            BoundMode::LemmaScore => "lemma-score",
            BoundMode::LemmaLiteral => "lemma-literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Evidence {
    WinRates { stats: Vec<AlgorithmStats> },
    Curve { grid_step: f64, curve: SweepCurve },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub sigma_best: f64,
    pub best_algorithm: String,
    pub min_accuracy: f64,
    pub mode: BoundMode,
    pub feasible: bool,
    pub evidence: Evidence,
}

/// External JSON form of a [`BoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReportJson {
    pub sigma_best_pct: f64,
    pub best_algorithm: String,
    pub min_accuracy_pct: f64,
    pub mode: BoundMode,
    pub feasible: bool,
    pub grid_step_pct: Option<f64>,
    pub seed: Option<u64>,
    pub trials_per_point: Option<usize>,
    pub curve: Vec<SweepPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub win_rates_pct: Vec<f64>,
}

impl BoundReport {
    pub fn to_json(&self) -> BoundReportJson {
        let (grid_step_pct, seed, trials_per_point, curve, win_rates_pct) = match &self.evidence {
            Evidence::WinRates { stats } => (
                None,
                None,
                None,
                Vec::new(),
                stats.iter().map(|s| s.win_rate * 100.0).collect(),
            ),
            Evidence::Curve { grid_step, curve } => (
                Some(grid_step * 100.0),
                Some(curve.seed),
                Some(curve.trials_per_point),
                curve.points.clone(),
                Vec::new(),
            ),
        };
        BoundReportJson {
            sigma_best_pct: self.sigma_best * 100.0,
            best_algorithm: self.best_algorithm.clone(),
            min_accuracy_pct: self.min_accuracy * 100.0,
            mode: self.mode,
            feasible: self.feasible,
            grid_step_pct,
            seed,
            trials_per_point,
            curve,
            win_rates_pct,
        }
    }
}

/// Column with the highest mean; ties go to the lowest index.
fn best_column(stats: &[AlgorithmStats]) -> &AlgorithmStats {
    stats
        .iter()
        .reduce(|best, s| if s.mean_score > best.mean_score { s } else { best })
        .expect("matrix has at least one column")
}

/// Bound for a one-hot matrix: the best algorithm's win rate.
pub fn binary_min_accuracy(m: &ScoreMatrix) -> Result<BoundReport> {
    if let Some(row) = m.first_non_binary_row() {
        return Err(Error::NotBinary { row });
    }
    let stats = column_stats(m);
    let best = best_column(&stats);
    Ok(BoundReport {
        sigma_best: best.win_rate,
        best_algorithm: best.algorithm_id.clone(),
        min_accuracy: best.win_rate,
        mode: BoundMode::Binary,
        feasible: true,
        evidence: Evidence::WinRates {
            stats: stats.clone(),
        },
    })
}

/// Criterion value at one curve point, on the percent scale.
pub fn lemma_criterion(point: &SweepPoint, mode: BoundMode) -> Result<f64> {
    match mode {
        BoundMode::LemmaLiteral => Ok(point.accuracy_pct - point.mean_variance_pct2),
        // fraction-scale variance expressed in percent: 100 * var_pct2 / 100^2
        BoundMode::LemmaScore => Ok(point.mean_score_pct - point.mean_variance_pct2 / 100.0),
        BoundMode::Binary => Err(Error::InvalidConfig(
            "binary mode has no curve criterion".into(),
        )),
    }
}

/// First curve point whose criterion reaches `sigma_best_pct`. Returns the
/// accuracy as a fraction, or `None` when no point qualifies.
pub fn min_accuracy_from_curve(
    sigma_best_pct: f64,
    curve: &SweepCurve,
    mode: BoundMode,
) -> Result<Option<f64>> {
    for p in &curve.points {
        if lemma_criterion(p, mode)? >= sigma_best_pct - CRITERION_SLACK {
            return Ok(Some(p.accuracy_pct / 100.0));
        }
    }
    Ok(None)
}

/// Sweeps `m` and scans the curve for the smallest accuracy meeting the
/// criterion. Infeasible scans report `min_accuracy = 1`.
pub fn lemma_min_accuracy(
    m: &ScoreMatrix,
    cfg: &SelectorConfig,
    mode: BoundMode,
    grid_step: f64,
) -> Result<BoundReport> {
    if mode == BoundMode::Binary {
        return Err(Error::InvalidConfig(
            "use binary_min_accuracy for binary mode".into(),
        ));
    }
    let stats = column_stats(m);
    let best = best_column(&stats);
    let curve = sweep(m, cfg, grid_step)?;
    let found = min_accuracy_from_curve(best.mean_score * 100.0, &curve, mode)?;
    Ok(BoundReport {
        sigma_best: best.mean_score,
        best_algorithm: best.algorithm_id.clone(),
        min_accuracy: found.unwrap_or(1.0),
        mode,
        feasible: found.is_some(),
        evidence: Evidence::Curve { grid_step, curve },
    })
}
