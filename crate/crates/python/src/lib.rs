//! Python bindings for `selbound`.
//!
//! Scores cross the boundary as fractions in [0, 1]; curve points and bound
//! reports come back in percent, matching the CLI outputs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use selbound::asm::synthetic::{Scenario, DEFAULT_MAX_ITERATIONS, SCENARIOS};
use selbound::bounds::{self, BoundMode, BoundReport};
use selbound::metrics::{self, Aggregation, LabelMap, PixelCounts};
use selbound::score_model::{self, ScoreMatrix};
use selbound::selector_sim::{self, ErrorModel, SelectorConfig, WrongPick, DEFAULT_TRIALS};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_policy(name: &str) -> PyResult<WrongPick> {
    match name {
        "worst" => Ok(WrongPick::Worst),
        "random-other" => Ok(WrongPick::RandomOther),
        "adversarial" => Ok(WrongPick::Adversarial),
        _ => Err(value_err(format!("unknown policy `{name}`; expected worst, random-other or adversarial"))),
    }
}

fn parse_error_model(name: &str) -> PyResult<ErrorModel> {
    match name {
        "exact-count" => Ok(ErrorModel::ExactCount),
        "bernoulli" => Ok(ErrorModel::Bernoulli),
        _ => Err(value_err(format!("unknown error model `{name}`; expected exact-count or bernoulli"))),
    }
}

fn config(accuracy: f64, trials: usize, seed: u64, policy: &str, error_model: &str) -> PyResult<SelectorConfig> {
    Ok(SelectorConfig {
        accuracy,
        error_model: parse_error_model(error_model)?,
        wrong_pick: parse_policy(policy)?,
        trials,
        seed,
    })
}

/// Instances x algorithms table of scores in [0, 1].
#[pyclass(name = "ScoreMatrix", module = "selbound_py", frozen)]
struct PyScoreMatrix {
    inner: ScoreMatrix,
}

impl PyScoreMatrix {
    fn allowed(&self, allowed: Option<Vec<String>>) -> PyResult<Option<Vec<usize>>> {
        allowed
            .map(|ids| self.inner.resolve_algorithms(&ids).map_err(value_err))
            .transpose()
    }
}

fn report_dict<'py>(py: Python<'py>, report: &BoundReport) -> PyResult<Bound<'py, PyDict>> {
    let json = report.to_json();
    let d = PyDict::new(py);
    d.set_item("sigma_best_pct", json.sigma_best_pct)?;
    d.set_item("best_algorithm", json.best_algorithm)?;
    d.set_item("min_accuracy_pct", json.min_accuracy_pct)?;
    d.set_item("mode", report.mode.as_str())?;
    d.set_item("feasible", json.feasible)?;
    d.set_item("grid_step_pct", json.grid_step_pct)?;
    let curve: Vec<(f64, f64, f64)> = json
        .curve
        .iter()
        .map(|p| (p.accuracy_pct, p.mean_score_pct, p.mean_variance_pct2))
        .collect();
    d.set_item("curve", curve)?;
    d.set_item("win_rates_pct", json.win_rates_pct)?;
    Ok(d)
}

#[pymethods]
impl PyScoreMatrix {
    #[new]
    #[pyo3(signature = (rows, instance_ids=None, algorithm_ids=None))]
    fn new(rows: Vec<Vec<f64>>, instance_ids: Option<Vec<String>>, algorithm_ids: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match (instance_ids, algorithm_ids) {
            (None, None) => ScoreMatrix::from_rows(rows),
            (inst, algs) => {
                let n = rows.len();
                let m = rows.first().map_or(0, Vec::len);
                ScoreMatrix::new(
                    inst.unwrap_or_else(|| (1..=n).map(|i| format!("I{i}")).collect()),
                    algs.unwrap_or_else(|| (1..=m).map(|j| j.to_string()).collect()),
                    rows,
                )
            }
        }
        .map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Reads a CSV whose header starts with `instance`. Percent tables are
    /// detected and scaled to fractions.
    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ScoreMatrix::from_csv_path(path).map_err(value_err)?,
        })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    #[getter]
    fn instance_ids(&self) -> Vec<String> {
        self.inner.instance_ids().to_vec()
    }

    #[getter]
    fn algorithm_ids(&self) -> Vec<String> {
        self.inner.algorithm_ids().to_vec()
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.inner.rows()).map(|i| self.inner.row(i).to_vec()).collect()
    }

    /// One dict per algorithm: `algorithm_id`, `mean_score`, `win_count`,
    /// `win_rate`.
    fn column_stats<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        score_model::column_stats(&self.inner)
            .into_iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("algorithm_id", s.algorithm_id)?;
                d.set_item("mean_score", s.mean_score)?;
                d.set_item("win_count", s.win_count)?;
                d.set_item("win_rate", s.win_rate)?;
                Ok(d)
            })
            .collect()
    }

    fn binarize(&self) -> Self {
        Self {
            inner: score_model::binarize(&self.inner),
        }
    }

    /// Per-row best picks and their mean score.
    #[pyo3(signature = (allowed=None))]
    fn oracle(&self, allowed: Option<Vec<String>>) -> PyResult<(Vec<usize>, f64)> {
        let allowed = self.allowed(allowed)?;
        let (sel, mean) = score_model::oracle_selection(&self.inner, allowed.as_deref()).map_err(value_err)?;
        Ok((sel.0, mean))
    }

    #[pyo3(signature = (allowed=None))]
    fn anti_oracle(&self, allowed: Option<Vec<String>>) -> PyResult<(Vec<usize>, f64)> {
        let allowed = self.allowed(allowed)?;
        let (sel, mean) = score_model::anti_oracle_selection(&self.inner, allowed.as_deref()).map_err(value_err)?;
        Ok((sel.0, mean))
    }

    /// Every placement of `wrong_count` errors as `(choices, mean_score)`.
    #[pyo3(signature = (wrong_count, allowed=None, policy="worst"))]
    fn worst_cases(&self, wrong_count: usize, allowed: Option<Vec<String>>, policy: &str) -> PyResult<Vec<(Vec<usize>, f64)>> {
        let allowed = self.allowed(allowed)?;
        let cases = selector_sim::enumerate_error_cases(&self.inner, wrong_count, allowed.as_deref(), parse_policy(policy)?)
            .map_err(value_err)?;
        Ok(cases.into_iter().map(|c| (c.selection.0, c.mean_score)).collect())
    }

    /// Mean score of each seeded trial at one accuracy.
    #[pyo3(signature = (accuracy, trials=DEFAULT_TRIALS, seed=0, policy="worst", error_model="exact-count"))]
    fn trials(&self, accuracy: f64, trials: usize, seed: u64, policy: &str, error_model: &str) -> PyResult<Vec<f64>> {
        let cfg = config(accuracy, trials, seed, policy, error_model)?;
        let outcomes = selector_sim::run_trials(&self.inner, &cfg).map_err(value_err)?;
        Ok(outcomes.into_iter().map(|o| o.mean_score).collect())
    }

    /// `(accuracy_pct, mean_score_pct, mean_variance_pct2)` per grid point.
    #[pyo3(signature = (step=0.05, trials=DEFAULT_TRIALS, seed=0, policy="worst", error_model="exact-count"))]
    fn sweep(&self, step: f64, trials: usize, seed: u64, policy: &str, error_model: &str) -> PyResult<Vec<(f64, f64, f64)>> {
        let cfg = config(1.0, trials, seed, policy, error_model)?;
        let curve = selector_sim::sweep(&self.inner, &cfg, step).map_err(value_err)?;
        Ok(curve
            .points
            .into_iter()
            .map(|p| (p.accuracy_pct, p.mean_score_pct, p.mean_variance_pct2))
            .collect())
    }

    /// Bound report as a dict; `mode` is `binary`, `lemma-score` or
    /// `lemma-literal`.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (mode="lemma-score", grid_step=0.01, trials=DEFAULT_TRIALS, seed=0, policy="worst", error_model="exact-count"))]
    fn bound<'py>(
        &self,
        py: Python<'py>,
        mode: &str,
        grid_step: f64,
        trials: usize,
        seed: u64,
        policy: &str,
        error_model: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let report = match mode {
            "binary" => bounds::binary_min_accuracy(&self.inner),
            "lemma-score" | "lemma-literal" => {
                let mode = if mode == "lemma-score" { BoundMode::LemmaScore } else { BoundMode::LemmaLiteral };
                let cfg = config(1.0, trials, seed, policy, error_model)?;
                bounds::lemma_min_accuracy(&self.inner, &cfg, mode, grid_step)
            }
            _ => return Err(value_err(format!("unknown mode `{mode}`"))),
        }
        .map_err(value_err)?;
        report_dict(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("ScoreMatrix({} instances x {} algorithms)", self.inner.rows(), self.inner.cols())
    }
}

/// Population variance.
#[pyfunction]
fn variance(values: Vec<f64>) -> PyResult<f64> {
    selector_sim::variance(&values).map_err(value_err)
}

#[pyfunction]
fn f_measure(result_pixels: u64, matched_pixels: u64, ground_truth_pixels: u64) -> PyResult<f64> {
    let c = PixelCounts::new(result_pixels, matched_pixels, ground_truth_pixels).map_err(value_err)?;
    Ok(metrics::f_measure(&c))
}

#[pyfunction]
fn reduced_f(result_pixels: u64, matched_pixels: u64, ground_truth_pixels: u64) -> PyResult<f64> {
    let c = PixelCounts::new(result_pixels, matched_pixels, ground_truth_pixels).map_err(value_err)?;
    Ok(metrics::reduced_f(&c))
}

/// `(label, result, matched, truth, f, reduced_f)`.
type LabelRow = (u32, u64, u64, u64, f64, f64);

fn label_map(rows: Vec<Vec<u32>>) -> PyResult<LabelMap> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(value_err("label map rows differ in length"));
    }
    LabelMap::new(width, height, rows.concat()).map_err(value_err)
}

/// Scores two label maps given as lists of rows. Returns
/// `(per_label, mean_f, mean_reduced_f)`.
#[pyfunction]
#[pyo3(signature = (result, truth, aggregation="unweighted"))]
fn evaluate_maps(
    result: Vec<Vec<u32>>,
    truth: Vec<Vec<u32>>,
    aggregation: &str,
) -> PyResult<(Vec<LabelRow>, f64, f64)> {
    let aggregation = match aggregation {
        "unweighted" => Aggregation::Unweighted,
        "pixel-weighted" => Aggregation::PixelWeighted,
        _ => return Err(value_err(format!("unknown aggregation `{aggregation}`"))),
    };
    let ev = metrics::evaluate_maps(&label_map(result)?, &label_map(truth)?, aggregation).map_err(value_err)?;
    let per_label = ev
        .per_label
        .iter()
        .map(|s| {
            let c = &s.counts;
            (s.label, c.result_pixels(), c.matched_pixels(), c.ground_truth_pixels(), s.f, s.reduced_f)
        })
        .collect();
    Ok((per_label, ev.mean_f, ev.mean_reduced_f))
}

/// Runs a bundled synthetic scenario. Returns `(exit_code, iteration,
/// trace_jsonl)` with `exit_code` one of `a`, `b`, `c`, `d`.
#[pyfunction]
#[pyo3(signature = (scenario, max_iterations=DEFAULT_MAX_ITERATIONS))]
fn asm_demo(scenario: &str, max_iterations: usize) -> PyResult<(char, usize, String)> {
    let Some(s) = Scenario::bundled(scenario) else {
        return Err(value_err(format!("unknown scenario `{scenario}`; bundled: {}", SCENARIOS.join(", "))));
    };
    let state = s.run(max_iterations).map_err(value_err)?;
    let code = state.exit.map_or('?', |e| e.code());
    Ok((code, state.iteration, state.trace_jsonl()))
}

#[pymodule]
fn selbound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScoreMatrix>()?;
    m.add_function(wrap_pyfunction!(variance, m)?)?;
    m.add_function(wrap_pyfunction!(f_measure, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_f, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_maps, m)?)?;
    m.add_function(wrap_pyfunction!(asm_demo, m)?)?;
    m.add("SCENARIOS", SCENARIOS.to_vec())?;
    Ok(())
}
