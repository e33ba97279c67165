use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use selbound::asm::synthetic::{Scenario, ScenarioFile, SCENARIOS};
use selbound::bounds::{binary_min_accuracy, lemma_min_accuracy, BoundMode};
use selbound::metrics::{evaluate_maps, Aggregation, LabelMap};
use selbound::score_model::{anti_oracle_selection, binarize, column_stats, oracle_selection, ScoreMatrix};
use selbound::selector_sim::{
    enumerate_error_cases, sweep, variance, ErrorModel, SelectorConfig, WrongPick, DEFAULT_TRIALS,
};

use crate::manifest;

pub const EXIT_INFEASIBLE: u8 = 2;

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Per-algorithm mean score, win count and win rate
    Stats(StatsArgs),
    /// Enumerate every placement of a fixed number of selector errors
    WorstCases(WorstCasesArgs),
    /// Mean score and variance of seeded trials across an accuracy grid
    Sweep(SweepArgs),
    /// Minimal selector accuracy that matches the best single algorithm
    Bound(BoundArgs),
    /// Per-label f-measure of a result label map against ground truth
    Eval(EvalArgs),
    /// Run a bundled synthetic scenario through the selection loop
    AsmDemo(AsmDemoArgs),
    /// Re-run a command from its manifest and compare output digests
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutDir {
    /// Write output files and manifest.json into this directory
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    /// Score matrix CSV (`instance,<algorithm ids...>`)
    pub matrix: PathBuf,
    /// Score the one-hot (winner takes 1) version of the matrix
    #[arg(long)]
    pub binarize: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Worst,
    RandomOther,
    Adversarial,
}

impl From<PolicyArg> for WrongPick {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Worst => WrongPick::Worst,
            PolicyArg::RandomOther => WrongPick::RandomOther,
            PolicyArg::Adversarial => WrongPick::Adversarial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModelArg {
    ExactCount,
    Bernoulli,
}

impl From<ErrorModelArg> for ErrorModel {
    fn from(e: ErrorModelArg) -> Self {
        match e {
            ErrorModelArg::ExactCount => ErrorModel::ExactCount,
            ErrorModelArg::Bernoulli => ErrorModel::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WorstCasesArgs {
    pub matrix: PathBuf,
    /// Number of instances on which the selector errs
    #[arg(long)]
    pub wrong_count: usize,
    /// Restrict the portfolio to these algorithm ids (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub allowed: Vec<String>,
    #[arg(long, value_enum, default_value_t = PolicyArg::Worst)]
    pub policy: PolicyArg,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutDir,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrialArgs {
    /// Trials per accuracy level
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, env = "SELBOUND_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Worst)]
    pub policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = ErrorModelArg::ExactCount)]
    pub error_model: ErrorModelArg,
}

impl TrialArgs {
    fn config(&self) -> SelectorConfig {
        SelectorConfig {
            accuracy: 1.0,
            error_model: self.error_model.into(),
            wrong_pick: self.policy.into(),
            trials: self.trials,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    pub matrix: PathBuf,
    /// Accuracy grid spacing as a fraction, in (0, 0.5]
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[command(flatten)]
    pub trials: TrialArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Binary,
    LemmaScore,
    LemmaLiteral,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BoundArgs {
    pub matrix: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::LemmaScore)]
    pub mode: ModeArg,
    /// Accuracy grid spacing as a fraction, in (0, 0.5]
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
    /// Binarize the matrix before computing a binary bound
    #[arg(long)]
    pub binarize: bool,
    #[command(flatten)]
    pub trials: TrialArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationArg {
    Unweighted,
    PixelWeighted,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Label map produced by an algorithm
    pub result: PathBuf,
    /// Ground-truth label map
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value_t = AggregationArg::Unweighted)]
    pub aggregation: AggregationArg,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutDir,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AsmDemoArgs {
    /// Scenario file, e.g. `{"scenario": "three-fixes"}`
    pub scenario: PathBuf,
    /// Override the scenario's iteration limit
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutDir,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// manifest.json written by an earlier `--out-dir` run
    pub manifest: PathBuf,
    /// Directory for the reproduced outputs
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

/// What a command produced.
pub struct Outcome {
    pub stdout: String,
    pub stderr: Option<String>,
    /// File name and contents, written under `--out-dir`.
    pub files: Vec<(&'static str, String)>,
    pub exit_code: u8,
}

impl Outcome {
    fn new(stdout: String, files: Vec<(&'static str, String)>) -> Self {
        Self {
            stdout,
            stderr: None,
            files,
            exit_code: 0,
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats(_) => "stats",
            Command::WorstCases(_) => "worst-cases",
            Command::Sweep(_) => "sweep",
            Command::Bound(_) => "bound",
            Command::Eval(_) => "eval",
            Command::AsmDemo(_) => "asm-demo",
            Command::Replay(_) => "replay",
        }
    }

    pub fn inputs(&self) -> Vec<&Path> {
        match self {
            Command::Stats(a) => vec![&a.matrix],
            Command::WorstCases(a) => vec![&a.matrix],
            Command::Sweep(a) => vec![&a.matrix],
            Command::Bound(a) => vec![&a.matrix],
            Command::Eval(a) => vec![&a.result, &a.truth],
            Command::AsmDemo(a) => vec![&a.scenario],
            Command::Replay(a) => vec![&a.manifest],
        }
    }

    fn input_paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Stats(a) => vec![&mut a.matrix],
            Command::WorstCases(a) => vec![&mut a.matrix],
            Command::Sweep(a) => vec![&mut a.matrix],
            Command::Bound(a) => vec![&mut a.matrix],
            Command::Eval(a) => vec![&mut a.result, &mut a.truth],
            Command::AsmDemo(a) => vec![&mut a.scenario],
            Command::Replay(a) => vec![&mut a.manifest],
        }
    }

    /// Makes every input path absolute so a manifest can be replayed from
    /// any working directory.
    pub fn resolve_inputs(&mut self) -> Result<()> {
        for p in self.input_paths_mut() {
            *p = fs::canonicalize(&*p).with_context(|| format!("cannot open {}", p.display()))?;
        }
        Ok(())
    }

    fn output_mut(&mut self) -> Option<&mut OutDir> {
        match self {
            Command::Stats(a) => Some(&mut a.output),
            Command::WorstCases(a) => Some(&mut a.output),
            Command::Sweep(a) => Some(&mut a.output),
            Command::Bound(a) => Some(&mut a.output),
            Command::Eval(a) => Some(&mut a.output),
            Command::AsmDemo(a) => Some(&mut a.output),
            Command::Replay(_) => None,
        }
    }

    pub fn out_dir(&mut self) -> Option<PathBuf> {
        self.output_mut().and_then(|o| o.out_dir.clone())
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        if let Some(o) = self.output_mut() {
            o.out_dir = Some(dir);
        }
    }

    pub fn execute(&self) -> Result<Outcome> {
        match self {
            Command::Stats(a) => stats(a),
            Command::WorstCases(a) => worst_cases(a),
            Command::Sweep(a) => run_sweep(a),
            Command::Bound(a) => bound(a),
            Command::Eval(a) => eval(a),
            Command::AsmDemo(a) => asm_demo(a),
            Command::Replay(_) => bail!("replay cannot be executed from a manifest"),
        }
    }
}

pub fn dispatch(command: Command) -> Result<u8> {
    if let Command::Replay(args) = &command {
        return manifest::replay(args);
    }
    let mut command = command;
    command.resolve_inputs()?;
    let outcome = command.execute()?;
    print!("{}", outcome.stdout);
    if let Some(note) = &outcome.stderr {
        eprintln!("{note}");
    }
    if let Some(dir) = command.out_dir() {
        manifest::write_run(&dir, &command, &outcome)?;
    }
    Ok(outcome.exit_code)
}

/// Shortest decimal form after rounding to 10 places, so `0.526 * 100`
/// prints as `52.6`.
pub fn num(x: f64) -> String {
    let r = (x * 1e10).round() / 1e10;
    if r == 0.0 {
        "0".to_owned()
    } else {
        format!("{r}")
    }
}

fn load_matrix(path: &Path) -> Result<ScoreMatrix> {
    ScoreMatrix::from_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

fn stats(a: &StatsArgs) -> Result<Outcome> {
    let m = load_matrix(&a.matrix)?;
    let m = if a.binarize { binarize(&m) } else { m };
    let stats = column_stats(&m);

    let mut csv = String::from("algorithm,mean_score_pct,win_count,win_rate_pct\n");
    let mut out = format!("{:<12} {:>10} {:>6} {:>9}\n", "algorithm", "mean %", "wins", "win %");
    for s in &stats {
        writeln!(csv, "{},{},{},{}", s.algorithm_id, num(s.mean_score * 100.0), s.win_count, num(s.win_rate * 100.0))?;
        writeln!(
            out,
            "{:<12} {:>10.4} {:>6} {:>9.4}",
            s.algorithm_id,
            s.mean_score * 100.0,
            s.win_count,
            s.win_rate * 100.0
        )?;
    }
    let (_, best) = oracle_selection(&m, None)?;
    let (_, worst) = anti_oracle_selection(&m, None)?;
    writeln!(out, "oracle {:.4}%  anti-oracle {:.4}%  instances {}", best * 100.0, worst * 100.0, m.rows())?;
    Ok(Outcome::new(out, vec![("stats.csv", csv)]))
}

#[derive(Serialize)]
struct CaseRecord {
    case: String,
    mean_score_pct: f64,
    selection: Vec<String>,
}

#[derive(Serialize)]
struct CasesReport<'a> {
    wrong_count: usize,
    policy: PolicyArg,
    allowed: &'a [String],
    case_count: usize,
    variance_pct2: f64,
    best_mean_pct: f64,
    best_selection: Vec<String>,
    cases: Vec<CaseRecord>,
}

/// Largest case count still laid out one column per case on stdout.
const WIDE_TABLE_CASES: usize = 12;

fn worst_cases(a: &WorstCasesArgs) -> Result<Outcome> {
    let m = load_matrix(&a.matrix)?;
    let allowed = if a.allowed.is_empty() {
        None
    } else {
        Some(m.resolve_algorithms(&a.allowed)?)
    };
    let cases = enumerate_error_cases(&m, a.wrong_count, allowed.as_deref(), a.policy.into())?;
    let (best, best_mean) = oracle_selection(&m, allowed.as_deref())?;
    let means: Vec<f64> = cases.iter().map(|c| c.mean_score * 100.0).collect();
    let var = variance(&means)?;
    let ids = |choices: &[usize]| -> Vec<String> {
        choices.iter().map(|&j| m.algorithm_ids()[j].clone()).collect()
    };

    let mut csv = String::from("case,mean_score_pct,selection\n");
    let mut records = Vec::with_capacity(cases.len());
    for (k, c) in cases.iter().enumerate() {
        let name = format!("C{}", k + 1);
        let sel = ids(c.selection.choices());
        writeln!(csv, "{name},{},{}", num(means[k]), sel.join(";"))?;
        records.push(CaseRecord {
            case: name,
            mean_score_pct: means[k],
            selection: sel,
        });
    }
    writeln!(csv, "Best,{},{}", num(best_mean * 100.0), ids(best.choices()).join(";"))?;

    let mut out = String::new();
    if cases.len() <= WIDE_TABLE_CASES {
        write!(out, "{:<10}", "instance")?;
        for k in 0..cases.len() {
            write!(out, " {:>8}", format!("C{}", k + 1))?;
        }
        writeln!(out, " {:>8}", "Best")?;
        for i in 0..m.rows() {
            write!(out, "{:<10}", m.instance_ids()[i])?;
            for c in &cases {
                write!(out, " {:>8.2}", m.get(i, c.selection.choices()[i]) * 100.0)?;
            }
            writeln!(out, " {:>8.2}", m.get(i, best.choices()[i]) * 100.0)?;
        }
        write!(out, "{:<10}", "mean")?;
        for v in &means {
            write!(out, " {v:>8.4}")?;
        }
        writeln!(out, " {:>8.4}", best_mean * 100.0)?;
    } else {
        for r in &records {
            writeln!(out, "{:<10} {:>10.4}", r.case, r.mean_score_pct)?;
        }
        writeln!(out, "{:<10} {:>10.4}", "Best", best_mean * 100.0)?;
    }
    writeln!(out, "cases {}  variance of case means {:.4} %^2", cases.len(), var)?;

    let report = CasesReport {
        wrong_count: a.wrong_count,
        policy: a.policy,
        allowed: &a.allowed,
        case_count: cases.len(),
        variance_pct2: var,
        best_mean_pct: best_mean * 100.0,
        best_selection: ids(best.choices()),
        cases: records,
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    Ok(Outcome::new(out, vec![("cases.csv", csv), ("cases.json", json)]))
}

fn run_sweep(a: &SweepArgs) -> Result<Outcome> {
    let m = load_matrix(&a.matrix)?;
    let curve = sweep(&m, &a.trials.config(), a.step)?;
    let csv = curve.to_csv_string();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "step": a.step,
        "policy": a.trials.policy,
        "error_model": a.trials.error_model,
        "trials_per_point": curve.trials_per_point,
        "seed": curve.seed,
        "points": curve.points,
    }))? + "\n";
    Ok(Outcome::new(csv.clone(), vec![("sweep.csv", csv), ("sweep.json", json)]))
}

fn bound(a: &BoundArgs) -> Result<Outcome> {
    let m = load_matrix(&a.matrix)?;
    let report = match a.mode {
        ModeArg::Binary => {
            let m = if a.binarize { binarize(&m) } else { m };
            binary_min_accuracy(&m).context("binary mode needs a one-hot matrix; pass --binarize")?
        }
        ModeArg::LemmaScore => lemma_min_accuracy(&m, &a.trials.config(), BoundMode::LemmaScore, a.grid_step)?,
        ModeArg::LemmaLiteral => lemma_min_accuracy(&m, &a.trials.config(), BoundMode::LemmaLiteral, a.grid_step)?,
    };
    let json = serde_json::to_string_pretty(&report.to_json())? + "\n";
    let mut outcome = Outcome::new(json.clone(), vec![("bound.json", json)]);
    if report.feasible {
        outcome.stderr = Some(format!(
            "best algorithm {} at {:.4}%; minimal accuracy {}%",
            report.best_algorithm,
            report.sigma_best * 100.0,
            num(report.min_accuracy * 100.0)
        ));
    } else {
        outcome.stderr = Some(format!(
            "no accuracy on the grid reaches the best algorithm's {:.4}%",
            report.sigma_best * 100.0
        ));
        outcome.exit_code = EXIT_INFEASIBLE;
    }
    Ok(outcome)
}

fn eval(a: &EvalArgs) -> Result<Outcome> {
    let result = LabelMap::from_path(&a.result).with_context(|| format!("reading {}", a.result.display()))?;
    let truth = LabelMap::from_path(&a.truth).with_context(|| format!("reading {}", a.truth.display()))?;
    let aggregation = match a.aggregation {
        AggregationArg::Unweighted => Aggregation::Unweighted,
        AggregationArg::PixelWeighted => Aggregation::PixelWeighted,
    };
    let ev = evaluate_maps(&result, &truth, aggregation)?;

    let mut csv = String::from("label,result_pixels,matched_pixels,ground_truth_pixels,f,reduced_f\n");
    let mut out = format!(
        "{:>6} {:>8} {:>8} {:>8} {:>10} {:>10}\n",
        "label", "result", "matched", "truth", "f", "reduced f"
    );
    for s in &ev.per_label {
        let c = &s.counts;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            s.label,
            c.result_pixels(),
            c.matched_pixels(),
            c.ground_truth_pixels(),
            num(s.f),
            num(s.reduced_f)
        )?;
        writeln!(
            out,
            "{:>6} {:>8} {:>8} {:>8} {:>10.6} {:>10.6}",
            s.label,
            c.result_pixels(),
            c.matched_pixels(),
            c.ground_truth_pixels(),
            s.f,
            s.reduced_f
        )?;
    }
    writeln!(csv, "mean,,,,{},{}", num(ev.mean_f), num(ev.mean_reduced_f))?;
    writeln!(out, "{:>6} {:>8} {:>8} {:>8} {:>10.6} {:>10.6}", "mean", "", "", "", ev.mean_f, ev.mean_reduced_f)?;
    Ok(Outcome::new(out, vec![("eval.csv", csv)]))
}

fn asm_demo(a: &AsmDemoArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario.display()))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", a.scenario.display()))?;
    let Some(scenario) = Scenario::bundled(&file.scenario) else {
        bail!("unknown scenario `{}`; bundled: {}", file.scenario, SCENARIOS.join(", "));
    };
    let limit = a.max_iterations.unwrap_or(file.max_iterations);
    let state = scenario.run(limit)?;
    let trace = state.trace_jsonl();
    let mut outcome = Outcome::new(trace.clone(), vec![("trace.jsonl", trace)]);
    if let Some(reason) = state.exit {
        let name = serde_json::to_value(reason)?;
        outcome.stderr = Some(format!(
            "exit ({}) {} at iteration {}",
            reason.code(),
            name.as_str().unwrap_or_default(),
            state.iteration
        ));
    }
    Ok(outcome)
}
