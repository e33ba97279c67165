//! Per-instance score tables, per-algorithm statistics, binarization and
//! oracle (virtual-best) selection.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Rectangular table of scores in `[0, 1]`, one row per instance and one
/// column per algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    instance_ids: Vec<String>,
    algorithm_ids: Vec<String>,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(
        instance_ids: Vec<String>,
        algorithm_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.is_empty() || algorithm_ids.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if instance_ids.len() != rows.len() {
            return Err(Error::IdCountMismatch {
                kind: "instance",
                expected: instance_ids.len(),
                found: rows.len(),
            });
        }
        check_unique("instance", &instance_ids)?;
        check_unique("algorithm", &algorithm_ids)?;

        let cols = algorithm_ids.len();
        let mut scores = Vec::with_capacity(rows.len() * cols);
        for (row, values) in rows.into_iter().enumerate() {
            if values.len() != cols {
                return Err(Error::RaggedRow {
                    row,
                    expected: cols,
                    found: values.len(),
                });
            }
            for (column, &value) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::ScoreOutOfRange { row, column, value });
                }
            }
            scores.extend(values);
        }
        Ok(Self {
            instance_ids,
            algorithm_ids,
            scores,
        })
    }

    /// Builds a matrix with generated ids: instances `I1..IN`, algorithms `1..M`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let instance_ids = (1..=rows.len()).map(|i| format!("I{i}")).collect();
        let algorithm_ids = (1..=cols).map(|j| j.to_string()).collect();
        Self::new(instance_ids, algorithm_ids, rows)
    }

    /// Parses the score-matrix CSV format.
    ///
    /// The header is `instance,<alg-1>,...,<alg-M>`. If any score exceeds 1
    /// the whole file is read as percentages and divided by 100.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = csv.records();

        let header = match records.next() {
            Some(rec) => rec.map_err(csv_error)?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: "missing header row".into(),
                })
            }
        };
        if header.get(0) != Some("instance") {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!(
                    "header must start with `instance`, found `{}`",
                    header.get(0).unwrap_or("")
                ),
            });
        }
        let algorithm_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        if algorithm_ids.is_empty() {
            return Err(Error::Parse {
                line: 1,
                column: 2,
                message: "header names no algorithms".into(),
            });
        }

        let mut instance_ids = Vec::new();
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() == 1 && rec.get(0) == Some("") {
                continue;
            }
            if rec.len() != algorithm_ids.len() + 1 {
                return Err(Error::Parse {
                    line,
                    column: rec.len().min(algorithm_ids.len() + 1) + 1,
                    message: format!(
                        "expected {} fields, found {}",
                        algorithm_ids.len() + 1,
                        rec.len()
                    ),
                });
            }
            instance_ids.push(rec[0].to_owned());
            let mut row = Vec::with_capacity(algorithm_ids.len());
            for (k, field) in rec.iter().enumerate().skip(1) {
                let value: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    column: k + 1,
                    message: format!("`{field}` is not a number"),
                })?;
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Parse {
                        line,
                        column: k + 1,
                        message: format!("score `{field}` must be finite and non-negative"),
                    });
                }
                row.push(value);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 2,
                column: 1,
                message: "no instance rows".into(),
            });
        }

        let percent = rows.iter().flatten().any(|&v| v > 1.0);
        if percent {
            for v in rows.iter_mut().flatten() {
                *v /= 100.0;
            }
        }
        Self::new(instance_ids, algorithm_ids, rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Writes the matrix as CSV with fractional scores.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("instance");
        for id in &self.algorithm_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.instance_ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.algorithm_ids.len()
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn algorithm_ids(&self) -> &[String] {
        &self.algorithm_ids
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let cols = self.cols();
        &self.scores[row * cols..(row + 1) * cols]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows()).map(move |i| self.get(i, col))
    }

    pub fn algorithm_index(&self, id: &str) -> Option<usize> {
        self.algorithm_ids.iter().position(|a| a == id)
    }

    /// Resolves algorithm ids to column indices.
    pub fn resolve_algorithms<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.algorithm_index(id.as_ref())
                    .ok_or_else(|| Error::UnknownAlgorithm(id.as_ref().to_owned()))
            })
            .collect()
    }

    /// Returns the sub-matrix made of the given columns, in the given order.
    pub fn restrict(&self, columns: &[usize]) -> Result<Self> {
        let columns = validate_subset(columns, self.cols())?;
        let algorithm_ids = columns
            .iter()
            .map(|&j| self.algorithm_ids[j].clone())
            .collect();
        let rows = (0..self.rows())
            .map(|i| columns.iter().map(|&j| self.get(i, j)).collect())
            .collect();
        Self::new(self.instance_ids.clone(), algorithm_ids, rows)
    }

    /// True when every row is one-hot with values in {0, 1}.
    pub fn is_binary(&self) -> bool {
        self.first_non_binary_row().is_none()
    }

    pub(crate) fn first_non_binary_row(&self) -> Option<usize> {
        (0..self.rows()).find(|&i| {
            let row = self.row(i);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0)
        })
    }

    /// Column index of the row maximum; ties go to the lowest index.
    pub fn row_best(&self, row: usize) -> usize {
        argmax(self.row(row), 0..self.cols())
    }

    /// Column index of the row minimum; ties go to the lowest index.
    pub fn row_worst(&self, row: usize) -> usize {
        argmin(self.row(row), 0..self.cols())
    }

    /// Lowest-scoring column other than the row best; the row best itself
    /// when the matrix has a single column.
    pub fn row_worst_other(&self, row: usize) -> usize {
        let best = self.row_best(row);
        if self.cols() == 1 {
            return best;
        }
        argmin(self.row(row), (0..self.cols()).filter(|&j| j != best))
    }
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: err.to_string(),
    }
}

fn validate_subset(columns: &[usize], count: usize) -> Result<Vec<usize>> {
    if columns.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut out = Vec::with_capacity(columns.len());
    for &index in columns {
        if index >= count {
            return Err(Error::AlgorithmOutOfRange { index, count });
        }
        if !out.contains(&index) {
            out.push(index);
        }
    }
    Ok(out)
}

pub(crate) fn argmax(row: &[f64], columns: impl Iterator<Item = usize>) -> usize {
    let mut best: Option<usize> = None;
    for j in columns {
        if best.is_none_or(|b| row[j] > row[b] || (row[j] == row[b] && j < b)) {
            best = Some(j);
        }
    }
    best.expect("non-empty column set")
}

pub(crate) fn argmin(row: &[f64], columns: impl Iterator<Item = usize>) -> usize {
    let mut worst: Option<usize> = None;
    for j in columns {
        if worst.is_none_or(|w| row[j] < row[w] || (row[j] == row[w] && j < w)) {
            worst = Some(j);
        }
    }
    worst.expect("non-empty column set")
}

/// Average score and win statistics for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmStats {
    pub algorithm_id: String,
    pub mean_score: f64,
    pub win_count: usize,
    pub win_rate: f64,
}

pub fn column_stats(m: &ScoreMatrix) -> Vec<AlgorithmStats> {
    let mut wins = vec![0usize; m.cols()];
    for i in 0..m.rows() {
        wins[m.row_best(i)] += 1;
    }
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|j| AlgorithmStats {
            algorithm_id: m.algorithm_ids[j].clone(),
            mean_score: m.column(j).sum::<f64>() / n,
            win_count: wins[j],
            win_rate: wins[j] as f64 / n,
        })
        .collect()
}

/// One-hot encodes each row at its argmax (lowest index wins ties).
pub fn binarize(m: &ScoreMatrix) -> ScoreMatrix {
    let cols = m.cols();
    let mut scores = vec![0.0; m.scores.len()];
    for i in 0..m.rows() {
        scores[i * cols + m.row_best(i)] = 1.0;
    }
    ScoreMatrix {
        instance_ids: m.instance_ids.clone(),
        algorithm_ids: m.algorithm_ids.clone(),
        scores,
    }
}

/// Algorithm index chosen for each instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct SelectionVector(pub Vec<usize>);

impl SelectionVector {
    pub fn new(choices: Vec<usize>, m: &ScoreMatrix) -> Result<Self> {
        if choices.len() != m.rows() {
            return Err(Error::LengthMismatch {
                expected: m.rows(),
                found: choices.len(),
            });
        }
        if let Some(&index) = choices.iter().find(|&&j| j >= m.cols()) {
            return Err(Error::AlgorithmOutOfRange {
                index,
                count: m.cols(),
            });
        }
        Ok(Self(choices))
    }

    pub fn choices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mean of the selected scores. The vector must be aligned with `m`.
    pub fn mean_score(&self, m: &ScoreMatrix) -> f64 {
        let total: f64 = self.0.iter().enumerate().map(|(i, &j)| m.get(i, j)).sum();
        total / m.rows() as f64
    }
}

fn select_per_row(
    m: &ScoreMatrix,
    allowed: Option<&[usize]>,
    pick: fn(&[f64], std::iter::Copied<std::slice::Iter<'_, usize>>) -> usize,
) -> Result<(SelectionVector, f64)> {
    let columns = match allowed {
        Some(a) => validate_subset(a, m.cols())?,
        None => (0..m.cols()).collect(),
    };
    let choices: Vec<usize> = (0..m.rows())
        .map(|i| pick(m.row(i), columns.iter().copied()))
        .collect();
    let v = SelectionVector(choices);
    let mean = v.mean_score(m);
    Ok((v, mean))
}

/// Virtual-best selection: the row maximum over the allowed columns.
pub fn oracle_selection(
    m: &ScoreMatrix,
    allowed: Option<&[usize]>,
) -> Result<(SelectionVector, f64)> {
    select_per_row(m, allowed, |row, cols| argmax(row, cols))
}

/// Virtual-worst selection: the row minimum over the allowed columns.
pub fn anti_oracle_selection(
    m: &ScoreMatrix,
    allowed: Option<&[usize]>,
) -> Result<(SelectionVector, f64)> {
    select_per_row(m, allowed, |row, cols| argmin(row, cols))
}

/// Computation cost of each (instance, algorithm) run plus the per-call
/// cost of the selector.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    per_run_cost: Vec<Vec<f64>>,
    selector_cost: f64,
}

impl CostModel {
    pub fn new(per_run_cost: Vec<Vec<f64>>, selector_cost: f64) -> Result<Self> {
        let valid = |c: f64| c.is_finite() && c >= 0.0;
        if !valid(selector_cost) || per_run_cost.iter().flatten().any(|&c| !valid(c)) {
            return Err(Error::InvalidConfig("costs must be finite and >= 0".into()));
        }
        if let Some(first) = per_run_cost.first() {
            if let Some((row, r)) = per_run_cost
                .iter()
                .enumerate()
                .find(|(_, r)| r.len() != first.len())
            {
                return Err(Error::RaggedRow {
                    row,
                    expected: first.len(),
                    found: r.len(),
                });
            }
        }
        Ok(Self {
            per_run_cost,
            selector_cost,
        })
    }

    /// Builds a cost model and checks it has the same shape as `m`.
    pub fn for_matrix(m: &ScoreMatrix, per_run_cost: Vec<Vec<f64>>, selector_cost: f64) -> Result<Self> {
        if per_run_cost.len() != m.rows() {
            return Err(Error::LengthMismatch {
                expected: m.rows(),
                found: per_run_cost.len(),
            });
        }
        if let Some(r) = per_run_cost.iter().find(|r| r.len() != m.cols()) {
            return Err(Error::LengthMismatch {
                expected: m.cols(),
                found: r.len(),
            });
        }
        Self::new(per_run_cost, selector_cost)
    }

    pub fn selector_cost(&self) -> f64 {
        self.selector_cost
    }

    pub fn run_cost(&self, instance: usize, algorithm: usize) -> f64 {
        self.per_run_cost[instance][algorithm]
    }

    /// Average cost of running `algorithm` over all instances.
    pub fn mean_algorithm_cost(&self, algorithm: usize) -> f64 {
        let n = self.per_run_cost.len() as f64;
        self.per_run_cost.iter().map(|r| r[algorithm]).sum::<f64>() / n
    }
}

/// Selector cost plus the cost of the selected run, summed over instances.
pub fn total_cost(c: &CostModel, v: &SelectionVector) -> Result<f64> {
    if v.len() != c.per_run_cost.len() {
        return Err(Error::LengthMismatch {
            expected: c.per_run_cost.len(),
            found: v.len(),
        });
    }
    let mut total = 0.0;
    for (i, &j) in v.choices().iter().enumerate() {
        let row = &c.per_run_cost[i];
        let run = *row.get(j).ok_or(Error::AlgorithmOutOfRange {
            index: j,
            count: row.len(),
        })?;
        total += c.selector_cost + run;
    }
    Ok(total)
}
