//! Pixel-overlap scoring of a labelled segmentation against ground truth.
//!
//! [`f_measure`] is the two-term score `1 / (1 + result - matched) +
//! matched / ground_truth`; [`reduced_f`] keeps only the second term and is
//! the metric used by the rest of the crate.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Pixel tallies for one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PixelCounts {
    result_pixels: u64,
    matched_pixels: u64,
    ground_truth_pixels: u64,
}

impl PixelCounts {
    pub fn new(result_pixels: u64, matched_pixels: u64, ground_truth_pixels: u64) -> Result<Self> {
        if ground_truth_pixels == 0 {
            return Err(Error::InvalidPixelCounts(
                "ground truth pixel count must be positive".into(),
            ));
        }
        if matched_pixels > result_pixels || matched_pixels > ground_truth_pixels {
            return Err(Error::InvalidPixelCounts(format!(
                "matched {matched_pixels} exceeds result {result_pixels} or ground truth {ground_truth_pixels}"
            )));
        }
        Ok(Self {
            result_pixels,
            matched_pixels,
            ground_truth_pixels,
        })
    }

    pub fn result_pixels(&self) -> u64 {
        self.result_pixels
    }

    pub fn matched_pixels(&self) -> u64 {
        self.matched_pixels
    }

    pub fn ground_truth_pixels(&self) -> u64 {
        self.ground_truth_pixels
    }
}

/// Full two-term score, in `(0, 2]`.
pub fn f_measure(c: &PixelCounts) -> f64 {
    let unmatched = (c.result_pixels - c.matched_pixels) as f64;
    1.0 / (1.0 + unmatched) + reduced_f(c)
}

/// Fraction of ground-truth pixels recovered.
pub fn reduced_f(c: &PixelCounts) -> f64 {
    c.matched_pixels as f64 / c.ground_truth_pixels as f64
}

/// Row-major grid of label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("label map must be non-empty".into()));
        }
        if labels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                found: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Parses whitespace-separated labels, one grid row per line. Blank
    /// lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut width = None;
        let mut labels = Vec::new();
        let mut height = 0;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let before = labels.len();
            for (k, tok) in line.split_whitespace().enumerate() {
                let label = tok.parse::<u32>().map_err(|_| Error::Parse {
                    line: n + 1,
                    column: k + 1,
                    message: format!("`{tok}` is not a non-negative integer label"),
                })?;
                labels.push(label);
            }
            let row_len = labels.len() - before;
            match width {
                None => width = Some(row_len),
                Some(w) if w != row_len => {
                    return Err(Error::Parse {
                        line: n + 1,
                        column: row_len.min(w) + 1,
                        message: format!("row has {row_len} labels, expected {w}"),
                    })
                }
                _ => {}
            }
            height += 1;
        }
        let width = width.ok_or(Error::Parse {
            line: 1,
            column: 1,
            message: "empty label map".into(),
        })?;
        Self::new(width, height, labels)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Distinct labels, ascending.
    pub fn distinct_labels(&self) -> Vec<u32> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            });
        }
        Ok(())
    }
}

pub fn count_pixels(result: &LabelMap, truth: &LabelMap, label: u32) -> Result<PixelCounts> {
    result.same_shape(truth)?;
    let (mut res, mut matched, mut gt) = (0u64, 0u64, 0u64);
    for (&r, &t) in result.labels.iter().zip(&truth.labels) {
        res += u64::from(r == label);
        gt += u64::from(t == label);
        matched += u64::from(r == label && t == label);
    }
    if gt == 0 {
        return Err(Error::LabelAbsent(label));
    }
    PixelCounts::new(res, matched, gt)
}

/// How per-label reduced-f values combine into one image score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    #[default]
    Unweighted,
    PixelWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub label: u32,
    pub counts: PixelCounts,
    pub f: f64,
    pub reduced_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEvaluation {
    pub per_label: Vec<LabelScore>,
    pub mean_f: f64,
    pub mean_reduced_f: f64,
    pub aggregation: Aggregation,
}

/// Scores every label present in `truth` and aggregates.
pub fn evaluate_maps(result: &LabelMap, truth: &LabelMap, aggregation: Aggregation) -> Result<MapEvaluation> {
    result.same_shape(truth)?;
    let per_label = truth
        .distinct_labels()
        .into_iter()
        .map(|label| {
            let counts = count_pixels(result, truth, label)?;
            Ok(LabelScore {
                label,
                counts,
                f: f_measure(&counts),
                reduced_f: reduced_f(&counts),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let weight = |s: &LabelScore| match aggregation {
        Aggregation::Unweighted => 1.0,
        Aggregation::PixelWeighted => s.counts.ground_truth_pixels as f64,
    };
    let total: f64 = per_label.iter().map(weight).sum();
    let mean_f = per_label.iter().map(|s| weight(s) * s.f).sum::<f64>() / total;
    let mean_reduced_f = per_label.iter().map(|s| weight(s) * s.reduced_f).sum::<f64>() / total;
    Ok(MapEvaluation {
        per_label,
        mean_f,
        mean_reduced_f,
        aggregation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f_measure_examples() {
        let perfect = PixelCounts::new(100, 100, 100).unwrap();
        assert_eq!(f_measure(&perfect), 2.0);

        let none = PixelCounts::new(100, 0, 100).unwrap();
        assert_eq!(f_measure(&none), 1.0 / 101.0);

        // 1/31 + 0.9, evaluated by hand
        let partial = PixelCounts::new(120, 90, 100).unwrap();
        assert!((f_measure(&partial) - 0.932_258_064_516_129).abs() < 1e-12);
    }

    #[test]
    fn reduced_f_examples() {
        assert_eq!(reduced_f(&PixelCounts::new(40, 40, 40).unwrap()), 1.0);
        assert_eq!(reduced_f(&PixelCounts::new(40, 0, 40).unwrap()), 0.0);
        assert_eq!(reduced_f(&PixelCounts::new(1000, 925, 1000).unwrap()), 0.925);
    }

    #[test]
    fn invalid_counts_rejected() {
        assert!(PixelCounts::new(10, 11, 20).is_err());
        assert!(PixelCounts::new(10, 5, 4).is_err());
        assert!(PixelCounts::new(0, 0, 0).is_err());
    }

    #[test]
    fn count_pixels_small_maps() {
        let a = LabelMap::parse("1 1\n1 2\n").unwrap();
        let c = count_pixels(&a, &a, 1).unwrap();
        assert_eq!((c.result_pixels(), c.matched_pixels(), c.ground_truth_pixels()), (3, 3, 3));

        let left = LabelMap::parse("5 0\n0 0").unwrap();
        let right = LabelMap::parse("0 0\n0 5").unwrap();
        assert_eq!(count_pixels(&left, &right, 5).unwrap().matched_pixels(), 0);

        assert!(matches!(count_pixels(&left, &right, 9), Err(Error::LabelAbsent(9))));
        let wide = LabelMap::parse("0 0 0").unwrap();
        assert!(matches!(
            count_pixels(&left, &wide, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        assert!(matches!(
            LabelMap::parse("1 2\n3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(LabelMap::parse("1 x"), Err(Error::Parse { column: 2, .. })));
        assert!(LabelMap::parse("\n\n").is_err());
    }

    #[test]
    fn evaluation_aggregates() {
        let truth = LabelMap::parse("1 1 1\n2 2 2\n2 2 2").unwrap();
        let result = LabelMap::parse("1 1 1\n1 1 1\n2 2 2").unwrap();
        let unweighted = evaluate_maps(&result, &truth, Aggregation::Unweighted).unwrap();
        // label 1: 3/3, label 2: 3/6
        assert!((unweighted.mean_reduced_f - 0.75).abs() < 1e-12);
        let weighted = evaluate_maps(&result, &truth, Aggregation::PixelWeighted).unwrap();
        assert!((weighted.mean_reduced_f - (3.0 + 3.0) / 9.0).abs() < 1e-12);
    }

    fn label_map() -> impl Strategy<Value = LabelMap> {
        (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u32..4, w * h)
                .prop_map(move |labels| LabelMap::new(w, h, labels).unwrap())
        })
    }

    proptest! {
        #[test]
        fn self_comparison_is_perfect(map in label_map()) {
            for label in map.distinct_labels() {
                let c = count_pixels(&map, &map, label).unwrap();
                prop_assert_eq!(reduced_f(&c), 1.0);
            }
        }

        #[test]
        fn first_term_is_the_difference(res in 0u64..500, matched in 0u64..500, extra in 1u64..500) {
            let matched = matched.min(res);
            let c = PixelCounts::new(res, matched, matched + extra).unwrap();
            let diff = f_measure(&c) - reduced_f(&c);
            prop_assert!((diff - 1.0 / (1.0 + (res - matched) as f64)).abs() < 1e-12);
        }

        #[test]
        fn reduced_f_monotone_in_matches(gt in 1u64..300, a in 0u64..300, b in 0u64..300) {
            let (lo, hi) = (a.min(b).min(gt), a.max(b).min(gt));
            let lo_c = PixelCounts::new(gt, lo, gt).unwrap();
            let hi_c = PixelCounts::new(gt, hi, gt).unwrap();
            prop_assert!(reduced_f(&lo_c) <= reduced_f(&hi_c));
        }
    }
}
