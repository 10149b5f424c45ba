//! Grouped metric reports and significance-tested comparisons.
//!
//! [`group_reports`] splits a record set along group-key fields and runs the
//! calibration suite per group. [`compare`] contrasts the groups along one
//! axis (typically the smoothing rate) against a baseline value, pairing the
//! remaining key fields (typically languages) as t-test samples.
//!
//! p-values go through a self-contained regularized incomplete beta
//! (Lanczos log-gamma plus a Lentz-style continued fraction, absolute error
//! below 1e-10), so identical inputs give identical bytes on any platform.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::calibration::{report, MetricConfig, MetricReport};
use crate::error::{Error, Result};
use crate::records::{GroupKey, RecordSet, SmoothingRate};

/// A group-key field records can be grouped or compared by.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupField {
    Model,
    SftDataset,
    Language,
    Smoothing,
    /// A key into `GroupKey::extra`.
    Extra(String),
}

impl GroupField {
    pub fn name(&self) -> String {
        match self {
            GroupField::Model => "model".into(),
            GroupField::SftDataset => "sft_dataset".into(),
            GroupField::Language => "language".into(),
            GroupField::Smoothing => "smoothing".into(),
            GroupField::Extra(k) => k.clone(),
        }
    }

    /// The field's display value on a key, if set.
    pub fn get(&self, key: &GroupKey) -> Option<String> {
        match self {
            GroupField::Model => (!key.model.is_empty()).then(|| key.model.clone()),
            GroupField::SftDataset => {
                (!key.sft_dataset.is_empty()).then(|| key.sft_dataset.clone())
            }
            GroupField::Language => (!key.language.is_empty()).then(|| key.language.clone()),
            GroupField::Smoothing => key.smoothing.map(|s| s.to_string()),
            GroupField::Extra(k) => key.extra.get(k).cloned(),
        }
    }

    fn set(&self, key: &mut GroupKey, value: &str) -> Result<()> {
        match self {
            GroupField::Model => key.model = value.to_string(),
            GroupField::SftDataset => key.sft_dataset = value.to_string(),
            GroupField::Language => key.language = value.to_string(),
            GroupField::Smoothing => key.smoothing = Some(SmoothingRate::parse(value)?),
            GroupField::Extra(k) => {
                key.extra.insert(k.clone(), value.to_string());
            }
        }
        Ok(())
    }

    fn clear(&self, key: &mut GroupKey) {
        match self {
            GroupField::Model => key.model.clear(),
            GroupField::SftDataset => key.sft_dataset.clear(),
            GroupField::Language => key.language.clear(),
            GroupField::Smoothing => key.smoothing = None,
            GroupField::Extra(k) => {
                key.extra.remove(k);
            }
        }
    }

    /// Normalizes a user-supplied value to the field's display form, so
    /// `--baseline 0.0` matches the canonical smoothing rendering `0`.
    pub fn canonicalize(&self, value: &str) -> Result<String> {
        match self {
            GroupField::Smoothing => Ok(SmoothingRate::parse(value)?.to_string()),
            _ => Ok(value.to_string()),
        }
    }
}

impl std::str::FromStr for GroupField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "model" => GroupField::Model,
            "sft_dataset" => GroupField::SftDataset,
            "language" => GroupField::Language,
            "smoothing" => GroupField::Smoothing,
            other => GroupField::Extra(other.to_string()),
        })
    }
}

/// Projects a key onto `fields` (other fields cleared).
pub fn project_key(key: &GroupKey, fields: &[GroupField]) -> GroupKey {
    let mut out = GroupKey::default();
    for f in fields {
        if let Some(v) = f.get(key) {
            // Values parsed from a valid key always round-trip.
            f.set(&mut out, &v).expect("projected value round-trips");
        }
    }
    out
}

/// Splits records by the projection onto `keys` and reports each group.
///
/// Iteration order is the lexicographic `GroupKey` order. A key naming a
/// field no record carries is an error. Per-group reports run data-parallel
/// under the `parallel` feature.
pub fn group_reports(
    rs: &RecordSet,
    keys: &[GroupField],
    cfg: &MetricConfig,
) -> Result<BTreeMap<GroupKey, MetricReport>> {
    if keys.is_empty() {
        return Err(Error::InvalidArgument("groupby needs at least one field".into()));
    }
    for field in keys {
        let known = rs.records.iter().any(|r| field.get(&r.group).is_some());
        if !known {
            return Err(Error::UnknownGroupField(field.name()));
        }
    }
    let mut grouped: BTreeMap<GroupKey, Vec<crate::records::PredictionRecord>> = BTreeMap::new();
    for r in &rs.records {
        grouped
            .entry(project_key(&r.group, keys))
            .or_default()
            .push(r.clone());
    }
    let entries: Vec<(GroupKey, RecordSet)> = grouped
        .into_iter()
        .map(|(k, records)| (k, RecordSet::new(records)))
        .collect();
    let cfg = *cfg;
    let reports: Vec<(GroupKey, Result<MetricReport>)> =
        crate::par::map_items(entries, move |(k, set)| {
            let rep = report(&set, &cfg);
            (k, rep)
        });
    let mut out = BTreeMap::new();
    for (k, rep) in reports {
        out.insert(k, rep?);
    }
    Ok(out)
}

/// A t statistic with its two-sided p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    /// Degrees of freedom (Welch-Satterthwaite in unpaired mode).
    pub df: f64,
    /// True when a zero-variance sample forced the degenerate rule.
    pub degenerate: bool,
}

/// Student's t-test.
///
/// Paired mode runs a one-sample t on the differences `a_i - b_i`; unpaired
/// mode is Welch's test. Zero variance with zero mean difference yields
/// `(t = 0, p = 1)`; zero variance with a nonzero difference is degenerate
/// (infinite t, `p = 0`).
pub fn t_test(a: &[f64], b: &[f64], paired: bool) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "t-test needs at least 2 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if paired {
        if a.len() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "paired t-test needs equal sample sizes, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let df = n - 1.0;
        if var == 0.0 {
            return Ok(degenerate_result(mean, df));
        }
        let t = mean / (var / n).sqrt();
        Ok(TTestResult { t, p: two_sided_p(t, df), df, degenerate: false })
    } else {
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let ma = a.iter().sum::<f64>() / na;
        let mb = b.iter().sum::<f64>() / nb;
        let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0);
        let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0);
        let se2 = va / na + vb / nb;
        if se2 == 0.0 {
            return Ok(degenerate_result(ma - mb, na + nb - 2.0));
        }
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2
            / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
        Ok(TTestResult { t, p: two_sided_p(t, df), df, degenerate: false })
    }
}

fn degenerate_result(mean_diff: f64, df: f64) -> TTestResult {
    if mean_diff == 0.0 {
        TTestResult { t: 0.0, p: 1.0, df, degenerate: false }
    } else {
        TTestResult {
            t: if mean_diff > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            p: 0.0,
            df,
            degenerate: true,
        }
    }
}

/// Two-sided p-value for a t statistic: `P(|T_df| >= |t|) =
/// I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_inc_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// `ln Gamma(z)` for `z > 0` via the Lanczos approximation.
fn ln_gamma(z: f64) -> f64 {
    const C: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut sum = 1.000_000_000_190_015;
    for (i, c) in C.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.506_628_274_631_000_5 * sum / z).ln()
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
///
/// Converges to absolute error below 1e-10 for the t-distribution
/// parameter ranges used here (`b = 1/2`, `a = df/2`).
pub fn regularized_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Symmetry keeps the continued fraction in its fast-converging region.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_inc_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    let front = ln_front.exp();

    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-15;
    let mut c = 1.0_f64;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500usize {
        let m_f = m as f64;
        // Even step.
        let num = m_f * (b - m_f) * x / ((a + 2.0 * m_f - 1.0) * (a + 2.0 * m_f));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        h *= d * c;
        // Odd step.
        let num = -(a + m_f) * (a + b + m_f) * x / ((a + 2.0 * m_f) * (a + 2.0 * m_f + 1.0));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front * h / a
}

/// Whether larger values of a metric are better, worse, or neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
    Neutral,
}

/// The metric columns of a comparison, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum MetricName {
    Accuracy,
    MeanEntropyBits,
    Ece,
    Sce,
    Ace,
    Rmsce,
    Mad,
}

impl MetricName {
    pub const ALL: [MetricName; 7] = [
        MetricName::Accuracy,
        MetricName::MeanEntropyBits,
        MetricName::Ece,
        MetricName::Sce,
        MetricName::Ace,
        MetricName::Rmsce,
        MetricName::Mad,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::MeanEntropyBits => "entropy_bits",
            MetricName::Ece => "ece",
            MetricName::Sce => "sce",
            MetricName::Ace => "ace",
            MetricName::Rmsce => "rmsce",
            MetricName::Mad => "mad",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            MetricName::Accuracy => Direction::HigherBetter,
            MetricName::MeanEntropyBits => Direction::Neutral,
            _ => Direction::LowerBetter,
        }
    }

    pub fn get(&self, r: &MetricReport) -> f64 {
        match self {
            MetricName::Accuracy => r.accuracy,
            MetricName::MeanEntropyBits => r.mean_entropy_bits,
            MetricName::Ece => r.ece,
            MetricName::Sce => r.sce,
            MetricName::Ace => r.ace,
            MetricName::Rmsce => r.rmsce,
            MetricName::Mad => r.mad,
        }
    }
}

/// Per-metric test outcome for one non-baseline axis value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricTest {
    pub t: f64,
    pub p: f64,
    /// The variant beats the baseline in the metric's direction (mean over
    /// paired rows).
    pub variant_better: bool,
    /// `variant_better` and `p < alpha`.
    pub significant: bool,
}

/// One non-baseline axis value contrasted against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantComparison {
    pub value: String,
    pub tests: BTreeMap<&'static str, MetricTest>,
    /// Rows (paired samples) used by the tests.
    pub paired_rows: usize,
}

/// A grouped-report comparison along one axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub axis: String,
    pub baseline: String,
    pub alpha: f64,
    pub paired: bool,
    /// Fewer than 5 paired rows: tests computed but low-powered.
    pub low_power: bool,
    /// Row key (axis cleared) -> axis value -> report.
    pub cells: BTreeMap<GroupKey, BTreeMap<String, MetricReport>>,
    pub variants: Vec<VariantComparison>,
}

/// Significance threshold (two-sided).
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Contrasts grouped reports along `axis` against `baseline`.
///
/// Rows are the group keys with the axis field cleared. For every other
/// axis value, each metric is tested over rows present on both sides —
/// paired Student's t by default, Welch when `paired` is false.
pub fn compare(
    reports: &BTreeMap<GroupKey, MetricReport>,
    axis: &GroupField,
    baseline: &str,
    paired: bool,
) -> Result<Comparison> {
    let baseline = &axis.canonicalize(baseline)?;
    let mut cells: BTreeMap<GroupKey, BTreeMap<String, MetricReport>> = BTreeMap::new();
    let mut axis_values: Vec<String> = Vec::new();
    for (key, rep) in reports {
        let value = axis.get(key).ok_or_else(|| Error::UnknownGroupField(axis.name()))?;
        if !axis_values.contains(&value) {
            axis_values.push(value.clone());
        }
        let mut row_key = key.clone();
        axis.clear(&mut row_key);
        cells.entry(row_key).or_default().insert(value, rep.clone());
    }
    axis_values.sort();
    if axis_values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "axis {:?} has {} value(s); need at least 2",
            axis.name(),
            axis_values.len()
        )));
    }
    if !axis_values.iter().any(|v| v == baseline) {
        return Err(Error::MissingBaseline(baseline.to_string()));
    }

    let mut variants = Vec::new();
    let mut min_rows = usize::MAX;
    for value in axis_values.iter().filter(|v| v.as_str() != baseline) {
        // Paired per-row samples present on both sides, in row order.
        let mut base_samples: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        let mut var_samples: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        let mut rows = 0usize;
        for row in cells.values() {
            if let (Some(b), Some(v)) = (row.get(baseline), row.get(value)) {
                rows += 1;
                for m in MetricName::ALL {
                    base_samples.entry(m.label()).or_default().push(m.get(b));
                    var_samples.entry(m.label()).or_default().push(m.get(v));
                }
            }
        }
        if rows < 2 {
            return Err(Error::InvalidArgument(format!(
                "axis value {value:?} shares only {rows} row(s) with baseline {baseline:?}; \
                 need at least 2 for a t-test"
            )));
        }
        min_rows = min_rows.min(rows);
        let mut tests = BTreeMap::new();
        for m in MetricName::ALL {
            let b = &base_samples[m.label()];
            let v = &var_samples[m.label()];
            let res = t_test(b, v, paired)?;
            let mean_diff = b.iter().sum::<f64>() / b.len() as f64
                - v.iter().sum::<f64>() / v.len() as f64;
            let variant_better = match m.direction() {
                Direction::HigherBetter => mean_diff < 0.0,
                Direction::LowerBetter => mean_diff > 0.0,
                Direction::Neutral => false,
            };
            tests.insert(
                m.label(),
                MetricTest {
                    t: res.t,
                    p: res.p,
                    variant_better,
                    significant: variant_better && res.p < DEFAULT_ALPHA,
                },
            );
        }
        variants.push(VariantComparison { value: value.clone(), tests, paired_rows: rows });
    }

    Ok(Comparison {
        axis: axis.name(),
        baseline: baseline.to_string(),
        alpha: DEFAULT_ALPHA,
        paired,
        low_power: min_rows < 5,
        cells,
        variants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{IngestOptions, PredictionRecord};

    fn sample_set() -> RecordSet {
        let mut records = Vec::new();
        for (i, (lang, smooth)) in [("en", "0.0"), ("en", "0.1"), ("yo", "0.0"), ("yo", "0.1")]
            .iter()
            .enumerate()
        {
            for j in 0..3 {
                let group = GroupKey {
                    model: "m".into(),
                    sft_dataset: "d".into(),
                    language: lang.to_string(),
                    smoothing: Some(SmoothingRate::parse(smooth).unwrap()),
                    extra: BTreeMap::new(),
                };
                let probs = vec![0.7, 0.1, 0.1, 0.1];
                records.push(
                    PredictionRecord::new(
                        format!("r{i}-{j}"),
                        probs,
                        if j == 0 { 0 } else { 1 },
                        group,
                        false,
                    )
                    .unwrap()
                    .0,
                );
            }
        }
        RecordSet::new(records)
    }

    #[test]
    fn single_group_matches_ungrouped() {
        let set = sample_set();
        let cfg = MetricConfig::default();
        let by_model = group_reports(&set, &[GroupField::Model], &cfg).unwrap();
        assert_eq!(by_model.len(), 1);
        let whole = report(&set, &cfg).unwrap();
        assert_eq!(by_model.values().next().unwrap(), &whole);
    }

    #[test]
    fn two_by_two_grouping() {
        let set = sample_set();
        let reports = group_reports(
            &set,
            &[GroupField::Language, GroupField::Smoothing],
            &MetricConfig::default(),
        )
        .unwrap();
        assert_eq!(reports.len(), 4);
        for rep in reports.values() {
            assert_eq!(rep.n, 3);
        }
    }

    #[test]
    fn absent_key_errors_by_name() {
        let set = sample_set();
        match group_reports(
            &set,
            &[GroupField::Extra("nope".into())],
            &MetricConfig::default(),
        ) {
            Err(Error::UnknownGroupField(k)) => assert_eq!(k, "nope"),
            other => panic!("expected UnknownGroupField, got {other:?}"),
        }
    }

    #[test]
    fn t_test_identical_paired() {
        let a = [0.1, 0.2, 0.3, 0.4];
        let res = t_test(&a, &a, true).unwrap();
        assert_eq!(res.t, 0.0);
        assert_eq!(res.p, 1.0);
        assert!(!res.degenerate);
    }

    #[test]
    fn t_test_constant_offset_degenerate() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 3.0, 4.0, 5.0, 6.0];
        let res = t_test(&a, &b, true).unwrap();
        assert!(res.degenerate);
        assert!(res.t.is_infinite() && res.t < 0.0);
        assert_eq!(res.p, 0.0);
    }

    #[test]
    fn t_test_antisymmetric() {
        let a = [0.171, 0.100, 0.140, 0.090, 0.200];
        let b = [0.087, 0.059, 0.120, 0.050, 0.110];
        let ab = t_test(&a, &b, true).unwrap();
        let ba = t_test(&b, &a, true).unwrap();
        assert!((ab.t + ba.t).abs() < 1e-12);
        assert!((ab.p - ba.p).abs() < 1e-12);
        let wab = t_test(&a, &b, false).unwrap();
        let wba = t_test(&b, &a, false).unwrap();
        assert!((wab.t + wba.t).abs() < 1e-12);
        assert!((wab.p - wba.p).abs() < 1e-12);
    }

    #[test]
    fn p_decreases_with_offset() {
        let a = [0.5, 0.6, 0.7, 0.8, 0.9];
        let mut last_p = 1.1;
        for offset in [0.0, 0.01, 0.05, 0.1, 0.2] {
            let b: Vec<f64> = a
                .iter()
                .enumerate()
                // Jitter keeps the difference variance positive and fixed.
                .map(|(i, x)| x + offset + 0.001 * (i as f64 - 2.0))
                .collect();
            let res = t_test(&a, &b, true).unwrap();
            assert!(res.p < last_p || (offset == 0.0 && res.p <= 1.0));
            last_p = res.p;
        }
        assert!(last_p < 0.05);
    }

    /// Closed-form t CDF checks: df=1 is Cauchy, df=2 has an elementary
    /// form. Two-sided p for df=1 is `1 - (2/pi) atan(|t|)`; for df=2 it is
    /// `1 - |t| / sqrt(2 + t^2)`.
    #[test]
    fn p_value_closed_forms() {
        for t in [0.5, 1.0, 2.0, 5.0, 12.7] {
            let p1 = two_sided_p(t, 1.0);
            let want1 = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
            assert!((p1 - want1).abs() < 1e-10, "df=1 t={t}: {p1} vs {want1}");

            let p2 = two_sided_p(t, 2.0);
            let want2 = 1.0 - t / (2.0 + t * t).sqrt();
            assert!((p2 - want2).abs() < 1e-10, "df=2 t={t}: {p2} vs {want2}");
        }
        assert!((two_sided_p(1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inc_beta_basics() {
        assert_eq!(regularized_inc_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(regularized_inc_beta(1.0, 2.0, 3.0), 1.0);
        // I_x(1,1) = x.
        for x in [0.1, 0.5, 0.9] {
            assert!((regularized_inc_beta(x, 1.0, 1.0) - x).abs() < 1e-12);
        }
        // I_x(2,2) = x^2 (3 - 2x).
        for x in [0.2, 0.5, 0.8] {
            let want = x * x * (3.0 - 2.0 * x);
            assert!((regularized_inc_beta(x, 2.0, 2.0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn compare_identical_sides_no_flags() {
        let set = sample_set();
        let reports = group_reports(
            &set,
            &[GroupField::Language, GroupField::Smoothing],
            &MetricConfig::default(),
        )
        .unwrap();
        // Both smoothing groups hold identical records, so every metric ties.
        let cmp = compare(&reports, &GroupField::Smoothing, "0.0", true).unwrap();
        assert_eq!(cmp.variants.len(), 1);
        for test in cmp.variants[0].tests.values() {
            assert!(!test.variant_better);
            assert!(!test.significant);
            assert_eq!(test.p, 1.0);
        }
        assert!(cmp.low_power); // only 2 languages
    }

    #[test]
    fn compare_missing_baseline_errors() {
        let set = sample_set();
        let reports = group_reports(
            &set,
            &[GroupField::Language, GroupField::Smoothing],
            &MetricConfig::default(),
        )
        .unwrap();
        assert!(matches!(
            compare(&reports, &GroupField::Smoothing, "0.7", true),
            Err(Error::MissingBaseline(_))
        ));
    }

    #[test]
    fn compare_flags_invariant_under_row_order() {
        // Build reports directly with a designed ordering: smoothing 0.1
        // halves ECE in every language.
        let mk_report = |ece: f64| MetricReport {
            n: 10,
            accuracy: 0.5,
            mean_entropy_bits: 1.0,
            ece,
            sce: ece,
            ace: ece,
            rmsce: ece,
            mad: ece * 0.9,
            empty_ranges: false,
        };
        let mut reports = BTreeMap::new();
        for (lang, e0) in [("am", 0.30), ("en", 0.32), ("fr", 0.28), ("sw", 0.31), ("yo", 0.29)] {
            for (s, scale) in [("0.0", 1.0), ("0.1", 0.5)] {
                let key = GroupKey {
                    language: lang.into(),
                    smoothing: Some(SmoothingRate::parse(s).unwrap()),
                    ..GroupKey::default()
                };
                reports.insert(key, mk_report(e0 * scale));
            }
        }
        let cmp = compare(&reports, &GroupField::Smoothing, "0.0", true).unwrap();
        let ece_test = cmp.variants[0].tests["ece"];
        assert!(ece_test.variant_better);
        assert!(ece_test.significant, "p = {}", ece_test.p);
        assert!(!cmp.low_power);
        // Accuracy ties exactly -> p = 1, no flag.
        let acc_test = cmp.variants[0].tests["accuracy"];
        assert_eq!(acc_test.p, 1.0);
        assert!(!acc_test.variant_better);
    }
}
