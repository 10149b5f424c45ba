//! Binning strategies and calibration-error estimators.
//!
//! Five estimators over a record set:
//!
//! * [`ece`] — bin-weighted |accuracy − confidence| over uniform-width
//!   confidence bins,
//! * [`sce`] — the per-class extension of ECE, averaged over classes,
//! * [`ace`] — unweighted |accuracy − confidence| over per-class equal-mass
//!   ranges,
//! * [`rmsce`] / [`mad`] — root-mean-square and mean-absolute gaps over
//!   equal-mass confidence bins (MAD is always a lower bound of RMSCE).
//!
//! Uniform bins are left-open/right-closed, `((m-1)/M, m/M]`, except the
//! first bin which includes 0. Equal-mass bins come from a stable ascending
//! sort on the binned quantity; the first `N mod R` bins take the extra
//! record. Empty bins contribute zero weight everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::RecordSet;

/// How records were assigned to bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionStrategy {
    /// `M` equal-width intervals covering [0, 1].
    Uniform { bins: usize },
    /// `R` ranges of (near-)equal record count.
    EqualMass { ranges: usize },
}

/// Aggregates for one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub count: usize,
    /// Mean correctness; 0 for an empty bin.
    pub acc: f64,
    /// Mean of the binned quantity; 0 for an empty bin.
    pub conf: f64,
    /// Interval bounds (uniform strategy only).
    pub bounds: Option<(f64, f64)>,
}

impl Bin {
    fn from_members(values: &[f64], correct: &[bool], bounds: Option<(f64, f64)>) -> Self {
        let count = values.len();
        if count == 0 {
            return Bin { count, acc: 0.0, conf: 0.0, bounds };
        }
        let conf = values.iter().sum::<f64>() / count as f64;
        let acc = correct.iter().filter(|&&c| c).count() as f64 / count as f64;
        Bin { count, acc, conf, bounds }
    }
}

/// An assignment of records to bins with per-bin aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinPartition {
    pub strategy: PartitionStrategy,
    pub bins: Vec<Bin>,
    /// Total record count; bin counts always sum to this.
    pub total: usize,
    /// True when some bin ended up empty (e.g. R > N).
    pub has_empty: bool,
}

impl BinPartition {
    /// Weighted sum of `f(bin)` with weights `|B|/N`; empty input gives 0.
    fn weighted_gap<F: Fn(&Bin) -> f64>(&self, f: F) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.count as f64 / self.total as f64 * f(b))
            .sum()
    }
}

/// Index of the uniform bin holding `q`, for bins `((m-1)/M, m/M]` with the
/// first bin closed at 0.
fn uniform_bin_index(q: f64, m: usize) -> usize {
    let scaled = (q * m as f64).ceil() as usize;
    scaled.clamp(1, m) - 1
}

/// Partitions `(quantity, correct)` pairs into `M` uniform-width bins.
///
/// Quantities must lie in [0, 1]. Each record lands in exactly one bin.
pub fn partition_uniform(items: &[(f64, bool)], m: usize) -> Result<BinPartition> {
    if m == 0 {
        return Err(Error::InvalidArgument("bin count M must be >= 1".into()));
    }
    for &(q, _) in items {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "binned quantity {q} outside [0,1]"
            )));
        }
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut correct: Vec<Vec<bool>> = vec![Vec::new(); m];
    for &(q, c) in items {
        let idx = uniform_bin_index(q, m);
        values[idx].push(q);
        correct[idx].push(c);
    }
    let bins: Vec<Bin> = (0..m)
        .map(|i| {
            let bounds = Some((i as f64 / m as f64, (i + 1) as f64 / m as f64));
            Bin::from_members(&values[i], &correct[i], bounds)
        })
        .collect();
    let has_empty = bins.iter().any(|b| b.count == 0);
    Ok(BinPartition {
        strategy: PartitionStrategy::Uniform { bins: m },
        bins,
        total: items.len(),
        has_empty,
    })
}

/// Partitions `(quantity, correct)` pairs into `R` equal-mass ranges.
///
/// Records are sorted ascending by quantity (stable, so ties keep input
/// order); the first `N mod R` ranges take one extra record. `R > N` leaves
/// trailing ranges empty, reported through `has_empty`.
pub fn partition_equal_mass(items: &[(f64, bool)], r: usize) -> Result<BinPartition> {
    if r == 0 {
        return Err(Error::InvalidArgument("range count R must be >= 1".into()));
    }
    let mut sorted: Vec<(f64, bool)> = items.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let base = n / r;
    let extra = n % r;
    let mut bins = Vec::with_capacity(r);
    let mut offset = 0;
    for i in 0..r {
        let size = base + usize::from(i < extra);
        let slice = &sorted[offset..offset + size];
        let values: Vec<f64> = slice.iter().map(|&(q, _)| q).collect();
        let correct: Vec<bool> = slice.iter().map(|&(_, c)| c).collect();
        bins.push(Bin::from_members(&values, &correct, None));
        offset += size;
    }
    let has_empty = bins.iter().any(|b| b.count == 0);
    Ok(BinPartition {
        strategy: PartitionStrategy::EqualMass { ranges: r },
        bins,
        total: n,
        has_empty,
    })
}

/// `(confidence, correct)` pairs for every record.
pub fn confidence_items(rs: &RecordSet) -> Vec<(f64, bool)> {
    rs.records
        .iter()
        .map(|r| {
            let (pred, conf) = r.prediction();
            (conf, pred == r.label)
        })
        .collect()
}

/// `(probs[k], label == k)` pairs for class `k`, optionally dropping
/// probabilities below `epsilon`.
fn class_items(rs: &RecordSet, k: usize, epsilon: f64) -> Vec<(f64, bool)> {
    rs.records
        .iter()
        .filter(|r| r.probs[k] >= epsilon)
        .map(|r| (r.probs[k], r.label == k))
        .collect()
}

/// Fraction of records whose argmax prediction is the true label.
pub fn accuracy(rs: &RecordSet) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let correct = rs.records.iter().filter(|r| r.is_correct()).count();
    Ok(correct as f64 / rs.len() as f64)
}

/// Mean predictive entropy in bits.
pub fn mean_entropy_bits(rs: &RecordSet) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    Ok(rs.records.iter().map(|r| r.entropy_bits()).sum::<f64>() / rs.len() as f64)
}

/// Expected calibration error over `M` uniform confidence bins.
pub fn ece(rs: &RecordSet, m: usize) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let partition = partition_uniform(&confidence_items(rs), m)?;
    Ok(partition.weighted_gap(|b| (b.acc - b.conf).abs()))
}

/// Static calibration error: ECE applied to every class probability,
/// averaged over the `K` classes. Requires a uniform class count.
pub fn sce(rs: &RecordSet, m: usize) -> Result<f64> {
    let k = rs.require_uniform_k()?;
    let mut total = 0.0;
    for class in 0..k {
        let partition = partition_uniform(&class_items(rs, class, 0.0), m)?;
        total += partition.weighted_gap(|b| (b.acc - b.conf).abs());
    }
    Ok(total / k as f64)
}

/// Adaptive calibration error: unweighted mean |acc − conf| over `R`
/// equal-mass ranges per class. Probabilities below `epsilon` are dropped
/// before range construction (`epsilon = 0` keeps everything).
pub fn ace(rs: &RecordSet, r: usize, epsilon: f64) -> Result<f64> {
    let k = rs.require_uniform_k()?;
    let mut total = 0.0;
    for class in 0..k {
        let partition = partition_equal_mass(&class_items(rs, class, epsilon), r)?;
        for bin in partition.bins.iter().filter(|b| b.count > 0) {
            total += (bin.acc - bin.conf).abs();
        }
    }
    Ok(total / (k * r) as f64)
}

/// Root-mean-square calibration error over `R` equal-mass confidence bins.
pub fn rmsce(rs: &RecordSet, r: usize) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let partition = partition_equal_mass(&confidence_items(rs), r)?;
    Ok(partition
        .weighted_gap(|b| (b.acc - b.conf) * (b.acc - b.conf))
        .sqrt())
}

/// Mean-absolute-deviation calibration error over the same equal-mass bins
/// as [`rmsce`]; never exceeds it.
pub fn mad(rs: &RecordSet, r: usize) -> Result<f64> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let partition = partition_equal_mass(&confidence_items(rs), r)?;
    Ok(partition.weighted_gap(|b| (b.acc - b.conf).abs()))
}

/// Bin counts for the metric suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Uniform bin count for ECE/SCE.
    pub bins: usize,
    /// Equal-mass range count for ACE/RMSCE/MAD.
    pub ranges: usize,
    /// ACE threshold; probabilities below it are ignored.
    pub ace_epsilon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { bins: 10, ranges: 10, ace_epsilon: 0.0 }
    }
}

/// All seven statistics for one record group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub accuracy: f64,
    pub mean_entropy_bits: f64,
    pub ece: f64,
    pub sce: f64,
    pub ace: f64,
    pub rmsce: f64,
    pub mad: f64,
    /// True when some equal-mass range was empty (R > N or ACE filtering).
    pub empty_ranges: bool,
}

/// Computes the full [`MetricReport`] for a record set.
pub fn report(rs: &RecordSet, cfg: &MetricConfig) -> Result<MetricReport> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let k = rs.require_uniform_k()?;
    let conf_partition = partition_equal_mass(&confidence_items(rs), cfg.ranges)?;
    let mut empty_ranges = conf_partition.has_empty;
    for class in 0..k {
        let p = partition_equal_mass(&class_items(rs, class, cfg.ace_epsilon), cfg.ranges)?;
        empty_ranges |= p.has_empty;
    }
    Ok(MetricReport {
        n: rs.len(),
        accuracy: accuracy(rs)?,
        mean_entropy_bits: mean_entropy_bits(rs)?,
        ece: ece(rs, cfg.bins)?,
        sce: sce(rs, cfg.bins)?,
        ace: ace(rs, cfg.ranges, cfg.ace_epsilon)?,
        rmsce: rmsce(rs, cfg.ranges)?,
        mad: mad(rs, cfg.ranges)?,
        empty_ranges,
    })
}
