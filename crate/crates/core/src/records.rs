//! Prediction-log data model and line-delimited ingestion.
//!
//! One record per line, one JSON object per record:
//!
//! ```text
//! {"id":"q1","probs":[0.7,0.1,0.1,0.1],"label":0,
//!  "group":{"model":"m","sft_dataset":"base","language":"en","smoothing":0.1}}
//! ```
//!
//! A record may carry `perplexities` instead of `probs`; those are converted
//! to a probability vector on ingestion (see [`crate::scoring`]).
//!
//! Probability vectors are re-normalized to unit sum on ingestion. In strict
//! mode a sum deviating from 1 by more than `1e-6` is an error; otherwise the
//! record is re-normalized and counted in the returned tally.
//!
//! Two log-base conventions coexist deliberately: the entropy *metric*
//! ([`PredictionRecord::entropy_bits`]) is in bits, while training losses
//! (see [`crate::smoothing`]) are in nats.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scoring::{scores_to_probs, CandidateScores, NormalizationMode};

/// Tolerance for accepting a probability vector's sum as "unit".
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Sums within this of 1 are taken as-is instead of being re-divided, so
/// normalization is idempotent and serialize/parse round-trips are
/// bit-exact.
pub const RENORM_EPSILON: f64 = 1e-9;

/// A smoothing rate as an exact decimal fraction `mantissa / 10^exponent`.
///
/// Group keys are compared and printed exactly, so `0.1` and `0.10` are the
/// same group while no float-formatting noise can split or merge groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SmoothingRate {
    mantissa: u64,
    exponent: u32,
}

impl SmoothingRate {
    /// Parses a non-negative decimal like `0.1`, `1`, `.25`, or `1e-1`.
    pub fn parse(s: &str) -> Result<Self> {
        let err = || Error::InvalidArgument(format!("smoothing rate {s:?} is not a decimal in [0,1]"));
        let (body, extra_exp) = match s.find(['e', 'E']) {
            Some(i) => {
                let exp: i32 = s[i + 1..].parse().map_err(|_| err())?;
                (&s[..i], exp)
            }
            None => (s, 0),
        };
        let (int_part, frac_part) = match body.find('.') {
            Some(i) => (&body[..i], &body[i + 1..]),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        let digits: String = format!("{int_part}{frac_part}");
        if !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let mantissa: u64 = digits.parse().map_err(|_| err())?;
        let exp = frac_part.len() as i32 - extra_exp;
        let mut rate = if exp >= 0 {
            SmoothingRate { mantissa, exponent: exp as u32 }
        } else {
            let scale = 10u64.checked_pow((-exp) as u32).ok_or_else(err)?;
            let mantissa = mantissa.checked_mul(scale).ok_or_else(err)?;
            SmoothingRate { mantissa, exponent: 0 }
        };
        rate.normalize();
        if rate.value() > 1.0 {
            return Err(err());
        }
        Ok(rate)
    }

    /// Exact decimal of an `f64` via its shortest round-trip representation.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "smoothing rate {v} outside [0,1]"
            )));
        }
        Self::parse(&format!("{v}"))
    }

    pub fn value(&self) -> f64 {
        self.mantissa as f64 / 10f64.powi(self.exponent as i32)
    }

    fn normalize(&mut self) {
        while self.exponent > 0 && self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.exponent -= 1;
        }
    }
}

impl PartialOrd for SmoothingRate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SmoothingRate {
    fn cmp(&self, other: &Self) -> Ordering {
        // a/10^e vs b/10^f compared as a*10^f vs b*10^e in u128.
        let lhs = self.mantissa as u128 * 10u128.pow(other.exponent);
        let rhs = other.mantissa as u128 * 10u128.pow(self.exponent);
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for SmoothingRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let digits = format!("{:0>width$}", self.mantissa, width = self.exponent as usize + 1);
        let split = digits.len() - self.exponent as usize;
        write!(f, "{}.{}", &digits[..split], &digits[split..])
    }
}

impl Serialize for SmoothingRate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for SmoothingRate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = serde_json::Number::deserialize(d)?;
        SmoothingRate::parse(&n.to_string()).map_err(D::Error::custom)
    }
}

/// The axes a record group is identified by.
///
/// Equality is field-wise; ordering is lexicographic over
/// `(model, sft_dataset, language, smoothing, extra)`, which fixes report
/// row order everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub struct GroupKey {
    #[serde(default)]
    pub model: String,
    /// `"base"` marks an untuned model.
    #[serde(default)]
    pub sft_dataset: String,
    #[serde(default)]
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingRate>,
    /// Extra string-valued axes, kept sorted by key.
    #[serde(flatten)]
    pub extra: BTreeMap<String, String>,
}

impl GroupKey {
    /// Compact single-token rendering, used for file names and legends.
    pub fn slug(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        for field in [&self.model, &self.sft_dataset, &self.language] {
            if !field.is_empty() {
                parts.push(field.clone());
            }
        }
        if let Some(s) = &self.smoothing {
            parts.push(format!("s{s}"));
        }
        for (k, v) in &self.extra {
            parts.push(format!("{k}-{v}"));
        }
        if parts.is_empty() {
            return "all".to_string();
        }
        let joined = parts.join("_");
        joined
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '-' })
            .collect()
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.model.is_empty() {
            parts.push(format!("model={}", self.model));
        }
        if !self.sft_dataset.is_empty() {
            parts.push(format!("sft_dataset={}", self.sft_dataset));
        }
        if !self.language.is_empty() {
            parts.push(format!("language={}", self.language));
        }
        if let Some(s) = &self.smoothing {
            parts.push(format!("smoothing={s}"));
        }
        for (k, v) in &self.extra {
            parts.push(format!("{k}={v}"));
        }
        if parts.is_empty() {
            write!(f, "(all)")
        } else {
            write!(f, "{}", parts.join(","))
        }
    }
}

/// One example's class-probability vector, true label, and group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub id: String,
    pub probs: Vec<f64>,
    pub label: usize,
    pub group: GroupKey,
}

impl PredictionRecord {
    /// Validates invariants and normalizes the probability vector.
    ///
    /// Returns `(record, renormalized)` where `renormalized` is true when
    /// the raw sum deviated from 1 by more than [`RENORM_EPSILON`] and the
    /// vector was divided by it. `strict` rejects sums further than
    /// [`SUM_TOLERANCE`] from 1.
    pub fn new(
        id: String,
        probs: Vec<f64>,
        label: usize,
        group: GroupKey,
        strict: bool,
    ) -> Result<(Self, bool)> {
        let invalid = |msg: String| Error::InvalidRecord { line: None, msg };
        if probs.len() < 2 {
            return Err(invalid(format!("need K >= 2 classes, got {}", probs.len())));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(invalid(format!("probs[{k}] = {p} is not finite")));
            }
            if p < 0.0 {
                return Err(invalid(format!("probs[{k}] = {p} is negative")));
            }
        }
        if label >= probs.len() {
            return Err(invalid(format!(
                "label {label} out of range for K = {}",
                probs.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(invalid("probability vector sums to 0".to_string()));
        }
        let deviation = (sum - 1.0).abs();
        if strict && deviation > SUM_TOLERANCE {
            return Err(invalid(format!(
                "probability sum {sum} deviates from 1 by more than {SUM_TOLERANCE}"
            )));
        }
        let renormalized = deviation > RENORM_EPSILON;
        let mut probs = probs;
        if renormalized {
            for p in &mut probs {
                *p /= sum;
            }
        }
        Ok((Self { id, probs, label, group }, renormalized))
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// The predicted class and its confidence: argmax over the probability
    /// vector (ties break to the lowest index) and the probability there.
    pub fn prediction(&self) -> (usize, f64) {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = k;
            }
        }
        (best, self.probs[best])
    }

    /// Confidence: the maximum class probability.
    pub fn confidence(&self) -> f64 {
        self.prediction().1
    }

    pub fn is_correct(&self) -> bool {
        self.prediction().0 == self.label
    }

    /// Shannon entropy of the probability vector in bits, with
    /// `0 * log2(0) = 0`.
    pub fn entropy_bits(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }
}

/// An ordered collection of records, optionally with a shared class count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordSet {
    pub records: Vec<PredictionRecord>,
    /// Set when every record has the same K (required by SCE/ACE).
    pub uniform_k: Option<usize>,
}

impl RecordSet {
    /// Builds a set, detecting a uniform class count.
    pub fn new(records: Vec<PredictionRecord>) -> Self {
        let uniform_k = match records.first() {
            Some(first) => {
                let k = first.k();
                records.iter().all(|r| r.k() == k).then_some(k)
            }
            None => None,
        };
        Self { records, uniform_k }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The shared class count, or an error naming the first mismatch.
    pub fn require_uniform_k(&self) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::EmptyRecordSet);
        }
        let expected = self.records[0].k();
        for r in &self.records {
            if r.k() != expected {
                return Err(Error::MixedClassCount { expected, found: r.k() });
            }
        }
        Ok(expected)
    }
}

/// Ingestion behavior.
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Reject probability sums further than [`SUM_TOLERANCE`] from 1.
    pub strict: bool,
    /// How `perplexities` fields are converted to probabilities.
    pub score_mode: NormalizationMode,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { strict: false, score_mode: NormalizationMode::Reciprocal }
    }
}

/// A parsed record set plus ingestion tallies.
#[derive(Debug, Clone)]
pub struct ParsedRecords {
    pub set: RecordSet,
    /// Records whose probability vector was adjusted to unit sum.
    pub renormalized: usize,
}

#[derive(Deserialize)]
struct WireRecord {
    id: String,
    #[serde(default)]
    probs: Option<Vec<f64>>,
    #[serde(default)]
    perplexities: Option<Vec<f64>>,
    label: i64,
    group: GroupKey,
}

/// Parses line-delimited records from a reader.
///
/// Records come back in input order. Blank lines are skipped; any other
/// malformed line is an error carrying its 1-based line number.
pub fn parse_records<R: BufRead>(reader: R, opts: IngestOptions) -> Result<ParsedRecords> {
    let mut records = Vec::new();
    let mut renormalized = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let at_line = |e: Error| match e {
            Error::InvalidRecord { msg, .. } => Error::InvalidRecord { line: Some(lineno), msg },
            Error::InvalidArgument(msg) => Error::InvalidRecord { line: Some(lineno), msg },
            other => other,
        };
        let probs = match (wire.probs, wire.perplexities) {
            (Some(p), None) => p,
            (None, Some(ppl)) => {
                let scores = CandidateScores::new(ppl).map_err(at_line)?;
                scores_to_probs(&scores, opts.score_mode)
            }
            (Some(_), Some(_)) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "record has both `probs` and `perplexities`".to_string(),
                })
            }
            (None, None) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "record has neither `probs` nor `perplexities`".to_string(),
                })
            }
        };
        if wire.label < 0 {
            return Err(Error::InvalidRecord {
                line: Some(lineno),
                msg: format!("label {} is negative", wire.label),
            });
        }
        let (record, adjusted) =
            PredictionRecord::new(wire.id, probs, wire.label as usize, wire.group, opts.strict)
                .map_err(at_line)?;
        if adjusted {
            renormalized += 1;
        }
        records.push(record);
    }
    Ok(ParsedRecords { set: RecordSet::new(records), renormalized })
}

/// Serializes records back to the line-delimited format.
///
/// `parse(serialize(parse(x)))` is field-equal to `parse(x)`.
pub fn write_records<W: std::io::Write>(set: &RecordSet, mut w: W) -> Result<()> {
    for r in &set.records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::InvalidRecord {
            line: None,
            msg: format!("serialization failed: {e}"),
        })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
