//! Multiple-choice scoring: per-candidate perplexities to a probability
//! vector.
//!
//! For a K-way question the caller supplies the per-token perplexity of each
//! candidate continuation; the result is the probability vector stored in a
//! [`crate::records::PredictionRecord`]. Incoming values are treated as
//! already length-normalized (per-token); this crate never computes
//! perplexities itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-candidate perplexities for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScores {
    perplexities: Vec<f64>,
}

impl CandidateScores {
    /// Validates K >= 2 and that every perplexity is finite and positive.
    pub fn new(perplexities: Vec<f64>) -> Result<Self> {
        if perplexities.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need K >= 2 candidates, got {}",
                perplexities.len()
            )));
        }
        for (k, &p) in perplexities.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "perplexities[{k}] = {p} is not a positive finite value"
                )));
            }
        }
        Ok(Self { perplexities })
    }

    pub fn perplexities(&self) -> &[f64] {
        &self.perplexities
    }
}

/// How perplexities are normalized into probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// `p_k = (1/ppl_k) / sum_j (1/ppl_j)`. Parameter-free; the default.
    #[default]
    Reciprocal,
    /// Softmax over negative log perplexities. Agrees with `Reciprocal`
    /// in exact arithmetic (`e^{-ln p} = 1/p`); kept as a distinct code
    /// path so logs can record which one produced them.
    SoftmaxNegLog,
}

impl NormalizationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormalizationMode::Reciprocal => "reciprocal",
            NormalizationMode::SoftmaxNegLog => "softmax-neg-log",
        }
    }
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reciprocal" => Ok(NormalizationMode::Reciprocal),
            "softmax-neg-log" => Ok(NormalizationMode::SoftmaxNegLog),
            other => Err(Error::InvalidArgument(format!(
                "unknown score mode {other:?} (expected reciprocal or softmax-neg-log)"
            ))),
        }
    }
}

/// Normalizes candidate perplexities into a probability vector.
///
/// Strictly lower perplexity always yields strictly higher probability, and
/// the output sums to 1 within 1e-12.
pub fn scores_to_probs(scores: &CandidateScores, mode: NormalizationMode) -> Vec<f64> {
    match mode {
        NormalizationMode::Reciprocal => {
            let inv: Vec<f64> = scores.perplexities.iter().map(|p| 1.0 / p).collect();
            let total: f64 = inv.iter().sum();
            inv.into_iter().map(|v| v / total).collect()
        }
        NormalizationMode::SoftmaxNegLog => {
            let neg_log: Vec<f64> = scores.perplexities.iter().map(|p| -p.ln()).collect();
            let max = neg_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = neg_log.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = exp.iter().sum();
            exp.into_iter().map(|v| v / total).collect()
        }
    }
}
