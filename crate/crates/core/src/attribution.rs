//! Perturbation-based local explanations.
//!
//! Tokens of the explained text (whitespace-separated) are switched off by
//! random binary masks, the classifier is re-run on each perturbed text, and
//! a locally weighted ridge regression of `p_toxic` on the mask bits gives one
//! weight per token. Positive weights push toward the toxic label.
//!
//! Locality weight of a mask `z` is `exp(-D(z)^2 / sigma^2)` with
//! `D(z) = 1 - kept / T`. The ridge penalty applies to token weights only,
//! never to the intercept. Short texts (`T <= 10`) are enumerated exhaustively
//! whenever the sample budget covers all `2^T` masks.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::LanguageModel;
use crate::classifiers::Method;
use crate::corpus::Document;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttributionError {
    #[error("mask has {mask} bits but text has {tokens} tokens")]
    LengthMismatch { mask: usize, tokens: usize },
    #[error("text has no tokens to explain")]
    NoTokens,
    #[error("sample budget must be at least 1")]
    NoSamples,
    #[error("kernel width must be positive and finite")]
    BadKernelWidth,
    #[error("{dropped} of {attempted} perturbations failed to classify")]
    TooManyDrops { dropped: usize, attempted: usize },
    #[error("surrogate regression is singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn all(len: usize) -> Self {
        Mask { bits: vec![true; len] }
    }

    pub fn kept(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Whitespace surface tokens used for masking.
pub fn surface_tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Space-joined tokens whose mask bit is set. An all-zero mask gives `""`.
pub fn perturb<S: AsRef<str>>(tokens: &[S], mask: &Mask) -> Result<String, AttributionError> {
    if mask.bits.len() != tokens.len() {
        return Err(AttributionError::LengthMismatch {
            mask: mask.bits.len(),
            tokens: tokens.len(),
        });
    }
    let kept: Vec<&str> = tokens
        .iter()
        .zip(&mask.bits)
        .filter(|(_, keep)| **keep)
        .map(|(t, _)| t.as_ref())
        .collect();
    Ok(kept.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub kernel_width: f64,
    pub ridge: f64,
    /// Largest tolerated fraction of failed perturbations.
    pub max_drop_rate: f64,
    /// Enumerate every mask when the budget covers them all. Off forces sampling.
    pub allow_enumeration: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            n_samples: 1000,
            seed: 0,
            kernel_width: 0.25,
            ridge: 0.01,
            max_drop_rate: 0.2,
            allow_enumeration: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Perturbations that entered the regression.
    pub n_samples: usize,
    pub seed: u64,
    pub kernel_width: f64,
    pub ridge: f64,
    pub exhaustive: bool,
    pub dropped: usize,
}

impl Explanation {
    /// Index of the largest weight, if any token has one.
    pub fn argmax(&self) -> Option<usize> {
        self.weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

fn masks_for(tokens: usize, config: &ExplainConfig) -> (Vec<Mask>, bool) {
    if config.allow_enumeration && tokens <= 10 && config.n_samples >= 1usize << tokens {
        let masks = (0..1usize << tokens)
            .map(|code| Mask {
                bits: (0..tokens).map(|j| code >> j & 1 == 1).collect(),
            })
            .collect();
        return (masks, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut masks = Vec::with_capacity(config.n_samples);
    masks.push(Mask::all(tokens));
    for _ in 1..config.n_samples {
        masks.push(Mask {
            bits: (0..tokens).map(|_| rng.random_bool(0.5)).collect(),
        });
    }
    (masks, false)
}

/// Explains `predict` around `text`. `predict` returns `p_toxic` for a
/// perturbed text; failures drop that perturbation. A failure on the empty
/// (all-zero) perturbation is not counted against the drop budget.
pub fn explain_text<E>(
    text: &str,
    mut predict: impl FnMut(&str) -> Result<f64, E>,
    config: &ExplainConfig,
) -> Result<Explanation, AttributionError> {
    let tokens = surface_tokens(text);
    let t = tokens.len();
    if t == 0 {
        return Err(AttributionError::NoTokens);
    }
    if config.n_samples == 0 {
        return Err(AttributionError::NoSamples);
    }
    if !(config.kernel_width > 0.0 && config.kernel_width.is_finite()) {
        return Err(AttributionError::BadKernelWidth);
    }

    let (masks, exhaustive) = masks_for(t, config);
    let mut samples: Vec<(Mask, f64)> = Vec::with_capacity(masks.len());
    let mut attempted = 0;
    let mut dropped = 0;
    for mask in masks {
        let perturbed = perturb(&tokens, &mask)?;
        let empty = mask.kept() == 0;
        match predict(&perturbed) {
            Ok(p) if p.is_finite() => {
                attempted += 1;
                samples.push((mask, p));
            }
            _ if empty => {}
            _ => {
                attempted += 1;
                dropped += 1;
            }
        }
    }
    if attempted == 0 || dropped as f64 > config.max_drop_rate * attempted as f64 {
        return Err(AttributionError::TooManyDrops { dropped, attempted });
    }

    let sigma2 = config.kernel_width * config.kernel_width;
    let weighted: Vec<(&Mask, f64, f64)> = samples
        .iter()
        .map(|(mask, p)| {
            let distance = 1.0 - mask.kept() as f64 / t as f64;
            (mask, libm::exp(-distance * distance / sigma2), *p)
        })
        .collect();
    let coef = weighted_ridge(t, &weighted, config.ridge)?;

    Ok(Explanation {
        tokens: tokens.iter().map(|s| s.to_string()).collect(),
        weights: coef[1..].to_vec(),
        intercept: coef[0],
        n_samples: samples.len(),
        seed: config.seed,
        kernel_width: config.kernel_width,
        ridge: config.ridge,
        exhaustive,
        dropped,
    })
}

/// Explains a configured classifier's `p_toxic` on `doc`.
pub fn explain(
    doc: &Document,
    method: &Method,
    model: &dyn LanguageModel,
    config: &ExplainConfig,
) -> Result<Explanation, AttributionError> {
    explain_text(
        &doc.text,
        |text| {
            let perturbed = Document::new(doc.id.clone(), text, doc.gold_label).map_err(|_| ())?;
            method.classify(&perturbed, model).map(|d| d.p_toxic).map_err(|_| ())
        },
        config,
    )
}

/// Solves `(Z^T W Z + diag(0, l, .., l)) beta = Z^T W y`, where each row of
/// `Z` is `[1, bits..]`. Returns `[intercept, weights..]`.
fn weighted_ridge(
    features: usize,
    samples: &[(&Mask, f64, f64)],
    ridge: f64,
) -> Result<Vec<f64>, AttributionError> {
    let n = features + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (mask, w, y) in samples {
        row[0] = 1.0;
        for (slot, bit) in row[1..].iter_mut().zip(&mask.bits) {
            *slot = if *bit { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            b[i] += w * y * row[i];
            for j in 0..n {
                a[i * n + j] += w * row[i] * row[j];
            }
        }
    }
    for i in 1..n {
        a[i * n + i] += ridge;
    }
    solve(&mut a, &mut b, n)?;
    Ok(b)
}

/// Gaussian elimination with partial pivoting, in place; the solution ends up in `b`.
fn solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), AttributionError> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .ok_or(AttributionError::Singular)?;
        if !(a[pivot * n + col].abs() > 1e-300) {
            return Err(AttributionError::Singular);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        let diag = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= factor * a[col * n + k];
            }
            b[r] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    Ok(())
}
