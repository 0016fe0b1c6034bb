use std::cmp::Ordering;

use crate::error::{GqeError, Result};

/// ROC AUC as the Mann-Whitney statistic: the probability that a random
/// positive outscores a random negative, ties counting one half.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(GqeError::Argument("AUC needs at least one score on each side".into()));
    }
    check_finite(positives)?;
    check_finite(negatives)?;
    let mut neg = negatives.to_vec();
    neg.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut total = 0.0;
    for &p in positives {
        let (below, ties) = below_and_ties(&neg, p);
        total += below as f64 + 0.5 * ties as f64;
    }
    Ok(total / (positives.len() as f64 * neg.len() as f64))
}

/// Percentile rank of one positive within its negative pool:
/// `(negatives strictly below + ties / 2) / pool size`.
pub fn apr(positive: f64, negatives: &[f64]) -> Result<f64> {
    if negatives.is_empty() {
        return Err(GqeError::Degenerate("empty negative pool".into()));
    }
    check_finite(negatives)?;
    check_finite(&[positive])?;
    let (below, ties) = negatives.iter().fold((0usize, 0usize), |(b, t), &n| {
        if n < positive {
            (b + 1, t)
        } else if n == positive {
            (b, t + 1)
        } else {
            (b, t)
        }
    });
    Ok((below as f64 + 0.5 * ties as f64) / negatives.len() as f64)
}

fn below_and_ties(sorted: &[f64], x: f64) -> (usize, usize) {
    let lo = sorted.partition_point(|&v| v < x);
    let hi = sorted.partition_point(|&v| v <= x);
    (lo, hi - lo)
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GqeError::Numeric("non-finite score".into()))
    }
}
