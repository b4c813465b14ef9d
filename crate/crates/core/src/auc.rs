//! Area under the ROC curve in its Mann–Whitney form.
//!
//! Over every (Pass, Fail) pair, a pair counts 1 when the Pass instance scores
//! higher and 1/2 on a tie. The count is kept as an exact rational
//! `(2 * wins + ties) / (2 * P * N)` and converted to a float only on request.

use num_rational::Ratio;
use thiserror::Error;

use crate::dataset::Outcome;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AucError {
    #[error("test set contains a single class")]
    SingleClassTestSet,
    #[error("score is not a number")]
    NonFiniteScore,
}

/// Exact AUC of `(score, actual)` pairs with Pass as the positive class.
///
/// Runs in `O(n log n)` via tie-averaged ranks.
pub fn auc_exact<F: Scalar>(scored: &[(F, Outcome)]) -> Result<Ratio<u64>, AucError> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(AucError::NonFiniteScore);
    }
    let positives = scored.iter().filter(|(_, o)| *o == Outcome::Pass).count() as u64;
    let negatives = scored.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(AucError::SingleClassTestSet);
    }
    let mut sorted: Vec<&(F, Outcome)> = scored.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the rank sum of positives; a tie block spanning 1-based ranks
    // i..=j gives each member the doubled mid-rank i + j.
    let mut twice_rank_sum = 0u64;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start;
        while end + 1 < sorted.len() && sorted[end + 1].0 == sorted[start].0 {
            end += 1;
        }
        let doubled_mid_rank = (start + 1 + end + 1) as u64;
        let block_positives = sorted[start..=end].iter().filter(|(_, o)| *o == Outcome::Pass).count() as u64;
        twice_rank_sum += block_positives * doubled_mid_rank;
        start = end + 1;
    }
    // 2U = 2 R - P (P + 1)
    let twice_u = twice_rank_sum - positives * (positives + 1);
    Ok(Ratio::new(twice_u, 2 * positives * negatives))
}

pub fn auc<F: Scalar>(scored: &[(F, Outcome)]) -> Result<F, AucError> {
    auc_exact(scored).map(|r| ratio_to_scalar(&r))
}

pub fn ratio_to_scalar<F: Scalar>(r: &Ratio<u64>) -> F {
    let num = F::from_u64(*r.numer()).expect("u64 converts");
    let den = F::from_u64(*r.denom()).expect("u64 converts");
    num / den
}
