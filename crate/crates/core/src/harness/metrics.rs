//! Scoring: circular RMSE, stream-to-source assignment and classification
//! error rate.

use crate::angle::wrap_diff;
use crate::error::{CassError, Result};

/// Root-mean-square of wrapped angular errors, in degrees. Errors are wrapped
/// to `(−π, π]` before squaring.
pub fn circular_rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(CassError::LengthMismatch(format!(
            "{} estimates vs {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    if estimates.is_empty() {
        return Err(CassError::EmptyInput("circular_rmse"));
    }
    let sq: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| wrap_diff(e - t).powi(2))
        .sum();
    Ok((sq / estimates.len() as f64).sqrt().to_degrees())
}

/// Accumulates squared angular errors across blocks and sources so that the
/// root-mean is taken once over the pooled set.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CumulativeRmse {
    sum_sq: f64,
    count: usize,
}

impl CumulativeRmse {
    pub fn push(&mut self, estimate: f64, truth: f64) {
        self.sum_sq += wrap_diff(estimate - truth).powi(2);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Pooled RMSE in degrees, `None` if nothing was pushed.
    pub fn degrees(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq / self.count as f64).sqrt().to_degrees())
    }
}

/// Assignment of estimated streams to true sources minimising the sum of
/// squared wrapped angular distances. `result[i]` is the estimate index
/// matched to truth `i`. Exhaustive over permutations; ties resolve to the
/// lexicographically smallest permutation.
pub fn match_streams(estimates: &[f64], truths: &[f64]) -> Vec<usize> {
    assert_eq!(estimates.len(), truths.len(), "match_streams needs equal counts");
    let n = truths.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let cost: f64 = perm
            .iter()
            .enumerate()
            .map(|(t, &e)| wrap_diff(estimates[e] - truths[t]).powi(2))
            .sum();
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best
}

/// Advances to the next lexicographic permutation; false once exhausted.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Outcome of classifying one stream in one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub predicted: Option<usize>,
    pub truth: usize,
}

/// Percentage of decisions that are wrong or missing.
pub fn classification_error_rate(decisions: &[Decision]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(CassError::EmptyInput("classification_error_rate"));
    }
    let wrong = decisions.iter().filter(|d| d.predicted != Some(d.truth)).count();
    Ok(100.0 * wrong as f64 / decisions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::rad;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn rmse_examples() {
        assert_eq!(circular_rmse(&[0.3, 1.0], &[0.3, 1.0]).unwrap(), 0.0);
        let r = circular_rmse(&[rad(350.0)], &[rad(10.0)]).unwrap();
        assert!((r - 20.0).abs() < 1e-9);
        let r = circular_rmse(&[rad(10.0), rad(-10.0)], &[0.0, 0.0]).unwrap();
        assert!((r - 10.0).abs() < 1e-9);
        assert!(circular_rmse(&[], &[]).is_err());
        assert!(circular_rmse(&[1.0], &[]).is_err());
    }

    #[test]
    fn cumulative_pools_before_root() {
        let mut acc = CumulativeRmse::default();
        assert_eq!(acc.degrees(), None);
        acc.push(rad(10.0), 0.0);
        acc.push(rad(-10.0), 0.0);
        acc.push(rad(0.0), 0.0);
        acc.push(rad(20.0), 0.0);
        let direct = circular_rmse(&[rad(10.0), rad(-10.0), 0.0, rad(20.0)], &[0.0; 4]).unwrap();
        assert!((acc.degrees().unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn matching_examples() {
        assert_eq!(
            match_streams(&[rad(30.0), rad(110.0)], &[rad(110.0), rad(30.0)]),
            vec![1, 0]
        );
        let same = [0.1, 1.0, 2.0, -1.0];
        assert_eq!(match_streams(&same, &same), vec![0, 1, 2, 3]);
        // Identical estimates tie; the identity is lexicographically first.
        assert_eq!(match_streams(&[0.5, 0.5], &[0.0, 1.0]), vec![0, 1]);
    }

    #[test]
    fn error_rate_examples() {
        let ok = |t| Decision {
            predicted: Some(t),
            truth: t,
        };
        assert_eq!(classification_error_rate(&[ok(0), ok(1)]).unwrap(), 0.0);
        let mut d = vec![ok(0), ok(1), ok(2)];
        d.push(Decision {
            predicted: Some(0),
            truth: 3,
        });
        assert_eq!(classification_error_rate(&d).unwrap(), 25.0);
        let none = vec![
            Decision {
                predicted: None,
                truth: 1
            };
            3
        ];
        assert_eq!(classification_error_rate(&none).unwrap(), 100.0);
        assert!(classification_error_rate(&[]).is_err());
    }

    // Heap's algorithm enumerates permutations independently of the
    // lexicographic successor used above.
    fn heap_permutations(n: usize) -> Vec<Vec<usize>> {
        fn rec(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == 1 {
                out.push(a.clone());
                return;
            }
            rec(k - 1, a, out);
            for i in 0..k - 1 {
                if k.is_multiple_of(2) {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
                rec(k - 1, a, out);
            }
        }
        let mut a: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        rec(n, &mut a, &mut out);
        out
    }

    proptest! {
        #[test]
        fn matching_agrees_with_exhaustive_oracle(
            est in prop::collection::vec(-PI..PI, 4),
            truth in prop::collection::vec(-PI..PI, 4),
        ) {
            let cost = |p: &[usize]| -> f64 {
                p.iter().enumerate().map(|(t, &e)| wrap_diff(est[e] - truth[t]).powi(2)).sum()
            };
            let oracle = heap_permutations(4)
                .into_iter()
                .map(|p| cost(&p))
                .fold(f64::INFINITY, f64::min);
            let found = match_streams(&est, &truth);
            prop_assert!((cost(&found) - oracle).abs() < 1e-12);
        }

        #[test]
        fn rmse_is_offset_invariant_and_symmetric(
            pairs in prop::collection::vec((-PI..PI, -PI..PI), 1..20),
            offset in -10.0f64..10.0,
        ) {
            let (e, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = circular_rmse(&e, &t).unwrap();
            let es: Vec<f64> = e.iter().map(|x| x + offset).collect();
            let ts: Vec<f64> = t.iter().map(|x| x + offset).collect();
            prop_assert!((circular_rmse(&es, &ts).unwrap() - base).abs() < 1e-6);
            prop_assert!((circular_rmse(&t, &e).unwrap() - base).abs() < 1e-9);
            prop_assert_eq!(circular_rmse(&e, &e).unwrap(), 0.0);
        }
    }
}
