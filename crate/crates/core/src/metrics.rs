//! Harrell's concordance index and log-scale mean squared error.

use serde::{Deserialize, Serialize};

use crate::error::{KanAftError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub c_index: f64,
    pub mse_log: f64,
    pub n_comparable_pairs: u64,
    pub n_uncensored: usize,
}

/// Pair counts behind the concordance index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConcordanceCounts {
    pub comparable: u64,
    pub concordant: u64,
    pub tied_predictions: u64,
}

impl ConcordanceCounts {
    pub fn c_index(&self) -> Result<f64> {
        if self.comparable == 0 {
            return Err(KanAftError::UndefinedMetric(
                "no comparable pairs for the concordance index".into(),
            ));
        }
        Ok((2 * self.concordant + self.tied_predictions) as f64 / (2 * self.comparable) as f64)
    }
}

fn check_inputs(times: &[f64], events: &[bool], predicted: &[f64]) -> Result<()> {
    if events.len() != times.len() || predicted.len() != times.len() {
        return Err(KanAftError::Shape {
            expected: times.len(),
            got: events.len().min(predicted.len()),
        });
    }
    if predicted.iter().any(|p| p.is_nan()) {
        return Err(KanAftError::Domain("predicted times contain NaN".into()));
    }
    Ok(())
}

/// Binary indexed tree over prediction ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut acc = 0;
        while i > 0 {
            acc += self.0[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Counts Harrell pairs in `O(n log n)`.
///
/// A pair is comparable when `T_i < T_j` and record `i` had an event; it is concordant when
/// the prediction for `i` is smaller. Pairs with equal observed times are skipped.
pub fn concordance_counts(
    times: &[f64],
    events: &[bool],
    predicted: &[f64],
) -> Result<ConcordanceCounts> {
    check_inputs(times, events, predicted)?;
    let n = times.len();
    // dense ranks of predictions so equal predictions share a rank
    let mut by_pred: Vec<usize> = (0..n).collect();
    by_pred.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]));
    let mut rank = vec![0usize; n];
    let mut r = 0;
    for w in 0..n {
        if w > 0 && predicted[by_pred[w]] != predicted[by_pred[w - 1]] {
            r += 1;
        }
        rank[by_pred[w]] = r;
    }
    let n_ranks = r + 1;

    let mut by_time: Vec<usize> = (0..n).collect();
    by_time.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut tree = Fenwick::new(n_ranks);
    let mut inserted = 0u64;
    let mut counts = ConcordanceCounts::default();
    let mut g = 0;
    while g < n {
        let t = times[by_time[g]];
        let mut h = g;
        while h < n && times[by_time[h]] == t {
            h += 1;
        }
        // the tree holds exactly the records with strictly larger times
        for &i in &by_time[g..h] {
            if !events[i] {
                continue;
            }
            let below_or_eq = tree.below(rank[i] + 1);
            let below = tree.below(rank[i]);
            counts.comparable += inserted;
            counts.concordant += inserted - below_or_eq;
            counts.tied_predictions += below_or_eq - below;
        }
        for &i in &by_time[g..h] {
            tree.add(rank[i]);
            inserted += 1;
        }
        g = h;
    }
    Ok(counts)
}

pub fn c_index(times: &[f64], events: &[bool], predicted: &[f64]) -> Result<f64> {
    concordance_counts(times, events, predicted)?.c_index()
}

/// Mean over uncensored records of `(log T - log T_hat)^2`.
pub fn mse_log(times: &[f64], events: &[bool], predicted: &[f64]) -> Result<f64> {
    check_inputs(times, events, predicted)?;
    let mut acc = 0.0;
    let mut count = 0usize;
    for ((t, e), p) in times.iter().zip(events).zip(predicted) {
        if *e {
            if !(*p > 0.0) {
                return Err(KanAftError::Domain(format!(
                    "predicted times must be positive, got {p}"
                )));
            }
            let d = t.ln() - p.ln();
            acc += d * d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(KanAftError::UndefinedMetric(
            "mse needs at least one uncensored record".into(),
        ));
    }
    Ok(acc / count as f64)
}

impl MetricReport {
    pub fn compute(times: &[f64], events: &[bool], predicted: &[f64]) -> Result<Self> {
        let counts = concordance_counts(times, events, predicted)?;
        Ok(MetricReport {
            c_index: counts.c_index()?,
            mse_log: mse_log(times, events, predicted)?,
            n_comparable_pairs: counts.comparable,
            n_uncensored: events.iter().filter(|e| **e).count(),
        })
    }
}
