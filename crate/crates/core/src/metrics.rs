//! RMSE and per-user top-K ranking metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{RatingDataset, Split};
use crate::error::{Error, Result};

/// Rating at or above which a test item counts as relevant.
pub const POSITIVE_RATING: f64 = 5.0;

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::Config("rmse of an empty set".into()));
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok((sse / targets.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub k: usize,
    pub hit: f64,
    pub ndcg: f64,
}

/// One user's scored test items.
#[derive(Clone, Debug, Default)]
pub struct UserRanking {
    /// `(item, score, relevant)`
    pub items: Vec<(usize, f64, bool)>,
}

impl UserRanking {
    fn has_positive(&self) -> bool {
        self.items.iter().any(|i| i.2)
    }

    /// Relevance flags in ranked order: score descending, item index ascending.
    fn ranked_relevance(&self) -> Vec<bool> {
        let mut order: Vec<&(usize, f64, bool)> = self.items.iter().collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        order.into_iter().map(|i| i.2).collect()
    }

    fn hit_and_ndcg(&self, k: usize) -> (f64, f64) {
        let rel = self.ranked_relevance();
        let hit = if rel.iter().take(k).any(|r| *r) { 1.0 } else { 0.0 };
        let dcg: f64 = rel
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, r)| **r)
            .map(|(pos, _)| 1.0 / ((pos + 2) as f64).log2())
            .sum();
        let positives = rel.iter().filter(|r| **r).count();
        let idcg: f64 = (0..positives.min(k)).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum();
        (hit, dcg / idcg)
    }
}

/// Hit@K and NDCG@K averaged over users with at least one positive item.
pub fn ranking_from_users(users: &[UserRanking], ks: &[usize]) -> Result<Vec<RankingMetrics>> {
    if ks.contains(&0) {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let qualifying: Vec<&UserRanking> = users.iter().filter(|u| u.has_positive()).collect();
    if qualifying.is_empty() {
        return Err(Error::NoQualifyingUsers);
    }
    let n = qualifying.len() as f64;
    Ok(ks
        .iter()
        .map(|&k| {
            let (h, d) = qualifying
                .iter()
                .map(|u| u.hit_and_ndcg(k))
                .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
            RankingMetrics {
                k,
                hit: h / n,
                ndcg: d / n,
            }
        })
        .collect())
}

/// Groups the records of `split` by user and ranks each user's items with
/// `score(record_index)`.
pub fn ranking_metrics<F>(ds: &RatingDataset, split: Split, ks: &[usize], score: F) -> Result<Vec<RankingMetrics>>
where
    F: Fn(usize) -> f64,
{
    let mut by_user: BTreeMap<usize, UserRanking> = BTreeMap::new();
    for idx in ds.split_indices(split) {
        let r = ds.record(idx);
        by_user.entry(r.row).or_default().items.push((
            r.col,
            score(idx),
            r.value >= POSITIVE_RATING,
        ));
    }
    let users: Vec<UserRanking> = by_user.into_values().collect();
    ranking_from_users(&users, ks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub rmse: f64,
    pub count: usize,
    #[serde(default)]
    pub ranking: Vec<RankingMetrics>,
    /// Users with at least one positive item in the split.
    #[serde(default)]
    pub ranked_users: usize,
}

impl EvalReport {
    pub fn hit(&self, k: usize) -> Option<f64> {
        self.ranking.iter().find(|r| r.k == k).map(|r| r.hit)
    }

    pub fn ndcg(&self, k: usize) -> Option<f64> {
        self.ranking.iter().find(|r| r.k == k).map(|r| r.ndcg)
    }

    pub const CSV_HEADER: &'static str = "split,count,rmse,hit@5,ndcg@5,hit@10,ndcg@10";

    /// One CSV row matching [`CSV_HEADER`](Self::CSV_HEADER).
    pub fn csv_row(&self) -> String {
        let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{:.6},{},{},{},{}",
            self.split,
            self.count,
            self.rmse,
            f(self.hit(5)),
            f(self.ndcg(5)),
            f(self.hit(10)),
            f(self.ndcg(10))
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(items: &[(usize, f64, bool)]) -> UserRanking {
        UserRanking { items: items.to_vec() }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 3.5355339059327378).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn single_positive_item() {
        let users = vec![user(&[(3, 0.1, true)])];
        for m in ranking_from_users(&users, &[1, 5, 10]).unwrap() {
            assert_eq!((m.hit, m.ndcg), (1.0, 1.0));
        }
    }

    #[test]
    fn positives_below_cutoff() {
        let users = vec![user(&[(0, 3.0, false), (1, 2.0, false), (2, 1.0, true)])];
        let m = ranking_from_users(&users, &[2]).unwrap();
        assert_eq!(m[0].hit, 0.0);
        assert_eq!(m[0].ndcg, 0.0);
    }

    #[test]
    fn ties_broken_by_item_index() {
        let users = vec![user(&[(5, 1.0, true), (2, 1.0, false)])];
        let m = ranking_from_users(&users, &[1]).unwrap();
        assert_eq!(m[0].hit, 0.0);
    }

    #[test]
    fn users_without_positives_excluded() {
        let users = vec![user(&[(0, 1.0, false)]), user(&[(0, 1.0, true)])];
        let m = ranking_from_users(&users, &[1]).unwrap();
        assert_eq!(m[0].hit, 1.0);
        assert!(matches!(
            ranking_from_users(&[user(&[(0, 1.0, false)])], &[1]),
            Err(Error::NoQualifyingUsers)
        ));
        assert!(ranking_from_users(&users, &[0]).is_err());
    }

    #[test]
    fn csv_row_shape() {
        let r = EvalReport {
            split: Split::Test,
            rmse: 0.9,
            count: 10,
            ranking: vec![RankingMetrics { k: 5, hit: 0.5, ndcg: 0.25 }],
            ranked_users: 2,
        };
        assert_eq!(r.csv_row(), "test,10,0.900000,0.500000,0.250000,,");
        assert_eq!(EvalReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
    }
}
