use serde::{Deserialize, Serialize};

/// k-nearest-neighbour vote over stored standardized exemplars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub exemplars: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
}

impl KnnModel {
    pub fn fit(rows: &[Vec<f64>], targets: &[usize], k: usize) -> Self {
        KnnModel {
            k,
            exemplars: rows.to_vec(),
            targets: targets.to_vec(),
        }
    }

    /// Vote fractions among the `k` nearest exemplars. Equal distances keep
    /// training order.
    pub fn vote_fractions(&self, x: &[f64], n_classes: usize) -> Vec<f64> {
        let mut dist: Vec<(f64, usize)> = self
            .exemplars
            .iter()
            .enumerate()
            .map(|(i, e)| (e.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(dist.len());
        let mut votes = vec![0.0; n_classes];
        for &(_, i) in &dist[..k] {
            votes[self.targets[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= k as f64);
        votes
    }
}
