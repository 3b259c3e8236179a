use super::LearnError;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Indices of the `k` nearest training points, nearest first. Equal
/// distances keep input order.
pub fn knn_neighbors<L>(train: &[(Vec<f64>, L)], query: &[f64], k: usize) -> Result<Vec<usize>, LearnError> {
    if train.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(LearnError::ZeroK);
    }
    if k > train.len() {
        return Err(LearnError::KTooLarge { k, n: train.len() });
    }
    let mut dist = Vec::with_capacity(train.len());
    for (i, (v, _)) in train.iter().enumerate() {
        if v.len() != query.len() {
            return Err(LearnError::DimensionMismatch {
                expected: query.len(),
                found: v.len(),
            });
        }
        dist.push((euclidean(v, query), i));
    }
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k).map(|(_, i)| i).collect())
}

/// Majority label among the `k` nearest neighbors. A vote tie goes to the
/// tied label whose member is nearest.
pub fn knn_label<L: Clone + Eq>(train: &[(Vec<f64>, L)], query: &[f64], k: usize) -> Result<L, LearnError> {
    let nn = knn_neighbors(train, query, k)?;
    let mut votes: Vec<(&L, usize)> = Vec::new();
    for &i in &nn {
        let label = &train[i].1;
        match votes.iter_mut().find(|(l, _)| *l == label) {
            Some((_, c)) => *c += 1,
            None => votes.push((label, 1)),
        }
    }
    // `votes` is in first-appearance order, i.e. by nearest member.
    let best = votes.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let winner = votes.iter().find(|(_, c)| *c == best).map(|(l, _)| (*l).clone());
    Ok(winner.expect("k >= 1"))
}
