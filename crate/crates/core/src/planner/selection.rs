use rand::Rng;

use super::SearchTree;

/// Closed-form rank probability `(i^-b - (i+1)^-b) / (1 - n^-b)`.
///
/// Summed over all ranks this exceeds one by `(n^-b - (n+1)^-b) / (1 - n^-b)`;
/// see [`pareto_rank_distribution`] for the law the sampler follows.
pub fn pareto_rank_pmf(n_n: usize, beta: f64, i: usize) -> f64 {
    assert!(n_n >= 2 && (1..=n_n).contains(&i) && beta > 0.0);
    let (i, n) = (i as f64, n_n as f64);
    (i.powf(-beta) - (i + 1.0).powf(-beta)) / (1.0 - n.powf(-beta))
}

/// Rank distribution of [`sample_pareto_rank`]: the closed form renormalized
/// to sum to one.
pub fn pareto_rank_distribution(n_n: usize, beta: f64) -> Vec<f64> {
    if n_n == 1 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (1..=n_n).map(|i| pareto_rank_pmf(n_n, beta, i)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Draws a 1-based rank: `x` from a Pareto law truncated to `[1, n + 1)` by
/// inverse CDF, then `floor(x)` clamped to `n`.
pub fn sample_pareto_rank<R: Rng + ?Sized>(n_n: usize, beta: f64, rng: &mut R) -> usize {
    if n_n <= 1 {
        return 1;
    }
    let tail = (n_n as f64 + 1.0).powf(-beta);
    let u: f64 = rng.gen();
    let x = (1.0 - u * (1.0 - tail)).powf(-1.0 / beta);
    (x.floor() as usize).clamp(1, n_n)
}

/// Node indices ordered by total reward, best first; ties go to the older node.
pub fn reward_ranking(tree: &SearchTree) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..tree.nodes.len()).collect();
    idx.sort_by(|a, b| rank_order(tree, *a, *b));
    idx
}

fn rank_order(tree: &SearchTree, a: usize, b: usize) -> std::cmp::Ordering {
    let (ra, rb) = (tree.nodes[a].rewards.total, tree.nodes[b].rewards.total);
    rb.total_cmp(&ra).then(a.cmp(&b))
}

pub fn select_node<R: Rng + ?Sized>(tree: &SearchTree, beta: f64, rng: &mut R) -> usize {
    let n = tree.nodes.len();
    if n <= 1 {
        return 0;
    }
    let rank = sample_pareto_rank(n, beta, rng);
    let mut idx: Vec<usize> = (0..n).collect();
    let (_, nth, _) = idx.select_nth_unstable_by(rank - 1, |a, b| rank_order(tree, *a, *b));
    *nth
}
