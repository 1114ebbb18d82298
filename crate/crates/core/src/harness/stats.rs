use crate::error::{Error, Result};

/// Largest per-side sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 10;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with the `n - 1` denominator; zero for one sample.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Midranks (1-based) of the pooled sample, doubled so they stay integral,
/// plus the tie-group sizes.
fn doubled_ranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled midrank = i + j + 2
        for &o in &order[i..=j] {
            ranks[o] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value.
///
/// Exact when both samples have at most [`EXACT_LIMIT`] values: the null
/// distribution of the first sample's rank sum is enumerated over all
/// subsets of the pooled midranks, and `p = P(|W - E| >= |w - E|)`.
/// Larger samples use the tie-corrected normal approximation with a
/// continuity correction.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("rank-sum test needs two non-empty samples"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("rank-sum test sample contains NaN"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_ranks(&pooled);
    let (n1, n2) = (a.len(), b.len());
    let w: u64 = ranks[..n1].iter().sum();
    if n1 <= EXACT_LIMIT && n2 <= EXACT_LIMIT {
        Ok(exact_p(&ranks, n1, w))
    } else {
        Ok(normal_p(n1, n2, w, &ties))
    }
}

fn exact_p(ranks: &[u64], n1: usize, w: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[j][s]: subsets of size j with doubled rank sum s
    let mut ways = vec![vec![0f64; width]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for j in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(j);
            let (prev, cur) = (&lo[j - 1], &mut hi[0]);
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let n = ranks.len() as u64;
    // the expected doubled rank sum is n1 (n + 1)
    let centre = n1 as i64 * (n as i64 + 1);
    let observed = (w as i64 - centre).abs();
    let dist = &ways[n1];
    let total: f64 = dist.iter().sum();
    let extreme: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as i64 - centre).abs() >= observed)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

fn normal_p(n1: usize, n2: usize, w: u64, ties: &[usize]) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let u = w as f64 / 2.0 - n1f * (n1f + 1.0) / 2.0;
    let mu = n1f * n2f / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_are_doubled() {
        let (r, t) = doubled_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![7, 2, 7, 4]);
        assert_eq!(t, vec![1, 1, 2]);
    }

    #[test]
    fn std_uses_k_minus_one() {
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
    }
}
