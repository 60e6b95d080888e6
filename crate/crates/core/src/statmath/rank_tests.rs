//! Kruskal-Wallis H test and Dunn pairwise comparisons with Sidak correction.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Result};

/// Result of a Kruskal-Wallis test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruskalWallis {
    /// Tie-corrected H statistic.
    pub h: f64,
    pub p_value: f64,
    pub df: usize,
}

struct Ranked {
    /// mean rank per group
    mean_ranks: Vec<f64>,
    sizes: Vec<usize>,
    n: usize,
    /// sum of t^3 - t over tie groups
    tie_sum: f64,
}

fn rank_groups(groups: &[Vec<f64>]) -> Result<Ranked> {
    if groups.len() < 2 {
        return Err(invalid("at least two groups are required"));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(invalid("groups must be non-empty"));
    }
    let mut pooled: Vec<(f64, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, vals)| vals.iter().map(move |&v| (v, g)))
        .collect();
    if pooled.len() < 3 {
        return Err(invalid("at least three observations are required"));
    }
    if pooled.iter().any(|(v, _)| v.is_nan()) {
        return Err(invalid("NaN in rank test input"));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let n = pooled.len();
    let mut rank_sums = vec![0.0; groups.len()];
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        for item in &pooled[i..=j] {
            rank_sums[item.1] += avg;
        }
        let t = (j - i + 1) as f64;
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mean_ranks = rank_sums
        .iter()
        .zip(&sizes)
        .map(|(s, &k)| s / k as f64)
        .collect();
    Ok(Ranked { mean_ranks, sizes, n, tie_sum })
}

/// Kruskal-Wallis test with tie correction and the chi-square approximation
/// on `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    let r = rank_groups(groups)?;
    let n = r.n as f64;
    let df = groups.len() - 1;
    let correction = 1.0 - r.tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis { h: 0.0, p_value: 1.0, df });
    }
    let raw: f64 = r
        .mean_ranks
        .iter()
        .zip(&r.sizes)
        .map(|(m, &k)| k as f64 * m * m)
        .sum::<f64>()
        * 12.0
        / (n * (n + 1.0))
        - 3.0 * (n + 1.0);
    let h = (raw / correction).max(0.0);
    let chi = ChiSquared::new(df as f64).expect("df >= 1");
    Ok(KruskalWallis { h, p_value: chi.sf(h), df })
}

/// One pairwise comparison of mean ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairComparison {
    pub a: usize,
    pub b: usize,
    pub z: f64,
    /// Two-sided, uncorrected.
    pub p_value: f64,
}

/// All pairwise Dunn z-tests between groups.
pub fn dunn_pairs(groups: &[Vec<f64>]) -> Result<Vec<PairComparison>> {
    let r = rank_groups(groups)?;
    let n = r.n as f64;
    let var_base = n * (n + 1.0) / 12.0 - r.tie_sum / (12.0 * (n - 1.0));
    let normal = Normal::standard();
    let mut out = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let diff = (r.mean_ranks[a] - r.mean_ranks[b]).abs();
            let se = (var_base * (1.0 / r.sizes[a] as f64 + 1.0 / r.sizes[b] as f64)).sqrt();
            let (z, p) = if se > 0.0 && var_base > 1e-12 * n * n {
                let z = diff / se;
                (z, (2.0 * normal.sf(z)).min(1.0))
            } else {
                (0.0, 1.0)
            };
            out.push(PairComparison { a, b, z, p_value: p });
        }
    }
    Ok(out)
}

/// Per-comparison level `1 - (1 - alpha)^(1/m)`.
pub fn sidak_level(alpha: f64, m: usize) -> f64 {
    1.0 - (1.0 - alpha).powf(1.0 / m as f64)
}

/// Pairs `(a, b)`, `a < b`, whose Dunn test rejects at the Sidak-corrected
/// level for `alpha`.
pub fn dunn_sidak_pairs(groups: &[Vec<f64>], alpha: f64) -> Result<Vec<(usize, usize)>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must lie in (0, 1)"));
    }
    let pairs = dunn_pairs(groups)?;
    let level = sidak_level(alpha, pairs.len());
    Ok(pairs
        .into_iter()
        .filter(|c| c.p_value < level)
        .map(|c| (c.a, c.b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn h_for_separated_groups() {
        // ranks 1..3 and 4..6: 12/(6*7) * (3*2^2 + 3*5^2) - 3*7 = 12/42 * 87 - 21
        let kw = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_abs_diff_eq!(kw.h, 12.0 / 42.0 * 87.0 - 21.0, epsilon = 1e-12);
        assert_eq!(kw.df, 1);
        // chi-square(1) survival at H = 27/7
        assert!(kw.p_value > 0.04 && kw.p_value < 0.06);
    }

    #[test]
    fn h_with_ties_by_hand() {
        // pooled: 1,2,2,3 | 2,3,4 ; ranks: 1 -> 1, 2 -> 3 (x3), 3 -> 5.5 (x2), 4 -> 7
        let g = [vec![1.0, 2.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]];
        let r1 = (1.0 + 3.0 + 3.0 + 5.5) / 4.0;
        let r2 = (3.0 + 5.5 + 7.0) / 3.0;
        let n = 7.0;
        let raw = 12.0 / (n * (n + 1.0)) * (4.0 * r1 * r1 + 3.0 * r2 * r2) - 3.0 * (n + 1.0);
        let c = 1.0 - (24.0 + 6.0) / (n * n * n - n);
        assert_abs_diff_eq!(kruskal_wallis(&g).unwrap().h, raw / c, epsilon = 1e-12);
    }

    #[test]
    fn all_ties_give_zero() {
        let kw = kruskal_wallis(&[vec![2.0; 4], vec![2.0; 5]]).unwrap();
        assert_eq!(kw.h, 0.0);
        assert_eq!(kw.p_value, 1.0);
    }

    #[test]
    fn input_validation() {
        assert!(kruskal_wallis(&[vec![1.0, 2.0, 3.0]]).is_err());
        assert!(kruskal_wallis(&[vec![1.0], vec![]]).is_err());
        assert!(kruskal_wallis(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn identical_groups_have_no_significant_pairs() {
        let g = vec![1.0, 5.0, 2.0, 8.0, 3.0];
        assert!(dunn_sidak_pairs(&[g.clone(), g], 0.05).unwrap().is_empty());
    }

    #[test]
    fn shifted_group_is_isolated() {
        let base: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let other: Vec<f64> = (0..30).map(|i| (i as f64 * 0.71).cos()).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 100.0).collect();
        let pairs = dunn_sidak_pairs(&[base, other, shifted], 0.05).unwrap();
        assert_eq!(pairs, vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn single_pair_uses_uncorrected_level() {
        assert_abs_diff_eq!(sidak_level(0.05, 1), 0.05, epsilon = 1e-15);
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = vec![4.5, 5.5, 6.5, 7.5, 8.5, 9.5];
        let p = dunn_pairs(&[a.clone(), b.clone()]).unwrap()[0].p_value;
        let rejects = !dunn_sidak_pairs(&[a, b], 0.05).unwrap().is_empty();
        assert_eq!(rejects, p < 0.05);
    }
}
