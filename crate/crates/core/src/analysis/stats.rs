//! Rank tests and multiple-comparison correction.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::params::{decode, Genome, GENOME_LEN, PARAMS};

/// Pooled sample sizes up to this use the exact null distribution.
pub const EXACT_MAX_N: usize = 16;

/// Significance level used for the per-parameter comparison.
pub const SIGNIFICANCE_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// Statistic of the first sample: pairs with `x > y`, ties counting half.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, and the tie group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test.
///
/// Exact (over the observed midranks) when `n1 + n2 <= 16`, otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Invalid(
            "Mann-Whitney needs two non-empty samples".into(),
        ));
    }
    let (n1, n2) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;

    if ties.len() == 1 {
        return Ok(MannWhitney {
            u,
            p: 1.0,
            exact: n1 + n2 <= EXACT_MAX_N,
        });
    }
    if n1 + n2 <= EXACT_MAX_N {
        return Ok(MannWhitney {
            u,
            p: exact_p(&ranks, n1),
            exact: true,
        });
    }

    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if !(var > 0.0) {
        return Ok(MannWhitney {
            u,
            p: 1.0,
            exact: false,
        });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let sf = 1.0 - Normal::standard().cdf(z);
    Ok(MannWhitney {
        u,
        p: (2.0 * sf).min(1.0),
        exact: false,
    })
}

/// Probability under random relabeling that the first group's rank sum is at
/// least as far from its mean as observed.
fn exact_p(ranks: &[f64], n1: usize) -> f64 {
    // midranks are multiples of 1/2, so doubled ranks are integers
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u64; total + 1]; n1 + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            for s in (r..=total).rev() {
                counts[k][s] += counts[k - 1][s - r];
            }
        }
    }
    let observed: usize = doubled[..n1].iter().sum();
    // mean of the doubled rank sum is n1 * (N + 1); compare doubled deviations
    let centre2 = 2 * n1 * (ranks.len() + 1);
    let dev = |s: usize| (2 * s).abs_diff(centre2);
    let limit = dev(observed);
    let all: u64 = counts[n1].iter().sum();
    let extreme: u64 = counts[n1]
        .iter()
        .enumerate()
        .filter(|&(s, _)| dev(s) >= limit)
        .map(|(_, &c)| c)
        .sum();
    (extreme as f64 / all as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolmResult {
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub rejected: bool,
}

/// Holm step-down correction. Results are in input order.
pub fn holm_bonferroni(p_values: &[f64], alpha: f64) -> Vec<HolmResult> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut out = vec![
        HolmResult {
            p_raw: 0.0,
            p_adjusted: 0.0,
            rejected: false
        };
        m
    ];
    let mut running = 0.0f64;
    let mut still_rejecting = true;
    for (i, &k) in order.iter().enumerate() {
        let p = p_values[k];
        running = running.max(((m - i) as f64 * p).min(1.0));
        still_rejecting = still_rejecting && p <= alpha / (m - i) as f64;
        out[k] = HolmResult {
            p_raw: p,
            p_adjusted: running,
            rejected: still_rejecting,
        };
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatResult {
    pub parameter: &'static str,
    pub u: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Per-parameter two-sided test between two groups of genomes, compared on
/// decoded values, with Holm correction across all parameters.
pub fn parameter_significance(a: &[Genome], b: &[Genome], alpha: f64) -> Result<Vec<StatResult>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("both groups must be non-empty".into()));
    }
    let pheno = |g: &[Genome]| -> Vec<[f64; GENOME_LEN]> {
        g.iter().map(|g| decode(g).to_values()).collect()
    };
    let (pa, pb) = (pheno(a), pheno(b));
    let tests: Vec<MannWhitney> = (0..GENOME_LEN)
        .map(|i| {
            let x: Vec<f64> = pa.iter().map(|v| v[i]).collect();
            let y: Vec<f64> = pb.iter().map(|v| v[i]).collect();
            mann_whitney_u(&x, &y)
        })
        .collect::<Result<_>>()?;
    let p: Vec<f64> = tests.iter().map(|t| t.p).collect();
    Ok(holm_bonferroni(&p, alpha)
        .into_iter()
        .zip(tests)
        .enumerate()
        .map(|(i, (h, t))| StatResult {
            parameter: PARAMS[i].name,
            u: t.u,
            p_raw: h.p_raw,
            p_adjusted: h.p_adjusted,
            significant: h.rejected,
        })
        .collect())
}
