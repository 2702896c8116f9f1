//! Posterior summaries, accuracy metrics and convergence diagnostics.

use crate::{Error, Result};

pub use crate::filter::ess;

/// A normalized distribution over integers.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedIntDist {
    /// Strictly increasing.
    pub support: Vec<i64>,
    pub weights: Vec<f64>,
}

impl WeightedIntDist {
    /// Histogram of weighted values. Returns `None` when the total weight is zero.
    pub fn from_weighted(values: impl IntoIterator<Item = (i64, f64)>) -> Option<Self> {
        let mut pairs: Vec<(i64, f64)> = values.into_iter().filter(|(_, w)| *w > 0.0).collect();
        pairs.sort_by_key(|p| p.0);
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return None;
        }
        let mut support = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (v, w) in pairs {
            if support.last() == Some(&v) {
                *weights.last_mut().unwrap() += w;
            } else {
                support.push(v);
                weights.push(w);
            }
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        Some(Self { support, weights })
    }

    pub fn point_mass(v: i64) -> Self {
        Self { support: vec![v], weights: vec![1.0] }
    }

    pub fn prob(&self, v: i64) -> f64 {
        self.support.binary_search(&v).map_or(0.0, |i| self.weights[i])
    }

    /// `P(X ≤ v)`.
    pub fn cdf(&self, v: i64) -> f64 {
        self.support.iter().zip(&self.weights).take_while(|(s, _)| **s <= v).map(|(_, w)| w).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.weights).map(|(s, w)| *s as f64 * w).sum()
    }
}

/// `sup_v |F₁(v) − F₂(v)|` over the integers.
pub fn kolmogorov(a: &WeightedIntDist, b: &WeightedIntDist) -> f64 {
    let mut points: Vec<i64> = a.support.iter().chain(&b.support).copied().collect();
    points.sort_unstable();
    points.dedup();
    let (mut fa, mut fb) = (0.0, 0.0);
    let (mut ia, mut ib) = (0, 0);
    let mut worst: f64 = 0.0;
    for v in points {
        while ia < a.support.len() && a.support[ia] <= v {
            fa += a.weights[ia];
            ia += 1;
        }
        while ib < b.support.len() && b.support[ib] <= v {
            fb += b.weights[ib];
            ib += 1;
        }
        worst = worst.max((fa - fb).abs());
    }
    worst.min(1.0)
}

/// Minimum-cost assignment of every row to a distinct column (rows ≤ columns).
///
/// Returns the column chosen for each row and the total cost.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = cost[0].len();
    assert!(n <= m, "more rows than columns");
    // Shortest augmenting paths with potentials, 1-based with a dummy column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assignment, total)
}

/// OSPA distance with cutoff `c` and order `p` between two finite point sets.
pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], c: f64, p: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::invalid(format!("OSPA cutoff must be positive, got {c}")));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("OSPA order must be at least 1, got {p}")));
    }
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = small
        .iter()
        .map(|a| {
            large
                .iter()
                .map(|b| ((a[0] - b[0]).hypot(a[1] - b[1])).min(c).powf(p))
                .collect()
        })
        .collect();
    let (_, matched) = min_cost_assignment(&cost);
    let total = matched + (n - m) as f64 * c.powf(p);
    Ok((total / n as f64).powf(1.0 / p).min(c))
}

/// Split-chain potential scale reduction factor for one scalar quantity.
///
/// Each chain is split into halves (dropping the first draw of odd-length
/// chains). With `n` draws per half-chain and `m` half-chains,
/// `B = n/(m−1) Σ (θ̄ⱼ − θ̄)²`, `W = mean of the half-chain variances`,
/// `V = (n−1)/n W + B/n` and `R̂ = √(V/W)`. When `W = 0` the result is `1`
/// if all half-chain means agree and `+∞` otherwise.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::invalid("PSRF needs at least two chains"));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(Error::invalid("PSRF chains must have equal length"));
    }
    if len < 4 {
        return Err(Error::invalid("PSRF chains need at least 4 draws"));
    }
    let half = len / 2;
    let skip = len % 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let c = &c[skip..];
            [&c[..half], &c[half..]]
        })
        .collect();
    let n = half as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let vars: Vec<f64> = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = vars.iter().sum::<f64>() / m;
    if w == 0.0 {
        let spread = means.iter().map(|mu| (mu - grand).abs()).fold(0.0, f64::max);
        return Ok(if spread <= 1e-12 * grand.abs().max(1.0) { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// PSRF of every column of multivariate chains.
pub fn psrf_columns<const D: usize>(chains: &[Vec<[f64; D]>]) -> Result<[f64; D]> {
    let mut out = [0.0; D];
    for (d, slot) in out.iter_mut().enumerate() {
        let col: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| x[d]).collect()).collect();
        *slot = psrf(&col)?;
    }
    Ok(out)
}

/// One posterior sample of the target count with its cumulative cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostedSample {
    pub iteration: usize,
    /// Kalman calls the chain had issued when this sample was produced.
    pub kalman_calls: u64,
    pub num_targets: usize,
    pub weight: f64,
}

/// Weighted histogram of target counts.
pub fn num_targets_dist<'a>(samples: impl IntoIterator<Item = &'a CostedSample>) -> Option<WeightedIntDist> {
    WeightedIntDist::from_weighted(samples.into_iter().map(|s| (s.num_targets as i64, s.weight)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Per-chain budget requested.
    pub cut: u64,
    /// Kalman calls actually spent, summed over chains.
    pub kalman_calls: u64,
    pub distance: f64,
    /// Some chain ended before the requested budget.
    pub clipped: bool,
}

/// Kolmogorov distance of the pooled target-count posterior to `reference`
/// as a function of the per-chain Kalman-call budget.
///
/// At each cut every chain keeps the samples produced within the budget and
/// discards the first half of its iterations as warmup. A cut with no
/// samples left has distance `1`.
pub fn convergence_curve(
    chains: &[Vec<CostedSample>],
    reference: &WeightedIntDist,
    cuts: &[u64],
) -> Vec<CurvePoint> {
    cuts.iter()
        .map(|&cut| {
            let mut pooled: Vec<CostedSample> = Vec::new();
            let mut spent = 0;
            let mut clipped = false;
            for chain in chains {
                let max_calls = chain.iter().map(|s| s.kalman_calls).max().unwrap_or(0);
                if cut > max_calls {
                    clipped = true;
                }
                let kept: Vec<&CostedSample> = chain.iter().filter(|s| s.kalman_calls <= cut).collect();
                let Some(last_iter) = kept.iter().map(|s| s.iteration).max() else {
                    continue;
                };
                spent += kept.iter().map(|s| s.kalman_calls).max().unwrap_or(0);
                pooled.extend(kept.into_iter().filter(|s| s.iteration > last_iter / 2).copied());
            }
            if clipped {
                log::warn!("convergence cut {cut} exceeds the length of some chain; clipped");
            }
            let distance = num_targets_dist(&pooled).map_or(1.0, |d| kolmogorov(&d, reference));
            CurvePoint { cut, kalman_calls: spent, distance, clipped }
        })
        .collect()
}
