//! Reference computations shared by the integration tests and the
//! acceptance runner. The likelihood and prior oracles are written without
//! the library's Kalman code; only the grid quadrature reuses it for speed.
#![allow(dead_code)]

pub mod props;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rbmcda::association::{AssocPriorConfig, Label, CLUTTER};
use rbmcda::model::{BirthCoupling, ModelParams, ObservationStats};
use rbmcda::pmcmc::TrackingProblem;
use rbmcda::simulate::Observation;

/// Dense multivariate normal log density via Cholesky, without the library.
pub fn mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let chol = cov.clone().cholesky().expect("oracle covariance must be PD");
    let d = x - mean;
    let z = chol.l().solve_lower_triangular(&d).unwrap();
    let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + logdet + z.norm_squared())
}

/// Birth moments written out from the definition: mean location from the
/// sample moments, position given mean at stationarity.
pub fn birth_moments(params: &ModelParams, stats: &ObservationStats, coupling: BirthCoupling) -> (Vector4<f64>, Matrix4<f64>) {
    let m = Vector4::new(stats.mean[0], stats.mean[1], stats.mean[0], stats.mean[1]);
    let v = params.q / (2.0 * params.lambda);
    let mut p = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let s = stats.cov[(i, j)];
            p[(i, j)] = s;
            p[(i + 2, j + 2)] = s + if i == j { v } else { 0.0 };
            if coupling == BirthCoupling::Joint {
                p[(i, j + 2)] = s;
                p[(i + 2, j)] = s;
            }
        }
    }
    (m, p)
}

/// Log density of the measurements of one target born at `times[0]`, from the
/// stacked joint Gaussian of all its measurements.
///
/// With `τ` the time since birth and `e = exp(-λτ)`, the position is
/// `(1 - e) μ + e p₀ + ε(τ)` where `ε` is a zero-started OU noise with
/// `Cov(ε(s), ε(t)) = q/(2λ) (exp(-λ|t - s|) - exp(-λ(t + s))) I`.
pub fn joint_cluster_loglik(
    times: &[f64],
    ys: &[[f64; 2]],
    params: &ModelParams,
    birth_mean: &Vector4<f64>,
    birth_cov: &Matrix4<f64>,
) -> f64 {
    let n = times.len();
    let t0 = times[0];
    let lam = params.lambda;
    let g = |tau: f64| {
        let e = (-lam * tau).exp();
        let mut g = DMatrix::zeros(2, 4);
        for c in 0..2 {
            g[(c, c)] = 1.0 - e;
            g[(c, c + 2)] = e;
        }
        g
    };
    let p0 = DMatrix::from_iterator(4, 4, birth_cov.iter().copied());
    let m0 = DVector::from_iterator(4, birth_mean.iter().copied());
    let mut mean = DVector::zeros(2 * n);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    let mut y = DVector::zeros(2 * n);
    for i in 0..n {
        let ti = times[i] - t0;
        let gi = g(ti);
        mean.rows_mut(2 * i, 2).copy_from(&(&gi * &m0));
        y[2 * i] = ys[i][0];
        y[2 * i + 1] = ys[i][1];
        for j in 0..n {
            let tj = times[j] - t0;
            let gj = g(tj);
            let mut block = &gi * &p0 * gj.transpose();
            let kappa = params.q / (2.0 * lam) * ((-lam * (ti - tj).abs()).exp() - (-lam * (ti + tj)).exp());
            for c in 0..2 {
                block[(c, c)] += kappa;
                if i == j {
                    block[(c, c)] += params.sigma * params.sigma;
                }
            }
            cov.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&block);
        }
    }
    mvn_logpdf(&y, &mean, &cov)
}

/// Clutter log density written from the config.
pub fn clutter_logdensity(y: &[f64; 2], cfg: &AssocPriorConfig) -> f64 {
    use rbmcda::association::ClutterDensity;
    match cfg.clutter_density {
        ClutterDensity::Uniform { window } => {
            let inside = window.x_min <= y[0] && y[0] <= window.x_max && window.y_min <= y[1] && y[1] <= window.y_max;
            if inside {
                -((window.x_max - window.x_min) * (window.y_max - window.y_min)).ln()
            } else {
                f64::NEG_INFINITY
            }
        }
        ClutterDensity::Constant { density } => density.ln(),
    }
}

/// `log p(y | θ, c)` by splitting the history into per-target groups.
pub fn history_loglik_oracle(problem: &TrackingProblem, params: &ModelParams, history: &[Label]) -> f64 {
    let (m0, p0) = birth_moments(params, &problem.stats, problem.coupling);
    let mut groups: HashMap<Label, (Vec<f64>, Vec<[f64; 2]>)> = HashMap::new();
    let mut total = 0.0;
    for (o, &c) in problem.observations.iter().zip(history) {
        let y = [o.y[0], o.y[1]];
        if c == CLUTTER {
            total += clutter_logdensity(&y, &problem.assoc.cfg);
        } else {
            let g = groups.entry(c).or_default();
            g.0.push(o.t);
            g.1.push(y);
        }
    }
    for (ts, ys) in groups.values() {
        total += joint_cluster_loglik(ts, ys, params, &m0, &p0);
    }
    total
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Prior of a canonical history under the latent-count model with support
/// `1..=m`, no deaths: clutter steps contribute `c` each, other steps `1 - c`,
/// and the target labels have probability
/// `(1/m) Σ_N N!/(N-T)! / N^n` where `n` counts non-clutter entries.
pub fn latent_count_log_prior(history: &[Label], m: usize, clutter_prob: f64) -> f64 {
    let t = history.iter().copied().max().unwrap_or(0) as usize;
    let n = history.iter().filter(|&&c| c != CLUTTER).count();
    let n0 = history.len() - n;
    let mut terms = Vec::new();
    for big_n in t.max(1)..=m {
        terms.push(ln_factorial(big_n) - ln_factorial(big_n - t) - n as f64 * (big_n as f64).ln());
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + terms.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let clutter_part = if n0 > 0 { n0 as f64 * clutter_prob.ln() } else { 0.0 }
        + if n > 0 { n as f64 * (1.0 - clutter_prob).ln() } else { 0.0 };
    lse - (m as f64).ln() + clutter_part
}

/// All canonical histories of length `n`, optionally with clutter.
pub fn canonical_histories(n: usize, clutter: bool) -> Vec<Vec<Label>> {
    fn rec(prefix: &mut Vec<Label>, max: Label, n: usize, clutter: bool, out: &mut Vec<Vec<Label>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let first = if clutter { 0 } else { 1 };
        for c in first..=max + 1 {
            prefix.push(c);
            rec(prefix, max.max(c), n, clutter, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), 0, n, clutter, &mut out);
    out
}

/// Exact posterior over histories plus the log marginal likelihood.
pub struct Enumeration {
    pub histories: Vec<Vec<Label>>,
    pub probs: Vec<f64>,
    pub log_evidence: f64,
}

impl Enumeration {
    pub fn prob_of(&self, h: &[Label]) -> f64 {
        self.histories.iter().position(|x| x == h).map_or(0.0, |i| self.probs[i])
    }

    /// Total variation distance to empirical counts keyed by history.
    pub fn tv(&self, counts: &HashMap<Vec<Label>, f64>) -> f64 {
        let total: f64 = counts.values().sum();
        let mut tv = 0.0;
        for (h, p) in self.histories.iter().zip(&self.probs) {
            tv += (p - counts.get(h).copied().unwrap_or(0.0) / total).abs();
        }
        let outside: f64 = counts.iter().filter(|(h, _)| !self.histories.contains(h)).map(|(_, v)| v / total).sum();
        0.5 * (tv + outside)
    }

    /// Cumulative distribution of the number of targets.
    pub fn num_targets_probs(&self) -> Vec<(i64, f64)> {
        let mut by_t: std::collections::BTreeMap<i64, f64> = Default::default();
        for (h, p) in self.histories.iter().zip(&self.probs) {
            *by_t.entry(h.iter().copied().max().unwrap_or(0) as i64).or_default() += p;
        }
        by_t.into_iter().collect()
    }
}

/// Enumerates the posterior with the oracle likelihood and the closed-form
/// latent-count prior (support equal to the number of observations).
pub fn enumerate(problem: &TrackingProblem, params: &ModelParams) -> Enumeration {
    let cfg = &problem.assoc.cfg;
    let clutter = cfg.clutter_prob > 0.0;
    let histories = canonical_histories(problem.len(), clutter);
    let logs: Vec<f64> = histories
        .iter()
        .map(|h| latent_count_log_prior(h, problem.len(), cfg.clutter_prob) + history_loglik_oracle(problem, params, h))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|v| (v - max).exp()).sum();
    let log_evidence = max + sum.ln();
    let probs = logs.iter().map(|v| (v - log_evidence).exp()).collect();
    Enumeration { histories, probs, log_evidence }
}

/// The three-measurement fixture: two nearby points and a third in between
/// so that every one of the five histories keeps noticeable mass.
pub fn three_obs() -> Vec<Observation> {
    vec![Observation::new(0.0, 40.0, 50.0), Observation::new(0.4, 46.0, 52.0), Observation::new(1.0, 43.0, 47.0)]
}

pub fn three_params() -> ModelParams {
    ModelParams::new(36.0, 0.5, 2.0).unwrap()
}

pub fn three_problem() -> TrackingProblem {
    TrackingProblem::new(three_obs(), AssocPriorConfig::default(), BirthCoupling::Joint).unwrap()
}

/// Sample quantile-free Kolmogorov distance between an empirical sample and
/// a piecewise-linear CDF given on a sorted grid of cell edges.
pub fn ks_against_grid(samples: &mut [f64], edges: &[f64], cell_probs: &[f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let mut cdf = vec![0.0];
    for p in cell_probs {
        cdf.push(cdf.last().unwrap() + p);
    }
    let total = *cdf.last().unwrap();
    let grid_cdf = |x: f64| -> f64 {
        if x <= edges[0] {
            return 0.0;
        }
        if x >= *edges.last().unwrap() {
            return 1.0;
        }
        let i = edges.partition_point(|&e| e <= x) - 1;
        let frac = (x - edges[i]) / (edges[i + 1] - edges[i]);
        (cdf[i] + frac * (cdf[i + 1] - cdf[i])) / total
    };
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = grid_cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((f - (i + 1) as f64 / n).abs());
    }
    d
}

/// `log p(y₁:ₙ)` for `x_k = A x_{k-1} + w`, `y_k = H x_k + v`, `x_0 ~ N(m0, P0)`,
/// from the stacked covariance `Cov(x_i, x_j) = A^{j-i} P_i` for `i ≤ j`.
pub fn joint_linear_gaussian_loglik(
    m0: &DVector<f64>,
    p0: &DMatrix<f64>,
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    ys: &[DVector<f64>],
) -> f64 {
    let n = ys.len();
    let d = h.nrows();
    let mut means = Vec::with_capacity(n);
    let mut covs = Vec::with_capacity(n);
    let (mut m, mut p) = (m0.clone(), p0.clone());
    for _ in 0..n {
        m = a * &m;
        p = a * &p * a.transpose() + q;
        means.push(m.clone());
        covs.push(p.clone());
    }
    let mut mean = DVector::zeros(n * d);
    let mut cov = DMatrix::zeros(n * d, n * d);
    let mut y = DVector::zeros(n * d);
    for i in 0..n {
        mean.rows_mut(i * d, d).copy_from(&(h * &means[i]));
        y.rows_mut(i * d, d).copy_from(&ys[i]);
        let mut power = DMatrix::identity(a.nrows(), a.nrows());
        for j in i..n {
            let cross = h * &power * &covs[i] * h.transpose();
            let block = if i == j { &cross + r } else { cross };
            cov.view_mut((j * d, i * d), (d, d)).copy_from(&block);
            cov.view_mut((i * d, j * d), (d, d)).copy_from(&block.transpose());
            power = a * power;
        }
    }
    mvn_logpdf(&y, &mean, &cov)
}

/// `log Gamma(x; shape 2, scale s)` straight from the density `x e^{-x/s} / s²`.
pub fn gamma2_log_density(x: f64, s: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (x * (-x / s).exp() / (s * s)).ln()
}

/// One target that every measurement is forced onto.
pub fn forced_problem(observations: Vec<Observation>) -> TrackingProblem {
    use rbmcda::association::NewTargetModel;
    let cfg = AssocPriorConfig { new_target: NewTargetModel::Fixed { p_new: 0.0 }, ..Default::default() };
    TrackingProblem::new(observations, cfg, BirthCoupling::Joint).unwrap()
}

pub struct GridMarginal {
    /// Cell edges of the σ axis.
    pub edges: Vec<f64>,
    pub probs: Vec<f64>,
    pub evaluations: usize,
}

/// Posterior of σ for the forced single-target model by midpoint quadrature
/// over `[√q, λ, σ]`. A coarse pass over `bounds` locates the region within
/// `e^-20` of the mode; the fine pass covers that region with `fine` cells per axis.
pub fn sigma_grid_posterior(
    problem: &TrackingProblem,
    prior: &rbmcda::pmcmc::PriorSpec,
    bounds: [(f64, f64); 3],
    coarse: usize,
    fine: usize,
) -> GridMarginal {
    let history = vec![1; problem.len()];
    let modes = [prior.sqrt_q_mode, prior.lambda_mode, prior.sigma_mode];
    let log_post = |c: [f64; 3]| -> f64 {
        let lp: f64 = c.iter().zip(&modes).map(|(&x, &s)| gamma2_log_density(x, s)).sum();
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let params = ModelParams { q: c[0] * c[0], lambda: c[1], sigma: c[2] };
        let model = problem.model(params).unwrap();
        lp + rbmcda::filter::assoc_loglik(&problem.observations, &model, &problem.assoc.cfg, &history).unwrap()
    };
    let run = |b: [(f64, f64); 3], n: usize| -> (Vec<f64>, [f64; 3]) {
        let w = [0, 1, 2].map(|i| (b[i].1 - b[i].0) / n as f64);
        let mut vals = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = [
                        b[0].0 + (i as f64 + 0.5) * w[0],
                        b[1].0 + (j as f64 + 0.5) * w[1],
                        b[2].0 + (k as f64 + 0.5) * w[2],
                    ];
                    vals.push(log_post(c));
                }
            }
        }
        (vals, w)
    };
    let (vals, w) = run(bounds, coarse);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = [usize::MAX; 3];
    let mut hi = [0; 3];
    for (idx, v) in vals.iter().enumerate() {
        if *v > max - 20.0 {
            let ijk = [idx / (coarse * coarse), (idx / coarse) % coarse, idx % coarse];
            for a in 0..3 {
                lo[a] = lo[a].min(ijk[a]);
                hi[a] = hi[a].max(ijk[a]);
            }
        }
    }
    let fine_bounds = [0, 1, 2].map(|a| {
        let l = bounds[a].0 + lo[a].saturating_sub(1) as f64 * w[a];
        let h = bounds[a].0 + ((hi[a] + 2).min(coarse)) as f64 * w[a];
        (l.max(0.0), h)
    });
    let (vals, w) = run(fine_bounds, fine);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; fine];
    for (idx, v) in vals.iter().enumerate() {
        probs[idx % fine] += (v - max).exp();
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let edges = (0..=fine).map(|k| fine_bounds[2].0 + k as f64 * w[2]).collect();
    GridMarginal { edges, probs, evaluations: coarse.pow(3) + fine.pow(3) }
}
