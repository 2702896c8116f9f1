use rand::Rng;

/// `1 / Σ wᵢ²` for normalized weights.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Unconditional,
    /// Slot 0 keeps its particle; the other slots are drawn from all particles.
    KeepFirst,
}

/// Systematic resampling of `n_out` indices with offset `u ∈ [0, 1)`.
///
/// Output indices are nondecreasing. Zero-weight particles are never chosen.
pub fn systematic_indices(weights: &[f64], n_out: usize, u: f64) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / n_out as f64;
    let mut out = Vec::with_capacity(n_out);
    let mut acc = weights[0];
    let mut j = 0;
    for i in 0..n_out {
        let point = (u + i as f64) * step;
        while point >= acc && j + 1 < weights.len() {
            j += 1;
            acc += weights[j];
        }
        // Floating-point slack at the top end: step back to a positive weight.
        while weights[j] == 0.0 && j > 0 {
            j -= 1;
        }
        out.push(j);
    }
    out
}

/// Ancestor indices for a resampling step.
pub fn resample_indices<R: Rng + ?Sized>(weights: &[f64], mode: ResampleMode, rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let u: f64 = rng.random();
    match mode {
        ResampleMode::Unconditional => systematic_indices(weights, n, u),
        ResampleMode::KeepFirst => {
            let mut idx = Vec::with_capacity(n);
            idx.push(0);
            if n > 1 {
                idx.extend(systematic_indices(weights, n - 1, u));
            }
            idx
        }
    }
}
