use crate::association::{clutter_loglik, is_canonical, AssocPriorConfig, Label, CLUTTER};
use crate::gauss::{kf_predict, kf_update};
use crate::model::{OuModel, StateMoments};
use crate::simulate::Observation;
use crate::{Error, Result};

/// Exact conditional likelihood of a history plus the final target moments.
#[derive(Debug, Clone)]
pub struct HistoryFit {
    pub log_lik: f64,
    /// Moments of every target at the time of the last observation.
    pub targets: Vec<StateMoments>,
}

/// `log p(y₁:ₙ | θ, c₁:ₙ)` by one Kalman pass over the history.
pub fn assoc_loglik(
    obs: &[Observation],
    model: &OuModel,
    cfg: &AssocPriorConfig,
    history: &[Label],
) -> Result<f64> {
    fit_history(obs, model, cfg, history).map(|f| f.log_lik)
}

/// Like [`assoc_loglik`] but also returns the target moments.
///
/// Every seen target is predicted at every step; only target `c_k` is updated.
pub fn fit_history(
    obs: &[Observation],
    model: &OuModel,
    cfg: &AssocPriorConfig,
    history: &[Label],
) -> Result<HistoryFit> {
    check_history(history, obs.len())?;
    let mut targets: Vec<StateMoments> = Vec::new();
    let mut log_lik = 0.0;
    let mut last_t = obs.first().map_or(0.0, |o| o.t);
    for (o, &c) in obs.iter().zip(history) {
        if !targets.is_empty() {
            let (a, q) = model.transition(o.t - last_t)?;
            for target in targets.iter_mut() {
                *target = kf_predict(target, &a, &q)?;
            }
        }
        last_t = o.t;
        if c == CLUTTER {
            log_lik += clutter_loglik(&o.y, cfg);
            continue;
        }
        if c as usize == targets.len() + 1 {
            targets.push(model.birth.clone());
        }
        let slot = &mut targets[c as usize - 1];
        let (post, lh) = kf_update(slot, &o.y, &model.obs_matrix, &model.obs_noise)?;
        *slot = post;
        log_lik += lh;
    }
    Ok(HistoryFit { log_lik, targets })
}

/// Log likelihood of the measurements at `indices` (increasing) all coming
/// from one target born at the first of them.
pub fn cluster_loglik(obs: &[Observation], model: &OuModel, indices: &[usize]) -> Result<f64> {
    let mut log_lik = 0.0;
    let mut state = model.birth.clone();
    let mut last_t = None;
    for &i in indices {
        let o = &obs[i];
        if let Some(t0) = last_t {
            let (a, q) = model.transition(o.t - t0)?;
            state = kf_predict(&state, &a, &q)?;
        }
        let (post, lh) = kf_update(&state, &o.y, &model.obs_matrix, &model.obs_noise)?;
        state = post;
        log_lik += lh;
        last_t = Some(o.t);
    }
    Ok(log_lik)
}

pub(crate) fn check_history(history: &[Label], len: usize) -> Result<()> {
    if history.len() != len {
        return Err(Error::invalid(format!(
            "history has {} entries for {len} observations",
            history.len()
        )));
    }
    if !is_canonical(history) {
        return Err(Error::invalid("history is not canonical"));
    }
    Ok(())
}
