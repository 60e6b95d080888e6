//! Log-space inference and EM over a chain whose transition matrix may change
//! from frame to frame.
//!
//! The baseline network uses a single matrix everywhere; the constrained
//! network selects the matrix of the constraint active at the destination
//! frame. Both go through the same code so that a one-constraint model and the
//! baseline perform identical floating-point operations.

use serde::{Deserialize, Serialize};

use crate::dbn::GaussianState;
use crate::error::{invalid, numeric, Error, Result};
use crate::statmath::{log_sum_exp, GaussianParams, TransitionMatrix};

/// State posteriors, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    frames: usize,
    states: usize,
    data: Vec<f64>,
}

impl GammaMatrix {
    pub(crate) fn from_raw(frames: usize, states: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), frames * states);
        Self { frames, states, data }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.states..(t + 1) * self.states]
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.data[t * self.states + i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Expected motion per frame: `gamma * means`, one mean per state.
    pub fn expected(&self, means: &[&[f64]]) -> Vec<Vec<f64>> {
        let d = means.first().map_or(0, |m| m.len());
        (0..self.frames)
            .map(|t| {
                let mut out = vec![0.0; d];
                for (g, m) in self.row(t).iter().zip(means) {
                    for (o, v) in out.iter_mut().zip(m.iter()) {
                        *o += g * v;
                    }
                }
                out
            })
            .collect()
    }
}

/// How state posteriors are turned into a gamma matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// Forward-backward posteriors.
    #[default]
    Smoothed,
    /// Indicator rows on the most probable state path.
    Viterbi,
}

impl std::str::FromStr for GammaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothed" => Ok(GammaMode::Smoothed),
            "viterbi" => Ok(GammaMode::Viterbi),
            other => Err(invalid(format!("unknown gamma mode `{other}`"))),
        }
    }
}

/// Emission log-likelihoods, row-major `frames x states`. Motion is included
/// when given (full observation) and marginalized otherwise.
pub(crate) fn emission_matrix(
    states: &[GaussianState],
    speech: &[Vec<f64>],
    motion: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>> {
    let n = states.len();
    let ds = states[0].speech.dim();
    let dm = states[0].motion.dim();
    if let Some(m) = motion {
        if m.len() != speech.len() {
            return Err(invalid(format!(
                "speech has {} frames but motion has {}",
                speech.len(),
                m.len()
            )));
        }
    }
    let mut out = vec![0.0; speech.len() * n];
    for (t, s) in speech.iter().enumerate() {
        if s.len() != ds {
            return Err(invalid(format!("speech frame {t} has {} values, expected {ds}", s.len())));
        }
        let m = match motion {
            Some(m) if m[t].len() != dm => {
                return Err(invalid(format!("motion frame {t} has {} values, expected {dm}", m[t].len())))
            }
            Some(m) => Some(m[t].as_slice()),
            None => None,
        };
        for (i, st) in states.iter().enumerate() {
            let mut lp = st.speech.logpdf(s);
            if let Some(m) = m {
                lp += st.motion.logpdf(m);
            }
            out[t * n + i] = lp;
        }
    }
    Ok(out)
}

/// One observed chain: emissions plus the transition matrix index used for
/// the step into each frame (entry 0 is unused) and the prior index.
pub(crate) struct Chain<'a> {
    pub log_emit: &'a [f64],
    pub trans_idx: &'a [usize],
    pub prior_idx: usize,
}

pub(crate) struct LogParams {
    pub n: usize,
    pub log_trans: Vec<Vec<f64>>,
    pub log_priors: Vec<Vec<f64>>,
}

impl LogParams {
    pub fn new(trans: &[TransitionMatrix], priors: &[Vec<f64>]) -> Self {
        Self {
            n: trans[0].size(),
            log_trans: trans.iter().map(TransitionMatrix::log_entries).collect(),
            log_priors: priors.iter().map(|p| p.iter().map(|v| v.ln()).collect()).collect(),
        }
    }
}

fn dead_frame(t: usize) -> Error {
    numeric(format!("every state has zero probability at frame {t}"))
}

/// Forward pass; returns log alphas (row-major) and the log evidence.
pub(crate) fn forward(p: &LogParams, c: &Chain<'_>) -> Result<(Vec<f64>, f64)> {
    let n = p.n;
    let frames = c.log_emit.len() / n;
    if frames == 0 {
        return Err(invalid("empty sequence"));
    }
    let mut alpha = vec![f64::NEG_INFINITY; frames * n];
    let prior = &p.log_priors[c.prior_idx];
    for j in 0..n {
        alpha[j] = prior[j] + c.log_emit[j];
    }
    if alpha[..n].iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(dead_frame(0));
    }
    let mut buf = vec![0.0; n];
    for t in 1..frames {
        let a = &p.log_trans[c.trans_idx[t]];
        let (prev, cur) = alpha.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        for j in 0..n {
            for i in 0..n {
                buf[i] = prev[i] + a[i * n + j];
            }
            cur[j] = log_sum_exp(&buf) + c.log_emit[t * n + j];
        }
        if cur[..n].iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(dead_frame(t));
        }
    }
    let log_z = log_sum_exp(&alpha[(frames - 1) * n..]);
    if !log_z.is_finite() {
        return Err(numeric("non-finite log evidence"));
    }
    Ok((alpha, log_z))
}

fn backward(p: &LogParams, c: &Chain<'_>) -> Vec<f64> {
    let n = p.n;
    let frames = c.log_emit.len() / n;
    let mut beta = vec![0.0; frames * n];
    let mut buf = vec![0.0; n];
    for t in (0..frames - 1).rev() {
        let a = &p.log_trans[c.trans_idx[t + 1]];
        let (cur, next) = beta.split_at_mut((t + 1) * n);
        let next = &next[..n];
        let emit = &c.log_emit[(t + 1) * n..(t + 2) * n];
        for i in 0..n {
            for j in 0..n {
                buf[j] = a[i * n + j] + emit[j] + next[j];
            }
            cur[t * n + i] = log_sum_exp(&buf);
        }
    }
    beta
}

/// Result of a forward-backward pass.
pub(crate) struct Posterior {
    pub gamma: Vec<f64>,
    pub log_z: f64,
    /// Expected transition counts per matrix index (only if requested).
    pub xi: Vec<Vec<f64>>,
}

pub(crate) fn forward_backward(p: &LogParams, c: &Chain<'_>, n_mats: Option<usize>) -> Result<Posterior> {
    let n = p.n;
    let frames = c.log_emit.len() / n;
    let (alpha, log_z) = forward(p, c)?;
    let beta = backward(p, c);

    let mut gamma = vec![0.0; frames * n];
    for t in 0..frames {
        let row = &mut gamma[t * n..(t + 1) * n];
        let mut s = 0.0;
        for i in 0..n {
            let v = (alpha[t * n + i] + beta[t * n + i] - log_z).exp();
            row[i] = v;
            s += v;
        }
        if !(s > 0.0) {
            return Err(dead_frame(t));
        }
        row.iter_mut().for_each(|v| *v /= s);
    }

    let mut xi = Vec::new();
    if let Some(k) = n_mats {
        xi = vec![vec![0.0; n * n]; k];
        for t in 1..frames {
            let m = c.trans_idx[t];
            let a = &p.log_trans[m];
            let acc = &mut xi[m];
            for i in 0..n {
                let ai = alpha[(t - 1) * n + i];
                if ai == f64::NEG_INFINITY {
                    continue;
                }
                for j in 0..n {
                    let l = a[i * n + j];
                    if l == f64::NEG_INFINITY {
                        continue;
                    }
                    acc[i * n + j] += (ai + l + c.log_emit[t * n + j] + beta[t * n + j] - log_z).exp();
                }
            }
        }
    }
    Ok(Posterior { gamma, log_z, xi })
}

/// Most probable state path; ties resolve to the lowest state index.
pub(crate) fn viterbi(p: &LogParams, c: &Chain<'_>) -> Result<(Vec<usize>, f64)> {
    let n = p.n;
    let frames = c.log_emit.len() / n;
    if frames == 0 {
        return Err(invalid("empty sequence"));
    }
    let mut delta = vec![f64::NEG_INFINITY; frames * n];
    let mut psi = vec![0usize; frames * n];
    let prior = &p.log_priors[c.prior_idx];
    for j in 0..n {
        delta[j] = prior[j] + c.log_emit[j];
    }
    for t in 1..frames {
        let a = &p.log_trans[c.trans_idx[t]];
        for j in 0..n {
            let mut best = (0, f64::NEG_INFINITY);
            for i in 0..n {
                let v = delta[(t - 1) * n + i] + a[i * n + j];
                if v > best.1 {
                    best = (i, v);
                }
            }
            psi[t * n + j] = best.0;
            delta[t * n + j] = best.1 + c.log_emit[t * n + j];
        }
        if delta[t * n..(t + 1) * n].iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(dead_frame(t));
        }
    }
    let last = &delta[(frames - 1) * n..];
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in last.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return Err(dead_frame(0));
    }
    let mut path = vec![0; frames];
    path[frames - 1] = best.0;
    for t in (1..frames).rev() {
        path[t - 1] = psi[t * n + path[t]];
    }
    Ok((path, best.1))
}

/// Posteriors in the requested mode.
pub(crate) fn gamma(p: &LogParams, c: &Chain<'_>, mode: GammaMode) -> Result<GammaMatrix> {
    let n = p.n;
    let frames = c.log_emit.len() / n;
    match mode {
        GammaMode::Smoothed => Ok(GammaMatrix::from_raw(frames, n, forward_backward(p, c, None)?.gamma)),
        GammaMode::Viterbi => {
            let (path, _) = viterbi(p, c)?;
            let mut data = vec![0.0; frames * n];
            for (t, &s) in path.iter().enumerate() {
                data[t * n + s] = 1.0;
            }
            Ok(GammaMatrix::from_raw(frames, n, data))
        }
    }
}

/// EM controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    /// Maximum number of M-steps.
    pub max_iter: usize,
    /// Stop once the log-likelihood rate improves by less than this.
    pub tol: f64,
    /// Keep the Gaussians fixed and only refine transitions and priors.
    pub freeze_gaussians: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-5, freeze_gaussians: false }
    }
}

/// Occupancy below which a state is considered starved.
pub const STARVATION_OCCUPANCY: f64 = 1e-3;

pub(crate) struct EmSeq<'a> {
    pub speech: &'a [Vec<f64>],
    pub motion: &'a [Vec<f64>],
    pub trans_idx: Vec<usize>,
    pub prior_idx: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct EmParams {
    pub states: Vec<GaussianState>,
    pub trans: Vec<TransitionMatrix>,
    pub priors: Vec<Vec<f64>>,
}

struct EStep {
    posts: Vec<Posterior>,
    llr: f64,
}

fn e_step(params: &EmParams, seqs: &[EmSeq<'_>]) -> Result<EStep> {
    let lp = LogParams::new(&params.trans, &params.priors);
    let k = params.trans.len();
    let run = |s: &EmSeq<'_>| -> Result<Posterior> {
        let emit = emission_matrix(&params.states, s.speech, Some(s.motion))?;
        let chain = Chain { log_emit: &emit, trans_idx: &s.trans_idx, prior_idx: s.prior_idx };
        forward_backward(&lp, &chain, Some(k))
    };
    #[cfg(feature = "parallel")]
    let posts: Vec<Result<Posterior>> = {
        use rayon::prelude::*;
        seqs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let posts: Vec<Result<Posterior>> = seqs.iter().map(run).collect();
    let posts = posts.into_iter().collect::<Result<Vec<_>>>()?;
    let frames: usize = seqs.iter().map(|s| s.speech.len()).sum();
    let llr = posts.iter().map(|p| p.log_z).sum::<f64>() / frames as f64;
    Ok(EStep { posts, llr })
}

fn m_step(params: &EmParams, seqs: &[EmSeq<'_>], e: &EStep, freeze: bool) -> Result<EmParams> {
    let n = params.states.len();
    let k = params.trans.len();

    let mut priors = params.priors.clone();
    for (m, prior) in priors.iter_mut().enumerate() {
        let mut acc = vec![0.0; n];
        let mut any = false;
        for (s, post) in seqs.iter().zip(&e.posts) {
            if s.prior_idx == m {
                any = true;
                for (a, g) in acc.iter_mut().zip(&post.gamma[..n]) {
                    *a += g;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if any && total > 0.0 {
            *prior = acc.iter().map(|v| v / total).collect();
        }
    }

    let mut trans = Vec::with_capacity(k);
    for m in 0..k {
        let mut counts = vec![0.0; n * n];
        for post in &e.posts {
            for (c, x) in counts.iter_mut().zip(&post.xi[m]) {
                *c += x;
            }
        }
        let old = &params.trans[m];
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let row = &counts[i * n..(i + 1) * n];
            let s: f64 = row.iter().sum();
            if s > 0.0 && s.is_finite() {
                data.extend(row.iter().map(|c| c / s));
            } else {
                data.extend_from_slice(old.row(i));
            }
        }
        trans.push(TransitionMatrix::new(n, data)?);
    }

    let states = if freeze {
        params.states.clone()
    } else {
        refit_states(params, seqs, e)?
    };
    Ok(EmParams { states, trans, priors })
}

fn refit_states(params: &EmParams, seqs: &[EmSeq<'_>], e: &EStep) -> Result<Vec<GaussianState>> {
    let n = params.states.len();
    let weights: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            e.posts
                .iter()
                .flat_map(|p| p.gamma.iter().skip(i).step_by(n).copied())
                .collect()
        })
        .collect();
    let occupancy: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();
    let speech_rows = || seqs.iter().flat_map(|s| s.speech.iter().map(Vec::as_slice));
    let motion_rows = || seqs.iter().flat_map(|s| s.motion.iter().map(Vec::as_slice));

    let fit = |i: usize| -> Result<Option<GaussianState>> {
        if occupancy[i] < STARVATION_OCCUPANCY {
            return Ok(None);
        }
        Ok(Some(GaussianState {
            speech: GaussianParams::fit_weighted(speech_rows(), &weights[i])?,
            motion: GaussianParams::fit_weighted(motion_rows(), &weights[i])?,
        }))
    };
    #[cfg(feature = "parallel")]
    let fitted: Vec<Result<Option<GaussianState>>> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(fit).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fitted: Vec<Result<Option<GaussianState>>> = (0..n).map(fit).collect();
    let fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;

    let donor = (0..n)
        .max_by(|&a, &b| occupancy[a].total_cmp(&occupancy[b]).then(b.cmp(&a)))
        .unwrap();
    let mut out = Vec::with_capacity(n);
    let mut sign = 1.0;
    for (i, f) in fitted.into_iter().enumerate() {
        match f {
            Some(s) => out.push(s),
            None => {
                log::warn!(
                    "state {i} starved (occupancy {:.3e}); respawning from state {donor}",
                    occupancy[i]
                );
                let src = match &out.get(donor) {
                    Some(s) if donor < i => (*s).clone(),
                    _ => params.states[donor].clone(),
                };
                out.push(src.perturbed(0.25 * sign)?);
                sign = -sign;
            }
        }
    }
    Ok(out)
}

/// Runs EM until the rate gain drops below `tol` or `max_iter` M-steps.
/// Returns the final parameters and the log-likelihood rate of every
/// evaluated model (initial model first).
pub(crate) fn run_em(init: EmParams, seqs: &[EmSeq<'_>], opts: &EmOptions) -> Result<(EmParams, Vec<f64>)> {
    if seqs.is_empty() {
        return Err(invalid("EM needs at least one sequence"));
    }
    let mut params = init;
    let mut e = e_step(&params, seqs)?;
    let mut history = vec![e.llr];
    for _ in 0..opts.max_iter {
        let next = m_step(&params, seqs, &e, opts.freeze_gaussians)?;
        let next_e = e_step(&next, seqs)?;
        let gain = next_e.llr - e.llr;
        history.push(next_e.llr);
        params = next;
        e = next_e;
        if gain < opts.tol {
            break;
        }
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_is_gamma_times_means() {
        let g = GammaMatrix::from_raw(2, 2, vec![0.25, 0.75, 1.0, 0.0]);
        let m0 = [1.0, 2.0];
        let m1 = [3.0, -2.0];
        let e = g.expected(&[&m0, &m1]);
        assert_eq!(e, vec![vec![2.5, -1.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn gamma_mode_parses() {
        assert_eq!("viterbi".parse::<GammaMode>().unwrap(), GammaMode::Viterbi);
        assert!("soft".parse::<GammaMode>().is_err());
    }
}
