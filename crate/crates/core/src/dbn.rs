//! Baseline joint speech-motion network.
//!
//! A single discrete hidden state drives two conditionally independent
//! full-covariance Gaussian emissions, one for the six prosody features and
//! one for the joint rotations. Transitions are ergodic and first order, one
//! slice per 120 fps frame. Motion is synthesized as the posterior expectation
//! of the motion means given speech alone.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inference::{self, Chain, EmOptions, EmParams, EmSeq, GammaMatrix, GammaMode, LogParams};
use crate::statmath::{kl_gaussian, GaussianParams, TransitionMatrix};

/// One hidden-state configuration: a speech Gaussian and a motion Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub speech: GaussianParams,
    pub motion: GaussianParams,
}

impl GaussianState {
    pub fn speech_dim(&self) -> usize {
        self.speech.dim()
    }

    pub fn motion_dim(&self) -> usize {
        self.motion.dim()
    }

    /// Symmetrized KL divergence of the block-diagonal joint Gaussians.
    /// Blocks are independent, so the joint divergence is the sum over blocks.
    pub fn sym_kl(&self, other: &GaussianState) -> Result<f64> {
        let pq = kl_gaussian(&self.speech, &other.speech)? + kl_gaussian(&self.motion, &other.motion)?;
        let qp = kl_gaussian(&other.speech, &self.speech)? + kl_gaussian(&other.motion, &self.motion)?;
        Ok(0.5 * (pq + qp))
    }

    /// Copy with both means moved by `shift` standard deviations per dimension.
    pub(crate) fn perturbed(&self, shift: f64) -> Result<GaussianState> {
        let move_mean = |g: &GaussianParams| {
            let mean = nalgebra::DVector::from_fn(g.dim(), |j, _| g.mean()[j] + shift * g.cov()[(j, j)].sqrt());
            GaussianParams::new(mean, g.cov().clone())
        };
        Ok(GaussianState { speech: move_mean(&self.speech)?, motion: move_mean(&self.motion)? })
    }
}

/// Which nodes are observed when scoring a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    /// Speech and motion (training).
    Full,
    /// Speech only (synthesis).
    Partial,
}

/// A training or evaluation sequence: aligned speech and motion frames.
#[derive(Debug, Clone, Copy)]
pub struct ObservedSeq<'a> {
    pub speech: &'a [Vec<f64>],
    pub motion: &'a [Vec<f64>],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDbnModel")]
pub struct DbnModel {
    states: Vec<GaussianState>,
    trans: TransitionMatrix,
    prior: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDbnModel {
    states: Vec<GaussianState>,
    trans: TransitionMatrix,
    prior: Vec<f64>,
}

impl TryFrom<RawDbnModel> for DbnModel {
    type Error = crate::Error;

    fn try_from(r: RawDbnModel) -> Result<Self> {
        Self::new(r.states, r.trans, r.prior)
    }
}

pub(crate) fn check_states(states: &[GaussianState]) -> Result<()> {
    let first = states.first().ok_or_else(|| invalid("a model needs at least one state"))?;
    let (ds, dm) = (first.speech_dim(), first.motion_dim());
    if states.iter().any(|s| s.speech_dim() != ds || s.motion_dim() != dm) {
        return Err(invalid("states disagree on speech or motion dimension"));
    }
    Ok(())
}

pub(crate) fn check_simplex(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(invalid(format!("{what} has {} entries, expected {n}", p.len())));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid(format!("{what} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{what} sums to {s}")));
    }
    Ok(())
}

impl DbnModel {
    pub fn new(states: Vec<GaussianState>, trans: TransitionMatrix, prior: Vec<f64>) -> Result<Self> {
        check_states(&states)?;
        if trans.size() != states.len() {
            return Err(invalid(format!(
                "{} states but a {}x{} transition matrix",
                states.len(),
                trans.size(),
                trans.size()
            )));
        }
        check_simplex(&prior, states.len(), "state prior")?;
        Ok(Self { states, trans, prior })
    }

    /// Uniform ergodic transitions and a uniform prior over `states`.
    pub fn ergodic(states: Vec<GaussianState>) -> Result<Self> {
        let n = states.len();
        Self::new(states, TransitionMatrix::uniform(n.max(1)), vec![1.0 / n.max(1) as f64; n])
    }

    pub fn states(&self) -> &[GaussianState] {
        &self.states
    }

    pub fn trans(&self) -> &TransitionMatrix {
        &self.trans
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn speech_dim(&self) -> usize {
        self.states[0].speech_dim()
    }

    pub fn motion_dim(&self) -> usize {
        self.states[0].motion_dim()
    }

    /// Emission log-probability of one frame under state `i`: speech and
    /// motion when motion is given, speech alone otherwise.
    pub fn obs_logprob(&self, speech: &[f64], motion: Option<&[f64]>, i: usize) -> Result<f64> {
        let st = self
            .states
            .get(i)
            .ok_or_else(|| invalid(format!("state {i} out of range for {} states", self.n_states())))?;
        let mut lp = st.speech.try_logpdf(speech)?;
        if let Some(m) = motion {
            lp += st.motion.try_logpdf(m)?;
        }
        Ok(lp)
    }

    pub(crate) fn log_params(&self) -> LogParams {
        LogParams::new(std::slice::from_ref(&self.trans), std::slice::from_ref(&self.prior))
    }

    /// State posteriors given speech only.
    pub fn posterior_gamma(&self, speech: &[Vec<f64>], mode: GammaMode) -> Result<GammaMatrix> {
        if speech.is_empty() {
            return Err(invalid("empty speech sequence"));
        }
        let emit = inference::emission_matrix(&self.states, speech, None)?;
        let idx = vec![0; speech.len()];
        let chain = Chain { log_emit: &emit, trans_idx: &idx, prior_idx: 0 };
        inference::gamma(&self.log_params(), &chain, mode)
    }

    /// Expected motion per frame, `sum_i gamma_t(i) * mu_motion(i)`.
    pub fn synthesize(&self, speech: &[Vec<f64>], mode: GammaMode) -> Result<Vec<Vec<f64>>> {
        let gamma = self.posterior_gamma(speech, mode)?;
        Ok(gamma.expected(&self.motion_means()))
    }

    pub(crate) fn motion_means(&self) -> Vec<&[f64]> {
        self.states.iter().map(|s| s.motion.mean().as_slice()).collect()
    }

    /// Log evidence of one sequence from the forward recursion.
    pub fn log_evidence(&self, speech: &[Vec<f64>], motion: Option<&[Vec<f64>]>) -> Result<f64> {
        if speech.is_empty() {
            return Err(invalid("empty speech sequence"));
        }
        let emit = inference::emission_matrix(&self.states, speech, motion)?;
        let idx = vec![0; speech.len()];
        let chain = Chain { log_emit: &emit, trans_idx: &idx, prior_idx: 0 };
        Ok(inference::forward(&self.log_params(), &chain)?.1)
    }

    /// Total log evidence divided by total frame count.
    pub fn loglik_rate(&self, seqs: &[ObservedSeq<'_>], observation: Observation) -> Result<f64> {
        if seqs.is_empty() {
            return Err(invalid("no sequences to score"));
        }
        let mut total = 0.0;
        let mut frames = 0;
        for s in seqs {
            let motion = match observation {
                Observation::Full => Some(s.motion),
                Observation::Partial => None,
            };
            total += self.log_evidence(s.speech, motion)?;
            frames += s.speech.len();
        }
        Ok(total / frames as f64)
    }

    /// Total posterior occupancy of every state under full observation.
    pub fn occupancy(&self, seqs: &[ObservedSeq<'_>]) -> Result<Vec<f64>> {
        let lp = self.log_params();
        let n = self.n_states();
        let mut occ = vec![0.0; n];
        for s in seqs {
            let emit = inference::emission_matrix(&self.states, s.speech, Some(s.motion))?;
            let idx = vec![0; s.speech.len()];
            let chain = Chain { log_emit: &emit, trans_idx: &idx, prior_idx: 0 };
            let post = inference::forward_backward(&lp, &chain, None)?;
            for row in post.gamma.chunks(n) {
                for (o, g) in occ.iter_mut().zip(row) {
                    *o += g;
                }
            }
        }
        Ok(occ)
    }

    /// Relabels states: new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_states();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(invalid("not a permutation of the states"));
        }
        Self::new(
            perm.iter().map(|&p| self.states[p].clone()).collect(),
            self.trans.permuted(perm),
            perm.iter().map(|&p| self.prior[p]).collect(),
        )
    }
}

/// Baum-Welch with full observations.
///
/// Returns the refined model and the log-likelihood rate of every evaluated
/// model, starting with `model` itself.
pub fn em_train(model: &DbnModel, seqs: &[ObservedSeq<'_>], opts: &EmOptions) -> Result<(DbnModel, Vec<f64>)> {
    if seqs.is_empty() {
        return Err(invalid("EM needs at least one sequence"));
    }
    let em_seqs: Vec<EmSeq<'_>> = seqs
        .iter()
        .map(|s| {
            if s.speech.is_empty() {
                return Err(invalid("empty training sequence"));
            }
            Ok(EmSeq {
                speech: s.speech,
                motion: s.motion,
                trans_idx: vec![0; s.speech.len()],
                prior_idx: 0,
            })
        })
        .collect::<Result<_>>()?;
    let init = EmParams {
        states: model.states.clone(),
        trans: vec![model.trans.clone()],
        priors: vec![model.prior.clone()],
    };
    let (p, history) = inference::run_em(init, &em_seqs, opts)?;
    let EmParams { states, mut trans, mut priors } = p;
    let out = DbnModel::new(states, trans.remove(0), priors.remove(0))
        .map_err(|e| Error::Numeric(format!("EM produced an invalid model: {e}")))?;
    Ok((out, history))
}

/// Baseline training pipeline: LBG initialization on the joint frames of all
/// sequences, uniform ergodic transitions, then EM.
pub fn train_baseline(
    seqs: &[ObservedSeq<'_>],
    n_states: usize,
    lbg: &crate::vq::LbgOptions,
    opts: &EmOptions,
) -> Result<(DbnModel, Vec<f64>)> {
    let joint = joint_frames(seqs)?;
    let speech_dim = seqs[0].speech[0].len();
    let states = crate::vq::init_states(&joint, n_states, speech_dim, lbg)?;
    em_train(&DbnModel::ergodic(states)?, seqs, opts)
}

/// Speech and motion concatenated frame by frame.
pub fn joint_frames(seqs: &[ObservedSeq<'_>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for s in seqs {
        if s.speech.len() != s.motion.len() {
            return Err(invalid("speech and motion lengths differ"));
        }
        for (a, b) in s.speech.iter().zip(s.motion) {
            let mut row = a.clone();
            row.extend_from_slice(b);
            out.push(row);
        }
    }
    if out.is_empty() {
        return Err(Error::Data("no frames".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn state(speech_mean: f64, motion_mean: f64) -> GaussianState {
        GaussianState {
            speech: GaussianParams::from_slices(&[speech_mean], &[1.0]).unwrap(),
            motion: GaussianParams::from_slices(&[motion_mean, -motion_mean], &[1.0, 0.2, 0.2, 2.0]).unwrap(),
        }
    }

    fn two_state() -> DbnModel {
        DbnModel::new(
            vec![state(-3.0, 10.0), state(3.0, -5.0)],
            TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn partial_observation_is_speech_only() {
        let m = two_state();
        let s = [0.7];
        let mo = [1.0, 2.0];
        let partial = m.obs_logprob(&s, None, 1).unwrap();
        let full = m.obs_logprob(&s, Some(&mo), 1).unwrap();
        assert_eq!(partial, m.states()[1].speech.logpdf(&s));
        assert_abs_diff_eq!(full - partial, m.states()[1].motion.logpdf(&mo), epsilon = 1e-12);
        assert!(m.obs_logprob(&s, None, 2).is_err());
    }

    #[test]
    fn single_state_gamma_and_synthesis() {
        let m = DbnModel::ergodic(vec![state(0.0, 4.0)]).unwrap();
        let speech: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64]).collect();
        let g = m.posterior_gamma(&speech, GammaMode::Smoothed).unwrap();
        assert!(g.as_slice().iter().all(|v| *v == 1.0));
        let traj = m.synthesize(&speech, GammaMode::Smoothed).unwrap();
        assert!(traj.iter().all(|f| f == &vec![4.0, -4.0]));
    }

    #[test]
    fn dwelling_speech_selects_state() {
        let m = two_state();
        let speech = vec![vec![3.0]; 20];
        let traj = m.synthesize(&speech, GammaMode::Smoothed).unwrap();
        // posterior odds per frame are exp(-18) against state 0
        for f in &traj {
            assert_abs_diff_eq!(f[0], -5.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn synthesis_is_gamma_times_means() {
        let m = two_state();
        let speech: Vec<Vec<f64>> = (0..12).map(|t| vec![(t as f64 * 0.9).sin() * 2.0]).collect();
        let g = m.posterior_gamma(&speech, GammaMode::Smoothed).unwrap();
        let traj = m.synthesize(&speech, GammaMode::Smoothed).unwrap();
        for (t, f) in traj.iter().enumerate() {
            let want = g.get(t, 0) * 10.0 + g.get(t, 1) * -5.0;
            assert_abs_diff_eq!(f[0], want, epsilon = 1e-12);
            assert!((-5.0..=10.0).contains(&f[0]));
        }
    }

    #[test]
    fn single_state_rate_is_mean_logprob() {
        let m = DbnModel::ergodic(vec![state(0.5, 1.0)]).unwrap();
        let speech: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64 * 0.3]).collect();
        let motion: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64, 1.0]).collect();
        let seq = ObservedSeq { speech: &speech, motion: &motion };
        let mean: f64 = (0..6)
            .map(|t| m.obs_logprob(&speech[t], Some(&motion[t]), 0).unwrap())
            .sum::<f64>()
            / 6.0;
        assert_abs_diff_eq!(m.loglik_rate(&[seq], Observation::Full).unwrap(), mean, epsilon = 1e-12);
        let twice = m.loglik_rate(&[seq, seq], Observation::Full).unwrap();
        assert_abs_diff_eq!(twice, mean, epsilon = 1e-12);
    }

    #[test]
    fn single_state_em_recovers_mean() {
        let m = DbnModel::ergodic(vec![state(5.0, -3.0)]).unwrap();
        let speech: Vec<Vec<f64>> = (0..40).map(|t| vec![(t as f64 * 0.37).sin()]).collect();
        let motion: Vec<Vec<f64>> = (0..40).map(|t| vec![t as f64 * 0.1, (t as f64).cos()]).collect();
        let opts = EmOptions { max_iter: 1, ..Default::default() };
        let (fit, _) = em_train(&m, &[ObservedSeq { speech: &speech, motion: &motion }], &opts).unwrap();
        let ms = speech.iter().map(|r| r[0]).sum::<f64>() / 40.0;
        let mm = motion.iter().map(|r| r[0]).sum::<f64>() / 40.0;
        assert_abs_diff_eq!(fit.states()[0].speech.mean()[0], ms, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.states()[0].motion.mean()[0], mm, epsilon = 1e-12);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(DbnModel::ergodic(vec![]).is_err());
        assert!(DbnModel::new(vec![state(0.0, 0.0)], TransitionMatrix::uniform(2), vec![1.0]).is_err());
        assert!(DbnModel::new(vec![state(0.0, 0.0)], TransitionMatrix::uniform(1), vec![0.5]).is_err());
        assert!(two_state().permuted(&[0, 0]).is_err());
    }

    #[test]
    fn wrong_speech_width_is_an_error() {
        let m = two_state();
        assert!(m.posterior_gamma(&[vec![0.0, 1.0]], GammaMode::Smoothed).is_err());
        assert!(m.posterior_gamma(&[], GammaMode::Smoothed).is_err());
    }
}
