//! Objective metrics for synthesized motion, the gesture-accuracy harness and
//! the state-count sweep.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cdbn::{self, CdbnModel, CdbnTrainOptions, ConstraintSet, LabeledSeq};
use crate::dbn::{self, DbnModel, ObservedSeq};
use crate::error::{invalid, Error, Result};
use crate::features::Region;
use crate::inference::{EmOptions, GammaMode};
use crate::smooth::{self, KeypointPlan};
use crate::statmath::{cca, kl_gaussian, GaussianParams};
use crate::vq::LbgOptions;

/// First canonical correlation between original and synthesized motion.
pub fn cca_m(original: &[Vec<f64>], synthesized: &[Vec<f64>]) -> Result<f64> {
    first_cca(original, synthesized)
}

/// First canonical correlation between synthesized motion and speech.
pub fn cca_ms(synthesized: &[Vec<f64>], speech: &[Vec<f64>]) -> Result<f64> {
    first_cca(synthesized, speech)
}

fn first_cca(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    Ok(cca(x, y)?[0])
}

/// Full canonical correlation spectrum, descending.
pub fn cca_spectrum(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Vec<f64>> {
    cca(x, y)
}

/// KL(original || synthesized) between single full-covariance Gaussian fits.
pub fn kld_metric(original: &[Vec<f64>], synthesized: &[Vec<f64>]) -> Result<f64> {
    let d = original.first().map_or(0, Vec::len);
    if d == 0 || synthesized.first().map_or(0, Vec::len) != d {
        return Err(invalid("frame sets must be non-empty and of equal width"));
    }
    if original.len() <= d + 1 || synthesized.len() <= d + 1 {
        return Err(invalid(format!("each frame set needs more than {} frames", d + 1)));
    }
    kl_gaussian(&GaussianParams::fit(original)?, &GaussianParams::fit(synthesized)?)
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, count: values.len() })
    }
}

/// Anything that turns speech plus a constraint track into motion.
pub trait MotionSynthesizer {
    fn synthesize_turn(&self, speech: &[Vec<f64>], track: &[usize], mode: GammaMode) -> Result<Vec<Vec<f64>>>;

    /// Log evidence of speech and motion together.
    fn joint_log_evidence(&self, speech: &[Vec<f64>], motion: &[Vec<f64>], track: &[usize]) -> Result<f64>;
}

impl MotionSynthesizer for DbnModel {
    fn synthesize_turn(&self, speech: &[Vec<f64>], _track: &[usize], mode: GammaMode) -> Result<Vec<Vec<f64>>> {
        self.synthesize(speech, mode)
    }

    fn joint_log_evidence(&self, speech: &[Vec<f64>], motion: &[Vec<f64>], _track: &[usize]) -> Result<f64> {
        self.log_evidence(speech, Some(motion))
    }
}

impl MotionSynthesizer for CdbnModel {
    fn synthesize_turn(&self, speech: &[Vec<f64>], track: &[usize], mode: GammaMode) -> Result<Vec<Vec<f64>>> {
        self.constrained_synthesize(speech, track, mode)
    }

    fn joint_log_evidence(&self, speech: &[Vec<f64>], motion: &[Vec<f64>], track: &[usize]) -> Result<f64> {
        self.log_evidence(speech, Some(motion), track)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnMetrics {
    pub turn: String,
    pub cca_m: Option<f64>,
    pub cca_ms: Option<f64>,
    pub llr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub turns: Vec<TurnMetrics>,
    pub cca_m: Option<Summary>,
    pub cca_ms: Option<Summary>,
    pub kld: f64,
    pub llr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gesture_accuracy: Option<BTreeMap<String, f64>>,
}

/// A test turn: speech, reference motion and constraint indices.
#[derive(Debug, Clone, Copy)]
pub struct EvalTurn<'a> {
    pub id: &'a str,
    pub speech: &'a [Vec<f64>],
    pub motion: &'a [Vec<f64>],
    pub track: &'a [usize],
}

/// Synthesizes every turn and gathers the metrics. Turns whose CCA is
/// undefined (for example a constant trajectory) are skipped for that metric.
pub fn evaluate<M: MotionSynthesizer + Sync>(model: &M, turns: &[EvalTurn<'_>], mode: GammaMode) -> Result<EvalReport> {
    if turns.is_empty() {
        return Err(invalid("no turns to evaluate"));
    }
    let run = |t: &EvalTurn<'_>| -> Result<(TurnMetrics, Vec<Vec<f64>>)> {
        let synth = model.synthesize_turn(t.speech, t.track, mode)?;
        let cm = cca_m(t.motion, &synth)
            .map_err(|e| log::warn!("turn `{}`: CCA_m skipped ({e})", t.id))
            .ok();
        let cms = cca_ms(&synth, t.speech)
            .map_err(|e| log::warn!("turn `{}`: CCA_ms skipped ({e})", t.id))
            .ok();
        let llr = model.joint_log_evidence(t.speech, t.motion, t.track)? / t.speech.len() as f64;
        Ok((TurnMetrics { turn: t.id.to_string(), cca_m: cm, cca_ms: cms, llr }, synth))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<Result<(TurnMetrics, Vec<Vec<f64>>)>> = {
        use rayon::prelude::*;
        turns.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<(TurnMetrics, Vec<Vec<f64>>)>> = turns.iter().map(run).collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let frames: usize = turns.iter().map(|t| t.speech.len()).sum();
    let llr = results
        .iter()
        .zip(turns)
        .map(|((m, _), t)| m.llr * t.speech.len() as f64)
        .sum::<f64>()
        / frames as f64;
    let original: Vec<Vec<f64>> = turns.iter().flat_map(|t| t.motion.iter().cloned()).collect();
    let synthesized: Vec<Vec<f64>> = results.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let kld = kld_metric(&original, &synthesized)?;
    let metrics: Vec<TurnMetrics> = results.into_iter().map(|(m, _)| m).collect();
    let cm: Vec<f64> = metrics.iter().filter_map(|m| m.cca_m).collect();
    let cms: Vec<f64> = metrics.iter().filter_map(|m| m.cca_ms).collect();
    Ok(EvalReport {
        turns: metrics,
        cca_m: Summary::of(&cm),
        cca_ms: Summary::of(&cms),
        kld,
        llr,
        gesture_accuracy: None,
    })
}

/// Classifies a motion trajectory as one of a set of gestures.
pub trait Detector: Send + Sync {
    fn gestures(&self) -> Vec<String>;

    /// The recognized gesture, if any.
    fn detect(&self, traj: &[Vec<f64>]) -> Option<String>;
}

fn centered_power(traj: &[Vec<f64>], axis: usize) -> f64 {
    let n = traj.len() as f64;
    let mean = traj.iter().map(|f| f[axis]).sum::<f64>() / n;
    traj.iter().map(|f| (f[axis] - mean).powi(2)).sum::<f64>() / n
}

/// Dominant-axis rule: a gesture is recognized when its axis carries more
/// than `share` of the oscillation power summed over all axes.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationAxisDetector {
    pub axes: Vec<(String, usize)>,
    pub share: f64,
}

impl OscillationAxisDetector {
    /// Nod on pitch (axis 0) and shake on yaw (axis 1) of a head trajectory.
    pub fn head() -> Self {
        Self { axes: vec![("nod".into(), 0), ("shake".into(), 1)], share: 0.6 }
    }
}

impl Detector for OscillationAxisDetector {
    fn gestures(&self) -> Vec<String> {
        self.axes.iter().map(|(g, _)| g.clone()).collect()
    }

    fn detect(&self, traj: &[Vec<f64>]) -> Option<String> {
        if traj.len() < 2 {
            return None;
        }
        let d = traj[0].len();
        let power: Vec<f64> = (0..d).map(|k| centered_power(traj, k)).collect();
        let total: f64 = power.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        self.axes
            .iter()
            .find(|(_, a)| power[*a] / total > self.share)
            .map(|(g, _)| g.clone())
    }
}

/// A sinusoidal template on one motion axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisTemplate {
    pub label: String,
    pub axis: usize,
    pub freq_hz: f64,
}

/// Phase-free template correlation: the share of the trajectory's power
/// explained by each template's sinusoid on its axis. The best template wins
/// when its share exceeds `min_share`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDetector {
    pub templates: Vec<AxisTemplate>,
    pub frame_rate: f64,
    pub min_share: f64,
}

impl TemplateDetector {
    pub fn share(&self, traj: &[Vec<f64>], t: &AxisTemplate) -> f64 {
        let n = traj.len() as f64;
        let total: f64 = (0..traj[0].len()).map(|k| centered_power(traj, k)).sum();
        if !(total > 0.0) {
            return 0.0;
        }
        let mean = traj.iter().map(|f| f[t.axis]).sum::<f64>() / n;
        let w = 2.0 * std::f64::consts::PI * t.freq_hz / self.frame_rate;
        let (mut s, mut c) = (0.0, 0.0);
        for (i, f) in traj.iter().enumerate() {
            let v = f[t.axis] - mean;
            s += v * (w * i as f64).sin();
            c += v * (w * i as f64).cos();
        }
        // amplitude^2 / 2 of the best-fitting sinusoid at that frequency
        let explained = 2.0 * (s * s + c * c) / (n * n);
        (explained / total).min(1.0)
    }
}

impl Detector for TemplateDetector {
    fn gestures(&self) -> Vec<String> {
        self.templates.iter().map(|t| t.label.clone()).collect()
    }

    fn detect(&self, traj: &[Vec<f64>]) -> Option<String> {
        if traj.len() < 2 {
            return None;
        }
        self.templates
            .iter()
            .map(|t| (t, self.share(traj, t)))
            .filter(|(_, s)| *s > self.min_share)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t.label.clone())
    }
}

/// Fraction of turns whose synthesis under a constant `target` track is
/// recognized as `target`. With a plan, the trajectory is smoothed first.
pub fn gesture_accuracy(
    model: &CdbnModel,
    speech_turns: &[&[Vec<f64>]],
    target: &str,
    detector: &dyn Detector,
    smoothing: Option<(Region, &KeypointPlan)>,
) -> Result<f64> {
    if !detector.gestures().iter().any(|g| g == target) {
        return Err(invalid(format!("no detector registered for gesture `{target}`")));
    }
    let k = model.constraints().index_of(target)?;
    if speech_turns.is_empty() {
        return Err(invalid("no turns to synthesize"));
    }
    let mut hits = 0;
    for speech in speech_turns {
        let track = vec![k; speech.len()];
        let mut traj = model.constrained_synthesize(speech, &track, GammaMode::Smoothed)?;
        if let Some((region, plan)) = smoothing {
            traj = smooth::smooth_region(&traj, region, plan)?;
        }
        if detector.detect(&traj).as_deref() == Some(target) {
            hits += 1;
        }
    }
    Ok(hits as f64 / speech_turns.len() as f64)
}

/// Distribution of behavior labels within the frames of each constraint.
pub fn behavior_histogram<A: AsRef<str>, B: AsRef<str>>(
    constraints: &[A],
    behaviors: &[B],
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    if constraints.len() != behaviors.len() {
        return Err(invalid("label tracks differ in length"));
    }
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (c, b) in constraints.iter().zip(behaviors) {
        *counts
            .entry(c.as_ref().to_string())
            .or_default()
            .entry(b.as_ref().to_string())
            .or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(c, row)| {
            let total: usize = row.values().sum();
            (c, row.into_iter().map(|(b, n)| (b, n as f64 / total as f64)).collect())
        })
        .collect())
}

/// One row of the state-count sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_states: usize,
    pub train_llr: f64,
    pub valid_llr: f64,
    pub valid_cca_m: Option<f64>,
}

/// Which model family the sweep trains.
#[derive(Debug, Clone)]
pub enum SweepModel {
    Baseline,
    Constrained { constraints: ConstraintSet, merge_threshold: f64 },
}

/// Trains one model per state count and scores it on the validation turns.
/// Rows come back sorted by state count.
pub fn state_count_sweep(
    train: &[LabeledSeq<'_>],
    valid: &[LabeledSeq<'_>],
    candidates: &[usize],
    family: &SweepModel,
    lbg: &LbgOptions,
    em: &EmOptions,
) -> Result<Vec<SweepRow>> {
    if candidates.is_empty() || candidates.contains(&0) {
        return Err(invalid("state counts must be positive"));
    }
    if train.is_empty() || valid.is_empty() {
        return Err(invalid("the sweep needs training and validation turns"));
    }
    let mut ns = candidates.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let eval_turns: Vec<EvalTurn<'_>> = valid
        .iter()
        .map(|s| EvalTurn { id: "", speech: s.speech, motion: s.motion, track: s.labels })
        .collect();
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let row = match family {
            SweepModel::Baseline => {
                let obs: Vec<ObservedSeq<'_>> = train.iter().map(LabeledSeq::observed).collect();
                let (m, hist) = dbn::train_baseline(&obs, n, lbg, em)?;
                sweep_row(n, &m, *hist.last().unwrap(), &eval_turns)?
            }
            SweepModel::Constrained { constraints, merge_threshold } => {
                let opts = CdbnTrainOptions {
                    lbg: *lbg,
                    per_constraint_em: *em,
                    em: *em,
                    merge_threshold: *merge_threshold,
                };
                let (m, hist) = cdbn::train_cdbn(train, constraints, n, &opts)?;
                sweep_row(n, &m, *hist.last().unwrap(), &eval_turns)?
            }
        };
        log::info!("N = {n}: train LLR {:.4}, validation LLR {:.4}", row.train_llr, row.valid_llr);
        rows.push(row);
    }
    Ok(rows)
}

fn sweep_row<M: MotionSynthesizer + Sync>(n: usize, m: &M, train_llr: f64, valid: &[EvalTurn<'_>]) -> Result<SweepRow> {
    let report = evaluate(m, valid, GammaMode::Smoothed)?;
    Ok(SweepRow { n_states: n, train_llr, valid_llr: report.llr, valid_cca_m: report.cca_m.map(|s| s.mean) })
}

/// Tab-separated plot data: `n_states  train_llr  valid_llr  valid_cca_m`.
pub fn write_sweep_tsv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "n_states\ttrain_llr\tvalid_llr\tvalid_cca_m")?;
    for r in rows {
        let cca = r.valid_cca_m.map_or_else(|| "nan".to_string(), |v| v.to_string());
        writeln!(out, "{}\t{}\t{}\t{}", r.n_states, r.train_llr, r.valid_llr, cca)?;
    }
    Ok(())
}

/// Mean of the per-constraint accuracies, for reporting.
pub fn mean_accuracy(acc: &BTreeMap<String, f64>) -> Result<f64> {
    if acc.is_empty() {
        return Err(Error::Data("no accuracies to average".into()));
    }
    Ok(acc.values().sum::<f64>() / acc.len() as f64)
}
