//! Seeded synthetic corpus with planted gestures.
//!
//! Each turn is a sequence of constraint blocks. Under constraint `k` the
//! motion is `k`'s template sinusoid on its axis, its amplitude scaled by the
//! energy contour, plus Gaussian noise. The pitch contour oscillates in phase
//! with the active template, so the speech features carry the gesture phase
//! but not its axis.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, TurnRecord};
use crate::cdbn::{ConstraintSet, OTHER};
use crate::error::{invalid, Result};
use crate::features::{self, ProsodyContour, Region, CONTOUR_FRAME_RATE, MODEL_FRAME_RATE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureTemplate {
    pub label: String,
    /// Motion dimension the sinusoid drives.
    pub axis: usize,
    pub freq_hz: f64,
    /// Peak amplitude in degrees.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub region: Region,
    /// One template per constraint, `other` included.
    pub templates: Vec<GestureTemplate>,
    /// How strongly the energy contour modulates the amplitude.
    pub coupling_gain: f64,
    /// Motion noise standard deviation in degrees.
    pub noise_std: f64,
    pub turns: usize,
    pub subjects: usize,
    /// Turn length range in seconds.
    pub turn_seconds: (f64, f64),
    /// Constraint block length range in seconds.
    pub block_seconds: (f64, f64),
    pub seed: u64,
}

impl SyntheticSpec {
    /// Nod (pitch) and shake (yaw) at the same rate, a slow roll for `other`.
    pub fn head_gestures(turns: usize, seed: u64) -> Self {
        Self {
            region: Region::Head,
            templates: vec![
                template("nod", 0, 2.0, 10.0),
                template("shake", 1, 2.0, 10.0),
                template(OTHER, 2, 0.4, 3.0),
            ],
            coupling_gain: 0.5,
            noise_std: 0.5,
            turns,
            subjects: 4,
            turn_seconds: (2.0, 10.0),
            block_seconds: (0.5, 1.5),
            seed,
        }
    }

    pub fn hand_gestures(turns: usize, seed: u64) -> Self {
        Self {
            region: Region::Hand,
            templates: vec![
                template("so-what", 0, 1.5, 15.0),
                template("to-fro", 3, 2.5, 12.0),
                template("regress", 6, 1.0, 12.0),
                template(OTHER, 8, 0.4, 4.0),
            ],
            ..Self::head_gestures(turns, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(invalid("at least one template is required"));
        }
        if !self.templates.iter().any(|t| t.label == OTHER) {
            return Err(invalid("a template for `other` is required"));
        }
        for t in &self.templates {
            if !(t.freq_hz > 0.0 && t.freq_hz <= 10.0) {
                return Err(invalid(format!("template `{}`: frequency must lie in (0, 10] Hz", t.label)));
            }
            if !(t.amplitude > 0.0 && t.amplitude.is_finite()) {
                return Err(invalid(format!("template `{}`: amplitude must be positive", t.label)));
            }
            if t.axis >= self.region.motion_dim() {
                return Err(invalid(format!("template `{}`: axis {} outside the {} region", t.label, t.axis, self.region)));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) || !self.coupling_gain.is_finite() {
            return Err(invalid("noise and coupling gain must be finite, noise non-negative"));
        }
        let (a, b) = self.turn_seconds;
        if !(a >= 0.1 && b >= a) {
            return Err(invalid("turn length range must satisfy 0.1 <= min <= max"));
        }
        let (a, b) = self.block_seconds;
        if !(a > 0.0 && b >= a) {
            return Err(invalid("block length range must satisfy 0 < min <= max"));
        }
        if self.turns == 0 || self.subjects == 0 {
            return Err(invalid("turns and subjects must be positive"));
        }
        Ok(())
    }

    pub fn constraint_set(&self) -> Result<ConstraintSet> {
        let mut labels: Vec<&str> = self.templates.iter().map(|t| t.label.as_str()).filter(|l| *l != OTHER).collect();
        labels.push(OTHER);
        ConstraintSet::new(labels)
    }
}

fn template(label: &str, axis: usize, freq_hz: f64, amplitude: f64) -> GestureTemplate {
    GestureTemplate { label: label.into(), axis, freq_hz, amplitude }
}

/// Latent variables of one generated turn.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    /// Phase of every template sinusoid, in radians.
    pub phase: f64,
    /// Unscaled energy contour at the model frame rate.
    pub energy: Vec<f64>,
}

struct EnergyShape {
    f: f64,
    p1: f64,
    p2: f64,
}

impl EnergyShape {
    fn at(&self, tau: f64) -> f64 {
        1.0 + 0.3 * (TAU * self.f * tau + self.p1).sin() + 0.15 * (TAU * 1.7 * self.f * tau + self.p2).sin()
    }
}

/// Generates a dataset; a pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<SyntheticTruth>)> {
    spec.validate()?;
    let constraints = spec.constraint_set()?;
    let by_label: Vec<&GestureTemplate> = constraints
        .labels()
        .iter()
        .map(|l| spec.templates.iter().find(|t| &t.label == l).expect("every label has a template"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let subjects: Vec<(String, f64, f64)> = (0..spec.subjects)
        .map(|s| (format!("s{s}"), rng.random_range(90.0..220.0), rng.random_range(0.5..2.0)))
        .collect();
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let dm = spec.region.motion_dim();
    let k = constraints.len();

    let mut raw_turns = Vec::with_capacity(spec.turns);
    let mut truths = Vec::with_capacity(spec.turns);
    for n in 0..spec.turns {
        let (subject, f0_base, e_scale) = &subjects[n % spec.subjects];
        let lo = (spec.turn_seconds.0 * CONTOUR_FRAME_RATE).round() as usize;
        let hi = (spec.turn_seconds.1 * CONTOUR_FRAME_RATE).round() as usize;
        let n60 = rng.random_range(lo.max(3)..=hi.max(3));
        let frames = 2 * n60;

        let mut track = Vec::with_capacity(frames);
        while track.len() < frames {
            let len = (rng.random_range(spec.block_seconds.0..=spec.block_seconds.1) * MODEL_FRAME_RATE).round() as usize;
            let c = rng.random_range(0..k);
            track.extend(std::iter::repeat_n(c, len.max(1)));
        }
        track.truncate(frames);

        let phase = rng.random_range(0.0..TAU);
        let shape = EnergyShape { f: rng.random_range(0.3..0.8), p1: rng.random_range(0.0..TAU), p2: rng.random_range(0.0..TAU) };

        let mut f0 = Vec::with_capacity(n60);
        let mut energy = Vec::with_capacity(n60);
        for i in 0..n60 {
            let tau = i as f64 / CONTOUR_FRAME_RATE;
            let tpl = by_label[track[(2 * i).min(frames - 1)]];
            let jitter: f64 = rng.sample(rand_distr::StandardNormal);
            f0.push(Some(f0_base * (1.0 + 0.08 * (TAU * tpl.freq_hz * tau + phase).sin()) + 0.5 * jitter));
            energy.push(e_scale * shape.at(tau));
        }
        let gaps = rng.random_range(0..=2);
        for _ in 0..gaps {
            if n60 < 20 {
                break;
            }
            let len = rng.random_range(3..=8);
            let start = rng.random_range(1..n60 - len - 1);
            f0[start..start + len].iter_mut().for_each(|v| *v = None);
        }
        let speech = features::speech_frames(&ProsodyContour::new(f0, energy, CONTOUR_FRAME_RATE)?)?;
        debug_assert_eq!(speech.len(), frames);

        let e120: Vec<f64> = (0..frames).map(|t| shape.at(t as f64 / MODEL_FRAME_RATE)).collect();
        let motion: Vec<Vec<f64>> = (0..frames)
            .map(|t| {
                let tau = t as f64 / MODEL_FRAME_RATE;
                let tpl = by_label[track[t]];
                let mut f = vec![0.0; dm];
                f[tpl.axis] = tpl.amplitude * (1.0 + spec.coupling_gain * (e120[t] - 1.0)) * (TAU * tpl.freq_hz * tau + phase).sin();
                if spec.noise_std > 0.0 {
                    for v in &mut f {
                        *v += noise.sample(&mut rng);
                    }
                }
                f
            })
            .collect();
        raw_turns.push(TurnRecord {
            id: format!("turn{n:04}"),
            subject: subject.clone(),
            speech,
            motion,
            labels: track.iter().map(|&c| constraints.label(c).to_string()).collect(),
        });
        truths.push(SyntheticTruth { phase, energy: e120 });
    }

    let all: Vec<Vec<f64>> = raw_turns.iter().flat_map(|t| t.speech.iter().cloned()).collect();
    let ids: Vec<&str> = raw_turns.iter().flat_map(|t| std::iter::repeat_n(t.subject.as_str(), t.len())).collect();
    let (normed, stats) = features::znorm_per_subject(&all, &ids)?;
    let mut it = normed.into_iter();
    for t in &mut raw_turns {
        t.speech = it.by_ref().take(t.len()).collect();
    }
    let mut subject_names: Vec<String> = subjects.into_iter().map(|s| s.0).collect();
    subject_names.truncate(spec.turns.min(spec.subjects));
    let dataset = Dataset {
        region: spec.region,
        constraints,
        subjects: subject_names,
        normalization: stats,
        turns: raw_turns,
    };
    dataset.validate()?;
    Ok((dataset, truths))
}
