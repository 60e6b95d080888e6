//! Browser demo: trains a small constrained head model on a generated corpus
//! and exposes synthesis, smoothing and DTAK scoring to the page.

use gesture_dbn::cdbn::{train_cdbn, CdbnModel, CdbnTrainOptions};
use gesture_dbn::corpus::{generate_synthetic, SyntheticSpec, TurnRecord};
use gesture_dbn::features::Region;
use gesture_dbn::inference::{EmOptions, GammaMode};
use gesture_dbn::retrieval::dtak;
use gesture_dbn::smooth::{smooth_region, KeypointPlan};
use gesture_dbn::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const TRAIN_TURNS: usize = 24;
const SPEECH_TURNS: usize = 8;
const STATES: usize = 3;

#[derive(Debug, Serialize)]
pub struct Synthesis {
    pub frames: usize,
    pub keypoints: Vec<usize>,
    pub raw: Vec<Vec<f64>>,
    pub smooth: Vec<Vec<f64>>,
}

#[wasm_bindgen]
pub struct Demo {
    model: CdbnModel,
    speech: Vec<TurnRecord>,
}

impl Demo {
    pub fn train(seed: u64) -> Result<Self> {
        let (ds, _) = generate_synthetic(&SyntheticSpec::head_gestures(TRAIN_TURNS, seed))?;
        let tracks = ds.encode_labels(&ds.constraints)?;
        let idx: Vec<usize> = (0..ds.turns.len()).collect();
        let em = EmOptions { max_iter: 10, ..EmOptions::default() };
        let opts = CdbnTrainOptions { per_constraint_em: em, em, ..CdbnTrainOptions::default() };
        let (model, _) = train_cdbn(&ds.labeled(&tracks, &idx), &ds.constraints, STATES, &opts)?;
        let (held_out, _) =
            generate_synthetic(&SyntheticSpec::head_gestures(SPEECH_TURNS, seed.wrapping_add(1)))?;
        Ok(Self { model, speech: held_out.turns })
    }

    /// Synthesizes held-out speech turn `turn` with every frame constrained
    /// to `label`.
    pub fn synthesize_turn(&self, turn: usize, label: &str, keypoint_rate: f64) -> Result<Synthesis> {
        let speech = &self.speech[turn % self.speech.len()].speech;
        let track = vec![label; speech.len()];
        let raw = self.model.synthesize_labels(speech, &track, GammaMode::Smoothed)?;
        let plan = KeypointPlan::new(keypoint_rate, KeypointPlan::for_region(Region::Head).frame_rate())?;
        let smooth = smooth_region(&raw, Region::Head, &plan)?;
        Ok(Synthesis { frames: raw.len(), keypoints: plan.keypoints(raw.len()), raw, smooth })
    }
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> std::result::Result<Demo, JsError> {
        Self::train(seed as u64).map_err(js)
    }

    /// Constraint labels as a JSON array.
    pub fn labels(&self) -> String {
        serde_json::to_string(self.model.constraints().labels()).unwrap_or_default()
    }

    #[wasm_bindgen(js_name = speechTurns)]
    pub fn speech_turns(&self) -> usize {
        self.speech.len()
    }

    pub fn synthesize(&self, turn: usize, label: &str, keypoint_rate: f64) -> std::result::Result<String, JsError> {
        let s = self.synthesize_turn(turn, label, keypoint_rate).map_err(js)?;
        serde_json::to_string(&s).map_err(js)
    }
}

/// Smooths a JSON head trajectory (rows of pitch, yaw, roll in degrees).
pub fn smooth_json(traj: &str, keypoint_rate: f64) -> std::result::Result<String, String> {
    let traj: Vec<Vec<f64>> = serde_json::from_str(traj).map_err(|e| e.to_string())?;
    let plan = KeypointPlan::new(keypoint_rate, KeypointPlan::for_region(Region::Head).frame_rate())
        .map_err(|e| e.to_string())?;
    let out = smooth_region(&traj, Region::Head, &plan).map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn dtak_json(a: &str, b: &str, sigma: f64) -> std::result::Result<f64, String> {
    let a: Vec<Vec<f64>> = serde_json::from_str(a).map_err(|e| e.to_string())?;
    let b: Vec<Vec<f64>> = serde_json::from_str(b).map_err(|e| e.to_string())?;
    dtak(&a, &b, sigma).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn smooth(traj: &str, keypoint_rate: f64) -> std::result::Result<String, JsError> {
    smooth_json(traj, keypoint_rate).map_err(js)
}

#[wasm_bindgen(js_name = dtakScore)]
pub fn dtak_score(a: &str, b: &str, sigma: f64) -> std::result::Result<f64, JsError> {
    dtak_json(a, b, sigma).map_err(js)
}
