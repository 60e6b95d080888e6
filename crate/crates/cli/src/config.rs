//! Run configuration: one TOML file, every key overridable by a flag of the
//! same name.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gesture_dbn::features::Region;
use gesture_dbn::inference::{EmOptions, GammaMode};
use gesture_dbn::retrieval::RetrievalConfig;
use gesture_dbn::smooth::Interpolation;
use serde::{Deserialize, Serialize};

use crate::exit::{usage, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Unconstrained baseline.
    None,
    Discourse,
    #[default]
    Gesture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub region: Option<Region>,
    pub constraint_mode: ConstraintMode,
    pub states: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub gamma: GammaMode,
    /// Keypoints per second; the region default when absent.
    pub keypoint_rate: Option<f64>,
    pub interpolation: Interpolation,
    pub merge_threshold: f64,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub retrieval: RetrievalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let em = EmOptions::default();
        Self {
            dataset: None,
            model: None,
            region: None,
            constraint_mode: ConstraintMode::default(),
            states: 8,
            max_iter: em.max_iter,
            tol: em.tol,
            gamma: GammaMode::Smoothed,
            keypoint_rate: None,
            interpolation: Interpolation::Slerp,
            merge_threshold: gesture_dbn::cdbn::DEFAULT_MERGE_THRESHOLD,
            seed: 0,
            threads: 0,
            retrieval: RetrievalConfig::default(),
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_region)]
    pub region: Option<Region>,
    #[arg(long, global = true, value_enum)]
    pub constraint_mode: Option<ConstraintMode>,
    #[arg(long, global = true)]
    pub states: Option<usize>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_parser = parse_gamma)]
    pub gamma: Option<GammaMode>,
    #[arg(long, global = true)]
    pub keypoint_rate: Option<f64>,
    #[arg(long, global = true, value_parser = parse_interpolation)]
    pub interpolation: Option<Interpolation>,
    #[arg(long, global = true)]
    pub merge_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn parse_region(s: &str) -> Result<Region, String> {
    s.parse().map_err(|e: gesture_dbn::Error| e.to_string())
}

fn parse_gamma(s: &str) -> Result<GammaMode, String> {
    s.parse().map_err(|e: gesture_dbn::Error| e.to_string())
}

fn parse_interpolation(s: &str) -> Result<Interpolation, String> {
    s.parse().map_err(|e: gesture_dbn::Error| e.to_string())
}

impl RunConfig {
    pub fn load(o: &Overrides) -> Result<Self, Failure> {
        let mut cfg = match &o.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { cfg.$f = v; } )* };
        }
        take!(constraint_mode, states, max_iter, tol, gamma, interpolation, merge_threshold, seed, threads);
        if o.dataset.is_some() {
            cfg.dataset = o.dataset.clone();
        }
        if o.model.is_some() {
            cfg.model = o.model.clone();
        }
        if o.region.is_some() {
            cfg.region = o.region;
        }
        if o.keypoint_rate.is_some() {
            cfg.keypoint_rate = o.keypoint_rate;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.states == 0 {
            return Err(usage("states must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(usage("max_iter must be at least 1"));
        }
        if self.tol.is_nan() {
            return Err(usage("tol must be a number"));
        }
        if self.keypoint_rate.is_some_and(|r| !(r > 0.0)) {
            return Err(usage("keypoint_rate must be positive"));
        }
        if !(self.merge_threshold >= 0.0) {
            return Err(usage("merge_threshold must be non-negative"));
        }
        self.retrieval.validate().map_err(|e| usage(e.to_string()))
    }

    pub fn em(&self) -> EmOptions {
        EmOptions { max_iter: self.max_iter, tol: self.tol, freeze_gaussians: false }
    }

    pub fn dataset(&self) -> Result<&Path, Failure> {
        self.dataset.as_deref().ok_or_else(|| usage("no dataset given (--dataset or `dataset` in the config)"))
    }

    pub fn model(&self) -> Result<&Path, Failure> {
        self.model.as_deref().ok_or_else(|| usage("no model path given (--model or `model` in the config)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "states = 4\nseed = 9\ngamma = \"viterbi\"\n[retrieval]\nscales = [10, 20]\n").unwrap();
        let o = Overrides { config: Some(p), states: Some(6), ..Default::default() };
        let cfg = RunConfig::load(&o).unwrap();
        assert_eq!(cfg.states, 6);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.gamma, GammaMode::Viterbi);
        assert_eq!(cfg.retrieval.scales, vec![10, 20]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "stats = 4\n").unwrap();
        let err = RunConfig::load(&Overrides { config: Some(p), ..Default::default() }).unwrap_err();
        assert_eq!(err.code, 1);
    }
}
