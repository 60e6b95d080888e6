//! Datasets of aligned speech, motion and constraint tracks, their
//! persistence, cross-validation splits and a synthetic generator.

mod io;
mod splits;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::cdbn::{ConstraintSet, LabeledSeq};
use crate::dbn::ObservedSeq;
use crate::error::{invalid, Result};
use crate::features::{Region, SubjectStats, SPEECH_DIM};

pub use io::{load_dataset, load_model, read_model, save_dataset, save_model, write_model, ModelFile, FORMAT_VERSION};
pub use splits::{tenfold_splits, Round, TenfoldSplits, FOLDS};
pub use synthetic::{generate_synthetic, GestureTemplate, SyntheticSpec, SyntheticTruth};

/// One turn: aligned speech features, motion and per-frame constraint label.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnRecord {
    pub id: String,
    pub subject: String,
    pub speech: Vec<Vec<f64>>,
    pub motion: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl TurnRecord {
    pub fn len(&self) -> usize {
        self.speech.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speech.is_empty()
    }

    pub fn observed(&self) -> ObservedSeq<'_> {
        ObservedSeq { speech: &self.speech, motion: &self.motion }
    }
}

/// Dataset-level metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub region: Region,
    pub constraints: ConstraintSet,
    pub subjects: Vec<String>,
    pub turns: Vec<TurnEntry>,
    /// Speech normalization statistics per subject.
    pub normalization: Vec<SubjectStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnEntry {
    pub id: String,
    pub subject: String,
    pub frames: usize,
    /// Hex SHA-256 of the turn file.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub region: Region,
    pub constraints: ConstraintSet,
    pub subjects: Vec<String>,
    pub normalization: Vec<SubjectStats>,
    pub turns: Vec<TurnRecord>,
}

impl Dataset {
    /// Checks every turn against the dataset's region and constraint set.
    pub fn validate(&self) -> Result<()> {
        let dm = self.region.motion_dim();
        let mut ids = std::collections::BTreeSet::new();
        for t in &self.turns {
            if !ids.insert(t.id.as_str()) {
                return Err(invalid(format!("duplicate turn id `{}`", t.id)));
            }
            if t.id.is_empty() || !t.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(invalid(format!("turn id `{}` must be alphanumeric, `-` or `_`", t.id)));
            }
            if !self.subjects.contains(&t.subject) {
                return Err(invalid(format!("turn `{}` has unlisted subject `{}`", t.id, t.subject)));
            }
            if t.is_empty() || t.motion.len() != t.len() || t.labels.len() != t.len() {
                return Err(invalid(format!("turn `{}` has streams of different lengths", t.id)));
            }
            if t.speech.iter().any(|f| f.len() != SPEECH_DIM) || t.motion.iter().any(|f| f.len() != dm) {
                return Err(invalid(format!("turn `{}` has frames of the wrong width", t.id)));
            }
            if t.speech.iter().chain(&t.motion).flatten().any(|v| !v.is_finite()) {
                return Err(invalid(format!("turn `{}` contains non-finite values", t.id)));
            }
            for l in &t.labels {
                self.constraints
                    .index_of(l)
                    .map_err(|_| invalid(format!("turn `{}` uses label `{l}` outside the constraint set", t.id)))?;
            }
        }
        Ok(())
    }

    /// Constraint indices of every turn under `set`.
    pub fn encode_labels(&self, set: &ConstraintSet) -> Result<Vec<Vec<usize>>> {
        self.turns.iter().map(|t| set.encode(&t.labels)).collect()
    }

    /// Labelled views of the turns at `idx`; `tracks` comes from
    /// [`encode_labels`](Self::encode_labels).
    pub fn labeled<'a>(&'a self, tracks: &'a [Vec<usize>], idx: &[usize]) -> Vec<LabeledSeq<'a>> {
        idx.iter()
            .map(|&i| LabeledSeq { speech: &self.turns[i].speech, motion: &self.turns[i].motion, labels: &tracks[i] })
            .collect()
    }

    /// A copy where every frame is labelled `other`, for unconstrained training.
    pub fn without_constraints(&self) -> Dataset {
        let mut d = self.clone();
        d.constraints = ConstraintSet::other_only();
        for t in &mut d.turns {
            t.labels = vec![crate::cdbn::OTHER.to_string(); t.len()];
        }
        d
    }
}
