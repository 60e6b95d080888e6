//! On-disk formats.
//!
//! Structured files start with one header line
//! `GDBN-<KIND> v<version> sha256=<hex>` followed by a JSON body; the hash
//! covers the body bytes. A dataset is a directory holding `manifest.json`
//! and `turns/<id>.csv`, one row per frame:
//! `timestamp,f0,energy,d_f0,d_energy,dd_f0,dd_energy,m0..m{d-1},label`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, DatasetManifest, TurnEntry, TurnRecord};
use crate::cdbn::CdbnModel;
use crate::dbn::DbnModel;
use crate::error::{Error, Result};
use crate::features::{Region, MODEL_FRAME_RATE, SPEECH_DIM};

/// Newest format this build reads and the one it writes.
pub const FORMAT_VERSION: u32 = 1;

const SPEECH_COLUMNS: [&str; SPEECH_DIM] = ["f0", "energy", "d_f0", "d_energy", "dd_f0", "dd_energy"];

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode_document<T: Serialize>(kind: &str, value: &T) -> Result<String> {
    let body = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    Ok(format!("GDBN-{kind} v{FORMAT_VERSION} sha256={}\n{body}\n", sha256_hex(body.as_bytes())))
}

fn decode_document<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let (header, rest) = text
        .split_once('\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let mut parts = header.split(' ');
    let tag = parts.next().unwrap_or_default();
    if tag != format!("GDBN-{kind}") {
        return Err(Error::Format(format!("expected a GDBN-{kind} file, found `{tag}`")));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("malformed version in header".into()))?;
    if version > FORMAT_VERSION || version == 0 {
        return Err(Error::UnsupportedVersion { found: version, supported: FORMAT_VERSION });
    }
    let expected = parts
        .next()
        .and_then(|v| v.strip_prefix("sha256="))
        .ok_or_else(|| Error::Format("missing checksum in header".into()))?;
    let body = rest.strip_suffix('\n').unwrap_or(rest);
    let actual = sha256_hex(body.as_bytes());
    if actual != expected {
        return Err(Error::Checksum(format!("body hashes to {actual}, header says {expected}")));
    }
    serde_json::from_str(body).map_err(|e| Error::Format(e.to_string()))
}

/// A persisted model together with the region it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Baseline { region: Region, model: DbnModel },
    Constrained { region: Region, model: CdbnModel },
}

impl ModelFile {
    pub fn region(&self) -> Region {
        match self {
            Self::Baseline { region, .. } | Self::Constrained { region, .. } => *region,
        }
    }

    /// The model as a constrained model; a baseline becomes the equivalent
    /// single-constraint model.
    pub fn to_constrained(&self) -> Result<CdbnModel> {
        match self {
            Self::Baseline { model, .. } => CdbnModel::from_baseline(model),
            Self::Constrained { model, .. } => Ok(model.clone()),
        }
    }
}

pub fn write_model(model: &ModelFile) -> Result<String> {
    encode_document("MODEL", model)
}

pub fn read_model(text: &str) -> Result<ModelFile> {
    decode_document("MODEL", text)
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_atomic(path, write_model(model)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    read_model(&fs::read_to_string(path)?)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn turn_csv(turn: &TurnRecord, motion_dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["timestamp".to_string()];
    header.extend(SPEECH_COLUMNS.iter().map(|s| s.to_string()));
    header.extend((0..motion_dim).map(|k| format!("m{k}")));
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..turn.len() {
        let mut row = vec![(t as f64 / MODEL_FRAME_RATE).to_string()];
        row.extend(turn.speech[t].iter().map(f64::to_string));
        row.extend(turn.motion[t].iter().map(f64::to_string));
        row.push(turn.labels[t].clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn parse_turn(bytes: &[u8], entry: &TurnEntry, motion_dim: usize) -> Result<TurnRecord> {
    let width = 1 + SPEECH_DIM + motion_dim + 1;
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(csv_err)?;
    if header.len() != width {
        return Err(Error::Format(format!("turn `{}` has {} columns, expected {width}", entry.id, header.len())));
    }
    let mut turn = TurnRecord {
        id: entry.id.clone(),
        subject: entry.subject.clone(),
        speech: Vec::new(),
        motion: Vec::new(),
        labels: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != width {
            return Err(Error::Format(format!("turn `{}` row {line} has {} fields", entry.id, rec.len())));
        }
        let nums = (1..width - 1)
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("turn `{}` row {line}: bad number `{}`", entry.id, &rec[i])))
            })
            .collect::<Result<Vec<f64>>>()?;
        turn.speech.push(nums[..SPEECH_DIM].to_vec());
        turn.motion.push(nums[SPEECH_DIM..].to_vec());
        turn.labels.push(rec[width - 1].to_string());
    }
    if turn.len() != entry.frames {
        return Err(Error::Format(format!("turn `{}` has {} frames, manifest says {}", entry.id, turn.len(), entry.frames)));
    }
    Ok(turn)
}

/// Writes `dataset` into the directory `dir`, which must not exist or be
/// empty. Files are staged in a sibling directory and moved into place.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    dataset.validate()?;
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(Error::InvalidInput(format!("{} already exists and is not empty", dir.display())));
    }
    let name = dir.file_name().map_or_else(|| "dataset".into(), |n| n.to_string_lossy().into_owned());
    let stage = dir.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| -> Result<()> {
        if stage.exists() {
            fs::remove_dir_all(&stage)?;
        }
        fs::create_dir_all(stage.join("turns"))?;
        let dm = dataset.region.motion_dim();
        let mut entries = Vec::with_capacity(dataset.turns.len());
        for t in &dataset.turns {
            let bytes = turn_csv(t, dm)?;
            fs::write(stage.join("turns").join(format!("{}.csv", t.id)), &bytes)?;
            entries.push(TurnEntry { id: t.id.clone(), subject: t.subject.clone(), frames: t.len(), sha256: sha256_hex(&bytes) });
        }
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            region: dataset.region,
            constraints: dataset.constraints.clone(),
            subjects: dataset.subjects.clone(),
            turns: entries,
            normalization: dataset.normalization.clone(),
        };
        fs::write(stage.join("manifest.json"), encode_document("DATASET", &manifest)?)?;
        if dir.exists() {
            fs::remove_dir(dir)?;
        }
        fs::rename(&stage, dir)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = decode_document("DATASET", &fs::read_to_string(dir.join("manifest.json"))?)?;
    if m.format_version > FORMAT_VERSION {
        return Err(Error::UnsupportedVersion { found: m.format_version, supported: FORMAT_VERSION });
    }
    Ok(m)
}

/// Reads and verifies a dataset written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let m = load_manifest(dir)?;
    let dm = m.region.motion_dim();
    let mut turns = Vec::with_capacity(m.turns.len());
    for entry in &m.turns {
        let bytes = fs::read(dir.join("turns").join(format!("{}.csv", entry.id)))?;
        let actual = sha256_hex(&bytes);
        if actual != entry.sha256 {
            return Err(Error::Checksum(format!("turn `{}` hashes to {actual}, manifest says {}", entry.id, entry.sha256)));
        }
        turns.push(parse_turn(&bytes, entry, dm)?);
    }
    let d = Dataset {
        region: m.region,
        constraints: m.constraints,
        subjects: m.subjects,
        normalization: m.normalization,
        turns,
    };
    d.validate().map_err(|e| Error::Data(e.to_string()))?;
    Ok(d)
}
