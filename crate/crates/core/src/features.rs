//! Prosody and motion feature streams.
//!
//! The models run on 120 fps frames. Speech frames are six-dimensional
//! (f0, energy and their first and second derivatives); motion frames hold
//! Euler rotations in degrees, three for the head and ten for the hands.
//! Raw contours are expected at 60 fps, already extracted from 40 ms windows
//! with a 16.67 ms stride; no waveform processing happens here.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Frame rate of every stream the models consume.
pub const MODEL_FRAME_RATE: f64 = 120.0;
/// Frame rate of ingested prosody contours.
pub const CONTOUR_FRAME_RATE: f64 = 60.0;
/// Width of a speech frame.
pub const SPEECH_DIM: usize = 6;

/// Raw pitch and energy contour of one turn. `None` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyContour {
    pub f0: Vec<Option<f64>>,
    pub energy: Vec<f64>,
    pub frame_rate: f64,
}

impl ProsodyContour {
    pub fn new(f0: Vec<Option<f64>>, energy: Vec<f64>, frame_rate: f64) -> Result<Self> {
        if f0.len() != energy.len() {
            return Err(invalid(format!(
                "f0 has {} frames but energy has {}",
                f0.len(),
                energy.len()
            )));
        }
        if energy.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(invalid("energy values must be finite and non-negative"));
        }
        if !(frame_rate > 0.0) {
            return Err(invalid("frame rate must be positive"));
        }
        Ok(Self { f0, energy, frame_rate })
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }
}

/// Body region a motion stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// pitch, yaw, roll
    Head,
    /// left arm (3), right arm (3), left forearm (2), right forearm (2)
    Hand,
}

impl Region {
    pub fn motion_dim(self) -> usize {
        match self {
            Region::Head => 3,
            Region::Hand => 10,
        }
    }

    /// Rotation groups as (offset, degrees of freedom) pairs.
    pub fn rotation_groups(self) -> &'static [(usize, usize)] {
        match self {
            Region::Head => &[(0, 3)],
            Region::Hand => &[(0, 3), (3, 3), (6, 2), (8, 2)],
        }
    }

    /// Keypoints per second used when smoothing this region.
    pub fn keypoint_rate(self) -> f64 {
        match self {
            Region::Head => 15.0,
            Region::Hand => 12.0,
        }
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Region::Head),
            "hand" => Ok(Region::Hand),
            other => Err(invalid(format!("unknown region `{other}`"))),
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::Head => "head",
            Region::Hand => "hand",
        })
    }
}

/// Fills unvoiced f0 frames.
///
/// Interior gaps are linearly interpolated between the voiced neighbours,
/// leading and trailing gaps hold the nearest voiced value.
pub fn interpolate_unvoiced(contour: &ProsodyContour) -> Result<ProsodyContour> {
    let voiced: Vec<(usize, f64)> = contour
        .f0
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let (first, last) = match (voiced.first(), voiced.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::Data("contour has no voiced frames".into())),
    };

    let mut out = vec![0.0; contour.len()];
    for v in out.iter_mut().take(first.0) {
        *v = first.1;
    }
    for v in out.iter_mut().skip(last.0 + 1) {
        *v = last.1;
    }
    for pair in voiced.windows(2) {
        let (i0, v0) = pair[0];
        let (i1, v1) = pair[1];
        out[i0] = v0;
        let span = (i1 - i0) as f64;
        for (k, slot) in out[i0 + 1..i1].iter_mut().enumerate() {
            let w = (k + 1) as f64 / span;
            *slot = v0 + (v1 - v0) * w;
        }
    }
    out[last.0] = last.1;

    Ok(ProsodyContour {
        f0: out.into_iter().map(Some).collect(),
        energy: contour.energy.clone(),
        frame_rate: contour.frame_rate,
    })
}

/// Value, first and second derivative of a scalar sequence.
///
/// Derivatives use central differences with one-sided differences at the two
/// boundary frames; the second derivative differentiates the first.
pub fn expand_derivatives(seq: &[f64]) -> Result<Vec<[f64; 3]>> {
    if seq.len() < 3 {
        return Err(invalid(format!(
            "derivative expansion needs at least 3 frames, got {}",
            seq.len()
        )));
    }
    let delta = difference(seq);
    let delta2 = difference(&delta);
    Ok(seq
        .iter()
        .zip(&delta)
        .zip(&delta2)
        .map(|((&v, &d), &dd)| [v, d, dd])
        .collect())
}

fn difference(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    d[0] = x[1] - x[0];
    d[n - 1] = x[n - 1] - x[n - 2];
    for t in 1..n - 1 {
        d[t] = (x[t + 1] - x[t - 1]) / 2.0;
    }
    d
}

/// Turns an interpolated 60 fps contour into 120 fps speech frames
/// (not yet normalized).
pub fn speech_frames(contour: &ProsodyContour) -> Result<Vec<Vec<f64>>> {
    let filled = interpolate_unvoiced(contour)?;
    let raw: Vec<Vec<f64>> = filled
        .f0
        .iter()
        .zip(&filled.energy)
        .map(|(f, e)| vec![f.expect("interpolated"), *e])
        .collect();
    let up = resample(&raw, contour.frame_rate, MODEL_FRAME_RATE)?;
    let f0: Vec<f64> = up.iter().map(|r| r[0]).collect();
    let energy: Vec<f64> = up.iter().map(|r| r[1]).collect();
    let f0 = expand_derivatives(&f0)?;
    let energy = expand_derivatives(&energy)?;
    Ok(f0
        .iter()
        .zip(&energy)
        .map(|(f, e)| vec![f[0], e[0], f[1], e[1], f[2], e[2]])
        .collect())
}

/// Linear resampling on the time axis, holding the last frame past the end.
///
/// Output length is `round(len * to_rate / from_rate)`.
pub fn resample(seq: &[Vec<f64>], from_rate: f64, to_rate: f64) -> Result<Vec<Vec<f64>>> {
    if seq.is_empty() {
        return Err(invalid("cannot resample an empty sequence"));
    }
    if !(from_rate > 0.0 && to_rate > 0.0) {
        return Err(invalid("sampling rates must be positive"));
    }
    let n = seq.len();
    let out_len = ((n as f64) * to_rate / from_rate).round() as usize;
    let ratio = from_rate / to_rate;
    let out = (0..out_len)
        .map(|k| {
            let pos = k as f64 * ratio;
            let i = pos.floor() as usize;
            if i + 1 >= n {
                return seq[n - 1].clone();
            }
            let w = pos - i as f64;
            if w == 0.0 {
                return seq[i].clone();
            }
            seq[i]
                .iter()
                .zip(&seq[i + 1])
                .map(|(a, b)| a + (b - a) * w)
                .collect()
        })
        .collect();
    Ok(out)
}

/// Per-subject normalization statistics, one entry per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectStats {
    pub subject: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions whose variance was zero; they are only centered.
    pub degenerate: Vec<bool>,
}

impl SubjectStats {
    pub fn normalize(&self, frame: &[f64]) -> Vec<f64> {
        frame
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let c = v - self.mean[j];
                if self.degenerate[j] {
                    c
                } else {
                    c / self.std[j]
                }
            })
            .collect()
    }

    pub fn denormalize(&self, frame: &[f64]) -> Vec<f64> {
        frame
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.degenerate[j] {
                    v + self.mean[j]
                } else {
                    v * self.std[j] + self.mean[j]
                }
            })
            .collect()
    }
}

/// Z-normalizes frames per subject using the sample (n-1) standard deviation.
///
/// Returns the normalized frames and the statistics of each subject in order
/// of first appearance.
pub fn znorm_per_subject<S: AsRef<str>>(
    frames: &[Vec<f64>],
    subject_ids: &[S],
) -> Result<(Vec<Vec<f64>>, Vec<SubjectStats>)> {
    if frames.len() != subject_ids.len() {
        return Err(invalid("one subject id is needed per frame"));
    }
    let dim = frames.first().map_or(0, Vec::len);
    if frames.iter().any(|f| f.len() != dim) {
        return Err(invalid("frames have inconsistent widths"));
    }

    let mut order: Vec<&str> = Vec::new();
    for s in subject_ids {
        if !order.contains(&s.as_ref()) {
            order.push(s.as_ref());
        }
    }

    let mut stats = Vec::with_capacity(order.len());
    for subject in &order {
        let rows: Vec<&Vec<f64>> = frames
            .iter()
            .zip(subject_ids)
            .filter(|(_, s)| s.as_ref() == *subject)
            .map(|(f, _)| f)
            .collect();
        if rows.len() < 2 {
            return Err(Error::Data(format!(
                "subject `{subject}` contributes fewer than 2 frames"
            )));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for j in 0..dim {
                let c = r[j] - mean[j];
                var[j] += c * c;
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / (n - 1.0)).sqrt()).collect();
        let degenerate: Vec<bool> = std
            .iter()
            .zip(&mean)
            .map(|(s, m)| *s <= 1e-12 * m.abs().max(1.0))
            .collect();
        stats.push(SubjectStats {
            subject: subject.to_string(),
            mean,
            std,
            degenerate,
        });
    }

    let normalized = frames
        .iter()
        .zip(subject_ids)
        .map(|(f, s)| {
            let st = stats
                .iter()
                .find(|st| st.subject == s.as_ref())
                .expect("subject collected above");
            st.normalize(f)
        })
        .collect();
    Ok((normalized, stats))
}
