//! Exemplar-based retrieval of gesture segments from continuous motion.
//!
//! Pipeline: nonuniform downsampling, multiscale sliding windows over the
//! retained frames, a cheap novelty screen, DTAK scoring against exemplars,
//! per-subject thresholds and overlap removal by score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A candidate or detected segment; `end` is inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub turn: String,
    pub start: usize,
    pub end: usize,
    pub score: f64,
    pub label: String,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.turn == other.turn && self.start <= other.end && other.start <= self.end
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy walk keeping a frame once it moves more than `tolerance` away
/// from the last kept frame. First and last frames are always kept.
pub fn nonuniform_downsample(traj: &[Vec<f64>], tolerance: f64) -> Result<Vec<usize>> {
    if traj.is_empty() {
        return Err(invalid("cannot downsample an empty trajectory"));
    }
    if !(tolerance > 0.0) {
        return Err(invalid("downsampling tolerance must be positive"));
    }
    let tol2 = tolerance * tolerance;
    let mut kept = vec![0];
    for (t, f) in traj.iter().enumerate().skip(1) {
        if dist2(f, &traj[*kept.last().unwrap()]) > tol2 {
            kept.push(t);
        }
    }
    let last = traj.len() - 1;
    if *kept.last().unwrap() != last {
        kept.push(last);
    }
    Ok(kept)
}

/// Windows of `s` consecutive retained frames for every scale `s`, stride
/// one retained frame, mapped back to original frame indices. Scales longer
/// than the retained sequence contribute nothing.
pub fn multiscale_windows(indices: &[usize], scales: &[usize], turn: &str) -> Result<Vec<Segment>> {
    if scales.iter().any(|&s| s < 2) {
        return Err(invalid("window scales must be at least 2"));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("retained indices must be strictly increasing"));
    }
    let mut out = Vec::new();
    for &s in scales {
        if s > indices.len() {
            continue;
        }
        for w in indices.windows(s) {
            out.push(Segment { turn: turn.to_string(), start: w[0], end: w[s - 1], score: 0.0, label: String::new() });
        }
    }
    Ok(out)
}

/// Cheap candidate pruning ahead of DTAK scoring.
pub trait Screen: Send + Sync {
    fn accepts(&self, frames: &[Vec<f64>]) -> bool;
}

/// Per-dimension mean, standard deviation and range of a segment.
pub fn summary_features(frames: &[Vec<f64>]) -> Vec<f64> {
    let d = frames[0].len();
    let n = frames.len() as f64;
    let mut out = Vec::with_capacity(3 * d);
    for k in 0..d {
        let col = frames.iter().map(|f| f[k]);
        let mean = col.clone().sum::<f64>() / n;
        let var = col.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        out.extend([mean, var.sqrt(), hi - lo]);
    }
    out
}

/// Diagonal Gaussian over exemplar summary features. A candidate passes when
/// its root-mean-square standardized deviation is within `radius`.
///
/// Each feature's spread is floored at a tenth of the mean exemplar range of
/// its motion dimension so that one or two exemplars still give a usable
/// envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEnvelope {
    mean: Vec<f64>,
    scale: Vec<f64>,
    radius: f64,
}

impl GaussianEnvelope {
    pub fn fit(exemplars: &[&[Vec<f64>]], radius: f64) -> Result<Self> {
        if exemplars.is_empty() || exemplars.iter().any(|e| e.is_empty()) {
            return Err(invalid("the screen needs at least one non-empty exemplar"));
        }
        if radius.is_nan() || radius < 0.0 {
            return Err(invalid("screen radius must be non-negative"));
        }
        let feats: Vec<Vec<f64>> = exemplars.iter().map(|e| summary_features(e)).collect();
        let m = feats[0].len();
        if feats.iter().any(|f| f.len() != m) {
            return Err(invalid("exemplars have different widths"));
        }
        let n = feats.len() as f64;
        let mean: Vec<f64> = (0..m).map(|j| feats.iter().map(|f| f[j]).sum::<f64>() / n).collect();
        let scale = (0..m)
            .map(|j| {
                let sd = (feats.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
                let range = mean[3 * (j / 3) + 2];
                sd.max(0.1 * range).max(1e-9)
            })
            .collect();
        Ok(Self { mean, scale, radius })
    }

    pub fn distance(&self, frames: &[Vec<f64>]) -> f64 {
        let f = summary_features(frames);
        let s: f64 = f.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| ((x - m) / s).powi(2)).sum();
        (s / f.len() as f64).sqrt()
    }
}

impl Screen for GaussianEnvelope {
    fn accepts(&self, frames: &[Vec<f64>]) -> bool {
        self.distance(frames) <= self.radius
    }
}

/// Dynamic time alignment kernel similarity in [0, 1].
pub fn dtak(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("DTAK needs non-empty segments"));
    }
    if !(sigma > 0.0) {
        return Err(invalid("kernel bandwidth must be positive"));
    }
    let (n, m) = (a.len(), b.len());
    let g = -0.5 / (sigma * sigma);
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            let k = (g * dist2(&a[i], &b[j])).exp();
            cur[j] = match (i, j) {
                (0, 0) => 2.0 * k,
                (0, _) => cur[j - 1] + k,
                (_, 0) => prev[0] + k,
                _ => (prev[j] + k).max(prev[j - 1] + 2.0 * k).max(cur[j - 1] + k),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1] / (n + m) as f64)
}

/// Median pairwise distance among exemplar frames, from at most 400 frames.
pub fn median_heuristic(exemplars: &[&[Vec<f64>]]) -> Result<f64> {
    let frames: Vec<&Vec<f64>> = exemplars.iter().flat_map(|e| e.iter()).collect();
    if frames.len() < 2 {
        return Err(invalid("the median heuristic needs at least two exemplar frames"));
    }
    let stride = frames.len().div_ceil(400);
    let pick: Vec<&Vec<f64>> = frames.into_iter().step_by(stride).collect();
    let mut d = Vec::with_capacity(pick.len() * pick.len() / 2);
    for i in 0..pick.len() {
        for j in i + 1..pick.len() {
            d.push(dist2(pick[i], pick[j]).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let med = if d.is_empty() {
        0.0
    } else if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    if !(med > 0.0) {
        return Err(Error::Data("exemplar frames are all identical; set the bandwidth explicitly".into()));
    }
    Ok(med)
}

/// A scored development candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub score: f64,
    pub positive: bool,
}

/// Precision of retrieving every candidate scoring at least `threshold`;
/// `None` when nothing is retrieved.
pub fn precision_at(cands: &[ScoredCandidate], threshold: f64) -> Option<f64> {
    let (tp, n) = cands
        .iter()
        .filter(|c| c.score >= threshold)
        .fold((0usize, 0usize), |(tp, n), c| (tp + c.positive as usize, n + 1));
    (n > 0).then(|| tp as f64 / n as f64)
}

/// Per subject, the candidate score maximizing precision; ties go to the
/// higher threshold.
pub fn select_thresholds(dev: &BTreeMap<String, Vec<ScoredCandidate>>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (subject, cands) in dev {
        if !cands.iter().any(|c| c.positive) {
            return Err(Error::Data(format!("subject `{subject}` has no positive development candidates")));
        }
        let mut sorted: Vec<ScoredCandidate> = cands.clone();
        sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        let (mut tp, mut n) = (0usize, 0usize);
        let mut i = 0;
        while i < sorted.len() {
            let s = sorted[i].score;
            while i < sorted.len() && sorted[i].score == s {
                tp += sorted[i].positive as usize;
                n += 1;
                i += 1;
            }
            let p = tp as f64 / n as f64;
            if p > best.0 {
                best = (p, s);
            }
        }
        out.insert(subject.clone(), best.1);
    }
    Ok(out)
}

/// True when at least half of the segment's frames carry `label`.
pub fn segment_matches<S: AsRef<str>>(seg: &Segment, labels: &[S], label: &str) -> bool {
    let hits = labels[seg.start..=seg.end].iter().filter(|l| l.as_ref() == label).count();
    2 * hits >= seg.len()
}

/// Frame labels from detections; uncovered frames get `background`.
pub fn segments_to_labels(n_frames: usize, segs: &[Segment], background: &str) -> Vec<String> {
    let mut out = vec![background.to_string(); n_frames];
    for s in segs {
        for l in &mut out[s.start..=s.end.min(n_frames - 1)] {
            *l = s.label.clone();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Window lengths, counted in retained frames.
    pub scales: Vec<usize>,
    pub tolerance: f64,
    /// Kernel bandwidth; the median heuristic when absent.
    pub sigma: Option<f64>,
    pub screen_radius: f64,
    /// Threshold per gesture and subject.
    pub thresholds: BTreeMap<String, BTreeMap<String, f64>>,
    /// Used when a gesture has no threshold for a subject.
    pub default_threshold: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            scales: vec![30, 60, 90, 120],
            tolerance: 0.5,
            sigma: None,
            screen_radius: 3.0,
            thresholds: BTreeMap::new(),
            default_threshold: 0.5,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|&s| s < 2) {
            return Err(invalid("window scales must be non-empty and at least 2"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("downsampling tolerance must be positive"));
        }
        if self.sigma.is_some_and(|s| !(s > 0.0)) {
            return Err(invalid("kernel bandwidth must be positive"));
        }
        Ok(())
    }

    pub fn threshold(&self, gesture: &str, subject: &str) -> f64 {
        self.thresholds
            .get(gesture)
            .and_then(|m| m.get(subject))
            .copied()
            .unwrap_or(self.default_threshold)
    }
}

/// A motion stream to search.
#[derive(Debug, Clone, Copy)]
pub struct Turn<'a> {
    pub id: &'a str,
    pub subject: &'a str,
    pub motion: &'a [Vec<f64>],
}

/// Exemplars of one gesture, prepared for scoring.
pub struct GestureModel {
    pub label: String,
    exemplars: Vec<Vec<Vec<f64>>>,
    screen: Box<dyn Screen>,
    sigma: f64,
}

impl GestureModel {
    /// Downsamples the exemplars and fits the default envelope screen.
    pub fn new(label: &str, exemplars: &[Vec<Vec<f64>>], cfg: &RetrievalConfig) -> Result<Self> {
        cfg.validate()?;
        if exemplars.is_empty() {
            return Err(invalid(format!("gesture `{label}` has no exemplars")));
        }
        let views: Vec<&[Vec<f64>]> = exemplars.iter().map(Vec::as_slice).collect();
        let screen = GaussianEnvelope::fit(&views, cfg.screen_radius)?;
        Self::with_screen(label, exemplars, cfg, Box::new(screen))
    }

    pub fn with_screen(label: &str, exemplars: &[Vec<Vec<f64>>], cfg: &RetrievalConfig, screen: Box<dyn Screen>) -> Result<Self> {
        if exemplars.is_empty() || exemplars.iter().any(Vec::is_empty) {
            return Err(invalid(format!("gesture `{label}` needs non-empty exemplars")));
        }
        let reduced = exemplars
            .iter()
            .map(|e| Ok(nonuniform_downsample(e, cfg.tolerance)?.into_iter().map(|i| e[i].clone()).collect()))
            .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
        let sigma = match cfg.sigma {
            Some(s) => s,
            None => {
                let views: Vec<&[Vec<f64>]> = exemplars.iter().map(Vec::as_slice).collect();
                median_heuristic(&views)?
            }
        };
        Ok(Self { label: label.to_string(), exemplars: reduced, screen, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Best DTAK similarity against any exemplar.
    pub fn score(&self, frames: &[Vec<f64>]) -> Result<f64> {
        let mut best: f64 = 0.0;
        for e in &self.exemplars {
            best = best.max(dtak(frames, e, self.sigma)?);
        }
        Ok(best)
    }
}

/// Screens and scores every window of `turn`; screened-out windows are
/// dropped. The returned segments are sorted by (start, end).
pub fn score_turn(turn: &Turn<'_>, gesture: &GestureModel, cfg: &RetrievalConfig) -> Result<Vec<Segment>> {
    let kept = nonuniform_downsample(turn.motion, cfg.tolerance)?;
    let windows = multiscale_windows(&kept, &cfg.scales, turn.id)?;
    let pos: BTreeMap<usize, usize> = kept.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let run = |mut w: Segment| -> Result<Option<Segment>> {
        let frames: Vec<Vec<f64>> = kept[pos[&w.start]..=pos[&w.end]].iter().map(|&i| turn.motion[i].clone()).collect();
        if !gesture.screen.accepts(&turn.motion[w.start..=w.end]) {
            return Ok(None);
        }
        w.score = gesture.score(&frames)?;
        w.label = gesture.label.clone();
        Ok(Some(w))
    };
    #[cfg(feature = "parallel")]
    let scored: Vec<Result<Option<Segment>>> = {
        use rayon::prelude::*;
        windows.into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scored: Vec<Result<Option<Segment>>> = windows.into_iter().map(run).collect();
    let mut out: Vec<Segment> = scored.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    out.sort_by_key(|s| (s.start, s.end));
    Ok(out)
}

/// Keeps the highest-scoring detections so that no two overlap. Ties are
/// broken by turn, start, end and label, so the result does not depend on
/// input order.
pub fn resolve_overlaps(mut segs: Vec<Segment>) -> Vec<Segment> {
    segs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.turn.cmp(&b.turn))
            .then(a.start.cmp(&b.start))
            .then(a.end.cmp(&b.end))
            .then_with(|| a.label.cmp(&b.label))
    });
    let mut kept: Vec<Segment> = Vec::new();
    for s in segs {
        if !kept.iter().any(|k| k.overlaps(&s)) {
            kept.push(s);
        }
    }
    kept.sort_by(|a, b| a.turn.cmp(&b.turn).then(a.start.cmp(&b.start)));
    kept
}

/// Full pipeline over `turns` for every gesture in `gestures`.
pub fn retrieve(turns: &[Turn<'_>], gestures: &[GestureModel], cfg: &RetrievalConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    if gestures.is_empty() {
        return Err(invalid("no gestures to retrieve"));
    }
    let mut hits = Vec::new();
    for turn in turns {
        for g in gestures {
            let th = cfg.threshold(&g.label, turn.subject);
            hits.extend(score_turn(turn, g, cfg)?.into_iter().filter(|s| s.score >= th));
        }
    }
    Ok(resolve_overlaps(hits))
}

/// Precision of detections against per-turn frame labels, per gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub per_gesture: BTreeMap<String, GesturePrecision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GesturePrecision {
    pub retrieved: usize,
    pub correct: usize,
}

impl GesturePrecision {
    pub fn precision(&self) -> Option<f64> {
        (self.retrieved > 0).then(|| self.correct as f64 / self.retrieved as f64)
    }
}

pub fn precision_report<S: AsRef<str>>(detections: &[Segment], truth: &BTreeMap<String, Vec<S>>) -> Result<PrecisionReport> {
    let mut per_gesture: BTreeMap<String, GesturePrecision> = BTreeMap::new();
    for d in detections {
        let labels = truth
            .get(&d.turn)
            .ok_or_else(|| invalid(format!("no labels for turn `{}`", d.turn)))?;
        if d.end >= labels.len() {
            return Err(invalid(format!("detection in turn `{}` runs past its labels", d.turn)));
        }
        let e = per_gesture.entry(d.label.clone()).or_insert(GesturePrecision { retrieved: 0, correct: 0 });
        e.retrieved += 1;
        e.correct += segment_matches(d, labels, &d.label) as usize;
    }
    Ok(PrecisionReport { per_gesture })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn constant_keeps_endpoints() {
        assert_eq!(nonuniform_downsample(&col(&[3.0; 7]), 0.1).unwrap(), vec![0, 6]);
        assert_eq!(nonuniform_downsample(&col(&[3.0]), 0.1).unwrap(), vec![0]);
        assert!(nonuniform_downsample(&[], 0.1).is_err());
    }

    #[test]
    fn tiny_tolerance_keeps_everything() {
        let t = col(&[0.0, 0.1, 0.05, 0.2, 0.3]);
        assert_eq!(nonuniform_downsample(&t, 1e-9).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn staircase_keeps_one_per_step() {
        // steps of 2*tol, three frames per step: first frame of each step is kept
        let tol = 0.5;
        let v: Vec<f64> = (0..5).flat_map(|s| [s as f64 * 2.0 * tol; 3]).collect();
        assert_eq!(nonuniform_downsample(&col(&v), tol).unwrap(), vec![0, 3, 6, 9, 12, 14]);
    }

    #[test]
    fn window_counts() {
        let idx: Vec<usize> = (0..10).map(|i| 3 * i).collect();
        assert_eq!(multiscale_windows(&idx, &[2], "t").unwrap().len(), 9);
        let w = multiscale_windows(&idx, &[2, 4], "t").unwrap();
        assert_eq!(w.len(), 16);
        assert!(w.iter().all(|s| s.start < s.end && s.end <= 27));
        let mut pairs: Vec<(usize, usize)> = w.iter().map(|s| (s.start, s.end)).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 16);
        assert!(multiscale_windows(&idx, &[1], "t").is_err());
    }

    #[test]
    fn dtak_cases() {
        let a = col(&[0.0, 1.0, 3.0]);
        assert_abs_diff_eq!(dtak(&a, &a, 0.7).unwrap(), 1.0, epsilon = 1e-12);
        let k = (-(2.0f64).powi(2) / 2.0).exp();
        assert_abs_diff_eq!(dtak(&col(&[1.0]), &col(&[3.0]), 1.0).unwrap(), k, epsilon = 1e-15);
        // u11 = 2, u12 = 2 + e^-2, u21 = 2 + e^-0.5, u22 = 2 + 2 e^-0.5
        let v = dtak(&col(&[0.0, 1.0]), &col(&[0.0, 2.0]), 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.5 + 0.5 * (-0.5f64).exp(), epsilon = 1e-15);
        let b = col(&[0.5, 2.0]);
        assert_abs_diff_eq!(dtak(&a, &b, 1.3).unwrap(), dtak(&b, &a, 1.3).unwrap(), epsilon = 1e-12);
        assert!(dtak(&a, &b, 0.0).is_err());
    }

    #[test]
    fn envelope_screen() {
        let ex: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|k| (0..40).map(|t| vec![(t as f64 * 0.3 + k as f64).sin(), 0.2 * (t as f64 * 0.3).cos()]).collect())
            .collect();
        let views: Vec<&[Vec<f64>]> = ex.iter().map(Vec::as_slice).collect();
        let scr = GaussianEnvelope::fit(&views, 3.0).unwrap();
        assert!(scr.accepts(&ex[0]));
        let zero = GaussianEnvelope::fit(&views[..1], 0.0).unwrap();
        assert!(zero.accepts(&ex[0]));
        let big: Vec<Vec<f64>> = ex[0].iter().map(|f| f.iter().map(|v| 100.0 * v).collect()).collect();
        assert!(!scr.accepts(&big));
        let wide = GaussianEnvelope::fit(&views, f64::INFINITY).unwrap();
        assert!(wide.accepts(&big));
    }

    #[test]
    fn thresholds_match_exhaustive_sweep() {
        let c = |score, positive| ScoredCandidate { score, positive };
        let mut dev = BTreeMap::new();
        dev.insert("s1".to_string(), vec![c(0.9, true), c(0.8, true), c(0.3, false), c(0.2, false)]);
        dev.insert("s2".to_string(), vec![c(0.9, false), c(0.7, true), c(0.6, true), c(0.6, false), c(0.5, true), c(0.1, false)]);
        let th = select_thresholds(&dev).unwrap();
        assert_eq!(th["s1"], 0.9);
        assert_eq!(precision_at(&dev["s1"], th["s1"]), Some(1.0));
        for (s, cands) in &dev {
            let mut best = (f64::NEG_INFINITY, 0.0);
            let mut scores: Vec<f64> = cands.iter().map(|c| c.score).collect();
            scores.sort_by(f64::total_cmp);
            for &t in &scores {
                let p = precision_at(cands, t).unwrap();
                if p >= best.0 {
                    best = (p, t);
                }
            }
            assert_eq!(th[s], best.1, "subject {s}");
        }
        assert_eq!(th["s2"], 0.5);
        let mut bad = BTreeMap::new();
        bad.insert("s3".to_string(), vec![c(0.4, false)]);
        assert!(select_thresholds(&bad).unwrap_err().to_string().contains("s3"));
    }

    #[test]
    fn overlaps_resolved_by_score() {
        let s = |start, end, score: f64, label: &str| Segment { turn: "t".into(), start, end, score, label: label.into() };
        let out = resolve_overlaps(vec![s(0, 10, 0.7, "nod"), s(5, 20, 0.9, "shake"), s(21, 30, 0.5, "nod")]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].label, "shake");
        assert_eq!(out[1].start, 21);
    }

    #[test]
    fn labels_from_segments() {
        let seg = Segment { turn: "t".into(), start: 1, end: 2, score: 1.0, label: "nod".into() };
        assert_eq!(segments_to_labels(4, std::slice::from_ref(&seg), "other"), ["other", "nod", "nod", "other"]);
        assert!(segment_matches(&seg, &["other", "nod", "other", "other"], "nod"));
        assert!(!segment_matches(&seg, &["other", "other", "other", "other"], "nod"));
    }
}
