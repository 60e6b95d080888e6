#![allow(dead_code)]

use gesture_dbn::cdbn::{CdbnModel, ConstraintSet, SupportMask};
use gesture_dbn::dbn::{DbnModel, GaussianState};
use gesture_dbn::statmath::{GaussianParams, TransitionMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

/// Random SPD matrix `B B^T + 0.3 I`, row-major.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..d * d).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.7).collect();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += b[i * d + k] * b[j * d + k];
            }
            out[i * d + j] = s + if i == j { 0.3 } else { 0.0 };
        }
    }
    out
}

pub fn random_gaussian(rng: &mut ChaCha8Rng, d: usize, spread: f64) -> GaussianParams {
    let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-spread..spread)).collect();
    GaussianParams::from_slices(&mean, &random_spd(rng, d)).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, ds: usize, dm: usize) -> GaussianState {
    GaussianState { speech: random_gaussian(rng, ds, 2.0), motion: random_gaussian(rng, dm, 2.0) }
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

pub fn random_transitions(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(rng, n)).collect();
    TransitionMatrix::from_rows(&rows).unwrap()
}

pub fn random_dbn(rng: &mut ChaCha8Rng, n: usize, ds: usize, dm: usize) -> DbnModel {
    let states = (0..n).map(|_| random_state(rng, ds, dm)).collect();
    let trans = random_transitions(rng, n);
    let prior = random_simplex(rng, n);
    DbnModel::new(states, trans, prior).unwrap()
}

/// Two constraints (`a`, `other`) over `n` states with dense, distinct
/// transition matrices.
pub fn random_cdbn(rng: &mut ChaCha8Rng, n: usize, ds: usize, dm: usize) -> CdbnModel {
    let states = (0..n).map(|_| random_state(rng, ds, dm)).collect();
    let trans = vec![random_transitions(rng, n), random_transitions(rng, n)];
    let priors = vec![random_simplex(rng, n), random_simplex(rng, n)];
    CdbnModel::new(
        ConstraintSet::new(["a"]).unwrap(),
        states,
        trans,
        priors,
        SupportMask::full(2, n, n - 1).unwrap(),
        vec![0.5, 0.5],
    )
    .unwrap()
}

/// Exhaustive enumeration of all `n^T` state paths.
pub struct Enumeration {
    pub log_z: f64,
    pub gamma: Vec<Vec<f64>>,
    pub best_path: Vec<usize>,
}

/// `log_b[t][i]` emission log-likelihoods, `log_prior[i]`, and
/// `log_trans(t, i, j)` for the step into frame `t`.
pub fn enumerate_paths(
    log_b: &[Vec<f64>],
    log_prior: &[f64],
    log_trans: impl Fn(usize, usize, usize) -> f64,
) -> Enumeration {
    let t_len = log_b.len();
    let n = log_prior.len();
    let total = n.pow(t_len as u32);
    let mut scores = Vec::with_capacity(total);
    let mut paths = Vec::with_capacity(total);
    for code in 0..total {
        let mut path = vec![0; t_len];
        let mut c = code;
        for t in (0..t_len).rev() {
            path[t] = c % n;
            c /= n;
        }
        let mut s = log_prior[path[0]] + log_b[0][path[0]];
        for t in 1..t_len {
            s += log_trans(t, path[t - 1], path[t]) + log_b[t][path[t]];
        }
        scores.push(s);
        paths.push(path);
    }
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    let mut gamma = vec![vec![0.0; n]; t_len];
    for (s, p) in scores.iter().zip(&paths) {
        let w = (s - log_z).exp();
        for t in 0..t_len {
            gamma[t][p[t]] += w;
        }
    }
    // first path in lexicographic order among the maxima
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
    Enumeration { log_z, gamma, best_path: paths[best].clone() }
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub fn sample_gaussian(rng: &mut ChaCha8Rng, g: &GaussianParams) -> Vec<f64> {
    let d = g.dim();
    let l = g.chol_factor();
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    (0..d).map(|i| g.mean()[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>()).collect()
}

/// Monte-Carlo estimate of KL(p || q).
pub fn mc_kl(rng: &mut ChaCha8Rng, p: &GaussianParams, q: &GaussianParams, samples: usize) -> f64 {
    (0..samples)
        .map(|_| {
            let x = sample_gaussian(rng, p);
            p.logpdf(&x) - q.logpdf(&x)
        })
        .sum::<f64>()
        / samples as f64
}

/// Head-motion streams of slow drift and roll sway with planted nods (pitch) and shakes
/// (yaw) about a second long.
pub struct Planted {
    pub id: String,
    pub subject: String,
    pub motion: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

pub const PLANTED_GESTURES: [(&str, usize); 2] = [("nod", 0), ("shake", 1)];

pub fn planted_pattern(rng: &mut ChaCha8Rng, axis: usize) -> Vec<Vec<f64>> {
    let len = rng.random_range(100..140);
    let amp = rng.random_range(8.0..12.0);
    let freq = rng.random_range(1.8..2.2);
    (0..len)
        .map(|t| {
            let mut f = vec![0.0; 3];
            f[axis] = amp * (std::f64::consts::TAU * freq * t as f64 / 120.0).sin();
            for v in &mut f {
                *v += 0.2 * rng.sample::<f64, _>(StandardNormal);
            }
            f
        })
        .collect()
}

pub fn planted_corpus(seed: u64, turns: usize, subjects: usize) -> Vec<Planted> {
    let mut rng = rng(seed);
    (0..turns)
        .map(|i| {
            let mut motion: Vec<Vec<f64>> = Vec::new();
            let mut labels = Vec::new();
            let mut drift = vec![0.0; 3];
            for _ in 0..4 {
                let gap = rng.random_range(150..300);
                let sway = rng.random_range(4.0..8.0);
                for t in 0..gap {
                    for v in &mut drift {
                        *v += 0.05 * rng.sample::<f64, _>(StandardNormal);
                    }
                    let u = t as f64 / gap as f64;
                    let roll = sway * (std::f64::consts::PI * u).sin() * (std::f64::consts::TAU * 0.8 * t as f64 / 120.0).sin();
                    motion.push(vec![drift[0], drift[1], drift[2] + roll]);
                    labels.push("other".to_string());
                }
                let (g, axis) = PLANTED_GESTURES[rng.random_range(0..2)];
                for f in planted_pattern(&mut rng, axis) {
                    motion.push(f.iter().zip(&drift).map(|(a, b)| a + b).collect());
                    labels.push(g.to_string());
                }
            }
            Planted { id: format!("p{i:03}"), subject: format!("s{}", i % subjects), motion, labels }
        })
        .collect()
}

pub fn planted_exemplars(seed: u64, per_gesture: usize) -> Vec<(String, Vec<Vec<Vec<f64>>>)> {
    let mut rng = rng(seed);
    PLANTED_GESTURES
        .iter()
        .map(|(g, axis)| (g.to_string(), (0..per_gesture).map(|_| planted_pattern(&mut rng, *axis)).collect()))
        .collect()
}

/// Thresholds from a development corpus, precision on a test corpus.
pub fn planted_precision(seed: u64, turns: usize) -> std::collections::BTreeMap<String, Option<f64>> {
    use gesture_dbn::retrieval::*;
    use std::collections::BTreeMap;
    let mut cfg = RetrievalConfig::default();
    let models: Vec<GestureModel> = planted_exemplars(seed, 4)
        .iter()
        .map(|(g, ex)| GestureModel::new(g, ex, &cfg).unwrap())
        .collect();
    let dev = planted_corpus(seed + 1, turns, 3);
    for m in &models {
        let mut cands: BTreeMap<String, Vec<ScoredCandidate>> = BTreeMap::new();
        for t in &dev {
            let turn = Turn { id: &t.id, subject: &t.subject, motion: &t.motion };
            for s in score_turn(&turn, m, &cfg).unwrap() {
                let positive = segment_matches(&s, &t.labels, &m.label);
                cands.entry(t.subject.clone()).or_default().push(ScoredCandidate { score: s.score, positive });
            }
        }
        cfg.thresholds.insert(m.label.clone(), select_thresholds(&cands).unwrap());
    }
    let test = planted_corpus(seed + 2, turns, 3);
    let turns: Vec<Turn> = test.iter().map(|t| Turn { id: &t.id, subject: &t.subject, motion: &t.motion }).collect();
    let found = retrieve(&turns, &models, &cfg).unwrap();
    let truth: BTreeMap<String, Vec<String>> = test.iter().map(|t| (t.id.clone(), t.labels.clone())).collect();
    let report = precision_report(&found, &truth).unwrap();
    PLANTED_GESTURES
        .iter()
        .map(|(g, _)| (g.to_string(), report.per_gesture.get(*g).and_then(|p| p.precision())))
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Draws speech and motion from `model` along a constraint track.
pub fn sample_cdbn(rng: &mut ChaCha8Rng, model: &CdbnModel, track: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut s = draw(rng, model.prior(track[0]));
    let mut speech = Vec::with_capacity(track.len());
    let mut motion = Vec::with_capacity(track.len());
    for (t, &c) in track.iter().enumerate() {
        if t > 0 {
            s = draw(rng, model.trans(c).row(s));
        }
        speech.push(sample_gaussian(rng, &model.states()[s].speech));
        motion.push(sample_gaussian(rng, &model.states()[s].motion));
    }
    (speech, motion)
}

/// Alternating constraint blocks of 20 to 60 frames.
pub fn block_track(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(len);
    let mut c = rng.random_range(0..k);
    while out.len() < len {
        let b = rng.random_range(20..60).min(len - out.len());
        out.extend(std::iter::repeat_n(c, b));
        c = (c + 1 + rng.random_range(0..k.max(2) - 1)) % k;
    }
    out
}

pub fn spaced_state(speech_mean: &[f64], motion_mean: &[f64], var: f64) -> GaussianState {
    let diag = |m: &[f64]| {
        let d = m.len();
        let mut c = vec![0.0; d * d];
        for i in 0..d {
            c[i * d + i] = var;
        }
        GaussianParams::from_slices(m, &c).unwrap()
    };
    GaussianState { speech: diag(speech_mean), motion: diag(motion_mean) }
}
