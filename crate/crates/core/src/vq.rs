//! Linde-Buzo-Gray vector quantization and the state initialization built on it.
//!
//! EM started from random states tends to pull every state toward the data
//! mean, so synthesized expected values lose range. Seeding the states with an
//! LBG codebook spreads them over the whole speech-motion space first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dbn::GaussianState;
use crate::error::{invalid, Error, Result};
use crate::statmath::GaussianParams;

/// Minimum frames per requested state.
pub const MIN_FRAMES_PER_STATE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbgOptions {
    /// Relative split perturbation.
    pub split_eps: f64,
    /// Lloyd iterations per codebook size.
    pub max_iter: usize,
    /// Stop when the relative distortion change falls below this.
    pub rel_tol: f64,
}

impl Default for LbgOptions {
    fn default() -> Self {
        Self { split_eps: 0.01, max_iter: 100, rel_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    /// Nearest centroid of every training vector.
    pub assignments: Vec<usize>,
    /// Mean squared quantization error of `assignments`.
    pub distortion: f64,
    /// Distortion after every assignment step of the final refinement stage.
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn assign(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_iter().map(|x| nearest(x, centroids)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.iter().map(|x| nearest(x, centroids)).collect()
    }
}

fn mean_of<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, d: usize) -> (Vec<f64>, usize) {
    let mut m = vec![0.0; d];
    let mut n = 0;
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
        n += 1;
    }
    if n > 0 {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    (m, n)
}

fn validate(data: &[Vec<f64>]) -> Result<usize> {
    let d = data.first().map(Vec::len).ok_or_else(|| invalid("empty data"))?;
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(invalid("data rows must share a positive width"));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("data contains non-finite values"));
    }
    Ok(d)
}

/// Lloyd refinement of `centroids` in place. Returns the final assignments
/// and distortion; every distortion value is pushed to `trace`.
fn lloyd(
    data: &[Vec<f64>],
    centroids: &mut [Vec<f64>],
    opts: &LbgOptions,
    trace: &mut Vec<f64>,
) -> (Vec<usize>, f64) {
    let d = data[0].len();
    let n = data.len() as f64;
    let mut prev = f64::INFINITY;
    let mut iter = 0;
    loop {
        let mut res = assign(data, centroids);
        // empty-cluster guard: move the centroid onto the worst-fit member of
        // the largest cluster and assign again
        let mut guard = 0;
        loop {
            let mut counts = vec![0usize; centroids.len()];
            for (k, _) in &res {
                counts[*k] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            if guard >= centroids.len() {
                break;
            }
            guard += 1;
            let largest = (0..counts.len()).max_by_key(|&k| (counts[k], usize::MAX - k)).unwrap();
            let donor = res
                .iter()
                .enumerate()
                .filter(|(_, (k, _))| *k == largest)
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .map(|(i, _)| i)
                .unwrap();
            centroids[empty] = data[donor].clone();
            res = assign(data, centroids);
        }

        let distortion = res.iter().map(|(_, e)| e).sum::<f64>() / n;
        debug_assert!(
            distortion <= prev * (1.0 + 1e-12) + 1e-300,
            "Lloyd step increased distortion: {prev} -> {distortion}"
        );
        trace.push(distortion);
        let converged = prev.is_finite() && (prev - distortion) <= opts.rel_tol * prev;
        prev = distortion;
        iter += 1;
        if converged || distortion == 0.0 || iter >= opts.max_iter {
            return (res.into_iter().map(|(k, _)| k).collect(), distortion);
        }
        for (k, c) in centroids.iter_mut().enumerate() {
            let (m, cnt) = mean_of(data.iter().zip(&res).filter(|(_, r)| r.0 == k).map(|(x, _)| x), d);
            if cnt > 0 {
                *c = m;
            }
        }
    }
}

/// Offset along the principal axis of the members, scaled to `eps` standard
/// deviations. Falls back to `eps * |c|` when the members have no spread.
fn split_offset(c: &[f64], members: &[&Vec<f64>], eps: f64) -> Vec<f64> {
    let d = c.len();
    if members.len() > 1 {
        let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
        for x in members {
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += (x[i] - c[i]) * (x[j] - c[j]);
                }
            }
        }
        cov /= members.len() as f64;
        let eig = cov.symmetric_eigen();
        let (top, lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(top);
            return v.iter().map(|x| eps * lambda.sqrt() * x).collect();
        }
    }
    c.iter().map(|v| eps * v.abs()).collect()
}

/// Split-and-refine codebook design.
///
/// Starts from the global mean and doubles the codebook until it has `size`
/// centroids, refining with Lloyd iterations after every split. Each centroid
/// splits into `c + delta` and `c - delta`, `delta` pointing along the
/// principal axis of its members with length `split_eps` standard deviations.
pub fn lbg(data: &[Vec<f64>], size: usize, opts: &LbgOptions) -> Result<Codebook> {
    let d = validate(data)?;
    if size == 0 || !size.is_power_of_two() {
        return Err(invalid(format!("codebook size {size} is not a power of two")));
    }
    if data.len() < size {
        return Err(Error::Data(format!(
            "{} training vectors cannot fill {size} codewords",
            data.len()
        )));
    }

    let (mean, _) = mean_of(data.iter(), d);
    let mut centroids = vec![mean];
    let mut assignments = vec![0; data.len()];
    let mut distortion = data.iter().map(|x| sq_dist(x, &centroids[0])).sum::<f64>() / data.len() as f64;
    let mut trace = vec![distortion];

    while centroids.len() < size {
        let mut split = Vec::with_capacity(centroids.len() * 2);
        for (k, c) in centroids.iter().enumerate() {
            let members: Vec<&Vec<f64>> = data
                .iter()
                .zip(&assignments)
                .filter(|(_, a)| **a == k)
                .map(|(x, _)| x)
                .collect();
            let delta = split_offset(c, &members, opts.split_eps);
            split.push(c.iter().zip(&delta).map(|(v, e)| v + e).collect());
            split.push(c.iter().zip(&delta).map(|(v, e)| v - e).collect());
        }
        centroids = split;
        trace.clear();
        let (a, dist) = lloyd(data, &mut centroids, opts, &mut trace);
        assignments = a;
        distortion = dist;
    }

    Ok(Codebook { centroids, assignments, distortion, trace })
}

/// Hidden-state initialization from an LBG codebook.
///
/// Runs LBG to the smallest power of two at or above `n_states`, then merges
/// the pair of clusters with the smallest Ward cost until `n_states` remain.
/// Each state gets the maximum-likelihood mean and covariance of its members,
/// split at `speech_dim` into speech and motion blocks. Clusters with too few
/// members for a full covariance borrow the global covariance.
pub fn init_states(
    joint: &[Vec<f64>],
    n_states: usize,
    speech_dim: usize,
    opts: &LbgOptions,
) -> Result<Vec<GaussianState>> {
    let d = validate(joint)?;
    if n_states == 0 {
        return Err(invalid("state count must be positive"));
    }
    if speech_dim == 0 || speech_dim >= d {
        return Err(invalid(format!("speech dimension {speech_dim} does not split width {d}")));
    }
    if joint.len() < MIN_FRAMES_PER_STATE * n_states {
        return Err(Error::Data(format!(
            "{} frames are not enough for {n_states} states (need {})",
            joint.len(),
            MIN_FRAMES_PER_STATE * n_states
        )));
    }

    let book = lbg(joint, n_states.next_power_of_two(), opts)?;
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); book.centroids.len()];
    for (i, &k) in book.assignments.iter().enumerate() {
        clusters[k].push(i);
    }
    clusters.retain(|c| !c.is_empty());
    while clusters.len() < n_states {
        // only reachable with duplicated points; split the largest cluster
        let big = (0..clusters.len()).max_by_key(|&k| clusters[k].len()).unwrap();
        let half = clusters[big].len() / 2;
        let tail = clusters[big].split_off(half);
        clusters.push(tail);
    }

    let centroid = |members: &[usize]| mean_of(members.iter().map(|&i| &joint[i]), d).0;
    while clusters.len() > n_states {
        let means: Vec<Vec<f64>> = clusters.iter().map(|c| centroid(c)).collect();
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let na = clusters[a].len() as f64;
                let nb = clusters[b].len() as f64;
                let cost = na * nb / (na + nb) * sq_dist(&means[a], &means[b]);
                if cost < best.2 {
                    best = (a, b, cost);
                }
            }
        }
        let moved = clusters.remove(best.1);
        clusters[best.0].extend(moved);
    }

    let global: Vec<usize> = (0..joint.len()).collect();
    let global_state = state_from_members(joint, &global, speech_dim, None)?;
    clusters
        .iter()
        .map(|members| state_from_members(joint, members, speech_dim, Some(&global_state)))
        .collect()
}

fn state_from_members(
    joint: &[Vec<f64>],
    members: &[usize],
    speech_dim: usize,
    fallback: Option<&GaussianState>,
) -> Result<GaussianState> {
    let d = joint[0].len();
    let fit = |range: std::ops::Range<usize>| {
        let rows: Vec<Vec<f64>> = members.iter().map(|&i| joint[i][range.clone()].to_vec()).collect();
        GaussianParams::fit(&rows)
    };
    let speech = fit(0..speech_dim)?;
    let motion = fit(speech_dim..d)?;
    match fallback {
        Some(g) if members.len() <= d => Ok(GaussianState {
            speech: GaussianParams::new(speech.mean().clone(), g.speech.cov().clone())?,
            motion: GaussianParams::new(motion.mean().clone(), g.motion.cov().clone())?,
        }),
        _ => Ok(GaussianState { speech, motion }),
    }
}

/// Flat-start baseline: every state gets the global covariance and a mean
/// jittered around the global mean by a tenth of the per-dimension spread.
pub fn random_init_states(
    joint: &[Vec<f64>],
    n_states: usize,
    speech_dim: usize,
    seed: u64,
) -> Result<Vec<GaussianState>> {
    let d = validate(joint)?;
    if n_states == 0 || speech_dim == 0 || speech_dim >= d {
        return Err(invalid("invalid state count or speech dimension"));
    }
    let all: Vec<usize> = (0..joint.len()).collect();
    let global = state_from_members(joint, &all, speech_dim, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |g: &GaussianParams, rng: &mut ChaCha8Rng| {
        let mean = g.mean().map(|v| v) + nalgebra::DVector::from_fn(g.dim(), |j, _| {
            0.1 * g.cov()[(j, j)].sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        GaussianParams::new(mean, g.cov().clone())
    };
    (0..n_states)
        .map(|_| {
            Ok(GaussianState {
                speech: jitter(&global.speech, &mut rng)?,
                motion: jitter(&global.motion, &mut rng)?,
            })
        })
        .collect()
}
