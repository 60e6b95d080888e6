//! Constrained network: a discrete constraint parent over the hidden state.
//!
//! Each constraint `k` owns a transition matrix `a[k][i][j]`, used for the step
//! into a frame labelled `k`, and a state prior. Training builds `N` states per
//! constraint, merges states whose symmetrized KL divergence falls under a
//! threshold into shared states, appends one global state reachable from every
//! constraint, and restricts each constraint's transitions to its own support.
//! A row outside the support of `k` hops to the global state, so a constraint
//! switch in the middle of a turn always has a feasible path.

use serde::{Deserialize, Serialize};

use crate::dbn::{self, check_simplex, check_states, DbnModel, GaussianState, ObservedSeq};
use crate::error::{invalid, Error, Result};
use crate::inference::{self, Chain, EmOptions, EmParams, EmSeq, GammaMatrix, GammaMode, LogParams};
use crate::statmath::{GaussianParams, TransitionMatrix};
use crate::vq::{self, LbgOptions, MIN_FRAMES_PER_STATE};

/// Label used for frames without an explicit constraint.
pub const OTHER: &str = "other";

/// Divergence under which two states are merged.
pub const DEFAULT_MERGE_THRESHOLD: f64 = 1.0;

/// Ordered, unique constraint labels; always contains [`OTHER`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ConstraintSet {
    labels: Vec<String>,
}

impl ConstraintSet {
    /// Builds a set from `labels`, appending [`OTHER`] when it is missing.
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut out: Vec<String> = Vec::new();
        for l in labels {
            let l = l.into();
            if l.is_empty() || l.contains(|c: char| c.is_whitespace() || c == ',') {
                return Err(invalid(format!("invalid constraint label `{l}`")));
            }
            if out.contains(&l) {
                return Err(invalid(format!("duplicate constraint label `{l}`")));
            }
            out.push(l);
        }
        if !out.iter().any(|l| l == OTHER) {
            out.push(OTHER.to_string());
        }
        Ok(Self { labels: out })
    }

    /// The degenerate set holding only [`OTHER`].
    pub fn other_only() -> Self {
        Self { labels: vec![OTHER.to_string()] }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| invalid(format!("unknown constraint label `{label}`")))
    }

    pub fn other_index(&self) -> usize {
        self.index_of(OTHER).expect("set always holds `other`")
    }

    pub fn encode<S: AsRef<str>>(&self, track: &[S]) -> Result<Vec<usize>> {
        track.iter().map(|l| self.index_of(l.as_ref())).collect()
    }
}

impl TryFrom<Vec<String>> for ConstraintSet {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        let set = ConstraintSet::new(v.clone())?;
        if set.labels != v {
            return Err(Error::Format("constraint set must list `other` explicitly".into()));
        }
        Ok(set)
    }
}

impl From<ConstraintSet> for Vec<String> {
    fn from(c: ConstraintSet) -> Self {
        c.labels
    }
}

/// Allowed states per constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportMask {
    sets: Vec<Vec<usize>>,
    global: usize,
    n_states: usize,
}

impl SupportMask {
    pub fn new(mut sets: Vec<Vec<usize>>, global: usize, n_states: usize) -> Result<Self> {
        if sets.is_empty() {
            return Err(invalid("support mask needs at least one constraint"));
        }
        if global >= n_states {
            return Err(invalid("global state index out of range"));
        }
        let mut covered = vec![false; n_states];
        for (k, s) in sets.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(invalid(format!("support of constraint {k} is empty")));
            }
            if s.last().is_some_and(|&i| i >= n_states) {
                return Err(invalid(format!("support of constraint {k} names a missing state")));
            }
            if s.binary_search(&global).is_err() {
                return Err(invalid(format!("global state missing from support of constraint {k}")));
            }
            for &i in s.iter() {
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(invalid(format!("state {i} belongs to no constraint")));
        }
        Ok(Self { sets, global, n_states })
    }

    /// Every state allowed under all `k` constraints.
    pub fn full(k: usize, n_states: usize, global: usize) -> Result<Self> {
        Self::new(vec![(0..n_states).collect(); k], global, n_states)
    }

    pub fn support(&self, k: usize) -> &[usize] {
        &self.sets[k]
    }

    pub fn contains(&self, k: usize, i: usize) -> bool {
        self.sets[k].binary_search(&i).is_ok()
    }

    pub fn global(&self) -> usize {
        self.global
    }

    pub fn n_constraints(&self) -> usize {
        self.sets.len()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCdbnModel")]
pub struct CdbnModel {
    constraints: ConstraintSet,
    states: Vec<GaussianState>,
    trans: Vec<TransitionMatrix>,
    priors: Vec<Vec<f64>>,
    mask: SupportMask,
    constraint_prior: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCdbnModel {
    constraints: ConstraintSet,
    states: Vec<GaussianState>,
    trans: Vec<TransitionMatrix>,
    priors: Vec<Vec<f64>>,
    mask: SupportMask,
    constraint_prior: Vec<f64>,
}

impl TryFrom<RawCdbnModel> for CdbnModel {
    type Error = Error;

    fn try_from(r: RawCdbnModel) -> Result<Self> {
        let mask = SupportMask::new(r.mask.sets, r.mask.global, r.mask.n_states)?;
        Self::new(r.constraints, r.states, r.trans, r.priors, mask, r.constraint_prior)
    }
}

impl CdbnModel {
    pub fn new(
        constraints: ConstraintSet,
        states: Vec<GaussianState>,
        trans: Vec<TransitionMatrix>,
        priors: Vec<Vec<f64>>,
        mask: SupportMask,
        constraint_prior: Vec<f64>,
    ) -> Result<Self> {
        check_states(&states)?;
        let k = constraints.len();
        let m = states.len();
        if trans.len() != k || priors.len() != k || mask.n_constraints() != k {
            return Err(invalid(format!("expected per-constraint parameters for {k} constraints")));
        }
        if mask.n_states() != m {
            return Err(invalid("support mask and state list disagree"));
        }
        check_simplex(&constraint_prior, k, "constraint prior")?;
        for c in 0..k {
            let t = &trans[c];
            if t.size() != m {
                return Err(invalid(format!("transition matrix {c} has the wrong size")));
            }
            check_simplex(&priors[c], m, "state prior")?;
            for j in 0..m {
                if mask.contains(c, j) {
                    continue;
                }
                if priors[c][j] != 0.0 {
                    return Err(invalid(format!("prior of constraint {c} is non-zero off support at state {j}")));
                }
                if (0..m).any(|i| t.get(i, j) != 0.0) {
                    return Err(invalid(format!(
                        "constraint {c} allows a transition into state {j} outside its support"
                    )));
                }
            }
        }
        Ok(Self { constraints, states, trans, priors, mask, constraint_prior })
    }

    /// One-constraint model with the same parameters as a baseline model.
    pub fn from_baseline(model: &DbnModel) -> Result<Self> {
        let n = model.n_states();
        Self::new(
            ConstraintSet::other_only(),
            model.states().to_vec(),
            vec![model.trans().clone()],
            vec![model.prior().to_vec()],
            SupportMask::full(1, n, n - 1)?,
            vec![1.0],
        )
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn states(&self) -> &[GaussianState] {
        &self.states
    }

    pub fn trans(&self, k: usize) -> &TransitionMatrix {
        &self.trans[k]
    }

    pub fn prior(&self, k: usize) -> &[f64] {
        &self.priors[k]
    }

    pub fn mask(&self) -> &SupportMask {
        &self.mask
    }

    pub fn constraint_prior(&self) -> &[f64] {
        &self.constraint_prior
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn speech_dim(&self) -> usize {
        self.states[0].speech_dim()
    }

    pub fn motion_dim(&self) -> usize {
        self.states[0].motion_dim()
    }

    fn log_params(&self) -> LogParams {
        LogParams::new(&self.trans, &self.priors)
    }

    fn check_track(&self, speech: &[Vec<f64>], track: &[usize]) -> Result<()> {
        if speech.is_empty() {
            return Err(invalid("empty speech sequence"));
        }
        if track.len() != speech.len() {
            return Err(invalid(format!(
                "constraint track has {} frames, speech has {}",
                track.len(),
                speech.len()
            )));
        }
        if let Some(&bad) = track.iter().find(|&&c| c >= self.constraints.len()) {
            return Err(invalid(format!("constraint index {bad} is not in the model")));
        }
        Ok(())
    }

    /// State posteriors given speech and the constraint track.
    pub fn posterior_gamma(&self, speech: &[Vec<f64>], track: &[usize], mode: GammaMode) -> Result<GammaMatrix> {
        self.check_track(speech, track)?;
        let emit = inference::emission_matrix(&self.states, speech, None)?;
        let chain = Chain { log_emit: &emit, trans_idx: track, prior_idx: track[0] };
        inference::gamma(&self.log_params(), &chain, mode)
    }

    /// Expected motion given speech and the whole-turn constraint track.
    pub fn constrained_synthesize(&self, speech: &[Vec<f64>], track: &[usize], mode: GammaMode) -> Result<Vec<Vec<f64>>> {
        let gamma = self.posterior_gamma(speech, track, mode)?;
        let means: Vec<&[f64]> = self.states.iter().map(|s| s.motion.mean().as_slice()).collect();
        Ok(gamma.expected(&means))
    }

    /// As [`constrained_synthesize`](Self::constrained_synthesize) with a
    /// track of label names.
    pub fn synthesize_labels<S: AsRef<str>>(&self, speech: &[Vec<f64>], track: &[S], mode: GammaMode) -> Result<Vec<Vec<f64>>> {
        let track = self.constraints.encode(track)?;
        self.constrained_synthesize(speech, &track, mode)
    }

    /// Log evidence of a sequence; motion is included when given.
    pub fn log_evidence(&self, speech: &[Vec<f64>], motion: Option<&[Vec<f64>]>, track: &[usize]) -> Result<f64> {
        self.check_track(speech, track)?;
        let emit = inference::emission_matrix(&self.states, speech, motion)?;
        let chain = Chain { log_emit: &emit, trans_idx: track, prior_idx: track[0] };
        Ok(inference::forward(&self.log_params(), &chain)?.1)
    }

    /// Log-likelihood rate over labelled sequences with full observation.
    pub fn loglik_rate(&self, seqs: &[LabeledSeq<'_>]) -> Result<f64> {
        if seqs.is_empty() {
            return Err(invalid("no sequences to score"));
        }
        let mut total = 0.0;
        let mut frames = 0;
        for s in seqs {
            total += self.log_evidence(s.speech, Some(s.motion), s.labels)?;
            frames += s.speech.len();
        }
        Ok(total / frames as f64)
    }
}

/// A sequence with a per-frame constraint index.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSeq<'a> {
    pub speech: &'a [Vec<f64>],
    pub motion: &'a [Vec<f64>],
    pub labels: &'a [usize],
}

impl<'a> LabeledSeq<'a> {
    pub fn observed(&self) -> ObservedSeq<'a> {
        ObservedSeq { speech: self.speech, motion: self.motion }
    }
}

/// Training knobs for the constrained model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdbnTrainOptions {
    pub lbg: LbgOptions,
    /// EM used to refine each constraint's own states.
    pub per_constraint_em: EmOptions,
    /// EM over the merged model.
    pub em: EmOptions,
    pub merge_threshold: f64,
}

impl Default for CdbnTrainOptions {
    fn default() -> Self {
        Self {
            lbg: LbgOptions::default(),
            per_constraint_em: EmOptions::default(),
            em: EmOptions::default(),
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
        }
    }
}

/// States trained on the frames of a single constraint.
#[derive(Debug, Clone)]
pub struct ConstraintStates {
    pub label: String,
    pub states: Vec<GaussianState>,
    /// Posterior occupancy of each state on that constraint's frames.
    pub occupancy: Vec<f64>,
}

/// Contiguous runs of frames labelled `k`.
fn segments<'a>(seqs: &[LabeledSeq<'a>], k: usize) -> Vec<ObservedSeq<'a>> {
    let mut out = Vec::new();
    for s in seqs {
        let mut t = 0;
        while t < s.labels.len() {
            if s.labels[t] != k {
                t += 1;
                continue;
            }
            let start = t;
            while t < s.labels.len() && s.labels[t] == k {
                t += 1;
            }
            out.push(ObservedSeq { speech: &s.speech[start..t], motion: &s.motion[start..t] });
        }
    }
    out
}

fn check_labeled(seqs: &[LabeledSeq<'_>], k: usize) -> Result<()> {
    if seqs.is_empty() {
        return Err(invalid("no training sequences"));
    }
    for (n, s) in seqs.iter().enumerate() {
        if s.speech.len() != s.motion.len() || s.speech.len() != s.labels.len() {
            return Err(invalid(format!("sequence {n} has mismatched stream lengths")));
        }
        if s.speech.is_empty() {
            return Err(invalid(format!("sequence {n} is empty")));
        }
        if s.labels.iter().any(|&c| c >= k) {
            return Err(invalid(format!("sequence {n} uses an unknown constraint index")));
        }
    }
    Ok(())
}

/// Trains `n` states per constraint on that constraint's segments: LBG
/// initialization followed by EM restricted to the labelled segments.
///
/// A constraint with fewer than `10 * n` frames gets `frames / 10` states.
pub fn train_per_constraint_states(
    seqs: &[LabeledSeq<'_>],
    constraints: &ConstraintSet,
    n: usize,
    opts: &CdbnTrainOptions,
) -> Result<Vec<ConstraintStates>> {
    if n == 0 {
        return Err(invalid("states per constraint must be positive"));
    }
    check_labeled(seqs, constraints.len())?;
    (0..constraints.len())
        .map(|k| {
            let label = constraints.label(k);
            let segs = segments(seqs, k);
            let frames: usize = segs.iter().map(|s| s.speech.len()).sum();
            if frames < MIN_FRAMES_PER_STATE {
                return Err(Error::Data(format!(
                    "constraint `{label}` has {frames} frames; at least {MIN_FRAMES_PER_STATE} are needed"
                )));
            }
            let mut nk = n;
            if frames < MIN_FRAMES_PER_STATE * n {
                nk = frames / MIN_FRAMES_PER_STATE;
                log::warn!("constraint `{label}` has {frames} frames; using {nk} states instead of {n}");
            }
            let (model, _) = dbn::train_baseline(&segs, nk, &opts.lbg, &opts.per_constraint_em)?;
            let occupancy = model.occupancy(&segs)?;
            Ok(ConstraintStates { label: label.to_string(), states: model.states().to_vec(), occupancy })
        })
        .collect()
}

fn pooled_state(parts: &[(&GaussianState, f64)]) -> Result<GaussianState> {
    let speech: Vec<(&GaussianParams, f64)> = parts.iter().map(|(s, w)| (&s.speech, *w)).collect();
    let motion: Vec<(&GaussianParams, f64)> = parts.iter().map(|(s, w)| (&s.motion, *w)).collect();
    Ok(GaussianState { speech: GaussianParams::pooled(&speech)?, motion: GaussianParams::pooled(&motion)? })
}

/// Result of [`merge_states`].
#[derive(Debug, Clone)]
pub struct MergedStates {
    pub states: Vec<GaussianState>,
    pub mask: SupportMask,
    pub occupancy: Vec<f64>,
    /// Number of pairwise merges performed.
    pub merges: usize,
}

struct Entry {
    state: GaussianState,
    owners: Vec<usize>,
    occupancy: f64,
}

/// Merges per-constraint states into shared and exclusive states.
///
/// Constraints are visited in label order. For every state of constraint `k`
/// the closest state (symmetrized KL over speech and motion) among states
/// owned by some other constraint is found; below `threshold` the two are
/// replaced by their occupancy-weighted moment match, owned by both. Ties go
/// to the earliest state. Finally `global` is appended and added to every
/// support.
pub fn merge_states(per: &[ConstraintStates], threshold: f64, global: GaussianState) -> Result<MergedStates> {
    if !(threshold > 0.0) {
        return Err(invalid("merge threshold must be positive"));
    }
    if per.is_empty() || per.iter().any(|c| c.states.is_empty() || c.states.len() != c.occupancy.len()) {
        return Err(invalid("every constraint needs at least one state with an occupancy"));
    }
    let mut entries: Vec<Option<Entry>> = Vec::new();
    let mut home: Vec<Vec<usize>> = Vec::new();
    for (k, c) in per.iter().enumerate() {
        let mut ids = Vec::new();
        for (s, &o) in c.states.iter().zip(&c.occupancy) {
            ids.push(entries.len());
            entries.push(Some(Entry { state: s.clone(), owners: vec![k], occupancy: o.max(1e-12) }));
        }
        home.push(ids);
    }
    // `alias[e]` follows merged entries to their survivor
    let mut alias: Vec<usize> = (0..entries.len()).collect();
    let resolve = |alias: &Vec<usize>, mut e: usize| {
        while alias[e] != e {
            e = alias[e];
        }
        e
    };

    let mut merges = 0;
    for (k, ids) in home.iter().enumerate() {
        for &id in ids {
            let cur = resolve(&alias, id);
            let mut best: Option<(usize, f64)> = None;
            for (e, slot) in entries.iter().enumerate() {
                let Some(entry) = slot else { continue };
                if e == cur || !entry.owners.iter().any(|&o| o != k) {
                    continue;
                }
                let d = entries[cur].as_ref().expect("live entry").state.sym_kl(&entry.state)?;
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((e, d));
                }
            }
            let Some((other, d)) = best else { continue };
            if d >= threshold {
                continue;
            }
            let (keep, gone) = if cur < other { (cur, other) } else { (other, cur) };
            let b = entries[gone].take().expect("live entry");
            let a = entries[keep].as_mut().expect("live entry");
            a.state = pooled_state(&[(&a.state, a.occupancy), (&b.state, b.occupancy)])?;
            a.occupancy += b.occupancy;
            for o in b.owners {
                if !a.owners.contains(&o) {
                    a.owners.push(o);
                }
            }
            alias[gone] = keep;
            merges += 1;
        }
    }

    let mut states = Vec::new();
    let mut occupancy = Vec::new();
    let mut sets = vec![Vec::new(); per.len()];
    for entry in entries.into_iter().flatten() {
        let idx = states.len();
        for &o in &entry.owners {
            sets[o].push(idx);
        }
        states.push(entry.state);
        occupancy.push(entry.occupancy);
    }
    let global_idx = states.len();
    let total: f64 = occupancy.iter().sum();
    states.push(global);
    occupancy.push(total);
    for s in &mut sets {
        s.push(global_idx);
    }
    let mask = SupportMask::new(sets, global_idx, states.len())?;
    Ok(MergedStates { states, mask, occupancy, merges })
}

/// Per-constraint transitions and priors, uniform over each support. Rows of
/// states outside a constraint's support move to the global state with
/// probability one. The constraint prior follows the label frequencies.
pub fn build_sparse_transitions(
    mask: &SupportMask,
    label_counts: &[usize],
) -> Result<(Vec<TransitionMatrix>, Vec<Vec<f64>>, Vec<f64>)> {
    let k = mask.n_constraints();
    let m = mask.n_states();
    if label_counts.len() != k {
        return Err(invalid("one frame count per constraint is required"));
    }
    let mut trans = Vec::with_capacity(k);
    let mut priors = Vec::with_capacity(k);
    for c in 0..k {
        let support = mask.support(c);
        let w = 1.0 / support.len() as f64;
        let mut uniform = vec![0.0; m];
        for &j in support {
            uniform[j] = w;
        }
        let mut data = Vec::with_capacity(m * m);
        for i in 0..m {
            if mask.contains(c, i) {
                data.extend_from_slice(&uniform);
            } else {
                let mut row = vec![0.0; m];
                row[mask.global()] = 1.0;
                data.extend(row);
            }
        }
        trans.push(TransitionMatrix::new(m, data)?);
        priors.push(uniform);
    }
    let total: usize = label_counts.iter().sum();
    let constraint_prior = if total == 0 {
        vec![1.0 / k as f64; k]
    } else {
        label_counts.iter().map(|&c| c as f64 / total as f64).collect()
    };
    Ok((trans, priors, constraint_prior))
}

/// EM over labelled sequences. The step into frame `t` uses the matrix of
/// constraint `c_t`, the first frame uses the prior of `c_1`. Each matrix is
/// re-estimated from the transitions observed under its constraint; the
/// Gaussians are shared by all constraints and pooled.
pub fn constrained_em(model: &CdbnModel, seqs: &[LabeledSeq<'_>], opts: &EmOptions) -> Result<(CdbnModel, Vec<f64>)> {
    check_labeled(seqs, model.constraints.len())?;
    let em_seqs: Vec<EmSeq<'_>> = seqs
        .iter()
        .map(|s| EmSeq { speech: s.speech, motion: s.motion, trans_idx: s.labels.to_vec(), prior_idx: s.labels[0] })
        .collect();
    let init = EmParams { states: model.states.clone(), trans: model.trans.clone(), priors: model.priors.clone() };
    let (p, history) = inference::run_em(init, &em_seqs, opts)?;
    let out = CdbnModel::new(
        model.constraints.clone(),
        p.states,
        p.trans,
        p.priors,
        model.mask.clone(),
        model.constraint_prior.clone(),
    )
    .map_err(|e| Error::Numeric(format!("EM produced an invalid model: {e}")))?;
    Ok((out, history))
}

fn label_counts(seqs: &[LabeledSeq<'_>], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for s in seqs {
        for &c in s.labels {
            counts[c] += 1;
        }
    }
    counts
}

/// Full sparse training: per-constraint states, merging, sparse transitions
/// and constrained EM.
pub fn train_cdbn(
    seqs: &[LabeledSeq<'_>],
    constraints: &ConstraintSet,
    n_per_constraint: usize,
    opts: &CdbnTrainOptions,
) -> Result<(CdbnModel, Vec<f64>)> {
    let per = train_per_constraint_states(seqs, constraints, n_per_constraint, opts)?;
    let observed: Vec<ObservedSeq<'_>> = seqs.iter().map(LabeledSeq::observed).collect();
    let joint = dbn::joint_frames(&observed)?;
    let ds = seqs[0].speech[0].len();
    let global = vq::init_states(&joint, 1, ds, &opts.lbg)?.remove(0);
    let merged = merge_states(&per, opts.merge_threshold, global)?;
    log::info!(
        "merged {} per-constraint states into {} ({} merges)",
        per.iter().map(|c| c.states.len()).sum::<usize>(),
        merged.states.len(),
        merged.merges
    );
    let (trans, priors, cprior) = build_sparse_transitions(&merged.mask, &label_counts(seqs, constraints.len()))?;
    let init = CdbnModel::new(constraints.clone(), merged.states, trans, priors, merged.mask, cprior)?;
    constrained_em(&init, seqs, &opts.em)
}

/// Ablation without sparse structure: `n` states initialized on all frames
/// and shared by every constraint, each constraint keeping its own full
/// transition matrix.
pub fn train_shared(
    seqs: &[LabeledSeq<'_>],
    constraints: &ConstraintSet,
    n: usize,
    opts: &CdbnTrainOptions,
) -> Result<(CdbnModel, Vec<f64>)> {
    check_labeled(seqs, constraints.len())?;
    let observed: Vec<ObservedSeq<'_>> = seqs.iter().map(LabeledSeq::observed).collect();
    let joint = dbn::joint_frames(&observed)?;
    let ds = seqs[0].speech[0].len();
    let states = vq::init_states(&joint, n, ds, &opts.lbg)?;
    let mask = SupportMask::full(constraints.len(), n, n - 1)?;
    let (trans, priors, cprior) = build_sparse_transitions(&mask, &label_counts(seqs, constraints.len()))?;
    let init = CdbnModel::new(constraints.clone(), states, trans, priors, mask, cprior)?;
    constrained_em(&init, seqs, &opts.em)
}
