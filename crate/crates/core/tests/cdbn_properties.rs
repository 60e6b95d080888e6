mod common;

use common::*;
use gesture_dbn::cdbn::*;
use gesture_dbn::dbn::em_train;
use gesture_dbn::inference::{EmOptions, GammaMode};
use gesture_dbn::statmath::{linf_distance, TransitionMatrix};
use rand::Rng;

/// States 0 and 1 belong to `a` and `other` respectively; state 2 is global.
fn generating_model() -> CdbnModel {
    let states = vec![
        spaced_state(&[3.0, 0.0], &[3.0], 0.5),
        spaced_state(&[-3.0, 0.0], &[-3.0], 0.5),
        spaced_state(&[0.0, 3.0], &[0.0], 0.5),
    ];
    let a = TransitionMatrix::from_rows(&[vec![0.9, 0.0, 0.1], vec![0.0, 0.0, 1.0], vec![0.3, 0.0, 0.7]]).unwrap();
    let o = TransitionMatrix::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.6, 0.4], vec![0.0, 0.5, 0.5]]).unwrap();
    CdbnModel::new(
        ConstraintSet::new(["a"]).unwrap(),
        states,
        vec![a, o],
        vec![vec![0.5, 0.0, 0.5], vec![0.0, 0.5, 0.5]],
        SupportMask::new(vec![vec![0, 2], vec![1, 2]], 2, 3).unwrap(),
        vec![0.5, 0.5],
    )
    .unwrap()
}

fn sample_corpus(model: &CdbnModel, seed: u64, n: usize, len: usize) -> Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>)> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let track = block_track(&mut r, len, 2);
            let (s, m) = sample_cdbn(&mut r, model, &track);
            (s, m, track)
        })
        .collect()
}

fn labeled(data: &[(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>)]) -> Vec<LabeledSeq<'_>> {
    data.iter().map(|(s, m, t)| LabeledSeq { speech: s, motion: m, labels: t }).collect()
}

#[test]
fn generate_then_fit_recovers_the_transition_contrast() {
    let truth = generating_model();
    let data = sample_corpus(&truth, 11, 40, 300);
    let seqs = labeled(&data);
    let mut r = rng(12);
    let states: Vec<_> = truth
        .states()
        .iter()
        .map(|s| {
            let sm: Vec<f64> = s.speech.mean().iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
            let mm: Vec<f64> = s.motion.mean().iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
            spaced_state(&sm, &mm, 1.0)
        })
        .collect();
    let (trans, priors, cprior) = build_sparse_transitions(truth.mask(), &[1, 1]).unwrap();
    let init = CdbnModel::new(truth.constraints().clone(), states, trans, priors, truth.mask().clone(), cprior).unwrap();
    let (fit, _) = constrained_em(&init, &seqs, &EmOptions { max_iter: 100, ..Default::default() }).unwrap();
    let want = linf_distance(truth.trans(0), truth.trans(1)).unwrap();
    let got = linf_distance(fit.trans(0), fit.trans(1)).unwrap();
    assert!((want - got).abs() <= 0.1, "{got} vs {want}");
}

#[test]
fn structural_zeros_survive_em() {
    let truth = generating_model();
    let data = sample_corpus(&truth, 5, 10, 200);
    let seqs = labeled(&data);
    let (trans, priors, cprior) = build_sparse_transitions(truth.mask(), &[1, 1]).unwrap();
    let init = CdbnModel::new(
        truth.constraints().clone(),
        truth.states().to_vec(),
        trans,
        priors,
        truth.mask().clone(),
        cprior,
    )
    .unwrap();
    let opts = EmOptions { max_iter: 50, tol: f64::NEG_INFINITY, freeze_gaussians: false };
    let (fit, hist) = constrained_em(&init, &seqs, &opts).unwrap();
    assert!(hist.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    for k in 0..2 {
        for i in 0..3 {
            for j in 0..3 {
                if init.trans(k).get(i, j) == 0.0 {
                    assert_eq!(fit.trans(k).get(i, j), 0.0, "trans[{k}]({i},{j})");
                }
            }
            if init.prior(k)[i] == 0.0 {
                assert_eq!(fit.prior(k)[i], 0.0);
            }
        }
    }
}

#[test]
fn random_tracks_have_finite_evidence() {
    let truth = generating_model();
    let mut r = rng(31);
    for _ in 0..50 {
        let len = r.random_range(1..80);
        let track: Vec<usize> = (0..len).map(|_| r.random_range(0..2)).collect();
        let speech = normal_rows(&mut r, len, 2);
        let motion = normal_rows(&mut r, len, 1);
        assert!(truth.log_evidence(&speech, None, &track).unwrap().is_finite());
        assert!(truth.log_evidence(&speech, Some(&motion), &track).unwrap().is_finite());
        let out = truth.constrained_synthesize(&speech, &track, GammaMode::Viterbi).unwrap();
        assert!(out.iter().flatten().all(|v| v.is_finite()));
    }
}

#[test]
fn single_constraint_model_reduces_to_the_baseline() {
    let mut r = rng(2);
    let base = random_dbn(&mut r, 3, 2, 2);
    let data: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..4).map(|_| (normal_rows(&mut r, 60, 2), normal_rows(&mut r, 60, 2))).collect();
    let tracks: Vec<Vec<usize>> = data.iter().map(|(s, _)| vec![0; s.len()]).collect();
    let lab: Vec<LabeledSeq> = data.iter().zip(&tracks).map(|((s, m), t)| LabeledSeq { speech: s, motion: m, labels: t }).collect();
    let obs: Vec<_> = lab.iter().map(LabeledSeq::observed).collect();
    let opts = EmOptions { max_iter: 5, tol: f64::NEG_INFINITY, freeze_gaussians: false };
    let (b, hb) = em_train(&base, &obs, &opts).unwrap();
    let (c, hc) = constrained_em(&CdbnModel::from_baseline(&base).unwrap(), &lab, &opts).unwrap();
    assert_eq!(hb, hc);
    assert_eq!(b.trans(), c.trans(0));
    let probe = &data[0].0;
    let gb = b.posterior_gamma(probe, GammaMode::Smoothed).unwrap();
    let gc = c.posterior_gamma(probe, &tracks[0], GammaMode::Smoothed).unwrap();
    assert_eq!(gb.as_slice(), gc.as_slice());
}

#[test]
fn merging_identical_constraints_leaves_one_shared_state() {
    let s = spaced_state(&[0.0], &[0.0], 1.0);
    let per: Vec<ConstraintStates> = ["a", "b", "other"]
        .iter()
        .map(|l| ConstraintStates { label: l.to_string(), states: vec![s.clone()], occupancy: vec![10.0] })
        .collect();
    let merged = merge_states(&per, DEFAULT_MERGE_THRESHOLD, s.clone()).unwrap();
    assert_eq!(merged.states.len(), 2);
    for k in 0..3 {
        assert_eq!(merged.mask.support(k), &[0, 1]);
    }
}
