mod common;

use common::*;
use gesture_dbn::eval::{cca_m, cca_spectrum, kld_metric};
use gesture_dbn::statmath::*;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn kl_matches_monte_carlo() {
    let mut r = rng(21);
    for case in 0..20 {
        let d = 1 + case % 3;
        let p = random_gaussian(&mut r, d, 0.5);
        let q = random_gaussian(&mut r, d, 0.5);
        let exact = kl_gaussian(&p, &q).unwrap();
        let mc = mc_kl(&mut r, &p, &q, 2_000_000);
        assert!((exact - mc).abs() <= 1e-2, "case {case}: {exact} vs {mc}");
    }
}

#[test]
fn logpdf_integrates_to_one_in_one_dimension() {
    let g = GaussianParams::from_slices(&[0.7], &[2.5]).unwrap();
    let h = 1e-3;
    let total: f64 = (-20_000..20_000).map(|i| g.logpdf(&[0.7 + i as f64 * h]).exp() * h).sum();
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn cca_is_affine_invariant() {
    let mut r = rng(4);
    let x = normal_rows(&mut r, 300, 3);
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|v| vec![v[0] + 0.5 * r.sample::<f64, _>(StandardNormal), v[1] - v[2] + r.sample::<f64, _>(StandardNormal)])
        .collect();
    let base = cca_spectrum(&x, &y).unwrap();
    let a = [[2.0, 0.3, -1.0], [0.0, 1.5, 0.2], [0.4, 0.0, -3.0]];
    let xa: Vec<Vec<f64>> = x
        .iter()
        .map(|v| (0..3).map(|j| (0..3).map(|k| v[k] * a[k][j]).sum::<f64>() + 7.0).collect())
        .collect();
    let moved = cca_spectrum(&xa, &y).unwrap();
    for (p, q) in base.iter().zip(&moved) {
        assert!((p - q).abs() <= 1e-6);
    }
    assert!((cca_m(&x, &x).unwrap() - 1.0).abs() <= 1e-6);
    assert!((cca_m(&x, &xa).unwrap() - 1.0).abs() <= 1e-6);
}

#[test]
fn kld_metric_is_zero_for_identical_samples() {
    let mut r = rng(9);
    let x = normal_rows(&mut r, 200, 3);
    assert!(kld_metric(&x, &x).unwrap().abs() <= 1e-9);
    let shifted: Vec<Vec<f64>> = x.iter().map(|v| v.iter().map(|a| a + 1.0).collect()).collect();
    assert!(kld_metric(&x, &shifted).unwrap() > 0.1);
}

#[test]
fn kruskal_wallis_is_calibrated_under_the_null() {
    let mut r = rng(100);
    let trials = 1000;
    let rejected = (0..trials)
        .filter(|_| {
            let groups: Vec<Vec<f64>> = (0..3).map(|_| (0..100).map(|_| r.sample(StandardNormal)).collect()).collect();
            kruskal_wallis(&groups).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / trials as f64;
    assert!((0.03..=0.07).contains(&rate), "{rate}");
}

#[test]
fn kruskal_wallis_small_case_by_hand() {
    // ranks 1..6, mean ranks 2 and 5: 12/42 * (3*4 + 3*25) - 21
    let kw = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
    let h = 12.0 / 42.0 * (3.0 * 4.0 + 3.0 * 25.0) - 21.0;
    assert!((kw.h - h).abs() < 1e-12);
    assert_eq!(kw.df, 1);
}
