use gesture_dbn_demo::{dtak_json, smooth_json, Demo};

#[test]
fn synthesis_follows_the_requested_constraint() {
    let demo = Demo::train(7).unwrap();
    let labels: Vec<String> = serde_json::from_str(&demo.labels()).unwrap();
    assert!(labels.iter().any(|l| l == "nod"));
    let nod = demo.synthesize_turn(0, "nod", 8.0).unwrap();
    let shake = demo.synthesize_turn(0, "shake", 8.0).unwrap();
    assert_eq!(nod.raw.len(), nod.frames);
    assert_eq!(nod.smooth.len(), nod.frames);
    for &k in &nod.keypoints {
        assert!(nod.raw[k].iter().zip(&nod.smooth[k]).all(|(a, b)| (a - b).abs() < 1e-6));
    }
    let energy = |rows: &[Vec<f64>], d: usize| rows.iter().map(|r| r[d] * r[d]).sum::<f64>();
    assert!(energy(&nod.raw, 0) > energy(&nod.raw, 1));
    assert!(energy(&shake.raw, 1) > energy(&shake.raw, 0));
    assert!(demo.synthesize_turn(0, "wave", 8.0).is_err());
    assert!(demo.synthesize_turn(0, "nod", 0.0).is_err());
}

#[test]
fn json_helpers_round_trip() {
    let traj: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64 * 0.3).sin() * 10.0, 0.0, 2.0]).collect();
    let text = serde_json::to_string(&traj).unwrap();
    let smooth: Vec<Vec<f64>> = serde_json::from_str(&smooth_json(&text, 10.0).unwrap()).unwrap();
    assert_eq!(smooth.len(), traj.len());
    assert_eq!(dtak_json(&text, &text, 5.0).unwrap(), 1.0);
    assert!(smooth_json("[[1,2]", 10.0).is_err());
    assert!(dtak_json("[]", &text, 5.0).is_err());
}
