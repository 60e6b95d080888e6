use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use gesture_dbn::cdbn::{self, CdbnTrainOptions, LabeledSeq, OTHER};
use gesture_dbn::corpus::{self, Dataset, ModelFile, SyntheticSpec, TenfoldSplits};
use gesture_dbn::dbn::{self, ObservedSeq};
use gesture_dbn::eval::{self, AxisTemplate, Detector, EvalTurn, OscillationAxisDetector, SweepModel, TemplateDetector};
use gesture_dbn::features::{Region, MODEL_FRAME_RATE, SPEECH_DIM};
use gesture_dbn::retrieval::{self, GestureModel, ScoredCandidate, Turn};
use gesture_dbn::smooth::{self, KeypointPlan};
use gesture_dbn::vq::LbgOptions;
use log::info;
use serde::Serialize;

use crate::config::{ConstraintMode, RunConfig};
use crate::exit::{data, usage, Context, Failure};

const SPEECH_COLUMNS: [&str; SPEECH_DIM] = ["f0", "energy", "d_f0", "d_energy", "dd_f0", "dd_energy"];

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let dir = cfg.dataset()?;
    let ds = corpus::load_dataset(dir).context(format!("loading {}", dir.display()))?;
    if let Some(r) = cfg.region {
        if r != ds.region {
            return Err(usage(format!("--region {r} does not match the {} dataset", ds.region)));
        }
    }
    if ds.turns.is_empty() {
        return Err(data(format!("{} has no turns", dir.display())));
    }
    Ok(ds)
}

fn load_model(cfg: &RunConfig) -> Result<ModelFile, Failure> {
    let path = cfg.model()?;
    let m = corpus::load_model(path).context(format!("loading {}", path.display()))?;
    if let Some(r) = cfg.region {
        if r != m.region() {
            return Err(usage(format!("--region {r} does not match the {} model", m.region())));
        }
    }
    Ok(m)
}

fn splits(cfg: &RunConfig, ds: &Dataset) -> Result<TenfoldSplits, Failure> {
    Ok(corpus::tenfold_splits(ds.turns.len(), cfg.seed)?)
}

fn check_fold(fold: usize) -> Result<usize, Failure> {
    if (1..corpus::FOLDS).contains(&fold) {
        Ok(fold - 1)
    } else {
        Err(usage(format!("fold must lie in 1..={}, got {fold}", corpus::FOLDS - 1)))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| data(e.to_string()))?;
    fs::write(path, text + "\n").context(format!("writing {}", path.display()))
}

pub fn gen_corpus(spec: Option<&Path>, preset: Option<&str>, turns: usize, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut spec = match (spec, preset) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).context(format!("reading {}", p.display()))?;
            if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", p.display())))?
            } else {
                toml::from_str::<SyntheticSpec>(&text).map_err(|e| data(format!("{}: {e}", p.display())))?
            }
        }
        (None, Some("head")) => SyntheticSpec::head_gestures(turns, 0),
        (None, Some(_)) => SyntheticSpec::hand_gestures(turns, 0),
        (None, None) => return Err(usage("give either --spec or --preset")),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (ds, _) = corpus::generate_synthetic(&spec)?;
    corpus::save_dataset(out, &ds).context(format!("writing {}", out.display()))?;
    let frames: usize = ds.turns.iter().map(|t| t.len()).sum();
    println!(
        "wrote {} {} turns ({frames} frames, {} subjects, constraints {}) to {}",
        ds.turns.len(),
        ds.region,
        ds.subjects.len(),
        ds.constraints.labels().join(","),
        out.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig, fold: Option<usize>, log_path: Option<&Path>) -> Result<(), Failure> {
    let model_path = cfg.model()?;
    let ds = load_dataset(cfg)?;
    let idx: Vec<usize> = match fold {
        Some(f) => splits(cfg, &ds)?.rounds().swap_remove(check_fold(f)?).train,
        None => (0..ds.turns.len()).collect(),
    };
    let em = cfg.em();
    let lbg = LbgOptions::default();
    let (file, history) = if cfg.constraint_mode == ConstraintMode::None {
        let obs: Vec<ObservedSeq<'_>> = idx.iter().map(|&i| ds.turns[i].observed()).collect();
        let (model, h) = dbn::train_baseline(&obs, cfg.states, &lbg, &em)?;
        (ModelFile::Baseline { region: ds.region, model }, h)
    } else {
        let tracks = ds.encode_labels(&ds.constraints)?;
        let seqs = ds.labeled(&tracks, &idx);
        let opts = CdbnTrainOptions { lbg, per_constraint_em: em, em, merge_threshold: cfg.merge_threshold };
        let (model, h) = cdbn::train_cdbn(&seqs, &ds.constraints, cfg.states, &opts)?;
        (ModelFile::Constrained { region: ds.region, model }, h)
    };
    corpus::save_model(model_path, &file).context(format!("writing {}", model_path.display()))?;
    let log_path = log_path.map_or_else(|| with_suffix(model_path, ".log.tsv"), Path::to_path_buf);
    let mut log = String::from("iteration\tllr\n");
    for (i, v) in history.iter().enumerate() {
        log.push_str(&format!("{i}\t{v}\n"));
    }
    fs::write(&log_path, log).context(format!("writing {}", log_path.display()))?;
    let (kind, states) = match &file {
        ModelFile::Baseline { model, .. } => ("baseline", model.n_states()),
        ModelFile::Constrained { model, .. } => ("constrained", model.n_states()),
    };
    println!(
        "trained {kind} {} model with {states} states on {} turns; final LLR {:.5}; wrote {}",
        ds.region,
        idx.len(),
        history.last().copied().unwrap_or(f64::NAN),
        model_path.display()
    );
    Ok(())
}

struct SpeechInput {
    speech: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

fn read_speech_csv(path: &Path) -> Result<SpeechInput, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(|e| data(format!("{}: {e}", path.display())))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let speech_cols = SPEECH_COLUMNS
        .iter()
        .map(|c| col(c).ok_or_else(|| data(format!("{}: missing column `{c}`", path.display()))))
        .collect::<Result<Vec<usize>, Failure>>()?;
    let label_col = col("label");
    let mut input = SpeechInput { speech: Vec::new(), labels: label_col.map(|_| Vec::new()) };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| data(format!("{}: {e}", path.display())))?;
        let row = speech_cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| data(format!("{}: row {}: bad value in column {c}", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>, Failure>>()?;
        input.speech.push(row);
        if let (Some(c), Some(l)) = (label_col, input.labels.as_mut()) {
            l.push(rec.get(c).unwrap_or_default().trim().to_string());
        }
    }
    if input.speech.is_empty() {
        return Err(data(format!("{} has no frames", path.display())));
    }
    Ok(input)
}

fn write_trajectory(path: &Path, traj: &[Vec<f64>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let d = traj.first().map_or(0, Vec::len);
    let mut header = vec!["frame".to_string(), "timestamp".to_string()];
    header.extend((0..d).map(|k| format!("m{k}")));
    let csv_err = |e: csv::Error| data(format!("{}: {e}", path.display()));
    w.write_record(&header).map_err(csv_err)?;
    for (t, f) in traj.iter().enumerate() {
        let mut row = vec![t.to_string(), (t as f64 / MODEL_FRAME_RATE).to_string()];
        row.extend(f.iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn keypoint_plan(cfg: &RunConfig, region: Region) -> Result<KeypointPlan, Failure> {
    let rate = cfg.keypoint_rate.unwrap_or(region.keypoint_rate());
    Ok(KeypointPlan::new(rate, MODEL_FRAME_RATE)?.with_interpolation(cfg.interpolation))
}

pub fn synth(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), Failure> {
    let file = load_model(cfg)?;
    let input = read_speech_csv(input)?;
    let raw = match &file {
        ModelFile::Baseline { model, .. } => model.synthesize(&input.speech, cfg.gamma)?,
        ModelFile::Constrained { model, .. } => {
            let labels = input.labels.unwrap_or_else(|| vec![OTHER.to_string(); input.speech.len()]);
            let track = model.constraints().encode(&labels).map_err(|e| data(e.to_string()))?;
            model.constrained_synthesize(&input.speech, &track, cfg.gamma)?
        }
    };
    let region = file.region();
    let smoothed = smooth::smooth_region(&raw, region, &keypoint_plan(cfg, region)?)?;
    let (raw_path, smooth_path) = (with_suffix(out, ".raw.csv"), with_suffix(out, ".smooth.csv"));
    write_trajectory(&raw_path, &raw)?;
    write_trajectory(&smooth_path, &smoothed)?;
    println!("wrote {} frames to {} and {}", raw.len(), raw_path.display(), smooth_path.display());
    Ok(())
}

fn region_detector(region: Region) -> Box<dyn Detector> {
    match region {
        Region::Head => Box::new(OscillationAxisDetector::head()),
        Region::Hand => Box::new(TemplateDetector {
            templates: SyntheticSpec::hand_gestures(1, 0)
                .templates
                .into_iter()
                .filter(|t| t.label != OTHER)
                .map(|t| AxisTemplate { label: t.label, axis: t.axis, freq_hz: t.freq_hz })
                .collect(),
            frame_rate: MODEL_FRAME_RATE,
            min_share: 0.3,
        }),
    }
}

pub fn eval(cfg: &RunConfig, fold: Option<usize>, accuracy: bool, out: Option<&Path>) -> Result<(), Failure> {
    let file = load_model(cfg)?;
    let ds = load_dataset(cfg)?;
    if ds.region != file.region() {
        return Err(data(format!("the model is for the {} region, the dataset for {}", file.region(), ds.region)));
    }
    let s = splits(cfg, &ds)?;
    let mut idx = match fold {
        Some(f) => s.folds[check_fold(f)? + 1].clone(),
        None => s.folds[1..].concat(),
    };
    idx.sort_unstable();
    let tracks: Vec<Vec<usize>> = match &file {
        ModelFile::Baseline { .. } => ds.turns.iter().map(|t| vec![0; t.len()]).collect(),
        ModelFile::Constrained { model, .. } => ds.encode_labels(model.constraints()).map_err(|e| data(e.to_string()))?,
    };
    let turns: Vec<EvalTurn<'_>> = idx
        .iter()
        .map(|&i| EvalTurn { id: &ds.turns[i].id, speech: &ds.turns[i].speech, motion: &ds.turns[i].motion, track: &tracks[i] })
        .collect();
    let mut report = match &file {
        ModelFile::Baseline { model, .. } => eval::evaluate(model, &turns, cfg.gamma)?,
        ModelFile::Constrained { model, .. } => eval::evaluate(model, &turns, cfg.gamma)?,
    };
    if accuracy {
        let ModelFile::Constrained { model, .. } = &file else {
            return Err(usage("gesture accuracy needs a constrained model"));
        };
        let detector = region_detector(ds.region);
        let speech: Vec<&[Vec<f64>]> = turns.iter().map(|t| t.speech).collect();
        let mut acc = BTreeMap::new();
        for g in detector.gestures() {
            if model.constraints().index_of(&g).is_ok() {
                let a = eval::gesture_accuracy(model, &speech, &g, detector.as_ref(), None)?;
                acc.insert(g, a);
            }
        }
        if acc.is_empty() {
            return Err(data("the model has no constraint the detector recognizes"));
        }
        report.gesture_accuracy = Some(acc);
    }
    match out {
        Some(p) => {
            write_json(p, &report)?;
            let cca = report.cca_m.map_or_else(|| "n/a".into(), |s| format!("{:.4}", s.mean));
            println!("{} turns: CCA_m {cca}, KLD {:.4}, LLR {:.4}; wrote {}", turns.len(), report.kld, report.llr, p.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| data(e.to_string()))?),
    }
    Ok(())
}

#[derive(Serialize)]
struct RetrievalOutput<'a> {
    thresholds: &'a BTreeMap<String, BTreeMap<String, f64>>,
    searched_turns: usize,
    precision: BTreeMap<String, Option<f64>>,
    report: &'a retrieval::PrecisionReport,
}

pub fn retrieve(cfg: &RunConfig, exemplars: &Path, select: bool, out: &Path) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let text = fs::read_to_string(exemplars).context(format!("reading {}", exemplars.display()))?;
    let ex: BTreeMap<String, Vec<Vec<Vec<f64>>>> =
        serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", exemplars.display())))?;
    if ex.is_empty() {
        return Err(data(format!("{} lists no gestures", exemplars.display())));
    }
    let dm = ds.region.motion_dim();
    for (g, list) in &ex {
        if list.is_empty() || list.iter().any(Vec::is_empty) {
            return Err(data(format!("gesture `{g}` has no exemplar frames")));
        }
        if list.iter().flatten().any(|f| f.len() != dm) {
            return Err(data(format!("gesture `{g}` has frames that are not {dm} wide")));
        }
    }
    let mut rcfg = cfg.retrieval.clone();
    let models = ex
        .iter()
        .map(|(g, list)| GestureModel::new(g, list, &rcfg).map_err(|e| data(e.to_string())))
        .collect::<Result<Vec<_>, Failure>>()?;
    let turn = |i: usize| Turn { id: &ds.turns[i].id, subject: &ds.turns[i].subject, motion: &ds.turns[i].motion };
    let search: Vec<usize> = if select {
        let s = splits(cfg, &ds)?;
        for m in &models {
            let mut cands: BTreeMap<String, Vec<ScoredCandidate>> = BTreeMap::new();
            for &i in s.validation() {
                for seg in retrieval::score_turn(&turn(i), m, &rcfg)? {
                    let positive = retrieval::segment_matches(&seg, &ds.turns[i].labels, &m.label);
                    cands.entry(ds.turns[i].subject.clone()).or_default().push(ScoredCandidate { score: seg.score, positive });
                }
            }
            let th = retrieval::select_thresholds(&cands).context(format!("selecting thresholds for `{}`", m.label))?;
            info!("thresholds for {}: {th:?}", m.label);
            rcfg.thresholds.insert(m.label.clone(), th);
        }
        s.selection_train()
    } else {
        (0..ds.turns.len()).collect()
    };
    let turns: Vec<Turn<'_>> = search.iter().map(|&i| turn(i)).collect();
    let found = retrieval::retrieve(&turns, &models, &rcfg)?;
    let truth: BTreeMap<String, Vec<String>> = search.iter().map(|&i| (ds.turns[i].id.clone(), ds.turns[i].labels.clone())).collect();
    let report = retrieval::precision_report(&found, &truth)?;

    let label_dir = out.join("labels");
    fs::create_dir_all(&label_dir).context(format!("creating {}", label_dir.display()))?;
    for &i in &search {
        let t = &ds.turns[i];
        let segs: Vec<_> = found.iter().filter(|s| s.turn == t.id).cloned().collect();
        let labels = retrieval::segments_to_labels(t.len(), &segs, OTHER);
        let mut csv = String::from("timestamp,label\n");
        for (f, l) in labels.iter().enumerate() {
            csv.push_str(&format!("{},{l}\n", f as f64 / MODEL_FRAME_RATE));
        }
        fs::write(label_dir.join(format!("{}.csv", t.id)), csv)?;
    }
    write_json(&out.join("segments.json"), &found)?;
    let precision: BTreeMap<String, Option<f64>> = ex
        .keys()
        .map(|g| (g.clone(), report.per_gesture.get(g).and_then(|p| p.precision())))
        .collect();
    write_json(
        &out.join("precision.json"),
        &RetrievalOutput { thresholds: &rcfg.thresholds, searched_turns: search.len(), precision: precision.clone(), report: &report },
    )?;
    for (g, p) in &precision {
        let n = report.per_gesture.get(g).map_or(0, |p| p.retrieved);
        match p {
            Some(p) => println!("{g}: {n} segments, precision {p:.3}"),
            None => println!("{g}: no segments retrieved"),
        }
    }
    Ok(())
}

pub fn sweep_states(cfg: &RunConfig, candidates: &[usize], out: Option<&Path>) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let s = splits(cfg, &ds)?;
    let tracks = ds.encode_labels(&ds.constraints)?;
    let train: Vec<LabeledSeq<'_>> = ds.labeled(&tracks, &s.selection_train());
    let valid: Vec<LabeledSeq<'_>> = ds.labeled(&tracks, s.validation());
    let family = match cfg.constraint_mode {
        ConstraintMode::None => SweepModel::Baseline,
        _ => SweepModel::Constrained { constraints: ds.constraints.clone(), merge_threshold: cfg.merge_threshold },
    };
    let rows = eval::state_count_sweep(&train, &valid, candidates, &family, &LbgOptions::default(), &cfg.em())?;
    match out {
        Some(p) => {
            let f = fs::File::create(p).context(format!("creating {}", p.display()))?;
            eval::write_sweep_tsv(&rows, std::io::BufWriter::new(f))?;
            println!("wrote {} rows to {}", rows.len(), p.display());
        }
        None => eval::write_sweep_tsv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}
