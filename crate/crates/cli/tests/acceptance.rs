// SPDX-License-Identifier: Apache-2.0

//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

#[path = "../../core/tests/common/mod.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use sog_ppa::activity::{propagate, simulate_activity};
use sog_ppa::estimators::{metrics, predict_ppa, ModelBundle, PpaPrediction, Target};
use sog_ppa::frontend::{generate_design, GenParams, WordDesign};
use sog_ppa::golden::{optimize, GoldenLabels};
use sog_ppa::learners::{gcn_gradcheck, load_model, save_model, GcnModel, GraphTensors};
use sog_ppa::liberty::fixture_library;
use sog_ppa::sog::{check_equivalence, lower, SogKind};
use sog_ppa::timing::{sta, AnnotatedGraph};

const BIN: &str = env!("CARGO_BIN_EXE_sog-ppa");

type Outcome = Result<String, String>;

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN)
        .arg("--quiet")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generated designs with at most 16 input bits.
fn small_designs(n: usize) -> Vec<WordDesign> {
    let mut out = Vec::with_capacity(n);
    let mut seed = 0u64;
    while out.len() < n {
        let d = generate_design(&GenParams {
            seed,
            n_stages: 1 + (seed % 3) as usize,
            width_min: 1,
            width_max: 4,
            ops_per_stage: 1 + (seed % 6) as usize,
            ..GenParams::default()
        })
        .unwrap();
        seed += 1;
        if d.input_bits() <= 16 {
            out.push(d);
        }
    }
    out
}

fn lowering_equivalence(designs: &[WordDesign]) -> Outcome {
    let start = Instant::now();
    let failures: Vec<&str> = designs
        .iter()
        .filter(|d| !check_equivalence(d, &lower(d), 0).is_equivalent())
        .map(|d| d.name())
        .collect();
    let took = start.elapsed();
    let msg = format!("{} designs, {} failures, {:.1}s", designs.len(), failures.len(), took.as_secs_f64());
    if failures.is_empty() && took < Duration::from_secs(120) {
        Ok(msg)
    } else {
        Err(format!("{msg} {failures:?}"))
    }
}

fn sta_oracle() -> Outcome {
    let mut endpoints = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let d = oracles::random_dag(seed, 200);
        let r = sta(&AnnotatedGraph::with_delays(&d.graph, d.delays.clone(), 0.02), 1.0)
            .map_err(|e| e.to_string())?;
        for e in &r.endpoints {
            let (want, _) = oracles::enumerated_arrival(&d.graph, &d.delays, e.node);
            worst = worst.max((e.arrival_ns - want).abs());
            endpoints += 1;
        }
    }
    let msg = format!("50 DAGs, {endpoints} endpoints, max error {worst:.2e}");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn activity_oracle() -> Outcome {
    let mut p_err: f64 = 0.0;
    let mut a_err: f64 = 0.0;
    for seed in 0..30 {
        let g = oracles::random_tree_cone(seed, 12);
        let exact = oracles::enumerated_probabilities(&g, 0.5);
        let got = propagate(&g, 0.5).map_err(|e| e.to_string())?;
        let mc = simulate_activity(&g, 10_000, seed);
        for (i, &p) in exact.iter().enumerate() {
            p_err = p_err.max((got.p[i] - p).abs());
            if !matches!(g.nodes[i].kind, SogKind::Const0 | SogKind::Const1) {
                a_err = a_err.max((mc.alpha[i] - 2.0 * p * (1.0 - p)).abs());
            }
        }
    }
    let msg = format!("30 cones, probability error {p_err:.2e}, alpha error {a_err:.4}");
    if p_err <= 1e-12 && a_err <= 0.05 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gradcheck() -> Outcome {
    let g = lower(&small_designs(4)[3]);
    let x: Vec<Vec<f64>> = (0..g.len())
        .map(|i| (0..14).map(|k| ((i * 5 + k * 7) % 13) as f64 / 13.0).collect())
        .collect();
    let edges: Vec<(u32, u32)> = g
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(i, n)| n.fanin.iter().map(move |&f| (f, i as u32)))
        .collect();
    let t = GraphTensors::new(x, &edges).map_err(|e| e.to_string())?;
    let err = gcn_gradcheck(&GcnModel::init(14, 11), &t, 1.3, 300, 5).map_err(|e| e.to_string())?;
    let msg = format!("300 parameters, max relative error {err:.2e}");
    if err < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn metrics_oracle() -> Outcome {
    let m = metrics(Target::Area, &[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    let mean = metrics(Target::Area, &[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    let r = m.r.unwrap_or(f64::NAN);
    let rrse = m.rrse.unwrap_or(f64::NAN);
    let rrse_mean = mean.rrse.unwrap_or(f64::NAN);
    let msg = format!("R {r}, MAPE {}, RRSE {rrse}, mean-predictor RRSE {rrse_mean}", m.mape_percent);
    let ok = (r - 1.0).abs() <= 1e-9
        && (m.mape_percent - 100.0).abs() <= 1e-9
        && (rrse - 7f64.sqrt()).abs() <= 1e-9
        && (rrse_mean - 1.0).abs() <= 1e-9;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// gen + golden + train at the default sizes; returns the data directory and
/// the elapsed time.
fn build(root: &Path, jobs: &str) -> Result<(PathBuf, PathBuf, Duration), String> {
    let start = Instant::now();
    let data = root.join("data");
    let model = root.join("model");
    cli(&["gen", "--seed", "42", "--count", "150", "--out", s(&data), "--jobs", jobs])?;
    cli(&["golden", "--manifest", s(&data), "--out", s(&data), "--seed", "42", "--jobs", jobs])?;
    cli(&["train", "--manifest", s(&data), "--out", s(&model), "--seed", "42", "--jobs", jobs])?;
    Ok((data, model, start.elapsed()))
}

fn read_manifest(data: &Path) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(data.join("manifest.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn end_to_end(data: &Path, model: &Path, built_in: Duration, root: &Path) -> Outcome {
    let start = Instant::now();
    let eval = root.join("eval");
    cli(&["evaluate", "--manifest", s(data), "--bundle", s(model), "--out", s(&eval)])?;
    let total = built_in + start.elapsed();

    let text = fs::read_to_string(eval.join("metrics.csv")).map_err(|e| e.to_string())?;
    let mut r = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        r.insert(cols[0].to_string(), cols[1].parse::<f64>().unwrap_or(f64::NAN));
    }
    let preds: Vec<PpaPrediction> =
        serde_json::from_str(&fs::read_to_string(eval.join("predictions.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let manifest = read_manifest(data)?;
    let entries = manifest["entries"].as_array().cloned().unwrap_or_default();
    let n_train = entries.iter().filter(|e| e["split"] == "train").count();
    let mut seq_mismatch = 0;
    for p in &preds {
        let entry = entries
            .iter()
            .find(|e| Path::new(e["design"].as_str().unwrap_or("")).file_stem().and_then(|x| x.to_str()) == Some(&p.design))
            .ok_or_else(|| format!("no manifest entry for {}", p.design))?;
        let labels: GoldenLabels = serde_json::from_value(entry["golden"].clone()).map_err(|e| e.to_string())?;
        if labels.area_seq != p.area.seq {
            seq_mismatch += 1;
        }
    }

    let thresholds = [("area", 0.95), ("WNS", 0.90), ("TNS", 0.90), ("power", 0.85)];
    let mut msg = format!("{n_train} train / {} test;", preds.len());
    let mut ok = true;
    for (name, min) in thresholds {
        let v = r.get(name).copied().unwrap_or(f64::NAN);
        msg.push_str(&format!(" {name} R {v:.3} (>= {min});"));
        ok &= v >= min;
    }
    msg.push_str(&format!(" area_seq mismatches {seq_mismatch}; {:.0}s", total.as_secs_f64()));
    ok &= seq_mismatch == 0 && total <= Duration::from_secs(30 * 60);
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism(first: &(PathBuf, PathBuf), root: &Path) -> Outcome {
    let (data, model, _) = build(root, "1")?;
    let same = |a: &Path, b: &Path| fs::read(a).ok().is_some() && fs::read(a).ok() == fs::read(b).ok();
    let manifest_same = same(&first.0.join("manifest.json"), &data.join("manifest.json"));
    let bundle_same = same(&first.1.join("bundle.json"), &model.join("bundle.json"));
    let msg = format!("--jobs 4 vs --jobs 1: manifest identical {manifest_same}, bundle identical {bundle_same}");
    if manifest_same && bundle_same {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn optimize_safety(small: &[WordDesign], data: &Path) -> Outcome {
    let broken = small
        .iter()
        .filter(|d| !check_equivalence(d, &optimize(&lower(d)), 0).is_equivalent())
        .count();
    let manifest = read_manifest(data)?;
    let mut not_idempotent = 0;
    let mut corpus = 0;
    for e in manifest["entries"].as_array().cloned().unwrap_or_default() {
        let text = fs::read_to_string(data.join(e["design"].as_str().unwrap_or(""))).map_err(|e| e.to_string())?;
        let d = WordDesign::parse(&text).map_err(|e| e.to_string())?;
        let once = optimize(&lower(&d));
        if optimize(&once) != once {
            not_idempotent += 1;
        }
        corpus += 1;
    }
    let msg = format!(
        "{} small designs, {broken} not equivalent; {corpus} corpus designs, {not_idempotent} not idempotent",
        small.len()
    );
    if broken == 0 && not_idempotent == 0 && corpus > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bits(p: &PpaPrediction) -> Vec<u64> {
    let i = &p.intermediates;
    let mut v = vec![
        p.wns_ns, p.tns_ns, p.power_uw, p.area.seq, p.area.comb, p.area.total, i.wns_r, i.tns_r, i.forest_wns,
        i.forest_tns,
    ];
    v.extend(&i.path_slacks);
    v.into_iter().map(f64::to_bits).collect()
}

fn serialization(model: &Path) -> Outcome {
    let text = fs::read_to_string(model.join("bundle.json")).map_err(|e| e.to_string())?;
    let bundle: ModelBundle = load_model(&text).map_err(|e| e.to_string())?;
    let reloaded: ModelBundle = load_model(&save_model(&bundle)).map_err(|e| e.to_string())?;
    let lib = fixture_library();
    let mut differ = 0;
    for seed in 0..100u64 {
        let d = generate_design(&GenParams {
            seed: 10_000 + seed,
            n_stages: 1 + (seed % 4) as usize,
            ops_per_stage: 1 + (seed % 8) as usize,
            ..GenParams::default()
        })
        .map_err(|e| e.to_string())?;
        let a = predict_ppa(&d, &lib, &bundle).map_err(|e| e.to_string())?;
        let b = predict_ppa(&d, &lib, &reloaded).map_err(|e| e.to_string())?;
        if bits(&a) != bits(&b) {
            differ += 1;
        }
    }
    let msg = format!("100 probes, {differ} differ after round trip");
    if differ == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    match &outcome {
        Ok(msg) => println!("PASS  {name}: {msg}"),
        Err(msg) => println!("FAIL  {name}: {msg}"),
    }
    outcome.is_ok()
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let small = small_designs(200);
    let mut ok = true;

    ok &= report("lowering equivalence", || lowering_equivalence(&small));
    ok &= report("STA oracle", sta_oracle);
    ok &= report("activity oracle", activity_oracle);
    ok &= report("GCN gradient check", gradcheck);
    ok &= report("metrics oracle", metrics_oracle);

    let run_a = tmp.path().join("a");
    let built = build(&run_a, "4");
    let fail = |name: &str, e: &String| {
        println!("FAIL  {name}: {e}");
        false
    };
    match &built {
        Ok((data, model, took)) => {
            ok &= report("end-to-end benchmark", || end_to_end(data, model, *took, &run_a));
            let first = (data.clone(), model.clone());
            ok &= report("determinism", || determinism(&first, &tmp.path().join("b")));
            ok &= report("optimization safety", || optimize_safety(&small, data));
            ok &= report("serialization", || serialization(model));
        }
        Err(e) => {
            for name in ["end-to-end benchmark", "determinism", "optimization safety", "serialization"] {
                ok &= fail(name, e);
            }
        }
    }

    if !ok {
        std::process::exit(1);
    }
}
