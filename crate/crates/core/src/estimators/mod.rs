// SPDX-License-Identifier: Apache-2.0

//! PPA pipelines over pre-optimization SOG features: two-stage timing
//! (path forest, then design-level boosting), GCN power, and analytical
//! sequential plus boosted combinational area. Also the R/MAPE/RRSE metrics.

mod metrics;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{propagate, ActivityError};
use crate::frontend::WordDesign;
use crate::golden::GoldenLabels;
use crate::learners::{
    fit_forest, fit_gbm, gcn_train, splitmix64, Forest, ForestParams, Gbm, GbmParams, GcnModel,
    GcnParams, GraphTensors, LearnError,
};
use crate::liberty::{CellAttr, Library, LibertyError};
use crate::sog::{lower, sog_features, DesignFeatures, SogGraph, SogKind};
use crate::timing::{
    annotate, path_features, sta, worst_paths, PathFeatureVector, TimingConfig, TimingError,
};

pub use metrics::{evaluate, metrics, Metrics, Target, TargetMetrics};

/// GCN node feature width: one-hot kind, p, alpha, fanout, level.
pub const GCN_IN_DIM: usize = 14;
pub const N_DECILES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no designs given")]
    Empty,
    #[error("design `{0}` has no golden labels")]
    MissingLabels(String),
    #[error("feature layout mismatch in {0}")]
    Layout(&'static str),
    #[error("library fingerprint {found} does not match bundle {expected}")]
    Library { expected: String, found: String },
    #[error("need at least two samples, got {0}")]
    TooFew(usize),
    #[error("every truth value is below the MAPE threshold")]
    AllExcluded,
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Liberty(#[from] LibertyError),
    #[error(transparent)]
    Activity(#[from] ActivityError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub timing: TimingConfig,
    /// Fraction of endpoints kept as worst paths (at least 16).
    pub path_fraction: f64,
    /// Primary-input one-probability for activity propagation.
    pub input_p: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            timing: TimingConfig::default(),
            path_fraction: 0.01,
            input_p: 0.5,
        }
    }
}

/// Hex SHA-256 of the canonical Liberty rendering.
pub fn library_fingerprint(lib: &Library) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(lib.to_liberty().as_bytes()))
}

pub fn timing_layout() -> Vec<String> {
    let mut names: Vec<String> = SogKind::ALL.iter().map(|k| format!("n_{}", k.as_str())).collect();
    for n in ["n_pi", "n_po", "depth", "wns_r", "tns_r", "forest_wns", "forest_tns"] {
        names.push(n.to_string());
    }
    names.extend((0..N_DECILES).map(|i| format!("slack_q{i}")));
    names
}

pub fn area_layout() -> Vec<String> {
    let mut names: Vec<String> = DesignFeatures::NAMES.iter().map(|s| s.to_string()).collect();
    names.push("naive_comb_area".into());
    names
}

pub fn path_layout() -> Vec<String> {
    PathFeatureVector::NAMES.iter().map(|s| s.to_string()).collect()
}

/// Linear-interpolation quantiles at levels `i / 9`, `i = 0..10`.
pub fn slack_deciles(slacks: &[f64], fallback: f64) -> [f64; N_DECILES] {
    let mut s = slacks.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = [fallback; N_DECILES];
    if s.is_empty() {
        return out;
    }
    let last = (s.len() - 1) as f64;
    for (i, q) in out.iter_mut().enumerate() {
        let pos = last * i as f64 / (N_DECILES - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        *q = s[lo] + (s[hi] - s[lo]) * (pos - lo as f64);
    }
    out
}

/// Everything the estimators read from one design before optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignAnalysis {
    pub name: String,
    pub clock_period_ns: f64,
    pub features: DesignFeatures,
    pub wns_r: f64,
    pub tns_r: f64,
    pub paths: Vec<PathRecord>,
    pub naive_comb_area: f64,
    pub graph: GraphTensors,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub source: String,
    pub sink: String,
    pub kind: crate::timing::EndpointKind,
    pub features: Vec<f64>,
    /// Setup for register endpoints, 0 for outputs.
    pub margin_ns: f64,
    pub analytical_slack_ns: f64,
}

impl DesignAnalysis {
    /// First 15 stage-2 features: kind counts, ports, depth, wns_r, tns_r.
    fn timing_base(&self) -> Vec<f64> {
        let f = &self.features;
        let mut v: Vec<f64> = f.counts.iter().map(|&c| c as f64).collect();
        v.extend([
            f.n_pi as f64,
            f.n_po as f64,
            f.combinational_depth as f64,
            self.wns_r,
            self.tns_r,
        ]);
        v
    }

    pub fn area_row(&self) -> Vec<f64> {
        let mut v = self.features.to_vec();
        v.push(self.naive_comb_area);
        v
    }

    /// Stage-2 row from per-path predicted delays.
    pub fn timing_row(&self, predicted_delays: &[f64]) -> Vec<f64> {
        let t = self.clock_period_ns;
        let slacks: Vec<f64> = self
            .paths
            .iter()
            .zip(predicted_delays)
            .map(|(p, d)| t - d - p.margin_ns)
            .collect();
        self.timing_row_from_slacks(&slacks)
    }

    fn timing_row_from_slacks(&self, slacks: &[f64]) -> Vec<f64> {
        let t = self.clock_period_ns;
        let mut v = self.timing_base();
        v.push(slacks.iter().copied().reduce(f64::min).unwrap_or(t));
        v.push(slacks.iter().map(|s| s.min(0.0)).sum());
        v.extend(slack_deciles(slacks, t));
        v
    }

    /// Stage-2 row built from analytical slacks (before any forest exists).
    pub fn analytical_timing_row(&self) -> Vec<f64> {
        let slacks: Vec<f64> = self.paths.iter().map(|p| p.analytical_slack_ns).collect();
        self.timing_row_from_slacks(&slacks)
    }
}

fn gcn_graph(g: &SogGraph, input_p: f64) -> Result<GraphTensors, EstimateError> {
    let act = propagate(g, input_p)?;
    let fanouts: Vec<usize> = g.fanouts().iter().map(Vec::len).collect();
    let levels = g.levels();
    let max_fo = fanouts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let max_lv = levels.iter().copied().max().unwrap_or(0).max(1) as f64;
    let x = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut row = vec![0.0; GCN_IN_DIM];
            row[n.kind.index()] = 1.0;
            row[10] = act.p[i];
            row[11] = act.alpha[i];
            row[12] = fanouts[i] as f64 / max_fo;
            row[13] = f64::from(levels[i]) / max_lv;
            row
        })
        .collect();
    let edges: Vec<(u32, u32)> = g
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(i, n)| n.fanin.iter().map(move |&f| (f, i as u32)))
        .collect();
    Ok(GraphTensors::new(x, &edges)?)
}

pub fn analyze(design: &WordDesign, lib: &Library, cfg: &EstimatorConfig) -> Result<DesignAnalysis, EstimateError> {
    let g = lower(design);
    let t = g.clock_period_ns;
    let ann = annotate(&g, lib, &cfg.timing)?;
    let result = sta(&ann, t)?;
    let paths = worst_paths(&result, &ann, cfg.path_fraction)
        .into_iter()
        .map(|p| {
            let sink = *p.nodes.last().expect("paths are non-empty");
            let margin_ns = result
                .endpoints
                .iter()
                .find(|e| e.node == sink)
                .map_or(0.0, |e| e.margin_ns);
            PathRecord {
                features: path_features(&p, &ann).to_vec(),
                source: p.source_identity,
                sink: p.sink_identity,
                kind: p.sink_kind,
                margin_ns,
                analytical_slack_ns: p.slack_ns,
            }
        })
        .collect();
    let features = sog_features(&g);
    let mut naive_comb_area = 0.0;
    for kind in SogKind::GATES {
        let n = features.count(kind);
        if n > 0 {
            let cell = cfg.timing.cell_for(kind)?.expect("gates have cells");
            naive_comb_area += n as f64 * lib.cell_attr(cell, &CellAttr::Area)?;
        }
    }
    Ok(DesignAnalysis {
        name: design.name().to_string(),
        clock_period_ns: t,
        features,
        wns_r: result.wns_r,
        tns_r: result.tns_r,
        paths,
        naive_comb_area,
        graph: gcn_graph(&g, cfg.input_p)?,
    })
}

#[derive(Clone, Debug)]
pub struct LabeledDesign {
    pub design: WordDesign,
    pub labels: Option<GoldenLabels>,
}

#[derive(Clone, Debug)]
pub struct TimingRecord {
    pub analysis: DesignAnalysis,
    /// Path-table row of each worst path, `None` when unmatched.
    pub path_rows: Vec<Option<usize>>,
    pub wns_ns: f64,
    pub tns_ns: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingTables {
    pub path_x: Vec<Vec<f64>>,
    /// Golden capture-pin arrival of the matched path.
    pub path_y: Vec<f64>,
    pub timing: Vec<TimingRecord>,
    pub area_x: Vec<Vec<f64>>,
    pub area_y: Vec<f64>,
    /// Graphs with golden energy per cycle (power times clock period, fJ).
    pub power_graphs: Vec<(GraphTensors, f64)>,
    pub matched_paths: usize,
    pub unmatched_paths: usize,
}

impl TrainingTables {
    /// Design-level timing rows with analytical slacks in the forest slots.
    pub fn timing_design_table(&self) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let rows = self.timing.iter().map(|r| r.analysis.analytical_timing_row()).collect();
        let wns = self.timing.iter().map(|r| r.wns_ns).collect();
        let tns = self.timing.iter().map(|r| r.tns_ns).collect();
        (rows, wns, tns)
    }
}

/// Per design: analyze, then match each worst path to the golden path with
/// the same (source, sink, endpoint kind). Designs are processed in
/// parallel and assembled in input order.
pub fn extract_training_set(
    designs: &[LabeledDesign],
    lib: &Library,
    cfg: &EstimatorConfig,
) -> Result<TrainingTables, EstimateError> {
    if designs.is_empty() {
        return Err(EstimateError::Empty);
    }
    let per: Vec<(DesignAnalysis, &GoldenLabels)> = designs
        .par_iter()
        .map(|d| {
            let labels = d
                .labels
                .as_ref()
                .ok_or_else(|| EstimateError::MissingLabels(d.design.name().to_string()))?;
            Ok((analyze(&d.design, lib, cfg)?, labels))
        })
        .collect::<Result<_, EstimateError>>()?;
    let mut t = TrainingTables {
        path_x: Vec::new(),
        path_y: Vec::new(),
        timing: Vec::new(),
        area_x: Vec::new(),
        area_y: Vec::new(),
        power_graphs: Vec::new(),
        matched_paths: 0,
        unmatched_paths: 0,
    };
    for (a, labels) in per {
        let golden = labels.path_map();
        let mut path_rows = Vec::with_capacity(a.paths.len());
        for p in &a.paths {
            match golden.get(&(p.source.as_str(), p.sink.as_str(), p.kind)) {
                Some(&delay) => {
                    path_rows.push(Some(t.path_x.len()));
                    t.path_x.push(p.features.clone());
                    t.path_y.push(delay);
                    t.matched_paths += 1;
                }
                None => {
                    path_rows.push(None);
                    t.unmatched_paths += 1;
                }
            }
        }
        t.area_x.push(a.area_row());
        t.area_y.push(labels.area_comb);
        t.power_graphs.push((a.graph.clone(), labels.power_uw * a.clock_period_ns));
        t.timing.push(TimingRecord {
            analysis: a,
            path_rows,
            wns_ns: labels.wns_ns,
            tns_ns: labels.tns_ns,
        });
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub forest: ForestParams,
    pub wns_gbm: GbmParams,
    pub tns_gbm: GbmParams,
    pub area_gbm: GbmParams,
    pub gcn: GcnParams,
}

impl TrainParams {
    /// Paper-default hyperparameters with per-model seeds derived from `seed`.
    pub fn with_seed(seed: u64) -> Self {
        let sub = |i: u64| splitmix64(seed ^ splitmix64(i.wrapping_add(0x5eed)));
        TrainParams {
            forest: ForestParams { seed: sub(0), ..ForestParams::default() },
            wns_gbm: GbmParams { seed: sub(1), ..GbmParams::default() },
            tns_gbm: GbmParams { seed: sub(2), ..GbmParams::default() },
            area_gbm: GbmParams { seed: sub(3), ..GbmParams::default() },
            gcn: GcnParams { seed: sub(4), ..GcnParams::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayouts {
    pub path: Vec<String>,
    pub timing: Vec<String>,
    pub area: Vec<String>,
    pub gcn_in_dim: usize,
}

impl Default for FeatureLayouts {
    fn default() -> Self {
        FeatureLayouts {
            path: path_layout(),
            timing: timing_layout(),
            area: area_layout(),
            gcn_in_dim: GCN_IN_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub path_forest: Forest,
    pub wns_gbm: Gbm,
    pub tns_gbm: Gbm,
    pub area_gbm: Gbm,
    pub power_gcn: GcnModel,
    pub layouts: FeatureLayouts,
    pub library_fingerprint: String,
    pub params: TrainParams,
    pub config: EstimatorConfig,
}

fn warn_if_constant(name: &str, y: &[f64]) {
    if y.iter().all(|&v| v == y[0]) {
        warn!("{name} targets are constant; the model will predict {}", y[0]);
    }
}

pub fn train_all(
    tables: &TrainingTables,
    params: &TrainParams,
    lib: &Library,
    cfg: &EstimatorConfig,
) -> Result<ModelBundle, EstimateError> {
    if tables.path_x.is_empty() || tables.timing.is_empty() || tables.power_graphs.is_empty() {
        return Err(EstimateError::Empty);
    }
    warn_if_constant("path delay", &tables.path_y);
    let path_forest = fit_forest(&tables.path_x, &tables.path_y, &params.forest)?;

    let timing_x: Vec<Vec<f64>> = tables
        .timing
        .par_iter()
        .map(|r| {
            let delays: Vec<f64> = r.analysis.paths.iter().map(|p| path_forest.predict(&p.features)).collect();
            r.analysis.timing_row(&delays)
        })
        .collect();
    // boosted models learn the correction to the analytical estimate
    let wns_y: Vec<f64> = tables.timing.iter().map(|r| r.wns_ns - r.analysis.wns_r).collect();
    let tns_y: Vec<f64> = tables.timing.iter().map(|r| r.tns_ns - r.analysis.tns_r).collect();
    warn_if_constant("WNS", &wns_y);
    warn_if_constant("TNS", &tns_y);
    warn_if_constant("area", &tables.area_y);
    let wns_gbm = fit_gbm(&timing_x, &wns_y, &params.wns_gbm)?;
    let tns_gbm = fit_gbm(&timing_x, &tns_y, &params.tns_gbm)?;
    let area_gbm = fit_gbm(&tables.area_x, &tables.area_y, &params.area_gbm)?;
    let (power_gcn, trace) = gcn_train(&tables.power_graphs, &params.gcn)?;
    log::info!(
        "GCN loss {:.4} -> {:.4} over {} epochs",
        trace[0],
        trace[trace.len() - 1],
        params.gcn.epochs
    );
    Ok(ModelBundle {
        path_forest,
        wns_gbm,
        tns_gbm,
        area_gbm,
        power_gcn,
        layouts: FeatureLayouts::default(),
        library_fingerprint: library_fingerprint(lib),
        params: params.clone(),
        config: cfg.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaPrediction {
    pub seq: f64,
    pub comb: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intermediates {
    pub wns_r: f64,
    pub tns_r: f64,
    pub forest_wns: f64,
    pub forest_tns: f64,
    /// Forest-predicted slack of each worst path, most critical first.
    pub path_slacks: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpaPrediction {
    pub design: String,
    pub wns_ns: f64,
    pub tns_ns: f64,
    pub power_uw: f64,
    pub area: AreaPrediction,
    pub intermediates: Intermediates,
}

pub fn check_bundle(bundle: &ModelBundle, lib: &Library) -> Result<(), EstimateError> {
    let expect = FeatureLayouts::default();
    if bundle.layouts.path != expect.path {
        return Err(EstimateError::Layout("path features"));
    }
    if bundle.layouts.timing != expect.timing {
        return Err(EstimateError::Layout("timing features"));
    }
    if bundle.layouts.area != expect.area {
        return Err(EstimateError::Layout("area features"));
    }
    if bundle.layouts.gcn_in_dim != expect.gcn_in_dim || bundle.power_gcn.in_dim != GCN_IN_DIM {
        return Err(EstimateError::Layout("GCN node features"));
    }
    let found = library_fingerprint(lib);
    if found != bundle.library_fingerprint {
        return Err(EstimateError::Library {
            expected: bundle.library_fingerprint.clone(),
            found,
        });
    }
    Ok(())
}

pub fn predict_ppa(design: &WordDesign, lib: &Library, bundle: &ModelBundle) -> Result<PpaPrediction, EstimateError> {
    check_bundle(bundle, lib)?;
    let a = analyze(design, lib, &bundle.config)?;
    predict_analyzed(&a, lib, bundle)
}

/// Prediction from an existing analysis (no bundle compatibility check).
pub fn predict_analyzed(a: &DesignAnalysis, lib: &Library, bundle: &ModelBundle) -> Result<PpaPrediction, EstimateError> {
    let delays: Vec<f64> = a.paths.iter().map(|p| bundle.path_forest.predict(&p.features)).collect();
    let row = a.timing_row(&delays);
    let base = 15;
    let forest_wns = row[base];
    let forest_tns = row[base + 1];
    let t = a.clock_period_ns;
    let path_slacks = a
        .paths
        .iter()
        .zip(&delays)
        .map(|(p, d)| t - d - p.margin_ns)
        .collect();

    let seq = match bundle.config.timing.cell_binding.get(&SogKind::Dff) {
        Some(c) if a.features.n_registers > 0 => {
            a.features.n_registers as f64 * lib.cell_attr(c, &CellAttr::Area)?
        }
        Some(_) => 0.0,
        None if a.features.n_registers == 0 => 0.0,
        None => return Err(TimingError::Unbound(SogKind::Dff).into()),
    };
    let comb = bundle.area_gbm.predict(&a.area_row());
    let energy = bundle.power_gcn.predict(&a.graph)?;

    Ok(PpaPrediction {
        design: a.name.clone(),
        wns_ns: a.wns_r + bundle.wns_gbm.predict(&row),
        tns_ns: (a.tns_r + bundle.tns_gbm.predict(&row)).min(0.0),
        power_uw: energy / t,
        area: AreaPrediction {
            seq,
            comb,
            total: seq + comb,
        },
        intermediates: Intermediates {
            wns_r: a.wns_r,
            tns_r: a.tns_r,
            forest_wns,
            forest_tns,
            path_slacks,
        },
    })
}
