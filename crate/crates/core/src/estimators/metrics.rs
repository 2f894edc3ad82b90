// SPDX-License-Identifier: Apache-2.0

//! Pearson R, MAPE and RRSE.

use serde::{Deserialize, Serialize};

use super::{EstimateError, PpaPrediction};
use crate::golden::GoldenLabels;

/// Truth values with smaller magnitude are left out of MAPE.
pub const MAPE_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    Wns,
    Tns,
    Power,
    Area,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::Wns, Target::Tns, Target::Power, Target::Area];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Wns => "WNS",
            Target::Tns => "TNS",
            Target::Power => "power",
            Target::Area => "area",
        }
    }

    pub fn of_prediction(self, p: &PpaPrediction) -> f64 {
        match self {
            Target::Wns => p.wns_ns,
            Target::Tns => p.tns_ns,
            Target::Power => p.power_uw,
            Target::Area => p.area.total,
        }
    }

    pub fn of_labels(self, l: &GoldenLabels) -> f64 {
        match self {
            Target::Wns => l.wns_ns,
            Target::Tns => l.tns_ns,
            Target::Power => l.power_uw,
            Target::Area => l.area_total(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub target: Target,
    /// `None` when either series is constant.
    pub r: Option<f64>,
    pub mape_percent: f64,
    /// `None` when the truth is constant.
    pub rrse: Option<f64>,
    pub n_used: usize,
    pub n_excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub targets: Vec<TargetMetrics>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn metrics(target: Target, pred: &[f64], truth: &[f64]) -> Result<TargetMetrics, EstimateError> {
    if pred.len() != truth.len() {
        return Err(EstimateError::Layout("prediction and truth lengths"));
    }
    if truth.len() < 2 {
        return Err(EstimateError::TooFew(truth.len()));
    }
    let (mp, mt) = (mean(pred), mean(truth));
    let mut cov = 0.0;
    let mut vp = 0.0;
    let mut vt = 0.0;
    let mut sq_err = 0.0;
    for (&p, &t) in pred.iter().zip(truth) {
        cov += (p - mp) * (t - mt);
        vp += (p - mp).powi(2);
        vt += (t - mt).powi(2);
        sq_err += (p - t).powi(2);
    }
    let r = (vp > 0.0 && vt > 0.0).then(|| (cov / (vp * vt).sqrt()).clamp(-1.0, 1.0));
    let rrse = (vt > 0.0).then(|| (sq_err / vt).sqrt());
    let used: Vec<f64> = pred
        .iter()
        .zip(truth)
        .filter(|(_, t)| t.abs() >= MAPE_THRESHOLD)
        .map(|(p, t)| (p - t).abs() / t.abs())
        .collect();
    if used.is_empty() {
        return Err(EstimateError::AllExcluded);
    }
    Ok(TargetMetrics {
        target,
        r,
        mape_percent: 100.0 * mean(&used),
        rrse,
        n_used: used.len(),
        n_excluded: truth.len() - used.len(),
    })
}

/// Metrics for WNS, TNS, power and total area, in that order.
pub fn evaluate(predictions: &[PpaPrediction], labels: &[GoldenLabels]) -> Result<Metrics, EstimateError> {
    let targets = Target::ALL
        .iter()
        .map(|&t| {
            let p: Vec<f64> = predictions.iter().map(|x| t.of_prediction(x)).collect();
            let y: Vec<f64> = labels.iter().map(|x| t.of_labels(x)).collect();
            metrics(t, &p, &y)
        })
        .collect::<Result<_, _>>()?;
    Ok(Metrics { targets })
}
