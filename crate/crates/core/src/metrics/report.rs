use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::FeatureExtractor;
use super::kid::kid;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-item values with their mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_item: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    pub fn from_values(per_item: Vec<f64>) -> Self {
        let n = per_item.len().max(1) as f64;
        let mean = per_item.iter().sum::<f64>() / n;
        let std = (per_item.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self { per_item, mean, std }
    }

    /// True when the aggregates agree with a recomputation from `per_item`.
    pub fn is_consistent(&self) -> bool {
        let fresh = Self::from_values(self.per_item.clone());
        (fresh.mean - self.mean).abs() <= 1e-12 * (1.0 + self.mean.abs())
            && (fresh.std - self.std).abs() <= 1e-12 * (1.0 + self.std.abs())
    }
}

/// `{metric: {per_item, mean, std}, ..., protocol: {...}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub metrics: BTreeMap<String, MetricSummary>,
    pub protocol: serde_json::Value,
}

impl MetricReport {
    pub fn new(protocol: serde_json::Value) -> Self {
        Self {
            metrics: BTreeMap::new(),
            protocol,
        }
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) {
        self.metrics.insert(name.to_string(), MetricSummary::from_values(values));
    }

    pub fn get(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }
}

fn features(f: &dyn FeatureExtractor, img: &Tensor) -> Result<Vec<f64>> {
    let v = f.extract(img)?;
    if v.len() != f.dim() {
        return Err(Error::invalid(format!(
            "extractor {} produced {} features, declared {}",
            f.name(),
            v.len(),
            f.dim()
        )));
    }
    Ok(v)
}

fn shifts(f: &dyn FeatureExtractor, after: &[Tensor], before: &[Tensor]) -> Result<Vec<Vec<f64>>> {
    if after.len() != before.len() {
        return Err(Error::invalid(format!("paired sets differ in size: {} vs {}", after.len(), before.len())));
    }
    after
        .iter()
        .zip(before)
        .map(|(a, b)| {
            let (fa, fb) = (features(f, a)?, features(f, b)?);
            Ok(fa.iter().zip(&fb).map(|(x, y)| x - y).collect())
        })
        .collect()
}

/// KID between `{F(s_r) − F(s)}` and `{F(r) − F(r_removed)}`.
pub fn style_shift_kid(
    f: &dyn FeatureExtractor,
    sources: &[Tensor],
    results: &[Tensor],
    references: &[Tensor],
    removed: &[Tensor],
) -> Result<f64> {
    kid(&shifts(f, results, sources)?, &shifts(f, references, removed)?)
}

/// Style-shift KID with `removal` applied to every reference.
pub fn feature_shift_eval(
    sources: &[Tensor],
    references: &[Tensor],
    results: &[Tensor],
    removal: &mut dyn FnMut(&Tensor) -> Result<Tensor>,
    f: &dyn FeatureExtractor,
) -> Result<MetricReport> {
    if sources.is_empty() || references.is_empty() {
        return Err(Error::invalid("feature-shift evaluation needs nonempty sets"));
    }
    let removed = references.iter().map(|r| removal(r)).collect::<Result<Vec<_>>>()?;
    let value = style_shift_kid(f, sources, results, references, &removed)?;
    let mut report = MetricReport::new(serde_json::json!({
        "extractor": f.name(),
        "dim": f.dim(),
        "sources": sources.len(),
        "references": references.len(),
    }));
    report.insert("style_shift_kid", vec![value]);
    Ok(report)
}
