use serde::{Deserialize, Serialize};

use super::mask::{check_binary, overlaps};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// A facial component released into generation at its own step.
#[derive(Clone, Debug)]
pub struct ComponentSpec {
    pub name: String,
    /// Binary `[h, w]` mask in the source frame.
    pub mask: Tensor,
    pub alpha: f64,
    /// Step at and below which the component is no longer preserved.
    pub t_c: usize,
}

/// Release steps and weights per named component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSchedule {
    pub face: usize,
    pub eyes: usize,
    pub lips: usize,
    pub eyebrows: usize,
}

impl Default for ComponentSchedule {
    fn default() -> Self {
        Self {
            face: 180,
            eyes: 100,
            lips: 80,
            eyebrows: 80,
        }
    }
}

impl ComponentSchedule {
    /// Rescales release steps defined for a 1000-step schedule to `steps`.
    pub fn scaled(&self, steps: usize) -> Self {
        let f = |t: usize| (t * steps + 500) / 1000;
        Self {
            face: f(self.face),
            eyes: f(self.eyes),
            lips: f(self.lips),
            eyebrows: f(self.eyebrows),
        }
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        match name {
            "face" => Some(self.face),
            "eyes" => Some(self.eyes),
            "lips" => Some(self.lips),
            "eyebrows" => Some(self.eyebrows),
            _ => None,
        }
    }
}

/// Blend weight per named component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentAlphas {
    pub face: f64,
    pub eyes: f64,
    pub lips: f64,
    pub eyebrows: f64,
}

impl Default for ComponentAlphas {
    fn default() -> Self {
        Self::uniform(0.8)
    }
}

impl ComponentAlphas {
    pub fn uniform(alpha: f64) -> Self {
        Self {
            face: alpha,
            eyes: alpha,
            lips: alpha,
            eyebrows: alpha,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "face" => Some(self.face),
            "eyes" => Some(self.eyes),
            "lips" => Some(self.lips),
            "eyebrows" => Some(self.eyebrows),
            _ => None,
        }
    }
}

/// Builds component specs from named source-frame masks.
pub fn component_specs(
    masks: &std::collections::BTreeMap<String, Tensor>,
    alphas: &ComponentAlphas,
    schedule: &ComponentSchedule,
) -> Result<Vec<ComponentSpec>> {
    masks
        .iter()
        .map(|(name, mask)| {
            let unknown = || Error::invalid(format!("unknown component {name}"));
            Ok(ComponentSpec {
                name: name.clone(),
                mask: mask.clone(),
                alpha: alphas.get(name).ok_or_else(unknown)?,
                t_c: schedule.get(name).ok_or_else(unknown)?,
            })
        })
        .collect()
}

/// Rejects non-binary or overlapping component masks.
pub fn check_components(components: &[ComponentSpec]) -> Result<()> {
    for c in components {
        check_binary(&c.mask)?;
        if !(0.0..=1.0).contains(&c.alpha) {
            return Err(Error::invalid(format!("component {} weight {} outside [0, 1]", c.name, c.alpha)));
        }
    }
    for (i, a) in components.iter().enumerate() {
        for b in &components[i + 1..] {
            if overlaps(&a.mask, &b.mask)? {
                return Err(Error::invalid(format!("component masks {} and {} overlap", a.name, b.name)));
            }
        }
    }
    Ok(())
}

/// `M^s_t = background + Σ_c 1{t > t_c}·M^c`, clamped to `{0, 1}`.
pub fn cam_mask(t: usize, components: &[ComponentSpec], background: &Tensor) -> Result<Tensor> {
    check_binary(background)?;
    check_components(components)?;
    let mut out = background.clone();
    for c in components.iter().filter(|c| t > c.t_c) {
        out = out.zip_with(&c.mask, |a, b| a.max(b))?;
    }
    Ok(out)
}
