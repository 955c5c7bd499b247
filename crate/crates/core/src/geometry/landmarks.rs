use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::delaunay::{orient, Point};
use crate::error::{Error, Result};

/// Ordered landmarks plus the indices belonging to each named component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkSet {
    pub points: Vec<Point>,
    #[serde(default)]
    pub components: BTreeMap<String, Vec<usize>>,
}

impl LandmarkSet {
    /// Checks cardinality, non-collinearity, bounds and component indices.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.points.len() < 3 {
            return Err(Error::invalid("need at least 3 landmarks"));
        }
        let (a, b) = (self.points[0], self.points[1]);
        if self.points.iter().all(|&c| orient(a, b, c) == 0.0) {
            return Err(Error::Degenerate("all landmarks are collinear".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            let inside = p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= (width - 1) as f64 && p[1] <= (height - 1) as f64;
            if !inside {
                return Err(Error::invalid(format!("landmark {i} at {p:?} is outside {width}x{height}")));
            }
        }
        for (name, idx) in &self.components {
            if let Some(&i) = idx.iter().find(|&&i| i >= self.points.len()) {
                return Err(Error::invalid(format!("component {name} references landmark {i}")));
            }
        }
        Ok(())
    }

    /// Both sets must list corresponding points in the same order.
    pub fn check_correspondence(&self, other: &LandmarkSet) -> Result<()> {
        if self.points.len() != other.points.len() {
            return Err(Error::invalid(format!(
                "landmark counts differ: {} vs {}",
                self.points.len(),
                other.points.len()
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("landmarks serialize");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
