//! Landmarks, triangle meshes and piecewise-affine warping.
//!
//! Landmark coordinates are normalized to the image frame: `x, y ∈ [0, 1]`
//! with `y` pointing down, and `z` a relative depth on the same scale where
//! negative values are closer to the camera. With that convention a triangle
//! faces the camera when the z component of `(b - a) × (c - a)` is negative.

mod canonical;
mod delaunay;
mod warp;

pub use canonical::{canonical_landmarks, canonical_topology, CANONICAL_LANDMARK_COUNT, CANONICAL_TOPOLOGY_ID};
pub use delaunay::delaunay_triangulate;
pub use warp::{barycentric, build_warp, warp_image, warp_image_to, WarpField};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("duplicate point at index {0}")]
    DuplicatePoint(usize),
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered facial landmarks tied to a named topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub topology_id: String,
    pub points: Vec<[f64; 3]>,
}

impl LandmarkSet {
    pub fn new(topology_id: impl Into<String>, points: Vec<[f64; 3]>) -> Result<Self, GeomError> {
        let set = Self {
            topology_id: topology_id.into(),
            points,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(GeomError::InvalidLandmarks(format!("point {i} is not finite")));
            }
            if !(-0.5..=1.5).contains(&p[0]) || !(-0.5..=1.5).contains(&p[1]) {
                return Err(GeomError::InvalidLandmarks(format!(
                    "point {i} ({}, {}) outside [-0.5, 1.5]",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xy(&self, i: usize) -> [f64; 2] {
        [self.points[i][0], self.points[i][1]]
    }

    /// Applies `f` to every point, keeping the topology id.
    pub fn map_points(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> LandmarkSet {
        LandmarkSet {
            topology_id: self.topology_id.clone(),
            points: self.points.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, GeomError> {
        let set: LandmarkSet = serde_json::from_str(s)?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("landmarks serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeomError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeomError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Triangle list over `landmark_count` vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshTopology {
    pub landmark_count: usize,
    pub triangles: Vec<[usize; 3]>,
}

impl MeshTopology {
    pub fn new(landmark_count: usize, triangles: Vec<[usize; 3]>) -> Result<Self, GeomError> {
        let topo = Self {
            landmark_count,
            triangles,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if self.triangles.is_empty() {
            return Err(GeomError::InvalidTopology("empty triangle list".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.landmark_count) {
                return Err(GeomError::InvalidTopology(format!(
                    "triangle {t} {tri:?} indexes past {} landmarks",
                    self.landmark_count
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(GeomError::InvalidTopology(format!("triangle {t} repeats a vertex")));
            }
        }
        Ok(())
    }

    /// Errors unless `lms` has exactly `landmark_count` points.
    pub fn check(&self, lms: &LandmarkSet) -> Result<(), GeomError> {
        if lms.len() != self.landmark_count {
            return Err(GeomError::TopologyMismatch(format!(
                "topology expects {} landmarks, set '{}' has {}",
                self.landmark_count,
                lms.topology_id,
                lms.len()
            )));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, GeomError> {
        let topo: MeshTopology = serde_json::from_str(s)?;
        topo.validate()?;
        Ok(topo)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("topology serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GeomError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GeomError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// z of `(b - a) × (c - a)`; negative for camera-facing triangles.
#[inline]
pub(crate) fn normal_z(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}
