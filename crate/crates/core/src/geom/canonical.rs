//! Built-in 468-point mean-face mesh.
//!
//! The canonical face is an ellipsoidal cap sampled on 18 concentric rings
//! of 26 landmarks each; ring `k` has normalized radius `(k + 1) / 18` and
//! odd rings are rotated by half a step. Depth follows the cap, so the face
//! center is closest to the camera. The topology is the Delaunay
//! triangulation of the frontal projection.

use std::sync::OnceLock;

use super::{delaunay_triangulate, LandmarkSet, MeshTopology};

pub const CANONICAL_TOPOLOGY_ID: &str = "beautykit-canonical-468";
pub const CANONICAL_LANDMARK_COUNT: usize = 468;

const RINGS: usize = 18;
const PER_RING: usize = 26;

const CENTER: [f64; 2] = [0.5, 0.52];
const SEMI_AXES: [f64; 2] = [0.34, 0.42];
const DEPTH: f64 = 0.3;

fn canonical_points() -> Vec<[f64; 3]> {
    let mut pts = Vec::with_capacity(CANONICAL_LANDMARK_COUNT);
    for k in 0..RINGS {
        let r = (k + 1) as f64 / RINGS as f64;
        let offset = if k % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..PER_RING {
            let theta = std::f64::consts::TAU * (j as f64 + offset) / PER_RING as f64;
            let x = CENTER[0] + SEMI_AXES[0] * r * theta.cos();
            let y = CENTER[1] + SEMI_AXES[1] * r * theta.sin();
            let z = -DEPTH * (1.0 - 0.95 * r * r).sqrt();
            pts.push([x, y, z]);
        }
    }
    pts
}

/// Mean-face landmark set in the template frame.
pub fn canonical_landmarks() -> LandmarkSet {
    LandmarkSet {
        topology_id: CANONICAL_TOPOLOGY_ID.to_string(),
        points: canonical_points(),
    }
}

pub fn canonical_topology() -> &'static MeshTopology {
    static TOPO: OnceLock<MeshTopology> = OnceLock::new();
    TOPO.get_or_init(|| {
        let xy: Vec<[f64; 2]> = canonical_points().iter().map(|p| [p[0], p[1]]).collect();
        delaunay_triangulate(&xy).expect("canonical mesh triangulates")
    })
}
