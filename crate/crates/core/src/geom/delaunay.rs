use super::{normal_z, GeomError, MeshTopology};

/// Bowyer–Watson triangulation of 2-D points.
///
/// Triangles are emitted camera-facing (negative normal z), each rotated so
/// its smallest index comes first, and sorted. Points are inserted in input
/// order, so cocircular ties resolve the same way on every call.
pub fn delaunay_triangulate(points: &[[f64; 2]]) -> Result<MeshTopology, GeomError> {
    let n = points.len();
    if n < 3 {
        return Err(GeomError::TooFewPoints(n));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(GeomError::InvalidLandmarks("non-finite point".into()));
    }

    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let span = (max[0] - min[0]).max(max[1] - min[1]);
    if span == 0.0 {
        return Err(GeomError::Collinear);
    }
    // Work in a unit-scale frame.
    let pts: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [(p[0] - min[0]) / span, (p[1] - min[1]) / span])
        .collect();

    let a = pts[0];
    let far = pts
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|x, y| dist2(a, *x.1).total_cmp(&dist2(a, *y.1)))
        .map(|(i, _)| i)
        .unwrap();
    let b = pts[far];
    let ab = dist2(a, b).sqrt();
    let collinear = pts
        .iter()
        .all(|&p| (normal_z(a, b, p) / ab).abs() < 1e-12);
    if collinear {
        return Err(GeomError::Collinear);
    }

    for i in 0..n {
        for j in 0..i {
            if pts[i] == pts[j] {
                return Err(GeomError::DuplicatePoint(i));
            }
        }
    }

    // Super triangle around the unit box, vertices n, n+1, n+2.
    let m = 1.0e3;
    let mut verts = pts.clone();
    verts.push([0.5 - 2.0 * m, 0.5 - m]);
    verts.push([0.5 + 2.0 * m, 0.5 - m]);
    verts.push([0.5, 0.5 + 2.0 * m]);

    let mut tris: Vec<Tri> = vec![Tri::new(&verts, [n, n + 1, n + 2])];

    for (pi, &p) in pts.iter().enumerate() {
        let mut bad = Vec::new();
        let mut keep = Vec::with_capacity(tris.len());
        for t in tris.drain(..) {
            if t.circum_contains(p) {
                bad.push(t);
            } else {
                keep.push(t);
            }
        }
        tris = keep;

        // Boundary of the cavity: edges used by exactly one bad triangle.
        let mut edges: Vec<[usize; 2]> = Vec::new();
        for t in &bad {
            for e in t.edges() {
                if let Some(pos) = edges.iter().position(|f| f[0] == e[1] && f[1] == e[0]) {
                    edges.swap_remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        edges.sort_unstable();
        for e in edges {
            tris.push(Tri::new(&verts, [e[0], e[1], pi]));
        }
    }

    let mut out: Vec<[usize; 3]> = tris
        .iter()
        .filter(|t| t.v.iter().all(|&i| i < n))
        .map(|t| {
            let [i, j, k] = t.v;
            // Camera-facing winding in the caller's frame.
            let v = if normal_z(points[i], points[j], points[k]) < 0.0 {
                [i, j, k]
            } else {
                [i, k, j]
            };
            let r = (0..3).min_by_key(|&s| v[s]).unwrap();
            [v[r], v[(r + 1) % 3], v[(r + 2) % 3]]
        })
        .collect();
    out.sort_unstable();
    MeshTopology::new(n, out)
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

struct Tri {
    v: [usize; 3],
    center: [f64; 2],
    r2: f64,
}

impl Tri {
    fn new(verts: &[[f64; 2]], v: [usize; 3]) -> Self {
        let (a, b, c) = (verts[v[0]], verts[v[1]], verts[v[2]]);
        // Store counter-clockwise in the math frame so shared edges appear
        // with opposite orientation in neighbours.
        let v = if normal_z(a, b, c) > 0.0 { v } else { [v[0], v[2], v[1]] };
        let (a, b, c) = (verts[v[0]], verts[v[1]], verts[v[2]]);
        let bx = b[0] - a[0];
        let by = b[1] - a[1];
        let cx = c[0] - a[0];
        let cy = c[1] - a[1];
        let d = 2.0 * (bx * cy - by * cx);
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        Self {
            v,
            center: [a[0] + ux, a[1] + uy],
            r2: ux * ux + uy * uy,
        }
    }

    fn circum_contains(&self, p: [f64; 2]) -> bool {
        let d2 = dist2(self.center, p);
        d2 < self.r2 * (1.0 - 1e-12)
    }

    fn edges(&self) -> [[usize; 2]; 3] {
        let [a, b, c] = self.v;
        [[a, b], [b, c], [c, a]]
    }
}
