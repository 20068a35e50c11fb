//! Triangle meshes: validated construction and the procedural test surfaces.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{CmmError, Result};
use crate::geom::{cross, norm, sub};

/// Triangles with area at or below this are rejected.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// An immutable, validated, edge-manifold triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    positions: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index range, degenerate faces, triangle area
    /// and edge-manifoldness.
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = positions.len();
        let mut edge_faces: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(CmmError::Validation(format!(
                        "face {fi} references vertex {v} but the mesh has {n} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(CmmError::Validation(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
            let area = triangle_area(&positions[f[0]], &positions[f[1]], &positions[f[2]]);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(CmmError::Validation(format!(
                    "face {fi} has area {area:e} <= {MIN_TRIANGLE_AREA:e}"
                )));
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let count = edge_faces.entry((a.min(b), a.max(b))).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(CmmError::Validation(format!(
                        "edge ({}, {}) borders more than two faces",
                        a.min(b),
                        a.max(b)
                    )));
                }
            }
        }
        Ok(Self { positions, faces })
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        triangle_area(&self.positions[a], &self.positions[b], &self.positions[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_faces()).map(|f| self.face_area(f)).sum()
    }

    /// Number of distinct undirected edges.
    pub fn n_edges(&self) -> usize {
        let mut edges = Vec::with_capacity(3 * self.faces.len());
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }
}

pub(crate) fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    0.5 * norm(&cross(&sub(b, a), &sub(c, a)))
}

/// Planar L-shaped domain made of three unit squares
/// `[0,1]^2 ∪ [1,2]x[0,1] ∪ [0,1]x[1,2]`, each gridded `m x m` with every
/// cell split into two triangles.
pub fn generate_lshape(m: usize) -> Result<TriangleMesh> {
    if m == 0 {
        return Err(CmmError::Config {
            field: "m",
            reason: "L-shape subdivision must be >= 1".into(),
        });
    }
    let side = 2 * m;
    let inside = |i: usize, j: usize| i <= m || j <= m;
    let mut index = alloc::vec![usize::MAX; (side + 1) * (side + 1)];
    let mut positions = Vec::new();
    for j in 0..=side {
        for i in 0..=side {
            if inside(i, j) {
                index[j * (side + 1) + i] = positions.len();
                positions.push([i as f64 / m as f64, j as f64 / m as f64, 0.0]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (side + 1) + i];
    let mut faces = Vec::new();
    for j in 0..side {
        for i in 0..side {
            // the top-right square is the notch
            if i >= m && j >= m {
                continue;
            }
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    TriangleMesh::new(positions, faces)
}

/// Icosahedron subdivided `level` times (each triangle into four), with every
/// vertex projected onto the unit sphere.
pub fn generate_sphere(level: u32) -> Result<TriangleMesh> {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut positions: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(normalized)
    .collect();
    let mut faces: Vec<[usize; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, positions: &mut Vec<[f64; 3]>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (pa, pb) = (positions[a], positions[b]);
                let mid = [
                    0.5 * (pa[0] + pb[0]),
                    0.5 * (pa[1] + pb[1]),
                    0.5 * (pa[2] + pb[2]),
                ];
                positions.push(normalized(&mid));
                positions.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut positions);
            let bc = midpoint(b, c, &mut positions);
            let ca = midpoint(c, a, &mut positions);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriangleMesh::new(positions, faces)
}

fn normalized(p: &[f64; 3]) -> [f64; 3] {
    let n = norm(p);
    [p[0] / n, p[1] / n, p[2] / n]
}
