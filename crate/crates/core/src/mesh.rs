//! Triangle meshes, OBJ text I/O and primitive tessellation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::splat::{Aabb, TransformTRS, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    /// Radius 1 around the origin.
    Sphere,
    /// The cube `[-1, 1]³`.
    Cube,
    /// Radius 1 around the y axis, `y ∈ [-1, 1]`, capped.
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub transform: TransformTRS,
}

impl Primitive {
    pub fn new(shape: Shape, transform: TransformTRS) -> Self {
        Self { shape, transform }
    }

    /// World bounds of the primitive after `outer`.
    pub fn bounds(&self, outer: &TransformTRS) -> Aabb {
        let local = Aabb {
            min: Vec3::splat(-1.0),
            max: Vec3::splat(1.0),
        };
        local.transformed(&outer.compose(&self.transform))
    }
}

pub const SPHERE_STACKS: u32 = 8;
pub const SPHERE_SLICES: u32 = 12;
pub const CYLINDER_SEGMENTS: u32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: face index {index} out of range")]
    BadIndex { line: usize, index: i64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.positions.iter().copied())
    }

    pub fn transformed(&self, t: &TransformTRS) -> TriMesh {
        TriMesh {
            positions: self.positions.iter().map(|p| t.apply_point(*p)).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn append(&mut self, other: &TriMesh) {
        let base = self.positions.len() as u32;
        self.positions.extend_from_slice(&other.positions);
        self.faces.extend(other.faces.iter().map(|f| f.map(|i| i + base)));
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.positions.len() * 32 + self.faces.len() * 16);
        for p in &self.positions {
            out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
        }
        for f in &self.faces {
            out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        out
    }

    /// Reads `v` and `f` records; polygons are fan-triangulated, other
    /// records are ignored.
    pub fn from_obj(text: &str) -> Result<TriMesh, ObjError> {
        let mut mesh = TriMesh::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let mut words = raw.split_whitespace();
            match words.next() {
                Some("v") => {
                    let mut c = [0f32; 3];
                    for v in c.iter_mut() {
                        *v = words.next().and_then(|w| w.parse().ok()).ok_or_else(|| ObjError::Syntax {
                            line,
                            message: "vertex needs three numbers".into(),
                        })?;
                    }
                    mesh.positions.push(c.into());
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for w in words {
                        let head = w.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| ObjError::Syntax {
                            line,
                            message: format!("bad face index {w:?}"),
                        })?;
                        let count = mesh.positions.len() as i64;
                        let resolved = if i < 0 { count + i } else { i - 1 };
                        if resolved < 0 || resolved >= count {
                            return Err(ObjError::BadIndex { line, index: i });
                        }
                        idx.push(resolved as u32);
                    }
                    if idx.len() < 3 {
                        return Err(ObjError::Syntax {
                            line,
                            message: "face needs three vertices".into(),
                        });
                    }
                    for k in 1..idx.len() - 1 {
                        mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(mesh)
    }
}

/// Vertex count produced by [`tessellate`] for `shape`.
pub fn tessellated_vertex_count(shape: Shape) -> usize {
    match shape {
        Shape::Cube => 8,
        Shape::Sphere => (2 + (SPHERE_STACKS - 1) * SPHERE_SLICES) as usize,
        Shape::Cylinder => (2 * CYLINDER_SEGMENTS + 2) as usize,
    }
}

/// Triangle approximation of a primitive in its local frame.
pub fn tessellate(shape: Shape) -> TriMesh {
    match shape {
        Shape::Cube => {
            let positions = (0..8)
                .map(|i| {
                    let c = |bit: u32| if i & bit != 0 { 1.0 } else { -1.0 };
                    Vec3::new(c(1), c(2), c(4))
                })
                .collect();
            let quads = [
                [0, 2, 3, 1],
                [4, 5, 7, 6],
                [0, 1, 5, 4],
                [2, 6, 7, 3],
                [0, 4, 6, 2],
                [1, 3, 7, 5],
            ];
            let faces = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
            TriMesh { positions, faces }
        }
        Shape::Sphere => {
            let (stacks, slices) = (SPHERE_STACKS, SPHERE_SLICES);
            let mut positions = vec![Vec3::new(0.0, 1.0, 0.0)];
            for i in 1..stacks {
                let phi = std::f64::consts::PI * i as f64 / stacks as f64;
                for j in 0..slices {
                    let theta = std::f64::consts::TAU * j as f64 / slices as f64;
                    positions.push(Vec3::from_f64([phi.sin() * theta.cos(), phi.cos(), phi.sin() * theta.sin()]));
                }
            }
            positions.push(Vec3::new(0.0, -1.0, 0.0));
            let bottom = positions.len() as u32 - 1;
            let ring = |i: u32, j: u32| 1 + (i - 1) * slices + j % slices;
            let mut faces = Vec::new();
            for j in 0..slices {
                faces.push([0, ring(1, j + 1), ring(1, j)]);
                faces.push([bottom, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
            }
            for i in 1..stacks - 1 {
                for j in 0..slices {
                    let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
                    faces.push([a, b, d]);
                    faces.push([a, d, c]);
                }
            }
            TriMesh { positions, faces }
        }
        Shape::Cylinder => {
            let seg = CYLINDER_SEGMENTS;
            let mut positions = Vec::new();
            for y in [1.0f64, -1.0] {
                for j in 0..seg {
                    let theta = std::f64::consts::TAU * j as f64 / seg as f64;
                    positions.push(Vec3::from_f64([theta.cos(), y, theta.sin()]));
                }
            }
            positions.push(Vec3::new(0.0, 1.0, 0.0));
            positions.push(Vec3::new(0.0, -1.0, 0.0));
            let (top, bot) = (2 * seg, 2 * seg + 1);
            let mut faces = Vec::new();
            for j in 0..seg {
                let k = (j + 1) % seg;
                faces.push([j, k, seg + k]);
                faces.push([j, seg + k, seg + j]);
                faces.push([top, k, j]);
                faces.push([bot, seg + j, seg + k]);
            }
            TriMesh { positions, faces }
        }
    }
}

/// Union of tessellated primitives, each placed by `outer ∘ primitive`.
pub fn arrangement_mesh(primitives: &[Primitive], outer: &TransformTRS) -> TriMesh {
    let mut mesh = TriMesh::default();
    for p in primitives {
        mesh.append(&tessellate(p.shape).transformed(&outer.compose(&p.transform)));
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tessellation_counts() {
        for shape in [Shape::Cube, Shape::Sphere, Shape::Cylinder] {
            let m = tessellate(shape);
            assert_eq!(m.vertex_count(), tessellated_vertex_count(shape));
            assert!(m.faces.iter().flatten().all(|&i| (i as usize) < m.vertex_count()));
            let b = m.bounds().unwrap();
            assert!((b.max.x - 1.0).abs() < 1e-6 && (b.min.y + 1.0).abs() < 1e-6, "{shape:?}");
        }
    }

    #[test]
    fn obj_round_trip() {
        let m = tessellate(Shape::Sphere);
        let text = m.to_obj();
        assert_eq!(TriMesh::from_obj(&text).unwrap(), m);
    }

    #[test]
    fn obj_polygons_and_slashes() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 -1//1\n";
        let m = TriMesh::from_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(matches!(
            TriMesh::from_obj("v 0 0 0\nf 1 2 3\n"),
            Err(ObjError::BadIndex { line: 2, index: 2 })
        ));
    }
}
