//! Quadrilateral meshes of the unit square.
//!
//! A [`QuadMesh`] stores counterclockwise quads over a shared vertex list,
//! plus the derived edge topology used for H(div) degrees of freedom. Edges
//! are keyed by their sorted vertex pair and globally directed lo → hi.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

/// A global edge, always stored with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
}

/// Reference to a global edge from one quad, with the traversal sign:
/// `+1` when the quad's counterclockwise boundary walks the edge lo → hi.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadEdge {
    pub edge: usize,
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadMesh {
    vertices: Vec<Point2>,
    quads: Vec<[usize; 4]>,
    edges: Vec<Edge>,
    quad_edges: Vec<[QuadEdge; 4]>,
    /// Quads adjacent to each edge; the second slot is `None` on the boundary.
    edge_quads: Vec<[Option<(usize, usize)>; 2]>,
    h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshQuality {
    pub h_max: f64,
    /// max over quads of diam(K) / rho_K
    pub shape_regularity: f64,
}

/// Corners of quad `k` in counterclockwise order.
pub type QuadCorners = [Point2; 4];

impl QuadMesh {
    /// Builds a mesh from vertices and counterclockwise quads, deriving the edge
    /// topology. Rejects non-convex or clockwise quads and non-manifold edges.
    pub fn new(vertices: Vec<Point2>, quads: Vec<[usize; 4]>) -> Result<Self> {
        if quads.is_empty() {
            return Err(Error::InvalidMesh("mesh has no quads".into()));
        }
        if let Some(v) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not finite")));
        }
        let mut edge_ids: HashMap<Edge, usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_quads: Vec<[Option<(usize, usize)>; 2]> = Vec::new();
        let mut quad_edges = Vec::with_capacity(quads.len());
        let mut h: f64 = 0.0;

        for (k, quad) in quads.iter().enumerate() {
            if let Some(&v) = quad.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("quad {k} references vertex {v}")));
            }
            let corners = quad.map(|v| vertices[v]);
            for (c, jac) in corner_jacobians(&corners).into_iter().enumerate() {
                if !(jac > 0.0) {
                    return Err(Error::InvalidMesh(format!(
                        "quad {k} has non-positive corner Jacobian {jac:e} at local vertex {c}"
                    )));
                }
            }
            h = h.max(diameter(&corners));

            let mut local = [QuadEdge { edge: 0, sign: 1 }; 4];
            for (e, slot) in local.iter_mut().enumerate() {
                let (a, b) = (quad[e], quad[(e + 1) % 4]);
                let key = Edge { lo: a.min(b), hi: a.max(b) };
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_quads.push([None, None]);
                    edges.len() - 1
                });
                let adj = &mut edge_quads[id];
                if adj[0].is_none() {
                    adj[0] = Some((k, e));
                } else if adj[1].is_none() {
                    adj[1] = Some((k, e));
                } else {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two quads",
                        key.lo, key.hi
                    )));
                }
                *slot = QuadEdge { edge: id, sign: if a < b { 1 } else { -1 } };
            }
            quad_edges.push(local);
        }

        for (id, adj) in edge_quads.iter().enumerate() {
            if let [Some((k0, e0)), Some((k1, e1))] = *adj {
                if quad_edges[k0][e0].sign == quad_edges[k1][e1].sign {
                    return Err(Error::InvalidMesh(format!(
                        "edge {id} is traversed in the same direction by quads {k0} and {k1}"
                    )));
                }
            }
        }

        Ok(Self { vertices, quads, edges, quad_edges, edge_quads, h })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn quad_edges(&self, k: usize) -> &[QuadEdge; 4] {
        &self.quad_edges[k]
    }

    /// `(quad, local edge)` pairs adjacent to a global edge.
    pub fn edge_quads(&self, edge: usize) -> &[Option<(usize, usize)>; 2] {
        &self.edge_quads[edge]
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.edge_quads[edge][1].is_none()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_quads(&self) -> usize {
        self.quads.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn corners(&self, k: usize) -> QuadCorners {
        self.quads[k].map(|v| self.vertices[v])
    }

    /// Writes the plain-text format: a `quadmesh <nv> <nq>` header, one
    /// `x y` line per vertex and one `i0 i1 i2 i3` line per quad.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "quadmesh {} {}", self.vertices.len(), self.quads.len()).unwrap();
        for p in &self.vertices {
            writeln!(out, "{:.16e} {:.16e}", p.x, p.y).unwrap();
        }
        for q in &self.quads {
            writeln!(out, "{} {} {} {}", q[0], q[1], q[2], q[3]).unwrap();
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_text().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let bad = |line: usize, msg: &str| Error::MeshFormat { line, msg: msg.to_string() };

        let (ln, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let header = header?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some("quadmesh") {
            return Err(bad(ln, "expected `quadmesh <nv> <nq>` header"));
        }
        let mut count = || -> Result<usize> {
            tok.next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(ln, "malformed vertex/quad count"))
        };
        let (nv, nq) = (count()?, count()?);

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, line) = lines.next().ok_or_else(|| bad(ln, "truncated vertex list"))?;
            let line = line?;
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "malformed coordinate"))?;
            let [x, y] = xy[..] else { return Err(bad(ln, "expected two coordinates")) };
            vertices.push(Point2::new(x, y));
        }
        let mut quads = Vec::with_capacity(nq);
        for _ in 0..nq {
            let (ln, line) = lines.next().ok_or_else(|| bad(ln, "truncated quad list"))?;
            let line = line?;
            let ids: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "malformed vertex index"))?;
            let [a, b, c, d] = ids[..] else { return Err(bad(ln, "expected four vertex indices")) };
            quads.push([a, b, c, d]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing content after quad list"));
        }
        Self::new(vertices, quads)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Jacobian determinant of the bilinear map at the four corners. For a
/// counterclockwise quad this is twice the area of the corner triangle
/// (previous, current, next vertex).
pub fn corner_jacobians(c: &QuadCorners) -> [f64; 4] {
    std::array::from_fn(|i| {
        let prev = c[(i + 3) % 4];
        let next = c[(i + 1) % 4];
        cross(next - c[i], prev - c[i])
    })
}

fn cross(a: Point2, b: Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn diameter(c: &QuadCorners) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            d = d.max(c[i].dist(c[j]));
        }
    }
    d
}

/// Smallest inscribed-circle diameter over the four triangles spanned by
/// three of the quad's vertices.
fn min_incircle_diameter(c: &QuadCorners) -> f64 {
    (0..4)
        .map(|skip| {
            let t: Vec<Point2> = (0..4).filter(|&i| i != skip).map(|i| c[i]).collect();
            let area = 0.5 * cross(t[1] - t[0], t[2] - t[0]).abs();
            let perimeter = t[0].dist(t[1]) + t[1].dist(t[2]) + t[2].dist(t[0]);
            4.0 * area / perimeter
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn mesh_quality(mesh: &QuadMesh) -> MeshQuality {
    let shape_regularity = (0..mesh.n_quads())
        .map(|k| {
            let c = mesh.corners(k);
            diameter(&c) / min_incircle_diameter(&c)
        })
        .fold(0.0, f64::max);
    MeshQuality { h_max: mesh.h(), shape_regularity }
}

/// Uniform `n × n` mesh of the unit square.
pub fn generate_square_mesh(n: usize) -> Result<QuadMesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("square mesh needs n >= 1".into()));
    }
    structured_mesh(n, |_, j| j as f64 / n as f64)
}

/// Default vertical distortion of the trapezoidal family; gives interior
/// trapezoids whose parallel edges are in ratio 1 : 2.
pub const DEFAULT_DISTORTION: f64 = 1.0 / 6.0;

/// `n × n` mesh whose interior horizontal grid lines zigzag by `±d·h`:
/// `y(i, j) = h (j + (-1)^(i+j) d)` for `0 < j < n`, with the bottom and top
/// lines kept flat. Interior elements are congruent (up to reflection) to a
/// trapezoid with vertical parallel sides `h(1 − 2d)` and `h(1 + 2d)`.
pub fn generate_trapezoidal_mesh(n: usize, d: f64) -> Result<QuadMesh> {
    if n < 2 {
        return Err(Error::InvalidParameter("trapezoidal mesh needs n >= 2".into()));
    }
    if !(0.0..0.5).contains(&d) {
        return Err(Error::InvalidParameter(format!(
            "trapezoid distortion must lie in [0, 1/2), got {d}"
        )));
    }
    let h = 1.0 / n as f64;
    structured_mesh(n, |i, j| {
        if j == 0 || j == n {
            j as f64 * h
        } else {
            let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            h * (j as f64 + s * d)
        }
    })
}

fn structured_mesh(n: usize, y_of: impl Fn(usize, usize) -> f64) -> Result<QuadMesh> {
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 / n as f64, y_of(i, j)));
        }
    }
    let mut quads = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            quads.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    QuadMesh::new(vertices, quads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        for (n, nq, nv, ne) in [(1, 1, 4, 4), (2, 4, 9, 12), (4, 16, 25, 40)] {
            let m = generate_square_mesh(n).unwrap();
            assert_eq!((m.n_quads(), m.n_vertices(), m.n_edges()), (nq, nv, ne));
            assert_eq!(m.n_vertices() + m.n_quads(), m.n_edges() + 1);
            assert!((m.h() - 2f64.sqrt() / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_square_mesh(0).is_err());
        assert!(generate_trapezoidal_mesh(1, 0.1).is_err());
        assert!(generate_trapezoidal_mesh(4, 0.5).is_err());
        assert!(generate_trapezoidal_mesh(4, -0.1).is_err());
    }

    #[test]
    fn zero_distortion_matches_square() {
        for n in [2, 3, 8] {
            let t = generate_trapezoidal_mesh(n, 0.0).unwrap();
            let s = generate_square_mesh(n).unwrap();
            assert_eq!(t.vertices(), s.vertices());
            assert_eq!(t.quads(), s.quads());
        }
    }

    #[test]
    fn trapezoid_vertical_edges_one_to_two() {
        let n = 4;
        let h = 0.25;
        let m = generate_trapezoidal_mesh(n, 1.0 / 6.0).unwrap();
        // interior element at column 1, row 1
        let c = m.corners(n + 1);
        let left = c[3].y - c[0].y;
        let right = c[2].y - c[1].y;
        let (short, long) = (left.min(right), left.max(right));
        assert!((short - h * 2.0 / 3.0).abs() < 1e-15);
        assert!((long - h * 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_corners_positive() {
        let m = generate_trapezoidal_mesh(8, 1.0 / 6.0).unwrap();
        for k in 0..m.n_quads() {
            assert!(corner_jacobians(&m.corners(k)).iter().all(|&j| j > 0.0));
        }
    }

    #[test]
    fn unit_square_shape_regularity() {
        let m = generate_square_mesh(1).unwrap();
        let q = mesh_quality(&m);
        let expected = 2f64.sqrt() / (2.0 - 2f64.sqrt());
        assert!((q.shape_regularity - expected).abs() < 1e-12);
        for n in [2, 4, 8] {
            let qn = mesh_quality(&generate_square_mesh(n).unwrap());
            assert!((qn.shape_regularity - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_shape_regularity_bounded() {
        let vals: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&n| mesh_quality(&generate_trapezoidal_mesh(n, 1.0 / 6.0).unwrap()).shape_regularity)
            .collect();
        assert!(vals.iter().all(|&v| v >= 1.0 && v < 10.0));
        // element shapes are fixed up to scale from n = 4 on
        assert!((vals[2] - vals[1]).abs() < 1e-9 && (vals[3] - vals[1]).abs() < 1e-9);
    }

    #[test]
    fn interior_edges_have_opposite_signs() {
        let m = generate_trapezoidal_mesh(4, 0.2).unwrap();
        let mut boundary = 0;
        for e in 0..m.n_edges() {
            let edge = m.edges()[e];
            assert!(edge.lo < edge.hi);
            match *m.edge_quads(e) {
                [Some((k0, l0)), Some((k1, l1))] => {
                    assert_eq!(m.quad_edges(k0)[l0].sign, -m.quad_edges(k1)[l1].sign)
                }
                [Some(_), None] => boundary += 1,
                _ => unreachable!(),
            }
        }
        assert_eq!(boundary, 16);
    }

    #[test]
    fn rejects_clockwise_quad() {
        let v = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(QuadMesh::new(v.clone(), vec![[0, 1, 2, 3]]).is_ok());
        assert!(QuadMesh::new(v.clone(), vec![[0, 3, 2, 1]]).is_err());
        assert!(QuadMesh::new(v, vec![[0, 1, 2, 7]]).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = generate_trapezoidal_mesh(5, 0.123456789).unwrap();
        let text = m.to_text();
        let back = QuadMesh::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with("quadmesh 36 25\n"));
    }

    #[test]
    fn reader_reports_line_numbers() {
        let err = QuadMesh::read_from("quadmesh 2 0\n0 0\nfoo 1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MeshFormat { line: 3, .. }), "{err}");
    }
}
