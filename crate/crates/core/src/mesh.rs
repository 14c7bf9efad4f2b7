//! Conforming triangle meshes of the unit square, their red and barycentric
//! refinements, the coarse/fine hierarchy and coarse-element patches.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};

/// Absolute tolerance for geometric predicates. All coordinates produced by
/// the refinements used here are dyadic (or thirds of dyadic sums), so this is
/// far above round-off.
pub const GEOMETRIC_TOL: f64 = 1e-12;

/// An edge of the mesh together with its adjacent triangles.
#[derive(Clone, Debug)]
pub struct Face {
    pub vertices: [usize; 2],
    /// First entry is the lower-index adjacent triangle.
    pub triangles: [usize; 2],
    /// `false` for boundary faces, whose second triangle slot is unused.
    pub interior: bool,
    /// Unit normal. Interior faces point from `triangles[0]` into
    /// `triangles[1]`; boundary faces point out of the domain.
    pub normal: [f64; 2],
    pub length: f64,
}

impl Face {
    pub fn other_triangle(&self, t: usize) -> Option<usize> {
        if !self.interior {
            return None;
        }
        if self.triangles[0] == t {
            Some(self.triangles[1])
        } else {
            Some(self.triangles[0])
        }
    }
}

/// A conforming, positively oriented triangulation.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    faces: Vec<Face>,
    /// `triangle_faces[t][i]` is the face opposite local vertex `i`.
    triangle_faces: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    /// CSR adjacency vertex -> incident triangles.
    vertex_tri_offsets: Vec<usize>,
    vertex_tri: Vec<usize>,
    /// CSR adjacency vertex -> incident faces.
    vertex_face_offsets: Vec<usize>,
    vertex_face: Vec<usize>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn csr_from_lists(n: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; n + 1];
    for (row, _) in pairs.clone() {
        offsets[row + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut data = vec![0usize; offsets[n]];
    for (row, val) in pairs {
        data[fill[row]] = val;
        fill[row] += 1;
    }
    (offsets, data)
}

impl SimplicialMesh {
    /// Builds a mesh from raw vertex and triangle lists. Negatively oriented
    /// triangles are reoriented; degenerate triangles and non-manifold edges
    /// are rejected.
    pub fn new(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::structure(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.abs() <= GEOMETRIC_TOL * GEOMETRIC_TOL {
                return Err(Error::structure(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let (faces, triangle_faces) = build_faces(&vertices, &triangles)?;
        let mut boundary_vertex = vec![false; vertices.len()];
        for f in faces.iter().filter(|f| !f.interior) {
            boundary_vertex[f.vertices[0]] = true;
            boundary_vertex[f.vertices[1]] = true;
        }
        let (vertex_tri_offsets, vertex_tri) = csr_from_lists(
            vertices.len(),
            triangles.iter().enumerate().flat_map(|(t, tri)| tri.iter().map(move |&v| (v, t))),
        );
        let (vertex_face_offsets, vertex_face) = csr_from_lists(
            vertices.len(),
            faces.iter().enumerate().flat_map(|(f, face)| face.vertices.iter().map(move |&v| (v, f))),
        );
        Ok(SimplicialMesh {
            vertices,
            triangles,
            faces,
            triangle_faces,
            boundary_vertex,
            vertex_tri_offsets,
            vertex_tri,
            vertex_face_offsets,
            vertex_face,
        })
    }

    /// The unit square split by the diagonal from `(0,0)` to `(1,1)`.
    pub fn unit_square() -> Self {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let triangles = vec![[0, 1, 2], [0, 2, 3]];
        Self::new(vertices, triangles).expect("unit square mesh is valid")
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle_faces(&self, t: usize) -> [usize; 3] {
        self.triangle_faces[t]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tri[self.vertex_tri_offsets[v]..self.vertex_tri_offsets[v + 1]]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_face[self.vertex_face_offsets[v]..self.vertex_face_offsets[v + 1]]
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area(a, b, c)
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangle_coords(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Maximum element diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces.iter().enumerate().filter(|(_, f)| f.interior).map(|(i, _)| i)
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(|&v| !self.boundary_vertex[v])
    }

    /// Smallest interior angle of triangle `t`, in radians.
    pub fn min_angle(&self, t: usize) -> f64 {
        let p = self.triangle_coords(t);
        (0..3)
            .map(|i| {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(a, b) * dist(a, c));
                cos.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric_coords(&self, t: usize, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangle_coords(t);
        let area = signed_area(a, b, c);
        [
            signed_area(x, b, c) / area,
            signed_area(a, x, c) / area,
            signed_area(a, b, x) / area,
        ]
    }

    pub fn contains_point(&self, t: usize, x: [f64; 2]) -> bool {
        self.barycentric_coords(t, x).iter().all(|&l| l >= -GEOMETRIC_TOL)
    }

    /// Uniform red refinement: every triangle is split into four congruent
    /// children through its edge midpoints. Child `4t + i` has parent `t`.
    pub fn red_refine(&self) -> Refinement {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.faces.iter().map(|f| {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }));
        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        let mut parent = Vec::with_capacity(4 * self.num_triangles());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let tf = self.triangle_faces[t];
            let m_bc = nv + tf[0];
            let m_ca = nv + tf[1];
            let m_ab = nv + tf[2];
            triangles.push([a, m_ab, m_ca]);
            triangles.push([m_ab, b, m_bc]);
            triangles.push([m_ca, m_bc, c]);
            triangles.push([m_ab, m_bc, m_ca]);
            parent.extend([t; 4]);
        }
        let mesh = SimplicialMesh::new(vertices, triangles).expect("red refinement of a valid mesh is valid");
        Refinement { mesh, parent }
    }

    /// Barycentric refinement: every triangle is split into three by joining
    /// its barycenter to the vertices. Child `3t + i` has parent `t`.
    pub fn barycentric_refine(&self) -> Refinement {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend((0..self.num_triangles()).map(|t| self.barycenter(t)));
        let mut triangles = Vec::with_capacity(3 * self.num_triangles());
        let mut parent = Vec::with_capacity(3 * self.num_triangles());
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            let g = nv + t;
            triangles.push([a, b, g]);
            triangles.push([b, c, g]);
            triangles.push([c, a, g]);
            parent.extend([t; 3]);
        }
        let mesh = SimplicialMesh::new(vertices, triangles).expect("barycentric refinement of a valid mesh is valid");
        Refinement { mesh, parent }
    }

    /// First-order neighborhood: all triangles sharing at least one vertex
    /// with a member of `set`.
    pub fn neighborhood(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &t in set {
            for &v in &self.triangles[t] {
                out.extend(self.vertex_triangles(v).iter().copied());
            }
        }
        out
    }

    /// The `ell`-th order patch around element `t`.
    pub fn patch(&self, t: usize, ell: usize) -> Result<Patch> {
        if ell == 0 {
            return Err(Error::validation("patch order must be at least 1"));
        }
        if t >= self.num_triangles() {
            return Err(Error::validation(format!("element {t} out of range")));
        }
        let mut members = BTreeSet::from([t]);
        for _ in 0..ell {
            let next = self.neighborhood(&members);
            if next.len() == members.len() {
                break;
            }
            members = next;
        }
        let mut mask = vec![false; self.num_triangles()];
        for &m in &members {
            mask[m] = true;
        }
        let interior_faces = self
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.interior && mask[f.triangles[0]] && mask[f.triangles[1]])
            .map(|(i, _)| i)
            .collect();
        Ok(Patch {
            seed: t,
            order: ell,
            covers_domain: members.len() == self.num_triangles(),
            elements: members.into_iter().collect(),
            mask,
            interior_faces,
        })
    }

    /// Writes `nv nt`, then one `x y` line per vertex, then one `i j k` line
    /// per triangle (0-based).
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.num_vertices(), self.num_triangles())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Parses the format produced by [`SimplicialMesh::write_text`].
    pub fn read_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let parse_err = |what: &str| Error::Parse(format!("mesh dump: {what}"));
        let header = lines.next().ok_or_else(|| parse_err("missing header"))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| parse_err("bad header")))
            .collect::<Result<_>>()?;
        if counts.len() != 2 {
            return Err(parse_err("header must hold two counts"));
        }
        let mut vertices = Vec::with_capacity(counts[0]);
        for _ in 0..counts[0] {
            let line = lines.next().ok_or_else(|| parse_err("truncated vertex list"))?;
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err("bad coordinate")))
                .collect::<Result<_>>()?;
            if xy.len() != 2 {
                return Err(parse_err("vertex line must hold two numbers"));
            }
            vertices.push([xy[0], xy[1]]);
        }
        let mut triangles = Vec::with_capacity(counts[1]);
        for _ in 0..counts[1] {
            let line = lines.next().ok_or_else(|| parse_err("truncated triangle list"))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| parse_err("bad index")))
                .collect::<Result<_>>()?;
            if idx.len() != 3 {
                return Err(parse_err("triangle line must hold three indices"));
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }
        SimplicialMesh::new(vertices, triangles)
    }
}

/// Builds the face table of a triangle list. Errors on edges shared by more
/// than two triangles.
pub fn build_faces(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> Result<(Vec<Face>, Vec<[usize; 3]>)> {
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    let mut adjacency: Vec<Vec<usize>> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut triangle_faces = vec![[0usize; 3]; triangles.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let a = tri[(i + 1) % 3];
            let b = tri[(i + 2) % 3];
            let key = (a.min(b), a.max(b));
            let f = *edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                adjacency.push(Vec::with_capacity(2));
                edges.len() - 1
            });
            adjacency[f].push(t);
            triangle_faces[t][i] = f;
        }
    }
    let centroid = |t: usize| {
        let tri = triangles[t];
        let s = tri.iter().fold([0.0, 0.0], |acc, &v| [acc[0] + vertices[v][0], acc[1] + vertices[v][1]]);
        [s[0] / 3.0, s[1] / 3.0]
    };
    let mut faces = Vec::with_capacity(edges.len());
    for (f, (verts, adj)) in edges.into_iter().zip(adjacency).enumerate() {
        if adj.len() > 2 {
            return Err(Error::structure(format!(
                "non-manifold edge {f} ({}, {}) shared by {} triangles",
                verts[0],
                verts[1],
                adj.len()
            )));
        }
        let a = vertices[verts[0]];
        let b = vertices[verts[1]];
        let length = dist(a, b);
        let mut normal = [(b[1] - a[1]) / length, -(b[0] - a[0]) / length];
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let (interior, tris) = if adj.len() == 2 {
            (true, [adj[0].min(adj[1]), adj[0].max(adj[1])])
        } else {
            (false, [adj[0], adj[0]])
        };
        let c0 = centroid(tris[0]);
        if normal[0] * (mid[0] - c0[0]) + normal[1] * (mid[1] - c0[1]) < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        faces.push(Face {
            vertices: verts,
            triangles: tris,
            interior,
            normal,
            length,
        });
    }
    Ok((faces, triangle_faces))
}

/// Result of a uniform refinement: the child mesh and the child -> parent map.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: SimplicialMesh,
    pub parent: Vec<usize>,
}

/// An `ell`-th order patch of coarse elements around a seed element.
#[derive(Clone, Debug)]
pub struct Patch {
    pub seed: usize,
    pub order: usize,
    /// Sorted member elements.
    pub elements: Vec<usize>,
    /// Membership flag per coarse element.
    pub mask: Vec<bool>,
    /// Interior faces of the domain whose two neighbors both lie in the patch.
    pub interior_faces: Vec<usize>,
    pub covers_domain: bool,
}

impl Patch {
    pub fn contains(&self, t: usize) -> bool {
        self.mask[t]
    }
}

/// Coarse mesh `T_H`, fine mesh `T_h` (red refinements of the coarse mesh,
/// optionally followed by one barycentric refinement) and the fine -> coarse
/// element map.
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    coarse: SimplicialMesh,
    fine: SimplicialMesh,
    coarse_level: usize,
    fine_level: usize,
    barycentric: bool,
    fine_to_coarse: Vec<usize>,
    /// `ancestors[l][t]`: index of the level-`l` red ancestor of fine triangle `t`.
    ancestors: Vec<Vec<usize>>,
    /// Fine triangles grouped by coarse parent (CSR).
    coarse_children_offsets: Vec<usize>,
    coarse_children: Vec<usize>,
}

impl MeshHierarchy {
    /// Coarse mesh with side length `2^-coarse_level`, fine mesh with side
    /// length `2^-fine_level`, both obtained by red refinement of
    /// [`SimplicialMesh::unit_square`].
    pub fn new(coarse_level: usize, fine_level: usize, barycentric: bool) -> Result<Self> {
        if fine_level < coarse_level {
            return Err(Error::validation(format!(
                "fine level {fine_level} must not be coarser than coarse level {coarse_level}"
            )));
        }
        let mut mesh = SimplicialMesh::unit_square();
        let mut coarse = mesh.clone();
        let mut parents: Vec<Vec<usize>> = Vec::with_capacity(fine_level);
        for level in 0..fine_level {
            if level == coarse_level {
                coarse = mesh.clone();
            }
            let r = mesh.red_refine();
            parents.push(r.parent);
            mesh = r.mesh;
        }
        if fine_level == coarse_level {
            coarse = mesh.clone();
        }
        let (fine, bary_parent) = if barycentric {
            let r = mesh.barycentric_refine();
            (r.mesh, Some(r.parent))
        } else {
            (mesh, None)
        };

        // ancestors at every red level, from the finest down
        let mut ancestors = vec![Vec::new(); fine_level + 1];
        let top: Vec<usize> = match &bary_parent {
            Some(p) => p.clone(),
            None => (0..fine.num_triangles()).collect(),
        };
        ancestors[fine_level] = top;
        for level in (0..fine_level).rev() {
            let map = &parents[level];
            ancestors[level] = ancestors[level + 1].iter().map(|&t| map[t]).collect();
        }
        let fine_to_coarse = ancestors[coarse_level].clone();
        let (coarse_children_offsets, coarse_children) = csr_from_lists(
            coarse.num_triangles(),
            fine_to_coarse.iter().enumerate().map(|(f, &c)| (c, f)),
        );
        Ok(MeshHierarchy {
            coarse,
            fine,
            coarse_level,
            fine_level,
            barycentric,
            fine_to_coarse,
            ancestors,
            coarse_children_offsets,
            coarse_children,
        })
    }

    pub fn coarse(&self) -> &SimplicialMesh {
        &self.coarse
    }

    pub fn fine(&self) -> &SimplicialMesh {
        &self.fine
    }

    pub fn coarse_level(&self) -> usize {
        self.coarse_level
    }

    pub fn fine_level(&self) -> usize {
        self.fine_level
    }

    pub fn is_barycentric(&self) -> bool {
        self.barycentric
    }

    /// Coarse mesh size `H` (maximum diameter).
    pub fn coarse_size(&self) -> f64 {
        self.coarse.mesh_size()
    }

    /// Fine mesh size `h` (maximum diameter).
    pub fn fine_size(&self) -> f64 {
        self.fine.mesh_size()
    }

    pub fn coarse_parent(&self, fine_triangle: usize) -> usize {
        self.fine_to_coarse[fine_triangle]
    }

    pub fn fine_to_coarse(&self) -> &[usize] {
        &self.fine_to_coarse
    }

    /// Red-refinement ancestor of a fine triangle on level `level`
    /// (`0 <= level <= fine_level`).
    pub fn ancestor(&self, fine_triangle: usize, level: usize) -> usize {
        self.ancestors[level][fine_triangle]
    }

    /// Fine triangles inside coarse element `t`.
    pub fn fine_children(&self, t: usize) -> &[usize] {
        &self.coarse_children[self.coarse_children_offsets[t]..self.coarse_children_offsets[t + 1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_area(m: &SimplicialMesh) -> f64 {
        (0..m.num_triangles()).map(|t| m.area(t)).sum()
    }

    fn structured(level: usize) -> SimplicialMesh {
        let mut m = SimplicialMesh::unit_square();
        for _ in 0..level {
            m = m.red_refine().mesh;
        }
        m
    }

    #[test]
    fn red_refinement_counts_and_area() {
        let m0 = SimplicialMesh::unit_square();
        let m1 = m0.red_refine();
        assert_eq!(m1.mesh.num_triangles(), 8);
        let m2 = m1.mesh.red_refine();
        assert_eq!(m2.mesh.num_triangles(), 32);
        assert!((total_area(&m2.mesh) - 1.0).abs() < 1e-12);
        assert!(m2.parent.iter().enumerate().all(|(c, &p)| p == c / 4));
    }

    #[test]
    fn barycentric_refinement_counts() {
        let m = structured(1);
        let b = m.barycentric_refine();
        assert_eq!(b.mesh.num_triangles(), 24);
        for t in 0..m.num_triangles() {
            let g = b.mesh.vertices()[m.num_vertices() + t];
            let c = m.barycenter(t);
            assert!((g[0] - c[0]).abs() < 1e-15 && (g[1] - c[1]).abs() < 1e-15);
        }
        assert!((total_area(&b.mesh) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn barycentric_children_keep_angles_bounded() {
        // exhaustive over the generated mesh: children of a triangle never
        // lose more than a fixed fraction of the parent's minimum angle
        let m = structured(3);
        let b = m.barycentric_refine();
        let mut worst_ratio = f64::INFINITY;
        for (child, &p) in b.parent.iter().enumerate() {
            worst_ratio = worst_ratio.min(b.mesh.min_angle(child) / m.min_angle(p));
        }
        // right isosceles parents (45 deg) produce children with min angle
        // atan(1/3)-ish; the ratio is about 0.41
        assert!(worst_ratio > 0.35, "ratio {worst_ratio}");
    }

    #[test]
    fn face_counts() {
        let m = SimplicialMesh::unit_square();
        assert_eq!(m.interior_faces().count(), 1);
        let m1 = structured(1);
        assert_eq!(m1.interior_faces().count(), 8);
        assert_eq!(m1.faces().iter().filter(|f| !f.interior).count(), 8);
        for f in m1.faces() {
            let n = (f.normal[0].powi(2) + f.normal[1].powi(2)).sqrt();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn normals_point_from_lower_to_higher_triangle() {
        let m = structured(2);
        for f in m.faces().iter().filter(|f| f.interior) {
            let c0 = m.barycenter(f.triangles[0]);
            let c1 = m.barycenter(f.triangles[1]);
            let d = (c1[0] - c0[0]) * f.normal[0] + (c1[1] - c0[1]) * f.normal[1];
            assert!(f.triangles[0] < f.triangles[1]);
            assert!(d > 0.0);
        }
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [2.0, 0.5]];
        let triangles = vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]];
        assert!(matches!(SimplicialMesh::new(vertices, triangles), Err(Error::Structure(_))));
    }

    #[test]
    fn red_refinement_is_conforming() {
        // every parent edge midpoint is a vertex of exactly the children
        // adjacent to that edge
        let m = structured(1);
        let r = m.red_refine();
        for (f, face) in m.faces().iter().enumerate() {
            let mid = m.num_vertices() + f;
            let owners: BTreeSet<usize> = r
                .mesh
                .vertex_triangles(mid)
                .iter()
                .map(|&c| r.parent[c])
                .collect();
            let expected: BTreeSet<usize> = if face.interior {
                face.triangles.iter().copied().collect()
            } else {
                [face.triangles[0]].into()
            };
            assert_eq!(owners, expected);
        }
    }

    #[test]
    fn patch_first_order_and_saturation() {
        let m = structured(3);
        // pick an element away from the boundary
        let t = (0..m.num_triangles())
            .find(|&t| {
                let c = m.barycenter(t);
                (c[0] - 0.5).abs() < 0.1 && (c[1] - 0.5).abs() < 0.1
            })
            .unwrap();
        let p = m.patch(t, 1).unwrap();
        let expected: BTreeSet<usize> =
            m.triangles()[t].iter().flat_map(|&v| m.vertex_triangles(v).iter().copied()).collect();
        assert_eq!(p.elements, expected.into_iter().collect::<Vec<_>>());
        assert!(!p.covers_domain);
        let big = m.patch(t, 20).unwrap();
        assert!(big.covers_domain);
        assert_eq!(big.elements.len(), m.num_triangles());
        assert_eq!(big.interior_faces.len(), m.interior_faces().count());
        assert!(matches!(m.patch(t, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn patch_monotone_and_symmetric() {
        let m = structured(3);
        for t in 0..m.num_triangles() {
            let mut prev: Option<Patch> = None;
            for ell in 1..=5 {
                let p = m.patch(t, ell).unwrap();
                if let Some(q) = &prev {
                    assert!(q.elements.iter().all(|&e| p.contains(e)));
                }
                prev = Some(p);
            }
            let p1 = m.patch(t, 1).unwrap();
            for &k in &p1.elements {
                assert!(m.patch(k, 1).unwrap().contains(t));
            }
        }
    }

    #[test]
    fn patch_recursion() {
        let m = structured(3);
        let t = 17;
        let p2 = m.patch(t, 2).unwrap();
        let p1 = m.patch(t, 1).unwrap();
        let n = m.neighborhood(&p1.elements.iter().copied().collect());
        assert_eq!(p2.elements, n.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn hierarchy_compatibility() {
        let h = MeshHierarchy::new(1, 3, true).unwrap();
        assert_eq!(h.coarse().num_triangles(), 8);
        assert_eq!(h.fine().num_triangles(), 128 * 3);
        for f in 0..h.fine().num_triangles() {
            let c = h.coarse_parent(f);
            for &v in &h.fine().triangles()[f] {
                assert!(h.coarse().contains_point(c, h.fine().vertices()[v]));
            }
        }
        assert!((h.coarse_size() - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!((h.fine_size() - h.fine().mesh_size()).abs() < 1e-15);
        let total: usize = (0..8).map(|t| h.fine_children(t).len()).sum();
        assert_eq!(total, h.fine().num_triangles());
    }

    #[test]
    fn text_dump_round_trip() {
        let m = structured(2);
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = SimplicialMesh::read_text(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.vertices(), m.vertices());
    }
}
