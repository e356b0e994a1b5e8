//! Conforming triangle meshes with newest-vertex bisection.
//!
//! Every triangle is stored as `[newest, a, b]` in counter-clockwise order,
//! and its refinement edge is `(a, b)`, the side opposite the newest vertex.
//! Bisecting at the midpoint `m` of `(a, b)` yields `[m, newest, a]` and
//! `[m, b, newest]`, so the refinement edges of the children are the two
//! remaining sides of the parent.

use std::collections::BTreeSet;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Point2<f64>;

/// Domains with structured coarse meshes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[0, 1]^2`
    UnitSquare,
    /// `(-1, 1)^2` minus the quadrant `[0, 1] x [-1, 0]`, re-entrant corner at the origin.
    LShape,
}

impl Domain {
    /// Whether `x` lies on the boundary of the domain, up to `tol`.
    pub fn on_boundary(&self, x: &Point, tol: f64) -> bool {
        let near = |a: f64, b: f64| (a - b).abs() <= tol;
        match self {
            Domain::UnitSquare => {
                near(x.x, 0.0) || near(x.x, 1.0) || near(x.y, 0.0) || near(x.y, 1.0)
            }
            Domain::LShape => {
                near(x.x, -1.0)
                    || near(x.x, 1.0) && x.y >= -tol
                    || near(x.y, -1.0) && x.x <= tol
                    || near(x.y, 1.0)
                    || near(x.x, 0.0) && x.y <= tol
                    || near(x.y, 0.0) && x.x >= -tol
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// First owner is always present; the second is `None` on the boundary.
    pub owners: (usize, Option<usize>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.owners.1.is_none()
    }
}

/// One entry of the ordered boundary walk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryVertex {
    pub vertex: usize,
    /// Arc length from the start of the loop.
    pub arc: f64,
    pub corner: bool,
    /// Index of the boundary loop this vertex belongs to.
    pub component: usize,
}

/// Set of marked triangle indices, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkSet {
    marked: BTreeSet<usize>,
}

impl MarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all(mesh: &Mesh) -> Self {
        (0..mesh.num_triangles()).collect()
    }

    pub fn insert(&mut self, triangle: usize) -> bool {
        self.marked.insert(triangle)
    }

    pub fn contains(&self, triangle: usize) -> bool {
        self.marked.contains(&triangle)
    }

    pub fn len(&self) -> usize {
        self.marked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.marked.iter().copied()
    }
}

impl FromIterator<usize> for MarkSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self {
            marked: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    domain: Option<Domain>,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `triangle_edges[t][k]` is the edge opposite local vertex `k`.
    triangle_edges: Vec<[usize; 3]>,
    patch_offsets: Vec<usize>,
    patch_triangles: Vec<usize>,
    boundary: Vec<BoundaryVertex>,
    /// Position of each vertex in `boundary`, if it is a boundary vertex.
    boundary_position: Vec<Option<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw parts, keeping the given vertex order inside each
    /// triangle (the first vertex is the newest vertex).
    ///
    /// Fails if a triangle is not positively oriented, an edge has more than two
    /// owners, or the boundary edges do not form closed loops.
    pub fn from_parts(
        domain: Option<Domain>,
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::MeshTopology(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            if signed_area(&a, &b, &c) <= 0.0 {
                return Err(Error::MeshTopology(format!(
                    "triangle {t} is not positively oriented"
                )));
            }
        }

        let (edges, triangle_edges) = build_edges(&triangles)?;
        let (patch_offsets, patch_triangles) = build_patches(vertices.len(), &triangles);

        let mut mesh = Self {
            domain,
            vertices,
            triangles,
            edges,
            triangle_edges,
            patch_offsets,
            patch_triangles,
            boundary: Vec::new(),
            boundary_position: Vec::new(),
        };
        mesh.boundary = boundary_walk(&mesh)?;
        mesh.boundary_position = vec![None; mesh.vertices.len()];
        for (pos, bv) in mesh.boundary.iter().enumerate() {
            mesh.boundary_position[bv.vertex] = Some(pos);
        }
        Ok(mesh)
    }

    /// Like [`Mesh::from_parts`] but rotates each triangle so that its longest
    /// edge becomes the refinement edge. Used for coarse meshes.
    pub fn with_longest_edge_refinement(
        domain: Option<Domain>,
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let triangles = triangles
            .into_iter()
            .map(|tri| {
                let len = |k: usize| {
                    (vertices[tri[(k + 1) % 3]] - vertices[tri[(k + 2) % 3]]).norm_squared()
                };
                // Strict comparison keeps the first longest edge on ties.
                let mut k_best = 0;
                for k in 1..3 {
                    if len(k) > len(k_best) * (1.0 + 1e-12) {
                        k_best = k;
                    }
                }
                [tri[k_best], tri[(k_best + 1) % 3], tri[(k_best + 2) % 3]]
            })
            .collect();
        Self::from_parts(domain, vertices, triangles)
    }

    pub fn domain(&self) -> Option<Domain> {
        self.domain
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(&a, &b, &c)
    }

    /// Element diameter, the length of the longest side.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let p = self.corners(t);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                let angle = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                min = min.min(angle);
            }
        }
        min.to_degrees()
    }

    /// Triangles that have `vertex` as a corner, i.e. the support of its hat function.
    pub fn vertex_patch(&self, vertex: usize) -> &[usize] {
        &self.patch_triangles[self.patch_offsets[vertex]..self.patch_offsets[vertex + 1]]
    }

    /// Ordered boundary walk computed at construction.
    pub fn boundary(&self) -> &[BoundaryVertex] {
        &self.boundary
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_position[v].is_some()
    }

    pub fn boundary_position(&self, v: usize) -> Option<usize> {
        self.boundary_position[v]
    }

    /// Boundary vertex indices in walk order.
    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary.iter().map(|b| b.vertex)
    }

    /// Outward unit normal of a boundary edge.
    pub fn outward_normal(&self, edge: usize) -> Vector2<f64> {
        let e = &self.edges[edge];
        let t = e.owners.0;
        let tri = self.triangles[t];
        let [a, b] = e.vertices;
        // Orient (a, b) as it appears counter-clockwise in the owner.
        let pos_a = tri.iter().position(|&v| v == a).unwrap();
        let (from, to) = if tri[(pos_a + 1) % 3] == b {
            (a, b)
        } else {
            (b, a)
        };
        let d = self.vertices[to] - self.vertices[from];
        Vector2::new(d.y, -d.x) / d.norm()
    }

    /// Checks edge ownership, closed boundary loops with positive enclosed
    /// area, and (when the domain is known) that every boundary edge lies on
    /// the domain boundary. A hanging node shows up as a single-owner edge in
    /// the interior.
    pub fn check_conformity(&self) -> Result<()> {
        for (i, e) in self.edges.iter().enumerate() {
            if let Some(o) = e.owners.1 {
                if o == e.owners.0 {
                    return Err(Error::MeshTopology(format!("edge {i} owned twice by {o}")));
                }
            }
        }
        let n_loops = self.boundary.last().map_or(0, |b| b.component + 1);
        for c in 0..n_loops {
            let pts: Vec<Point> = self
                .boundary
                .iter()
                .filter(|b| b.component == c)
                .map(|b| self.vertices[b.vertex])
                .collect();
            let mut twice_area = 0.0;
            for k in 0..pts.len() {
                let (p, q) = (pts[k], pts[(k + 1) % pts.len()]);
                twice_area += p.x * q.y - q.x * p.y;
            }
            if twice_area.abs() < 1e-14 {
                return Err(Error::MeshTopology(format!(
                    "boundary loop {c} encloses no area (hanging node)"
                )));
            }
        }
        if let Some(domain) = self.domain {
            for (i, e) in self.edges.iter().enumerate() {
                if e.is_boundary() {
                    let mid = nalgebra::center(
                        &self.vertices[e.vertices[0]],
                        &self.vertices[e.vertices[1]],
                    );
                    if !domain.on_boundary(&mid, 1e-12) {
                        return Err(Error::MeshTopology(format!(
                            "single-owner edge {i} lies in the interior"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Index of a triangle containing `x` (within `tol` in barycentric
    /// coordinates) together with the barycentric coordinates.
    pub fn locate(&self, x: &Point, tol: f64) -> Option<(usize, [f64; 3])> {
        (0..self.num_triangles()).find_map(|t| {
            let bary = self.barycentric(t, x);
            bary.iter().all(|&l| l >= -tol).then_some((t, bary))
        })
    }

    pub fn barycentric(&self, t: usize, x: &Point) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        let area = signed_area(&a, &b, &c);
        [
            signed_area(x, &b, &c) / area,
            signed_area(&a, x, &c) / area,
            signed_area(&a, &b, x) / area,
        ]
    }

    pub fn map_to_physical(&self, t: usize, bary: [f64; 3]) -> Point {
        let [a, b, c] = self.corners(t);
        Point::from(a.coords * bary[0] + b.coords * bary[1] + c.coords * bary[2])
    }
}

pub(crate) fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn build_edges(triangles: &[[usize; 3]]) -> Result<(Vec<Edge>, Vec<[usize; 3]>)> {
    let mut half: Vec<(usize, usize, usize, usize)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            half.push((a.min(b), a.max(b), t, k));
        }
    }
    half.sort_unstable();

    let mut edges = Vec::new();
    let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
    let mut i = 0;
    while i < half.len() {
        let (a, b, t0, k0) = half[i];
        let mut j = i + 1;
        while j < half.len() && half[j].0 == a && half[j].1 == b {
            j += 1;
        }
        if j - i > 2 {
            return Err(Error::MeshTopology(format!(
                "edge ({a}, {b}) has {} owners",
                j - i
            )));
        }
        let id = edges.len();
        triangle_edges[t0][k0] = id;
        let second = (j - i == 2).then(|| {
            let (_, _, t1, k1) = half[i + 1];
            triangle_edges[t1][k1] = id;
            t1
        });
        edges.push(Edge {
            vertices: [a, b],
            owners: (t0, second),
        });
        i = j;
    }
    Ok((edges, triangle_edges))
}

fn build_patches(n_vertices: usize, triangles: &[[usize; 3]]) -> (Vec<usize>, Vec<usize>) {
    let mut counts = vec![0usize; n_vertices + 1];
    for tri in triangles {
        for &v in tri {
            counts[v + 1] += 1;
        }
    }
    for v in 0..n_vertices {
        counts[v + 1] += counts[v];
    }
    let offsets = counts.clone();
    let mut fill = counts;
    let mut list = vec![0; offsets[n_vertices]];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in tri {
            list[fill[v]] = t;
            fill[v] += 1;
        }
    }
    (offsets, list)
}

/// Walks the boundary loops counter-clockwise (domain on the left).
///
/// Each loop starts at its lowest, then leftmost vertex, which is `(0, 0)`
/// on the unit square and `(-1, -1)` on the L-shape. Loops are ordered by
/// their start vertex in the same lowest-then-leftmost order.
pub fn boundary_walk(mesh: &Mesh) -> Result<Vec<BoundaryVertex>> {
    let n = mesh.num_vertices();
    let mut next = vec![usize::MAX; n];
    let mut prev = vec![usize::MAX; n];
    for e in mesh.edges.iter().filter(|e| e.is_boundary()) {
        let tri = mesh.triangles[e.owners.0];
        let [a, b] = e.vertices;
        let pos_a = tri.iter().position(|&v| v == a).unwrap();
        let (from, to) = if tri[(pos_a + 1) % 3] == b {
            (a, b)
        } else {
            (b, a)
        };
        if next[from] != usize::MAX || prev[to] != usize::MAX {
            return Err(Error::MeshTopology(format!(
                "boundary is not a union of simple loops near vertex {from}"
            )));
        }
        next[from] = to;
        prev[to] = from;
    }

    let lowest_leftmost = |a: &usize, b: &usize| {
        let (pa, pb) = (mesh.vertices[*a], mesh.vertices[*b]);
        pa.y.total_cmp(&pb.y).then(pa.x.total_cmp(&pb.x))
    };
    let mut candidates: Vec<usize> = (0..n).filter(|&v| next[v] != usize::MAX).collect();
    candidates.sort_by(lowest_leftmost);

    let mut visited = vec![false; n];
    let mut walk = Vec::new();
    let mut component = 0;
    for &start in &candidates {
        if visited[start] {
            continue;
        }
        let mut arc = 0.0;
        let mut v = start;
        loop {
            if visited[v] {
                return Err(Error::MeshTopology(format!(
                    "boundary walk revisits vertex {v}"
                )));
            }
            visited[v] = true;
            if prev[v] == usize::MAX || next[v] == usize::MAX {
                return Err(Error::MeshTopology(format!("boundary open at vertex {v}")));
            }
            let incoming = mesh.vertices[v] - mesh.vertices[prev[v]];
            let outgoing = mesh.vertices[next[v]] - mesh.vertices[v];
            let cross = incoming.x * outgoing.y - incoming.y * outgoing.x;
            let corner = cross.abs() > 1e-10 * incoming.norm() * outgoing.norm();
            walk.push(BoundaryVertex {
                vertex: v,
                arc,
                corner,
                component,
            });
            arc += outgoing.norm();
            v = next[v];
            if v == start {
                break;
            }
        }
        component += 1;
    }
    Ok(walk)
}

/// Structured mesh with `n` subdivisions per unit length. Every square cell
/// is split along its anti-diagonal, and refinement edges are the hypotenuses.
pub fn make_structured_mesh(domain: Domain, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::config("coarse_n", "must be at least 1"));
    }
    let (cells, origin) = match domain {
        Domain::UnitSquare => (n, 0.0),
        Domain::LShape => (2 * n, -1.0),
    };
    let inside_cell = |i: usize, j: usize| match domain {
        Domain::UnitSquare => true,
        Domain::LShape => !(i >= n && j < n),
    };

    let mut index = vec![usize::MAX; (cells + 1) * (cells + 1)];
    let id = |i: usize, j: usize| j * (cells + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=cells {
        for i in 0..=cells {
            let touches_cell = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1))]
                .into_iter()
                .chain([(i.wrapping_sub(1), j.wrapping_sub(1))])
                .any(|(ci, cj)| ci < cells && cj < cells && inside_cell(ci, cj));
            if touches_cell {
                index[id(i, j)] = vertices.len();
                vertices.push(Point::new(
                    origin + i as f64 / n as f64,
                    origin + j as f64 / n as f64,
                ));
            }
        }
    }

    let mut triangles = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            if !inside_cell(i, j) {
                continue;
            }
            let a = index[id(i, j)];
            let b = index[id(i + 1, j)];
            let c = index[id(i + 1, j + 1)];
            let d = index[id(i, j + 1)];
            triangles.push([a, b, d]);
            triangles.push([b, c, d]);
        }
    }
    Mesh::with_longest_edge_refinement(Some(domain), vertices, triangles)
}

/// Result of one bisection pass: the refined mesh plus the data needed to
/// transfer nodal functions from the parent mesh.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: Mesh,
    /// Parent triangle (in the coarse mesh) of every fine triangle.
    pub parent: Vec<usize>,
    /// Endpoints of the bisected edge for each new vertex; new vertex `k` has
    /// index `coarse_vertices + k`.
    pub new_vertices: Vec<[usize; 2]>,
}

impl Refinement {
    /// Transfers nodal values to the refined mesh. Old vertices keep their
    /// values, midpoints receive the edge average, which is exact for P1.
    pub fn prolongate(&self, coarse: &[f64]) -> Vec<f64> {
        let mut fine = coarse.to_vec();
        fine.extend(
            self.new_vertices
                .iter()
                .map(|&[a, b]| 0.5 * (coarse[a] + coarse[b])),
        );
        fine
    }
}

/// Newest-vertex bisection of the marked triangles with conforming closure.
///
/// The refinement edge of every marked triangle is marked, then marks are
/// propagated until every triangle with a marked side has its refinement edge
/// marked. Each triangle is then bisected along its refinement edge, and the
/// children are bisected again if their refinement edges are marked, so a
/// triangle ends up with 1, 2, 3 or 4 children.
pub fn bisect_refine(mesh: &Mesh, marks: &MarkSet) -> Refinement {
    let n_edges = mesh.edges.len();
    let mut edge_marked = vec![false; n_edges];
    let mut queue = Vec::new();
    for t in marks.iter() {
        let e = mesh.triangle_edges[t][0];
        if !edge_marked[e] {
            edge_marked[e] = true;
            queue.push(e);
        }
    }
    while let Some(e) = queue.pop() {
        let (t0, t1) = mesh.edges[e].owners;
        for t in std::iter::once(t0).chain(t1) {
            let r = mesh.triangle_edges[t][0];
            if !edge_marked[r] {
                edge_marked[r] = true;
                queue.push(r);
            }
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut midpoint = vec![usize::MAX; n_edges];
    let mut new_vertices = Vec::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge_marked[e] {
            let [a, b] = edge.vertices;
            midpoint[e] = vertices.len();
            vertices.push(nalgebra::center(&mesh.vertices[a], &mesh.vertices[b]));
            new_vertices.push([a, b]);
        }
    }

    let mut triangles = Vec::with_capacity(mesh.num_triangles() + 2 * new_vertices.len());
    let mut parent = Vec::with_capacity(triangles.capacity());
    for (t, &[v0, v1, v2]) in mesh.triangles.iter().enumerate() {
        let [e0, e1, e2] = mesh.triangle_edges[t];
        if !edge_marked[e0] {
            triangles.push([v0, v1, v2]);
            parent.push(t);
            continue;
        }
        let m = midpoint[e0];
        // Child [m, v0, v1] has refinement edge (v0, v1), opposite v2.
        if edge_marked[e2] {
            let m2 = midpoint[e2];
            triangles.push([m2, m, v0]);
            triangles.push([m2, v1, m]);
            parent.extend([t, t]);
        } else {
            triangles.push([m, v0, v1]);
            parent.push(t);
        }
        // Child [m, v2, v0] has refinement edge (v2, v0), opposite v1.
        if edge_marked[e1] {
            let m1 = midpoint[e1];
            triangles.push([m1, m, v2]);
            triangles.push([m1, v0, m]);
            parent.extend([t, t]);
        } else {
            triangles.push([m, v2, v0]);
            parent.push(t);
        }
    }

    let mesh = Mesh::from_parts(mesh.domain, vertices, triangles)
        .expect("bisection of a conforming mesh is conforming");
    Refinement {
        mesh,
        parent,
        new_vertices,
    }
}

/// Bisects every triangle twice, which halves the mesh size on structured meshes.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let once = bisect_refine(mesh, &MarkSet::all(mesh)).mesh;
    bisect_refine(&once, &MarkSet::all(&once)).mesh
}
