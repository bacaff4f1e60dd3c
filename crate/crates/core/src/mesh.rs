//! Triangulations with region and boundary tags, degree-of-freedom maps and
//! regular sampling grids over the solid.
//!
//! Node numbering: vertices come first, then one node per edge midpoint
//! (`n_vertices + edge_id`). Element-local node order is
//! `[v0, v1, v2, m01, m12, m20]`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{dist, Point, Rect, Region, Scene, Side};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    GammaF,
    GammaSHorizontal,
    GammaSVertical,
    GammaI,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::GammaF => "gamma_f",
            BoundaryTag::GammaSHorizontal => "gamma_s_horizontal",
            BoundaryTag::GammaSVertical => "gamma_s_vertical",
            BoundaryTag::GammaI => "gamma_i",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// Rectangle side for outer edges, `None` on the interface.
    pub side: Option<Side>,
    /// Adjacent triangle; the solid one for interface edges.
    pub triangle: usize,
    /// Unit normal pointing out of `triangle` (into the fluid on the interface).
    pub normal: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Unique edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle, ids of edges (v0,v1), (v1,v2), (v2,v0).
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Per SRA, receiver vertex ids in array order.
    pub sra_nodes: Vec<Vec<usize>>,
    pub bounds: Rect,
    edge_triangles: Vec<[usize; 2]>,
    grid: Option<StructuredGridData>,
}

#[derive(Debug, Clone)]
struct StructuredGridData {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Barycentric coordinates of `p` in triangle `(a, b, c)`.
pub fn barycentric(a: Point, b: Point, c: Point, p: Point) -> [f64; 3] {
    let area = signed_area(a, b, c);
    let l0 = signed_area(p, b, c) / area;
    let l1 = signed_area(a, p, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}

/// Splits `[a, b]` into the nearest whole number of segments of length `h`,
/// so thin layers such as the skin band are not cut into slivers.
fn push_segment(lines: &mut Vec<f64>, a: f64, b: f64, h: f64) {
    let n = ((b - a) / h).round().max(1.0) as usize;
    for k in 1..=n {
        lines.push(if k == n { b } else { a + (b - a) * k as f64 / n as f64 });
    }
}

/// Grid lines through every breakpoint in `breaks` (sorted, deduplicated).
fn grid_lines(breaks: &mut Vec<f64>, h: f64) -> Vec<f64> {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + b.abs()));
    let mut lines = vec![breaks[0]];
    for w in breaks.windows(2) {
        push_segment(&mut lines, w[0], w[1], h);
    }
    lines
}

impl Mesh {
    /// Builds a mesh from counter-clockwise triangles. Boundary tags follow the
    /// regions: outer fluid edges are `GammaF`, outer solid edges are split by
    /// orientation, and fluid/solid shared edges are `GammaI`.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, regions: Vec<Region>) -> Result<Self> {
        if triangles.len() != regions.len() {
            return Err(Error::Mesh("one region tag per triangle required".into()));
        }
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::Mesh("empty mesh".into()));
        }
        let mut triangles = triangles;
        for t in triangles.iter_mut() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("triangle {t:?} references a missing vertex")));
            }
            let a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if a == 0.0 {
                return Err(Error::Mesh(format!("triangle {t:?} is degenerate")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut bounds = Rect {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for p in &vertices {
            bounds.x_min = bounds.x_min.min(p[0]);
            bounds.x_max = bounds.x_max.max(p[0]);
            bounds.y_min = bounds.y_min.min(p[1]);
            bounds.y_max = bounds.y_max.max(p[1]);
        }

        let mut edge_ids: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[usize; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (ti, t) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push([NONE, NONE]);
                    edges.len() - 1
                });
                let slot = &mut edge_triangles[id];
                if slot[0] == NONE {
                    slot[0] = ti;
                } else if slot[1] == NONE {
                    slot[1] = ti;
                } else {
                    return Err(Error::Mesh(format!("edge {key:?} shared by more than two triangles")));
                }
                te[k] = id;
            }
            triangle_edges.push(te);
        }

        let scale = bounds.width().max(bounds.height());
        let on = |a: f64, b: f64| (a - b).abs() <= 1e-10 * scale;
        let mut boundary_edges = Vec::new();
        for (e, &[a, b]) in edges.iter().enumerate() {
            let [t0, t1] = edge_triangles[e];
            let (pa, pb) = (vertices[a], vertices[b]);
            let boundary = if t1 == NONE {
                let region = regions[t0];
                let side = if on(pa[1], bounds.y_min) && on(pb[1], bounds.y_min) {
                    Some(Side::Bottom)
                } else if on(pa[1], bounds.y_max) && on(pb[1], bounds.y_max) {
                    Some(Side::Top)
                } else if on(pa[0], bounds.x_min) && on(pb[0], bounds.x_min) {
                    Some(Side::Left)
                } else if on(pa[0], bounds.x_max) && on(pb[0], bounds.x_max) {
                    Some(Side::Right)
                } else {
                    None
                };
                let tag = if region.is_fluid() {
                    BoundaryTag::GammaF
                } else if (pa[1] - pb[1]).abs() <= (pa[0] - pb[0]).abs() {
                    BoundaryTag::GammaSHorizontal
                } else {
                    BoundaryTag::GammaSVertical
                };
                Some((tag, side, t0))
            } else if regions[t0].is_fluid() != regions[t1].is_fluid() {
                let solid = if regions[t0].is_fluid() { t1 } else { t0 };
                Some((BoundaryTag::GammaI, None, solid))
            } else {
                None
            };
            if let Some((tag, side, tri)) = boundary {
                let len = dist(pa, pb);
                let mut normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                let t = triangles[tri];
                let opposite = t.iter().copied().find(|&v| v != a && v != b).unwrap_or(a);
                let po = vertices[opposite];
                if (po[0] - pa[0]) * normal[0] + (po[1] - pa[1]) * normal[1] > 0.0 {
                    normal = [-normal[0], -normal[1]];
                }
                boundary_edges.push(BoundaryEdge {
                    edge: e,
                    vertices: [a, b],
                    tag,
                    side,
                    triangle: tri,
                    normal,
                });
            }
        }

        Ok(Self {
            vertices,
            triangles,
            regions,
            edges,
            triangle_edges,
            boundary_edges,
            sra_nodes: Vec::new(),
            bounds,
            edge_triangles,
            grid: None,
        })
    }

    /// Tensor grid `xs × ys` split into two triangles per cell, with the
    /// diagonal direction alternating like a checkerboard.
    pub fn structured(xs: &[f64], ys: &[f64], region_of: impl Fn(Point) -> Region) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::Mesh("structured grid needs at least two lines per axis".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Mesh("grid lines must be strictly increasing".into()));
        }
        let nx = xs.len() - 1;
        let ny = ys.len() - 1;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for &y in ys {
            for &x in xs {
                vertices.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        let mut regions = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                let pair = if (i + j) % 2 == 0 {
                    [[a, b, c], [a, c, d]]
                } else {
                    [[a, b, d], [b, c, d]]
                };
                for t in pair {
                    let cen = centroid(&vertices, t);
                    triangles.push(t);
                    regions.push(region_of(cen));
                }
            }
        }
        let mut mesh = Self::from_triangles(vertices, triangles, regions)?;
        mesh.grid = Some(StructuredGridData {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
        });
        Ok(mesh)
    }

    /// Uniform structured mesh of a rectangle with `nx × ny` cells.
    pub fn rectangle(rect: Rect, nx: usize, ny: usize, region_of: impl Fn(Point) -> Region) -> Result<Self> {
        let xs: Vec<f64> = (0..=nx)
            .map(|i| if i == nx { rect.x_max } else { rect.x_min + rect.width() * i as f64 / nx as f64 })
            .collect();
        let ys: Vec<f64> = (0..=ny)
            .map(|j| if j == ny { rect.y_max } else { rect.y_min + rect.height() * j as f64 / ny as f64 })
            .collect();
        Self::structured(&xs, &ys, region_of)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Triangles adjacent to an edge (second entry `None` on the boundary).
    pub fn edge_neighbors(&self, e: usize) -> (usize, Option<usize>) {
        let [a, b] = self.edge_triangles[e];
        (a, (b != NONE).then_some(b))
    }

    /// Coordinates of a vertex or edge-midpoint node.
    pub fn node_point(&self, node: usize) -> Point {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            let [a, b] = self.edges[node - nv];
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }
    }

    /// Element nodes `[v0, v1, v2, m01, m12, m20]`.
    pub fn element_nodes(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[t];
        let nv = self.vertices.len();
        let [e0, e1, e2] = self.triangle_edges[t];
        [a, b, c, nv + e0, nv + e1, nv + e2]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        centroid(&self.vertices, self.triangles[t])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        dist(self.vertices[a], self.vertices[b])
    }

    /// Shortest edge length.
    pub fn h_min(&self) -> f64 {
        (0..self.edges.len()).map(|e| self.edge_length(e)).fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        (0..self.edges.len()).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    pub fn interface_edges(&self) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(|b| b.tag == BoundaryTag::GammaI)
    }

    fn candidate_triangles(&self, p: Point) -> Vec<usize> {
        match &self.grid {
            Some(g) => {
                let nx = g.xs.len() - 1;
                let ny = g.ys.len() - 1;
                let cell = |lines: &[f64], v: f64, n: usize| lines.partition_point(|&l| l <= v).saturating_sub(1).min(n - 1);
                let i = cell(&g.xs, p[0], nx);
                let j = cell(&g.ys, p[1], ny);
                let mut out = Vec::with_capacity(18);
                for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                        let base = 2 * (jj * nx + ii);
                        out.push(base);
                        out.push(base + 1);
                    }
                }
                out
            }
            None => (0..self.triangles.len()).collect(),
        }
    }

    /// Finds a triangle containing `p` among those accepted by `filter`,
    /// with barycentric coordinates. Ties on shared edges go to the triangle
    /// with the largest minimum coordinate.
    pub fn locate_where(&self, p: Point, filter: impl Fn(Region) -> bool) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in self.candidate_triangles(p) {
            if !filter(self.regions[t]) {
                continue;
            }
            let [a, b, c] = self.triangle_points(t);
            let l = barycentric(a, b, c, p);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= -tol && best.map_or(true, |(_, _, bm)| m > bm) {
                best = Some((t, l, m));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        self.locate_where(p, |_| true)
    }

    /// Nearest vertex satisfying `accept`.
    pub fn nearest_vertex(&self, p: Point, accept: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (v, q) in self.vertices.iter().enumerate() {
            if !accept(v) {
                continue;
            }
            let d = dist(p, *q);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((v, d));
            }
        }
        best.map(|(v, _)| v)
    }

    /// Vertices touched only by fluid triangles.
    pub fn fluid_interior_vertices(&self) -> Vec<bool> {
        let mut fluid = vec![false; self.vertices.len()];
        let mut solid = vec![false; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                if self.regions[t].is_fluid() {
                    fluid[v] = true;
                } else {
                    solid[v] = true;
                }
            }
        }
        fluid.iter().zip(&solid).map(|(f, s)| *f && !*s).collect()
    }

    /// Snaps points to the nearest fluid-only vertices, dropping duplicates
    /// while keeping first-seen order.
    pub fn snap_to_fluid_vertices(&self, points: &[Point]) -> Result<Vec<usize>> {
        let fluid = self.fluid_interior_vertices();
        let mut out: Vec<usize> = Vec::with_capacity(points.len());
        for p in points {
            let v = self
                .nearest_vertex(*p, |v| fluid[v])
                .ok_or_else(|| Error::Mesh("mesh has no fluid vertices".into()))?;
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Ok(out)
    }

    /// Writes the plain-text mesh listing:
    /// `v x y` per vertex, `t a b c region` per triangle,
    /// `b a b tag side` per boundary edge and `s k node` per SRA node.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# mesh vertices={} triangles={} boundary_edges={}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for p in &self.vertices {
            let _ = writeln!(s, "v {:.16e} {:.16e}", p[0], p[1]);
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            let region = match self.regions[t] {
                Region::Fluid => "fluid".to_string(),
                Region::Skin => "skin".to_string(),
                Region::Tissue => "tissue".to_string(),
                Region::Inclusion(k) => format!("inclusion{k}"),
            };
            let _ = writeln!(s, "t {} {} {} {}", tri[0], tri[1], tri[2], region);
        }
        for b in &self.boundary_edges {
            let side = match b.side {
                Some(Side::Bottom) => "bottom",
                Some(Side::Right) => "right",
                Some(Side::Top) => "top",
                Some(Side::Left) => "left",
                None => "-",
            };
            let _ = writeln!(s, "b {} {} {} {}", b.vertices[0], b.vertices[1], b.tag.name(), side);
        }
        for (k, nodes) in self.sra_nodes.iter().enumerate() {
            for n in nodes {
                let _ = writeln!(s, "s {k} {n}");
            }
        }
        s
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}

fn centroid(vertices: &[Point], t: [usize; 3]) -> Point {
    let [a, b, c] = t.map(|v| vertices[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Structured mesh of the scene: grid lines fall on the domain edges, the
/// interface, the skin band and the ordinate of every horizontal SRA. Regions
/// are assigned at triangle centroids with inclusions present; receivers are
/// snapped to fluid vertices.
pub fn generate_mesh(scene: &Scene, h_target: f64) -> Result<Mesh> {
    scene.validate()?;
    if !(h_target > 0.0 && h_target.is_finite()) {
        return Err(Error::Mesh(format!("h_target must be positive (got {h_target})")));
    }
    if let Some(thickness) = scene.skin_thickness() {
        if h_target > thickness * (1.0 + 1e-9) {
            return Err(Error::Mesh(format!(
                "h_target {h_target:e} exceeds the skin thickness {thickness:e}"
            )));
        }
    }
    let d = scene.domain;
    let xs = grid_lines(&mut vec![d.x_min, d.x_max], h_target);
    let mut ybreaks = vec![d.y_min, d.y_max, scene.interface_y];
    if let Some((top, bottom)) = scene.skin_band {
        ybreaks.push(top);
        ybreaks.push(bottom);
    }
    for sra in &scene.sras {
        if sra.is_horizontal() {
            ybreaks.push(sra.start[1]);
        }
    }
    let ys = grid_lines(&mut ybreaks, h_target);
    let mut mesh = Mesh::structured(&xs, &ys, |c| {
        scene.material_at(c, true).map(|(_, r)| r).unwrap_or(Region::Tissue)
    })?;
    mesh.sra_nodes = scene
        .sras
        .iter()
        .map(|sra| mesh.snap_to_fluid_vertices(&sra.receiver_points()))
        .collect::<Result<_>>()?;
    Ok(mesh)
}

/// Scalar (fluid) and vector (solid) Lagrange unknowns on a mesh.
///
/// Global layout: fluid unknowns `0..n_fluid`, then solid unknowns with the
/// two components of solid node `s` at `n_fluid + 2s` and `n_fluid + 2s + 1`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub degree: usize,
    pub n_nodes: usize,
    fluid: Vec<usize>,
    solid: Vec<usize>,
    pub n_fluid: usize,
    pub n_solid_nodes: usize,
    pub interface_nodes: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, degree: usize) -> Result<Self> {
        if degree != 1 && degree != 2 {
            return Err(Error::Mesh(format!("unsupported degree {degree}")));
        }
        let n_nodes = if degree == 1 {
            mesh.n_vertices()
        } else {
            mesh.n_vertices() + mesh.n_edges()
        };
        let nloc = Self::local_count(degree);
        let mut in_fluid = vec![false; n_nodes];
        let mut in_solid = vec![false; n_nodes];
        for t in 0..mesh.n_triangles() {
            let nodes = mesh.element_nodes(t);
            let mark = if mesh.regions[t].is_fluid() {
                &mut in_fluid
            } else {
                &mut in_solid
            };
            for &n in &nodes[..nloc] {
                mark[n] = true;
            }
        }
        let mut fluid = vec![NONE; n_nodes];
        let mut solid = vec![NONE; n_nodes];
        let mut nf = 0;
        let mut ns = 0;
        let mut interface_nodes = Vec::new();
        for n in 0..n_nodes {
            if in_fluid[n] {
                fluid[n] = nf;
                nf += 1;
            }
            if in_solid[n] {
                solid[n] = ns;
                ns += 1;
            }
            if in_fluid[n] && in_solid[n] {
                interface_nodes.push(n);
            }
        }
        Ok(Self {
            degree,
            n_nodes,
            fluid,
            solid,
            n_fluid: nf,
            n_solid_nodes: ns,
            interface_nodes,
        })
    }

    pub fn local_count(degree: usize) -> usize {
        if degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn nodes_per_element(&self) -> usize {
        Self::local_count(self.degree)
    }

    /// Fluid unknown index of a node.
    pub fn fluid_dof(&self, node: usize) -> Option<usize> {
        self.fluid.get(node).copied().filter(|&i| i != NONE)
    }

    /// Solid node index (component dofs are `2s` and `2s + 1` in the solid block).
    pub fn solid_node(&self, node: usize) -> Option<usize> {
        self.solid.get(node).copied().filter(|&i| i != NONE)
    }

    /// Global index of solid component `c` at `node`.
    pub fn solid_dof(&self, node: usize, c: usize) -> Option<usize> {
        self.solid_node(node).map(|s| self.n_fluid + 2 * s + c)
    }

    pub fn n_solid(&self) -> usize {
        2 * self.n_solid_nodes
    }

    pub fn n_total(&self) -> usize {
        self.n_fluid + self.n_solid()
    }
}

/// Regular grid of sample points with their containing solid triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
    /// Row-major (`j * nx + i`), `i` along x.
    pub points: Vec<Point>,
    pub locations: Vec<(usize, [f64; 3])>,
}

impl SampleGrid {
    pub fn dx(&self) -> f64 {
        self.rect.width() / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.rect.height() / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        self.points[j * self.nx + i]
    }
}

/// `nx × ny` points spanning `rect`; every point must lie in a solid triangle.
pub fn sample_points(mesh: &Mesh, rect: Rect, nx: usize, ny: usize) -> Result<SampleGrid> {
    if nx < 2 || ny < 2 {
        return Err(Error::Mesh("sampling grid needs nx, ny >= 2".into()));
    }
    let mut points = Vec::with_capacity(nx * ny);
    let mut locations = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = if j == ny - 1 {
            rect.y_max
        } else {
            rect.y_min + rect.height() * j as f64 / (ny - 1) as f64
        };
        for i in 0..nx {
            let x = if i == nx - 1 {
                rect.x_max
            } else {
                rect.x_min + rect.width() * i as f64 / (nx - 1) as f64
            };
            let p = [x, y];
            let loc = mesh
                .locate_where(p, |r| !r.is_fluid())
                .ok_or(Error::OutsideDomain { x, y })?;
            points.push(p);
            locations.push(loc);
        }
    }
    Ok(SampleGrid {
        nx,
        ny,
        rect,
        points,
        locations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{presets, Inclusion};

    fn unit(h_cells: usize) -> Mesh {
        let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        Mesh::rectangle(r, h_cells, h_cells, |_| Region::Fluid).unwrap()
    }

    #[test]
    fn unit_square_counts() {
        let m = unit(2);
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.n_vertices(), 9);
        let euler = m.n_vertices() as i64 - m.n_edges() as i64 + m.n_triangles() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn p2_lattice_count() {
        for (nx, ny) in [(2, 3), (5, 4)] {
            let r = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
            let m = Mesh::rectangle(r, nx, ny, |_| Region::Fluid).unwrap();
            let d = DofMap::new(&m, 2).unwrap();
            assert_eq!(d.n_fluid, (2 * nx + 1) * (2 * ny + 1));
        }
    }

    #[test]
    fn single_triangle_dofs() {
        let m = Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![Region::Fluid],
        )
        .unwrap();
        let d = DofMap::new(&m, 2).unwrap();
        assert_eq!((d.n_fluid, d.n_solid()), (6, 0));
    }

    #[test]
    fn two_triangle_interface() {
        let m = Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Region::Tissue, Region::Fluid],
        )
        .unwrap();
        let d = DofMap::new(&m, 1).unwrap();
        assert_eq!(d.interface_nodes.len(), 2);
        let gi: Vec<_> = m.interface_edges().collect();
        assert_eq!(gi.len(), 1);
        // Normal points from the solid (lower right) into the fluid (upper left).
        let n = gi[0].normal;
        assert!((n[0] + n[1]).abs() < 1e-12 && n[0] < 0.0);
    }

    fn scene_mesh(h: f64) -> (Scene, Mesh) {
        let mut scene = Scene::desk(1e5);
        let wl = scene.wavelength();
        scene.inclusions.push(Inclusion::circle([5.0 * wl, 2.0 * wl], 2.0 * h, presets::MALIGNANT));
        let mesh = generate_mesh(&scene, h).unwrap();
        (scene, mesh)
    }

    #[test]
    fn interface_edges_border_fluid_and_solid() {
        let (scene, mesh) = scene_mesh(0.015 / 6.0);
        let mut len = 0.0;
        for b in mesh.interface_edges() {
            let (t0, t1) = mesh.edge_neighbors(b.edge);
            let t1 = t1.unwrap();
            assert_ne!(mesh.regions[t0].is_fluid(), mesh.regions[t1].is_fluid());
            assert!(!mesh.regions[b.triangle].is_fluid());
            assert!((b.normal[1] - 1.0).abs() < 1e-12);
            len += mesh.edge_length(b.edge);
        }
        assert!((len - scene.domain.width()).abs() < 1e-12 * scene.domain.width());
    }

    #[test]
    fn inclusion_is_tagged() {
        let (_, mesh) = scene_mesh(0.015 / 8.0);
        assert!(mesh.regions.iter().any(|r| *r == Region::Inclusion(0)));
    }

    #[test]
    fn boundary_length_partition() {
        let (scene, mesh) = scene_mesh(0.015 / 6.0);
        let total: f64 = mesh.boundary_edges.iter().map(|b| mesh.edge_length(b.edge)).sum();
        let d = scene.domain;
        let expected = 2.0 * (d.width() + d.height()) + d.width();
        assert!((total - expected).abs() < 1e-12 * expected);
        for b in &mesh.boundary_edges {
            if b.tag != BoundaryTag::GammaI {
                assert!(b.side.is_some());
            }
        }
    }

    #[test]
    fn refinement_quadruples() {
        let r = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
        let a = Mesh::rectangle(r, 4, 2, |_| Region::Fluid).unwrap();
        let b = Mesh::rectangle(r, 8, 4, |_| Region::Fluid).unwrap();
        assert_eq!(4 * a.n_triangles(), b.n_triangles());
    }

    #[test]
    fn rejects_coarse_h() {
        let scene = Scene::desk(1e5);
        assert!(generate_mesh(&scene, scene.skin_thickness().unwrap() * 1.5).is_err());
    }

    #[test]
    fn sra_nodes_on_fluid_vertices() {
        let (scene, mesh) = scene_mesh(0.015 / 8.0);
        assert_eq!(mesh.sra_nodes.len(), 1);
        let nodes = &mesh.sra_nodes[0];
        assert_eq!(nodes.len(), scene.sras[0].receiver_count);
        for (n, p) in nodes.iter().zip(scene.sras[0].receiver_points()) {
            assert!(dist(mesh.vertices[*n], p) < 1e-12);
        }
    }

    #[test]
    fn sample_grid_corners_and_barycentrics() {
        let (scene, mesh) = scene_mesh(0.015 / 6.0);
        let rect = scene.solid_rect();
        let g = sample_points(&mesh, rect, 2, 2).unwrap();
        let expected = vec![
            [rect.x_min, rect.y_min],
            [rect.x_max, rect.y_min],
            [rect.x_min, rect.y_max],
            [rect.x_max, rect.y_max],
        ];
        assert_eq!(g.points, expected);
        let g = sample_points(&mesh, rect, 37, 23).unwrap();
        for (t, l) in &g.locations {
            assert!(!mesh.regions[*t].is_fluid());
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dump_lists_everything() {
        let m = unit(1);
        let text = m.dump();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("b ")).count(), 4);
    }
}
