//! Sparse operators of the coupled pressure / solid-velocity weak form.
//!
//! Fluid block (test `q`): `∫ p_tt q / λ_f + ∫ ∇p·∇q / ρ_f + ∫_Γf p_t q / √(ρ_f λ_f)
//! + ∫_Γf p q / (2 r ρ_f) + ∫_ΓI u_t·n q`.
//! Solid block (test `v`): `∫ ρ_s u_tt·v + ∫ λ_s div u div v + 2 μ_s ε(u):ε(v)
//! + ∫_Γs 𝕄 u_t·v − ∫_ΓI p_t v·n`.

pub mod basis;
pub mod quadrature;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CooBuilder, CsrMatrix};
use crate::mesh::{BoundaryEdge, BoundaryTag, DofMap, Mesh};
use crate::scene::{Boundaries, FluidAbc, FluidMaterial, Material, Point, Region, Scene, Side, SideCondition, SolidMaterial};
use quadrature::{GAUSS3, TRIANGLE6};

const CHUNK: usize = 2048;

/// Element-wise constant coefficients, plus a record of which scene regions
/// they were drawn from.
#[derive(Debug, Clone)]
pub struct Medium {
    pub materials: Vec<Material>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub with_inclusions: bool,
    /// Distinct regions whose materials were used, in first-seen order.
    pub regions: Vec<Region>,
}

impl Provenance {
    pub fn uses_inclusions(&self) -> bool {
        self.regions.iter().any(|r| matches!(r, Region::Inclusion(_)))
    }
}

impl Medium {
    /// Samples the scene at every triangle centroid; `with_inclusions = false`
    /// gives the background medium.
    pub fn from_scene(mesh: &Mesh, scene: &Scene, with_inclusions: bool) -> Result<Self> {
        let mut materials = Vec::with_capacity(mesh.n_triangles());
        let mut regions = Vec::new();
        for t in 0..mesh.n_triangles() {
            let (m, r) = scene.material_at(mesh.centroid(t), with_inclusions)?;
            if m.is_fluid() != mesh.regions[t].is_fluid() {
                return Err(Error::Mesh(format!("triangle {t} region disagrees with the scene")));
            }
            if !regions.contains(&r) {
                regions.push(r);
            }
            materials.push(m);
        }
        Ok(Self {
            materials,
            provenance: Provenance {
                with_inclusions,
                regions,
            },
        })
    }

    /// One fluid and one solid material, split by the mesh region tags.
    pub fn two_phase(mesh: &Mesh, fluid: FluidMaterial, solid: SolidMaterial) -> Self {
        let materials: Vec<Material> = mesh
            .regions
            .iter()
            .map(|r| if r.is_fluid() { Material::Fluid(fluid) } else { Material::Solid(solid) })
            .collect();
        let mut regions = Vec::new();
        for r in &mesh.regions {
            let r = if r.is_fluid() { Region::Fluid } else { Region::Tissue };
            if !regions.contains(&r) {
                regions.push(r);
            }
        }
        Self {
            materials,
            provenance: Provenance {
                with_inclusions: false,
                regions,
            },
        }
    }

    fn fluid(&self, t: usize) -> FluidMaterial {
        match self.materials[t] {
            Material::Fluid(f) => f,
            Material::Solid(_) => unreachable!("fluid operator on a solid triangle"),
        }
    }

    fn solid(&self, t: usize) -> SolidMaterial {
        match self.materials[t] {
            Material::Solid(s) => s,
            Material::Fluid(_) => unreachable!("solid operator on a fluid triangle"),
        }
    }

    pub fn max_vp(&self) -> f64 {
        self.materials
            .iter()
            .map(|m| match m {
                Material::Fluid(f) => f.vp(),
                Material::Solid(s) => s.vp(),
            })
            .fold(0.0, f64::max)
    }
}

/// Boundary treatment: the fluid absorbing condition variant plus the
/// condition on each rectangle side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySetup {
    pub fluid_abc: FluidAbc,
    pub sides: Boundaries,
}

impl BoundarySetup {
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            fluid_abc: scene.fluid_abc,
            sides: scene.boundaries,
        }
    }

    pub fn closed() -> Self {
        Self {
            fluid_abc: FluidAbc::EngquistMajda,
            sides: Boundaries::uniform(SideCondition::Free),
        }
    }

    fn condition(&self, b: &BoundaryEdge) -> SideCondition {
        b.side.map_or(SideCondition::Absorbing, |s| self.sides.side(s))
    }
}

#[derive(Debug, Clone)]
pub struct FluidOperators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub abc: CsrMatrix,
    /// Bayliss–Turkel curvature term; all zeros for Engquist–Majda.
    pub curvature: CsrMatrix,
}

#[derive(Debug, Clone)]
pub struct SolidOperators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub abc: CsrMatrix,
}

/// All operators of the coupled system. Fluid matrices are `n_fluid` square,
/// solid matrices `n_solid` square (component-interleaved), and `coupling`
/// is `n_fluid × n_solid`.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub n_fluid: usize,
    pub n_solid: usize,
    pub m_f: CsrMatrix,
    pub k_f: CsrMatrix,
    pub b_f: CsrMatrix,
    pub e_f: CsrMatrix,
    pub m_s: CsrMatrix,
    pub k_s: CsrMatrix,
    pub b_s: CsrMatrix,
    pub c: CsrMatrix,
    /// Solid-block indices held at zero (normal velocity on symmetry sides).
    pub symmetry_dofs: Vec<usize>,
    pub provenance: Provenance,
}

impl OperatorSet {
    pub fn n_total(&self) -> usize {
        self.n_fluid + self.n_solid
    }

    /// The solid-row coupling block, `−Cᵀ`.
    pub fn coupling_solid_rows(&self) -> CsrMatrix {
        self.c.transpose().scaled(-1.0)
    }

    fn global(&self, fluid: &[(f64, &CsrMatrix)], solid: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let n = self.n_total();
        let mut coo = CooBuilder::new(n, n);
        for (s, m) in fluid {
            coo.push_matrix(m, *s, 0, 0);
        }
        for (s, m) in solid {
            coo.push_matrix(m, *s, self.n_fluid, self.n_fluid);
        }
        coo.build()
    }

    pub fn global_mass(&self) -> CsrMatrix {
        self.global(&[(1.0, &self.m_f)], &[(1.0, &self.m_s)])
    }

    /// Stiffness including the curvature boundary term.
    pub fn global_stiffness(&self) -> CsrMatrix {
        self.global(&[(1.0, &self.k_f), (1.0, &self.e_f)], &[(1.0, &self.k_s)])
    }

    pub fn global_damping(&self) -> CsrMatrix {
        self.global(&[(1.0, &self.b_f)], &[(1.0, &self.b_s)])
    }

    /// `[[0, C], [−Cᵀ, 0]]`.
    pub fn global_coupling(&self) -> CsrMatrix {
        let n = self.n_total();
        let mut coo = CooBuilder::new(n, n);
        coo.push_matrix(&self.c, 1.0, 0, self.n_fluid);
        coo.push_matrix(&self.c.transpose(), -1.0, self.n_fluid, 0);
        coo.build()
    }

    /// Sum of the elastic stiffness entries; identical for identical media.
    pub fn stiffness_fingerprint(&self) -> f64 {
        self.k_s.values().iter().sum()
    }
}

fn par_chunks<T: Send>(n: usize, f: impl Fn(std::ops::Range<usize>) -> T + Sync) -> Vec<T> {
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    starts.into_par_iter().map(|s| f(s..(s + CHUNK).min(n))).collect()
}

fn merge_all(n: usize, m: usize, parts: impl IntoIterator<Item = CooBuilder>) -> CsrMatrix {
    let mut coo = CooBuilder::new(n, m);
    for p in parts {
        coo.merge(p);
    }
    coo.build()
}

/// Writes the upper triangle of a local matrix onto the lower one so that
/// symmetric contributions are bitwise symmetric.
fn mirror_upper<const N: usize>(a: &mut [[f64; N]; N], n: usize) {
    for i in 0..n {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
}

/// Node ids of a boundary edge: `[a, b, midpoint]`.
fn edge_nodes(mesh: &Mesh, b: &BoundaryEdge) -> [usize; 3] {
    [b.vertices[0], b.vertices[1], mesh.n_vertices() + b.edge]
}

/// `∫_edge φ_i φ_j` for the edge-local basis.
fn edge_mass(mesh: &Mesh, b: &BoundaryEdge, degree: usize) -> [[f64; 3]; 3] {
    let len = mesh.edge_length(b.edge);
    let mut m = [[0.0; 3]; 3];
    for (s, w) in GAUSS3 {
        let v = basis::edge_values(degree, s);
        for i in 0..3 {
            for j in i..3 {
                m[i][j] += w * len * v[i] * v[j];
            }
        }
    }
    mirror_upper(&mut m, 3);
    m
}

pub fn assemble_fluid(mesh: &Mesh, dofs: &DofMap, medium: &Medium, bc: &BoundarySetup) -> FluidOperators {
    let n = dofs.n_fluid;
    let nloc = dofs.nodes_per_element();
    let degree = dofs.degree;
    let parts = par_chunks(mesh.n_triangles(), |range| {
        let mut mass = CooBuilder::new(n, n);
        let mut stiff = CooBuilder::new(n, n);
        for t in range {
            if !mesh.regions[t].is_fluid() {
                continue;
            }
            let mat = medium.fluid(t);
            let (gl, area) = basis::barycentric_gradients(mesh.triangle_points(t));
            let mut me = [[0.0; 6]; 6];
            let mut ke = [[0.0; 6]; 6];
            for (l, w) in TRIANGLE6 {
                let v = basis::values(degree, l);
                let g = basis::gradients(degree, l, &gl);
                let wa = w * area;
                for i in 0..nloc {
                    for j in i..nloc {
                        me[i][j] += wa * v[i] * v[j] / mat.lambda;
                        ke[i][j] += wa * (g[i][0] * g[j][0] + g[i][1] * g[j][1]) / mat.rho;
                    }
                }
            }
            mirror_upper(&mut me, nloc);
            mirror_upper(&mut ke, nloc);
            let nodes = mesh.element_nodes(t);
            let idx: Vec<usize> = nodes[..nloc].iter().map(|&nd| dofs.fluid_dof(nd).expect("fluid node")).collect();
            for i in 0..nloc {
                for j in 0..nloc {
                    mass.push(idx[i], idx[j], me[i][j]);
                    stiff.push(idx[i], idx[j], ke[i][j]);
                }
            }
        }
        (mass, stiff)
    });
    let (mass_parts, stiff_parts): (Vec<_>, Vec<_>) = parts.into_iter().unzip();

    let mut abc = CooBuilder::new(n, n);
    let mut curv = CooBuilder::new(n, n);
    let nedge = if degree == 1 { 2 } else { 3 };
    for b in &mesh.boundary_edges {
        if b.tag != BoundaryTag::GammaF || bc.condition(b) != SideCondition::Absorbing {
            continue;
        }
        let mat = medium.fluid(b.triangle);
        let em = edge_mass(mesh, b, degree);
        let nodes = edge_nodes(mesh, b);
        let w_abc = 1.0 / (mat.rho * mat.lambda).sqrt();
        for i in 0..nedge {
            for j in 0..nedge {
                let (r, c) = (dofs.fluid_dof(nodes[i]).unwrap(), dofs.fluid_dof(nodes[j]).unwrap());
                abc.push(r, c, w_abc * em[i][j]);
                if let FluidAbc::BaylissTurkel { radius } = bc.fluid_abc {
                    curv.push(r, c, em[i][j] / (2.0 * radius * mat.rho));
                }
            }
        }
    }
    FluidOperators {
        mass: merge_all(n, n, mass_parts),
        stiffness: merge_all(n, n, stiff_parts),
        abc: abc.build(),
        curvature: curv.build(),
    }
}

/// Local elastic stiffness entry for basis gradients `gi`, `gj` and
/// components `c`, `d`.
fn elastic_entry(mat: &SolidMaterial, gi: [f64; 2], gj: [f64; 2], c: usize, d: usize) -> f64 {
    let mut v = mat.lambda * gi[c] * gj[d] + mat.mu * gi[d] * gj[c];
    if c == d {
        v += mat.mu * (gi[0] * gj[0] + gi[1] * gj[1]);
    }
    v
}

/// `𝕄 = ρ V_p n nᵀ + ρ V_s t tᵀ` with `t ⊥ n`.
pub fn elastic_abc_matrix(mat: &SolidMaterial, n: Point) -> [[f64; 2]; 2] {
    let t = [-n[1], n[0]];
    let (zp, zs) = (mat.rho * mat.vp(), mat.rho * mat.vs());
    let mut m = [[0.0; 2]; 2];
    for c in 0..2 {
        for d in 0..2 {
            m[c][d] = zp * n[c] * n[d] + zs * t[c] * t[d];
        }
    }
    m
}

pub fn assemble_solid(mesh: &Mesh, dofs: &DofMap, medium: &Medium, bc: &BoundarySetup) -> SolidOperators {
    let n = dofs.n_solid();
    let nloc = dofs.nodes_per_element();
    let degree = dofs.degree;
    let block = |node: usize, c: usize| 2 * dofs.solid_node(node).expect("solid node") + c;
    let parts = par_chunks(mesh.n_triangles(), |range| {
        let mut mass = CooBuilder::new(n, n);
        let mut stiff = CooBuilder::new(n, n);
        for t in range {
            if mesh.regions[t].is_fluid() {
                continue;
            }
            let mat = medium.solid(t);
            let (gl, area) = basis::barycentric_gradients(mesh.triangle_points(t));
            let mut me = [[0.0; 6]; 6];
            let mut ke = [[0.0; 12]; 12];
            for (l, w) in TRIANGLE6 {
                let v = basis::values(degree, l);
                let g = basis::gradients(degree, l, &gl);
                let wa = w * area;
                for i in 0..nloc {
                    for j in i..nloc {
                        me[i][j] += wa * mat.rho * v[i] * v[j];
                    }
                }
                for a in 0..2 * nloc {
                    for b in a..2 * nloc {
                        let (i, c, j, d) = (a / 2, a % 2, b / 2, b % 2);
                        ke[a][b] += wa * elastic_entry(&mat, g[i], g[j], c, d);
                    }
                }
            }
            mirror_upper(&mut me, nloc);
            mirror_upper(&mut ke, 2 * nloc);
            let nodes = mesh.element_nodes(t);
            for a in 0..2 * nloc {
                let ra = block(nodes[a / 2], a % 2);
                for b in 0..2 * nloc {
                    let cb = block(nodes[b / 2], b % 2);
                    stiff.push(ra, cb, ke[a][b]);
                    if a % 2 == b % 2 {
                        mass.push(ra, cb, me[a / 2][b / 2]);
                    }
                }
            }
        }
        (mass, stiff)
    });
    let (mass_parts, stiff_parts): (Vec<_>, Vec<_>) = parts.into_iter().unzip();

    let mut abc = CooBuilder::new(n, n);
    let nedge = if degree == 1 { 2 } else { 3 };
    for b in &mesh.boundary_edges {
        let solid_edge = matches!(b.tag, BoundaryTag::GammaSHorizontal | BoundaryTag::GammaSVertical);
        if !solid_edge || bc.condition(b) != SideCondition::Absorbing {
            continue;
        }
        let mat = medium.solid(b.triangle);
        let mm = elastic_abc_matrix(&mat, b.normal);
        let em = edge_mass(mesh, b, degree);
        let nodes = edge_nodes(mesh, b);
        for i in 0..nedge {
            for j in 0..nedge {
                for c in 0..2 {
                    for d in 0..2 {
                        if mm[c][d] != 0.0 {
                            abc.push(block(nodes[i], c), block(nodes[j], d), mm[c][d] * em[i][j]);
                        }
                    }
                }
            }
        }
    }
    SolidOperators {
        mass: merge_all(n, n, mass_parts),
        stiffness: merge_all(n, n, stiff_parts),
        abc: abc.build(),
    }
}

/// `C[q_i, (j, d)] = ∫_ΓI φ_j n_d φ_i`, `n` pointing from the solid into the fluid.
pub fn assemble_coupling(mesh: &Mesh, dofs: &DofMap) -> Result<CsrMatrix> {
    let (nf, ns) = (dofs.n_fluid, dofs.n_solid());
    let mut coo = CooBuilder::new(nf, ns);
    let nedge = if dofs.degree == 1 { 2 } else { 3 };
    let mut found = false;
    for b in mesh.interface_edges() {
        found = true;
        let em = edge_mass(mesh, b, dofs.degree);
        let nodes = edge_nodes(mesh, b);
        for i in 0..nedge {
            let row = dofs.fluid_dof(nodes[i]).expect("interface node carries pressure");
            for j in 0..nedge {
                let s = dofs.solid_node(nodes[j]).expect("interface node carries velocity");
                for d in 0..2 {
                    if b.normal[d] != 0.0 {
                        coo.push(row, 2 * s + d, em[i][j] * b.normal[d]);
                    }
                }
            }
        }
    }
    if !found {
        return Err(Error::Mesh("mesh has no fluid-solid interface edges".into()));
    }
    Ok(coo.build())
}

/// Solid-block indices of the normal component on every symmetry side.
fn symmetry_dofs(mesh: &Mesh, dofs: &DofMap, bc: &BoundarySetup) -> Vec<usize> {
    let mut out = Vec::new();
    for b in &mesh.boundary_edges {
        let solid_edge = matches!(b.tag, BoundaryTag::GammaSHorizontal | BoundaryTag::GammaSVertical);
        if !solid_edge || bc.condition(b) != SideCondition::Symmetry {
            continue;
        }
        let c = match b.side {
            Some(Side::Left | Side::Right) => 0,
            _ => 1,
        };
        let nodes = edge_nodes(mesh, b);
        let count = if dofs.degree == 1 { 2 } else { 3 };
        for &nd in &nodes[..count] {
            out.push(2 * dofs.solid_node(nd).expect("solid node") + c);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Assembles every operator of the coupled system. Meshes without solid get
/// an empty coupling block; meshes with both phases must share an interface.
pub fn assemble_operators(mesh: &Mesh, dofs: &DofMap, medium: &Medium, bc: &BoundarySetup) -> Result<OperatorSet> {
    if medium.materials.len() != mesh.n_triangles() {
        return Err(Error::DimensionMismatch("one material per triangle required".into()));
    }
    let fluid = assemble_fluid(mesh, dofs, medium, bc);
    let solid = assemble_solid(mesh, dofs, medium, bc);
    let c = if dofs.n_fluid > 0 && dofs.n_solid() > 0 {
        assemble_coupling(mesh, dofs)?
    } else {
        CsrMatrix::zeros(dofs.n_fluid, dofs.n_solid())
    };
    Ok(OperatorSet {
        n_fluid: dofs.n_fluid,
        n_solid: dofs.n_solid(),
        m_f: fluid.mass,
        k_f: fluid.stiffness,
        b_f: fluid.abc,
        e_f: fluid.curvature,
        m_s: solid.mass,
        k_s: solid.stiffness,
        b_s: solid.abc,
        c,
        symmetry_dofs: symmetry_dofs(mesh, dofs, bc),
        provenance: medium.provenance.clone(),
    })
}

/// Nodal load of a point source: the fluid basis functions of the containing
/// triangle evaluated at `x0`. Returned in the fluid block.
pub fn assemble_source(mesh: &Mesh, dofs: &DofMap, x0: Point) -> Result<Vec<f64>> {
    let (t, l) = mesh
        .locate_where(x0, Region::is_fluid)
        .ok_or(Error::SourceNotInFluid { x: x0[0], y: x0[1] })?;
    let mut load = vec![0.0; dofs.n_fluid];
    let v = basis::values(dofs.degree, l);
    let nodes = mesh.element_nodes(t);
    for i in 0..dofs.nodes_per_element() {
        if v[i] != 0.0 {
            load[dofs.fluid_dof(nodes[i]).expect("fluid node")] += v[i];
        }
    }
    Ok(load)
}

/// `∫ q` over the fluid edges on one side of the rectangle: a uniform normal
/// flux through that side, i.e. a plane-wave line source.
pub fn assemble_edge_load(mesh: &Mesh, dofs: &DofMap, side: Side) -> Vec<f64> {
    let mut load = vec![0.0; dofs.n_fluid];
    let count = if dofs.degree == 1 { 2 } else { 3 };
    for b in &mesh.boundary_edges {
        if b.tag != BoundaryTag::GammaF || b.side != Some(side) {
            continue;
        }
        let em = edge_mass(mesh, b, dofs.degree);
        let nodes = edge_nodes(mesh, b);
        for i in 0..count {
            let row = dofs.fluid_dof(nodes[i]).unwrap();
            load[row] += (0..count).map(|j| em[i][j]).sum::<f64>();
        }
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{presets, Rect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coupled_mesh(nx: usize, ny: usize) -> Mesh {
        let r = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
        Mesh::rectangle(r, nx, ny, |p| if p[1] > 0.5 { Region::Fluid } else { Region::Tissue }).unwrap()
    }

    fn operators(mesh: &Mesh, degree: usize, bc: BoundarySetup) -> (DofMap, OperatorSet) {
        let dofs = DofMap::new(mesh, degree).unwrap();
        let solid = SolidMaterial::new(1.3, 2.0, 0.7).unwrap();
        let fluid = FluidMaterial::new(0.9, 1.6).unwrap();
        let medium = Medium::two_phase(mesh, fluid, solid);
        let ops = assemble_operators(mesh, &dofs, &medium, &bc).unwrap();
        (dofs, ops)
    }

    #[test]
    fn p1_reference_mass() {
        let mesh = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![Region::Fluid]).unwrap();
        let dofs = DofMap::new(&mesh, 1).unwrap();
        let medium = Medium::two_phase(&mesh, FluidMaterial::new(1.0, 1.0).unwrap(), presets::TISSUE);
        let f = assemble_fluid(&mesh, &dofs, &medium, &BoundarySetup::closed());
        let a = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let expected = a / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((f.mass.get(i, j) - expected).abs() < 1e-15);
            }
        }
        let lumped = crate::linalg::lump(&f.mass).unwrap();
        for d in lumped.diagonal() {
            assert!((d - a / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn p2_mass_cannot_be_lumped() {
        let mesh = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![Region::Fluid]).unwrap();
        let dofs = DofMap::new(&mesh, 2).unwrap();
        let medium = Medium::two_phase(&mesh, FluidMaterial::new(1.0, 1.0).unwrap(), presets::TISSUE);
        let f = assemble_fluid(&mesh, &dofs, &medium, &BoundarySetup::closed());
        assert!(crate::linalg::lump(&f.mass).is_err());
    }

    #[test]
    fn symmetry_and_totals() {
        let mesh = coupled_mesh(6, 4);
        let (_, ops) = operators(&mesh, 2, BoundarySetup::from_scene(&Scene::desk(1e5)));
        for m in [&ops.m_f, &ops.k_f, &ops.b_f, &ops.e_f, &ops.m_s, &ops.k_s, &ops.b_s] {
            assert_eq!(m.asymmetry(), 0.0);
        }
        let ones = vec![1.0; ops.n_fluid];
        let fluid_area = 2.0 * 0.5;
        assert!((ops.m_f.quadratic_form(&ones) - fluid_area / 1.6).abs() < 1e-12 * fluid_area);
    }

    #[test]
    fn null_spaces() {
        let mesh = coupled_mesh(6, 4);
        let (dofs, ops) = operators(&mesh, 2, BoundarySetup::closed());
        let ones = vec![1.0; ops.n_fluid];
        let kc = ops.k_f.mul_vec(&ones).unwrap();
        assert!(kc.iter().all(|v| v.abs() < 1e-12));
        let mut trans = vec![0.0; ops.n_solid];
        let mut rot = vec![0.0; ops.n_solid];
        for node in 0..dofs.n_nodes {
            if let Some(s) = dofs.solid_node(node) {
                let p = mesh.node_point(node);
                trans[2 * s] = 0.3;
                trans[2 * s + 1] = -1.1;
                rot[2 * s] = -p[1];
                rot[2 * s + 1] = p[0];
            }
        }
        for u in [trans, rot] {
            let ku = ops.k_s.mul_vec(&u).unwrap();
            assert!(ku.iter().all(|v| v.abs() < 1e-12), "max {}", ku.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        }
    }

    #[test]
    fn positivity() {
        let mesh = coupled_mesh(4, 4);
        let (_, ops) = operators(&mesh, 2, BoundarySetup::closed());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            for (m, k) in [(&ops.m_f, &ops.k_f), (&ops.m_s, &ops.k_s)] {
                let x: Vec<f64> = (0..m.nrows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let xx: f64 = x.iter().map(|v| v * v).sum();
                assert!(m.quadratic_form(&x) > 0.0);
                assert!(k.quadratic_form(&x) >= -1e-12 * xx);
            }
        }
    }

    #[test]
    fn horizontal_abc_weights() {
        let m = elastic_abc_matrix(&presets::TISSUE, [0.0, 1.0]);
        let (zp, zs) = (presets::TISSUE.rho * presets::TISSUE.vp(), presets::TISSUE.rho * presets::TISSUE.vs());
        assert!((m[0][0] - zs).abs() < 1e-9 * zp && (m[1][1] - zp).abs() < 1e-9 * zp);
        assert_eq!(m[0][1], 0.0);
    }

    #[test]
    fn coupling_on_horizontal_interface() {
        let mesh = coupled_mesh(6, 4);
        let (_, ops) = operators(&mesh, 2, BoundarySetup::closed());
        for i in 0..ops.c.nrows() {
            for (j, _) in ops.c.row(i) {
                assert_eq!(j % 2, 1, "only u2 columns may be populated");
            }
        }
        let solid_rows = ops.coupling_solid_rows();
        assert_eq!(solid_rows.max_abs_diff(&ops.c.transpose().scaled(-1.0)).unwrap(), 0.0);
        // p = 1, u = n: c-form = |Γ_I|.
        let p = vec![1.0; ops.n_fluid];
        let mut u = vec![0.0; ops.n_solid];
        for k in 0..ops.n_solid / 2 {
            u[2 * k + 1] = 1.0;
        }
        assert!((ops.c.bilinear_form(&p, &u) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_requires_interface() {
        let mesh = coupled_mesh(2, 2);
        let fluid_only = Mesh::rectangle(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 2, 2, |_| Region::Fluid).unwrap();
        assert!(assemble_coupling(&fluid_only, &DofMap::new(&fluid_only, 2).unwrap()).is_err());
        assert!(assemble_coupling(&mesh, &DofMap::new(&mesh, 2).unwrap()).is_ok());
    }

    #[test]
    fn point_sources() {
        let mesh = coupled_mesh(4, 4);
        for degree in [1, 2] {
            let dofs = DofMap::new(&mesh, degree).unwrap();
            let l = assemble_source(&mesh, &dofs, [0.77, 0.81]).unwrap();
            assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let at_node = assemble_source(&mesh, &dofs, mesh.vertices[mesh.n_vertices() - 2]).unwrap();
            assert_eq!(at_node.iter().filter(|v| **v != 0.0).count(), 1);
            assert!(assemble_source(&mesh, &dofs, [0.7, 0.2]).is_err());
        }
        let dofs = DofMap::new(&mesh, 1).unwrap();
        let t = mesh.regions.iter().position(|r| r.is_fluid()).unwrap();
        let l = assemble_source(&mesh, &dofs, mesh.centroid(t)).unwrap();
        let nz: Vec<f64> = l.into_iter().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 3);
        assert!(nz.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-14));
    }

    #[test]
    fn edge_load_integrates_width() {
        let mesh = coupled_mesh(5, 4);
        let dofs = DofMap::new(&mesh, 2).unwrap();
        let l = assemble_edge_load(&mesh, &dofs, Side::Top);
        assert!((l.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn no_cross_field_stiffness() {
        let mesh = coupled_mesh(4, 4);
        let (_, ops) = operators(&mesh, 2, BoundarySetup::closed());
        let k = ops.global_stiffness();
        for i in 0..k.nrows() {
            for (j, _) in k.row(i) {
                assert_eq!(i < ops.n_fluid, j < ops.n_fluid);
            }
        }
    }
}
