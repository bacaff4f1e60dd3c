//! Physical experiment description: materials, layered geometry, inclusions,
//! receiver arrays and sources.
//!
//! The domain is an axis-aligned rectangle. Fluid occupies `y > interface_y`,
//! solid the rest; an optional skin band sits directly under the interface.

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidMaterial {
    pub rho: f64,
    /// Bulk modulus.
    pub lambda: f64,
}

impl FluidMaterial {
    pub fn new(rho: f64, lambda: f64) -> Result<Self> {
        if !(rho > 0.0 && lambda > 0.0 && rho.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidMaterial(format!(
                "fluid needs rho > 0 and lambda > 0 (got rho={rho}, lambda={lambda})"
            )));
        }
        Ok(Self { rho, lambda })
    }

    pub fn vp(&self) -> f64 {
        (self.lambda / self.rho).sqrt()
    }

    pub fn impedance(&self) -> f64 {
        self.rho * self.vp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidMaterial {
    pub rho: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl SolidMaterial {
    pub fn new(rho: f64, lambda: f64, mu: f64) -> Result<Self> {
        let finite = rho.is_finite() && lambda.is_finite() && mu.is_finite();
        if !(finite && rho > 0.0 && mu >= 0.0 && lambda + 2.0 * mu > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "solid needs rho > 0, mu >= 0, lambda + 2 mu > 0 (got rho={rho}, lambda={lambda}, mu={mu})"
            )));
        }
        Ok(Self { rho, lambda, mu })
    }

    pub fn vp(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }

    pub fn vs(&self) -> f64 {
        (self.mu / self.rho).sqrt()
    }

    pub fn impedance(&self) -> f64 {
        self.rho * self.vp()
    }

    pub fn young_modulus(&self) -> Result<f64> {
        young_modulus(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Fluid(FluidMaterial),
    Solid(SolidMaterial),
}

impl Material {
    pub fn rho(&self) -> f64 {
        match self {
            Material::Fluid(f) => f.rho,
            Material::Solid(s) => s.rho,
        }
    }

    pub fn is_fluid(&self) -> bool {
        matches!(self, Material::Fluid(_))
    }
}

/// `(V_p, V_s)`; fluids have `V_s = 0`.
pub fn derive_velocities(m: &Material) -> (f64, f64) {
    match m {
        Material::Fluid(f) => (f.vp(), 0.0),
        Material::Solid(s) => (s.vp(), s.vs()),
    }
}

/// `E = mu (3 lambda + 2 mu) / (lambda + mu)`.
pub fn young_modulus(m: &SolidMaterial) -> Result<f64> {
    let denom = m.lambda + m.mu;
    if denom <= 0.0 {
        return Err(Error::InvalidMaterial(format!(
            "Young modulus undefined for lambda + mu = {denom}"
        )));
    }
    Ok(m.mu * (3.0 * m.lambda + 2.0 * m.mu) / denom)
}

pub mod presets {
    use super::{FluidMaterial, Material, SolidMaterial};

    pub const FLUID: FluidMaterial = FluidMaterial {
        rho: 1000.0,
        lambda: 2.25e9,
    };
    pub const SKIN: SolidMaterial = SolidMaterial {
        rho: 1150.0,
        lambda: 6.66e9,
        mu: 66.66e3,
    };
    pub const TISSUE: SolidMaterial = SolidMaterial {
        rho: 1000.0,
        lambda: 1.83e9,
        mu: 18.33e3,
    };
    pub const BENIGN: SolidMaterial = SolidMaterial {
        rho: 1000.0,
        lambda: 2.16e9,
        mu: 21.66e3,
    };
    pub const MALIGNANT: SolidMaterial = SolidMaterial {
        rho: 1000.0,
        lambda: 2.99e9,
        mu: 30.0e3,
    };

    pub fn builtin_presets() -> Vec<(&'static str, Material)> {
        vec![
            ("fluid", Material::Fluid(FLUID)),
            ("skin", Material::Solid(SKIN)),
            ("tissue", Material::Solid(TISSUE)),
            ("benign", Material::Solid(BENIGN)),
            ("malignant", Material::Solid(MALIGNANT)),
        ]
    }

    pub fn by_name(name: &str) -> Option<Material> {
        builtin_presets()
            .into_iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, m)| m)
    }

    pub fn solid_by_name(name: &str) -> Option<SolidMaterial> {
        match by_name(name)? {
            Material::Solid(s) => Some(s),
            Material::Fluid(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_max > x_min && y_max > y_min) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            [self.x_min, self.y_min],
            [self.x_max, self.y_min],
            [self.x_max, self.y_max],
            [self.x_min, self.y_max],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub center: Point,
    pub semi_axes: [f64; 2],
    pub rotation: f64,
    pub material: SolidMaterial,
}

impl Inclusion {
    pub fn circle(center: Point, radius: f64, material: SolidMaterial) -> Self {
        Self {
            center,
            semi_axes: [radius, radius],
            rotation: 0.0,
            material,
        }
    }

    /// Point test against the ellipse grown by `margin` along both semi-axes.
    pub fn contains_dilated(&self, p: Point, margin: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let xl = c * dx + s * dy;
        let yl = -s * dx + c * dy;
        let a = self.semi_axes[0] + margin;
        let b = self.semi_axes[1] + margin;
        (xl / a).powi(2) + (yl / b).powi(2) <= 1.0
    }

    pub fn contains(&self, p: Point) -> bool {
        self.contains_dilated(p, 0.0)
    }

    /// Axis-aligned bounding box half extents.
    pub fn half_extents(&self) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        let [a, b] = self.semi_axes;
        [(a * c).hypot(b * s), (a * s).hypot(b * c)]
    }
}

/// Source-receiver array: a straight segment with evenly spaced receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sra {
    pub start: Point,
    pub end: Point,
    pub receiver_count: usize,
}

impl Sra {
    pub fn receiver_points(&self) -> Vec<Point> {
        let n = self.receiver_count;
        if n == 1 {
            return vec![self.midpoint()];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                [
                    self.start[0] + t * (self.end[0] - self.start[0]),
                    self.start[1] + t * (self.end[1] - self.start[1]),
                ]
            })
            .collect()
    }

    pub fn midpoint(&self) -> Point {
        [
            0.5 * (self.start[0] + self.end[0]),
            0.5 * (self.start[1] + self.end[1]),
        ]
    }

    pub fn is_horizontal(&self) -> bool {
        self.start[1] == self.end[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluidAbc {
    EngquistMajda,
    /// First-order Bayliss–Turkel with curvature radius `r`.
    BaylissTurkel { radius: f64 },
}

/// Condition imposed on one side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideCondition {
    /// First-order absorbing condition.
    Absorbing,
    /// Natural condition: rigid wall for the fluid, traction-free for the solid.
    Free,
    /// Mirror plane: zero normal solid velocity, rigid wall for the fluid.
    Symmetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Boundaries {
    pub bottom: SideCondition,
    pub right: SideCondition,
    pub top: SideCondition,
    pub left: SideCondition,
}

impl Boundaries {
    pub fn uniform(c: SideCondition) -> Self {
        Self {
            bottom: c,
            right: c,
            top: c,
            left: c,
        }
    }

    pub fn side(&self, side: Side) -> SideCondition {
        match side {
            Side::Bottom => self.bottom,
            Side::Right => self.right,
            Side::Top => self.top,
            Side::Left => self.left,
        }
    }
}

impl Default for Boundaries {
    fn default() -> Self {
        Self::uniform(SideCondition::Absorbing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fluid,
    Skin,
    Tissue,
    Inclusion(usize),
}

impl Region {
    pub fn is_fluid(self) -> bool {
        self == Region::Fluid
    }
}

/// One illumination: a source fired while one SRA records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    pub source: Point,
    pub sra: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub domain: Rect,
    pub interface_y: f64,
    /// `(y_top, y_bottom)` of the skin band.
    pub skin_band: Option<(f64, f64)>,
    pub fluid: FluidMaterial,
    pub skin: SolidMaterial,
    pub tissue: SolidMaterial,
    pub inclusions: Vec<Inclusion>,
    pub sras: Vec<Sra>,
    pub sources: Vec<Point>,
    pub nu0: f64,
    pub t_final: f64,
    pub fluid_abc: FluidAbc,
    pub boundaries: Boundaries,
}

impl Scene {
    /// Desk-scale default: a `10 λ × 6 λ` rectangle, `2 λ` of fluid on top of a
    /// skin band of thickness `λ/6`, an SRA of 33 receivers `λ` above the
    /// interface spanning `x ∈ [λ, 9λ]`, one source at the SRA midpoint and no
    /// inclusions. `λ = V_f / ν0`.
    pub fn desk(nu0: f64) -> Self {
        let fluid = presets::FLUID;
        let wl = fluid.vp() / nu0;
        let interface_y = 4.0 * wl;
        let sra = Sra {
            start: [wl, 5.0 * wl],
            end: [9.0 * wl, 5.0 * wl],
            receiver_count: 33,
        };
        let mut scene = Self {
            domain: Rect {
                x_min: 0.0,
                x_max: 10.0 * wl,
                y_min: 0.0,
                y_max: 6.0 * wl,
            },
            interface_y,
            skin_band: Some((interface_y, interface_y - wl / 6.0)),
            fluid,
            skin: presets::SKIN,
            tissue: presets::TISSUE,
            inclusions: Vec::new(),
            sources: vec![sra.midpoint()],
            sras: vec![sra],
            nu0,
            t_final: 1.0,
            fluid_abc: FluidAbc::EngquistMajda,
            boundaries: Boundaries::default(),
        };
        scene.t_final = scene.default_t_final();
        scene
    }

    /// `λ_W = V_f / ν0`.
    pub fn wavelength(&self) -> f64 {
        self.fluid.vp() / self.nu0
    }

    /// Three times the longest source → domain corner → receiver travel time
    /// at the fluid speed.
    pub fn default_t_final(&self) -> f64 {
        let v = self.fluid.vp();
        let mut longest: f64 = 0.0;
        for shot in self.shots() {
            let receivers = self.sras[shot.sra].receiver_points();
            for c in self.domain.corners() {
                let back = receivers.iter().map(|r| dist(c, *r)).fold(0.0, f64::max);
                longest = longest.max(dist(shot.source, c) + back);
            }
        }
        3.0 * longest / v
    }

    /// Every listed source is fired for every SRA; without listed sources
    /// each SRA fires once from its midpoint.
    pub fn shots(&self) -> Vec<Shot> {
        if self.sources.is_empty() {
            return (0..self.sras.len())
                .map(|k| Shot {
                    source: self.sras[k].midpoint(),
                    sra: k,
                })
                .collect();
        }
        (0..self.sras.len())
            .flat_map(|k| self.sources.iter().map(move |&source| Shot { source, sra: k }))
            .collect()
    }

    pub fn skin_thickness(&self) -> Option<f64> {
        self.skin_band.map(|(top, bottom)| top - bottom)
    }

    pub fn solid_rect(&self) -> Rect {
        Rect {
            y_max: self.interface_y,
            ..self.domain
        }
    }

    /// Largest P-wave speed over all materials present (inclusions optional).
    pub fn max_vp(&self, with_inclusions: bool) -> f64 {
        let mut v = self.fluid.vp().max(self.tissue.vp());
        if self.skin_band.is_some() {
            v = v.max(self.skin.vp());
        }
        if with_inclusions {
            for inc in &self.inclusions {
                v = v.max(inc.material.vp());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain;
        Rect::new(d.x_min, d.x_max, d.y_min, d.y_max)?;
        FluidMaterial::new(self.fluid.rho, self.fluid.lambda)?;
        for m in [self.skin, self.tissue] {
            SolidMaterial::new(m.rho, m.lambda, m.mu)?;
        }
        if !(self.interface_y > d.y_min && self.interface_y < d.y_max) {
            return Err(Error::InvalidScene(format!(
                "interface_y = {} not strictly inside ({}, {})",
                self.interface_y, d.y_min, d.y_max
            )));
        }
        if let Some((top, bottom)) = self.skin_band {
            if !(top <= self.interface_y && bottom < top && bottom > d.y_min) {
                return Err(Error::InvalidScene(format!(
                    "skin band ({top}, {bottom}) must lie below the interface and above the bottom"
                )));
            }
        }
        if !(self.nu0 > 0.0 && self.t_final > 0.0) {
            return Err(Error::InvalidScene("nu0 and t_final must be positive".into()));
        }
        if let FluidAbc::BaylissTurkel { radius } = self.fluid_abc {
            if !(radius > 0.0) {
                return Err(Error::InvalidScene("Bayliss–Turkel radius must be positive".into()));
            }
        }
        for s in &self.sources {
            if !self.in_fluid(*s) {
                return Err(Error::SourceNotInFluid { x: s[0], y: s[1] });
            }
        }
        for (k, sra) in self.sras.iter().enumerate() {
            if sra.receiver_count == 0 {
                return Err(Error::InvalidScene(format!("SRA {k} has no receivers")));
            }
            for p in [sra.start, sra.end] {
                if !(self.in_fluid(p) && p[0] > d.x_min && p[0] < d.x_max && p[1] < d.y_max) {
                    return Err(Error::InvalidScene(format!(
                        "SRA {k} endpoint ({}, {}) is not strictly inside the fluid",
                        p[0], p[1]
                    )));
                }
            }
        }
        let solid_top = self.skin_band.map_or(self.interface_y, |(_, bottom)| bottom);
        for (k, inc) in self.inclusions.iter().enumerate() {
            SolidMaterial::new(inc.material.rho, inc.material.lambda, inc.material.mu)?;
            if !(inc.semi_axes[0] > 0.0 && inc.semi_axes[1] > 0.0) {
                return Err(Error::InvalidScene(format!("inclusion {k} has non-positive semi-axes")));
            }
            let [hx, hy] = inc.half_extents();
            let [cx, cy] = inc.center;
            if cx - hx <= d.x_min || cx + hx >= d.x_max || cy - hy <= d.y_min || cy + hy >= solid_top {
                return Err(Error::InvalidScene(format!(
                    "inclusion {k} is not inside the solid below the skin band"
                )));
            }
        }
        Ok(())
    }

    fn in_fluid(&self, p: Point) -> bool {
        self.domain.contains(p) && p[1] > self.interface_y
    }

    /// Classifies `x`. Points exactly on the interface count as solid.
    pub fn material_at(&self, x: Point, with_inclusions: bool) -> Result<(Material, Region)> {
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { x: x[0], y: x[1] });
        }
        if x[1] > self.interface_y {
            return Ok((Material::Fluid(self.fluid), Region::Fluid));
        }
        if let Some((top, bottom)) = self.skin_band {
            if x[1] >= bottom && x[1] <= top {
                return Ok((Material::Solid(self.skin), Region::Skin));
            }
        }
        if with_inclusions {
            if let Some((k, inc)) = self.inclusions.iter().enumerate().find(|(_, i)| i.contains(x)) {
                return Ok((Material::Solid(inc.material), Region::Inclusion(k)));
            }
        }
        Ok((Material::Solid(self.tissue), Region::Tissue))
    }
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
