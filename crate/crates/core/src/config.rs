//! TOML run configuration. Lengths in the scene and mesh sections are in
//! wavelengths `λ_W = V_f / ν0` unless `units = "m"`.
//!
//! ```toml
//! scene_file = "scene.toml"   # or an inline [scene] table
//!
//! [mesh]
//! h_forward = 0.1667
//! h_reverse = 0.1333
//!
//! [run]
//! cfl = 0.5
//! frame_stride = 4
//!
//! [noise]
//! coeff = 0.1
//! seed = 7
//!
//! [imaging]
//! variants = ["component_u2", "divergence"]
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::imaging::Variant;
use crate::pipeline::Params;
use crate::scene::{presets, Boundaries, FluidAbc, FluidMaterial, Inclusion, Point, Rect, Scene, SideCondition, SolidMaterial, Sra};

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Wavelength,
    M,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SolidSpec {
    Preset(String),
    Custom { rho: f64, lambda: f64, mu: f64 },
}

impl SolidSpec {
    fn resolve(&self) -> Result<SolidMaterial> {
        match self {
            SolidSpec::Preset(name) => presets::solid_by_name(name).ok_or_else(|| Error::Config(format!("unknown solid preset `{name}`"))),
            SolidSpec::Custom { rho, lambda, mu } => SolidMaterial::new(*rho, *lambda, *mu),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FluidSpec {
    Preset(String),
    Custom { rho: f64, lambda: f64 },
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InclusionSpec {
    pub center: Point,
    /// Semi-axes; `radius` is shorthand for a circle.
    pub semi_axes: Option<[f64; 2]>,
    pub radius: Option<f64>,
    /// Degrees, counter-clockwise.
    #[serde(default)]
    pub rotation: f64,
    pub material: SolidSpec,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SraSpec {
    pub start: Point,
    pub end: Point,
    pub receivers: usize,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub bottom: Option<SideCondition>,
    pub right: Option<SideCondition>,
    pub top: Option<SideCondition>,
    pub left: Option<SideCondition>,
}

/// Scene description. Every field is optional and defaults to the desk scene.
#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub units: Units,
    pub nu0: Option<f64>,
    /// `[x_min, x_max, y_min, y_max]`
    pub domain: Option<[f64; 4]>,
    pub interface_y: Option<f64>,
    /// Zero removes the skin band.
    pub skin_thickness: Option<f64>,
    pub fluid: Option<FluidSpec>,
    pub skin: Option<SolidSpec>,
    pub tissue: Option<SolidSpec>,
    #[serde(default, rename = "inclusion")]
    pub inclusions: Vec<InclusionSpec>,
    #[serde(rename = "sra")]
    pub sras: Option<Vec<SraSpec>>,
    /// Explicit sources; `[]` fires one shot from each SRA midpoint.
    pub sources: Option<Vec<Point>>,
    /// Seconds.
    pub t_final: Option<f64>,
    /// `"engquist_majda"` or `"bayliss_turkel"`.
    pub fluid_abc: Option<String>,
    pub bt_radius: Option<f64>,
    #[serde(default)]
    pub boundaries: BoundarySpec,
}

impl SceneSpec {
    pub fn to_scene(&self) -> Result<Scene> {
        let nu0 = self.nu0.unwrap_or(1e5);
        if !(nu0 > 0.0) {
            return Err(Error::Config("nu0 must be positive".into()));
        }
        let mut scene = Scene::desk(nu0);
        if let Some(f) = &self.fluid {
            scene.fluid = match f {
                FluidSpec::Preset(name) if name.eq_ignore_ascii_case("fluid") => presets::FLUID,
                FluidSpec::Preset(name) => return Err(Error::Config(format!("unknown fluid preset `{name}`"))),
                FluidSpec::Custom { rho, lambda } => FluidMaterial::new(*rho, *lambda)?,
            };
        }
        let wl = scene.wavelength();
        let unit = match self.units {
            Units::Wavelength => wl,
            Units::M => 1.0,
        };
        let pt = |p: Point| [p[0] * unit, p[1] * unit];
        if let Some([a, b, c, d]) = self.domain {
            scene.domain = Rect::new(a * unit, b * unit, c * unit, d * unit)?;
        }
        if let Some(y) = self.interface_y {
            scene.interface_y = y * unit;
        }
        let thickness = match self.skin_thickness {
            Some(t) => t * unit,
            None => scene.skin_thickness().unwrap_or(0.0),
        };
        scene.skin_band = (thickness > 0.0).then(|| (scene.interface_y, scene.interface_y - thickness));
        if let Some(s) = &self.skin {
            scene.skin = s.resolve()?;
        }
        if let Some(s) = &self.tissue {
            scene.tissue = s.resolve()?;
        }
        scene.inclusions = self
            .inclusions
            .iter()
            .map(|i| {
                let semi_axes = match (i.semi_axes, i.radius) {
                    (Some(ax), None) => [ax[0] * unit, ax[1] * unit],
                    (None, Some(r)) => [r * unit, r * unit],
                    _ => return Err(Error::Config("inclusion needs exactly one of `semi_axes` or `radius`".into())),
                };
                Ok(Inclusion {
                    center: pt(i.center),
                    semi_axes,
                    rotation: i.rotation.to_radians(),
                    material: i.material.resolve()?,
                })
            })
            .collect::<Result<_>>()?;
        let default_sra = scene.sras.clone();
        if let Some(sras) = &self.sras {
            scene.sras = sras
                .iter()
                .map(|s| Sra {
                    start: pt(s.start),
                    end: pt(s.end),
                    receiver_count: s.receivers,
                })
                .collect();
        }
        scene.sources = match &self.sources {
            Some(list) => list.iter().map(|&p| pt(p)).collect(),
            None if self.sras.is_some() && scene.sras != default_sra => Vec::new(),
            None => scene.sras.first().map(|s| vec![s.midpoint()]).unwrap_or_default(),
        };
        scene.fluid_abc = match self.fluid_abc.as_deref() {
            None | Some("engquist_majda") => FluidAbc::EngquistMajda,
            Some("bayliss_turkel") => FluidAbc::BaylissTurkel {
                radius: self
                    .bt_radius
                    .map(|r| r * unit)
                    .ok_or_else(|| Error::Config("bayliss_turkel needs `bt_radius`".into()))?,
            },
            Some(other) => return Err(Error::Config(format!("unknown fluid_abc `{other}`"))),
        };
        let b = &self.boundaries;
        let d = Boundaries::default();
        scene.boundaries = Boundaries {
            bottom: b.bottom.unwrap_or(d.bottom),
            right: b.right.unwrap_or(d.right),
            top: b.top.unwrap_or(d.top),
            left: b.left.unwrap_or(d.left),
        };
        scene.t_final = match self.t_final {
            Some(t) => t,
            None => scene.default_t_final(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub h_forward: Option<f64>,
    pub h_reverse: Option<f64>,
    pub degree: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub cfl: Option<f64>,
    pub frame_stride: Option<usize>,
    /// Imaging grid spacing, same units as the scene.
    pub grid_spacing: Option<f64>,
    pub amplitude: Option<f64>,
    pub solver_tol: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub coeff: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub on_total: bool,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ImagingSection {
    pub variants: Option<Vec<String>>,
    pub peak_threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene_file: Option<PathBuf>,
    pub scene: Option<SceneSpec>,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub imaging: ImagingSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parsed configuration with the scene and parameters resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scene: Scene,
    pub params: Params,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub peak_threshold: f64,
    /// Canonical scene spec text for the manifest.
    pub scene_text: String,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn scene_spec(&self) -> Result<(SceneSpec, String)> {
        match (&self.scene_file, &self.scene) {
            (Some(_), Some(_)) => Err(Error::Config("give either `scene_file` or an inline [scene], not both".into())),
            (Some(file), None) => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let spec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                Ok((spec, text))
            }
            (None, Some(spec)) => Ok((spec.clone(), format!("{spec:?}"))),
            (None, None) => Err(Error::Config("missing scene: set `scene_file` or an inline [scene] table".into())),
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let (spec, scene_text) = self.scene_spec()?;
        let scene = spec.to_scene()?;
        let unit = match spec.units {
            Units::Wavelength => scene.wavelength(),
            Units::M => 1.0,
        };
        let mut params = Params::for_scene(&scene);
        if let Some(h) = self.mesh.h_forward {
            params.h_forward = h * unit;
            if self.mesh.h_reverse.is_none() {
                params.h_reverse = 0.8 * params.h_forward;
            }
        }
        if let Some(h) = self.mesh.h_reverse {
            params.h_reverse = h * unit;
        }
        if let Some(d) = self.mesh.degree {
            params.degree = d;
        }
        let r = &self.run;
        if let Some(v) = r.cfl {
            params.cfl = v;
        }
        if let Some(v) = r.frame_stride {
            params.frame_stride = v;
        }
        if let Some(v) = r.grid_spacing {
            params.grid_spacing = v * unit;
        }
        if let Some(v) = r.amplitude {
            params.amplitude = v;
        }
        if let Some(v) = r.solver_tol {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config("solver_tol must lie in (0, 1)".into()));
            }
            params.stepper.solve.tol = v;
        }
        if let Some(v) = self.noise.coeff {
            params.noise = v;
        }
        if let Some(v) = self.noise.seed {
            params.seed = v;
        }
        params.noise_on_total = self.noise.on_total;
        if let Some(names) = &self.imaging.variants {
            params.variants = names
                .iter()
                .map(|n| Variant::parse(n).ok_or_else(|| Error::Config(format!("unknown imaging variant `{n}`"))))
                .collect::<Result<_>>()?;
        }
        params.validate()?;
        let peak_threshold = self.imaging.peak_threshold.unwrap_or(0.3);
        if !(peak_threshold > 0.0 && peak_threshold < 1.0) {
            return Err(Error::Config("peak_threshold must lie in (0, 1)".into()));
        }
        if r.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(Resolved {
            scene,
            params,
            output_dir: self.base_dir.join(self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))),
            threads: r.threads,
            peak_threshold,
            scene_text,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_scene_defaults_to_desk() {
        let cfg = RunConfig::parse("[scene]\n", Path::new(".")).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.scene, Scene::desk(1e5));
        assert_eq!(r.params, Params::for_scene(&r.scene));
    }

    #[test]
    fn full_config() {
        let text = r#"
[scene]
nu0 = 1e5
skin = "skin"
sources = [[2.0, 5.0], [5.0, 5.0], [8.0, 5.0]]

[[scene.inclusion]]
center = [3.0, 2.0]
radius = 0.2
material = "malignant"

[[scene.inclusion]]
center = [7.0, 2.0]
semi_axes = [0.625, 0.4]
rotation = 30.0
material = { rho = 1000.0, lambda = 2.16e9, mu = 21.66e3 }

[scene.boundaries]
bottom = "free"

[mesh]
h_forward = 0.125

[noise]
coeff = 0.05
seed = 9

[imaging]
variants = ["u2", "divergence"]
"#;
        let r = RunConfig::parse(text, Path::new("/tmp")).unwrap().resolve().unwrap();
        let wl = r.scene.wavelength();
        assert_eq!(r.scene.sources.len(), 3);
        assert_eq!(r.scene.shots().len(), 3);
        assert!((r.scene.inclusions[0].semi_axes[0] - 0.2 * wl).abs() < 1e-15);
        assert_eq!(r.scene.inclusions[1].material, presets::BENIGN);
        assert_eq!(r.scene.boundaries.bottom, SideCondition::Free);
        assert!((r.params.h_reverse - 0.1 * wl).abs() < 1e-15);
        assert_eq!(r.params.variants, vec![Variant::ComponentU2, Variant::Divergence]);
        assert_eq!(r.params.seed, 9);
        assert_eq!(r.output_dir, PathBuf::from("/tmp/out"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("[mesh]\nh_forward = 0.1\n", Path::new(".")).unwrap().resolve().is_err());
        assert!(RunConfig::parse("bogus = 1\n[scene]\n", Path::new(".")).is_err());
        let bad_variant = "[scene]\n[imaging]\nvariants = [\"energy\"]\n";
        assert!(RunConfig::parse(bad_variant, Path::new(".")).unwrap().resolve().is_err());
        let in_skin = "[scene]\n[[scene.inclusion]]\ncenter = [5.0, 3.95]\nradius = 0.2\nmaterial = \"benign\"\n";
        assert!(RunConfig::parse(in_skin, Path::new(".")).unwrap().resolve().is_err());
    }

    #[test]
    fn probe_placements_fire_from_midpoints() {
        let text = "[scene]\n[[scene.sra]]\nstart = [1.0, 5.0]\nend = [3.0, 5.0]\nreceivers = 9\n[[scene.sra]]\nstart = [5.0, 5.0]\nend = [7.0, 5.0]\nreceivers = 9\n";
        let r = RunConfig::parse(text, Path::new(".")).unwrap().resolve().unwrap();
        let shots = r.scene.shots();
        assert_eq!(shots.len(), 2);
        assert!((shots[1].source[0] - 6.0 * r.scene.wavelength()).abs() < 1e-12);
    }
}
