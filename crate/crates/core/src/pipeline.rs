//! End-to-end experiment: forward data on one mesh, noise, time reversal on
//! a second mesh, and RTM images per shot, per SRA and over all SRAs.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{
    add_noise, run_incident, run_total, scattered, FieldMovie, ForwardModel, ShotOptions, SolidSampler, TimePlan, TraceKind,
    TraceRecord,
};
use crate::linalg::SolveOptions;
use crate::imaging::{aggregate_probes, rtm, rtm_percentage, rtm_sum, ImageField, Variant};
use crate::mesh::{generate_mesh, sample_points, Mesh, SampleGrid};
use crate::reversal::{build_tr_problem, run_reversed};
use crate::scene::{Rect, Scene, Shot};
use crate::stepper::{stable_dt, StepperOptions};

/// Numerical parameters of an experiment. Lengths are in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub degree: usize,
    pub h_forward: f64,
    pub h_reverse: f64,
    pub cfl: f64,
    pub frame_stride: usize,
    pub noise: f64,
    pub seed: u64,
    /// Noise the total traces before subtracting the incident ones.
    pub noise_on_total: bool,
    pub variants: Vec<Variant>,
    pub grid_spacing: f64,
    pub amplitude: f64,
    pub stepper: StepperOptions,
}

impl Params {
    /// Defaults scaled to the scene wavelength: `h = λ/6` forward, `0.8×`
    /// that for the reversed mesh, imaging grid spacing `λ/10`.
    pub fn for_scene(scene: &Scene) -> Self {
        let wl = scene.wavelength();
        let h = scene.skin_thickness().map_or(wl / 6.0, |t| t.min(wl / 6.0));
        Self {
            degree: 2,
            h_forward: h,
            h_reverse: 0.8 * h,
            cfl: 0.5,
            frame_stride: 4,
            noise: 0.10,
            seed: 1,
            noise_on_total: false,
            variants: vec![Variant::ComponentU2],
            grid_spacing: wl / 10.0,
            amplitude: 1.0,
            stepper: StepperOptions {
                solve: SolveOptions {
                    tol: 1e-8,
                    ..SolveOptions::default()
                },
                ..StepperOptions::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.degree == 1 || self.degree == 2) {
            return bad("degree must be 1 or 2");
        }
        if !(self.h_forward > 0.0 && self.h_reverse > 0.0 && self.grid_spacing > 0.0) {
            return bad("mesh sizes and grid spacing must be positive");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if self.frame_stride == 0 {
            return bad("frame stride must be at least 1");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise coefficient must be >= 0");
        }
        if self.variants.is_empty() {
            return bad("at least one imaging variant is required");
        }
        Ok(())
    }

    pub fn shot_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

/// Sample grid over the solid part of the scene with spacing close to
/// `spacing`.
pub fn imaging_grid(mesh: &Mesh, scene: &Scene, spacing: f64) -> Result<SampleGrid> {
    let r: Rect = scene.solid_rect();
    let nx = (r.width() / spacing).round().max(1.0) as usize + 1;
    let ny = (r.height() / spacing).round().max(1.0) as usize + 1;
    sample_points(mesh, r, nx, ny)
}

/// Everything produced for one shot.
#[derive(Debug, Clone)]
pub struct ShotOutput {
    pub index: usize,
    pub shot: Shot,
    pub seed: u64,
    pub total: TraceRecord,
    pub incident: TraceRecord,
    pub scattered: TraceRecord,
    pub noisy: TraceRecord,
    pub incident_movie: FieldMovie,
    pub reversed_movie: FieldMovie,
    /// One raw and one percentage image per requested variant.
    pub raw: Vec<ImageField>,
    pub percentage: Vec<ImageField>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub plan: TimePlan,
    pub n_dofs_forward: usize,
    pub n_dofs_reverse: usize,
    /// Shots with movies dropped unless `keep_movies` was set.
    pub shots: Vec<ShotOutput>,
    /// `sums[sra][variant]`: percentage images summed over the SRA's sources.
    pub sums: Vec<Vec<ImageField>>,
    /// `aggregate[variant]`: SRA sums added over placements.
    pub aggregate: Vec<ImageField>,
}

impl ExperimentOutput {
    pub fn aggregate_for(&self, variant: Variant) -> Option<&ImageField> {
        self.aggregate.iter().find(|im| im.variant == variant)
    }
}

/// Shared state of the forward and reversed discretizations.
pub struct Setup<'a> {
    pub scene: &'a Scene,
    pub params: &'a Params,
    pub mesh_forward: &'a Mesh,
    pub mesh_reverse: &'a Mesh,
    pub plan: TimePlan,
    pub grid_forward: SampleGrid,
    pub grid_reverse: SampleGrid,
}

impl<'a> Setup<'a> {
    pub fn new(scene: &'a Scene, params: &'a Params, mesh_forward: &'a Mesh, mesh_reverse: &'a Mesh) -> Result<Self> {
        let dt_f = stable_dt(mesh_forward, params.degree, scene, params.cfl);
        let dt_r = stable_dt(mesh_reverse, params.degree, scene, params.cfl);
        let plan = TimePlan::new(scene.t_final, dt_f, params.frame_stride, dt_r)?;
        Ok(Self {
            scene,
            params,
            mesh_forward,
            mesh_reverse,
            plan,
            grid_forward: imaging_grid(mesh_forward, scene, params.grid_spacing)?,
            grid_reverse: imaging_grid(mesh_reverse, scene, params.grid_spacing)?,
        })
    }
}

/// Runs all shots of the scene. `on_shot` sees each complete shot (with
/// movies) before movies are dropped, unless `keep_movies` is set.
pub fn run_experiment(
    scene: &Scene,
    params: &Params,
    keep_movies: bool,
    on_shot: &(dyn Fn(&ShotOutput) -> Result<()> + Sync),
) -> Result<ExperimentOutput> {
    scene.validate()?;
    params.validate()?;
    let mesh_f = generate_mesh(scene, params.h_forward)?;
    let mesh_r = generate_mesh(scene, params.h_reverse)?;
    let setup = Setup::new(scene, params, &mesh_f, &mesh_r)?;
    let total_model = ForwardModel::new(scene, &mesh_f, params.degree, true)?;
    let background = ForwardModel::new(scene, &mesh_f, params.degree, false)?;
    let reverse_model = ForwardModel::new(scene, &mesh_r, params.degree, false)?;
    let sampler_f = SolidSampler::new(&mesh_f, &background.dofs, &setup.grid_forward)?;
    let sampler_r = SolidSampler::new(&mesh_r, &reverse_model.dofs, &setup.grid_reverse)?;
    log::info!(
        "plan: T_f = {:.4e} s, {} frames, forward dt {:.4e} x {}, reverse dt {:.4e} x {}; dofs {} / {}",
        setup.plan.t_final,
        setup.plan.n_frames,
        setup.plan.dt_forward,
        setup.plan.n_forward(),
        setup.plan.dt_reverse,
        setup.plan.n_reverse(),
        background.dofs.n_total(),
        reverse_model.dofs.n_total()
    );

    let shots = scene.shots();
    let mut outputs = shots
        .par_iter()
        .enumerate()
        .map(|(index, &shot)| {
            let out = run_shot(&setup, &total_model, &background, &reverse_model, (&sampler_f, &sampler_r), index, shot)?;
            on_shot(&out)?;
            Ok(if keep_movies { out } else { drop_movies(out) })
        })
        .collect::<Result<Vec<_>>>()?;
    outputs.sort_by_key(|o| o.index);

    let mut sums = Vec::with_capacity(scene.sras.len());
    for k in 0..scene.sras.len() {
        let per_variant = (0..params.variants.len())
            .map(|v| {
                let images: Vec<ImageField> = outputs.iter().filter(|o| o.shot.sra == k).map(|o| o.percentage[v].clone()).collect();
                rtm_sum(&images)
            })
            .collect::<Result<Vec<_>>>()?;
        sums.push(per_variant);
    }
    let aggregate = (0..params.variants.len())
        .map(|v| aggregate_probes(&sums.iter().map(|s| s[v].clone()).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        plan: setup.plan,
        n_dofs_forward: background.dofs.n_total(),
        n_dofs_reverse: reverse_model.dofs.n_total(),
        shots: outputs,
        sums,
        aggregate,
    })
}

fn drop_movies(mut out: ShotOutput) -> ShotOutput {
    out.incident_movie.frames = Vec::new();
    out.reversed_movie.frames = Vec::new();
    out
}

/// Noisy scattered traces for one shot under the configured noise mode.
pub fn noisy_scattered(total: &TraceRecord, incident: &TraceRecord, params: &Params, seed: u64) -> Result<(TraceRecord, TraceRecord)> {
    let clean = scattered(total, incident)?;
    let noisy = if params.noise_on_total {
        let mut s = scattered(&add_noise(total, params.noise, seed)?, incident)?;
        s.kind = TraceKind::ScatteredNoisy;
        s
    } else {
        add_noise(&clean, params.noise, seed)?
    };
    Ok((clean, noisy))
}

pub fn run_shot(
    setup: &Setup<'_>,
    total_model: &ForwardModel<'_>,
    background: &ForwardModel<'_>,
    reverse_model: &ForwardModel<'_>,
    samplers: (&SolidSampler, &SolidSampler),
    index: usize,
    shot: Shot,
) -> Result<ShotOutput> {
    let params = setup.params;
    let plan = &setup.plan;
    let options = ShotOptions {
        amplitude: params.amplitude,
        stepper: params.stepper,
    };
    let total = run_total(total_model, shot.source, shot.sra, plan, &options)?;
    let (incident, incident_movie) = run_incident(background, shot.source, shot.sra, plan, samplers.0, &setup.grid_forward, &options)?;
    let seed = params.shot_seed(index);
    let (clean, noisy) = noisy_scattered(&total, &incident, params, seed)?;
    let prob = build_tr_problem(reverse_model, &noisy, plan)?;
    let reversed_movie = run_reversed(&prob, samplers.1, &setup.grid_reverse, params.stepper)?;
    let provenance = format!("shot{index}:sra{}:x={:.6e}:y={:.6e}", shot.sra, shot.source[0], shot.source[1]);
    let mut raw = Vec::new();
    let mut percentage = Vec::new();
    for &variant in &params.variants {
        let mut image = rtm(&reversed_movie, &incident_movie, variant)?;
        image.provenance = vec![provenance.clone()];
        percentage.push(rtm_percentage(&image, &incident_movie)?);
        raw.push(image);
    }
    log::info!("shot {index} done (sra {}, source ({:.4e}, {:.4e}))", shot.sra, shot.source[0], shot.source[1]);
    Ok(ShotOutput {
        index,
        shot,
        seed,
        total,
        incident,
        scattered: clean,
        noisy,
        incident_movie,
        reversed_movie,
        raw,
        percentage,
    })
}
