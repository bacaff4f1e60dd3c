//! Batch driver: `forward`, `reverse`, `image`, `pipeline` and `validate`.
//!
//! Output layout of `pipeline` (paths relative to the output directory):
//!
//! ```text
//! manifest.txt
//! shot<k>/{total,incident,scattered,scattered_noisy}.csv
//! shot<k>/{incident,reversed}.trim
//! shot<k>/{image,percentage,sum}_<variant>.{csv,pgm,pgm.txt,peaks.txt}
//! sra<j>/sum_<variant>.*
//! aggregate_<variant>.*
//! ```
//!
//! Every stage is listed in the manifest with the command that reproduces
//! it when run from the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{Resolved, RunConfig};
use crate::error::{Error, Result};
use crate::forward::{run_incident, run_total, FieldMovie, ForwardModel, ShotOptions, SolidSampler, TraceRecord};
use crate::imaging::{aggregate_probes, find_peaks, rtm, rtm_percentage, rtm_sum, ImageField, Stage, Variant};
use crate::mesh::{generate_mesh, Mesh};
use crate::pipeline::{noisy_scattered, Setup};
use crate::reversal::{build_tr_problem, run_reversed};
use crate::scene::Shot;
use crate::validation;

#[derive(Debug, Parser)]
#[command(name = "elastotr", version, about = "Acousto-elastic wave simulation and time-reversal imaging")]
pub struct Cli {
    /// Worker threads (default: config `run.threads`, then all cores).
    #[arg(long, global = true, env = "ELASTOTR_THREADS")]
    pub threads: Option<usize>,
    /// Noise seed, overriding the config.
    #[arg(long, global = true, env = "ELASTOTR_SEED")]
    pub seed: Option<u64>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic data: total, incident, scattered and noisy traces plus the
    /// incident movie, one directory per shot.
    Forward {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: config `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this shot.
        #[arg(long)]
        shot: Option<usize>,
    },
    /// Back-propagates a trace file on the reversal mesh.
    Reverse {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// Reversed movie file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// RTM images from paired incident/reversed movies, or the pointwise sum
    /// of existing images given with `--sum`.
    Image {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        incident: Vec<PathBuf>,
        #[arg(long)]
        reversed: Vec<PathBuf>,
        /// Image CSVs to add up instead of correlating movies.
        #[arg(long = "sum", conflicts_with_all = ["incident", "reversed"])]
        sum: Vec<PathBuf>,
        /// full, component_u2 or divergence (repeatable; default from config).
        #[arg(long = "variant")]
        variants: Vec<String>,
        /// Peak threshold as a fraction of the image maximum.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every shot and SRA end to end, with a manifest.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip writing movie files (images are still computed).
        #[arg(long)]
        no_movies: bool,
    },
    /// Runs the invariant and oracle checks.
    Validate,
}

/// Runs a parsed command line. `Ok(false)` means the command finished but
/// reported failures (failed checks or pipeline stages).
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Forward { ref config, ref out, shot } => {
            let res = load(config, &cli)?;
            let out = out.clone().unwrap_or_else(|| res.output_dir.clone());
            cmd_forward(&res, &out, shot)?;
            Ok(true)
        }
        Command::Reverse {
            ref config,
            ref traces,
            ref out,
        } => {
            let res = load(config, &cli)?;
            cmd_reverse(&res, traces, out)?;
            Ok(true)
        }
        Command::Image {
            ref config,
            ref incident,
            ref reversed,
            ref sum,
            ref variants,
            threshold,
            ref out,
        } => {
            let res = load(config, &cli)?;
            let threshold = threshold.unwrap_or(res.peak_threshold);
            if !sum.is_empty() {
                cmd_sum(sum, threshold, out)?;
                return Ok(true);
            }
            let variants = if variants.is_empty() {
                res.params.variants.clone()
            } else {
                variants
                    .iter()
                    .map(|v| Variant::parse(v).ok_or_else(|| Error::Config(format!("unknown variant `{v}`"))))
                    .collect::<Result<_>>()?
            };
            cmd_image(&res, incident, reversed, &variants, threshold, out)?;
            Ok(true)
        }
        Command::Pipeline {
            ref config,
            ref out,
            no_movies,
        } => {
            let res = load(config, &cli)?;
            let out = out.clone().unwrap_or_else(|| res.output_dir.clone());
            let manifest = cmd_pipeline(&res, config, &out, !no_movies)?;
            Ok(manifest.ok())
        }
        Command::Validate => {
            init_threads(cli.threads);
            let checks = validation::run_all()?;
            for c in &checks {
                println!("{}", c.line());
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn load(config: &Path, cli: &Cli) -> Result<Resolved> {
    let mut res = RunConfig::load(config)?.resolve()?;
    if let Some(seed) = cli.seed {
        res.params.seed = seed;
    }
    init_threads(cli.threads.or(res.threads));
    Ok(res)
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Fails only if the pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Forward and reversed meshes of a resolved config.
pub struct Meshes {
    pub forward: Mesh,
    pub reverse: Mesh,
}

impl Meshes {
    pub fn new(res: &Resolved) -> Result<Self> {
        res.scene.validate()?;
        res.params.validate()?;
        Ok(Self {
            forward: generate_mesh(&res.scene, res.params.h_forward)?,
            reverse: generate_mesh(&res.scene, res.params.h_reverse)?,
        })
    }
}

/// Output of the forward stage of one shot.
pub struct ForwardData {
    pub total: TraceRecord,
    pub incident: TraceRecord,
    pub scattered: TraceRecord,
    pub noisy: TraceRecord,
    pub incident_movie: FieldMovie,
}

pub fn forward_stage(setup: &Setup<'_>, total_model: &ForwardModel<'_>, background: &ForwardModel<'_>, sampler: &SolidSampler, index: usize, shot: Shot) -> Result<ForwardData> {
    let options = ShotOptions {
        amplitude: setup.params.amplitude,
        stepper: setup.params.stepper,
    };
    let total = run_total(total_model, shot.source, shot.sra, &setup.plan, &options)?;
    let (incident, incident_movie) = run_incident(background, shot.source, shot.sra, &setup.plan, sampler, &setup.grid_forward, &options)?;
    let (scattered, noisy) = noisy_scattered(&total, &incident, setup.params, setup.params.shot_seed(index))?;
    Ok(ForwardData {
        total,
        incident,
        scattered,
        noisy,
        incident_movie,
    })
}

impl ForwardData {
    fn write(&self, dir: &Path, movie: bool) -> Result<Vec<PathBuf>> {
        create_dir(dir)?;
        let mut files = Vec::new();
        for (name, rec) in [
            ("total.csv", &self.total),
            ("incident.csv", &self.incident),
            ("scattered.csv", &self.scattered),
            ("scattered_noisy.csv", &self.noisy),
        ] {
            let path = dir.join(name);
            rec.write_csv(&path)?;
            files.push(path);
        }
        if movie {
            let path = dir.join("incident.trim");
            self.incident_movie.write(&path)?;
            files.push(path);
        }
        Ok(files)
    }
}

pub fn reverse_stage(setup: &Setup<'_>, reverse_model: &ForwardModel<'_>, sampler: &SolidSampler, traces: &TraceRecord) -> Result<FieldMovie> {
    let prob = build_tr_problem(reverse_model, traces, &setup.plan)?;
    run_reversed(&prob, sampler, &setup.grid_reverse, setup.params.stepper)
}

/// Raw and percentage image of one movie pair per variant.
pub fn image_stage(incident: &FieldMovie, reversed: &FieldMovie, variants: &[Variant], provenance: &str) -> Result<Vec<(ImageField, ImageField)>> {
    variants
        .iter()
        .map(|&v| {
            let mut raw = rtm(reversed, incident, v)?;
            raw.provenance = vec![provenance.to_string()];
            let pct = rtm_percentage(&raw, incident)?;
            Ok((raw, pct))
        })
        .collect()
}

/// Writes `<dir>/<stem>.csv`, `.pgm` (+ sidecar) and `.peaks.txt`.
pub fn write_image(image: &ImageField, dir: &Path, stem: &str, threshold: f64) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    image.write_csv(&csv)?;
    let pgm = dir.join(format!("{stem}.pgm"));
    let sidecar = image.write_pgm(&pgm)?;
    let peaks = dir.join(format!("{stem}.peaks.txt"));
    let report = find_peaks(image, threshold)?;
    std::fs::write(&peaks, report.to_text()).map_err(|e| Error::io(&peaks, e))?;
    Ok(vec![csv, pgm, sidecar, peaks])
}

pub fn cmd_forward(res: &Resolved, out: &Path, only: Option<usize>) -> Result<()> {
    let meshes = Meshes::new(res)?;
    let setup = Setup::new(&res.scene, &res.params, &meshes.forward, &meshes.reverse)?;
    let total_model = ForwardModel::new(&res.scene, &meshes.forward, res.params.degree, true)?;
    let background = ForwardModel::new(&res.scene, &meshes.forward, res.params.degree, false)?;
    let sampler = SolidSampler::new(&meshes.forward, &background.dofs, &setup.grid_forward)?;
    let shots = res.scene.shots();
    let selected: Vec<usize> = match only {
        Some(k) if k >= shots.len() => {
            return Err(Error::Config(format!("shot {k} requested but the scene has {} shots", shots.len())))
        }
        Some(k) => vec![k],
        None => (0..shots.len()).collect(),
    };
    selected.par_iter().try_for_each(|&k| {
        let data = forward_stage(&setup, &total_model, &background, &sampler, k, shots[k])?;
        data.write(&out.join(format!("shot{k}")), true)?;
        log::info!("forward shot {k} written");
        Ok(())
    })
}

pub fn cmd_reverse(res: &Resolved, traces: &Path, out: &Path) -> Result<()> {
    let record = TraceRecord::read_csv(traces)?;
    let meshes = Meshes::new(res)?;
    let setup = Setup::new(&res.scene, &res.params, &meshes.forward, &meshes.reverse)?;
    let model = ForwardModel::new(&res.scene, &meshes.reverse, res.params.degree, false)?;
    let sampler = SolidSampler::new(&meshes.reverse, &model.dofs, &setup.grid_reverse)?;
    let movie = reverse_stage(&setup, &model, &sampler, &record)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    movie.write(out)
}

pub fn cmd_image(res: &Resolved, incident: &[PathBuf], reversed: &[PathBuf], variants: &[Variant], threshold: f64, out: &Path) -> Result<()> {
    if incident.len() != reversed.len() {
        return Err(Error::Config(format!(
            "{} incident movies but {} reversed movies; give them in pairs",
            incident.len(),
            reversed.len()
        )));
    }
    if incident.is_empty() {
        let meshes = Meshes::new(res)?;
        let setup = Setup::new(&res.scene, &res.params, &meshes.forward, &meshes.reverse)?;
        let g = &setup.grid_forward;
        for &v in variants {
            let zero = ImageField {
                nx: g.nx,
                ny: g.ny,
                rect: g.rect,
                values: vec![0.0; g.len()],
                variant: v,
                stage: Stage::Raw,
                provenance: Vec::new(),
            };
            write_image(&zero, out, &format!("image_{}", v.name()), threshold)?;
        }
        return Ok(());
    }
    let mut per_variant: Vec<Vec<ImageField>> = vec![Vec::new(); variants.len()];
    let single = incident.len() == 1;
    for (k, (inc, rev)) in incident.iter().zip(reversed).enumerate() {
        let inc_movie = FieldMovie::read(inc)?;
        let rev_movie = FieldMovie::read(rev)?;
        let images = image_stage(&inc_movie, &rev_movie, variants, &rev.to_string_lossy())?;
        for (v, (raw, pct)) in images.into_iter().enumerate() {
            let suffix = if single { String::new() } else { format!("_{k}") };
            write_image(&raw, out, &format!("image_{}{suffix}", variants[v].name()), threshold)?;
            write_image(&pct, out, &format!("percentage_{}{suffix}", variants[v].name()), threshold)?;
            per_variant[v].push(pct);
        }
    }
    for (v, images) in per_variant.iter().enumerate() {
        write_image(&rtm_sum(images)?, out, &format!("sum_{}", variants[v].name()), threshold)?;
    }
    Ok(())
}

pub fn cmd_sum(inputs: &[PathBuf], threshold: f64, out: &Path) -> Result<()> {
    let images = inputs.iter().map(|p| ImageField::read_csv(p)).collect::<Result<Vec<_>>>()?;
    let total = aggregate_probes(&images)?;
    write_image(&total, out, &format!("aggregate_{}", total.variant.name()), threshold)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageStatus {
    Ok,
    Failed(String),
    /// Not run because an input stage failed.
    Skipped,
}

impl StageStatus {
    fn text(&self) -> String {
        match self {
            StageStatus::Ok => "ok".into(),
            StageStatus::Failed(m) => format!("failed: {}", m.replace('\n', " ")),
            StageStatus::Skipped => "skipped".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StageEntry {
    pub name: String,
    pub status: StageStatus,
    pub command: String,
    /// Extra provenance lines (`key = value`).
    pub info: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
}

/// Provenance and status of a pipeline run.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub header: Vec<(String, String)>,
    pub stages: Vec<StageEntry>,
}

impl Manifest {
    pub fn ok(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Ok)
    }

    pub fn to_text(&self, root: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(root).unwrap_or(p).display().to_string();
        let failed = self.stages.iter().filter(|s| s.status != StageStatus::Ok).count();
        let mut s = String::from("# elastotr pipeline manifest; commands run from this directory\n");
        let status = if failed == 0 { "ok".to_string() } else { format!("partial ({failed} of {} stages not ok)", self.stages.len()) };
        let _ = writeln!(s, "status = {status}");
        for (k, v) in &self.header {
            let _ = writeln!(s, "{k} = {v}");
        }
        for st in &self.stages {
            let _ = writeln!(s, "\n[{}]\nstatus = {}\ncommand = {}", st.name, st.status.text(), st.command);
            for (k, v) in &st.info {
                let _ = writeln!(s, "{k} = {v}");
            }
            for o in &st.outputs {
                let _ = writeln!(s, "output = {}", rel(o));
            }
        }
        s
    }
}

fn status_of<T>(r: &Result<T>) -> StageStatus {
    match r {
        Ok(_) => StageStatus::Ok,
        Err(e) => StageStatus::Failed(e.to_string()),
    }
}

struct ShotResult {
    stages: Vec<StageEntry>,
    percentage: Option<Vec<ImageField>>,
}

/// Runs all shots, SRA sums and the aggregate, writing the artifact tree and
/// `manifest.txt` under `out`. Stage failures are recorded in the manifest
/// rather than returned; errors before any shot runs are returned.
pub fn cmd_pipeline(res: &Resolved, config: &Path, out: &Path, movies: bool) -> Result<Manifest> {
    create_dir(out)?;
    let config_abs = std::fs::canonicalize(config).unwrap_or_else(|_| config.to_path_buf());
    let cfg = config_abs.display();
    let params = &res.params;
    let seed = params.seed;
    let variants: Vec<&str> = params.variants.iter().map(|v| v.name()).collect();
    let var_flags: String = variants.iter().map(|v| format!(" --variant {v}")).collect();
    let threshold = res.peak_threshold;

    let meshes = Meshes::new(res)?;
    let setup = Setup::new(&res.scene, params, &meshes.forward, &meshes.reverse)?;
    let total_model = ForwardModel::new(&res.scene, &meshes.forward, params.degree, true)?;
    let background = ForwardModel::new(&res.scene, &meshes.forward, params.degree, false)?;
    let reverse_model = ForwardModel::new(&res.scene, &meshes.reverse, params.degree, false)?;
    let sampler_f = SolidSampler::new(&meshes.forward, &background.dofs, &setup.grid_forward)?;
    let sampler_r = SolidSampler::new(&meshes.reverse, &reverse_model.dofs, &setup.grid_reverse)?;
    let plan = setup.plan;

    let mut manifest = Manifest::default();
    let h = |k: &str, v: String| (k.to_string(), v);
    manifest.header = vec![
        h("config", cfg.to_string()),
        h("seed", seed.to_string()),
        h("shot_seed", "seed + shot index".into()),
        h("noise_coeff", params.noise.to_string()),
        h("noise_on_total", params.noise_on_total.to_string()),
        h("degree", params.degree.to_string()),
        h("h_forward", format!("{:.16e}", params.h_forward)),
        h("h_reverse", format!("{:.16e}", params.h_reverse)),
        h("cfl", params.cfl.to_string()),
        h("solver_tol", format!("{:e}", params.stepper.solve.tol)),
        h("dofs_forward", background.dofs.n_total().to_string()),
        h("dofs_reverse", reverse_model.dofs.n_total().to_string()),
        h("t_final", format!("{:.16e}", plan.t_final)),
        h("n_frames", plan.n_frames.to_string()),
        h("dt_forward", format!("{:.16e}", plan.dt_forward)),
        h("stride_forward", plan.stride_forward.to_string()),
        h("dt_reverse", format!("{:.16e}", plan.dt_reverse)),
        h("stride_reverse", plan.stride_reverse.to_string()),
        h("variants", variants.join(",")),
        h("peak_threshold", threshold.to_string()),
        h("threads", rayon::current_num_threads().to_string()),
        h("version", env!("CARGO_PKG_VERSION").to_string()),
    ];

    let shots = res.scene.shots();
    let done = Mutex::new(0usize);
    let results: Vec<ShotResult> = shots
        .par_iter()
        .enumerate()
        .map(|(k, &shot)| {
            let dir = out.join(format!("shot{k}"));
            let info = vec![
                ("sra".to_string(), shot.sra.to_string()),
                ("source".to_string(), format!("{:.16e}, {:.16e}", shot.source[0], shot.source[1])),
                ("noise_seed".to_string(), params.shot_seed(k).to_string()),
            ];
            let mut stages = Vec::new();

            let fwd = forward_stage(&setup, &total_model, &background, &sampler_f, k, shot);
            let fwd_files = fwd.as_ref().map_err(|e| e.to_string()).and_then(|d| d.write(&dir, movies).map_err(|e| e.to_string()));
            stages.push(StageEntry {
                name: format!("shot{k}.forward"),
                status: match &fwd_files {
                    Ok(_) => StageStatus::Ok,
                    Err(m) => StageStatus::Failed(m.clone()),
                },
                command: format!("elastotr forward --config {cfg} --seed {seed} --shot {k} --out ."),
                info,
                outputs: fwd_files.unwrap_or_default(),
            });
            let data = fwd.ok();

            let rev_path = dir.join("reversed.trim");
            let rev = data.as_ref().map(|d| reverse_stage(&setup, &reverse_model, &sampler_r, &d.noisy));
            let mut rev_entry = StageEntry {
                name: format!("shot{k}.reverse"),
                status: StageStatus::Skipped,
                command: format!("elastotr reverse --config {cfg} --traces shot{k}/scattered_noisy.csv --out shot{k}/reversed.trim"),
                info: Vec::new(),
                outputs: Vec::new(),
            };
            if let Some(r) = &rev {
                rev_entry.status = status_of(r);
                if let (Ok(movie), true) = (r, movies) {
                    match movie.write(&rev_path) {
                        Ok(()) => rev_entry.outputs.push(rev_path.clone()),
                        Err(e) => rev_entry.status = StageStatus::Failed(e.to_string()),
                    }
                }
            }
            let rev_ok = rev_entry.status == StageStatus::Ok;
            stages.push(rev_entry);

            let mut img_entry = StageEntry {
                name: format!("shot{k}.image"),
                status: StageStatus::Skipped,
                command: format!(
                    "elastotr image --config {cfg} --incident shot{k}/incident.trim --reversed shot{k}/reversed.trim{var_flags} --threshold {threshold} --out shot{k}"
                ),
                info: Vec::new(),
                outputs: Vec::new(),
            };
            let mut percentage = None;
            if let (Some(d), Some(Ok(reversed)), true) = (&data, &rev, rev_ok) {
                let written = image_stage(&d.incident_movie, reversed, &params.variants, &format!("shot{k}/reversed.trim")).and_then(|images| {
                    let mut files = Vec::new();
                    let mut pcts = Vec::new();
                    for (v, (raw, pct)) in params.variants.iter().zip(images) {
                        files.extend(write_image(&raw, &dir, &format!("image_{}", v.name()), threshold)?);
                        files.extend(write_image(&pct, &dir, &format!("percentage_{}", v.name()), threshold)?);
                        let sum = rtm_sum(std::slice::from_ref(&pct))?;
                        files.extend(write_image(&sum, &dir, &format!("sum_{}", v.name()), threshold)?);
                        pcts.push(pct);
                    }
                    Ok((files, pcts))
                });
                img_entry.status = status_of(&written);
                if let Ok((files, pcts)) = written {
                    img_entry.outputs = files;
                    percentage = Some(pcts);
                }
            }
            stages.push(img_entry);
            let mut n = done.lock().expect("progress lock");
            *n += 1;
            log::info!("shot {k} finished ({} of {})", *n, shots.len());
            ShotResult { stages, percentage }
        })
        .collect();

    for r in &results {
        manifest.stages.extend(r.stages.iter().cloned());
    }

    // Per-SRA sums over that SRA's shots, then the aggregate over SRAs.
    let mut sra_sums: Vec<Option<Vec<ImageField>>> = Vec::new();
    for j in 0..res.scene.sras.len() {
        let members: Vec<usize> = shots.iter().enumerate().filter(|(_, s)| s.sra == j).map(|(k, _)| k).collect();
        let inputs: String = members.iter().map(|k| format!(" --incident shot{k}/incident.trim --reversed shot{k}/reversed.trim")).collect();
        let mut entry = StageEntry {
            name: format!("sra{j}.sum"),
            status: StageStatus::Skipped,
            command: format!("elastotr image --config {cfg}{inputs}{var_flags} --threshold {threshold} --out sra{j}"),
            info: vec![("shots".into(), members.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","))],
            outputs: Vec::new(),
        };
        let pcts: Option<Vec<&Vec<ImageField>>> = members.iter().map(|&k| results[k].percentage.as_ref()).collect();
        let mut sums = None;
        if let Some(pcts) = pcts {
            let dir = out.join(format!("sra{j}"));
            let written = (0..params.variants.len())
                .map(|v| {
                    let images: Vec<ImageField> = pcts.iter().map(|p| p[v].clone()).collect();
                    let sum = rtm_sum(&images)?;
                    let files = write_image(&sum, &dir, &format!("sum_{}", sum.variant.name()), threshold)?;
                    Ok((sum, files))
                })
                .collect::<Result<Vec<_>>>();
            entry.status = status_of(&written);
            if let Ok(w) = written {
                let (s, files): (Vec<_>, Vec<_>) = w.into_iter().unzip();
                entry.outputs = files.into_iter().flatten().collect();
                sums = Some(s);
            }
        }
        manifest.stages.push(entry);
        sra_sums.push(sums);
    }

    for (v, name) in variants.iter().enumerate() {
        let inputs: String = (0..sra_sums.len()).map(|j| format!(" --sum sra{j}/sum_{name}.csv")).collect();
        let mut entry = StageEntry {
            name: format!("aggregate.{name}"),
            status: StageStatus::Skipped,
            command: format!("elastotr image --config {cfg}{inputs} --threshold {threshold} --out ."),
            info: Vec::new(),
            outputs: Vec::new(),
        };
        let all: Option<Vec<ImageField>> = sra_sums.iter().map(|s| s.as_ref().map(|s| s[v].clone())).collect();
        if let Some(all) = all {
            let written = aggregate_probes(&all).and_then(|agg| write_image(&agg, out, &format!("aggregate_{name}"), threshold));
            entry.status = status_of(&written);
            entry.outputs = written.unwrap_or_default();
        }
        manifest.stages.push(entry);
    }

    let path = out.join("manifest.txt");
    std::fs::write(&path, manifest.to_text(out)).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
