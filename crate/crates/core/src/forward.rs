//! Synthetic data: Ricker sources, total and incident runs, receiver traces,
//! multiplicative noise and solid-velocity movies on the imaging grid.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::assembly::{assemble_operators, assemble_source, basis, BoundarySetup, Medium, OperatorSet};
use crate::error::{Error, Result};
use crate::mesh::{DofMap, Mesh, SampleGrid};
use crate::scene::{Point, Rect, Scene};
use crate::stepper::{run, FieldState, Forcing, Recorder, Stepper, StepperOptions};

/// `(1 − 2π²(ν₀t − 1)²) exp(−π²(ν₀t − 1)²)`
pub fn ricker(t: f64, nu0: f64) -> f64 {
    let a = std::f64::consts::PI * (nu0 * t - 1.0);
    let a2 = a * a;
    (1.0 - 2.0 * a2) * (-a2).exp()
}

/// Common clock of a forward/reversed pair. Both runs store frames at the
/// same interval `Δ = stride_forward · dt_forward = stride_reverse · dt_reverse`
/// and the horizon is rounded up to a whole number of frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePlan {
    pub t_final: f64,
    pub n_frames: usize,
    pub dt_forward: f64,
    pub stride_forward: usize,
    pub dt_reverse: f64,
    pub stride_reverse: usize,
}

impl TimePlan {
    /// `dt_forward` is used as given; the reversed step is the largest
    /// divisor of the frame interval not exceeding `dt_reverse_max`.
    pub fn new(t_final: f64, dt_forward: f64, stride_forward: usize, dt_reverse_max: f64) -> Result<Self> {
        if !(t_final > 0.0 && dt_forward > 0.0 && dt_reverse_max > 0.0 && stride_forward > 0) {
            return Err(Error::InvalidScene("time plan needs positive horizon, steps and stride".into()));
        }
        let interval = dt_forward * stride_forward as f64;
        let n_frames = ((t_final / interval) - 1e-9).ceil().max(1.0) as usize;
        let stride_reverse = ((interval / dt_reverse_max) - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            t_final: n_frames as f64 * interval,
            n_frames,
            dt_forward,
            stride_forward,
            dt_reverse: interval / stride_reverse as f64,
            stride_reverse,
        })
    }

    pub fn frame_interval(&self) -> f64 {
        self.dt_forward * self.stride_forward as f64
    }

    pub fn n_forward(&self) -> usize {
        self.n_frames * self.stride_forward
    }

    pub fn n_reverse(&self) -> usize {
        self.n_frames * self.stride_reverse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Total,
    Incident,
    Scattered,
    ScatteredNoisy,
}

impl TraceKind {
    pub fn name(self) -> &'static str {
        match self {
            TraceKind::Total => "total",
            TraceKind::Incident => "incident",
            TraceKind::Scattered => "scattered",
            TraceKind::ScatteredNoisy => "scattered_noisy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [TraceKind::Total, TraceKind::Incident, TraceKind::Scattered, TraceKind::ScatteredNoisy]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// Pressure time series at the receivers; `values[k][r]` is receiver `r` at
/// `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub kind: TraceKind,
    pub times: Vec<f64>,
    pub receivers: Vec<Point>,
    pub values: Vec<Vec<f64>>,
}

impl TraceRecord {
    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|row| row.iter().map(|v| alpha * v).collect()).collect(),
            ..self.clone()
        }
    }

    /// Receiver `r` at time `t` by linear interpolation; zero outside the record.
    pub fn sample(&self, r: usize, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return 0.0;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.values[0][r];
        }
        if k == n {
            return self.values[n - 1][r];
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        (1.0 - w) * self.values[k - 1][r] + w * self.values[k][r]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = String::from("time");
        for p in &self.receivers {
            let _ = write!(header, ",{:.16e}:{:.16e}", p[0], p[1]);
        }
        let mut body = String::with_capacity(self.times.len() * (self.receivers.len() + 1) * 24);
        for (t, row) in self.times.iter().zip(&self.values) {
            let _ = write!(body, "{t:.16e}");
            for v in row {
                let _ = write!(body, ",{v:.16e}");
            }
            body.push('\n');
        }
        writeln!(w, "# kind={} receivers={} samples={}", self.kind.name(), self.receivers.len(), self.times.len())
            .and_then(|_| writeln!(w, "{header}"))
            .and_then(|_| w.write_all(body.as_bytes()))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::format(path, "unexpected end of file"))?
                .map_err(|e| Error::io(path, e))
        };
        let meta = next()?;
        let kind = meta
            .split_whitespace()
            .find_map(|tok| tok.strip_prefix("kind="))
            .and_then(TraceKind::parse)
            .ok_or_else(|| Error::format(path, "first line must be `# kind=<kind> ...`"))?;
        let header = next()?;
        let mut cols = header.split(',');
        if cols.next() != Some("time") {
            return Err(Error::format(path, "header must start with `time`"));
        }
        let receivers = cols
            .map(|c| {
                let (x, y) = c.split_once(':').ok_or_else(|| Error::format(path, format!("bad receiver column `{c}`")))?;
                let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::format(path, format!("bad coordinate `{s}`")));
                Ok([parse(x)?, parse(y)?])
            })
            .collect::<Result<Vec<Point>>>()?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::format(path, format!("non-numeric value on data line {}", lineno + 1)))?;
            if nums.len() != receivers.len() + 1 {
                return Err(Error::format(path, format!("data line {} has {} columns", lineno + 1, nums.len())));
            }
            if nums.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(path, format!("non-finite value on data line {}", lineno + 1)));
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::format(path, "times must be strictly increasing"));
        }
        Ok(Self {
            kind,
            times,
            receivers,
            values,
        })
    }
}

fn same_layout(a: &TraceRecord, b: &TraceRecord) -> Result<()> {
    if a.times != b.times || a.receivers != b.receivers {
        return Err(Error::GridMismatch("trace records differ in times or receivers".into()));
    }
    Ok(())
}

/// `total − incident`, element-wise.
pub fn scattered(total: &TraceRecord, incident: &TraceRecord) -> Result<TraceRecord> {
    same_layout(total, incident)?;
    let values = total
        .values
        .iter()
        .zip(&incident.values)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect();
    Ok(TraceRecord {
        kind: TraceKind::Scattered,
        values,
        ..total.clone()
    })
}

/// `value · (1 + coeff · g)` with `g` i.i.d. standard normal, drawn in
/// time-major order from a ChaCha8 stream seeded with `seed`.
pub fn add_noise(traces: &TraceRecord, coeff: f64, seed: u64) -> Result<TraceRecord> {
    if !(coeff >= 0.0 && coeff.is_finite()) {
        return Err(Error::InvalidScene(format!("noise coefficient must be >= 0 (got {coeff})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = traces
        .values
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    v * (1.0 + coeff * g)
                })
                .collect()
        })
        .collect();
    Ok(TraceRecord {
        kind: TraceKind::ScatteredNoisy,
        values,
        ..traces.clone()
    })
}

/// Evaluates `(u₁, u₂, div u)` of a solid field at the sample points from
/// the basis of each containing triangle.
#[derive(Debug, Clone)]
pub struct SolidSampler {
    /// Per point: `(solid node, φ, ∂φ/∂x, ∂φ/∂y)`.
    entries: Vec<Vec<(usize, f64, f64, f64)>>,
}

impl SolidSampler {
    pub fn new(mesh: &Mesh, dofs: &DofMap, grid: &SampleGrid) -> Result<Self> {
        let nloc = dofs.nodes_per_element();
        let entries = grid
            .locations
            .iter()
            .map(|&(t, l)| {
                let (gl, _) = basis::barycentric_gradients(mesh.triangle_points(t));
                let v = basis::values(dofs.degree, l);
                let g = basis::gradients(dofs.degree, l, &gl);
                let nodes = mesh.element_nodes(t);
                (0..nloc)
                    .map(|i| {
                        let s = dofs.solid_node(nodes[i]).ok_or_else(|| Error::Mesh("sample point outside the solid".into()))?;
                        Ok((s, v[i], g[i][0], g[i][1]))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `velocity` is the solid block (interleaved components).
    pub fn sample(&self, velocity: &[f64]) -> Frame {
        let n = self.entries.len();
        let mut f = Frame {
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            div: vec![0.0; n],
        };
        for (k, e) in self.entries.iter().enumerate() {
            for &(s, phi, dx, dy) in e {
                let (a, b) = (velocity[2 * s], velocity[2 * s + 1]);
                f.u1[k] += phi * a;
                f.u2[k] += phi * b;
                f.div[k] += dx * a + dy * b;
            }
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub div: Vec<f64>,
}

impl Frame {
    pub fn zeros(n: usize) -> Self {
        Self {
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            div: vec![0.0; n],
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| alpha * x).collect();
        Self {
            u1: s(&self.u1),
            u2: s(&self.u2),
            div: s(&self.div),
        }
    }
}

const MOVIE_MAGIC: &[u8; 4] = b"TRIM";
const MOVIE_VERSION: u32 = 1;

/// Solid velocity and its divergence sampled on a regular grid every
/// `stride` steps of size `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMovie {
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
    pub stride: usize,
    pub dt: f64,
    pub frames: Vec<Frame>,
}

impl FieldMovie {
    pub fn new(grid: &SampleGrid, stride: usize, dt: f64) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny,
            rect: grid.rect,
            stride,
            dt,
            frames: Vec::new(),
        }
    }

    pub fn frame_interval(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            frames: self.frames.iter().map(|f| f.scaled(alpha)).collect(),
            ..self.clone()
        }
    }

    pub fn same_grid(&self, other: &FieldMovie) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.rect.x_min, other.rect.x_min)
            && close(self.rect.x_max, other.rect.x_max)
            && close(self.rect.y_min, other.rect.y_min)
            && close(self.rect.y_max, other.rect.y_max)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_points();
        let mut out = Vec::with_capacity(72 + self.frames.len() * 3 * n * 8);
        out.extend_from_slice(MOVIE_MAGIC);
        out.extend_from_slice(&MOVIE_VERSION.to_le_bytes());
        for v in [self.nx, self.ny, self.frames.len(), self.stride] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        for v in [self.dt, self.rect.x_min, self.rect.x_max, self.rect.y_min, self.rect.y_max] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for f in &self.frames {
            for field in [&f.u1, &f.u2, &f.div] {
                for v in field {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(Error::format(path, "movie file truncated"));
            }
            let (head, tail) = r.split_at(n);
            r = tail;
            Ok(head)
        };
        if take(4)? != MOVIE_MAGIC {
            return Err(Error::format(path, "not a movie file (bad magic)"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != MOVIE_VERSION {
            return Err(Error::format(path, format!("unsupported movie version {version}")));
        }
        let mut u = || -> Result<usize> { Ok(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize) };
        let (nx, ny, frames, stride) = (u()?, u()?, u()?, u()?);
        let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let dt = f()?;
        let rect = Rect {
            x_min: f()?,
            x_max: f()?,
            y_min: f()?,
            y_max: f()?,
        };
        let n = nx * ny;
        let expected = frames * 3 * n * 8;
        if r.len() != expected {
            return Err(Error::format(path, format!("movie payload has {} bytes, expected {expected}", r.len())));
        }
        let floats: Vec<f64> = r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let frames = floats
            .chunks_exact(3 * n.max(1))
            .take(frames)
            .map(|c| Frame {
                u1: c[..n].to_vec(),
                u2: c[n..2 * n].to_vec(),
                div: c[2 * n..3 * n].to_vec(),
            })
            .collect();
        Ok(Self {
            nx,
            ny,
            rect,
            stride,
            dt,
            frames,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Records pressure at fixed fluid unknowns every step.
pub struct TraceRecorder {
    record: TraceRecord,
    dofs: Vec<usize>,
}

impl TraceRecorder {
    pub fn new(kind: TraceKind, receivers: Vec<Point>, dofs: Vec<usize>) -> Self {
        Self {
            record: TraceRecord {
                kind,
                times: Vec::new(),
                receivers,
                values: Vec::new(),
            },
            dofs,
        }
    }

    pub fn finish(self) -> TraceRecord {
        self.record
    }
}

impl Recorder for TraceRecorder {
    fn record(&mut self, state: &FieldState) -> Result<()> {
        self.record.times.push(state.time());
        self.record.values.push(self.dofs.iter().map(|&i| state.curr[i]).collect());
        Ok(())
    }
}

/// Stores sampled solid frames at steps `0, k, 2k, …` up to a frame budget.
/// `sign` multiplies every stored frame.
pub struct MovieRecorder<'a> {
    sampler: &'a SolidSampler,
    movie: FieldMovie,
    max_frames: usize,
    sign: f64,
}

impl<'a> MovieRecorder<'a> {
    pub fn new(sampler: &'a SolidSampler, grid: &SampleGrid, stride: usize, dt: f64, max_frames: usize, sign: f64) -> Self {
        Self {
            sampler,
            movie: FieldMovie::new(grid, stride, dt),
            max_frames,
            sign,
        }
    }

    pub fn finish(self) -> FieldMovie {
        self.movie
    }
}

impl Recorder for MovieRecorder<'_> {
    fn record(&mut self, state: &FieldState) -> Result<()> {
        if state.step % self.movie.stride == 0 && self.movie.frames.len() < self.max_frames {
            let mut f = self.sampler.sample(state.velocity());
            if self.sign != 1.0 {
                f = f.scaled(self.sign);
            }
            self.movie.frames.push(f);
        }
        Ok(())
    }
}

/// Tracks the Euclidean norm of the state after every step.
#[derive(Debug, Default)]
pub struct NormRecorder {
    pub norms: Vec<f64>,
}

impl Recorder for NormRecorder {
    fn record(&mut self, state: &FieldState) -> Result<()> {
        self.norms.push(state.curr.iter().map(|v| v * v).sum::<f64>().sqrt());
        Ok(())
    }
}

/// Mesh, unknowns and operators of one forward configuration.
pub struct ForwardModel<'a> {
    pub scene: &'a Scene,
    pub mesh: &'a Mesh,
    pub dofs: DofMap,
    pub ops: OperatorSet,
    pub with_inclusions: bool,
}

impl<'a> ForwardModel<'a> {
    pub fn new(scene: &'a Scene, mesh: &'a Mesh, degree: usize, with_inclusions: bool) -> Result<Self> {
        let dofs = DofMap::new(mesh, degree)?;
        let medium = Medium::from_scene(mesh, scene, with_inclusions)?;
        let ops = assemble_operators(mesh, &dofs, &medium, &BoundarySetup::from_scene(scene))?;
        Ok(Self {
            scene,
            mesh,
            dofs,
            ops,
            with_inclusions,
        })
    }

    /// Receiver coordinates and fluid unknowns of one SRA.
    pub fn receivers(&self, sra: usize) -> Result<(Vec<Point>, Vec<usize>)> {
        let nodes = self
            .mesh
            .sra_nodes
            .get(sra)
            .ok_or_else(|| Error::InvalidScene(format!("no SRA with index {sra}")))?;
        let points = nodes.iter().map(|&n| self.mesh.vertices[n]).collect();
        let dofs = nodes
            .iter()
            .map(|&n| self.dofs.fluid_dof(n).ok_or(Error::NotFluidNode(n)))
            .collect::<Result<_>>()?;
        Ok((points, dofs))
    }
}

/// Options shared by forward runs.
#[derive(Debug, Clone, Copy)]
pub struct ShotOptions {
    pub amplitude: f64,
    pub stepper: StepperOptions,
}

impl Default for ShotOptions {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            stepper: StepperOptions::default(),
        }
    }
}

/// One forward run from a Ricker point source; records pressure traces on
/// the given SRA and, when a sampler is given, the solid movie.
pub fn simulate_shot(
    model: &ForwardModel<'_>,
    source: Point,
    sra: usize,
    plan: &TimePlan,
    sampler: Option<(&SolidSampler, &SampleGrid)>,
    options: &ShotOptions,
) -> Result<(TraceRecord, Option<FieldMovie>)> {
    let pattern = assemble_source(model.mesh, &model.dofs, source)?;
    let nu0 = model.scene.nu0;
    let amplitude = options.amplitude;
    let signal = move |t: f64| amplitude * ricker(t, nu0);
    let forcing = Forcing {
        pattern: &pattern,
        signal: &signal,
    };
    let mut stepper = Stepper::new(&model.ops, plan.dt_forward, &[], options.stepper)?;
    let mut state = FieldState::zeros(&model.ops, plan.dt_forward);
    let (points, dofs) = model.receivers(sra)?;
    let kind = if model.with_inclusions { TraceKind::Total } else { TraceKind::Incident };
    let mut traces = TraceRecorder::new(kind, points, dofs);
    let mut movie = sampler.map(|(s, g)| MovieRecorder::new(s, g, plan.stride_forward, plan.dt_forward, plan.n_frames + 1, 1.0));
    {
        let mut recorders: Vec<&mut dyn Recorder> = vec![&mut traces];
        if let Some(m) = movie.as_mut() {
            recorders.push(m);
        }
        run(&mut stepper, &mut state, plan.n_forward(), Some(&forcing), |_| Vec::new(), &mut recorders)?;
    }
    log::debug!(
        "forward shot at ({:.4e}, {:.4e}): {} steps, last solve {} iterations",
        source[0],
        source[1],
        plan.n_forward(),
        stepper.last_iterations
    );
    Ok((traces.finish(), movie.map(MovieRecorder::finish)))
}

/// Total-field traces (true medium with inclusions).
pub fn run_total(model: &ForwardModel<'_>, source: Point, sra: usize, plan: &TimePlan, options: &ShotOptions) -> Result<TraceRecord> {
    if !model.with_inclusions {
        return Err(Error::InvalidScene("total run needs the model with inclusions".into()));
    }
    simulate_shot(model, source, sra, plan, None, options).map(|(t, _)| t)
}

/// Incident-field traces and the incident solid movie (background medium).
pub fn run_incident(
    model: &ForwardModel<'_>,
    source: Point,
    sra: usize,
    plan: &TimePlan,
    sampler: &SolidSampler,
    grid: &SampleGrid,
    options: &ShotOptions,
) -> Result<(TraceRecord, FieldMovie)> {
    if model.with_inclusions {
        return Err(Error::InvalidScene("incident run needs the background model".into()));
    }
    let (traces, movie) = simulate_shot(model, source, sra, plan, Some((sampler, grid)), options)?;
    Ok((traces, movie.expect("movie requested")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ricker_values() {
        let nu0 = 1e5;
        assert!((ricker(1.0 / nu0, nu0) - 1.0).abs() < 1e-15);
        let pi2 = std::f64::consts::PI.powi(2);
        let at0 = (1.0 - 2.0 * pi2) * (-pi2).exp();
        assert!((ricker(0.0, nu0) - at0).abs() < 1e-15);
        assert!((at0 + 9.69e-4).abs() < 1e-6);
        let half = ricker(0.5 / nu0, nu0);
        assert!((half - (1.0 - pi2 / 2.0) * (-pi2 / 4.0).exp()).abs() < 1e-15);
        assert!((half + 0.3337).abs() < 1e-4);
    }

    fn record(kind: TraceKind) -> TraceRecord {
        TraceRecord {
            kind,
            times: vec![0.0, 0.5, 1.0],
            receivers: vec![[0.0, 1.0], [0.25, 1.0]],
            values: vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 1.0 / 3.0]],
        }
    }

    #[test]
    fn interpolation_and_subtraction() {
        let r = record(TraceKind::Total);
        assert_eq!(r.sample(0, 0.25), 1.0);
        assert_eq!(r.sample(1, 1.0), 1.0 / 3.0);
        assert_eq!(r.sample(0, 1.5), 0.0);
        let s = scattered(&r, &r).unwrap();
        assert!(s.values.iter().flatten().all(|v| *v == 0.0));
        let mut other = record(TraceKind::Incident);
        other.times[1] = 0.4;
        assert!(scattered(&r, &other).is_err());
    }

    #[test]
    fn noise_properties() {
        let r = record(TraceKind::Scattered);
        assert_eq!(add_noise(&r, 0.0, 3).unwrap().values, r.values);
        let zeros = TraceRecord {
            values: vec![vec![0.0; 2]; 3],
            ..r.clone()
        };
        assert!(add_noise(&zeros, 0.1, 3).unwrap().values.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(add_noise(&r, 0.1, 9).unwrap(), add_noise(&r, 0.1, 9).unwrap());
        let n = 100_000;
        let ones = TraceRecord {
            kind: TraceKind::Scattered,
            times: (0..n).map(|k| k as f64).collect(),
            receivers: vec![[0.0, 0.0]],
            values: vec![vec![1.0]; n],
        };
        let noisy = add_noise(&ones, 0.1, 42).unwrap();
        let mean = noisy.values.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() <= 4.0 * 0.1 / (n as f64).sqrt());
        assert!(add_noise(&r, -0.1, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let r = record(TraceKind::ScatteredNoisy);
        r.write_csv(&path).unwrap();
        assert_eq!(TraceRecord::read_csv(&path).unwrap(), r);
    }

    #[test]
    fn movie_round_trip() {
        let movie = FieldMovie {
            nx: 2,
            ny: 3,
            rect: Rect::new(0.0, 1.0, -1.0, 0.0).unwrap(),
            stride: 4,
            dt: 1e-7,
            frames: (0..3)
                .map(|k| Frame {
                    u1: (0..6).map(|i| (i + k) as f64).collect(),
                    u2: (0..6).map(|i| -(i as f64) * 0.5).collect(),
                    div: vec![k as f64 / 7.0; 6],
                })
                .collect(),
        };
        let bytes = movie.to_bytes();
        assert_eq!(&bytes[..4], b"TRIM");
        let back = FieldMovie::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, movie);
        assert!(FieldMovie::from_bytes(&bytes[..bytes.len() - 1], Path::new("mem")).is_err());
    }

    #[test]
    fn time_plan_alignment() {
        let plan = TimePlan::new(1.0e-4, 1.0e-7, 4, 0.7e-7).unwrap();
        assert_eq!(plan.n_frames, 250);
        assert_eq!(plan.stride_reverse, 6);
        assert!((plan.dt_reverse * 6.0 - 4.0e-7).abs() < 1e-20);
        assert!((plan.t_final - 1.0e-4).abs() < 1e-15);
        assert_eq!(plan.n_forward(), 1000);
    }
}
