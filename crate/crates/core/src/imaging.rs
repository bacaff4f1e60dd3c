//! RTM imaging: zero-lag cross-correlation of the reversed and incident solid
//! movies, normalization by the incident energy, summation over
//! illuminations and probe placements, and peak extraction.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{FieldMovie, Frame};
use crate::scene::{Inclusion, Point, Rect};

/// Field correlated by the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `u · u`
    Full,
    /// `u₂ u₂`
    ComponentU2,
    /// `div u · div u`
    Divergence,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::ComponentU2, Variant::Divergence];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::ComponentU2 => "component_u2",
            Variant::Divergence => "divergence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s || (s == "u2" && *v == Variant::ComponentU2) || (s == "div" && *v == Variant::Divergence))
    }

    fn product(self, a: &Frame, b: &Frame, k: usize) -> f64 {
        match self {
            Variant::Full => a.u1[k] * b.u1[k] + a.u2[k] * b.u2[k],
            Variant::ComponentU2 => a.u2[k] * b.u2[k],
            Variant::Divergence => a.div[k] * b.div[k],
        }
    }
}

/// Stage of an image: raw correlation, normalized, or summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    Percentage,
    Sum,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Raw => "raw",
            Stage::Percentage => "percentage",
            Stage::Sum => "sum",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Stage::Raw, Stage::Percentage, Stage::Sum].into_iter().find(|v| v.name() == s)
    }
}

/// Image on the sample grid, row-major with `j` (y) outer and `i` (x) inner.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
    pub values: Vec<f64>,
    pub variant: Variant,
    pub stage: Stage,
    pub provenance: Vec<String>,
}

impl ImageField {
    /// Criterion tag: the variant for raw images, otherwise the stage.
    pub fn tag(&self) -> &'static str {
        match self.stage {
            Stage::Raw => self.variant.name(),
            s => s.name(),
        }
    }

    pub fn dx(&self) -> f64 {
        self.rect.width() / (self.nx.max(2) - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.rect.height() / (self.ny.max(2) - 1) as f64
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.rect.x_min + i as f64 * self.dx(), self.rect.y_min + j as f64 * self.dy()]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Location and value of the global maximum (first in row-major order).
    pub fn argmax(&self) -> (Point, f64) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (self.point(best % self.nx, best / self.nx), self.values[best])
    }

    /// Maximum over grid points inside the inclusion dilated by `margin`.
    pub fn region_peak(&self, inclusion: &Inclusion, margin: f64) -> Option<f64> {
        let mut peak: Option<f64> = None;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if inclusion.contains_dilated(self.point(i, j), margin) {
                    let v = self.at(i, j);
                    peak = Some(peak.map_or(v, |p: f64| p.max(v)));
                }
            }
        }
        peak
    }

    pub fn same_grid(&self, other: &ImageField) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.rect.x_min, other.rect.x_min)
            && close(self.rect.x_max, other.rect.x_max)
            && close(self.rect.y_min, other.rect.y_min)
            && close(self.rect.y_max, other.rect.y_max)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    /// CSV matrix: one metadata comment line, then `ny` rows of `nx` values,
    /// first row at `y_min`.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# tag={} variant={} stage={} nx={} ny={} x0={:.16e} y0={:.16e} dx={:.16e} dy={:.16e} provenance={}\n",
            self.tag(),
            self.variant.name(),
            self.stage.name(),
            self.nx,
            self.ny,
            self.rect.x_min,
            self.rect.y_min,
            self.dx(),
            self.dy(),
            self.provenance.join(";")
        );
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| Error::format(path, "missing metadata line"))?;
        let field = |key: &str| -> Result<&str> {
            meta.split_whitespace()
                .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::format(path, format!("metadata lacks `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?.parse::<f64>().map_err(|_| Error::format(path, format!("bad `{key}`")))
        };
        let variant = Variant::parse(field("variant")?).ok_or_else(|| Error::format(path, "unknown variant"))?;
        let stage = Stage::parse(field("stage")?).ok_or_else(|| Error::format(path, "unknown stage"))?;
        let (nx, ny) = (num("nx")? as usize, num("ny")? as usize);
        let (x0, y0, dx, dy) = (num("x0")?, num("y0")?, num("dx")?, num("dy")?);
        let provenance = field("provenance")
            .map(|p| p.split(';').filter(|s| !s.is_empty()).map(String::from).collect())
            .unwrap_or_default();
        let mut values = Vec::with_capacity(nx * ny);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            for v in line.split(',') {
                values.push(v.trim().parse::<f64>().map_err(|_| Error::format(path, format!("bad value `{v}`")))?);
            }
        }
        if values.len() != nx * ny {
            return Err(Error::format(path, format!("expected {} values, found {}", nx * ny, values.len())));
        }
        let rect = Rect::new(x0, x0 + dx * (nx.max(2) - 1) as f64, y0, y0 + dy * (ny.max(2) - 1) as f64)?;
        Ok(Self {
            nx,
            ny,
            rect,
            values,
            variant,
            stage,
            provenance,
        })
    }

    /// Binary graymap, top row at `y_max`, scaled min → 0 and max → 255; a
    /// flat image maps to 0. Returns `(min, max)`.
    pub fn to_pgm(&self) -> (Vec<u8>, f64, f64) {
        let (lo, hi) = (self.min(), self.max());
        let span = hi - lo;
        let mut out = format!("P5\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        for j in (0..self.ny).rev() {
            for i in 0..self.nx {
                let v = self.at(i, j);
                let g = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 0.0 };
                out.push(g.clamp(0.0, 255.0) as u8);
            }
        }
        (out, lo, hi)
    }

    /// Writes `<path>` (P5) and `<path>.txt` with the gray-level scale.
    pub fn write_pgm(&self, path: &Path) -> Result<PathBuf> {
        let (bytes, lo, hi) = self.to_pgm();
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".txt");
        let sidecar = PathBuf::from(sidecar);
        let text = format!(
            "tag={}\nvariant={}\nmin={lo:.16e}\nmax={hi:.16e}\ngray0={lo:.16e}\ngray255={hi:.16e}\nx_min={:.16e}\nx_max={:.16e}\ny_min={:.16e}\ny_max={:.16e}\n",
            self.tag(),
            self.variant.name(),
            self.rect.x_min,
            self.rect.x_max,
            self.rect.y_min,
            self.rect.y_max
        );
        std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
        Ok(sidecar)
    }
}

fn check_movies(reversed: &FieldMovie, incident: &FieldMovie) -> Result<()> {
    if !reversed.same_grid(incident) {
        return Err(Error::GridMismatch("reversed and incident movies use different grids".into()));
    }
    if reversed.frames.len() != incident.frames.len() {
        return Err(Error::GridMismatch(format!(
            "reversed movie has {} frames, incident movie {}",
            reversed.frames.len(),
            incident.frames.len()
        )));
    }
    let (a, b) = (reversed.frame_interval(), incident.frame_interval());
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(Error::GridMismatch(format!("frame intervals differ ({a:e} vs {b:e})")));
    }
    Ok(())
}

/// `Σ_k q(R_{K−1−k}, I_k) Δ`: the reversed frame at `t′ = T_f − t_k` times
/// the incident frame at `t_k`, rectangle rule in time.
pub fn rtm(reversed: &FieldMovie, incident: &FieldMovie, variant: Variant) -> Result<ImageField> {
    check_movies(reversed, incident)?;
    let n = incident.n_points();
    let frames = incident.frames.len();
    let delta = incident.frame_interval();
    let mut values = vec![0.0; n];
    let row = incident.nx.max(1);
    values.par_chunks_mut(row).enumerate().for_each(|(j, chunk)| {
        for (i, v) in chunk.iter_mut().enumerate() {
            let p = j * row + i;
            let mut acc = 0.0;
            for k in 0..frames {
                acc += variant.product(&reversed.frames[frames - 1 - k], &incident.frames[k], p);
            }
            *v = acc * delta;
        }
    });
    Ok(ImageField {
        nx: incident.nx,
        ny: incident.ny,
        rect: incident.rect,
        values,
        variant,
        stage: Stage::Raw,
        provenance: Vec::new(),
    })
}

/// `max_x Σ_k |q(I_k)(x)|² Δ` over the sample grid.
pub fn incident_energy_max(incident: &FieldMovie, variant: Variant) -> f64 {
    let delta = incident.frame_interval();
    (0..incident.n_points())
        .into_par_iter()
        .map(|p| incident.frames.iter().map(|f| variant.product(f, f, p)).sum::<f64>() * delta)
        .reduce(|| 0.0, f64::max)
}

/// Divides a raw image by the peak incident energy of its variant.
pub fn rtm_percentage(image: &ImageField, incident: &FieldMovie) -> Result<ImageField> {
    if image.stage != Stage::Raw {
        return Err(Error::Degenerate("percentage needs a raw correlation image".into()));
    }
    if image.nx != incident.nx || image.ny != incident.ny {
        return Err(Error::GridMismatch("image and incident movie use different grids".into()));
    }
    let denom = incident_energy_max(incident, image.variant);
    if !(denom > 0.0) {
        return Err(Error::Degenerate("incident movie has zero energy".into()));
    }
    Ok(ImageField {
        values: image.values.iter().map(|v| v / denom).collect(),
        stage: Stage::Percentage,
        ..image.clone()
    })
}

fn pointwise_sum(images: &[ImageField], what: &str) -> Result<ImageField> {
    let first = images
        .first()
        .ok_or_else(|| Error::Degenerate(format!("{what} of an empty image list")))?;
    let mut out = first.clone();
    for im in &images[1..] {
        if !im.same_grid(first) {
            return Err(Error::GridMismatch(format!("{what}: images use different grids")));
        }
        if im.variant != first.variant {
            return Err(Error::GridMismatch(format!("{what}: images mix variants")));
        }
        for (o, v) in out.values.iter_mut().zip(&im.values) {
            *o += v;
        }
        out.provenance.extend(im.provenance.iter().cloned());
    }
    out.stage = Stage::Sum;
    Ok(out)
}

/// Pointwise sum over illuminations.
pub fn rtm_sum(per_source: &[ImageField]) -> Result<ImageField> {
    pointwise_sum(per_source, "rtm_sum")
}

/// Pointwise sum over SRA placements.
pub fn aggregate_probes(per_sra: &[ImageField]) -> Result<ImageField> {
    pointwise_sum(per_sra, "aggregate_probes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub location: Point,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    pub threshold_fraction: f64,
    pub threshold: f64,
}

impl PeakReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# threshold_fraction={} threshold={:.16e} peaks={}\nx,y,value,prominence\n",
            self.threshold_fraction,
            self.threshold,
            self.peaks.len()
        );
        for p in &self.peaks {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", p.location[0], p.location[1], p.value, p.prominence);
        }
        s
    }
}

fn find(parent: &mut [usize], mut k: usize) -> usize {
    while parent[k] != k {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    k
}

/// Strict local maxima over 8-neighbourhoods with value ≥ `fraction · max`,
/// sorted by value. Prominence is the drop to the highest saddle connecting
/// the peak to a higher one (to the image minimum for the highest peak).
pub fn find_peaks(image: &ImageField, threshold_fraction: f64) -> Result<PeakReport> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::Degenerate(format!("threshold fraction must lie in (0, 1) (got {threshold_fraction})")));
    }
    let (nx, ny) = (image.nx, image.ny);
    let gmax = image.max();
    let threshold = threshold_fraction * gmax;
    let neighbours = |k: usize| {
        let (i, j) = ((k % nx) as isize, (k / nx) as isize);
        (-1..=1isize)
            .flat_map(move |dj| (-1..=1isize).map(move |di| (i + di, j + dj)))
            .filter(move |&(a, b)| (a, b) != (i, j) && a >= 0 && b >= 0 && a < nx as isize && b < ny as isize)
            .map(move |(a, b)| b as usize * nx + a as usize)
    };

    // Union-find sweep from the top; each component remembers its highest pixel.
    let n = image.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| image.values[b].total_cmp(&image.values[a]).then(a.cmp(&b)));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut summit: Vec<usize> = (0..n).collect();
    let mut seen = vec![false; n];
    let mut prominence = vec![f64::NAN; n];
    for &k in &order {
        seen[k] = true;
        for m in neighbours(k) {
            if !seen[m] {
                continue;
            }
            let (a, b) = (find(&mut parent, k), find(&mut parent, m));
            if a == b {
                continue;
            }
            let (sa, sb) = (summit[a], summit[b]);
            let (hi, lo) = if (image.values[sa], std::cmp::Reverse(sa)) >= (image.values[sb], std::cmp::Reverse(sb)) {
                (sa, sb)
            } else {
                (sb, sa)
            };
            prominence[lo] = image.values[lo] - image.values[k];
            parent[b] = a;
            summit[a] = hi;
        }
    }
    let gmin = image.min();
    let mut peaks: Vec<Peak> = (0..n)
        .filter(|&k| {
            let v = image.values[k];
            gmax > 0.0 && v >= threshold && neighbours(k).all(|m| image.values[m] < v)
        })
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            let value = image.values[k];
            let p = if prominence[k].is_nan() { value - gmin } else { prominence[k] };
            Peak {
                location: image.point(i, j),
                i,
                j,
                value,
                prominence: p,
            }
        })
        .collect();
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(PeakReport {
        peaks,
        threshold_fraction,
        threshold,
    })
}
