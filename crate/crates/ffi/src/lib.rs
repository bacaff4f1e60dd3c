//! C ABI for elastotr.
//!
//! Objects cross the boundary as opaque handles created by `*_load`/`*_read`
//! style functions and released with the matching `*_free`. Every fallible
//! function returns an [`EtStatus`]; on failure a description is available
//! from [`et_last_error_message`] on the same thread. Strings are UTF-8 and
//! NUL-terminated. Panics are caught and reported as `ET_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use elastotr::cli;
use elastotr::config::{Resolved, RunConfig};
use elastotr::forward::{FieldMovie, TraceRecord};
use elastotr::imaging::{find_peaks, rtm, rtm_percentage, ImageField, Variant};
use elastotr::validation;
use elastotr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Config = 5,
    Numerical = 6,
    GridMismatch = 7,
    /// A pipeline stage or validation check failed; details in the manifest
    /// or the last error message.
    Failed = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtVariant {
    Full = 0,
    ComponentU2 = 1,
    Divergence = 2,
}

impl From<EtVariant> for Variant {
    fn from(v: EtVariant) -> Self {
        match v {
            EtVariant::Full => Variant::Full,
            EtVariant::ComponentU2 => Variant::ComponentU2,
            EtVariant::Divergence => Variant::Divergence,
        }
    }
}

/// Resolved run configuration.
pub struct EtConfig {
    resolved: Resolved,
    path: PathBuf,
}

/// Receiver traces, `values[time][receiver]`.
pub struct EtTraces(TraceRecord);

/// Sampled solid-velocity movie.
pub struct EtMovie(FieldMovie);

/// Image on the solid sample grid.
pub struct EtImage(ImageField);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn classify(e: &Error) -> EtStatus {
    match e {
        Error::Io { .. } => EtStatus::Io,
        Error::Format { .. } => EtStatus::Format,
        Error::Config(_) | Error::InvalidScene(_) | Error::InvalidMaterial(_) | Error::OutsideDomain { .. } | Error::SourceNotInFluid { .. } => {
            EtStatus::Config
        }
        Error::GridMismatch(_) | Error::DimensionMismatch(_) => EtStatus::GridMismatch,
        _ => EtStatus::Numerical,
    }
}

struct Fail(EtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(classify(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EtStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            EtStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail(EtStatus::NullArgument, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(EtStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(EtStatus::NullArgument, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(EtStatus::NullArgument, format!("{what} is null")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failure on this thread; empty after a success. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn et_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn et_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and resolves a TOML run configuration.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn et_config_load(path: *const c_char, out: *mut *mut EtConfig) -> EtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let path = path_arg(path, "path")?;
        let resolved = RunConfig::load(&path)?.resolve()?;
        *out = boxed(EtConfig { resolved, path });
        Ok(())
    })
}

/// Overrides the noise seed.
///
/// # Safety
/// `config` must be a live handle from [`et_config_load`].
#[no_mangle]
pub unsafe extern "C" fn et_config_set_seed(config: *mut EtConfig, seed: u64) -> EtStatus {
    guard(|| {
        out_ptr(config, "config")?.resolved.params.seed = seed;
        Ok(())
    })
}

/// Number of shots (source × SRA pairs) the configured scene fires.
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn et_config_shot_count(config: *const EtConfig, out: *mut usize) -> EtStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        *out_ptr(out, "out")? = cfg.resolved.scene.shots().len();
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from [`et_config_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn et_config_free(config: *mut EtConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Forward stage into `out_dir/shot<k>/`; `shot < 0` runs every shot.
///
/// # Safety
/// `config` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn et_forward(config: *const EtConfig, out_dir: *const c_char, shot: i64) -> EtStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let out = path_arg(out_dir, "out_dir")?;
        let only = usize::try_from(shot).ok();
        cli::cmd_forward(&cfg.resolved, &out, only)?;
        Ok(())
    })
}

/// Back-propagates the traces in `traces_csv`, writing a TRIM movie.
///
/// # Safety
/// `config` must be a live handle; the paths NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn et_reverse(config: *const EtConfig, traces_csv: *const c_char, out_movie: *const c_char) -> EtStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let traces = path_arg(traces_csv, "traces_csv")?;
        let out = path_arg(out_movie, "out_movie")?;
        cli::cmd_reverse(&cfg.resolved, &traces, &out)?;
        Ok(())
    })
}

/// Full pipeline into `out_dir` with `manifest.txt`. Returns
/// `ET_STATUS_FAILED` if any stage failed; the manifest is written anyway.
///
/// # Safety
/// `config` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn et_pipeline(config: *const EtConfig, out_dir: *const c_char, write_movies: bool) -> EtStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let out = path_arg(out_dir, "out_dir")?;
        let manifest = cli::cmd_pipeline(&cfg.resolved, &cfg.path, &out, write_movies)?;
        if manifest.ok() {
            Ok(())
        } else {
            let failed: Vec<&str> = manifest
                .stages
                .iter()
                .filter(|s| s.status != cli::StageStatus::Ok)
                .map(|s| s.name.as_str())
                .collect();
            Err(Fail(EtStatus::Failed, format!("stages not ok: {}", failed.join(", "))))
        }
    })
}

/// Runs the validation checks. `passed`/`total` receive the counts.
///
/// # Safety
/// `passed` and `total` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn et_validate(passed: *mut usize, total: *mut usize) -> EtStatus {
    guard(|| {
        let checks = validation::run_all()?;
        let n_ok = checks.iter().filter(|c| c.passed).count();
        if let Some(p) = passed.as_mut() {
            *p = n_ok;
        }
        if let Some(t) = total.as_mut() {
            *t = checks.len();
        }
        if n_ok == checks.len() {
            Ok(())
        } else {
            let lines: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.line()).collect();
            Err(Fail(EtStatus::Failed, lines.join("; ")))
        }
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn et_traces_read(path: *const c_char, out: *mut *mut EtTraces) -> EtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let rec = TraceRecord::read_csv(&path_arg(path, "path")?)?;
        *out = boxed(EtTraces(rec));
        Ok(())
    })
}

/// # Safety
/// `traces` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn et_traces_shape(traces: *const EtTraces, n_samples: *mut usize, n_receivers: *mut usize) -> EtStatus {
    guard(|| {
        let t = &handle(traces, "traces")?.0;
        *out_ptr(n_samples, "n_samples")? = t.times.len();
        *out_ptr(n_receivers, "n_receivers")? = t.n_receivers();
        Ok(())
    })
}

/// Copies values time-major (`n_samples × n_receivers`) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn et_traces_values(traces: *const EtTraces, buf: *mut f64, len: usize) -> EtStatus {
    guard(|| {
        let t = &handle(traces, "traces")?.0;
        let flat: Vec<f64> = t.values.iter().flatten().copied().collect();
        copy_out(&flat, buf, len)
    })
}

/// # Safety
/// `traces` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn et_traces_free(traces: *mut EtTraces) {
    if !traces.is_null() {
        drop(Box::from_raw(traces));
    }
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(Fail(EtStatus::NullArgument, "buf is null".into()));
    }
    if len < values.len() {
        return Err(Fail(EtStatus::InvalidArgument, format!("buffer holds {len} values, {} needed", values.len())));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn et_movie_read(path: *const c_char, out: *mut *mut EtMovie) -> EtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let movie = FieldMovie::read(&path_arg(path, "path")?)?;
        *out = boxed(EtMovie(movie));
        Ok(())
    })
}

/// # Safety
/// `movie` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn et_movie_shape(movie: *const EtMovie, nx: *mut usize, ny: *mut usize, n_frames: *mut usize) -> EtStatus {
    guard(|| {
        let m = &handle(movie, "movie")?.0;
        *out_ptr(nx, "nx")? = m.nx;
        *out_ptr(ny, "ny")? = m.ny;
        *out_ptr(n_frames, "n_frames")? = m.frames.len();
        Ok(())
    })
}

/// # Safety
/// `movie` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn et_movie_free(movie: *mut EtMovie) {
    if !movie.is_null() {
        drop(Box::from_raw(movie));
    }
}

/// Raw RTM image of a reversed/incident movie pair; with `percentage` set
/// it is normalized by the peak incident energy.
///
/// # Safety
/// Both movies must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn et_rtm(reversed: *const EtMovie, incident: *const EtMovie, variant: EtVariant, percentage: bool, out: *mut *mut EtImage) -> EtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let rev = &handle(reversed, "reversed")?.0;
        let inc = &handle(incident, "incident")?.0;
        let mut image = rtm(rev, inc, variant.into())?;
        if percentage {
            image = rtm_percentage(&image, inc)?;
        }
        *out = boxed(EtImage(image));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn et_image_read(path: *const c_char, out: *mut *mut EtImage) -> EtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let image = ImageField::read_csv(&path_arg(path, "path")?)?;
        *out = boxed(EtImage(image));
        Ok(())
    })
}

/// # Safety
/// `image` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn et_image_shape(image: *const EtImage, nx: *mut usize, ny: *mut usize) -> EtStatus {
    guard(|| {
        let im = &handle(image, "image")?.0;
        *out_ptr(nx, "nx")? = im.nx;
        *out_ptr(ny, "ny")? = im.ny;
        Ok(())
    })
}

/// Copies values row-major (`j * nx + i`, `j` along y) into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn et_image_values(image: *const EtImage, buf: *mut f64, len: usize) -> EtStatus {
    guard(|| copy_out(&handle(image, "image")?.0.values, buf, len))
}

/// Location and value of the image maximum.
///
/// # Safety
/// `image` must be a live handle; the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn et_image_argmax(image: *const EtImage, x: *mut f64, y: *mut f64, value: *mut f64) -> EtStatus {
    guard(|| {
        let (p, v) = handle(image, "image")?.0.argmax();
        *out_ptr(x, "x")? = p[0];
        *out_ptr(y, "y")? = p[1];
        *out_ptr(value, "value")? = v;
        Ok(())
    })
}

/// Number of peaks at or above `fraction × max`.
///
/// # Safety
/// `image` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn et_image_peak_count(image: *const EtImage, fraction: f64, count: *mut usize) -> EtStatus {
    guard(|| {
        let report = find_peaks(&handle(image, "image")?.0, fraction)?;
        *out_ptr(count, "count")? = report.peaks.len();
        Ok(())
    })
}

/// Writes `<stem>.csv`, `.pgm` (+ sidecar) and `.peaks.txt` into `dir`.
///
/// # Safety
/// `image` must be a live handle; `dir` and `stem` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn et_image_write(image: *const EtImage, dir: *const c_char, stem: *const c_char, fraction: f64) -> EtStatus {
    guard(|| {
        let im = &handle(image, "image")?.0;
        let dir = path_arg(dir, "dir")?;
        let stem = path_arg(stem, "stem")?;
        cli::write_image(im, Path::new(&dir), &stem.to_string_lossy(), fraction)?;
        Ok(())
    })
}

/// # Safety
/// `image` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn et_image_free(image: *mut EtImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}
