use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use elastotr_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(et_last_error_message()) }.to_string_lossy().into_owned()
}

const CONFIG: &str = r#"
[scene]
domain = [0.0, 3.0, 0.0, 2.0]
interface_y = 1.0
skin_thickness = 0.25
sources = [[1.5, 1.5]]

[[scene.sra]]
start = [0.5, 1.5]
end = [2.5, 1.5]
receivers = 9

[[scene.inclusion]]
center = [1.5, 0.5]
radius = 0.2
material = "malignant"

[mesh]
h_forward = 0.25
h_reverse = 0.2

[run]
grid_spacing = 0.2
"#;

#[test]
fn errors_are_reported_not_panicked() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(et_config_load(ptr::null(), &mut cfg), EtStatus::NullArgument);
        assert!(cfg.is_null());
        let missing = cstr(Path::new("/nonexistent/run.toml"));
        assert_eq!(et_config_load(missing.as_ptr(), &mut cfg), EtStatus::Io);
        assert!(last_error().contains("/nonexistent/run.toml"));
        assert_eq!(et_image_shape(ptr::null(), ptr::null_mut(), ptr::null_mut()), EtStatus::NullArgument);
        et_config_free(ptr::null_mut());
        et_image_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(et_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bad_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, "[mesh]\ndegree = 7\n[scene]\n").unwrap();
    let mut cfg = ptr::null_mut();
    let p = cstr(&path);
    assert_eq!(unsafe { et_config_load(p.as_ptr(), &mut cfg) }, EtStatus::Config);
    assert!(last_error().contains("degree"));
}

#[test]
fn pipeline_and_handles_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    std::fs::write(&path, CONFIG).unwrap();
    let out = tmp.path().join("out");
    unsafe {
        let mut cfg = ptr::null_mut();
        let p = cstr(&path);
        assert_eq!(et_config_load(p.as_ptr(), &mut cfg), EtStatus::Ok, "{}", last_error());
        let mut shots = 0;
        assert_eq!(et_config_shot_count(cfg, &mut shots), EtStatus::Ok);
        assert_eq!(shots, 1);
        let o = cstr(&out);
        assert_eq!(et_pipeline(cfg, o.as_ptr(), true), EtStatus::Ok, "{}", last_error());
        et_config_free(cfg);

        let mut traces = ptr::null_mut();
        let t = cstr(&out.join("shot0/scattered.csv"));
        assert_eq!(et_traces_read(t.as_ptr(), &mut traces), EtStatus::Ok);
        let (mut ns, mut nr) = (0, 0);
        assert_eq!(et_traces_shape(traces, &mut ns, &mut nr), EtStatus::Ok);
        assert_eq!(nr, 9);
        let mut buf = vec![0.0; ns * nr];
        assert_eq!(et_traces_values(traces, buf.as_mut_ptr(), buf.len() - 1), EtStatus::InvalidArgument);
        assert_eq!(et_traces_values(traces, buf.as_mut_ptr(), buf.len()), EtStatus::Ok);
        assert!(buf.iter().any(|v| *v != 0.0));
        et_traces_free(traces);

        let mut inc = ptr::null_mut();
        let mut rev = ptr::null_mut();
        let i = cstr(&out.join("shot0/incident.trim"));
        let r = cstr(&out.join("shot0/reversed.trim"));
        assert_eq!(et_movie_read(i.as_ptr(), &mut inc), EtStatus::Ok);
        assert_eq!(et_movie_read(r.as_ptr(), &mut rev), EtStatus::Ok);
        let mut image = ptr::null_mut();
        assert_eq!(et_rtm(rev, inc, EtVariant::ComponentU2, true, &mut image), EtStatus::Ok);
        let (mut nx, mut ny) = (0, 0);
        assert_eq!(et_image_shape(image, &mut nx, &mut ny), EtStatus::Ok);
        let mut values = vec![0.0; nx * ny];
        assert_eq!(et_image_values(image, values.as_mut_ptr(), values.len()), EtStatus::Ok);

        // Same numbers as the pipeline's percentage image.
        let mut written = ptr::null_mut();
        let w = cstr(&out.join("shot0/percentage_component_u2.csv"));
        assert_eq!(et_image_read(w.as_ptr(), &mut written), EtStatus::Ok);
        let mut expect = vec![0.0; nx * ny];
        assert_eq!(et_image_values(written, expect.as_mut_ptr(), expect.len()), EtStatus::Ok);
        assert_eq!(values, expect);

        let (mut x, mut y, mut v) = (0.0, 0.0, 0.0);
        assert_eq!(et_image_argmax(image, &mut x, &mut y, &mut v), EtStatus::Ok);
        assert_eq!(v, values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let mut peaks = 0;
        assert_eq!(et_image_peak_count(image, 0.3, &mut peaks), EtStatus::Ok);
        assert!(peaks >= 1);
        assert_eq!(et_image_peak_count(image, 1.5, &mut peaks), EtStatus::Numerical);
        let d = cstr(tmp.path());
        let s = CString::new("mine").unwrap();
        assert_eq!(et_image_write(image, d.as_ptr(), s.as_ptr(), 0.3), EtStatus::Ok);
        assert!(tmp.path().join("mine.pgm.txt").exists());

        let mut none = ptr::null_mut();
        assert_eq!(et_rtm(rev, ptr::null(), EtVariant::Full, false, &mut none), EtStatus::NullArgument);
        assert!(none.is_null());
        et_image_free(written);
        et_image_free(image);
        et_movie_free(inc);
        et_movie_free(rev);
    }
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps/
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("elastotr.h").exists());
    let lib_dir = target_dir();
    if !lib_dir.join("libelastotr_ffi.so").exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or shared library");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "elastotr.h"
int main(void) {
    EtConfig *cfg = NULL;
    EtStatus s = et_config_load("/nonexistent.toml", &cfg);
    if (s != ET_STATUS_IO || cfg != NULL) return 1;
    if (strlen(et_last_error_message()) == 0) return 2;
    printf("%s\n", et_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lelastotr_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), env!("CARGO_PKG_VERSION"));
}
