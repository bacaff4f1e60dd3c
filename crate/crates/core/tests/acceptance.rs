//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! The imaging criteria run desk-scale experiments (minutes each on one
//! core); criteria 6 and 8 share one forward run.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use elastotr::cli::{forward_stage, image_stage, reverse_stage};
use elastotr::forward::{add_noise, ForwardModel, SolidSampler, TraceRecord};
use elastotr::imaging::{find_peaks, rtm_sum, ImageField, Variant};
use elastotr::mesh::generate_mesh;
use elastotr::pipeline::{run_experiment, Params, Setup};
use elastotr::scene::{dist, presets, Inclusion, Point, Scene, Sra};
use elastotr::validation;

fn report(n: usize, name: &str, passed: bool, detail: &str, started: Instant) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    // Written to stderr directly so the line survives the harness's output capture.
    let line = format!("{verdict} criterion {n} ({name}): {detail} [{:.1} s]\n", started.elapsed().as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

#[test]
fn criterion_1_reflection_oracle() {
    let t = Instant::now();
    let (measured, oracle) = validation::reflection_coefficient(presets::TISSUE, 10).unwrap();
    let passed = (measured - oracle).abs() <= 0.01 && t.elapsed().as_secs() <= 120;
    report(1, "fluid-solid reflection", passed, &format!("R measured {measured:.4}, impedance formula {oracle:.4}, tolerance 0.01"), t);
    assert!(passed);
}

#[test]
fn criterion_2_reversibility() {
    let t = Instant::now();
    let e = validation::reversibility_error(500).unwrap();
    let passed = e < 1e-8 && t.elapsed().as_secs() <= 60;
    report(2, "discrete reversibility", passed, &format!("500 steps each way, relative L2 error {e:.3e} (< 1e-8)"), t);
    assert!(passed);
}

#[test]
fn criterion_3_energy() {
    let t = Instant::now();
    let (closed, open) = validation::check_energy(0.3, 1000).unwrap();
    let passed = closed.passed && open.passed && t.elapsed().as_secs() <= 120;
    report(3, "energy behaviour", passed, &format!("{}; {}", closed.detail, open.detail), t);
    assert!(passed);
}

#[test]
fn criterion_4_coupling() {
    let t = Instant::now();
    let (_, _, ops) = validation::coupled_box(2, &elastotr::assembly::BoundarySetup::closed()).unwrap();
    let r = validation::coupling_report(&ops);
    let exact = r.antisymmetry == 0.0;
    let channels = r.u2_into_fluid > 0 && r.p_into_u2 > 0;
    // On a horizontal interface n = (0, ±1): pressure has no u₁ component to
    // enter, so the "p into both u-rows" channel cannot be nonzero.
    let literal = exact && channels && r.p_into_u1 > 0;
    report(
        4,
        "coupling antisymmetry",
        literal,
        &format!(
            "max|C_solid_rows + C^T| = {:.1e}; nonzero entries u2->fluid {}, p->u2 {}, p->u1 {} (zero for a horizontal interface, so the three-channel reading is not attainable)",
            r.antisymmetry, r.u2_into_fluid, r.p_into_u2, r.p_into_u1
        ),
        t,
    );
    assert!(exact && channels);
    assert_eq!(r.p_into_u1, 0);
}

#[test]
fn criterion_5_convergence() {
    let t = Instant::now();
    let errors = validation::plane_pulse_errors(4).unwrap();
    let orders = validation::observed_orders(&errors);
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = orders.len() == 3 && min >= 1.8 && t.elapsed().as_secs() <= 300;
    report(5, "convergence order", passed, &format!("observed orders {orders:.3?} over three refinements, min {min:.3} (>= 1.8)"), t);
    assert!(passed);
}

fn localization_scene() -> Scene {
    let mut scene = Scene::desk(1e5);
    let wl = scene.wavelength();
    scene.inclusions.push(Inclusion {
        center: [4.0 * wl, 2.5 * wl],
        semi_axes: [0.4 * wl, 0.3 * wl],
        rotation: 0.0,
        material: presets::MALIGNANT,
    });
    scene.t_final = scene.default_t_final();
    scene
}

/// Noise-free image and images for noise seeds 1..=5 (10 %) of the
/// localization scene; seed 1 is the pipeline default.
struct NoiseStudy {
    scene: Scene,
    clean: ImageField,
    noisy: Vec<ImageField>,
    /// Forward stage plus the seed-1 reversal and imaging: one pipeline shot.
    shot_seconds: f64,
}

fn noise_study() -> &'static NoiseStudy {
    static STUDY: OnceLock<NoiseStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let scene = localization_scene();
        let params = Params::for_scene(&scene);
        assert_eq!(params.seed, 1);
        let mesh_f = generate_mesh(&scene, params.h_forward).unwrap();
        let mesh_r = generate_mesh(&scene, params.h_reverse).unwrap();
        let setup = Setup::new(&scene, &params, &mesh_f, &mesh_r).unwrap();
        let total_model = ForwardModel::new(&scene, &mesh_f, params.degree, true).unwrap();
        let background = ForwardModel::new(&scene, &mesh_f, params.degree, false).unwrap();
        let reverse_model = ForwardModel::new(&scene, &mesh_r, params.degree, false).unwrap();
        let sampler_f = SolidSampler::new(&mesh_f, &background.dofs, &setup.grid_forward).unwrap();
        let sampler_r = SolidSampler::new(&mesh_r, &reverse_model.dofs, &setup.grid_reverse).unwrap();
        let shot = scene.shots()[0];
        let t_forward = Instant::now();
        let data = forward_stage(&setup, &total_model, &background, &sampler_f, 0, shot).unwrap();
        let forward_seconds = t_forward.elapsed().as_secs_f64();
        let image = |traces: &TraceRecord| {
            let reversed = reverse_stage(&setup, &reverse_model, &sampler_r, traces).unwrap();
            let mut out = image_stage(&data.incident_movie, &reversed, &[Variant::ComponentU2], "").unwrap();
            out.remove(0).1
        };
        let t_first = Instant::now();
        let first = image(&data.noisy);
        let shot_seconds = forward_seconds + t_first.elapsed().as_secs_f64();
        let clean = image(&data.scattered);
        let mut noisy = vec![first];
        for seed in 2..=5 {
            noisy.push(image(&add_noise(&data.scattered, params.noise, seed).unwrap()));
        }
        NoiseStudy {
            scene,
            clean,
            noisy,
            shot_seconds,
        }
    })
}

#[test]
fn criterion_6_localization() {
    let t = Instant::now();
    let study = noise_study();
    let wl = study.scene.wavelength();
    let shot_seconds = study.shot_seconds;
    let image = &study.noisy[0];
    let (p, v) = image.argmax();
    let c = study.scene.inclusions[0].center;
    let d = dist(p, c) / wl;
    let passed = d <= 0.5 && shot_seconds <= 600.0;
    report(
        6,
        "localization",
        passed,
        &format!(
            "argmax of RTM_percentage (u2, 10% noise) at ({:.2}, {:.2})λ, value {v:.3e}; centroid ({:.2}, {:.2})λ; distance {d:.2}λ (<= 0.5λ); shot runtime {shot_seconds:.0} s",
            p[0] / wl,
            p[1] / wl,
            c[0] / wl,
            c[1] / wl
        ),
        t,
    );
    assert!(passed);
}

#[test]
fn criterion_8_noise_insensitivity() {
    let t = Instant::now();
    let study = noise_study();
    let wl = study.scene.wavelength();
    let (p0, v0) = study.clean.argmax();
    let mut good = 0;
    let mut detail = Vec::new();
    for (k, im) in study.noisy.iter().enumerate() {
        let (p, v) = im.argmax();
        let shift = dist(p, p0) / wl;
        let change = (v - v0).abs() / v0.abs();
        let ok = shift <= 0.25 && change <= 0.15;
        good += usize::from(ok);
        detail.push(format!("seed {}: shift {shift:.2}λ, peak change {:.1}%", k + 1, 100.0 * change));
    }
    let passed = good >= 3;
    report(8, "noise insensitivity", passed, &format!("{good}/5 seeds within limits (shift <= 0.25λ, change <= 15%); {}", detail.join("; ")), t);
    assert!(passed);
}

struct Discrimination {
    single: f64,
    two: f64,
    three: f64,
    malignant: [f64; 3],
    ordered: bool,
}

/// Small benign circle and big malignant ellipse, sources at the left end,
/// middle and right end of the SRA. `mirror` reflects the scene about the
/// domain's vertical midline.
fn discrimination(mirror: bool) -> Discrimination {
    let mut scene = Scene::desk(1e5);
    let wl = scene.wavelength();
    let x = |v: f64| if mirror { 10.0 * wl - v } else { v };
    scene.inclusions.push(Inclusion::circle([x(3.0 * wl), 2.5 * wl], 0.2 * wl, presets::BENIGN));
    scene.inclusions.push(Inclusion {
        center: [x(7.0 * wl), 2.5 * wl],
        semi_axes: [0.625 * wl, 0.375 * wl],
        rotation: 0.0,
        material: presets::MALIGNANT,
    });
    scene.sources = vec![[x(wl), 5.0 * wl], [5.0 * wl, 5.0 * wl], [x(9.0 * wl), 5.0 * wl]];
    scene.t_final = scene.default_t_final();
    let params = Params::for_scene(&scene);
    let out = run_experiment(&scene, &params, false, &|_| Ok(())).unwrap();
    let margin = wl / 4.0;
    let peaks = |im: &ImageField| {
        let benign = im.region_peak(&scene.inclusions[0], margin).unwrap();
        let malignant = im.region_peak(&scene.inclusions[1], margin).unwrap();
        (benign, malignant)
    };
    let pct = |k: usize| out.shots[k].percentage[0].clone();
    let single = peaks(&pct(1));
    let two = peaks(&rtm_sum(&[pct(0), pct(1)]).unwrap());
    let three = peaks(&out.sums[0][0]);
    Discrimination {
        single: single.1 / single.0,
        two: two.1 / two.0,
        three: three.1 / three.0,
        malignant: [single.1, two.1, three.1],
        ordered: single.1 > single.0 && two.1 > two.0 && three.1 > three.0,
    }
}

#[test]
fn criterion_7_discrimination() {
    let t = Instant::now();
    let base = discrimination(false);
    let mirrored = discrimination(true);
    let holds = |d: &Discrimination| d.single >= 2.0 && d.ordered;
    let passed = holds(&base) && holds(&mirrored) && t.elapsed().as_secs() <= 1800;
    let fmt = |d: &Discrimination| {
        format!(
            "malignant/benign region peak ratio 1 source {:.2}, 2 sources {:.2}, 3 sources {:.2} (malignant peaks {:.3e}, {:.3e}, {:.3e})",
            d.single, d.two, d.three, d.malignant[0], d.malignant[1], d.malignant[2]
        )
    };
    report(7, "benign/malignant discrimination", passed, &format!("scene: {}; mirrored: {}", fmt(&base), fmt(&mirrored)), t);
    assert!(passed);
}

#[test]
fn criterion_9_close_inclusions() {
    let t = Instant::now();
    let mut scene = Scene::desk(1e5);
    let wl = scene.wavelength();
    let centers: [Point; 2] = [[4.55 * wl, 2.5 * wl], [5.45 * wl, 2.5 * wl]];
    for c in centers {
        scene.inclusions.push(Inclusion::circle(c, 0.2 * wl, presets::MALIGNANT));
    }
    scene.sras = (0..5)
        .map(|k| {
            let c = (3.0 + k as f64) * wl;
            Sra {
                start: [c - 2.0 * wl, 5.0 * wl],
                end: [c + 2.0 * wl, 5.0 * wl],
                receiver_count: 17,
            }
        })
        .collect();
    scene.sources.clear();
    scene.t_final = scene.default_t_final();
    let params = Params::for_scene(&scene);
    let out = run_experiment(&scene, &params, false, &|_| Ok(())).unwrap();
    let image = out.aggregate_for(Variant::ComponentU2).unwrap();
    let peaks = find_peaks(image, 0.3).unwrap();
    let nearest: Vec<f64> = centers
        .iter()
        .map(|c| peaks.peaks.iter().map(|p| dist(p.location, *c) / wl).fold(f64::INFINITY, f64::min))
        .collect();
    let passed = peaks.peaks.len() >= 2 && nearest.iter().all(|d| *d <= 0.5) && t.elapsed().as_secs() <= 2400;
    let list: Vec<String> = peaks
        .peaks
        .iter()
        .map(|p| format!("({:.2}, {:.2})λ {:.3e}", p.location[0] / wl, p.location[1] / wl, p.value))
        .collect();
    report(
        9,
        "close-inclusion resolution",
        passed,
        &format!("{} peaks above 0.3·max: {}; nearest peak to each centroid {:.2}λ, {:.2}λ (<= 0.5λ)", list.len(), list.join(", "), nearest[0], nearest[1]),
        t,
    );
    assert!(passed);
}
