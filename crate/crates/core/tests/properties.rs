use proptest::prelude::*;

use elastotr::assembly::{assemble_operators, BoundarySetup, Medium};
use elastotr::forward::{add_noise, FieldMovie, Frame, TimePlan, TraceKind, TraceRecord};
use elastotr::imaging::{find_peaks, rtm, rtm_percentage, ImageField, Stage, Variant};
use elastotr::linalg::CsrMatrix;
use elastotr::mesh::{DofMap, Mesh};
use elastotr::scene::{presets, Rect, Region};
use elastotr::stepper::{operator_set_from_blocks, FieldState, Stepper, StepperOptions};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, Just(0.0)]
}

fn traces(n_t: usize, n_r: usize, values: Vec<f64>) -> TraceRecord {
    TraceRecord {
        kind: TraceKind::Scattered,
        times: (0..n_t).map(|k| k as f64 * 1.25e-7).collect(),
        receivers: (0..n_r).map(|r| [r as f64 * 1e-3, 0.0225]).collect(),
        values: values.chunks(n_r).map(<[f64]>::to_vec).collect(),
    }
}

fn movie(nx: usize, ny: usize, frames: usize, values: &[f64]) -> FieldMovie {
    let n = nx * ny;
    FieldMovie {
        nx,
        ny,
        rect: Rect::new(0.0, 1.0, -1.0, 0.5).unwrap(),
        stride: 3,
        dt: 2.5e-7,
        frames: (0..frames)
            .map(|k| {
                let at = |c: usize, p: usize| values[(k * 3 * n + c * n + p) % values.len()];
                Frame {
                    u1: (0..n).map(|p| at(0, p)).collect(),
                    u2: (0..n).map(|p| at(1, p)).collect(),
                    div: (0..n).map(|p| at(2, p)).collect(),
                }
            })
            .collect(),
    }
}

fn movie_strategy() -> impl Strategy<Value = FieldMovie> {
    (2usize..6, 2usize..6, 1usize..6, prop::collection::vec(-1.0..1.0f64, 1..64))
        .prop_map(|(nx, ny, frames, v)| movie(nx, ny, frames, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_csv_round_trips_exactly((n_t, n_r, values) in (1usize..12, 1usize..6).prop_flat_map(|(t, r)| {
        (Just(t), Just(r), prop::collection::vec(finite(), t * r))
    })) {
        let rec = traces(n_t, n_r, values);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        rec.write_csv(&path).unwrap();
        prop_assert_eq!(TraceRecord::read_csv(&path).unwrap(), rec);
    }

    #[test]
    fn movie_bytes_round_trip(m in movie_strategy()) {
        let bytes = m.to_bytes();
        prop_assert_eq!(&bytes[..4], b"TRIM");
        prop_assert_eq!(FieldMovie::from_bytes(&bytes, std::path::Path::new("m.trim")).unwrap(), m);
    }

    #[test]
    fn truncated_movie_is_rejected(m in movie_strategy(), cut in 1usize..40) {
        let bytes = m.to_bytes();
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(FieldMovie::from_bytes(&bytes[..bytes.len() - cut], std::path::Path::new("m.trim")).is_err());
    }

    #[test]
    fn image_csv_round_trips_exactly(m in movie_strategy(), variant in 0usize..3) {
        let v = [Variant::Full, Variant::ComponentU2, Variant::Divergence][variant];
        let mut im = rtm(&m, &m, v).unwrap();
        im.provenance = vec!["a/b.trim".into(), "c".into()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.csv");
        im.write_csv(&path).unwrap();
        prop_assert_eq!(ImageField::read_csv(&path).unwrap(), im);
    }

    #[test]
    fn noise_is_seeded_multiplicative_and_vanishes_at_zero(values in prop::collection::vec(finite(), 12), seed in any::<u64>(), coeff in 0.0..0.5f64) {
        let rec = traces(4, 3, values);
        let a = add_noise(&rec, coeff, seed).unwrap();
        prop_assert_eq!(&a, &add_noise(&rec, coeff, seed).unwrap());
        prop_assert_eq!(a.kind, TraceKind::ScatteredNoisy);
        for (ra, r) in a.values.iter().zip(&rec.values) {
            for (x, y) in ra.iter().zip(r) {
                if *y == 0.0 {
                    prop_assert_eq!(*x, 0.0);
                }
            }
        }
        prop_assert_eq!(add_noise(&rec, 0.0, seed).unwrap().values, rec.values);
    }

    #[test]
    fn rtm_is_bilinear_and_percentage_scales_with_reversed(m in movie_strategy(), a in 0.1..10.0f64) {
        let base = rtm(&m, &m, Variant::Full).unwrap();
        let scaled = rtm(&m.scaled(a), &m, Variant::Full).unwrap();
        for (x, y) in scaled.values.iter().zip(&base.values) {
            prop_assert!((x - a * y).abs() <= 1e-12 * (1.0 + y.abs() * a));
        }
        if m.frames.iter().any(|f| f.u1.iter().chain(&f.u2).any(|v| *v != 0.0)) {
            let p = rtm_percentage(&base, &m).unwrap();
            let q = rtm_percentage(&scaled, &m).unwrap();
            prop_assert_eq!(q.stage, Stage::Percentage);
            for (x, y) in q.values.iter().zip(&p.values) {
                prop_assert!((x - a * y).abs() <= 1e-12 * (1.0 + y.abs() * a));
            }
        }
    }

    #[test]
    fn peaks_are_thresholded_sorted_maxima(values in prop::collection::vec(-1.0..1.0f64, 64), frac in 0.05..0.95f64) {
        let im = ImageField {
            nx: 8,
            ny: 8,
            rect: Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(),
            values,
            variant: Variant::ComponentU2,
            stage: Stage::Percentage,
            provenance: Vec::new(),
        };
        let report = find_peaks(&im, frac).unwrap();
        let max = im.max();
        for w in report.peaks.windows(2) {
            prop_assert!(w[0].value >= w[1].value);
        }
        for p in &report.peaks {
            prop_assert!(p.value >= frac * max);
            prop_assert!(p.prominence >= 0.0);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (i, j) = (p.i as i64 + di, p.j as i64 + dj);
                    if (di, dj) != (0, 0) && (0..8).contains(&i) && (0..8).contains(&j) {
                        prop_assert!(im.at(i as usize, j as usize) < p.value);
                    }
                }
            }
        }
        if max > 0.0 {
            prop_assert_eq!(report.peaks[0].value, max);
        }
    }

    #[test]
    fn time_plan_shares_the_frame_interval(t in 1e-5..1e-3f64, dt_f in 1e-8..1e-6f64, stride in 1usize..9, ratio in 0.2..3.0f64) {
        let plan = TimePlan::new(t, dt_f, stride, ratio * dt_f).unwrap();
        let df = plan.dt_forward * plan.stride_forward as f64;
        let dr = plan.dt_reverse * plan.stride_reverse as f64;
        prop_assert!((df - dr).abs() <= 1e-12 * df);
        prop_assert!(plan.dt_reverse <= ratio * dt_f * (1.0 + 1e-12));
        prop_assert!(plan.t_final >= t * (1.0 - 1e-9));
        prop_assert!(plan.t_final < t + df * (1.0 + 1e-9));
        prop_assert_eq!(plan.n_forward(), plan.n_frames * plan.stride_forward);
        prop_assert_eq!(plan.n_reverse(), plan.n_frames * plan.stride_reverse);
    }

    #[test]
    fn state_reversal_is_an_involution(values in prop::collection::vec(finite(), 10), nf in 0usize..5) {
        let s = FieldState { prev: values[..5].to_vec(), curr: values[5..].to_vec(), step: 7, dt: 1e-7, n_fluid: nf };
        let back = s.reversed().reversed();
        prop_assert_eq!(back.prev, s.prev);
        prop_assert_eq!(back.curr, s.curr);
    }
}

fn layered(nx: usize, ny: usize, interface: f64, degree: usize) -> (Mesh, DofMap, elastotr::assembly::OperatorSet) {
    let rect = Rect::new(0.0, 2.0, 0.0, 1.0).unwrap();
    let mesh = Mesh::rectangle(rect, nx, ny, |c| if c[1] > interface { Region::Fluid } else { Region::Tissue }).unwrap();
    let dofs = DofMap::new(&mesh, degree).unwrap();
    let medium = Medium::two_phase(&mesh, presets::FLUID, presets::TISSUE);
    let ops = assemble_operators(&mesh, &dofs, &medium, &BoundarySetup::closed()).unwrap();
    (mesh, dofs, ops)
}

fn sum_all(m: &CsrMatrix) -> f64 {
    m.values().iter().sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn assembled_operators_match_integrals(nx in 1usize..6, ny_half in 1usize..4, degree in 1usize..3) {
        let ny = 2 * ny_half;
        let (mesh, dofs, ops) = layered(nx, ny, 0.5, degree);
        // Fluid occupies [0, 2] × [0.5, 1], the solid the lower half.
        let fluid_area = 1.0;
        prop_assert!((sum_all(&ops.m_f) - fluid_area / presets::FLUID.lambda).abs() <= 1e-12 * fluid_area / presets::FLUID.lambda);
        let solid_mass = 2.0 * presets::TISSUE.rho * 1.0;
        prop_assert!((sum_all(&ops.m_s) - solid_mass).abs() <= 1e-10 * solid_mass);
        // Constants are in the kernel of the fluid stiffness, rigid
        // translations in that of the elastic stiffness.
        for row in ops.k_f.row_sums() {
            prop_assert!(row.abs() <= 1e-9 * ops.k_f.max_abs());
        }
        for c in 0..2 {
            let t: Vec<f64> = (0..ops.n_solid).map(|i| if i % 2 == c { 1.0 } else { 0.0 }).collect();
            let kt = ops.k_s.mul_vec(&t).unwrap();
            prop_assert!(kt.iter().all(|v| v.abs() <= 1e-9 * ops.k_s.max_abs()));
        }
        // `∫_Γ u·n q` with u = e₂ and q = 1 is the interface length up to sign.
        let e2: Vec<f64> = (0..ops.n_solid).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect();
        let flux: f64 = ops.c.mul_vec(&e2).unwrap().iter().sum();
        prop_assert!((flux.abs() - 2.0).abs() <= 1e-12);
        prop_assert_eq!(ops.m_f.asymmetry(), 0.0);
        prop_assert!(ops.k_s.asymmetry() <= 1e-12 * ops.k_s.max_abs());
        prop_assert_eq!(dofs.interface_nodes.len(), degree * nx + 1);
        prop_assert!(mesh.triangles.iter().enumerate().all(|(t, _)| mesh.area(t) > 0.0));
    }

    #[test]
    fn coupled_scheme_conserves_energy_for_random_blocks(seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let spd = |rng: &mut rand_chacha::ChaCha8Rng, n: usize, shift: f64| {
            let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let m: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| a[k][i] * a[k][j]).sum::<f64>() + if i == j { shift } else { 0.0 }).collect())
                .collect();
            CsrMatrix::from_dense(&m)
        };
        let (nf, ns) = (3, 4);
        let c: Vec<Vec<f64>> = (0..nf).map(|_| (0..ns).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let ops = operator_set_from_blocks(spd(&mut rng, nf, 5.0), spd(&mut rng, nf, 0.1), spd(&mut rng, ns, 5.0), spd(&mut rng, ns, 0.1), CsrMatrix::from_dense(&c));
        let mut opts = StepperOptions::default();
        opts.solve.tol = 1e-14;
        let mut stepper = Stepper::new(&ops, 0.05, &[], opts).unwrap();
        let mut state = FieldState::zeros(&ops, 0.05);
        state.curr = (0..nf + ns).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e0 = stepper.energy(&state).total;
        for _ in 0..200 {
            stepper.step(&mut state, None, &[]).unwrap();
        }
        let e1 = stepper.energy(&state).total;
        prop_assert!((e1 - e0).abs() <= 1e-10 * e0, "{} -> {}", e0, e1);
    }
}
