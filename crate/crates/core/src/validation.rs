//! Self-checks of the discretization against analytic oracles and scheme
//! invariants. Each check returns a measured value next to its bound so the
//! same code backs the `validate` subcommand and the acceptance tests.

use crate::assembly::{assemble_edge_load, assemble_operators, assemble_source, BoundarySetup, Medium, OperatorSet};
use crate::error::Result;
use crate::forward::{ricker, TraceKind, TraceRecorder};
use crate::linalg::{CsrMatrix, SolveOptions};
use crate::mesh::{DofMap, Mesh};
use crate::scene::{presets, Boundaries, FluidAbc, FluidMaterial, Rect, Region, Side, SideCondition, SolidMaterial};
use crate::stepper::{courant_dt, node_spacing, run, FieldState, Forcing, Recorder, Stepper, StepperOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn tight() -> StepperOptions {
    StepperOptions {
        solve: SolveOptions {
            tol: 1e-13,
            max_iter: 4000,
            restart: 60,
        },
        lumped_mass: false,
    }
}

/// Fluid above `interface_y`, `solid` below.
pub fn layered_mesh(rect: Rect, nx: usize, ny: usize, interface_y: f64) -> Result<Mesh> {
    Mesh::rectangle(rect, nx, ny, |c| if c[1] > interface_y { Region::Fluid } else { Region::Tissue })
}

/// Small closed fluid-over-tissue box used by the invariant checks.
pub fn coupled_box(degree: usize, bc: &BoundarySetup) -> Result<(Mesh, DofMap, OperatorSet)> {
    let wl = presets::FLUID.vp() / 1e5;
    let rect = Rect::new(0.0, 2.0 * wl, 0.0, 2.0 * wl)?;
    let mesh = layered_mesh(rect, 12, 12, wl)?;
    let dofs = DofMap::new(&mesh, degree)?;
    let medium = Medium::two_phase(&mesh, presets::FLUID, presets::TISSUE);
    let ops = assemble_operators(&mesh, &dofs, &medium, bc)?;
    Ok((mesh, dofs, ops))
}

/// Relative asymmetry of every symmetric block; all must be below `tol`.
pub fn check_symmetry(ops: &OperatorSet, tol: f64) -> Check {
    let blocks = [
        ("M_f", &ops.m_f),
        ("K_f", &ops.k_f),
        ("B_f", &ops.b_f),
        ("M_s", &ops.m_s),
        ("K_s", &ops.k_s),
        ("B_s", &ops.b_s),
    ];
    let mut worst = 0.0f64;
    let mut which = "";
    for (name, m) in blocks {
        let scale = m.max_abs();
        if scale == 0.0 {
            continue;
        }
        let rel = m.asymmetry() / scale;
        if rel > worst {
            worst = rel;
            which = name;
        }
    }
    Check::new(
        "operator symmetry",
        worst <= tol,
        format!("max relative asymmetry {worst:.3e} ({}) <= {tol:.0e}", if which.is_empty() { "-" } else { which }),
    )
}

/// Coupling structure on a horizontal interface: exact antisymmetry of the
/// two off-diagonal blocks and the nonzero channels present.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub antisymmetry: f64,
    /// `u₂` columns feeding fluid rows.
    pub u2_into_fluid: usize,
    /// `p` feeding `u₁` rows of solid nodes.
    pub p_into_u1: usize,
    /// `p` feeding `u₂` rows of solid nodes.
    pub p_into_u2: usize,
}

pub fn coupling_report(ops: &OperatorSet) -> CouplingReport {
    let nf = ops.n_fluid;
    let n = ops.n_total();
    let g = ops.global_coupling();
    let solid_rows = g.block(nf..n, 0..nf);
    let ct = ops.c.transpose();
    let antisymmetry = CsrMatrix::linear_combination(&[(1.0, &solid_rows), (1.0, &ct)]).map_or(f64::INFINITY, |d| d.max_abs());
    let mut report = CouplingReport {
        antisymmetry,
        u2_into_fluid: 0,
        p_into_u1: 0,
        p_into_u2: 0,
    };
    for i in 0..nf {
        for (j, v) in ops.c.row(i) {
            if v != 0.0 && j % 2 == 1 {
                report.u2_into_fluid += 1;
            }
        }
    }
    for r in 0..ops.n_solid {
        for (_, v) in solid_rows.row(r) {
            if v != 0.0 {
                if r % 2 == 0 {
                    report.p_into_u1 += 1;
                } else {
                    report.p_into_u2 += 1;
                }
            }
        }
    }
    report
}

pub fn check_coupling(ops: &OperatorSet) -> Check {
    let r = coupling_report(ops);
    Check::new(
        "coupling antisymmetry",
        r.antisymmetry == 0.0 && r.u2_into_fluid > 0 && r.p_into_u2 > 0,
        format!(
            "max|C_solid_rows + C^T| = {:.1e}; nonzeros u2->fluid {}, p->u1 {}, p->u2 {}",
            r.antisymmetry, r.u2_into_fluid, r.p_into_u1, r.p_into_u2
        ),
    )
}

/// Runs a point source for a few periods to produce nonzero coupled data.
fn excited_state(ops: &OperatorSet, mesh: &Mesh, dofs: &DofMap, dt: f64, options: StepperOptions) -> Result<(Stepper, FieldState)> {
    let wl = presets::FLUID.vp() / 1e5;
    let pattern = assemble_source(mesh, dofs, [mesh.bounds.x_min + 0.9 * wl, mesh.bounds.y_max - 0.6 * wl])?;
    let signal = |t: f64| ricker(t, 1e5);
    let forcing = Forcing {
        pattern: &pattern,
        signal: &signal,
    };
    let mut stepper = Stepper::new(ops, dt, &[], options)?;
    let mut state = FieldState::zeros(ops, dt);
    let n = (3e-5 / dt).ceil() as usize;
    run(&mut stepper, &mut state, n, Some(&forcing), |_| Vec::new(), &mut [])?;
    state.step = 0;
    Ok((stepper, state))
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Forward `n_steps`, reverse the state pair, `n_steps` back; relative L2
/// mismatch with the initial pair.
pub fn reversibility_error(n_steps: usize) -> Result<f64> {
    let (mesh, dofs, ops) = coupled_box(2, &BoundarySetup::closed())?;
    let dt = courant_dt(node_spacing(&mesh, 2), presets::FLUID.vp(), 0.5);
    let (mut stepper, start) = excited_state(&ops, &mesh, &dofs, dt, tight())?;
    let mut state = start.clone();
    run(&mut stepper, &mut state, n_steps, None, |_| Vec::new(), &mut [])?;
    let mut back = state.reversed();
    run(&mut stepper, &mut back, n_steps, None, |_| Vec::new(), &mut [])?;
    let end = back.reversed();
    let a: Vec<f64> = end.prev.iter().chain(&end.curr).copied().collect();
    let b: Vec<f64> = start.prev.iter().chain(&start.curr).copied().collect();
    Ok(rel_diff(&a, &b))
}

pub fn check_reversibility(n_steps: usize, tol: f64) -> Result<Check> {
    let e = reversibility_error(n_steps)?;
    Ok(Check::new(
        "discrete reversibility",
        e < tol,
        format!("{n_steps} steps forward and back: relative L2 error {e:.3e} < {tol:.0e}"),
    ))
}

/// Energy history after the source has died out, for closed (`absorbing =
/// false`) or absorbing outer boundaries.
pub fn energy_history(absorbing: bool, cfl: f64, n_steps: usize) -> Result<Vec<f64>> {
    let bc = if absorbing {
        BoundarySetup {
            fluid_abc: FluidAbc::EngquistMajda,
            sides: Boundaries::uniform(SideCondition::Absorbing),
        }
    } else {
        BoundarySetup::closed()
    };
    let (mesh, dofs, ops) = coupled_box(2, &bc)?;
    let dt = courant_dt(node_spacing(&mesh, 2), presets::FLUID.vp(), cfl);
    let (mut stepper, mut state) = excited_state(&ops, &mesh, &dofs, dt, tight())?;
    let mut energies = vec![stepper.energy(&state).total];
    for _ in 0..n_steps {
        stepper.step(&mut state, None, &[])?;
        energies.push(stepper.energy(&state).total);
    }
    Ok(energies)
}

pub fn check_energy(cfl: f64, n_steps: usize) -> Result<(Check, Check)> {
    let closed = energy_history(false, cfl, n_steps)?;
    let e0 = closed[0];
    let drift = closed.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
    let conserved = Check::new(
        "energy conservation (closed)",
        drift < 1e-3,
        format!("max relative drift over {n_steps} steps at cfl {cfl}: {drift:.3e} < 1e-3"),
    );
    let open = energy_history(true, cfl, n_steps)?;
    let worst = open
        .windows(2)
        .map(|w| (w[1] - w[0] * (1.0 + 1e-10)) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let decay = Check::new(
        "energy decay (absorbing)",
        worst <= 0.0,
        format!(
            "max (E(n+1) - E(n)(1+1e-10))/E(n) = {worst:.3e} <= 0; E drops {:.3e} -> {:.3e}",
            open[0],
            open[open.len() - 1]
        ),
    );
    Ok((conserved, decay))
}

/// Normal-incidence reflection in a fluid-over-solid column. Returns the
/// measured pressure reflection coefficient at a fluid probe and the
/// impedance formula value.
pub fn reflection_coefficient(solid: SolidMaterial, cells_per_wavelength: usize) -> Result<(f64, f64)> {
    let fluid: FluidMaterial = presets::FLUID;
    let nu0 = 1e5;
    let wl = fluid.vp() / nu0;
    let n = cells_per_wavelength;
    let rect = Rect::new(0.0, 0.5 * wl, 0.0, 8.0 * wl)?;
    let interface_y = 4.0 * wl;
    let probe_y = 6.0 * wl;
    let bc = BoundarySetup {
        fluid_abc: FluidAbc::EngquistMajda,
        sides: Boundaries {
            bottom: SideCondition::Absorbing,
            right: SideCondition::Symmetry,
            top: SideCondition::Absorbing,
            left: SideCondition::Symmetry,
        },
    };
    let nx = (n / 2).max(1);
    let ny = 8 * n;
    let trace = |mesh: &Mesh, medium: &Medium| -> Result<(Vec<f64>, f64)> {
        let dofs = DofMap::new(mesh, 2)?;
        let ops = assemble_operators(mesh, &dofs, medium, &bc)?;
        let dt = courant_dt(node_spacing(mesh, 2), fluid.vp().max(solid.vp()), 0.5);
        let load = assemble_edge_load(mesh, &dofs, Side::Top);
        let signal = |t: f64| ricker(t, nu0);
        let forcing = Forcing {
            pattern: &load,
            signal: &signal,
        };
        let probe = mesh.nearest_vertex([0.25 * wl, probe_y], |_| true).expect("vertices");
        let mut rec = TraceRecorder::new(TraceKind::Total, vec![mesh.vertices[probe]], vec![dofs.fluid_dof(probe).expect("fluid probe")]);
        let mut stepper = Stepper::new(&ops, dt, &[], StepperOptions::default())?;
        let mut state = FieldState::zeros(&ops, dt);
        let t_end = (2.0 + 2.0 * 2.0 + 3.0) * wl / fluid.vp();
        let steps = (t_end / dt).ceil() as usize;
        run(&mut stepper, &mut state, steps, Some(&forcing), |_| Vec::new(), &mut [&mut rec as &mut dyn Recorder])?;
        let r = rec.finish();
        Ok((r.values.iter().map(|v| v[0]).collect(), dt))
    };
    let coupled = layered_mesh(rect, nx, ny, interface_y)?;
    let (with_solid, dt) = trace(&coupled, &Medium::two_phase(&coupled, fluid, solid))?;
    let all_fluid = Mesh::rectangle(rect, nx, ny, |_| Region::Fluid)?;
    let (reference, _) = trace(&all_fluid, &Medium::two_phase(&all_fluid, fluid, solid))?;
    let reflected: Vec<f64> = with_solid.iter().zip(&reference).map(|(a, b)| a - b).collect();
    // Reflected pulse = R × incident delayed by the probe → interface → probe path.
    let lag = 2.0 * (probe_y - interface_y) / fluid.vp() / dt;
    let delayed = |k: usize| {
        let s = k as f64 - lag;
        if s < 0.0 {
            return 0.0;
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        let a = reference.get(i).copied().unwrap_or(0.0);
        let b = reference.get(i + 1).copied().unwrap_or(0.0);
        (1.0 - w) * a + w * b
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (k, r) in reflected.iter().enumerate() {
        let d = delayed(k);
        num += r * d;
        den += d * d;
    }
    let measured = num / den;
    let (zf, zs) = (fluid.impedance(), solid.impedance());
    Ok((measured, (zs - zf) / (zs + zf)))
}

pub fn check_reflection(cells_per_wavelength: usize) -> Result<Check> {
    let (measured, oracle) = reflection_coefficient(presets::TISSUE, cells_per_wavelength)?;
    Ok(Check::new(
        "fluid-solid reflection",
        (measured - oracle).abs() <= 0.01,
        format!("measured R = {measured:.4}, impedance formula {oracle:.4}, |diff| <= 0.01"),
    ))
}

/// L2 errors of a plane Gaussian pulse in a fluid column under simultaneous
/// halving of `h` and `dt`; returns `(h, error)` per level.
pub fn plane_pulse_errors(levels: usize) -> Result<Vec<(f64, f64)>> {
    let fluid = presets::FLUID;
    let c = fluid.vp();
    let wl = c / 1e5;
    let rect = Rect::new(0.0, 0.25 * wl, 0.0, 6.0 * wl)?;
    let sigma = 0.5 * wl;
    let (y0, travel) = (2.0 * wl, 1.0 * wl);
    let exact = |y: f64, t: f64| (-((y - y0 - c * t) / sigma).powi(2)).exp();
    let t_end = travel / c;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let k = 1usize << level;
        let mesh = Mesh::rectangle(rect, k, 24 * k, |_| Region::Fluid)?;
        let dofs = DofMap::new(&mesh, 2)?;
        let medium = Medium::two_phase(&mesh, fluid, presets::TISSUE);
        let ops = assemble_operators(&mesh, &dofs, &medium, &BoundarySetup::closed())?;
        let h = wl / 4.0 / k as f64;
        let n_steps = 40 * k;
        let dt = t_end / n_steps as f64;
        let nodal = |t: f64| -> Vec<f64> {
            let mut v = vec![0.0; dofs.n_fluid];
            for node in 0..dofs.n_nodes {
                if let Some(i) = dofs.fluid_dof(node) {
                    v[i] = exact(mesh.node_point(node)[1], t);
                }
            }
            v
        };
        let mut state = FieldState::zeros(&ops, dt);
        state.prev = nodal(-dt);
        state.curr = nodal(0.0);
        let mut stepper = Stepper::new(&ops, dt, &[], tight())?;
        run(&mut stepper, &mut state, n_steps, None, |_| Vec::new(), &mut [])?;
        let e: Vec<f64> = state.curr.iter().zip(nodal(t_end)).map(|(a, b)| a - b).collect();
        let err = (ops.m_f.quadratic_form(&e) * fluid.lambda).sqrt();
        out.push((h, err));
    }
    Ok(out)
}

pub fn observed_orders(errors: &[(f64, f64)]) -> Vec<f64> {
    errors
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
        .collect()
}

pub fn check_convergence(levels: usize) -> Result<Check> {
    let errors = plane_pulse_errors(levels)?;
    let orders = observed_orders(&errors);
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Check::new(
        "convergence order",
        min >= 1.8,
        format!(
            "errors {:?}, observed orders {:?}, min {min:.3} >= 1.8",
            errors.iter().map(|(_, e)| format!("{e:.3e}")).collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    ))
}

/// The invariant suite run by `elastotr validate`.
pub fn run_all() -> Result<Vec<Check>> {
    let (_, _, closed) = coupled_box(2, &BoundarySetup::closed())?;
    let (_, _, open) = coupled_box(
        2,
        &BoundarySetup {
            fluid_abc: FluidAbc::EngquistMajda,
            sides: Boundaries::uniform(SideCondition::Absorbing),
        },
    )?;
    let mut checks = vec![check_symmetry(&open, 1e-12), check_coupling(&closed)];
    checks.push(check_reversibility(500, 1e-8)?);
    let (conserved, decay) = check_energy(0.3, 1000)?;
    checks.push(conserved);
    checks.push(decay);
    checks.push(check_reflection(10)?);
    checks.push(check_convergence(4)?);
    Ok(checks)
}
