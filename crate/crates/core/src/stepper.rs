//! Centered second-order time integration of the coupled system
//!
//! `M (x⁺ − 2x⁰ + x⁻)/dt² + K x⁰ + (B + G)(x⁺ − x⁻)/(2dt) = F(tⁿ)`
//!
//! with `x = (p, u)`, `K` including the curvature boundary term and `G` the
//! skew interface coupling. The system matrix `M + dt/2 (B + G)` is
//! constant, so it is scaled, constrained and stored once; each step is one
//! GMRES solve warm-started from the linear extrapolation `2x⁰ − x⁻`.

use crate::assembly::OperatorSet;
use crate::error::{Error, Result};
use crate::linalg::{lump, solve_spd, CooBuilder, CsrMatrix, Gmres, SolveOptions};
use crate::mesh::Mesh;
use crate::scene::Scene;

/// `cfl · h / v`.
pub fn courant_dt(h: f64, v_max: f64, cfl: f64) -> f64 {
    cfl * h / v_max
}

/// Length scale for the time-step bound: shortest edge over `2 · degree`.
/// For the centered scheme with consistent P2 mass on right-triangle grids,
/// the explicit stiffness term goes unstable near `cfl ≈ 0.64` on this scale.
pub fn node_spacing(mesh: &Mesh, degree: usize) -> f64 {
    mesh.h_min() / (2.0 * degree as f64)
}

/// `dt = cfl · h / V_max` with `h` from [`node_spacing`] and `V_max` the
/// largest P-wave speed of the scene including inclusions.
pub fn stable_dt(mesh: &Mesh, degree: usize, scene: &Scene, cfl: f64) -> f64 {
    courant_dt(node_spacing(mesh, degree), scene.max_vp(true), cfl)
}

/// Power-iteration estimate of the largest eigenvalue of `M⁻¹ K`; the
/// explicit stiffness term is stable for `dt < 2 / sqrt(value)`.
pub fn max_frequency_squared(ops: &OperatorSet, iterations: usize) -> Result<f64> {
    let m = ops.global_mass();
    let k = ops.global_stiffness();
    let n = m.nrows();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let opts = SolveOptions {
        tol: 1e-8,
        max_iter: 5000,
        ..SolveOptions::default()
    };
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let kx = k.mul_vec(&x)?;
        let (y, _) = solve_spd(&m, &kx, Some(&x), &opts)?;
        let num = m.bilinear_form(&x, &y);
        let den = m.quadratic_form(&x);
        estimate = num / den;
        let norm = m.quadratic_form(&y).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        x = y.iter().map(|v| v / norm).collect();
    }
    Ok(estimate)
}

/// Two consecutive time levels of the coupled unknowns `x = (p, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub prev: Vec<f64>,
    pub curr: Vec<f64>,
    pub step: usize,
    pub dt: f64,
    pub n_fluid: usize,
}

impl FieldState {
    pub fn zeros(ops: &OperatorSet, dt: f64) -> Self {
        Self {
            prev: vec![0.0; ops.n_total()],
            curr: vec![0.0; ops.n_total()],
            step: 0,
            dt,
            n_fluid: ops.n_fluid,
        }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn pressure(&self) -> &[f64] {
        &self.curr[..self.n_fluid]
    }

    pub fn velocity(&self) -> &[f64] {
        &self.curr[self.n_fluid..]
    }

    /// Time reversal of the state pair: swap the two levels and negate the
    /// solid velocity, which is odd under `t → −t` while pressure is even.
    pub fn reversed(&self) -> Self {
        let flip = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .enumerate()
                .map(|(i, x)| if i < self.n_fluid { *x } else { -*x })
                .collect()
        };
        Self {
            prev: flip(&self.curr),
            curr: flip(&self.prev),
            step: 0,
            dt: self.dt,
            n_fluid: self.n_fluid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub deformation: f64,
    pub total: f64,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub solve: SolveOptions,
    /// Replace the mass by its row-sum lumping (P1 only).
    pub lumped_mass: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            lumped_mass: false,
        }
    }
}

/// Precomputed centered-scheme operators for one `(OperatorSet, dt)` pair and
/// one fixed set of constrained unknowns.
pub struct Stepper {
    dt: f64,
    n_fluid: usize,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    /// `2M − dt² K`
    r_curr: CsrMatrix,
    /// `−M + dt/2 (B + G)`
    r_prev: CsrMatrix,
    /// Jacobi-scaled system with identity rows at constrained unknowns.
    system: CsrMatrix,
    scale: Vec<f64>,
    ones: Vec<f64>,
    /// Symmetry-side unknowns (held at zero) followed by user constraints.
    fixed_zero: Vec<usize>,
    constrained: Vec<usize>,
    gmres: Gmres,
    opts: SolveOptions,
    rhs: Vec<f64>,
    y: Vec<f64>,
    pub last_iterations: usize,
}

impl Stepper {
    /// `constrained` lists global unknowns whose values are prescribed at every
    /// step (e.g. receiver pressures); they must be fluid unknowns.
    pub fn new(ops: &OperatorSet, dt: f64, constrained: &[usize], options: StepperOptions) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidScene(format!("time step must be positive (got {dt})")));
        }
        if let Some(&bad) = constrained.iter().find(|&&i| i >= ops.n_fluid) {
            return Err(Error::NotFluidNode(bad));
        }
        let n = ops.n_total();
        let mut mass = ops.global_mass();
        if options.lumped_mass {
            mass = lump(&mass)?;
        }
        let stiffness = ops.global_stiffness();
        let damping = ops.global_damping();
        let coupling = ops.global_coupling();
        let half = 0.5 * dt;
        let system = CsrMatrix::linear_combination(&[(1.0, &mass), (half, &damping), (half, &coupling)])?;
        let r_curr = CsrMatrix::linear_combination(&[(2.0, &mass), (-dt * dt, &stiffness)])?;
        let r_prev = CsrMatrix::linear_combination(&[(-1.0, &mass), (half, &damping), (half, &coupling)])?;

        let scale: Vec<f64> = system
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 })
            .collect();
        let fixed_zero: Vec<usize> = ops.symmetry_dofs.iter().map(|i| i + ops.n_fluid).collect();
        let mut rows = fixed_zero.clone();
        rows.extend_from_slice(constrained);
        let scaled = system.symmetric_scale(&scale).replace_rows_with_identity(&rows);
        let opts = options.solve;
        Ok(Self {
            dt,
            n_fluid: ops.n_fluid,
            mass,
            stiffness,
            r_curr,
            r_prev,
            system: scaled,
            scale,
            ones: vec![1.0; n],
            fixed_zero,
            constrained: constrained.to_vec(),
            gmres: Gmres::new(n, opts.restart.min(n.max(1))),
            opts,
            rhs: vec![0.0; n],
            y: vec![0.0; n],
            last_iterations: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    /// Advances `state` by one step. `load` is a fluid-block load pattern
    /// already multiplied by the source signal at `tⁿ`; `values` gives the
    /// prescribed values at the constrained unknowns for the new level.
    pub fn step(&mut self, state: &mut FieldState, load: Option<&[f64]>, values: &[f64]) -> Result<()> {
        let n = self.scale.len();
        if state.curr.len() != n || state.prev.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for a system of size {n}",
                state.curr.len()
            )));
        }
        if values.len() != self.constrained.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint values for {} constrained unknowns",
                values.len(),
                self.constrained.len()
            )));
        }
        self.r_curr.spmv_unchecked(&state.curr, &mut self.rhs);
        self.r_prev.spmv_unchecked(&state.prev, &mut self.y);
        for (r, y) in self.rhs.iter_mut().zip(&self.y) {
            *r += y;
        }
        if let Some(load) = load {
            let dt2 = self.dt * self.dt;
            for (r, l) in self.rhs[..self.n_fluid].iter_mut().zip(load) {
                *r += dt2 * l;
            }
        }
        // Scaled unknown y = x / s, scaled equation s ⊙ rhs.
        for i in 0..n {
            self.rhs[i] *= self.scale[i];
            self.y[i] = (2.0 * state.curr[i] - state.prev[i]) / self.scale[i];
        }
        for &i in &self.fixed_zero {
            self.rhs[i] = 0.0;
            self.y[i] = 0.0;
        }
        for (&i, &v) in self.constrained.iter().zip(values) {
            self.rhs[i] = v / self.scale[i];
            self.y[i] = self.rhs[i];
        }
        let stats = self
            .gmres
            .solve(&self.system, &self.ones, &self.rhs, &mut self.y, &self.opts, false)
            .map_err(|e| Error::Step {
                step: state.step,
                source: Box::new(e),
            })?;
        self.last_iterations = stats.iterations;
        std::mem::swap(&mut state.prev, &mut state.curr);
        for i in 0..n {
            state.curr[i] = self.y[i] * self.scale[i];
        }
        state.step += 1;
        Ok(())
    }

    /// Discrete energy conserved exactly by the scheme when `B = 0`:
    /// kinetic `½ δᵀ (M − dt² K / 4) δ` with `δ = (x⁰ − x⁻)/dt`, deformation
    /// `½ x̄ᵀ K x̄` with `x̄ = (x⁰ + x⁻)/2`.
    pub fn energy(&self, state: &FieldState) -> EnergyReport {
        let delta: Vec<f64> = state.curr.iter().zip(&state.prev).map(|(a, b)| (a - b) / self.dt).collect();
        let mean: Vec<f64> = state.curr.iter().zip(&state.prev).map(|(a, b)| 0.5 * (a + b)).collect();
        let quarter = 0.25 * self.dt * self.dt;
        let kinetic = 0.5 * (self.mass.quadratic_form(&delta) - quarter * self.stiffness.quadratic_form(&delta));
        let deformation = 0.5 * self.stiffness.quadratic_form(&mean);
        EnergyReport {
            kinetic,
            deformation,
            total: kinetic + deformation,
            step: state.step,
        }
    }
}

/// Observer called with the initial state and after every step.
pub trait Recorder {
    fn record(&mut self, state: &FieldState) -> Result<()>;
}

/// Load pattern and time signal of a source term `L f(t)`.
pub struct Forcing<'a> {
    pub pattern: &'a [f64],
    pub signal: &'a dyn Fn(f64) -> f64,
}

/// Runs `n_steps` steps. The forcing is evaluated at the current level time
/// `tⁿ`; `constraint_values(n + 1)` supplies the prescribed values of the new
/// level. Recorders see step 0 and every subsequent level.
pub fn run(
    stepper: &mut Stepper,
    state: &mut FieldState,
    n_steps: usize,
    forcing: Option<&Forcing<'_>>,
    mut constraint_values: impl FnMut(usize) -> Vec<f64>,
    recorders: &mut [&mut dyn Recorder],
) -> Result<()> {
    for r in recorders.iter_mut() {
        r.record(state)?;
    }
    let mut load = forcing.map(|f| vec![0.0; f.pattern.len()]);
    for _ in 0..n_steps {
        if let (Some(f), Some(buf)) = (forcing, load.as_mut()) {
            let s = (f.signal)(state.time());
            for (b, p) in buf.iter_mut().zip(f.pattern) {
                *b = s * p;
            }
        }
        let values = constraint_values(state.step + 1);
        stepper.step(state, load.as_deref(), &values)?;
        for r in recorders.iter_mut() {
            r.record(state)?;
        }
    }
    Ok(())
}

/// Builds an operator set from explicit blocks; meant for small synthetic
/// systems.
pub fn operator_set_from_blocks(m_f: CsrMatrix, k_f: CsrMatrix, m_s: CsrMatrix, k_s: CsrMatrix, c: CsrMatrix) -> OperatorSet {
    let (nf, ns) = (m_f.nrows(), m_s.nrows());
    OperatorSet {
        n_fluid: nf,
        n_solid: ns,
        b_f: CooBuilder::new(nf, nf).build(),
        e_f: CooBuilder::new(nf, nf).build(),
        b_s: CooBuilder::new(ns, ns).build(),
        m_f,
        k_f,
        m_s,
        k_s,
        c,
        symmetry_dofs: Vec::new(),
        provenance: crate::assembly::Provenance {
            with_inclusions: false,
            regions: Vec::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> StepperOptions {
        StepperOptions {
            solve: SolveOptions {
                tol: 1e-14,
                ..SolveOptions::default()
            },
            lumped_mass: false,
        }
    }

    #[test]
    fn courant_examples() {
        assert_eq!(courant_dt(1.0, 1.0, 0.5), 0.5);
        assert!((courant_dt(1.2e-3, 1500.0, 0.5) - 4e-7).abs() < 1e-20);
        assert_eq!(courant_dt(0.5, 1.0, 0.5), 0.5 * courant_dt(1.0, 1.0, 0.5));
    }

    #[test]
    fn scalar_leapfrog() {
        let (m, k) = (2.0, 3.0);
        let ops = operator_set_from_blocks(
            CsrMatrix::from_dense(&[vec![m]]),
            CsrMatrix::from_dense(&[vec![k]]),
            CsrMatrix::zeros(0, 0),
            CsrMatrix::zeros(0, 0),
            CsrMatrix::zeros(1, 0),
        );
        let dt = 0.1;
        let mut s = Stepper::new(&ops, dt, &[], StepperOptions { lumped_mass: true, ..tight() }).unwrap();
        let mut state = FieldState::zeros(&ops, dt);
        state.prev[0] = 1.0;
        state.curr[0] = 0.9;
        let (mut pm, mut p0) = (1.0, 0.9);
        for _ in 0..50 {
            s.step(&mut state, None, &[]).unwrap();
            let pp = 2.0 * p0 - pm - dt * dt * (k / m) * p0;
            pm = p0;
            p0 = pp;
            assert!((state.curr[0] - p0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_stays_zero() {
        let ops = operator_set_from_blocks(
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.5]]),
        );
        let mut s = Stepper::new(&ops, 0.1, &[], tight()).unwrap();
        let mut state = FieldState::zeros(&ops, 0.1);
        s.step(&mut state, None, &[]).unwrap();
        assert!(state.curr.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constrained_values_are_imposed() {
        let ops = operator_set_from_blocks(
            CsrMatrix::from_dense(&[vec![2.0, 0.5], vec![0.5, 2.0]]),
            CsrMatrix::from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]),
            CsrMatrix::identity(2),
            CsrMatrix::identity(2),
            CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.5]]),
        );
        let mut s = Stepper::new(&ops, 0.05, &[1], tight()).unwrap();
        let mut state = FieldState::zeros(&ops, 0.05);
        for k in 0..10 {
            let v = (k as f64 * 0.3).sin();
            s.step(&mut state, None, &[v]).unwrap();
            assert!((state.curr[1] - v).abs() < 1e-12);
        }
        assert!(Stepper::new(&ops, 0.05, &[3], tight()).is_err());
    }
}
