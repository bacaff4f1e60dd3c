//! Time-reversed problem: the scattered pressure, reversed in time, is
//! imposed as Dirichlet data at the receiver nodes of an inclusion-free
//! background model and marched with the forward scheme.

use crate::error::{Error, Result};
use crate::forward::{FieldMovie, ForwardModel, MovieRecorder, SolidSampler, TimePlan, TraceRecord};
use crate::linalg::CsrMatrix;
use crate::mesh::SampleGrid;
use crate::scene::Point;
use crate::stepper::{run, FieldState, Stepper, StepperOptions};

/// Background model plus the reversed Dirichlet schedule at the SRA nodes.
pub struct TrProblem<'a> {
    pub model: &'a ForwardModel<'a>,
    /// Mesh vertices carrying the SRA condition.
    pub nodes: Vec<usize>,
    /// Their fluid unknowns.
    pub dofs: Vec<usize>,
    /// `schedule[n][i]`: pressure at `dofs[i]` at reversed step `n`, for
    /// `n = 0..=n_steps`.
    pub schedule: Vec<Vec<f64>>,
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
    pub n_frames: usize,
}

impl TrProblem<'_> {
    pub fn receiver_points(&self) -> Vec<Point> {
        self.nodes.iter().map(|&n| self.model.mesh.vertices[n]).collect()
    }
}

/// Resamples `traces` onto the reversed clock, `schedule[n] = trace(T_f − n·dt)`.
/// Receivers are snapped to the nearest fluid-only vertex of the reversed
/// mesh; receivers landing on the same vertex are averaged.
pub fn build_tr_problem<'a>(model: &'a ForwardModel<'a>, traces: &TraceRecord, plan: &TimePlan) -> Result<TrProblem<'a>> {
    if model.with_inclusions || model.ops.provenance.uses_inclusions() {
        return Err(Error::InvalidScene("the reversed problem must use the background medium".into()));
    }
    let t_final = plan.t_final;
    let (t_first, t_last) = match (traces.times.first(), traces.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => {
            return Err(Error::TracesTooShort {
                available: 0.0,
                required: t_final,
            })
        }
    };
    if t_last < t_final * (1.0 - 1e-9) || t_first > 1e-12 * t_final {
        return Err(Error::TracesTooShort {
            available: t_last - t_first,
            required: t_final,
        });
    }

    let mesh = model.mesh;
    let fluid = mesh.fluid_interior_vertices();
    let mut nodes: Vec<usize> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (r, p) in traces.receivers.iter().enumerate() {
        let v = mesh
            .nearest_vertex(*p, |v| fluid[v])
            .ok_or_else(|| Error::Mesh("reversed mesh has no fluid vertices".into()))?;
        match nodes.iter().position(|&n| n == v) {
            Some(k) => groups[k].push(r),
            None => {
                nodes.push(v);
                groups.push(vec![r]);
            }
        }
    }
    let dofs = nodes
        .iter()
        .map(|&n| model.dofs.fluid_dof(n).ok_or(Error::NotFluidNode(n)))
        .collect::<Result<Vec<_>>>()?;

    let n_steps = plan.n_reverse();
    let dt = plan.dt_reverse;
    let schedule = (0..=n_steps)
        .map(|n| {
            let t = (t_final - n as f64 * dt).clamp(t_first, t_last);
            groups
                .iter()
                .map(|g| g.iter().map(|&r| traces.sample(r, t)).sum::<f64>() / g.len() as f64)
                .collect()
        })
        .collect();
    Ok(TrProblem {
        model,
        nodes,
        dofs,
        schedule,
        dt,
        n_steps,
        stride: plan.stride_reverse,
        n_frames: plan.n_frames,
    })
}

/// Marches the reversed problem from rest and records `u^R` on the sample
/// grid every `stride` steps. The marched solid velocity obeys the forward
/// coupling sign; its negative satisfies the time-reversed transmission
/// conditions and is what the movie stores.
pub fn run_reversed(prob: &TrProblem<'_>, sampler: &SolidSampler, grid: &SampleGrid, options: StepperOptions) -> Result<FieldMovie> {
    let mut stepper = Stepper::new(&prob.model.ops, prob.dt, &prob.dofs, options)?;
    let mut state = FieldState::zeros(&prob.model.ops, prob.dt);
    let mut movie = MovieRecorder::new(sampler, grid, prob.stride, prob.dt, prob.n_frames + 1, -1.0);
    run(
        &mut stepper,
        &mut state,
        prob.n_steps,
        None,
        |n| prob.schedule[n].clone(),
        &mut [&mut movie],
    )?;
    Ok(movie.finish())
}

/// Replaces the rows of `nodes` by identity rows and writes `values` into
/// the right-hand side. Only fluid unknowns may be constrained.
pub fn impose_dirichlet(
    system: &CsrMatrix,
    rhs: &mut [f64],
    n_fluid: usize,
    nodes: &[usize],
    values: &[f64],
) -> Result<CsrMatrix> {
    if nodes.len() != values.len() || rhs.len() != system.nrows() {
        return Err(Error::DimensionMismatch("dirichlet nodes, values and rhs must agree".into()));
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n_fluid) {
        return Err(Error::NotFluidNode(bad));
    }
    for (&i, &v) in nodes.iter().zip(values) {
        rhs[i] = v;
    }
    Ok(system.replace_rows_with_identity(nodes))
}
