//! Staggered pseudo-time solver: alternate displacement Newton solves and
//! phase-field solves until the joint increment norm converges, with
//! adaptive load stepping on failure.

use crate::constitutive::{MaterialParams, PointState};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_displacement, assemble_external, assemble_phasefield, build_d_pattern,
    build_u_pattern, equilibrium_residual, reaction_force, update_point_states, DirichletBc,
    DofMap, FemModel, Pattern, SparseSystem, TractionBc,
};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};
use std::sync::Once;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative increment tolerance of the staggered loop.
    pub stagger_tol: f64,
    pub max_stagger_iters: usize,
    /// Relative force tolerance of the Newton solves.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub dt_growth: f64,
    pub dt_cut: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            stagger_tol: 1e-4,
            max_stagger_iters: 200,
            newton_tol: 1e-8,
            max_newton_iters: 30,
            dt_initial: 0.02,
            dt_min: 1e-6,
            dt_max: 0.05,
            dt_growth: 1.5,
            dt_cut: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.stagger_tol > 0.0
            && self.newton_tol > 0.0
            && self.max_stagger_iters > 0
            && self.max_newton_iters > 0
            && self.dt_min > 0.0
            && self.dt_min <= self.dt_initial
            && self.dt_initial <= self.dt_max
            && self.dt_growth > 1.0
            && self.dt_cut < 1.0
            && self.dt_cut > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("invalid solver configuration".into()))
        }
    }
}

/// Nodal fields and per-point states at one pseudo-time.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub points: Vec<PointState>,
    pub time: f64,
}

impl FieldState {
    pub fn zero(n_nodes: usize, n_elements: usize) -> Self {
        Self {
            u: vec![0.0; 2 * n_nodes],
            d: vec![0.0; n_nodes],
            points: vec![PointState::default(); n_elements],
            time: 0.0,
        }
    }
}

/// One accepted load step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub sweeps: usize,
    pub newton_iters: usize,
    /// Magnitude of the primary prescribed displacement (m).
    pub prescribed: f64,
    /// Reaction projected on the scenario's reporting direction (N/m).
    pub reaction: f64,
    pub reaction_vec: [f64; 2],
    /// Cumulative external work over the main phase (J/m).
    pub work_external: f64,
    /// Stored elastic energy estimate (J/m).
    pub stored_energy: f64,
    pub equilibrium_gap: f64,
    /// Dofs clipped into [0,1] by more than the clipping tolerance.
    pub clipped_dofs: usize,
    pub max_d: f64,
    /// Worst nodal decrease of d vs the previous accepted state.
    pub d_drop: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunDiagnostics {
    /// Elements whose slip candidate was already positive after the static
    /// step (the history still starts at zero, per the stepping scheme).
    pub static_slip_elements: usize,
    pub total_newton_iters: usize,
    pub total_sweeps: usize,
    pub rejected_steps: usize,
    pub worst_d_drop: f64,
    pub worst_equilibrium_gap: f64,
    pub clipped_total: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub state: FieldState,
    pub diagnostics: RunDiagnostics,
    /// Stored energy right after the static phase.
    pub static_energy: f64,
}

/// Everything the solver needs to drive one simulation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: FemModel,
    pub params: MaterialParams,
    /// Constraints of the initial static solve.
    pub static_bcs: Vec<DirichletBc>,
    pub main_bcs: Vec<DirichletBc>,
    pub tractions: Vec<TractionBc>,
    pub body_force: [f64; 2],
    /// Nodes where the phase field is constrained to zero.
    pub phase_fixed_nodes: Vec<usize>,
    pub has_static_phase: bool,
    /// Boundary whose reaction is reported.
    pub reaction_tag: String,
    /// Unit vector the reaction is projected on for reporting.
    pub reaction_dir: [f64; 2],
    /// Magnitude of the primary displacement ramp (m) for reporting.
    pub primary_target: f64,
    /// Stop once the reaction has dropped below this fraction of the peak
    /// (after damage has localized). Used by peak-only studies.
    pub stop_after_peak_drop: Option<f64>,
    /// Pre-seeded slip history per element (element id, value), representing
    /// initial fully-developed fractures.
    pub seed_slip: Vec<(usize, f64)>,
}

fn set_sequential_once() {
    static ONCE: Once = Once::new();
    // bit-identical reruns take precedence over parallel factorization
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Direct sparse solve of a reduced system (one-shot symbolic analysis).
pub fn linear_solve(system: &SparseSystem) -> Result<Vec<f64>> {
    set_sequential_once();
    let p = system.pattern;
    let sym = SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.col_ptr, None, &p.row_idx);
    let mat = SparseColMatRef::new(sym, system.values);
    let symbolic =
        SymbolicLlt::try_new(mat.symbolic(), Side::Lower).map_err(|_| Error::SingularMatrix)?;
    let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower)
        .map_err(|_| Error::SingularMatrix)?;
    let mut x = Mat::<f64>::zeros(p.n, 1);
    for (i, v) in system.rhs.iter().enumerate() {
        x[(i, 0)] = *v;
    }
    llt.solve_in_place(x.as_mut());
    Ok((0..p.n).map(|i| x[(i, 0)]).collect())
}

/// Discretized constraint phase: dof maps, patterns, external force and the
/// cached factorizations.
pub struct PhaseContext {
    pub map: DofMap,
    pub u_pattern: Pattern,
    pub d_pattern: Pattern,
    pub f_ext: Vec<f64>,
    u_symbolic: Option<SymbolicLlt<usize>>,
    d_symbolic: Option<SymbolicLlt<usize>>,
    /// Numeric factorization reused while the response stays linear elastic.
    elastic_factor: Option<Llt<usize, f64>>,
    elastic_valid: bool,
    k_u: Vec<f64>,
    rhs_u: Vec<f64>,
    k_d: Vec<f64>,
    rhs_d: Vec<f64>,
    pub f_int: Vec<f64>,
    delta_uc: Vec<f64>,
    /// Norm of the constant phase-field source vector, the natural residual
    /// scale of the damage equation.
    d_source_scale: f64,
}

impl PhaseContext {
    pub fn new(
        model: &FemModel,
        bcs: &[DirichletBc],
        phase_fixed_nodes: &[usize],
        tractions: &[TractionBc],
        body_force: [f64; 2],
    ) -> Result<Self> {
        set_sequential_once();
        let map = DofMap::build(&model.mesh, bcs, phase_fixed_nodes)?;
        let u_pattern = build_u_pattern(model, &map);
        let d_pattern = build_d_pattern(model, &map);
        let f_ext = assemble_external(model, tractions, body_force)?;
        let nn = model.n_nodes();
        let mut src = vec![0.0f64; nn];
        for (e, el) in model.mesh.elements.iter().enumerate() {
            for &n in el {
                src[n] += model.geo[e].area / 3.0;
            }
        }
        let d_source_scale: f64 = src
            .iter()
            .enumerate()
            .filter(|(n, _)| map.d_free[*n] >= 0)
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            k_u: vec![0.0; u_pattern.nnz()],
            rhs_u: vec![0.0; map.n_u_free],
            k_d: vec![0.0; d_pattern.nnz()],
            rhs_d: vec![0.0; map.n_d_free],
            f_int: vec![0.0; 2 * nn],
            delta_uc: vec![0.0; 2 * nn],
            map,
            u_pattern,
            d_pattern,
            f_ext,
            u_symbolic: None,
            d_symbolic: None,
            elastic_factor: None,
            elastic_valid: true,
            d_source_scale,
        })
    }

    fn factorize(
        pattern: &Pattern,
        values: &[f64],
        symbolic: &mut Option<SymbolicLlt<usize>>,
    ) -> Result<Llt<usize, f64>> {
        let sym = SymbolicSparseColMatRef::new_checked(
            pattern.n,
            pattern.n,
            &pattern.col_ptr,
            None,
            &pattern.row_idx,
        );
        let mat = SparseColMatRef::new(sym, values);
        if symbolic.is_none() {
            *symbolic = Some(
                SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                    .map_err(|e| Error::LinearSolveFailure(format!("symbolic: {e:?}")))?,
            );
        }
        Llt::try_new_with_symbolic(symbolic.clone().unwrap(), mat, Side::Lower)
            .map_err(|e| Error::LinearSolveFailure(format!("numeric: {e:?}")))
    }

    fn solve_with(llt: &Llt<usize, f64>, rhs: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::zeros(rhs.len(), 1);
        for (i, v) in rhs.iter().enumerate() {
            x[(i, 0)] = *v;
        }
        llt.solve_in_place(x.as_mut());
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_diff(new: &[f64], old: &[f64]) -> f64 {
    let mut dn = 0.0;
    let mut nn = 0.0;
    for (a, b) in new.iter().zip(old) {
        dn += (a - b) * (a - b);
        nn += a * a;
    }
    // absolute floor keeps zero-increment steps well-defined
    dn.sqrt() / nn.sqrt().max(1e-12)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepStats {
    pub sweeps: usize,
    pub newton_iters: usize,
    pub clipped: usize,
    pub max_d: f64,
}

pub struct Engine<'p> {
    pub problem: &'p Problem,
    pub config: SolverConfig,
}

impl<'p> Engine<'p> {
    pub fn new(problem: &'p Problem, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        problem.params.validate()?;
        Ok(Self { problem, config })
    }

    /// Newton solve of the displacement equation with d and the slip history
    /// frozen. `ctx.f_int` holds the internal force at the converged state.
    fn solve_displacement(
        &self,
        ctx: &mut PhaseContext,
        u: &mut [f64],
        d: &[f64],
        prev_slip: &[f64],
        points: &[PointState],
        targets: &[(usize, f64)],
    ) -> Result<(usize, f64)> {
        let model = &self.problem.model;
        let params = &self.problem.params;
        ctx.delta_uc.fill(0.0);
        let mut moved = false;
        for &(dof, val) in targets {
            let inc = val - u[dof];
            ctx.delta_uc[dof] = inc;
            if inc != 0.0 {
                moved = true;
            }
        }
        let mut max_d_seen = 0.0f64;
        for iter in 0..self.config.max_newton_iters {
            let stats = assemble_displacement(
                model,
                &ctx.map,
                &ctx.u_pattern,
                u,
                d,
                prev_slip,
                points,
                params,
                &ctx.f_ext,
                &ctx.delta_uc,
                &mut ctx.k_u,
                &mut ctx.rhs_u,
                &mut ctx.f_int,
            )?;
            max_d_seen = max_d_seen.max(stats.max_d);
            let rnorm = l2(&ctx.rhs_u);
            if !rnorm.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: iter,
                    last_error: f64::NAN,
                });
            }
            let scale = l2(&ctx.f_ext).max(l2(&ctx.f_int)).max(1e-30);
            if std::env::var("SHEARPF_DEBUG_NEWTON").is_ok() {
                let (mut imax, mut vmax) = (0usize, 0.0f64);
                for (i, v) in ctx.rhs_u.iter().enumerate() {
                    if v.abs() > vmax { vmax = v.abs(); imax = i; }
                }
                eprintln!("  u-newton iter {iter}: rnorm={rnorm:.6e} scale={scale:.3e} max@{imax}={vmax:.3e}");
            }
            if rnorm <= self.config.newton_tol * scale && !(moved && iter == 0) {
                return Ok((iter, max_d_seen));
            }
            if stats.max_d > 0.0 {
                ctx.elastic_valid = false;
                ctx.elastic_factor = None;
            }
            let reuse_elastic = ctx.elastic_valid && stats.max_d == 0.0;
            if !reuse_elastic || ctx.elastic_factor.is_none() {
                let llt = PhaseContext::factorize(&ctx.u_pattern, &ctx.k_u, &mut ctx.u_symbolic)?;
                ctx.elastic_factor = Some(llt);
            }
            let du = PhaseContext::solve_with(ctx.elastic_factor.as_ref().unwrap(), &ctx.rhs_u);
            if !reuse_elastic {
                ctx.elastic_factor = None;
            }
            for dof in 0..u.len() {
                let f = ctx.map.u_free[dof];
                if f >= 0 {
                    u[dof] += du[f as usize];
                } else {
                    u[dof] += ctx.delta_uc[dof];
                }
            }
            ctx.delta_uc.fill(0.0);
            moved = false;
        }
        Err(Error::NonConvergence {
            iterations: self.config.max_newton_iters,
            last_error: l2(&ctx.rhs_u),
        })
    }

    /// Projected Newton solve of the phase-field equation with the driving
    /// force frozen. The cohesive formulation has compact support, so ahead
    /// of the damage front the unconstrained equation pushes d below zero;
    /// those dofs sit at the bound with a one-sided residual. The right-hand
    /// side is zeroed there and convergence is measured on the projected
    /// residual. Steps are backtracked until the projected residual shrinks,
    /// since the underlying energy is not convex everywhere. Returns
    /// (iterations, dofs clipped beyond tolerance by the last update).
    fn solve_phasefield(
        &self,
        ctx: &mut PhaseContext,
        d: &mut [f64],
        points: &[PointState],
    ) -> Result<(usize, usize)> {
        let model = &self.problem.model;
        let params = &self.problem.params;
        let mut clipped_last = 0usize;
        let scale_floor = params.phase_modulus() * ctx.d_source_scale;

        // dofs pinned at a bound with an outward residual are frozen in the
        // sub-solve; their rows and columns are eliminated symmetrically so
        // coupling cannot lift them off the bound
        let mark_active = |d: &[f64], map: &DofMap, rhs: &mut [f64], active: &mut [bool]| {
            for (node, &val) in d.iter().enumerate() {
                let f = map.d_free[node];
                if f < 0 {
                    continue;
                }
                let r = &mut rhs[f as usize];
                let pinned = (val <= 0.0 && *r < 0.0) || (val >= 1.0 && *r > 0.0);
                active[f as usize] = pinned;
                if pinned {
                    *r = 0.0;
                }
            }
        };
        let eliminate = |pattern: &Pattern, values: &mut [f64], active: &[bool]| {
            for col in 0..pattern.n {
                let range = pattern.col_ptr[col]..pattern.col_ptr[col + 1];
                if active[col] {
                    for k in range {
                        values[k] = if pattern.row_idx[k] == col { 1.0 } else { 0.0 };
                    }
                } else {
                    for k in range {
                        if active[pattern.row_idx[k]] {
                            values[k] = 0.0;
                        }
                    }
                }
            }
        };

        let mut active = vec![false; ctx.map.n_d_free];
        assemble_phasefield(
            model, &ctx.map, &ctx.d_pattern, d, points, params, true, &mut ctx.k_d,
            &mut ctx.rhs_d,
        )?;
        mark_active(d, &ctx.map, &mut ctx.rhs_d, &mut active);
        let mut rnorm = l2(&ctx.rhs_d);
        let mut ref0 = rnorm;

        for iter in 0..self.config.max_newton_iters {
            if !rnorm.is_finite() {
                return Err(Error::NonConvergence {
                    iterations: iter,
                    last_error: f64::NAN,
                });
            }
            let thresh = self.config.newton_tol * ref0.max(scale_floor) + 1e-30;
            if rnorm <= thresh {
                return Ok((iter, clipped_last));
            }
            eliminate(&ctx.d_pattern, &mut ctx.k_d, &active);
            let llt = PhaseContext::factorize(&ctx.d_pattern, &ctx.k_d, &mut ctx.d_symbolic)?;
            let dd = PhaseContext::solve_with(&llt, &ctx.rhs_d);

            let mut alpha = 1.0f64;
            let mut trial = vec![0.0; d.len()];
            loop {
                let mut clips = 0usize;
                for node in 0..d.len() {
                    let f = ctx.map.d_free[node];
                    trial[node] = if f >= 0 {
                        let v = d[node] + alpha * dd[f as usize];
                        if v < -1e-8 || v > 1.0 + 1e-8 {
                            clips += 1;
                        }
                        v.clamp(0.0, 1.0)
                    } else {
                        d[node]
                    };
                }
                assemble_phasefield(
                    model, &ctx.map, &ctx.d_pattern, &trial, points, params, true, &mut ctx.k_d,
                    &mut ctx.rhs_d,
                )?;
                mark_active(&trial, &ctx.map, &mut ctx.rhs_d, &mut active);
                let rn = l2(&ctx.rhs_d);
                if rn <= thresh || rn < rnorm * (1.0 - 1e-4 * alpha) || alpha <= 1.0 / 256.0 {
                    d.copy_from_slice(&trial);
                    rnorm = rn;
                    clipped_last = clips;
                    break;
                }
                alpha *= 0.5;
            }
            ref0 = ref0.max(rnorm);
            if std::env::var("SHEARPF_DEBUG_NEWTON").is_ok() {
                eprintln!("  d-newton iter {iter}: rnorm={rnorm:.6e} alpha={alpha:.4}");
            }
        }
        Err(Error::NonConvergence {
            iterations: self.config.max_newton_iters,
            last_error: rnorm,
        })
    }

    /// One staggered pseudo-time step towards `t_next`. On success returns
    /// the converged state (with a final equilibrium displacement pass at
    /// the converged phase field) and the sweep statistics.
    pub fn staggered_step(
        &self,
        ctx: &mut PhaseContext,
        state: &FieldState,
        t_next: f64,
        base_u: &[f64],
    ) -> Result<(FieldState, SweepStats)> {
        let model = &self.problem.model;
        let params = &self.problem.params;
        let targets = ctx.map.bc_values(t_next, base_u);
        let mut work = state.clone();
        work.time = t_next;
        let prev_slip: Vec<f64> = state.points.iter().map(|p| p.history_slip).collect();
        let mut stats = SweepStats::default();

        loop {
            stats.sweeps += 1;
            let u_before = work.u.clone();
            let d_before = work.d.clone();
            let (it_u, _) = self.solve_displacement(
                ctx,
                &mut work.u,
                &work.d,
                &prev_slip,
                &work.points,
                &targets,
            )?;
            update_point_states(model, &work.u, &work.d, &prev_slip, params, &mut work.points)?;
            let (it_d, clip) = self.solve_phasefield(ctx, &mut work.d, &work.points)?;
            stats.newton_iters += it_u + it_d;
            stats.clipped += clip;
            let err = rel_diff(&work.u, &u_before).max(rel_diff(&work.d, &d_before));
            if std::env::var("SHEARPF_DEBUG_STAGGER").is_ok() {
                eprintln!(" sweep {}: err_u={:.3e} err_d={:.3e} dmax={:.4e} iters u{} d{}",
                    stats.sweeps, rel_diff(&work.u, &u_before), rel_diff(&work.d, &d_before),
                    work.d.iter().cloned().fold(0.0f64, f64::max), it_u, it_d);
            }
            if err <= self.config.stagger_tol {
                break;
            }
            if stats.sweeps >= self.config.max_stagger_iters {
                return Err(Error::NonConvergence {
                    iterations: stats.sweeps,
                    last_error: err,
                });
            }
        }
        // final displacement pass at the converged phase field so the
        // reported state satisfies equilibrium to the Newton tolerance
        let (it_u, maxd) = self.solve_displacement(
            ctx,
            &mut work.u,
            &work.d,
            &prev_slip,
            &work.points,
            &targets,
        )?;
        stats.newton_iters += it_u;
        stats.max_d = maxd;
        update_point_states(model, &work.u, &work.d, &prev_slip, params, &mut work.points)?;
        Ok((work, stats))
    }

    fn stored_energy(&self, u: &[f64], points: &[PointState]) -> f64 {
        let model = &self.problem.model;
        let mut e = 0.0;
        for (i, ps) in points.iter().enumerate() {
            let eps = model.element_strain(i, u);
            e += 0.5 * model.geo[i].area * ps.stress.double_dot(&eps);
        }
        e
    }

    fn internal_force_from_points(&self, points: &[PointState], f_int: &mut [f64]) {
        let model = &self.problem.model;
        f_int.fill(0.0);
        for (e, el) in model.mesh.elements.iter().enumerate() {
            let g = &model.geo[e];
            let s = points[e].stress;
            for i in 0..3 {
                f_int[2 * el[i]] += g.area * (g.dndx[i][0] * s.xx + g.dndx[i][1] * s.xy);
                f_int[2 * el[i] + 1] += g.area * (g.dndx[i][1] * s.yy + g.dndx[i][0] * s.xy);
            }
        }
    }

    /// Runs the full load program: optional static phase, then the adaptive
    /// main ramp over pseudo-time [0, 1].
    pub fn run(
        &self,
        mut on_accept: Option<&mut dyn FnMut(&FieldState, &StepRecord, &FemModel) -> Result<()>>,
    ) -> Result<RunOutput> {
        let model = &self.problem.model;
        let params = &self.problem.params;
        let mut diagnostics = RunDiagnostics::default();
        let mut state = FieldState::zero(model.n_nodes(), model.n_elements());

        // static phase: one elastic solve with damage frozen at zero
        if self.problem.has_static_phase {
            let mut ctx = PhaseContext::new(
                model,
                &self.problem.static_bcs,
                &self.problem.phase_fixed_nodes,
                &self.problem.tractions,
                self.problem.body_force,
            )?;
            let zero_slip = vec![0.0; model.n_elements()];
            let targets = ctx.map.bc_values(0.0, &state.u);
            self.solve_displacement(
                &mut ctx,
                &mut state.u,
                &state.d,
                &zero_slip,
                &state.points,
                &targets,
            )?;
            let hs = update_point_states(
                model,
                &state.u,
                &state.d,
                &zero_slip,
                params,
                &mut state.points,
            )?;
            if hs.any_slip {
                diagnostics.static_slip_elements = state
                    .points
                    .iter()
                    .filter(|p| p.history_slip > 0.0)
                    .count();
                // the slip history starts at zero; the static step only
                // provides the initial stress
                for p in state.points.iter_mut() {
                    p.history_slip = 0.0;
                    p.h_plus = p.h_t;
                }
            }
        }

        let mut ctx = PhaseContext::new(
            model,
            &self.problem.main_bcs,
            &self.problem.phase_fixed_nodes,
            &self.problem.tractions,
            self.problem.body_force,
        )?;
        let base_u = state.u.clone();
        if !self.problem.seed_slip.is_empty() {
            for &(e, v) in &self.problem.seed_slip {
                let p = &mut state.points[e];
                p.history_slip = p.history_slip.max(v);
                p.h_plus = p.h_t + p.history_slip;
            }
            // settle the seeded damage against the initial stress state
            let (settled, _) = self.staggered_step(&mut ctx, &state, 0.0, &base_u)?;
            state = settled;
        }
        let static_energy = self.stored_energy(&state.u, &state.points);
        let mut prev_f_int = vec![0.0; 2 * model.n_nodes()];
        self.internal_force_from_points(&state.points, &mut prev_f_int);

        let mut records: Vec<StepRecord> = Vec::new();
        let mut t = 0.0;
        let mut dt = self.config.dt_initial.min(self.config.dt_max);
        let mut step = 0usize;
        let mut work = 0.0f64;
        let mut peak_reaction = 0.0f64;

        while t < 1.0 - 1e-12 {
            let dt_step = dt.min(1.0 - t);
            match self.staggered_step(&mut ctx, &state, t + dt_step, &base_u) {
                Ok((new_state, sw)) => {
                    step += 1;
                    t += dt_step;
                    // trapezoidal work of the constraint forces plus the
                    // constant external loads
                    let mut dw = 0.0;
                    for &(dof, _) in &ctx.map.u_constrained {
                        let fc_prev = prev_f_int[dof] - ctx.f_ext[dof];
                        let fc_new = ctx.f_int[dof] - ctx.f_ext[dof];
                        dw += 0.5 * (fc_prev + fc_new) * (new_state.u[dof] - state.u[dof]);
                    }
                    for dof in 0..2 * model.n_nodes() {
                        dw += ctx.f_ext[dof] * (new_state.u[dof] - state.u[dof]);
                    }
                    work += dw;
                    let energy = self.stored_energy(&new_state.u, &new_state.points);
                    let gap = equilibrium_residual(&ctx.map, &ctx.f_int, &ctx.f_ext);
                    let rvec =
                        reaction_force(model, &ctx.map, &ctx.f_int, &self.problem.reaction_tag)?;
                    let reaction = rvec[0] * self.problem.reaction_dir[0]
                        + rvec[1] * self.problem.reaction_dir[1];
                    let mut d_drop = 0.0f64;
                    let mut max_d = 0.0f64;
                    for (new, old) in new_state.d.iter().zip(&state.d) {
                        d_drop = d_drop.max(old - new);
                        max_d = max_d.max(*new);
                    }
                    prev_f_int.copy_from_slice(&ctx.f_int);
                    state = new_state;
                    let rec = StepRecord {
                        step,
                        time: t,
                        dt: dt_step,
                        sweeps: sw.sweeps,
                        newton_iters: sw.newton_iters,
                        prescribed: t * self.problem.primary_target.abs(),
                        reaction,
                        reaction_vec: rvec,
                        work_external: work,
                        stored_energy: energy,
                        equilibrium_gap: gap,
                        clipped_dofs: sw.clipped,
                        max_d,
                        d_drop,
                    };
                    diagnostics.total_sweeps += sw.sweeps;
                    diagnostics.total_newton_iters += sw.newton_iters;
                    diagnostics.worst_d_drop = diagnostics.worst_d_drop.max(d_drop);
                    diagnostics.worst_equilibrium_gap = diagnostics.worst_equilibrium_gap.max(gap);
                    diagnostics.clipped_total += sw.clipped;
                    if let Some(hook) = on_accept.as_deref_mut() {
                        hook(&state, &rec, model)?;
                    }
                    peak_reaction = peak_reaction.max(rec.reaction);
                    let stop = self
                        .problem
                        .stop_after_peak_drop
                        .map(|frac| {
                            state.d.iter().any(|&x| x > 0.5) && rec.reaction < frac * peak_reaction
                        })
                        .unwrap_or(false);
                    records.push(rec);
                    if stop {
                        break;
                    }
                    if sw.sweeps <= 2 {
                        dt = (dt * self.config.dt_growth).min(self.config.dt_max);
                    }
                }
                Err(Error::NonConvergence { .. }) | Err(Error::LinearSolveFailure(_)) => {
                    diagnostics.rejected_steps += 1;
                    let cut = dt * self.config.dt_cut;
                    if cut < self.config.dt_min {
                        return Err(Error::AbortAtMinStep {
                            t,
                            dt: cut,
                            detail: format!(
                                "step {} rejected {} times",
                                step + 1,
                                diagnostics.rejected_steps
                            ),
                        });
                    }
                    dt = cut;
                }
                Err(e) => return Err(e),
            }
        }

        Ok(RunOutput {
            records,
            state,
            diagnostics,
            static_energy,
        })
    }
}

/// Convenience wrapper: build the engine and run the whole program.
pub fn run_load_program(
    problem: &Problem,
    config: &SolverConfig,
    on_accept: Option<&mut dyn FnMut(&FieldState, &StepRecord, &FemModel) -> Result<()>>,
) -> Result<RunOutput> {
    Engine::new(problem, config.clone())?.run(on_accept)
}
