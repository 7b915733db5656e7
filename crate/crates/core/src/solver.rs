//! Solvers for the reduced vortex equation `Δu = Be^u(Be^u − 1) + h`.
//!
//! Two independent paths are provided and cross-checked: damped Newton
//! iteration on the nodewise residual, and nonlinear conjugate-gradient
//! minimization of the discrete energy functional
//! `E(u) = ∫ |∇u|² + (Be^u − 1)² + 2hu dV_γ`
//! (the gradient term carries the flat measure since the conformal factors
//! cancel in two dimensions). Both drive the max-norm of the residual
//! `r = Δ₀u/b − (Be^u(Be^u − 1) + h₀/b)` below the tolerance.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{neumaier, GridSpec, ScalarGrid};
use crate::metric::ConformalFactor;
use crate::vortex::VortexConfiguration;

/// Fields larger than this trip the exponential overflow guard.
const U_CLAMP: f64 = 50.0;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Minimize,
    Newton,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub method: Method,
    /// Max-norm tolerance on the discrete residual.
    pub residual_tol: f64,
    /// Newton iteration cap.
    pub max_iterations: usize,
    /// Gradient-step cap for the minimizer.
    pub max_gradient_steps: usize,
    /// Optional ladder of coarser node counts solved first, with bicubic
    /// prolongation between levels.
    pub continuation: Option<Vec<usize>>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            method: Method::Both,
            residual_tol: 1e-10,
            max_iterations: 200,
            max_gradient_steps: 50_000,
            continuation: None,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::config("solver.residual_tol", "must be > 0"));
        }
        if let Some(ladder) = &self.continuation {
            if ladder.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(
                    "solver.continuation",
                    "ladder must be strictly increasing",
                ));
            }
        }
        Ok(())
    }
}

/// Convergence record for one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub method: Method,
    pub newton_iterations: Option<usize>,
    pub minimize_iterations: Option<usize>,
    pub final_residual: f64,
    pub final_energy: f64,
    /// Energy values after each accepted minimizer step (finest level).
    pub energy_history: Vec<f64>,
    /// Sup-norm disagreement between the two paths when `method = both`.
    pub cross_agreement_sup: Option<f64>,
    pub wall_time_s: f64,
}

/// Converged fields plus the convergence record.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: ScalarGrid,
    pub w: ScalarGrid,
    pub report: SolveReport,
}

/// Precomputed node samples for one (vortices, metric, lattice) triple.
///
/// The truncation boundary condition is `w = 0` on the ghost ring: the
/// physical field decays at unit exponential rate, while the split part `u`
/// alone carries the power-law tail `≈ μn/r²` of `−u₀`. The ghost data
/// `u_ghost = −u₀` therefore enters the residual as a fixed source on the
/// boundary-adjacent nodes and the energy as fixed edge offsets.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    spec: GridSpec,
    vc: VortexConfiguration,
    cf: ConformalFactor,
    b: ScalarGrid,
    h0: ScalarGrid,
    bw: ScalarGrid,
    u0: ScalarGrid,
    /// Ghost contributions to `Δ₀u`: `Σ_ghost u_ghost / Δ²` per node.
    bc_source: ScalarGrid,
    /// Ghost values per side, index order left/right = by row j,
    /// bottom/top = by column i.
    ghost: [Vec<f64>; 4],
}

impl DiscreteProblem {
    pub fn new(vc: &VortexConfiguration, cf: &ConformalFactor, spec: GridSpec) -> Result<Self> {
        let b = ScalarGrid::try_from_fn(spec, |x, y| cf.evaluate(x, y))?;
        let h0 = ScalarGrid::from_fn(spec, |x, y| vc.h0(x, y));
        let bw = ScalarGrid::from_fn(spec, |x, y| vc.b_weight(x, y));
        let u0 = ScalarGrid::from_fn(spec, |x, y| vc.u0(x, y));
        u0.assert_finite()?;

        let n = spec.nodes();
        let d = spec.spacing();
        let lo = spec.coord(0) - d;
        let hi = spec.coord(n - 1) + d;
        let ghost_left: Vec<f64> = (0..n).map(|j| -vc.u0(lo, spec.coord(j))).collect();
        let ghost_right: Vec<f64> = (0..n).map(|j| -vc.u0(hi, spec.coord(j))).collect();
        let ghost_bottom: Vec<f64> = (0..n).map(|i| -vc.u0(spec.coord(i), lo)).collect();
        let ghost_top: Vec<f64> = (0..n).map(|i| -vc.u0(spec.coord(i), hi)).collect();
        let mut bc_source = ScalarGrid::zeros(spec);
        let inv_d2 = 1.0 / (d * d);
        for j in 0..n {
            bc_source.set(0, j, bc_source.at(0, j) + ghost_left[j] * inv_d2);
            bc_source.set(n - 1, j, bc_source.at(n - 1, j) + ghost_right[j] * inv_d2);
        }
        for i in 0..n {
            bc_source.set(i, 0, bc_source.at(i, 0) + ghost_bottom[i] * inv_d2);
            bc_source.set(i, n - 1, bc_source.at(i, n - 1) + ghost_top[i] * inv_d2);
        }

        Ok(DiscreteProblem {
            spec,
            vc: vc.clone(),
            cf: cf.clone(),
            b,
            h0,
            bw,
            u0,
            bc_source,
            ghost: [ghost_left, ghost_right, ghost_bottom, ghost_top],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn vortices(&self) -> &VortexConfiguration {
        &self.vc
    }

    pub fn metric(&self) -> &ConformalFactor {
        &self.cf
    }

    pub fn metric_grid(&self) -> &ScalarGrid {
        &self.b
    }

    pub fn background_u0(&self) -> &ScalarGrid {
        &self.u0
    }

    pub fn b_weight_grid(&self) -> &ScalarGrid {
        &self.bw
    }

    /// `w = u₀ + u`.
    pub fn reconstruct_w(&self, u: &ScalarGrid) -> ScalarGrid {
        let mut w = u.clone();
        w.values_mut()
            .iter_mut()
            .zip(self.u0.values().iter())
            .for_each(|(wv, u0v)| *wv += u0v);
        w
    }

    /// `e^w` computed as `B·e^u` (exact zero at vortex cores).
    pub fn exp_w(&self, u: &ScalarGrid) -> ScalarGrid {
        let mut s = u.clone();
        s.values_mut()
            .par_iter_mut()
            .zip(self.bw.values().par_iter())
            .for_each(|(v, bw)| *v = bw * v.exp());
        s
    }

    fn guard(&self, u: &ScalarGrid) -> Result<()> {
        let m = u.max();
        if m > U_CLAMP {
            return Err(Error::Overflow { max_u: m });
        }
        Ok(())
    }

    /// Nodewise residual `r = Δ₀u/b − (Be^u(Be^u − 1) + h₀/b)`.
    pub fn residual(&self, u: &ScalarGrid) -> Result<ScalarGrid> {
        Ok(self.residual_aux(u)?.0)
    }

    /// Residual plus the `s = Be^u` samples it was built from.
    fn residual_aux(&self, u: &ScalarGrid) -> Result<(ScalarGrid, Vec<f64>)> {
        self.guard(u)?;
        let lap = u.laplacian0();
        let n = self.spec.nodes();
        let mut r = vec![0.0; n * n];
        let mut s = vec![0.0; n * n];
        r.par_chunks_mut(n)
            .zip(s.par_chunks_mut(n))
            .enumerate()
            .for_each(|(j, (rrow, srow))| {
                for i in 0..n {
                    let idx = j * n + i;
                    let bw = self.bw.values()[idx];
                    let be = bw * u.values()[idx].exp();
                    srow[i] = be;
                    let b = self.b.values()[idx];
                    rrow[i] = (lap.values()[idx] + self.bc_source.values()[idx]) / b
                        - (be * (be - 1.0) + self.h0.values()[idx] / b);
                }
            });
        let mut rg = ScalarGrid::zeros(self.spec);
        rg.values_mut().copy_from_slice(&r);
        Ok((rg, s))
    }

    /// Discrete energy `E(u)`; the kinetic term is the Dirichlet edge form,
    /// whose gradient is exactly the 5-point Laplacian, so the functional
    /// gradient identity `∂E/∂u_i = −2Δ²·b·r` holds to rounding.
    pub fn energy(&self, u: &ScalarGrid) -> Result<f64> {
        self.guard(u)?;
        // Ghost edges carry the fixed data g = −u₀: replace the homogeneous
        // edge contribution u² by (u − g)².
        let n_nodes = self.spec.nodes();
        let mut bc_correction = 0.0;
        let [gl, gr, gb, gt] = &self.ghost;
        for j in 0..n_nodes {
            let ul = u.at(0, j);
            let ur = u.at(n_nodes - 1, j);
            bc_correction += gl[j] * gl[j] - 2.0 * ul * gl[j];
            bc_correction += gr[j] * gr[j] - 2.0 * ur * gr[j];
        }
        for i in 0..n_nodes {
            let ub = u.at(i, 0);
            let ut = u.at(i, n_nodes - 1);
            bc_correction += gb[i] * gb[i] - 2.0 * ub * gb[i];
            bc_correction += gt[i] * gt[i] - 2.0 * ut * gt[i];
        }
        let kinetic = u.edge_form(u) + bc_correction;
        let n = self.spec.nodes();
        let d2 = self.spec.spacing() * self.spec.spacing();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                neumaier((0..n).map(|i| {
                    let idx = j * n + i;
                    let be = self.bw.values()[idx] * u.values()[idx].exp();
                    let t = be - 1.0;
                    t * t * self.b.values()[idx] + 2.0 * self.h0.values()[idx] * u.values()[idx]
                }))
            })
            .collect();
        Ok(kinetic + neumaier(rows.into_iter()) * d2)
    }

    /// Gradient of the discrete energy, `g_i = −2Δ²·b_i·r_i`.
    pub fn energy_gradient(&self, u: &ScalarGrid) -> Result<ScalarGrid> {
        let (r, _) = self.residual_aux(u)?;
        let d2 = self.spec.spacing() * self.spec.spacing();
        let mut g = r;
        g.values_mut()
            .par_iter_mut()
            .zip(self.b.values().par_iter())
            .for_each(|(gv, bv)| *gv *= -2.0 * d2 * bv);
        Ok(g)
    }

    /// Directional curvature `dᵀ(∂²E)d = 2·edge(d,d) + 2Δ²Σ b·s(2s−1)·d²`
    /// with `s = Be^u` supplied from the residual pass.
    fn curvature(&self, s: &[f64], d: &ScalarGrid) -> f64 {
        let n = self.spec.nodes();
        let d2 = self.spec.spacing() * self.spec.spacing();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                neumaier((0..n).map(|i| {
                    let idx = j * n + i;
                    let sv = s[idx];
                    let dv = d.values()[idx];
                    self.b.values()[idx] * sv * (2.0 * sv - 1.0) * dv * dv
                }))
            })
            .collect();
        2.0 * d.edge_form(d) + 2.0 * d2 * neumaier(rows.into_iter())
    }

    /// Apply `A = −Δ₀ + diag(c)` (the negated, metric-scaled Newton
    /// linearization) to a vector.
    fn apply_linearized(&self, c: &[f64], v: &ScalarGrid, out: &mut ScalarGrid) {
        let lap = v.laplacian0();
        out.values_mut()
            .par_iter_mut()
            .zip(lap.values().par_iter())
            .zip(v.values().par_iter())
            .zip(c.par_iter())
            .for_each(|(((o, l), vv), cc)| *o = -l + cc * vv);
    }
}

/// Jacobi-preconditioned conjugate gradients for the Newton step.
/// Returns `Err(())` on negative curvature (caller shifts and retries).
fn cg_solve(
    problem: &DiscreteProblem,
    c: &[f64],
    rhs: &ScalarGrid,
    rel_tol: f64,
    max_iter: usize,
) -> std::result::Result<ScalarGrid, ()> {
    let spec = *problem.spec();
    let d2 = spec.spacing() * spec.spacing();
    let precond: Vec<f64> = c.par_iter().map(|cc| 1.0 / (4.0 / d2 + cc.max(0.0))).collect();

    let mut x = ScalarGrid::zeros(spec);
    let mut r = rhs.clone();
    let rhs_norm = r.dot(&r).sqrt();
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let mut z = r.clone();
    z.values_mut()
        .par_iter_mut()
        .zip(precond.par_iter())
        .for_each(|(zv, m)| *zv *= m);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = ScalarGrid::zeros(spec);
    for _ in 0..max_iter {
        problem.apply_linearized(c, &p, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(());
        }
        let alpha = rz / pap;
        x.values_mut()
            .par_iter_mut()
            .zip(p.values().par_iter())
            .for_each(|(xv, pv)| *xv += alpha * pv);
        r.values_mut()
            .par_iter_mut()
            .zip(ap.values().par_iter())
            .for_each(|(rv, av)| *rv -= alpha * av);
        if r.dot(&r).sqrt() <= rel_tol * rhs_norm {
            return Ok(x);
        }
        z = r.clone();
        z.values_mut()
            .par_iter_mut()
            .zip(precond.par_iter())
            .for_each(|(zv, m)| *zv *= m);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.values_mut()
            .par_iter_mut()
            .zip(z.values().par_iter())
            .for_each(|(pv, zv)| *pv = zv + beta * *pv);
    }
    Ok(x)
}

/// Damped Newton on the residual. Returns `(u, iterations)`.
pub fn newton_solve(
    problem: &DiscreteProblem,
    u_init: ScalarGrid,
    tol: f64,
    max_iterations: usize,
) -> Result<(ScalarGrid, usize)> {
    let spec = *problem.spec();
    let n = spec.nodes();
    let mut u = u_init;
    let mut shift = 0.0f64;
    for iter in 0..max_iterations {
        let (r, s) = problem.residual_aux(&u)?;
        let rn = r.max_abs();
        if rn <= tol {
            return Ok((u, iter));
        }
        // c = b·s(2s−1) + shift, s = Be^u.
        let mut c = vec![0.0; n * n];
        c.par_iter_mut()
            .zip(s.par_iter())
            .zip(problem.b.values().par_iter())
            .for_each(|((cc, sv), bv)| *cc = bv * sv * (2.0 * sv - 1.0) + shift);
        let mut rhs = r.clone();
        rhs.values_mut()
            .par_iter_mut()
            .zip(problem.b.values().par_iter())
            .for_each(|(rv, bv)| *rv *= bv);
        // Inexact Newton forcing term: tighter as the residual shrinks.
        let rel_tol = (1e-2f64).min(0.1 * rn.sqrt()).max(1e-12);
        let delta = loop {
            match cg_solve(problem, &c, &rhs, rel_tol, 20_000) {
                Ok(d) => break d,
                Err(()) => {
                    // Indefinite linearization far from the solution; add a
                    // Levenberg-style diagonal shift and rebuild.
                    shift = if shift == 0.0 { 1e-2 } else { shift * 4.0 };
                    c.par_iter_mut()
                        .zip(s.par_iter())
                        .zip(problem.b.values().par_iter())
                        .for_each(|((cc, sv), bv)| *cc = bv * sv * (2.0 * sv - 1.0) + shift);
                    if shift > 1e6 {
                        return Err(Error::NonConvergence {
                            iterations: iter,
                            residual: rn,
                        });
                    }
                }
            }
        };
        // Armijo backtracking on ‖r‖².
        let r2 = r.dot(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1e-10 {
            let mut trial = u.clone();
            trial
                .values_mut()
                .par_iter_mut()
                .zip(delta.values().par_iter())
                .for_each(|(tv, dv)| *tv += alpha * dv);
            match problem.residual(&trial) {
                Ok(rt) => {
                    let rt2 = rt.dot(&rt);
                    if rt2 <= (1.0 - 2.0 * ARMIJO_C1 * alpha) * r2 {
                        u = trial;
                        accepted = true;
                        break;
                    }
                }
                Err(Error::Overflow { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= BACKTRACK;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: rn,
            });
        }
        if alpha == 1.0 {
            shift = 0.0;
        }
    }
    let rn = problem.residual(&u)?.max_abs();
    if rn <= tol {
        Ok((u, max_iterations))
    } else {
        Err(Error::NonConvergence {
            iterations: max_iterations,
            residual: rn,
        })
    }
}

/// Polak-Ribière nonlinear CG on the discrete energy with an exact
/// quadratic trial step and Armijo acceptance. Returns
/// `(u, iterations, energy_history)`.
pub fn minimize_solve(
    problem: &DiscreteProblem,
    u_init: ScalarGrid,
    tol: f64,
    max_steps: usize,
) -> Result<(ScalarGrid, usize, Vec<f64>)> {
    let spec = *problem.spec();
    let d2 = spec.spacing() * spec.spacing();
    let mut u = u_init;
    let mut energy = problem.energy(&u)?;
    let mut history = vec![energy];
    let mut g_prev: Option<ScalarGrid> = None;
    let mut dir: Option<ScalarGrid> = None;

    for iter in 0..max_steps {
        let (r, s) = problem.residual_aux(&u)?;
        if r.max_abs() <= tol {
            return Ok((u, iter, history));
        }
        let mut g = r.clone();
        g.values_mut()
            .par_iter_mut()
            .zip(problem.b.values().par_iter())
            .for_each(|(gv, bv)| *gv *= -2.0 * d2 * bv);

        let mut d = match (&g_prev, dir.take()) {
            (Some(gp), Some(mut d)) => {
                let gg = gp.dot(gp);
                let mut beta = (g.dot(&g) - g.dot(gp)) / gg;
                if !beta.is_finite() || beta < 0.0 {
                    beta = 0.0;
                }
                d.values_mut()
                    .par_iter_mut()
                    .zip(g.values().par_iter())
                    .for_each(|(dv, gv)| *dv = -gv + beta * *dv);
                d
            }
            _ => {
                let mut d = g.clone();
                d.values_mut().par_iter_mut().for_each(|v| *v = -*v);
                d
            }
        };

        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            // Restart along steepest descent.
            d = g.clone();
            d.values_mut().par_iter_mut().for_each(|v| *v = -*v);
            slope = g.dot(&d);
        }

        let kappa = problem.curvature(&s, &d);
        let mut alpha = if kappa > 0.0 {
            -slope / kappa
        } else {
            d2 / d.max_abs().max(1e-30)
        };

        // Near the minimum the achievable energy decrease (~‖r‖²) drops
        // below the floating-point resolution of E itself, so an
        // energy-measuring line search can only stall. The problem is
        // locally quadratic there; take the exact model step directly.
        let model_decrease = -0.5 * alpha * slope;
        if kappa > 0.0 && model_decrease < 1e-12 * (1.0 + energy.abs()) {
            u.values_mut()
                .par_iter_mut()
                .zip(d.values().par_iter())
                .for_each(|(tv, dv)| *tv += alpha * dv);
            problem.guard(&u)?;
            g_prev = Some(g);
            dir = Some(d);
            continue;
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = u.clone();
            trial
                .values_mut()
                .par_iter_mut()
                .zip(d.values().par_iter())
                .for_each(|(tv, dv)| *tv += alpha * dv);
            match problem.energy(&trial) {
                Ok(e_trial) => {
                    if e_trial <= energy + ARMIJO_C1 * alpha * slope {
                        u = trial;
                        energy = e_trial;
                        history.push(energy);
                        accepted = true;
                        break;
                    }
                }
                Err(Error::Overflow { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= BACKTRACK;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: r.max_abs(),
            });
        }
        g_prev = Some(g);
        dir = Some(d);
    }
    let rn = problem.residual(&u)?.max_abs();
    if rn <= tol {
        Ok((u, max_steps, history))
    } else {
        Err(Error::NonConvergence {
            iterations: max_steps,
            residual: rn,
        })
    }
}

fn prolong(coarse: &ScalarGrid, fine_spec: GridSpec) -> ScalarGrid {
    ScalarGrid::from_fn(fine_spec, |x, y| coarse.sample_bicubic(x, y))
}

fn run_ladder(
    vc: &VortexConfiguration,
    cf: &ConformalFactor,
    settings: &SolveSettings,
    half_width: f64,
    final_nodes: usize,
    newton: bool,
) -> Result<(DiscreteProblem, ScalarGrid, usize, Vec<f64>)> {
    let mut levels: Vec<usize> = settings
        .continuation
        .clone()
        .unwrap_or_default()
        .into_iter()
        .filter(|&n| n < final_nodes)
        .collect();
    levels.push(final_nodes);

    let mut u: Option<ScalarGrid> = None;
    let mut last: Option<(DiscreteProblem, ScalarGrid, usize, Vec<f64>)> = None;
    for (li, &nodes) in levels.iter().enumerate() {
        let spec = GridSpec::for_vortices(half_width, nodes, vc)?;
        let problem = DiscreteProblem::new(vc, cf, spec)?;
        let init = match u.take() {
            Some(prev) => prolong(&prev, spec),
            None => ScalarGrid::zeros(spec),
        };
        let is_final = li == levels.len() - 1;
        // Coarse levels only need to seed the next one.
        let tol = if is_final {
            settings.residual_tol
        } else {
            settings.residual_tol.max(1e-8)
        };
        let (sol, iters, history) = if newton {
            let (sol, iters) = newton_solve(&problem, init, tol, settings.max_iterations)?;
            (sol, iters, Vec::new())
        } else {
            minimize_solve(&problem, init, tol, settings.max_gradient_steps)?
        };
        u = Some(sol.clone());
        last = Some((problem, sol, iters, history));
    }
    Ok(last.expect("ladder has at least one level"))
}

/// Solve the reduced equation for a full configuration, reconstruct
/// `w = u₀ + u`, and report convergence. Zero-vortex runs return the
/// trivial solution after a residual check.
pub fn solve(
    vc: &VortexConfiguration,
    cf: &ConformalFactor,
    settings: &SolveSettings,
    half_width: f64,
    nodes: usize,
) -> Result<(DiscreteProblem, SolveOutcome)> {
    settings.validate()?;
    let started = Instant::now();

    if vc.total_vorticity() == 0 {
        let spec = GridSpec::for_vortices(half_width, nodes, vc)?;
        let problem = DiscreteProblem::new(vc, cf, spec)?;
        let u = ScalarGrid::zeros(spec);
        let rn = problem.residual(&u)?.max_abs();
        let energy = problem.energy(&u)?;
        let w = problem.reconstruct_w(&u);
        let report = SolveReport {
            converged: rn <= settings.residual_tol,
            method: settings.method,
            newton_iterations: Some(0),
            minimize_iterations: Some(0),
            final_residual: rn,
            final_energy: energy,
            energy_history: vec![energy],
            cross_agreement_sup: None,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        return Ok((problem, SolveOutcome { u, w, report }));
    }

    let newton_path = matches!(settings.method, Method::Newton | Method::Both);
    let minimize_path = matches!(settings.method, Method::Minimize | Method::Both);

    let newton_result = if newton_path {
        Some(run_ladder(vc, cf, settings, half_width, nodes, true)?)
    } else {
        None
    };
    let minimize_result = if minimize_path {
        Some(run_ladder(vc, cf, settings, half_width, nodes, false)?)
    } else {
        None
    };

    let cross = match (&newton_result, &minimize_result) {
        (Some((_, un, _, _)), Some((_, um, _, _))) => {
            let sup = un
                .values()
                .iter()
                .zip(um.values().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            Some(sup)
        }
        _ => None,
    };

    let (problem, u, newton_iters, minimize_iters, history) = match (newton_result, minimize_result)
    {
        (Some((p, u, it, _)), Some((_, _, itm, hist))) => (p, u, Some(it), Some(itm), hist),
        (Some((p, u, it, _)), None) => (p, u, Some(it), None, Vec::new()),
        (None, Some((p, u, itm, hist))) => (p, u, None, Some(itm), hist),
        (None, None) => unreachable!(),
    };

    let rn = problem.residual(&u)?.max_abs();
    let energy = problem.energy(&u)?;
    let w = problem.reconstruct_w(&u);
    let report = SolveReport {
        converged: rn <= settings.residual_tol,
        method: settings.method,
        newton_iterations: newton_iters,
        minimize_iterations: minimize_iters,
        final_residual: rn,
        final_energy: energy,
        energy_history: history,
        cross_agreement_sup: cross,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((problem, SolveOutcome { u, w, report }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vortex::Vortex;

    fn single_vortex(mu: f64) -> VortexConfiguration {
        VortexConfiguration::new(
            vec![Vortex {
                x: 0.0,
                y: 0.0,
                multiplicity: 1,
            }],
            mu,
        )
        .unwrap()
    }

    #[test]
    fn zero_vortex_residual_and_energy_vanish() {
        let vc = VortexConfiguration::empty(1.0).unwrap();
        let cf = ConformalFactor::flat();
        let spec = GridSpec::new(8.0, 65).unwrap();
        let p = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let u = ScalarGrid::zeros(spec);
        assert_eq!(p.residual(&u).unwrap().max_abs(), 0.0);
        assert_eq!(p.energy(&u).unwrap(), 0.0);
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let vc = single_vortex(1.0);
        let cf = ConformalFactor::gaussian_bump(0.8, 2.0, (0.3, -0.2)).unwrap();
        let spec = GridSpec::for_vortices(6.0, 33, &vc).unwrap();
        let p = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let u = ScalarGrid::from_fn(spec, |x, y| -0.3 * (-(x * x + y * y) / 5.0).exp());
        let g = p.energy_gradient(&u).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = spec.nodes();
        let eps = 1e-6;
        for _ in 0..20 {
            let i = rng.gen_range(1..n - 1);
            let j = rng.gen_range(1..n - 1);
            let mut up = u.clone();
            up.set(i, j, u.at(i, j) + eps);
            let mut dn = u.clone();
            dn.set(i, j, u.at(i, j) - eps);
            let fd = (p.energy(&up).unwrap() - p.energy(&dn).unwrap()) / (2.0 * eps);
            let gv = g.at(i, j);
            let scale = gv.abs().max(1e-8);
            assert!(
                (fd - gv).abs() / scale < 1e-5,
                "node ({i},{j}): fd {fd} vs grad {gv}"
            );
        }
    }

    #[test]
    fn gradient_is_minus_two_b_r_d2() {
        let vc = single_vortex(1.0);
        let cf = ConformalFactor::flat();
        let spec = GridSpec::for_vortices(6.0, 33, &vc).unwrap();
        let p = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let u = ScalarGrid::from_fn(spec, |x, y| -0.1 * (-(x * x + y * y) / 3.0).exp());
        let g = p.energy_gradient(&u).unwrap();
        let r = p.residual(&u).unwrap();
        let d2 = spec.spacing() * spec.spacing();
        for (gv, (rv, bv)) in g
            .values()
            .iter()
            .zip(r.values().iter().zip(p.metric_grid().values().iter()))
        {
            assert!((gv - (-2.0 * d2 * bv * rv)).abs() <= 1e-12 * gv.abs().max(1e-300) + 1e-18);
        }
    }

    #[test]
    fn overflow_guard_trips() {
        let vc = single_vortex(1.0);
        let cf = ConformalFactor::flat();
        let spec = GridSpec::for_vortices(6.0, 33, &vc).unwrap();
        let p = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let u = ScalarGrid::from_fn(spec, |_, _| 60.0);
        assert!(matches!(p.residual(&u), Err(Error::Overflow { .. })));
    }

    #[test]
    fn newton_converges_single_vortex_small_grid() {
        let vc = single_vortex(1.0);
        let cf = ConformalFactor::flat();
        let spec = GridSpec::for_vortices(12.0, 129, &vc).unwrap();
        let p = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let (u, iters) = newton_solve(&p, ScalarGrid::zeros(spec), 1e-10, 50).unwrap();
        assert!(iters < 50);
        assert!(p.residual(&u).unwrap().max_abs() <= 1e-10);
        // Maximum principle on the reconstructed field.
        let w = p.reconstruct_w(&u);
        assert!(w.max() <= 1e-8, "max w = {}", w.max());
    }

    #[test]
    fn minimizer_agrees_with_newton_small_grid() {
        let vc = single_vortex(1.0);
        let cf = ConformalFactor::flat();
        let spec = GridSpec::for_vortices(12.0, 129, &vc).unwrap();
        let p = DiscreteProblem::new(&vc, &cf, spec).unwrap();
        let (un, _) = newton_solve(&p, ScalarGrid::zeros(spec), 1e-10, 50).unwrap();
        let (um, _, hist) = minimize_solve(&p, ScalarGrid::zeros(spec), 1e-10, 50_000).unwrap();
        let sup = un
            .values()
            .iter()
            .zip(um.values().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= 1e-6, "sup deviation {sup}");
        // Monotone energy history.
        assert!(hist.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn solve_zero_vortex_returns_trivial() {
        let vc = VortexConfiguration::empty(1.0).unwrap();
        let cf = ConformalFactor::flat();
        let settings = SolveSettings::default();
        let (_, outcome) = solve(&vc, &cf, &settings, 8.0, 65).unwrap();
        assert!(outcome.report.converged);
        assert_eq!(outcome.u.max_abs(), 0.0);
        assert_eq!(outcome.w.max_abs(), 0.0);
    }

    #[test]
    fn settings_validation() {
        let mut s = SolveSettings::default();
        s.residual_tol = 0.0;
        assert!(s.validate().is_err());
        let mut s = SolveSettings::default();
        s.continuation = Some(vec![129, 129]);
        assert!(s.validate().is_err());
    }
}
