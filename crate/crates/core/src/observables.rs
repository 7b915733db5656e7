//! Physical observables reconstructed from the converged field `w`.
//!
//! Rescaled dimensionless units `e = v = κ = 1` throughout; the upper-sign
//! (positive flux) branch of the self-duality equations is fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;
use crate::solver::DiscreteProblem;

/// Exponential decay fit `−w̄(r) ≈ a·e^{−b·r}` on a radial window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a_fit: f64,
    pub b_fit: f64,
    pub window: (f64, f64),
}

/// The full observable set for one converged run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    /// Magnetic flux `Φ = ∫ B̃ dV_γ`; quantized to `2πn`.
    pub flux: f64,
    /// BPS energy; saturates at `πn`.
    pub energy: f64,
    /// Spin by direct quadrature of `(1/8)∫ x^i ∂_i(e^w−1)² b dz`.
    pub spin_direct: f64,
    /// Spin via integration by parts, `−(1/8)∫ (e^w−1)²(2b + x^i∂_i b) dz`.
    pub spin_by_parts: f64,
    pub decay_fit: Option<DecayFit>,
    /// Populated when the decay window contains nonnegative averages
    /// (domain too small for the asymptotic regime).
    pub decay_fit_error: Option<String>,
    pub w_max: f64,
    /// Temporal gauge potential at each vortex core (always 1/2).
    pub a0_core_values: Vec<f64>,
}

/// `B̃ = ½ e^w (1 − e^w)`, the dimensionless magnetic field.
pub fn magnetic_field(w: &ScalarGrid) -> ScalarGrid {
    let mut out = w.clone();
    out.values_mut().iter_mut().for_each(|v| {
        let ew = v.exp();
        *v = 0.5 * ew * (1.0 - ew);
    });
    out
}

/// Temporal gauge potential `A₀ = B̃/e^w = ½(1 − e^w)`, finite at cores.
pub fn temporal_potential(w: &ScalarGrid) -> ScalarGrid {
    let mut out = w.clone();
    out.values_mut().iter_mut().for_each(|v| {
        *v = 0.5 * (1.0 - v.exp());
    });
    out
}

/// Magnetic flux `Φ = ∫ B̃ b dz`.
pub fn total_flux(w: &ScalarGrid, metric_grid: &ScalarGrid) -> f64 {
    magnetic_field(w).integrate_weighted(metric_grid)
}

/// Gradient of `w` with the singular part taken analytically:
/// `∇w = ∇u₀ (closed form) + ∇₀u (central differences)`.
pub fn grad_w(problem: &DiscreteProblem, u: &ScalarGrid) -> (ScalarGrid, ScalarGrid) {
    let (mut gx, mut gy) = u.gradient0();
    let spec = *u.spec();
    let n = spec.nodes();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = spec.node(i, j);
            let (ax, ay) = problem.vortices().grad_u0(x, y);
            gx.set(i, j, gx.at(i, j) + ax);
            gy.set(i, j, gy.at(i, j) + ay);
        }
    }
    (gx, gy)
}

/// BPS energy `E = ∫ [(b/4) e^w(1−e^w)² + (1/4) e^w |∇₀w|²] dz`.
pub fn total_energy(problem: &DiscreteProblem, u: &ScalarGrid) -> f64 {
    let ew = problem.exp_w(u);
    let (gx, gy) = grad_w(problem, u);
    let b = problem.metric_grid();
    let mut density = ew.clone();
    let n = u.spec().nodes();
    for j in 0..n {
        for i in 0..n {
            let e = ew.at(i, j);
            let t = 1.0 - e;
            let k = gx.at(i, j) * gx.at(i, j) + gy.at(i, j) * gy.at(i, j);
            density.set(i, j, 0.25 * b.at(i, j) * e * t * t + 0.25 * e * k);
        }
    }
    density.integrate_flat()
}

/// Spin by direct quadrature and by its integration-by-parts twin.
pub fn spin(problem: &DiscreteProblem, u: &ScalarGrid) -> Result<(f64, f64)> {
    let ew = problem.exp_w(u);
    let spec = *u.spec();
    let n = spec.nodes();
    let mut f = ew.clone();
    f.values_mut().iter_mut().for_each(|v| {
        let t = *v - 1.0;
        *v = t * t;
    });
    let (fx, fy) = f.gradient0();
    let mut direct_integrand = ScalarGrid::zeros(spec);
    let mut parts_integrand = ScalarGrid::zeros(spec);
    let cf = problem.metric();
    let b = problem.metric_grid();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = spec.node(i, j);
            direct_integrand.set(i, j, (x * fx.at(i, j) + y * fy.at(i, j)) * b.at(i, j));
            let (bx, by) = cf.gradient(x, y)?;
            parts_integrand.set(i, j, f.at(i, j) * (2.0 * b.at(i, j) + x * bx + y * by));
        }
    }
    Ok((
        0.125 * direct_integrand.integrate_flat(),
        -0.125 * parts_integrand.integrate_flat(),
    ))
}

/// Spatial gauge potential `eA_i = ∂_iΘ − ε_ij ∂_j(w/2)` on the lattice plus
/// a mask flagging nodes within `2Δ` of a vortex core, where the phase
/// gradient is too large for the stencils.
pub fn gauge_potential(
    problem: &DiscreteProblem,
    u: &ScalarGrid,
) -> (ScalarGrid, ScalarGrid, Vec<bool>) {
    let spec = *u.spec();
    let n = spec.nodes();
    let (wx, wy) = grad_w(problem, u);
    let mut ax = ScalarGrid::zeros(spec);
    let mut ay = ScalarGrid::zeros(spec);
    let mut mask = vec![false; n * n];
    let vc = problem.vortices();
    let r_mask = 2.0 * spec.spacing();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = spec.node(i, j);
            let (tx, ty) = vc.grad_theta(x, y);
            ax.set(i, j, tx - 0.5 * wy.at(i, j));
            ay.set(i, j, ty + 0.5 * wx.at(i, j));
            if vc.min_dist2(x, y) < r_mask * r_mask {
                mask[j * n + i] = true;
            }
        }
    }
    (ax, ay, mask)
}

/// Max deviation of `−curl(eA)` from `b·B̃`, relative to `max|b·B̃|`, over
/// nodes at distance `≥ exclusion` from every core and off the boundary ring.
pub fn curl_check(problem: &DiscreteProblem, u: &ScalarGrid, exclusion: f64) -> f64 {
    let (ax, ay, _) = gauge_potential(problem, u);
    let (_, axy) = ax.gradient0();
    let (ayx, _) = ay.gradient0();
    let w = problem.reconstruct_w(u);
    let bt = magnetic_field(&w);
    let spec = *u.spec();
    let n = spec.nodes();
    let b = problem.metric_grid();
    let scale = (0..n * n)
        .map(|k| (b.values()[k] * bt.values()[k]).abs())
        .fold(0.0f64, f64::max);
    let vc = problem.vortices();
    let mut worst: f64 = 0.0;
    for j in 2..n - 2 {
        for i in 2..n - 2 {
            let (x, y) = spec.node(i, j);
            if vc.min_dist2(x, y) < exclusion * exclusion {
                continue;
            }
            let curl = ayx.at(i, j) - axy.at(i, j);
            let dev = (-curl - b.at(i, j) * bt.at(i, j)).abs();
            worst = worst.max(dev / scale);
        }
    }
    worst
}

/// Circulation `∮ eA·dl` around the centered square loop of the given
/// half-side, by trapezoidal sampling of the interpolated potential.
pub fn circulation(problem: &DiscreteProblem, u: &ScalarGrid, half_side: f64) -> f64 {
    let (ax, ay, _) = gauge_potential(problem, u);
    let spec = *u.spec();
    let step = spec.spacing();
    let m = (2.0 * half_side / step).ceil() as usize;
    let ds = 2.0 * half_side / m as f64;
    let mut total = 0.0;
    // Counterclockwise: bottom, right, top, left.
    for k in 0..m {
        let t = -half_side + (k as f64 + 0.5) * ds;
        total += ax.sample_bilinear(t, -half_side) * ds;
        total += ay.sample_bilinear(half_side, t) * ds;
        total -= ax.sample_bilinear(-t, half_side) * ds;
        total -= ay.sample_bilinear(-half_side, -t) * ds;
    }
    total
}

/// Angular average of `w` over `rays` directions at radius `r` (bilinear
/// interpolation).
pub fn angular_average(w: &ScalarGrid, r: f64, rays: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..rays {
        let th = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
        s += w.sample_bilinear(r * th.cos(), r * th.sin());
    }
    s / rays as f64
}

/// Least-squares fit of `ln(−w̄(r)) = ln a − b·r` on `[r₁, r₂]`; the
/// amplitude is then inflated to the envelope so that
/// `−a·e^{−b·r} ≤ w̄(r) < 0` holds across the window.
pub fn fit_decay(w: &ScalarGrid, window: (f64, f64)) -> Result<DecayFit> {
    let (r1, r2) = window;
    let spec = *w.spec();
    if !(r1 > 0.0 && r2 > r1) || r2 > spec.half_width() - spec.spacing() {
        return Err(Error::config(
            "decay_window",
            format!("invalid window [{r1}, {r2}] for half-width {}", spec.half_width()),
        ));
    }
    let step = spec.spacing();
    let m = ((r2 - r1) / step).floor() as usize + 1;
    let mut rs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for k in 0..m {
        let r = r1 + k as f64 * step;
        let wbar = angular_average(w, r, 64);
        if !(wbar < 0.0) {
            return Err(Error::DecayWindow { r1, r2 });
        }
        rs.push(r);
        ys.push((-wbar).ln());
    }
    let nf = rs.len() as f64;
    let sr: f64 = rs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let srr: f64 = rs.iter().map(|r| r * r).sum();
    let sry: f64 = rs.iter().zip(ys.iter()).map(|(r, y)| r * y).sum();
    let slope = (nf * sry - sr * sy) / (nf * srr - sr * sr);
    let b_fit = -slope;
    // Envelope amplitude: smallest a with −a e^{−b r} ≤ w̄ everywhere.
    let ln_a = rs
        .iter()
        .zip(ys.iter())
        .map(|(r, y)| y + b_fit * r)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayFit {
        a_fit: ln_a.exp(),
        b_fit,
        window,
    })
}

impl ObservableSet {
    /// Compute the full set from a converged `u`.
    pub fn compute(
        problem: &DiscreteProblem,
        u: &ScalarGrid,
        decay_window: Option<(f64, f64)>,
    ) -> Result<ObservableSet> {
        let w = problem.reconstruct_w(u);
        let b = problem.metric_grid();
        let flux = total_flux(&w, b);
        let energy = total_energy(problem, u);
        let (spin_direct, spin_by_parts) = spin(problem, u)?;
        let vc = problem.vortices();
        let a0_core_values: Vec<f64> = vc
            .vortices()
            .iter()
            .map(|v| {
                // e^w = B·e^u with B(z_k) = 0 exactly.
                let eu = u.sample_bilinear(v.x, v.y).exp();
                0.5 * (1.0 - vc.b_weight(v.x, v.y) * eu)
            })
            .collect();
        let l = problem.spec().half_width();
        let window = decay_window.unwrap_or((0.5 * l, l - 2.0));
        let (decay_fit, decay_fit_error) = if vc.total_vorticity() == 0 {
            (None, None)
        } else {
            match fit_decay(&w, window) {
                Ok(fit) => (Some(fit), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        Ok(ObservableSet {
            flux,
            energy,
            spin_direct,
            spin_by_parts,
            decay_fit,
            decay_fit_error,
            w_max: w.max(),
            a0_core_values,
        })
    }

    /// All-zero set for trivial (no-vortex) runs.
    pub fn trivial() -> ObservableSet {
        ObservableSet {
            flux: 0.0,
            energy: 0.0,
            spin_direct: 0.0,
            spin_by_parts: 0.0,
            decay_fit: None,
            decay_fit_error: None,
            w_max: 0.0,
            a0_core_values: Vec::new(),
        }
    }
}

/// Max of `|b·B̃ + ½Δ₀w|` over nodes at distance `≥ exclusion` from every
/// core and off the boundary ring: the pointwise self-duality residual.
pub fn selfdual_residual(problem: &DiscreteProblem, u: &ScalarGrid, exclusion: f64) -> f64 {
    let w = problem.reconstruct_w(u);
    let bt = magnetic_field(&w);
    let lap = w.laplacian0();
    let spec = *u.spec();
    let n = spec.nodes();
    let b = problem.metric_grid();
    let vc = problem.vortices();
    let mut worst: f64 = 0.0;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let (x, y) = spec.node(i, j);
            if vc.min_dist2(x, y) < exclusion * exclusion {
                continue;
            }
            worst = worst.max((b.at(i, j) * bt.at(i, j) + 0.5 * lap.at(i, j)).abs());
        }
    }
    worst
}
