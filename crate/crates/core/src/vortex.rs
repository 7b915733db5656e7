//! Vortex data and the singularity-splitting background fields.
//!
//! The regular split `w = u₀ + u` uses the closed forms
//! `u₀(z) = −Σ_k n_k ln(1 + μ|z−z_k|⁻²)`,
//! `h₀(z) = 4 Σ_k n_k μ/(μ+|z−z_k|²)²` and
//! `B(z) = e^{u₀} = Π_k (|z−z_k|²/(μ+|z−z_k|²))^{n_k}`,
//! so that `Δ₀u₀ = −h₀` away from the vortex points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ConformalFactor;

/// A vortex point with an integer multiplicity (order of the Higgs zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "n")]
    pub multiplicity: u32,
}

/// Vortex locations with multiplicities and the split regulator `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexConfiguration {
    vortices: Vec<Vortex>,
    mu: f64,
}

impl VortexConfiguration {
    /// Build a configuration; coincident points are merged into summed
    /// multiplicities.
    pub fn new(vortices: Vec<Vortex>, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config("mu", "must be finite and > 0"));
        }
        let mut merged: Vec<Vortex> = Vec::new();
        for v in vortices {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::config("vortices", "coordinates must be finite"));
            }
            if v.multiplicity == 0 {
                return Err(Error::config("vortices.n", "multiplicity must be >= 1"));
            }
            match merged.iter_mut().find(|m| m.x == v.x && m.y == v.y) {
                Some(m) => m.multiplicity += v.multiplicity,
                None => merged.push(v),
            }
        }
        Ok(VortexConfiguration {
            vortices: merged,
            mu,
        })
    }

    /// The zero-vortex configuration (`n = 0`).
    pub fn empty(mu: f64) -> Result<Self> {
        Self::new(Vec::new(), mu)
    }

    pub fn vortices(&self) -> &[Vortex] {
        &self.vortices
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Same vortex set with a different regulator.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.vortices.clone(), mu)
    }

    /// Total vorticity `n = Σ_k n_k`.
    pub fn total_vorticity(&self) -> u32 {
        self.vortices.iter().map(|v| v.multiplicity).sum()
    }

    /// Squared distance from a point to the nearest vortex.
    pub fn min_dist2(&self, x: f64, y: f64) -> f64 {
        self.vortices
            .iter()
            .map(|v| {
                let (dx, dy) = (x - v.x, y - v.y);
                dx * dx + dy * dy
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `u₀` at a point; `−∞` sentinel exactly at a vortex point.
    pub fn u0(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for v in &self.vortices {
            let (dx, dy) = (x - v.x, y - v.y);
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                return f64::NEG_INFINITY;
            }
            s -= v.multiplicity as f64 * (self.mu / r2).ln_1p();
        }
        s
    }

    /// `h₀` at a point (always finite and positive for `n ≥ 1`).
    pub fn h0(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for v in &self.vortices {
            let (dx, dy) = (x - v.x, y - v.y);
            let r2 = dx * dx + dy * dy;
            let d = self.mu + r2;
            s += 4.0 * v.multiplicity as f64 * self.mu / (d * d);
        }
        s
    }

    /// `h = h₀/b`.
    pub fn h(&self, cf: &ConformalFactor, x: f64, y: f64) -> Result<f64> {
        Ok(self.h0(x, y) / cf.evaluate(x, y)?)
    }

    /// Product-form weight `B = e^{u₀} ∈ [0, 1)`; exactly 0 at vortex points.
    pub fn b_weight(&self, x: f64, y: f64) -> f64 {
        let mut p = 1.0;
        for v in &self.vortices {
            let (dx, dy) = (x - v.x, y - v.y);
            let r2 = dx * dx + dy * dy;
            p *= (r2 / (self.mu + r2)).powi(v.multiplicity as i32);
        }
        p
    }

    /// Analytic gradient of `u₀`.
    pub fn grad_u0(&self, x: f64, y: f64) -> (f64, f64) {
        let (mut gx, mut gy) = (0.0, 0.0);
        for v in &self.vortices {
            let (dx, dy) = (x - v.x, y - v.y);
            let r2 = dx * dx + dy * dy;
            let f = 2.0 * v.multiplicity as f64 * self.mu / (r2 * (r2 + self.mu));
            gx += f * dx;
            gy += f * dy;
        }
        (gx, gy)
    }

    /// Analytic gradient of the multivalued phase `Θ = Σ n_k arg(z−z_k)`.
    pub fn grad_theta(&self, x: f64, y: f64) -> (f64, f64) {
        let (mut gx, mut gy) = (0.0, 0.0);
        for v in &self.vortices {
            let (dx, dy) = (x - v.x, y - v.y);
            let r2 = dx * dx + dy * dy;
            gx -= v.multiplicity as f64 * dy / r2;
            gy += v.multiplicity as f64 * dx / r2;
        }
        (gx, gy)
    }
}

/// Bundled closed-form background evaluators for one vortex configuration.
#[derive(Debug, Clone)]
pub struct BackgroundFields {
    vc: VortexConfiguration,
}

impl BackgroundFields {
    pub fn new(vc: VortexConfiguration) -> Self {
        BackgroundFields { vc }
    }

    pub fn configuration(&self) -> &VortexConfiguration {
        &self.vc
    }

    pub fn u0(&self, x: f64, y: f64) -> f64 {
        self.vc.u0(x, y)
    }

    pub fn h0(&self, x: f64, y: f64) -> f64 {
        self.vc.h0(x, y)
    }

    pub fn b_weight(&self, x: f64, y: f64) -> f64 {
        self.vc.b_weight(x, y)
    }

    pub fn grad_u0(&self, x: f64, y: f64) -> (f64, f64) {
        self.vc.grad_u0(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn single(mu: f64) -> VortexConfiguration {
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
    fn u0_single_vortex_values() {
        let vc = single(1.0);
        assert!((vc.u0(1.0, 0.0) + std::f64::consts::LN_2).abs() < 1e-14);
        assert_eq!(vc.u0(0.0, 0.0), f64::NEG_INFINITY);
        // |z| → ∞ limit is 0.
        assert!(vc.u0(1e8, 0.0).abs() < 1e-14);
    }

    #[test]
    fn h0_single_vortex_values() {
        let vc = single(1.0);
        assert_eq!(vc.h0(0.0, 0.0), 4.0);
        assert!((vc.h0(1.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn b_weight_values() {
        let vc = single(1.0);
        assert_eq!(vc.b_weight(0.0, 0.0), 0.0);
        // |z|² = μ gives the factor 1/2.
        assert!((vc.b_weight(1.0, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn b_equals_exp_u0_at_random_points() {
        let vc = VortexConfiguration::new(
            vec![
                Vortex {
                    x: 0.3,
                    y: -0.4,
                    multiplicity: 1,
                },
                Vortex {
                    x: -1.5,
                    y: 2.0,
                    multiplicity: 2,
                },
            ],
            0.7,
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut max_dev: f64 = 0.0;
        for _ in 0..1000 {
            let x = rng.gen_range(-8.0..8.0);
            let y = rng.gen_range(-8.0..8.0);
            if vc.min_dist2(x, y) < 1e-6 {
                continue;
            }
            max_dev = max_dev.max((vc.u0(x, y).exp() - vc.b_weight(x, y)).abs());
        }
        assert!(max_dev <= 1e-12, "max deviation {max_dev}");
    }

    #[test]
    fn h_divides_by_metric() {
        let vc = single(1.0);
        let cf = ConformalFactor::gaussian_bump(1.0, 2.0, (0.0, 0.0)).unwrap();
        assert!((vc.h(&cf, 0.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
        let flat = ConformalFactor::flat();
        assert_eq!(vc.h(&flat, 0.3, 0.4).unwrap(), vc.h0(0.3, 0.4));
    }

    #[test]
    fn u0_monotone_in_mu() {
        let p = (0.8, -0.6);
        let mut prev = f64::INFINITY;
        for &mu in &[0.5, 1.0, 2.0, 4.0, 9.0] {
            let v = single(mu).u0(p.0, p.1);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn multiplicity_two_equals_coincident_pair() {
        let a = VortexConfiguration::new(
            vec![Vortex {
                x: 0.5,
                y: 0.5,
                multiplicity: 2,
            }],
            1.0,
        )
        .unwrap();
        let b = VortexConfiguration::new(
            vec![
                Vortex {
                    x: 0.5,
                    y: 0.5,
                    multiplicity: 1,
                },
                Vortex {
                    x: 0.5,
                    y: 0.5,
                    multiplicity: 1,
                },
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(b.vortices().len(), 1);
        assert_eq!(b.total_vorticity(), 2);
        for &(x, y) in &[(1.0, 0.0), (-2.0, 3.0), (0.51, 0.5)] {
            assert_eq!(a.u0(x, y), b.u0(x, y));
            assert_eq!(a.h0(x, y), b.h0(x, y));
            assert_eq!(a.b_weight(x, y), b.b_weight(x, y));
        }
    }

    #[test]
    fn grad_u0_matches_finite_differences() {
        let vc = VortexConfiguration::new(
            vec![
                Vortex {
                    x: 0.2,
                    y: 0.1,
                    multiplicity: 1,
                },
                Vortex {
                    x: -1.0,
                    y: 1.0,
                    multiplicity: 3,
                },
            ],
            1.3,
        )
        .unwrap();
        let eps = 1e-6;
        for &(x, y) in &[(1.0, 2.0), (-3.0, -0.5), (0.7, 0.8)] {
            let (gx, gy) = vc.grad_u0(x, y);
            let fx = (vc.u0(x + eps, y) - vc.u0(x - eps, y)) / (2.0 * eps);
            let fy = (vc.u0(x, y + eps) - vc.u0(x, y - eps)) / (2.0 * eps);
            assert!((gx - fx).abs() < 1e-6);
            assert!((gy - fy).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(VortexConfiguration::new(vec![], 0.0).is_err());
        assert!(VortexConfiguration::new(vec![], -1.0).is_err());
        assert!(VortexConfiguration::new(
            vec![Vortex {
                x: 0.0,
                y: 0.0,
                multiplicity: 0
            }],
            1.0
        )
        .is_err());
    }
}
