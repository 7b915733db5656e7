//! Conformal factors `b(x,y)` for the spatial metric `γ_ij = b δ_ij`.
//!
//! The uniformly Euclidean class requires global positive bounds
//! `a₁ ≤ b ≤ a₂`; the power-growth family realizes the weaker integral
//! growth window `b(r)·r ≤ c·r^{3−ε}` under which existence still holds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Certified infimum/supremum of `b` over a computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsCertificate {
    pub a1: f64,
    pub a2: f64,
    /// True iff a finite global pair `(a₁, a₂)` exists, not merely over the
    /// truncated domain.
    pub uniformly_euclidean: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Flat,
    GaussianBump {
        amplitude: f64,
        sigma: f64,
        center: (f64, f64),
    },
    PowerGrowth {
        exponent: f64,
    },
    RadialTable(Pchip),
}

/// A positive conformal weight `b(x,y)`, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    family: Family,
}

impl ConformalFactor {
    /// The flat metric, `b ≡ 1`.
    pub fn flat() -> Self {
        ConformalFactor {
            family: Family::Flat,
        }
    }

    /// `b = 1 + A·exp(−((x−x₀)² + (y−y₀)²)/σ²)` with `A ≥ 0`, `σ > 0`.
    pub fn gaussian_bump(amplitude: f64, sigma: f64, center: (f64, f64)) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::config("metric.amplitude", "must be finite and >= 0"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::config("metric.sigma", "must be finite and > 0"));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::config("metric.center", "must be finite"));
        }
        Ok(ConformalFactor {
            family: Family::GaussianBump {
                amplitude,
                sigma,
                center,
            },
        })
    }

    /// `b(r) = (1+r²)^p` with `p ∈ [0, 1)`. Unbounded globally for `p > 0`,
    /// but within the growth window `b(r)·r ≤ c·r^{3−ε}` with `ε = 2(1−p)`.
    pub fn power_growth(exponent: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&exponent) {
            return Err(Error::config("metric.exponent", "must lie in [0, 1)"));
        }
        Ok(ConformalFactor {
            family: Family::PowerGrowth { exponent },
        })
    }

    /// Radial samples `(r_i, b_i)` interpolated by monotone cubics; queries
    /// beyond the last sample are range errors, not extrapolations.
    pub fn radial_table(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let pchip = Pchip::new(radii, values)?;
        Ok(ConformalFactor {
            family: Family::RadialTable(pchip),
        })
    }

    /// Evaluate `b` at a point.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("metric evaluation point"));
        }
        match &self.family {
            Family::Flat => Ok(1.0),
            Family::GaussianBump {
                amplitude,
                sigma,
                center,
            } => {
                let dx = x - center.0;
                let dy = y - center.1;
                Ok(1.0 + amplitude * (-(dx * dx + dy * dy) / (sigma * sigma)).exp())
            }
            Family::PowerGrowth { exponent } => {
                let r2 = x * x + y * y;
                Ok((1.0 + r2).powf(*exponent))
            }
            Family::RadialTable(p) => p.eval((x * x + y * y).sqrt()),
        }
    }

    /// Analytic gradient `(∂b/∂x, ∂b/∂y)`.
    pub fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("metric evaluation point"));
        }
        match &self.family {
            Family::Flat => Ok((0.0, 0.0)),
            Family::GaussianBump {
                amplitude,
                sigma,
                center,
            } => {
                let dx = x - center.0;
                let dy = y - center.1;
                let s2 = sigma * sigma;
                let g = amplitude * (-(dx * dx + dy * dy) / s2).exp();
                Ok((-2.0 * dx / s2 * g, -2.0 * dy / s2 * g))
            }
            Family::PowerGrowth { exponent } => {
                let r2 = x * x + y * y;
                let f = exponent * (1.0 + r2).powf(exponent - 1.0);
                Ok((2.0 * x * f, 2.0 * y * f))
            }
            Family::RadialTable(p) => {
                let r = (x * x + y * y).sqrt();
                let db = p.derivative(r)?;
                if r == 0.0 {
                    Ok((0.0, 0.0))
                } else {
                    Ok((db * x / r, db * y / r))
                }
            }
        }
    }

    /// Certified bounds of `b` over `[−L, L]²` and whether the family admits
    /// a finite global pair.
    pub fn certify_bounds(&self, domain_half_width: f64) -> Result<BoundsCertificate> {
        if !(domain_half_width > 0.0 && domain_half_width.is_finite()) {
            return Err(Error::config("half_width", "must be finite and > 0"));
        }
        let l = domain_half_width;
        match &self.family {
            Family::Flat => Ok(BoundsCertificate {
                a1: 1.0,
                a2: 1.0,
                uniformly_euclidean: true,
            }),
            Family::GaussianBump { amplitude, .. } => Ok(BoundsCertificate {
                a1: 1.0,
                a2: 1.0 + amplitude,
                uniformly_euclidean: true,
            }),
            Family::PowerGrowth { exponent } => {
                // Monotone radial form: supremum at the domain corner r² = 2L².
                let a2 = (1.0 + 2.0 * l * l).powf(*exponent);
                Ok(BoundsCertificate {
                    a1: 1.0,
                    a2,
                    uniformly_euclidean: *exponent == 0.0,
                })
            }
            Family::RadialTable(p) => {
                let corner = (2.0f64).sqrt() * l;
                if corner > p.r_max() {
                    return Err(Error::TableRange {
                        r: corner,
                        r_max: p.r_max(),
                    });
                }
                // Monotone interpolant: extrema occur at knots or at the
                // query boundary; sampling the knots plus the corner is exact
                // up to the monotone-segment property.
                let (mut a1, mut a2) = (f64::INFINITY, f64::NEG_INFINITY);
                for (&r, &v) in p.knots() {
                    if r <= corner {
                        a1 = a1.min(v);
                        a2 = a2.max(v);
                    }
                }
                let at_corner = p.eval(corner)?;
                a1 = a1.min(at_corner);
                a2 = a2.max(at_corner);
                Ok(BoundsCertificate {
                    a1,
                    a2,
                    uniformly_euclidean: true,
                })
            }
        }
    }

    /// True if `b` is a function of `r = |z|` alone (about the origin), so
    /// the one-dimensional oracle applies.
    pub fn is_radial(&self) -> bool {
        match &self.family {
            Family::Flat | Family::PowerGrowth { .. } | Family::RadialTable(_) => true,
            Family::GaussianBump { center, .. } => *center == (0.0, 0.0),
        }
    }
}

/// Monotone cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::config(
                "metric.radii/values",
                "need equal lengths >= 2",
            ));
        }
        if x[0] != 0.0 {
            return Err(Error::config("metric.radii", "first radius must be 0"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("metric.radii", "must be strictly increasing"));
        }
        if y.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::config("metric.values", "must be finite and > 0"));
        }
        let n = x.len();
        let mut slopes = vec![0.0; n - 1];
        for i in 0..n - 1 {
            slopes[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut d = vec![0.0; n];
        d[0] = slopes[0];
        d[n - 1] = slopes[n - 2];
        for i in 1..n - 1 {
            if slopes[i - 1] * slopes[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / slopes[i - 1] + w2 / slopes[i]);
            }
        }
        // Fritsch-Carlson endpoint limiter.
        for (i, s) in slopes.iter().enumerate() {
            if *s == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
            } else {
                let a = d[i] / s;
                let b = d[i + 1] / s;
                let m = (a * a + b * b).sqrt();
                if m > 3.0 {
                    d[i] = 3.0 * a / m * s;
                    d[i + 1] = 3.0 * b / m * s;
                }
            }
        }
        Ok(Pchip { x, y, d })
    }

    fn r_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn knots(&self) -> impl Iterator<Item = (&f64, &f64)> {
        self.x.iter().zip(self.y.iter())
    }

    fn segment(&self, r: f64) -> Result<usize> {
        if !(0.0..=self.r_max()).contains(&r) {
            return Err(Error::TableRange {
                r,
                r_max: self.r_max(),
            });
        }
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i - 1,
        };
        Ok(i)
    }

    fn eval(&self, r: f64) -> Result<f64> {
        let i = self.segment(r)?;
        let h = self.x[i + 1] - self.x[i];
        let t = (r - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1])
    }

    fn derivative(&self, r: f64) -> Result<f64> {
        let i = self.segment(r)?;
        let h = self.x[i + 1] - self.x[i];
        let t = (r - self.x[i]) / h;
        let t2 = t * t;
        let dh00 = (6.0 * t2 - 6.0 * t) / h;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = (-6.0 * t2 + 6.0 * t) / h;
        let dh11 = 3.0 * t2 - 2.0 * t;
        Ok(dh00 * self.y[i] + dh10 * self.d[i] + dh01 * self.y[i + 1] + dh11 * self.d[i + 1])
    }
}
