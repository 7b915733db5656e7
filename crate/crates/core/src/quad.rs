//! Adaptive Simpson quadrature on intervals and rectangles.
//!
//! Used as an independent reference for grid quadrature and closed-form
//! integrals; deliberately has no dependency on the lattice machinery.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn integrate_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adapt_1d(f, a, b, fa, fm, fb, whole, tol, 60)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt_1d(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt_1d(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adapt_1d(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive quadrature over the rectangle `[x0,x1]×[y0,y1]`: the inner
/// integral is evaluated adaptively per outer abscissa.
pub fn integrate_2d(
    f: &dyn Fn(f64, f64) -> f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
) -> f64 {
    let inner_tol = tol / (y1 - y0).abs().max(1.0) * 0.1;
    let outer = |y: f64| integrate_1d(&|x| f(x, y), x0, x1, inner_tol);
    integrate_1d(&outer, y0, y1, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let v = integrate_1d(&|x| 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - 8.0).abs() < 1e-10);
    }

    #[test]
    fn h0_radial_integral_is_4pi_per_unit_vorticity() {
        // ∫_R² 4μ/(μ+r²)² dz = ∫₀^∞ 8πμ r/(μ+r²)² dr = 4π, checked by
        // quadrature over [0, R] plus the analytic tail 4πμ/(μ+R²).
        for &mu in &[0.5, 1.0, 4.0, 9.0] {
            let r_cut = 200.0;
            let body = integrate_1d(
                &|r| 8.0 * PI * mu * r / ((mu + r * r) * (mu + r * r)),
                0.0,
                r_cut,
                1e-10,
            );
            let tail = 4.0 * PI * mu / (mu + r_cut * r_cut);
            let total = body + tail;
            assert!(
                ((total - 4.0 * PI) / (4.0 * PI)).abs() < 1e-8,
                "mu={mu} total={total}"
            );
        }
    }

    #[test]
    fn gaussian_2d() {
        let v = integrate_2d(&|x, y| (-(x * x + y * y)).exp(), -8.0, 8.0, -8.0, 8.0, 1e-10);
        assert!((v - PI).abs() < 1e-8);
    }
}
