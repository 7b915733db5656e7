//! Uniform truncated-domain discretization.
//!
//! Fields live on an `N×N` lattice of cell centers covering `[−L, L]²`:
//! `x_i = −L + iΔ + offset` with `Δ = 2L/N`. The half-cell stagger keeps
//! every node away from vortex singularities, and the cell-center layout
//! makes the midpoint quadrature weights sum to the exact domain area.
//! Stencils are second order; the boundary condition is the homogeneous
//! Dirichlet extension (ghost nodes carry the value 0).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ConformalFactor;
use crate::vortex::VortexConfiguration;

/// Geometry of a square staggered lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    nodes: usize,
    offset: f64,
}

impl GridSpec {
    /// Lattice with the default half-cell stagger.
    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::config("grid.half_width", "must be finite and > 0"));
        }
        if nodes < 33 || nodes % 2 == 0 {
            return Err(Error::config("grid.nodes", "must be odd and >= 33"));
        }
        let spacing = 2.0 * half_width / nodes as f64;
        Ok(GridSpec {
            half_width,
            nodes,
            offset: 0.5 * spacing,
        })
    }

    /// Lattice whose stagger is adjusted so that no node coincides with a
    /// vortex point; also checks that all vortices lie strictly inside the
    /// domain.
    pub fn for_vortices(
        half_width: f64,
        nodes: usize,
        vc: &VortexConfiguration,
    ) -> Result<Self> {
        let mut spec = Self::new(half_width, nodes)?;
        for v in vc.vortices() {
            if v.x.abs() >= half_width || v.y.abs() >= half_width {
                return Err(Error::config(
                    "vortices",
                    format!("vortex at ({}, {}) outside domain [-{l}, {l}]²", v.x, v.y, l = half_width),
                ));
            }
        }
        let d = spec.spacing();
        // Candidate staggers in preference order; the default keeps the node
        // set symmetric under z → −z, the alternatives only matter when a
        // vortex would land on (or too close to) a node.
        for shift in [0.0, 0.25, -0.25, 0.125, -0.125, 0.375, -0.375] {
            spec.offset = 0.5 * d + shift * d;
            if spec.min_vortex_node_dist(vc) >= 0.125 * d {
                return Ok(spec);
            }
        }
        Err(Error::config(
            "grid",
            "could not stagger lattice away from vortex points",
        ))
    }

    fn min_vortex_node_dist(&self, vc: &VortexConfiguration) -> f64 {
        let mut best = f64::INFINITY;
        for v in vc.vortices() {
            // Nearest node in each axis independently.
            let near = |c: f64| -> f64 {
                let t = (c + self.half_width - self.offset) / self.spacing();
                let i = t.round().clamp(0.0, (self.nodes - 1) as f64);
                (c - (-self.half_width + i * self.spacing() + self.offset)).abs()
            };
            let (dx, dy) = (near(v.x), near(v.y));
            best = best.min(dx.max(dy));
        }
        best
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nodes as f64
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing() + self.offset
    }

    /// Node coordinates `(x_i, y_j)` for row-major index pair.
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.coord(i), self.coord(j))
    }
}

/// A real field sampled on a [`GridSpec`] lattice, row-major (`j` slow).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        ScalarGrid {
            spec,
            values: vec![0.0; spec.nodes * spec.nodes],
        }
    }

    /// Sample a function at every node (rows in parallel).
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let n = spec.nodes;
        let mut values = vec![0.0; n * n];
        values
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, row)| {
                let y = spec.coord(j);
                for (i, v) in row.iter_mut().enumerate() {
                    *v = f(spec.coord(i), y);
                }
            });
        ScalarGrid { spec, values }
    }

    /// Fallible sampling variant for metric-backed fields.
    pub fn try_from_fn(
        spec: GridSpec,
        f: impl Fn(f64, f64) -> Result<f64> + Sync,
    ) -> Result<Self> {
        let n = spec.nodes;
        let rows: Result<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let y = spec.coord(j);
                (0..n).map(|i| f(spec.coord(i), y)).collect()
            })
            .collect();
        let mut values = Vec::with_capacity(n * n);
        for row in rows? {
            values.extend_from_slice(&row);
        }
        Ok(ScalarGrid { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nodes + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.spec.nodes + i] = v;
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("grid values"))
        }
    }

    /// Flat 5-point Laplacian `Δ₀`; ghost nodes outside the lattice carry 0.
    pub fn laplacian0(&self) -> ScalarGrid {
        let n = self.spec.nodes;
        let inv_d2 = 1.0 / (self.spec.spacing() * self.spec.spacing());
        let src = &self.values;
        let mut out = vec![0.0; n * n];
        out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
            for i in 0..n {
                let c = src[j * n + i];
                let w = if i > 0 { src[j * n + i - 1] } else { 0.0 };
                let e = if i + 1 < n { src[j * n + i + 1] } else { 0.0 };
                let s = if j > 0 { src[(j - 1) * n + i] } else { 0.0 };
                let nn = if j + 1 < n { src[(j + 1) * n + i] } else { 0.0 };
                row[i] = (w + e + s + nn - 4.0 * c) * inv_d2;
            }
        });
        ScalarGrid {
            spec: self.spec,
            values: out,
        }
    }

    /// Central differences interior, one-sided at the lattice boundary.
    pub fn gradient0(&self) -> (ScalarGrid, ScalarGrid) {
        let n = self.spec.nodes;
        let inv_d = 1.0 / self.spec.spacing();
        let inv_2d = 0.5 * inv_d;
        let src = &self.values;
        let mut gx = vec![0.0; n * n];
        let mut gy = vec![0.0; n * n];
        gx.par_chunks_mut(n)
            .zip(gy.par_chunks_mut(n))
            .enumerate()
            .for_each(|(j, (rx, ry))| {
                for i in 0..n {
                    rx[i] = if i == 0 {
                        (src[j * n + 1] - src[j * n]) * inv_d
                    } else if i == n - 1 {
                        (src[j * n + n - 1] - src[j * n + n - 2]) * inv_d
                    } else {
                        (src[j * n + i + 1] - src[j * n + i - 1]) * inv_2d
                    };
                    ry[i] = if j == 0 {
                        (src[n + i] - src[i]) * inv_d
                    } else if j == n - 1 {
                        (src[(n - 1) * n + i] - src[(n - 2) * n + i]) * inv_d
                    } else {
                        (src[(j + 1) * n + i] - src[(j - 1) * n + i]) * inv_2d
                    };
                }
            });
        (
            ScalarGrid {
                spec: self.spec,
                values: gx,
            },
            ScalarGrid {
                spec: self.spec,
                values: gy,
            },
        )
    }

    /// Metric-weighted midpoint quadrature `Σ v·b·Δ²` with a fixed
    /// (partition-independent) reduction order.
    pub fn integrate_metric(&self, cf: &ConformalFactor) -> Result<f64> {
        let b = ScalarGrid::try_from_fn(self.spec, |x, y| cf.evaluate(x, y))?;
        Ok(self.integrate_weighted(&b))
    }

    /// Same quadrature against a pre-sampled weight grid.
    pub fn integrate_weighted(&self, weight: &ScalarGrid) -> f64 {
        debug_assert_eq!(self.spec, weight.spec);
        let n = self.spec.nodes;
        let d2 = self.spec.spacing() * self.spec.spacing();
        let row_sums: Vec<f64> = self
            .values
            .par_chunks(n)
            .zip(weight.values.par_chunks(n))
            .map(|(v, w)| neumaier(v.iter().zip(w.iter()).map(|(a, b)| a * b)))
            .collect();
        neumaier(row_sums.into_iter()) * d2
    }

    /// Plain (unit-weight) midpoint quadrature `Σ v·Δ²`.
    pub fn integrate_flat(&self) -> f64 {
        let n = self.spec.nodes;
        let d2 = self.spec.spacing() * self.spec.spacing();
        let row_sums: Vec<f64> = self
            .values
            .par_chunks(n)
            .map(|v| neumaier(v.iter().copied()))
            .collect();
        neumaier(row_sums.into_iter()) * d2
    }

    /// `Σ a·b` over nodes, deterministic reduction order.
    pub fn dot(&self, other: &ScalarGrid) -> f64 {
        let n = self.spec.nodes;
        let row_sums: Vec<f64> = self
            .values
            .par_chunks(n)
            .zip(other.values.par_chunks(n))
            .map(|(a, b)| neumaier(a.iter().zip(b.iter()).map(|(x, y)| x * y)))
            .collect();
        neumaier(row_sums.into_iter())
    }

    /// Dirichlet edge form `Σ_edges (f_a − f_b)(g_a − g_b)` including ghost
    /// edges at the boundary; equals `⟨f, −Δ₀ g⟩·Δ²`.
    pub fn edge_form(&self, other: &ScalarGrid) -> f64 {
        debug_assert_eq!(self.spec, other.spec);
        let n = self.spec.nodes;
        let f = &self.values;
        let g = &other.values;
        let row_sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut acc = Kahan::default();
                // Horizontal edges within the row, plus the two ghost edges.
                acc.add(f[j * n] * g[j * n]);
                acc.add(f[j * n + n - 1] * g[j * n + n - 1]);
                for i in 0..n - 1 {
                    let df = f[j * n + i + 1] - f[j * n + i];
                    let dg = g[j * n + i + 1] - g[j * n + i];
                    acc.add(df * dg);
                }
                // Vertical edges from row j to j+1; ghost edges below row 0
                // and above row n−1.
                if j == 0 {
                    for i in 0..n {
                        acc.add(f[i] * g[i]);
                    }
                }
                if j + 1 < n {
                    for i in 0..n {
                        let df = f[(j + 1) * n + i] - f[j * n + i];
                        let dg = g[(j + 1) * n + i] - g[j * n + i];
                        acc.add(df * dg);
                    }
                } else {
                    for i in 0..n {
                        acc.add(f[j * n + i] * g[j * n + i]);
                    }
                }
                acc.total()
            })
            .collect();
        neumaier(row_sums.into_iter())
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .par_iter()
            .map(|v| v.abs())
            .reduce(|| 0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.values
            .par_iter()
            .copied()
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation at an arbitrary in-domain point.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let (i, fx) = self.cell(x);
        let (j, fy) = self.cell(y);
        let n = self.spec.nodes;
        let v00 = self.values[j * n + i];
        let v10 = self.values[j * n + i + 1];
        let v01 = self.values[(j + 1) * n + i];
        let v11 = self.values[(j + 1) * n + i + 1];
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// Catmull-Rom bicubic interpolation; fourth-order accurate away from
    /// the boundary ring (indices clamp at the edge).
    pub fn sample_bicubic(&self, x: f64, y: f64) -> f64 {
        let (i, fx) = self.cell(x);
        let (j, fy) = self.cell(y);
        let n = self.spec.nodes as isize;
        let pick = |ii: isize, jj: isize| -> f64 {
            let ii = ii.clamp(0, n - 1) as usize;
            let jj = jj.clamp(0, n - 1) as usize;
            self.values[jj * n as usize + ii]
        };
        let mut col = [0.0; 4];
        for (k, c) in col.iter_mut().enumerate() {
            let jj = j as isize - 1 + k as isize;
            *c = catmull_rom(
                pick(i as isize - 1, jj),
                pick(i as isize, jj),
                pick(i as isize + 1, jj),
                pick(i as isize + 2, jj),
                fx,
            );
        }
        catmull_rom(col[0], col[1], col[2], col[3], fy)
    }

    fn cell(&self, c: f64) -> (usize, f64) {
        let t = (c + self.spec.half_width - self.spec.offset) / self.spec.spacing();
        let i = (t.floor() as isize).clamp(0, self.spec.nodes as isize - 2) as usize;
        (i, t - i as f64)
    }
}

fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * ((2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3)
}

/// Neumaier compensated summation over a fixed iteration order.
pub fn neumaier(iter: impl Iterator<Item = f64>) -> f64 {
    let mut acc = Kahan::default();
    for v in iter {
        acc.add(v);
    }
    acc.total()
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
