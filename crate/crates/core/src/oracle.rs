//! Finite-difference lattice for the reduced operator
//! `H = -1/2 d²/dη² + U(η)` with Dirichlet truncation outside the grid.
//!
//! Kernels are rows of `exp(-τH)` divided by the spacing, Green's functions
//! rows of `H⁻¹` divided by the spacing. Every site carries the average of
//! each power-law term over its cell `[η - h/2, η + h/2]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::potentials::{LinePotential, MomentumForm, PowerLawTerm, ScalarPotential};
use crate::{Error, Result};

pub const DEFAULT_SITES: usize = 2001;
pub const DEFAULT_HALF_WIDTH: f64 = 20.0;

/// Uniform grid `η_min = site 0, …, site n−1 = η_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeGrid {
    pub eta_min: f64,
    pub eta_max: f64,
    pub n_sites: usize,
}

impl Default for LatticeGrid {
    fn default() -> Self {
        LatticeGrid {
            eta_min: -DEFAULT_HALF_WIDTH,
            eta_max: DEFAULT_HALF_WIDTH,
            n_sites: DEFAULT_SITES,
        }
    }
}

impl LatticeGrid {
    pub fn new(eta_min: f64, eta_max: f64, n_sites: usize) -> Result<Self> {
        if !(eta_min.is_finite() && eta_max.is_finite() && eta_min < eta_max) {
            return Err(Error::domain("lattice needs finite η_min < η_max"));
        }
        if n_sites < 3 {
            return Err(Error::domain("lattice needs at least 3 sites"));
        }
        Ok(LatticeGrid {
            eta_min,
            eta_max,
            n_sites,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.eta_max - self.eta_min) / (self.n_sites - 1) as f64
    }

    /// Site coordinate, exact at both ends and at the midpoint of a symmetric grid.
    pub fn site(&self, i: usize) -> f64 {
        let n = (self.n_sites - 1) as f64;
        let i = i as f64;
        (self.eta_min * (n - i) + self.eta_max * i) / n
    }

    /// Index of the site at `eta`.
    pub fn index_of(&self, eta: f64) -> Result<usize> {
        let h = self.spacing();
        let x = (eta - self.eta_min) / h;
        let i = libm::round(x);
        if !(i >= 0.0 && i < self.n_sites as f64) || (self.site(i as usize) - eta).abs() > 1e-9 * h {
            return Err(Error::domain(alloc::format!("η = {eta} is not a lattice site")));
        }
        Ok(i as usize)
    }

    /// Every other site of this grid; needs an odd site count.
    pub fn coarsened(&self) -> Result<Self> {
        if self.n_sites % 2 == 0 {
            return Err(Error::domain("coarsening needs an odd number of sites"));
        }
        LatticeGrid::new(self.eta_min, self.eta_max, self.n_sites / 2 + 1)
    }
}

/// Symmetric tridiagonal `H` on a [`LatticeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeOperator {
    pub grid: LatticeGrid,
    pub spacing: f64,
    /// `U` on the sites.
    pub values: Vec<f64>,
}

/// Average of one term over the cell of width `h` at distance `d` from its center.
fn cell_average(t: &PowerLawTerm, d: f64, h: f64) -> f64 {
    let q = t.exponent;
    if q == 0.0 {
        return t.at_offset(d);
    }
    let f = |y: f64| libm::copysign(libm::pow(y.abs(), q + 1.0), y) / (q + 1.0);
    t.amplitude * (f(d + 0.5 * h) - f(d - 0.5 * h)) / h
}

impl LatticeOperator {
    pub fn new(grid: LatticeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_sites {
            return Err(Error::domain("one potential value per site is required"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("lattice potential must be finite and >= 0"));
        }
        Ok(LatticeOperator {
            spacing: grid.spacing(),
            grid,
            values,
        })
    }

    pub fn from_potential(grid: LatticeGrid, u: &LinePotential) -> Result<Self> {
        if u.terms().any(|t| t.amplitude != 0.0 && t.exponent <= -1.0) {
            return Err(Error::domain("lattice cell averages need exponents > -1"));
        }
        let h = grid.spacing();
        let values = (0..grid.n_sites)
            .map(|i| {
                let x = grid.site(i);
                u.with_values(x, |t| cell_average(t, x - t.center, h))
            })
            .collect();
        Self::new(grid, values)
    }

    /// `U = p·Ṽ·p + W` on the grid.
    pub fn for_momentum(grid: LatticeGrid, form: &MomentumForm, w: &ScalarPotential, p: &[f64]) -> Result<Self> {
        form.check_momentum(p)?;
        Self::from_potential(grid, &form.project(p).plus(&w.line()))
    }

    fn diag(&self) -> (Vec<f64>, f64) {
        let k = 1.0 / (self.spacing * self.spacing);
        (self.values.iter().map(|v| k + v).collect(), -0.5 * k)
    }

    /// `y = (H − c) x / r`.
    fn apply_scaled(&self, d: &[f64], off: f64, c: f64, r: f64, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut v = (d[i] - c) * x[i];
            if i > 0 {
                v += off * x[i - 1];
            }
            if i + 1 < n {
                v += off * x[i + 1];
            }
            y[i] = v / r;
        }
    }
}

/// `I_k(z) e^{-z}` for `k = 0, 1, …` until the terms drop below `1e-18`.
fn scaled_bessel_i(z: f64) -> Vec<f64> {
    if z == 0.0 {
        return vec![1.0];
    }
    let start = (libm::sqrt(120.0 * z) + 40.0) as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + 2.0 * k as f64 / z * vals[k];
        if vals[k - 1] > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // e^z = I₀ + 2 Σ I_k.
    let norm = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    let mut out: Vec<f64> = vals.iter().map(|v| v / norm).collect();
    while out.len() > 1 && *out.last().unwrap() < 1e-18 {
        out.pop();
    }
    out
}

/// Row `exp(-τH) e_j / h` for the site `j` at `eta_p`.
pub fn lattice_kernel_row(op: &LatticeOperator, tau: f64, eta_p: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::domain("τ must be positive"));
    }
    let j = op.grid.index_of(eta_p)?;
    let (d, off) = op.diag();
    // Gershgorin interval of the spectrum.
    let lo = op.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().map(|v| v - 2.0 * off).fold(f64::NEG_INFINITY, f64::max);
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let n = op.grid.n_sites;
    let h = op.spacing;

    // exp(-τx) = e^{-τ lo} Σ (2 − δ_k0) (−1)^k I_k(τr) e^{-τr} T_k((x − c)/r)
    let coef = scaled_bessel_i(tau * r);
    let mut prev = vec![0.0; n];
    prev[j] = 1.0;
    let mut acc: Vec<f64> = prev.iter().map(|v| coef[0] * v).collect();
    if coef.len() > 1 {
        let mut cur = vec![0.0; n];
        op.apply_scaled(&d, off, c, r, &prev, &mut cur);
        let mut next = vec![0.0; n];
        for (k, ck) in coef.iter().enumerate().skip(1) {
            let sign = if k % 2 == 1 { -2.0 } else { 2.0 };
            for (a, v) in acc.iter_mut().zip(&cur) {
                *a += sign * ck * v;
            }
            if k + 1 < coef.len() {
                op.apply_scaled(&d, off, c, r, &cur, &mut next);
                for (nx, pv) in next.iter_mut().zip(&prev) {
                    *nx = 2.0 * *nx - pv;
                }
                core::mem::swap(&mut prev, &mut cur);
                core::mem::swap(&mut cur, &mut next);
            }
        }
    }
    let scale = libm::exp(-tau * lo) / h;
    Ok(acc.into_iter().map(|v| v * scale).collect())
}

/// Lattice approximation of `P̃_τ(η, η′)`.
pub fn lattice_kernel(op: &LatticeOperator, tau: f64, eta: f64, eta_p: f64) -> Result<f64> {
    let i = op.grid.index_of(eta)?;
    Ok(lattice_kernel_row(op, tau, eta_p)?[i])
}

/// Lattice approximation of `G̃(η, η′)` by a tridiagonal solve.
pub fn lattice_green(op: &LatticeOperator, eta: f64, eta_p: f64) -> Result<f64> {
    let i = op.grid.index_of(eta)?;
    let j = op.grid.index_of(eta_p)?;
    if op.values.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("U vanishes on the whole lattice".into()));
    }
    let (d, off) = op.diag();
    let n = d.len();
    // Thomas elimination.
    let mut cp = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    rhs[j] = 1.0 / op.spacing;
    let mut piv = d[0];
    if !(piv > 0.0) {
        return Err(Error::Degenerate("non-positive pivot".into()));
    }
    cp[0] = off / piv;
    rhs[0] /= piv;
    for k in 1..n {
        piv = d[k] - off * cp[k - 1];
        if !(piv > 0.0) || !piv.is_finite() {
            return Err(Error::Degenerate(alloc::format!("non-positive pivot at site {k}")));
        }
        cp[k] = off / piv;
        rhs[k] = (rhs[k] - off * rhs[k - 1]) / piv;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= cp[k] * rhs[k + 1];
    }
    Ok(rhs[i])
}

/// Lattice value with `|fine − coarse|` as its discretization estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeValue {
    pub value: f64,
    pub discretization_error: f64,
    pub n_sites: usize,
}

fn with_estimate<F: Fn(&LatticeOperator) -> Result<f64>>(grid: LatticeGrid, u: &LinePotential, f: F) -> Result<LatticeValue> {
    let fine = f(&LatticeOperator::from_potential(grid, u)?)?;
    let coarse = f(&LatticeOperator::from_potential(grid.coarsened()?, u)?)?;
    Ok(LatticeValue {
        value: fine,
        discretization_error: (fine - coarse).abs(),
        n_sites: grid.n_sites,
    })
}

pub fn kernel_with_estimate(grid: LatticeGrid, u: &LinePotential, tau: f64, eta: f64, eta_p: f64) -> Result<LatticeValue> {
    with_estimate(grid, u, |op| lattice_kernel(op, tau, eta, eta_p))
}

pub fn green_with_estimate(grid: LatticeGrid, u: &LinePotential, eta: f64, eta_p: f64) -> Result<LatticeValue> {
    with_estimate(grid, u, |op| lattice_green(op, eta, eta_p))
}
