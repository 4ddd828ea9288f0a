//! Brownian bridges on `[0, 1]` by Lévy midpoint bisection.
//!
//! Path `j` of stream `(seed, index)` is drawn from a ChaCha8 generator on
//! stream `index`, starting at word position `j << 32`. Bisection consumes the
//! normals coarse level first, so a path with `2n` steps refines the path with
//! `n` steps drawn from the same position.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub const DEFAULT_STEPS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStreamSpec {
            master_seed,
            stream_index,
        }
    }
}

/// One sampled bridge `γ(i / n_steps)`, `i = 0..=n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgePath {
    pub values: Vec<f64>,
    pub stream: RngStreamSpec,
    pub path_index: u64,
}

impl BridgePath {
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    /// `γ(s)`, linearly interpolated between grid points.
    pub fn gamma(&self, s: f64) -> f64 {
        let n = self.n_steps();
        if s <= 0.0 || s >= 1.0 {
            return 0.0;
        }
        let x = s * n as f64;
        let i = (x as usize).min(n - 1);
        let frac = x - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

pub(crate) fn check_steps(n_steps: usize) -> Result<()> {
    if n_steps < 2 || !n_steps.is_power_of_two() {
        return Err(Error::domain(alloc::format!(
            "n_steps must be a power of two >= 2, got {n_steps}"
        )));
    }
    Ok(())
}

/// Reusable sampler for the paths of one stream.
pub struct BridgeSampler {
    rng: ChaCha8Rng,
    n_steps: usize,
}

impl BridgeSampler {
    pub fn new(stream: RngStreamSpec, n_steps: usize) -> Result<Self> {
        check_steps(n_steps)?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream.master_seed);
        rng.set_stream(stream.stream_index);
        Ok(BridgeSampler { rng, n_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Positions the generator at the start of path `j`.
    pub fn seek(&mut self, path_index: u64) {
        self.rng.set_word_pos((path_index as u128) << 32);
    }

    /// Standard normal from the current position.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Fills `out` (length `n_steps + 1`) with path `j`.
    pub fn fill(&mut self, path_index: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_steps + 1);
        self.seek(path_index);
        self.fill_here(out);
    }

    /// Fills `out` continuing from the current generator position.
    pub fn fill_here(&mut self, out: &mut [f64]) {
        let n = self.n_steps;
        out[0] = 0.0;
        out[n] = 0.0;
        let inv_n = 1.0 / n as f64;
        let mut stride = n;
        while stride >= 2 {
            let half = stride / 2;
            let sd = libm::sqrt(stride as f64 * inv_n * 0.25);
            let mut left = 0;
            while left < n {
                let right = left + stride;
                let z: f64 = self.rng.sample(StandardNormal);
                out[left + half] = 0.5 * (out[left] + out[right]) + sd * z;
                left = right;
            }
            stride = half;
        }
    }

    pub fn sample(&mut self, stream: RngStreamSpec, path_index: u64) -> BridgePath {
        let mut values = vec![0.0; self.n_steps + 1];
        self.fill(path_index, &mut values);
        BridgePath {
            values,
            stream,
            path_index,
        }
    }
}

/// Path 0 of the given stream.
pub fn sample_bridge(n_steps: usize, stream: RngStreamSpec) -> Result<BridgePath> {
    sample_bridge_at(n_steps, stream, 0)
}

/// Path `path_index` of the given stream.
pub fn sample_bridge_at(n_steps: usize, stream: RngStreamSpec, path_index: u64) -> Result<BridgePath> {
    Ok(BridgeSampler::new(stream, n_steps)?.sample(stream, path_index))
}

/// `q(s) = η + (η′ − η)s + √τ γ(s)`.
pub fn path_position(path: &BridgePath, eta: f64, eta_p: f64, tau: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return eta;
    }
    if s >= 1.0 {
        return eta_p;
    }
    eta + (eta_p - eta) * s + libm::sqrt(tau) * path.gamma(s)
}

/// True when `q` stays strictly positive at every grid point.
#[inline]
pub(crate) fn stays_positive(gamma: &[f64], eta: f64, eta_p: f64, sqrt_tau: f64) -> bool {
    let n = gamma.len() - 1;
    let inv_n = 1.0 / n as f64;
    let delta = eta_p - eta;
    gamma
        .iter()
        .enumerate()
        .all(|(i, g)| eta + delta * (i as f64 * inv_n) + sqrt_tau * g > 0.0)
}

/// Outcome of [`dirichlet_filter`].
#[derive(Clone, Debug, PartialEq)]
pub struct FilterResult {
    /// Indices of surviving paths.
    pub survivors: Vec<usize>,
    pub acceptance: f64,
    /// Binomial standard error of `acceptance`.
    pub std_error: f64,
}

/// Keeps the paths whose `q` stays on the positive axis at every grid point.
pub fn dirichlet_filter(paths: &[BridgePath], eta: f64, eta_p: f64, tau: f64) -> Result<FilterResult> {
    if !(eta > 0.0 && eta_p > 0.0) {
        return Err(Error::domain("Dirichlet filtering needs η > 0 and η′ > 0"));
    }
    if !(tau > 0.0) {
        return Err(Error::domain("τ must be positive"));
    }
    let st = libm::sqrt(tau);
    let survivors: Vec<usize> = paths
        .iter()
        .enumerate()
        .filter(|(_, p)| stays_positive(&p.values, eta, eta_p, st))
        .map(|(i, _)| i)
        .collect();
    let n = paths.len().max(1) as f64;
    let acceptance = survivors.len() as f64 / n;
    Ok(FilterResult {
        survivors,
        acceptance,
        std_error: libm::sqrt(acceptance * (1.0 - acceptance) / n),
    })
}
