//! Maximization of degree-≤2 polynomials over the ℓ∞ ball `‖x‖∞ ≤ δ`.
//!
//! Linear forms are maximized exactly by the coordinatewise sign rule.
//! Quadratics go through a vector-program relaxation ([`sdp`]) followed by
//! Gaussian rounding ([`round`]): the rounded point attains at least the box
//! maximum with constant probability per trial, at the price of an ℓ∞ blowup
//! of `O(√log n)`. The [`brute`] oracles are exact references for small `n`.

pub(crate) mod brute;
mod round;
mod sdp;

pub use brute::{brute_force_boxmax, exact_boxmax, grid_maximize, BruteMode, GridSearch};
pub use round::{gaussian_round, gaussian_round_within, round_once, RoundingFrame};
pub(crate) use brute::golden_max;
pub(crate) use sdp::gram_dual_bound;
pub use sdp::{build_sdp, solve_sdp, solve_sdp_with, DiagnosticSink, SdpConfig, SdpInstance, SdpSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::poly::QuadPoly;

/// A candidate maximizer over the δ-box (possibly outside it, see `blowup`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxMaxResult {
    pub x_hat: Vec<f64>,
    /// `g(x_hat)`.
    pub value: f64,
    /// `‖x_hat‖∞`.
    pub linf: f64,
    /// `linf / δ`; exact methods report 1.
    pub blowup: f64,
    pub trials_used: usize,
    /// Relaxation value when the SDP path ran. An upper bound on the box
    /// maximum up to solver tolerance.
    pub sdp_value: Option<f64>,
    /// Weak-duality bound on the box maximum when the SDP path ran.
    pub dual_bound: Option<f64>,
    /// Tolerance reference `max(1, ‖A‖max·n·δ², ‖b‖max·n·δ, |c|)`.
    pub scale: f64,
    /// True if the point was clipped into the δ-box after rounding.
    pub clipped: bool,
}

impl BoxMaxResult {
    fn exact(x_hat: Vec<f64>, value: f64, scale: f64) -> Self {
        let linf = linf(&x_hat);
        BoxMaxResult {
            x_hat,
            value,
            linf,
            blowup: 1.0,
            trials_used: 0,
            sdp_value: None,
            dual_bound: None,
            scale,
            clipped: false,
        }
    }
}

pub(crate) fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Exact maximum of `bᵀx + c` over the δ-box: `x_i = δ·sgn(b_i)` with
/// `sgn(0) = +1`, value `δ‖b‖₁ + c`.
pub fn maximize_linear(b: &[f64], c: f64, delta: f64) -> BoxMaxResult {
    let x_hat: Vec<f64> = b.iter().map(|&bi| if bi >= 0.0 { delta } else { -delta }).collect();
    let l1: f64 = b.iter().map(|v| v.abs()).sum();
    let n = b.len() as f64;
    let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = 1.0f64.max(bmax * n * delta).max(c.abs());
    BoxMaxResult::exact(x_hat, delta * l1 + c, scale)
}

/// Knobs for [`maximize_quadratic_with`].
#[derive(Debug, Clone)]
pub struct MaximizeConfig {
    /// Rounding trials are `ceil(K · ln(1/η))`.
    pub trials_constant: f64,
    /// Accepted solutions satisfy `‖x‖∞ ≤ C·√(ln n)·δ` (never below δ).
    pub gamma_constant: f64,
    pub sdp: SdpConfig,
    /// Clip the rounded point back into the δ-box and re-evaluate. The
    /// value then no longer dominates the box maximum.
    pub clip: bool,
    pub parallelism: Parallelism,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        MaximizeConfig {
            trials_constant: 8.0,
            gamma_constant: 4.0,
            sdp: SdpConfig::default(),
            clip: false,
            parallelism: Parallelism::Parallel,
        }
    }
}

impl MaximizeConfig {
    pub fn trials_for(&self, eta: f64) -> usize {
        ((self.trials_constant * (1.0 / eta).ln()).ceil() as usize).max(1)
    }

    pub fn gamma(&self, n: usize) -> f64 {
        gamma_factor(self.gamma_constant, n)
    }
}

/// `max(1, C·√(ln n))`: the ℓ∞ blowup allowed for rounded solutions.
pub fn gamma_factor(c: f64, n: usize) -> f64 {
    let ln = (n.max(1) as f64).ln();
    (c * ln.sqrt()).max(1.0)
}

/// [`maximize_quadratic_with`] under the default configuration.
pub fn maximize_quadratic(g: &QuadPoly, delta: f64, eta: f64, seed: u64) -> Result<BoxMaxResult> {
    maximize_quadratic_with(g, delta, eta, seed, &MaximizeConfig::default())
}

/// Relax, solve, round. With probability at least `1 − η` the returned value
/// is at least the box maximum, and `‖x_hat‖∞ ≤ γ(n)·δ` always holds unless
/// clipping was requested.
///
/// Degree-≤1 inputs skip the relaxation and return [`maximize_linear`].
pub fn maximize_quadratic_with(
    g: &QuadPoly,
    delta: f64,
    eta: f64,
    seed: u64,
    config: &MaximizeConfig,
) -> Result<BoxMaxResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("failure probability must lie in (0,1), got {eta}")));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid("δ must be finite and nonnegative"));
    }
    if g.degree() <= 1 {
        return Ok(maximize_linear(g.b().as_slice(), g.c(), delta));
    }
    if delta == 0.0 {
        let n = g.n();
        return Ok(BoxMaxResult::exact(vec![0.0; n], g.c(), g.scale(0.0)));
    }
    let inst = build_sdp(g, delta)?;
    let sol = solve_sdp_with(&inst, &config.sdp, seed)?;
    let trials = config.trials_for(eta);
    let radius = config.gamma(g.n()) * delta;
    let mut res = gaussian_round_within(
        &sol,
        g,
        trials,
        rng_seed_for_rounding(seed),
        Some(radius),
        config.parallelism,
    )?;
    if config.clip && res.linf > delta {
        let x: Vec<f64> = res.x_hat.iter().map(|v| v.clamp(-delta, delta)).collect();
        res.value = g.eval(&x);
        res.linf = linf(&x);
        res.blowup = res.linf / delta;
        res.x_hat = x;
        res.clipped = true;
    }
    Ok(res)
}

fn rng_seed_for_rounding(seed: u64) -> u64 {
    crate::rng::derive_seed(seed, 0x0072_6f75_6e64)
}
