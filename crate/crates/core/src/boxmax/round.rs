//! Gaussian rounding of a factorized SDP solution.
//!
//! A trial draws `ζ ~ N(0, I_d)` and sets
//! `x̂_i = ⟨u_i, u₀⟩ + ⟨u_i − ⟨u_i,u₀⟩u₀, ζ⟩`. Then `E[x̂_i] = ⟨u_i,u₀⟩` and
//! `E[x̂_i x̂_j] = ⟨u_i,u_j⟩`, so `E[g(x̂)]` equals the relaxation value.
//! Trial `t` uses the random stream `(seed, t)`, which makes the outcome
//! independent of how trials are scheduled.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{linf, BoxMaxResult, SdpSolution};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::poly::QuadPoly;
use crate::rng;

/// Means and orthogonal parts of the rows of a solution.
#[derive(Debug, Clone)]
pub struct RoundingFrame {
    pub mean: Vec<f64>,
    perp: Vec<Vec<f64>>,
    rank: usize,
}

impl RoundingFrame {
    pub fn new(sol: &SdpSolution) -> Self {
        let n = sol.n();
        let d = sol.rank();
        let u0: Vec<f64> = (0..d).map(|k| sol.u[(0, k)]).collect();
        let n0: f64 = u0.iter().map(|v| v * v).sum();
        let mut mean = Vec::with_capacity(n);
        let mut perp = Vec::with_capacity(n);
        for i in 1..=n {
            let ui: Vec<f64> = (0..d).map(|k| sol.u[(i, k)]).collect();
            let t = if n0 > 0.0 {
                ui.iter().zip(&u0).map(|(a, b)| a * b).sum::<f64>() / n0.sqrt()
            } else {
                0.0
            };
            let e0 = if n0 > 0.0 { n0.sqrt() } else { 1.0 };
            perp.push(ui.iter().zip(&u0).map(|(a, b)| a - t * b / e0).collect());
            mean.push(t);
        }
        RoundingFrame { mean, perp, rank: d }
    }

    pub fn sample(&self, seed: u64, trial: u64) -> Vec<f64> {
        let mut rng = rng::stream(seed, trial);
        let zeta: Vec<f64> = (0..self.rank).map(|_| rng.sample(StandardNormal)).collect();
        self.mean
            .iter()
            .zip(&self.perp)
            .map(|(t, p)| t + p.iter().zip(&zeta).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// One rounded point, trial `trial` of stream `seed`.
pub fn round_once(sol: &SdpSolution, trial: u64, seed: u64) -> Vec<f64> {
    RoundingFrame::new(sol).sample(seed, trial)
}

/// Best of `trials` rounded points, no ℓ∞ cap.
pub fn gaussian_round(sol: &SdpSolution, g: &QuadPoly, trials: usize, seed: u64) -> Result<BoxMaxResult> {
    round_impl(sol, g, trials, seed, None, false, Parallelism::Parallel)
}

/// Best of `trials` rounded points with `‖x̂‖∞ ≤ radius`. The mean point
/// `(⟨u_i,u₀⟩)_i`, which always lies in the δ-box, competes as well, so some
/// candidate is always accepted.
pub fn gaussian_round_within(
    sol: &SdpSolution,
    g: &QuadPoly,
    trials: usize,
    seed: u64,
    radius: Option<f64>,
    parallelism: Parallelism,
) -> Result<BoxMaxResult> {
    round_impl(sol, g, trials, seed, radius, true, parallelism)
}

fn round_impl(
    sol: &SdpSolution,
    g: &QuadPoly,
    trials: usize,
    seed: u64,
    radius: Option<f64>,
    with_mean: bool,
    parallelism: Parallelism,
) -> Result<BoxMaxResult> {
    Error::check_dim(g.n(), sol.n())?;
    if trials == 0 && !with_mean {
        return Err(Error::invalid("rounding needs at least one trial"));
    }
    let frame = RoundingFrame::new(sol);
    let accept = |x: &[f64]| radius.is_none_or(|r| linf(x) <= r * (1.0 + 1e-12));
    let best = par::argmax_by_key(trials, parallelism, |t| {
        let x = frame.sample(seed, t as u64);
        accept(&x).then(|| (g.eval(&x), x))
    });
    let mut best = best.map(|(_, v, x)| (v, x));
    if with_mean {
        let x = frame.mean.clone();
        let v = g.eval(&x);
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, x));
        }
    }
    let (value, x_hat) = best.ok_or_else(|| Error::invalid("no rounded point within the allowed radius"))?;
    let l = linf(&x_hat);
    Ok(BoxMaxResult {
        linf: l,
        blowup: l / sol.delta,
        x_hat,
        value,
        trials_used: trials,
        sdp_value: Some(sol.objective),
        dual_bound: Some(sol.dual_bound),
        scale: g.scale(sol.delta),
        clipped: false,
    })
}
