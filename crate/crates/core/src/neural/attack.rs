//! Attacks on a single network prediction.

use rand::Rng;

use super::net::{BinaryNet, TwoLayerNet};
use super::reduce::reduce_net;
use super::sdp::{nn_scale, round_nn_within, rounding_epsilon, solve_nn_sdp_with, NnSdpConfig};
use crate::attack::{AttackOutcome, Verdict};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::poly::{is_flip_value, Label};
use crate::rng;

#[derive(Debug, Clone)]
pub struct NetAttackConfig {
    pub trials: usize,
    /// Solve the relaxation at budget `α·δ` and accept only `‖z‖∞ ≤ δ`.
    /// Without it the relaxation uses δ and rounding may reach `γ·δ`.
    pub alpha: Option<f64>,
    /// Constant `a` in `ε = a/√(ln m₁)`.
    pub eps_constant: f64,
    pub gamma_constant: f64,
    pub cert_tol: f64,
    /// Class pair `(i, j)` for multi-output nets; the top two by default.
    pub target: Option<(usize, usize)>,
    pub sdp: NnSdpConfig,
    pub parallelism: Parallelism,
}

impl Default for NetAttackConfig {
    fn default() -> Self {
        NetAttackConfig {
            trials: 256,
            alpha: None,
            eps_constant: 1.0,
            gamma_constant: 4.0,
            cert_tol: 1e-9,
            target: None,
            sdp: NnSdpConfig::default(),
            parallelism: Parallelism::Parallel,
        }
    }
}

/// `max(1, C·√(ln n · ln k))`.
pub fn nn_gamma(c: f64, n: usize, k: usize) -> f64 {
    let l = |v: usize| (v.max(1) as f64).ln();
    (c * (l(n) * l(k)).sqrt()).max(1.0)
}

pub fn attack_net(net: &TwoLayerNet, x_star: &[f64], delta: f64, seed: u64, trials: usize) -> Result<AttackOutcome> {
    attack_net_with(net, x_star, delta, seed, &NetAttackConfig { trials, ..NetAttackConfig::default() })
}

pub fn attack_net_with(net: &TwoLayerNet, x_star: &[f64], delta: f64, seed: u64, cfg: &NetAttackConfig) -> Result<AttackOutcome> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid("δ must be positive and finite"));
    }
    if cfg.alpha.is_some_and(|a| !(a > 0.0)) {
        return Err(Error::invalid("α must be positive"));
    }
    let pair = pair_for(net, x_star, cfg.target)?;
    let f = net.pairwise(pair)?;
    let sdp_delta = cfg.alpha.map_or(delta, |a| a * delta);
    let inst = reduce_net(net, x_star, sdp_delta, pair)?;
    let label = inst.label;
    let sol = solve_nn_sdp_with(&inst, &cfg.sdp, seed)?;
    let gamma = if cfg.alpha.is_some() { 1.0 } else { nn_gamma(cfg.gamma_constant, net.n(), net.k()) };
    let eps = rounding_epsilon(cfg.eps_constant, inst.m1());
    let rounded = round_nn_within(
        &sol,
        &inst,
        cfg.trials,
        rng::derive_seed(seed, 0x6e6e_726f),
        eps,
        Some(gamma * delta),
        cfg.parallelism,
    )?;
    let margin = flip_value(&f, x_star, &rounded.z_hat, label);
    let scale = nn_scale(&inst).max(f.scale(delta)).max(f.eval(x_star).abs());
    let found = rounded.value > 0.0 && is_flip_value(margin, label);
    let can_certify = sdp_delta >= delta;
    let verdict = if found {
        Verdict::Found
    } else if can_certify && sol.dual_bound < -cfg.cert_tol * scale {
        Verdict::Certified
    } else {
        Verdict::Unknown
    };
    Ok(AttackOutcome {
        verdict,
        linf: rounded.linf,
        z: (verdict == Verdict::Found).then_some(rounded.z_hat),
        margin,
        certificate_value: (verdict == Verdict::Certified).then_some(sol.dual_bound),
        gamma_used: gamma,
        sdp_value: Some(sol.objective),
        reference_label: label,
    })
}

fn pair_for(net: &TwoLayerNet, x_star: &[f64], target: Option<(usize, usize)>) -> Result<Option<(usize, usize)>> {
    Error::check_dim(net.n(), x_star.len())?;
    Ok(match (net.classes(), target) {
        (1, _) => None,
        (_, Some(p)) => Some(p),
        (_, None) => Some(super::net::target_second_best(net, x_star)?),
    })
}

/// `−ℓ·f(x* + z)`, evaluated by a forward pass.
fn flip_value(f: &BinaryNet, x_star: &[f64], z: &[f64], label: Label) -> f64 {
    let x: Vec<f64> = x_star.iter().zip(z).map(|(a, b)| a + b).collect();
    -label.sign() * f.eval(&x)
}

#[derive(Debug, Clone)]
pub struct PgdConfig {
    pub steps: usize,
    /// Step size as a fraction of δ.
    pub step_fraction: f64,
    pub restarts: usize,
    pub target: Option<(usize, usize)>,
    pub parallelism: Parallelism,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig { steps: 40, step_fraction: 0.1, restarts: 5, target: None, parallelism: Parallelism::Parallel }
    }
}

pub fn pgd_attack(net: &TwoLayerNet, x_star: &[f64], delta: f64, seed: u64) -> Result<AttackOutcome> {
    pgd_attack_with(net, x_star, delta, seed, &PgdConfig::default())
}

/// Sign-gradient ascent on `−ℓ·f(x*+z)` inside the δ-box. Restart 0 starts
/// at `z = 0`, the others uniformly in the box. Never certifies.
pub fn pgd_attack_with(net: &TwoLayerNet, x_star: &[f64], delta: f64, seed: u64, cfg: &PgdConfig) -> Result<AttackOutcome> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid("δ must be finite and nonnegative"));
    }
    let pair = pair_for(net, x_star, cfg.target)?;
    let f = net.pairwise(pair)?;
    let fx = f.eval(x_star);
    if fx == 0.0 {
        return Err(Error::AmbiguousLabel);
    }
    let label = if fx > 0.0 { Label::Pos } else { Label::Neg };
    let n = f.n();
    let step = cfg.step_fraction * delta;
    let runs = par::map_indexed(cfg.restarts.max(1), cfg.parallelism, |r| {
        let mut z = vec![0.0; n];
        if r > 0 {
            let mut rng = rng::stream(seed, r as u64);
            z.iter_mut().for_each(|v| *v = rng.gen_range(-delta..=delta));
        }
        let mut best = (flip_value(&f, x_star, &z, label), z.clone());
        for _ in 0..cfg.steps {
            if is_flip_value(best.0, label) {
                break;
            }
            let x: Vec<f64> = x_star.iter().zip(&z).map(|(a, b)| a + b).collect();
            let g = f.gradient(&x);
            for (zi, gi) in z.iter_mut().zip(&g) {
                let dir = -label.sign() * gi;
                let s = if dir > 0.0 { 1.0 } else if dir < 0.0 { -1.0 } else { 0.0 };
                *zi = (*zi + step * s).clamp(-delta, delta);
            }
            let v = flip_value(&f, x_star, &z, label);
            if v > best.0 {
                best = (v, z.clone());
            }
        }
        best
    });
    let chosen = runs
        .iter()
        .find(|(v, _)| is_flip_value(*v, label))
        .or_else(|| runs.iter().reduce(|a, b| if b.0 > a.0 { b } else { a }))
        .expect("at least one restart")
        .clone();
    let (margin, z) = chosen;
    let found = is_flip_value(margin, label);
    Ok(AttackOutcome {
        verdict: if found { Verdict::Found } else { Verdict::Unknown },
        linf: z.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        z: found.then_some(z),
        margin,
        certificate_value: None,
        gamma_used: 1.0,
        sdp_value: None,
        reference_label: label,
    })
}
