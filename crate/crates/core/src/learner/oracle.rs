//! Separation oracle for the robust-consistency program
//!
//! ```text
//! ‖coeff‖ ≤ 1
//! y_i ψ(x_i)·coeff ≥ r_i + κ                      (margin)
//! y_i (ψ(x_i) − ψ(x_i + z))·coeff ≤ r_i  ∀‖z‖∞ ≤ δ/γ   (robustness)
//! ```
//!
//! over `θ = (coeff, r)`. The robustness family is infinite; the attack
//! supplies the violated member.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::features::{coeff_to_poly, feature_dim, feature_map};
use crate::attack::AttackConfig;
use crate::boxmax::{self, BoxMaxResult};
use crate::error::{Error, Result};
use crate::par;
use crate::poly::{LabeledSet, QuadPoly};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub degree: usize,
    pub coeff: Vec<f64>,
    pub r: Vec<f64>,
    pub kappa: f64,
    pub iteration: usize,
}

impl LearnerState {
    pub fn from_theta(degree: usize, n: usize, theta: &[f64], kappa: f64, iteration: usize) -> Self {
        let d = feature_dim(degree, n);
        LearnerState {
            degree,
            coeff: theta[..d].to_vec(),
            r: theta[d..].to_vec(),
            kappa,
            iteration,
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.coeff.clone();
        t.extend_from_slice(&self.r);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Norm,
    Margin,
    Robust,
}

/// Half-space `aᵀθ ≤ b` violated by the queried iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub a: Vec<f64>,
    pub b: f64,
    pub kind: CutKind,
    pub index: Option<usize>,
}

impl Cut {
    pub fn violation(&self, theta: &[f64]) -> f64 {
        self.a.iter().zip(theta).map(|(p, q)| p * q).sum::<f64>() - self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleAnswer {
    Feasible,
    Cut(Cut),
}

/// Box-maximizer bookkeeping across oracle calls.
#[derive(Debug, Default)]
pub struct OracleStats {
    pub calls: AtomicUsize,
    pub failures: AtomicUsize,
}

impl OracleStats {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }
}

pub fn separation_oracle(
    state: &LearnerState,
    s: &LabeledSet,
    delta: f64,
    gamma: f64,
    eta_prime: f64,
    seed: u64,
) -> Result<OracleAnswer> {
    separation_oracle_with(state, s, delta, gamma, eta_prime, seed, &AttackConfig::default(), &OracleStats::default())
}

#[allow(clippy::too_many_arguments)]
pub fn separation_oracle_with(
    state: &LearnerState,
    s: &LabeledSet,
    delta: f64,
    gamma: f64,
    eta_prime: f64,
    seed: u64,
    cfg: &AttackConfig,
    stats: &OracleStats,
) -> Result<OracleAnswer> {
    let n = s.dim();
    let d = feature_dim(state.degree, n);
    let m = s.len();
    Error::check_dim(d, state.coeff.len())?;
    Error::check_dim(m, state.r.len())?;
    let dim = d + m;

    let norm = state.coeff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 {
        let mut a = vec![0.0; dim];
        for (k, c) in state.coeff.iter().enumerate() {
            a[k] = c / norm;
        }
        return Ok(OracleAnswer::Cut(Cut { a, b: 1.0, kind: CutKind::Norm, index: None }));
    }

    let points = s.points();
    for (i, p) in points.iter().enumerate() {
        let psi = feature_map(state.degree, &p.x);
        let y = p.y.sign();
        let yg: f64 = y * psi.iter().zip(&state.coeff).map(|(a, b)| a * b).sum::<f64>();
        if yg < state.r[i] + state.kappa {
            let mut a = vec![0.0; dim];
            for (k, v) in psi.iter().enumerate() {
                a[k] = -y * v;
            }
            a[d + i] = 1.0;
            return Ok(OracleAnswer::Cut(Cut { a, b: -state.kappa, kind: CutKind::Margin, index: Some(i) }));
        }
    }

    let g = coeff_to_poly(state.degree, n, &state.coeff)?;
    let budget = delta / gamma;
    let theta = state.theta();
    let hit = par::find_first(m, cfg.maximize.parallelism, |i| {
        let p = &points[i];
        let h = drop_poly(&g, &p.x, p.y.sign()).ok()?;
        let point_seed = rng::derive_seed(seed, i as u64);
        let res = maximize_drop(&h, state.degree, budget, eta_prime, point_seed, cfg, stats)?;
        if res.value <= state.r[i] {
            return None;
        }
        let y = p.y.sign();
        let xz: Vec<f64> = p.x.iter().zip(&res.x_hat).map(|(a, b)| a + b).collect();
        let psi0 = feature_map(state.degree, &p.x);
        let psi1 = feature_map(state.degree, &xz);
        let mut a = vec![0.0; dim];
        for k in 0..d {
            a[k] = y * (psi0[k] - psi1[k]);
        }
        a[d + i] = -1.0;
        let cut = Cut { a, b: 0.0, kind: CutKind::Robust, index: Some(i) };
        (cut.violation(&theta) > 0.0).then_some(cut)
    });
    Ok(match hit {
        Some((_, cut)) => OracleAnswer::Cut(cut),
        None => OracleAnswer::Feasible,
    })
}

/// `z ↦ y(g(x) − g(x + z))`, zero at `z = 0`.
pub(crate) fn drop_poly(g: &QuadPoly, x: &[f64], y: f64) -> Result<QuadPoly> {
    let shifted = g.shift(x)?;
    Ok(shifted.scaled(-y).add_constant(y * shifted.c()))
}

fn maximize_drop(
    h: &QuadPoly,
    degree: usize,
    budget: f64,
    eta: f64,
    seed: u64,
    cfg: &AttackConfig,
    stats: &OracleStats,
) -> Option<BoxMaxResult> {
    stats.calls.fetch_add(1, Ordering::Relaxed);
    if degree <= 1 || h.degree() <= 1 {
        return Some(boxmax::maximize_linear(h.b().as_slice(), h.c(), budget));
    }
    let first = boxmax::maximize_quadratic_with(h, budget, eta, seed, &cfg.maximize);
    match first {
        Ok(r) => Some(r),
        Err(_) => {
            stats.calls.fetch_add(1, Ordering::Relaxed);
            match boxmax::maximize_quadratic_with(h, budget, eta, rng::derive_seed(seed, u64::MAX), &cfg.maximize) {
                Ok(r) => Some(r),
                Err(_) => {
                    stats.failures.fetch_add(1, Ordering::Relaxed);
                    None
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Label;

    fn one_d() -> LabeledSet {
        LabeledSet::from_pairs(1, [(vec![1.0], Label::Pos), (vec![-1.0], Label::Neg)]).unwrap()
    }

    fn state(coeff: &[f64], r: &[f64]) -> LearnerState {
        LearnerState { degree: 1, coeff: coeff.to_vec(), r: r.to_vec(), kappa: 1e-6, iteration: 0 }
    }

    #[test]
    fn robust_cut_when_slack_too_small() {
        let st = state(&[1.0, 0.0], &[0.4, 0.4]);
        match separation_oracle(&st, &one_d(), 0.5, 1.0, 0.01, 0).unwrap() {
            OracleAnswer::Cut(c) => {
                assert_eq!((c.kind, c.index), (CutKind::Robust, Some(0)));
                assert!((c.violation(&st.theta()) - 0.1).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let st = state(&[1.0, 0.0], &[0.6, 0.6]);
        assert_eq!(separation_oracle(&st, &one_d(), 0.5, 1.0, 0.01, 0).unwrap(), OracleAnswer::Feasible);
    }

    #[test]
    fn margin_checked_before_attack() {
        let st = state(&[1.0, 0.0], &[2.0, 0.6]);
        match separation_oracle(&st, &one_d(), 0.5, 1.0, 0.01, 0).unwrap() {
            OracleAnswer::Cut(c) => assert_eq!((c.kind, c.index), (CutKind::Margin, Some(0))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_positive_is_feasible() {
        let s = LabeledSet::from_pairs(2, [(vec![0.3, 1.0], Label::Pos), (vec![-2.0, 0.5], Label::Pos)]).unwrap();
        let st = LearnerState { degree: 2, coeff: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0], r: vec![0.0, 0.0], kappa: 1e-6, iteration: 0 };
        assert_eq!(separation_oracle(&st, &s, 3.0, 1.0, 0.01, 0).unwrap(), OracleAnswer::Feasible);
    }

    #[test]
    fn norm_cut() {
        let st = state(&[3.0, 4.0], &[0.0, 0.0]);
        match separation_oracle(&st, &one_d(), 0.5, 1.0, 0.01, 0).unwrap() {
            OracleAnswer::Cut(c) => {
                assert_eq!(c.kind, CutKind::Norm);
                assert!((c.violation(&st.theta()) - 4.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn drop_polynomial_vanishes_at_zero() {
        let g = QuadPoly::from_rows(&[vec![1.0, 0.2], vec![0.2, -0.5]], &[0.3, 0.1], -0.7).unwrap();
        let h = drop_poly(&g, &[0.4, -1.1], -1.0).unwrap();
        assert!(h.c().abs() < 1e-15);
        let z = [0.05, 0.2];
        let direct = -(g.evaluate(&[0.4, -1.1]).unwrap() - g.evaluate(&[0.45, -0.9]).unwrap());
        assert!((h.evaluate(&z).unwrap() - direct).abs() < 1e-12);
    }
}
