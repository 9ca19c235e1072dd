//! Reduction of a ReLU attack to
//! `max_{‖z‖∞≤δ, ‖y‖∞≤1} yᵀ(Az + c₂) + c₁ᵀz − ‖β + Bz‖₁ + c0`.
//!
//! With `ℓ = sgn f(x*)` and `σ(t) = (t + |t|)/2`,
//! `−ℓ f(x*+z) = −ℓ(½vᵀW + v′ᵀ)(x*+z) − ℓ Σ_j (v_j/2)|W_j(x*+z)|`.
//! Hidden units with `−ℓ v_j ≥ 0` contribute `+|·|` terms (rows of `A`),
//! the rest `−|·|` terms (rows of `B`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::net::{target_second_best, BinaryNet, TwoLayerNet};
use crate::error::{Error, Result};
use crate::poly::{sgn, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnOptInstance {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub c0: f64,
    pub c1: DVector<f64>,
    pub c2: DVector<f64>,
    pub delta: f64,
    /// `sgn f(x*)`.
    pub label: Label,
    /// Hidden-unit indices behind the rows of `A` and `B`.
    pub plus_rows: Vec<usize>,
    pub minus_rows: Vec<usize>,
}

impl NnOptInstance {
    pub fn n(&self) -> usize {
        self.c1.len()
    }

    pub fn m1(&self) -> usize {
        self.a.nrows()
    }

    pub fn m2(&self) -> usize {
        self.b.nrows()
    }

    /// Objective at `z` with the optimal `y = sgn(Az + c₂)`; equals
    /// `−ℓ f(x* + z)`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        let plus = (&self.a * &zv + &self.c2).iter().map(|t| t.abs()).sum::<f64>();
        let minus = (&self.b * &zv + &self.beta).iter().map(|t| t.abs()).sum::<f64>();
        plus + self.c1.dot(&zv) - minus + self.c0
    }

    /// Objective at an explicit `y`.
    pub fn objective_with_y(&self, z: &[f64], y: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        let yv = DVector::from_column_slice(y);
        let minus = (&self.b * &zv + &self.beta).iter().map(|t| t.abs()).sum::<f64>();
        yv.dot(&(&self.a * &zv + &self.c2)) + self.c1.dot(&zv) - minus + self.c0
    }
}

/// Reduce `net` at `x*`. Multi-output nets use `target` or, if absent, the
/// top-two classes.
pub fn reduce_net(net: &TwoLayerNet, x_star: &[f64], delta: f64, target: Option<(usize, usize)>) -> Result<NnOptInstance> {
    Error::check_dim(net.n(), x_star.len())?;
    let pair = match (net.classes(), target) {
        (1, _) => None,
        (_, Some(p)) => Some(p),
        (_, None) => Some(target_second_best(net, x_star)?),
    };
    reduce_binary(&net.pairwise(pair)?, x_star, delta)
}

pub fn reduce_binary(f: &BinaryNet, x_star: &[f64], delta: f64) -> Result<NnOptInstance> {
    Error::check_dim(f.n(), x_star.len())?;
    let fx = f.eval(x_star);
    if fx == 0.0 {
        return Err(Error::AmbiguousLabel);
    }
    let label = sgn(fx);
    let l = label.sign();
    let n = f.n();
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for j in 0..f.k() {
        if -l * f.v[j] >= 0.0 {
            plus.push(j);
        } else {
            minus.push(j);
        }
    }
    let rows = |idx: &[usize]| {
        let mut m = DMatrix::zeros(idx.len(), n);
        for (r, &j) in idx.iter().enumerate() {
            for i in 0..n {
                m[(r, i)] = 0.5 * f.v[j].abs() * f.w[(j, i)];
            }
        }
        m
    };
    let a = rows(&plus);
    let b = rows(&minus);
    let x = DVector::from_column_slice(x_star);
    let half_wt_v = f.w.transpose() * &f.v * 0.5;
    let c1 = (&half_wt_v + &f.v_prime) * (-l);
    let c0 = -l * (half_wt_v.dot(&x) + f.v_prime.dot(&x));
    Ok(NnOptInstance {
        c2: &a * &x,
        beta: &b * &x,
        a,
        b,
        c0,
        c1,
        delta,
        label,
        plus_rows: plus,
        minus_rows: minus,
    })
}
