use nalgebra::DMatrix;

use super::{check_qp_matrix, lifted, rows, GadgetInstance, GadgetKind, GadgetParams};
use crate::error::{Error, Result};
use crate::poly::{sgn, Label, LabeledSet, PtfClassifier};

/// `6 + 4n + 12·C(n, 2)`.
pub fn expected_main_count(n: usize) -> usize {
    6 + 4 * n + 6 * n * n.saturating_sub(1)
}

/// Labeled set forcing robust consistent PTFs close to `sgn(xᵀAx − z)`.
///
/// `A` is rescaled so every nonzero entry exceeds 10 in magnitude (to 11 at
/// the smallest), `s` by the same factor. Then `δ = 1/s`,
/// `ε = min(200/n², 1/20)`, `τ′ = (n²/ε)·K`, `τ = (n/ε)·K` with
/// `K = max(1, 1/(ε + min_{i≠j}|a_ij|))`, and `γ_gadget = 4nτ`.
pub fn gen_main_gadget(a: &DMatrix<f64>, s: f64) -> Result<GadgetInstance> {
    check_qp_matrix(a)?;
    let n = a.nrows();
    if n < 2 {
        return Err(Error::invalid("the gadget needs n ≥ 2"));
    }
    if !(s > 100.0) || !s.is_finite() {
        return Err(Error::invalid(format!("threshold must exceed 100, got {s}")));
    }
    let min_nonzero = a.iter().filter(|v| **v != 0.0).fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !min_nonzero.is_finite() {
        return Err(Error::invalid("QP matrix is identically zero"));
    }
    let factor = if min_nonzero > 10.0 { 1.0 } else { 11.0 / min_nonzero };
    let a = a * factor;
    let s = s * factor;
    let delta = 1.0 / s;
    let eps = (200.0 / (n * n) as f64).min(0.05);
    let min_off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)].abs())
        .fold(f64::INFINITY, f64::min);
    let k = (1.0 / (eps + min_off)).max(1.0);
    let nf = n as f64;
    let tau_prime = nf * nf / eps * k;
    let tau = nf / eps * k;
    let gamma = 4.0 * nf * tau;

    let mut pts: Vec<(Vec<f64>, Label)> = Vec::with_capacity(expected_main_count(n));
    let point = |x: Vec<f64>, z: f64| {
        let mut p = x;
        p.push(z);
        p
    };
    let zero = vec![0.0; n];
    for (z, y) in [(1.0, Label::Neg), (-1.0, Label::Pos), (tau_prime, Label::Neg), (-tau_prime, Label::Pos), (2.0 * delta, Label::Neg), (-2.0 * delta, Label::Pos)] {
        pts.push((point(zero.clone(), z), y));
    }
    for i in 0..n {
        for sx in [1.0, -1.0] {
            let mut e = zero.clone();
            e[i] = sx * tau;
            pts.push((point(e.clone(), gamma), Label::Neg));
            pts.push((point(e, -gamma), Label::Pos));
        }
    }
    let signs = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = 1.0 / (2.0 * (eps + a[(i, j)].abs())).sqrt();
            let e = |si: f64, sj: f64, scale: f64| {
                let mut e = zero.clone();
                e[i] = si * c * scale;
                e[j] = sj * c * scale;
                e
            };
            for (si, sj) in signs {
                pts.push((point(e(si, sj, 1.0), 2.0), Label::Neg));
            }
            for (si, sj) in signs {
                // a_ij = 0 gives xᵀAx = 0 here, so the intended label is −1
                let y = if a[(i, j)] == 0.0 { Label::Neg } else { sgn(si * sj * a[(i, j)]) };
                pts.push((point(e(si, sj, 2.0), 1.0), y));
            }
            for (si, sj) in signs {
                pts.push((point(e(si, sj, 1.0), -2.0), Label::Pos));
            }
        }
    }
    debug_assert_eq!(pts.len(), expected_main_count(n));
    let set = LabeledSet::from_pairs(n + 1, pts)?.with_delta(delta)?;
    Ok(GadgetInstance {
        kind: GadgetKind::Main,
        set,
        intended: PtfClassifier::new(lifted(&a, 1.0)),
        params: GadgetParams {
            a: rows(&a),
            scale_factor: factor,
            s: Some(s),
            beta: None,
            delta,
            delta_requested: None,
            epsilon: Some(eps),
            tau: Some(tau),
            tau_prime: Some(tau_prime),
            gamma_gadget: Some(gamma),
            alpha: None,
            rho: None,
            m: None,
            seed: None,
            grid_bits: None,
            surface_exact: false,
            open_ball: false,
        },
        surface: Vec::new(),
        warnings: Vec::new(),
    })
}
