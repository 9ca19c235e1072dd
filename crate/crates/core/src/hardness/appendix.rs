use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_qp_matrix, lifted, rows, GadgetInstance, GadgetKind, GadgetParams, SurfacePoint};
use crate::error::{Error, Result};
use crate::poly::{sgn, Label, LabeledPoint, LabeledSet, PtfClassifier};
use crate::rng;

#[derive(Debug, Clone)]
pub struct AppendixOptions {
    /// `ρ = C·δ·n^{3/2}·m/η` when `rho` is not given.
    pub rho_constant: f64,
    pub eta: f64,
    pub rho: Option<f64>,
    /// Perturb the repeated `(0, α)` points by up to `1e-9·δ` in `x`.
    pub jitter: bool,
}

impl Default for AppendixOptions {
    fn default() -> Self {
        AppendixOptions { rho_constant: 10.0, eta: 0.1, rho: None, jitter: false }
    }
}

/// `2m` points straddling the surface `z = xᵀAx` plus `((0, α), +1)`,
/// `α = δ²β + δ`. The intended classifier is `sgn(z − xᵀAx)`.
///
/// Sampled coordinates are snapped to a dyadic grid and `δ` to the same
/// grid, so `u`/`v` differ by exactly `2δ` per coordinate; with integer `A`
/// the surface values are exact too.
pub fn gen_appendix_gadget(a: &DMatrix<f64>, beta: f64, delta: f64, m: usize, seed: u64, opts: &AppendixOptions) -> Result<GadgetInstance> {
    let n = a.nrows();
    if m <= (n + 1) * (n + 1) {
        return Err(Error::invalid(format!("need m > (n+1)² = {}, got {m}", (n + 1) * (n + 1))));
    }
    build(a, beta, delta, m, 1, seed, opts, GadgetKind::Appendix)
}

/// `n³` copies of `((0, α), +1)` and `n³` surface pairs, `3n³` points.
pub fn gen_redundant_gadget(a: &DMatrix<f64>, beta: f64, delta: f64, seed: u64, opts: &AppendixOptions) -> Result<GadgetInstance> {
    let n = a.nrows();
    if n > 8 {
        return Err(Error::TooLarge { what: "redundant gadget", detail: format!("n = {n} > 8") });
    }
    let copies = n * n * n;
    let mut inst = build(a, beta, delta, copies, copies, seed, opts, GadgetKind::Redundant)?;
    if copies <= (n + 1) * (n + 1) {
        inst.warnings.push(format!("n³ = {copies} surface pairs do not exceed (n+1)² = {}", (n + 1) * (n + 1)));
    }
    for eps in [0.25, 2.0 / 7.0 - 1e-9, 1.0 / 3.0] {
        let r = super::pigeonhole_check(n, eps);
        if !r.holds() {
            inst.warnings.push(format!("counting argument fails at n = {n}, ε = {eps:.4}"));
        }
    }
    Ok(inst)
}

#[allow(clippy::too_many_arguments)]
fn build(
    a: &DMatrix<f64>,
    beta: f64,
    delta: f64,
    m: usize,
    copies: usize,
    seed: u64,
    opts: &AppendixOptions,
    kind: GadgetKind,
) -> Result<GadgetInstance> {
    check_qp_matrix(a)?;
    let n = a.nrows();
    if n < 1 {
        return Err(Error::invalid("empty QP matrix"));
    }
    if !(delta > 0.0) || !delta.is_finite() || !beta.is_finite() {
        return Err(Error::invalid("δ must be positive and β finite"));
    }
    let nf = n as f64;
    let pairs_for_rho = if kind == GadgetKind::Redundant { 2 * m } else { m };
    let rho_min = opts.rho_constant * delta * nf.powf(1.5) * pairs_for_rho as f64;
    let rho = match opts.rho {
        Some(r) if r < rho_min => {
            return Err(Error::invalid(format!("ρ = {r} is below C·δ·n^1.5·m = {rho_min}")));
        }
        Some(r) => r,
        None => rho_min / opts.eta,
    };

    let mut rng = rng::stream(seed, 0x6761_6467);
    let raw: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rho * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let xmax = raw.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs())) + 2.0 * delta;
    let l1: f64 = a.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    // keep Σ|a_ij|·x² below 2^52 on a 2^-k grid
    let raw_bits = ((52.0 - (l1 * xmax * xmax).log2()) / 2.0).floor() as i32 - 1;
    let bits = raw_bits.clamp(0, 40);
    let unit = (2.0f64).powi(-bits);
    let snap = |v: f64| (v / unit).round() * unit;
    let delta_snapped = snap(delta);
    if delta_snapped <= 0.0 {
        return Err(Error::invalid("δ is below the sampling grid resolution"));
    }
    let d = delta_snapped;
    let integer_a = a.iter().all(|v| v.fract() == 0.0);
    let p = |x: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[(i, j)] * x[i] * x[j];
            }
        }
        s
    };

    let mut points = Vec::with_capacity(2 * m + copies);
    let mut surface = Vec::with_capacity(m);
    for x in raw {
        let x: Vec<f64> = x.into_iter().map(snap).collect();
        let z = p(&x);
        let grad: Vec<f64> = (0..n).map(|i| 2.0 * (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>()).collect();
        let s: Vec<f64> = grad.iter().map(|g| sgn(*g).sign()).collect();
        let u: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| xi - d * si).collect();
        let v: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| xi + d * si).collect();
        let (zu, zv) = (z + d, z - d);
        let yu = sgn(zu - p(&u));
        let yv = sgn(zv - p(&v));
        let separated = (0..n).all(|i| {
            let row1: f64 = (0..n).map(|j| a[(i, j)].abs()).sum();
            row1 == 0.0 || (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>().abs() > d * row1
        });
        let mut pu = u;
        pu.push(zu);
        let mut pv = v;
        pv.push(zv);
        surface.push(SurfacePoint { x, z, u_index: points.len(), v_index: points.len() + 1, separated });
        points.push(LabeledPoint { x: pu, y: yu });
        points.push(LabeledPoint { x: pv, y: yv });
    }
    let alpha = d * d * beta + d;
    for c in 0..copies {
        let mut x = vec![0.0; n + 1];
        if opts.jitter && c > 0 {
            let mut jr = rng::stream(seed, 0x6a69_7474 + c as u64);
            for xi in x.iter_mut().take(n) {
                *xi = jr.gen_range(-1e-9..=1e-9) * d;
            }
        }
        x[n] = alpha;
        points.push(LabeledPoint { x, y: Label::Pos });
    }

    let mut warnings = Vec::new();
    let unseparated = surface.iter().filter(|s| !s.separated).count();
    if unseparated > 0 {
        warnings.push(format!("{unseparated} of {m} sampled points miss the separation event"));
    }
    if (d - delta).abs() > 0.0 {
        warnings.push(format!("δ snapped from {delta} to {d}"));
    }
    let surface_exact = integer_a && raw_bits >= 0;
    let set = LabeledSet::new(n + 1, points)?.with_delta(d)?;
    Ok(GadgetInstance {
        kind,
        set,
        intended: PtfClassifier::new(lifted(a, -1.0)),
        params: GadgetParams {
            a: rows(a),
            scale_factor: 1.0,
            s: None,
            beta: Some(beta),
            delta: d,
            delta_requested: Some(delta),
            epsilon: None,
            tau: None,
            tau_prime: None,
            gamma_gadget: None,
            alpha: Some(alpha),
            rho: Some(rho),
            m: Some(m),
            seed: Some(seed),
            grid_bits: Some(bits),
            surface_exact,
            open_ball: true,
        },
        surface,
        warnings,
    })
}
