//! Reference oracles for the integration tests. They share no code with the
//! crate under test beyond its public data types.
#![allow(dead_code)]

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Plain `xᵀAx + bᵀx + c`.
pub fn quad(a: &DMatrix<f64>, b: &DVector<f64>, c: f64, x: &[f64]) -> f64 {
    let n = b.len();
    let mut v = c;
    for i in 0..n {
        v += b[i] * x[i];
        for j in 0..n {
            v += a[(i, j)] * x[i] * x[j];
        }
    }
    v
}

/// Maximum over the vertices of `[-δ, δ]ⁿ`. Exact when `A` has zero diagonal.
pub fn vertex_max(a: &DMatrix<f64>, b: &DVector<f64>, c: f64, delta: f64) -> f64 {
    let n = b.len();
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0.0; n];
    for mask in 0u64..(1u64 << n) {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = if mask >> i & 1 == 1 { delta } else { -delta };
        }
        best = best.max(quad(a, b, c, &x));
    }
    best
}

/// Exact box maximum of any quadratic: every coordinate is pinned low,
/// pinned high or free, and the free block is solved for its stationary
/// point. Singular free blocks are skipped; their maxima also lie on a
/// lower face.
pub fn face_max(a: &DMatrix<f64>, b: &DVector<f64>, c: f64, delta: f64) -> f64 {
    let n = b.len();
    let sym = (a + a.transpose()) * 0.5;
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    let mut state = vec![0u8; n];
    for mut code in 0..total {
        for s in state.iter_mut() {
            *s = (code % 3) as u8;
            code /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut x: Vec<f64> = state.iter().map(|&s| if s == 0 { -delta } else { delta }).collect();
        if !free.is_empty() {
            let k = free.len();
            let h = DMatrix::from_fn(k, k, |p, q| 2.0 * sym[(free[p], free[q])]);
            let rhs = DVector::from_fn(k, |p, _| {
                let i = free[p];
                let pinned: f64 = (0..n).filter(|j| state[*j] != 2).map(|j| 2.0 * sym[(i, j)] * x[j]).sum();
                -(b[i] + pinned)
            });
            let Some(sol) = h.clone().lu().solve(&rhs) else { continue };
            if (&h * &sol - &rhs).norm() > 1e-9 * (1.0 + rhs.norm()) {
                continue;
            }
            if sol.iter().any(|v| v.abs() > delta * (1.0 + 1e-12)) {
                continue;
            }
            for (p, &i) in free.iter().enumerate() {
                x[i] = sol[p].clamp(-delta, delta);
            }
        }
        best = best.max(quad(a, b, c, &x));
    }
    best
}

/// Maximum of `f` on a uniform `points`-per-axis grid of `[-δ, δ]ⁿ`.
pub fn grid_max(n: usize, delta: f64, points: usize, f: &dyn Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let axis: Vec<f64> = (0..points).map(|i| -delta + 2.0 * delta * i as f64 / (points - 1) as f64).collect();
    let mut idx = vec![0usize; n];
    let mut x = vec![-delta; n];
    let mut best = (f64::NEG_INFINITY, x.clone());
    loop {
        let v = f(&x);
        if v > best.0 {
            best = (v, x.clone());
        }
        let mut d = 0;
        loop {
            if d == n {
                return best;
            }
            idx[d] += 1;
            if idx[d] < points {
                x[d] = axis[idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = axis[0];
            d += 1;
        }
    }
}

/// Sign with `sgn(0) = +1`.
pub fn sign(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Does the flip value `−y·g` at a perturbed point change the sign of `g` away from `y`?
pub fn flips(y: f64, flip_value: f64) -> bool {
    if y > 0.0 {
        flip_value > 0.0
    } else {
        flip_value >= 0.0
    }
}

/// `V·relu(W x) + (v′ᵀx)·1`.
pub fn net_forward(w: &DMatrix<f64>, v: &DMatrix<f64>, vp: &DVector<f64>, x: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = (0..w.nrows()).map(|j| (0..w.ncols()).map(|i| w[(j, i)] * x[i]).sum::<f64>().max(0.0)).collect();
    let lin: f64 = (0..x.len()).map(|i| vp[i] * x[i]).sum();
    (0..v.nrows()).map(|c| (0..h.len()).map(|j| v[(c, j)] * h[j]).sum::<f64>() + lin).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(r: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(lo..hi)).collect()
}

/// Symmetric `n × n` matrix with U[-1, 1] entries, optionally zero diagonal.
pub fn random_sym(r: &mut impl Rng, n: usize, zero_diag: bool) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == j && zero_diag { 0.0 } else { r.gen_range(-1.0..1.0) };
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

pub fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Print a verdict line straight to the terminal, bypassing the test
/// harness's output capture.
pub fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}
