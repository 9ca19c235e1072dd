//! Exact and near-exact reference maximizers for small dimensions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{maximize_linear, BoxMaxResult};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::poly::QuadPoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum BruteMode {
    /// All `2ⁿ` vertices. Exact when the diagonal of `A` is zero, since the
    /// polynomial is then affine in each coordinate.
    Vertex,
    /// Uniform grid with `points` per axis, then coordinatewise refinement.
    Grid { points: usize },
    /// Enumerate all `3ⁿ` faces of the box (each coordinate pinned low, pinned
    /// high or free) and take the stationary point of each face. Exact for
    /// any quadratic.
    Faces,
}

pub const MAX_VERTEX_DIM: usize = 24;
pub const MAX_FACES_DIM: usize = 12;
pub const MAX_GRID_DIM: usize = 6;
/// Dimension cap for [`grid_maximize`] on arbitrary objectives.
pub const MAX_GENERIC_GRID_DIM: usize = 8;
const MAX_GRID_EVALS: f64 = 2.5e8;

pub fn brute_force_boxmax(g: &QuadPoly, delta: f64, mode: BruteMode) -> Result<BoxMaxResult> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid("δ must be finite and nonnegative"));
    }
    let n = g.n();
    let scale = g.scale(delta);
    let (x, value) = match mode {
        BruteMode::Vertex => {
            if n > MAX_VERTEX_DIM {
                return Err(Error::TooLarge { what: "vertex enumeration", detail: format!("n = {n} > {MAX_VERTEX_DIM}") });
            }
            if let Some(i) = (0..n).find(|&i| g.a()[(i, i)] != 0.0) {
                return Err(Error::NonzeroDiagonal { index: i, value: g.a()[(i, i)] });
            }
            vertex_max(g, delta)
        }
        BruteMode::Faces => {
            if n > MAX_FACES_DIM {
                return Err(Error::TooLarge { what: "face enumeration", detail: format!("n = {n} > {MAX_FACES_DIM}") });
            }
            faces_max(g, delta)
        }
        BruteMode::Grid { points } => {
            if n > MAX_GRID_DIM {
                return Err(Error::TooLarge { what: "grid search", detail: format!("n = {n} > {MAX_GRID_DIM}") });
            }
            let search = GridSearch { points, refine: true, parallelism: Parallelism::Parallel };
            search.maximize(n, delta, &|x: &[f64]| g.eval(x))?
        }
    };
    Ok(BoxMaxResult {
        linf: super::linf(&x),
        x_hat: x,
        value,
        blowup: 1.0,
        trials_used: 0,
        sdp_value: None,
        dual_bound: None,
        scale,
        clipped: false,
    })
}

/// Exact box maximum by the cheapest applicable method.
pub fn exact_boxmax(g: &QuadPoly, delta: f64) -> Result<BoxMaxResult> {
    if g.degree() <= 1 {
        return Ok(maximize_linear(g.b().as_slice(), g.c(), delta));
    }
    if g.has_zero_diagonal() && g.n() <= MAX_VERTEX_DIM {
        brute_force_boxmax(g, delta, BruteMode::Vertex)
    } else {
        brute_force_boxmax(g, delta, BruteMode::Faces)
    }
}

fn vertex_max(g: &QuadPoly, delta: f64) -> (Vec<f64>, f64) {
    let n = g.n();
    if n == 0 {
        return (vec![], g.c());
    }
    let a = g.a();
    let b = g.b();
    let high = n.min(6);
    let low = n - high;
    let chunks = 1usize << high;
    let results = par::map_indexed(chunks, Parallelism::Parallel, |chunk| {
        let mut x = vec![delta; n];
        for h in 0..high {
            if chunk >> h & 1 == 1 {
                x[low + h] = -delta;
            }
        }
        let mut r: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
        let mut value = g.eval(&x);
        let (mut best_v, mut best_s) = (value, 0usize);
        for s in 1usize..(1usize << low) {
            let k = s.trailing_zeros() as usize;
            let old = x[k];
            value += -2.0 * old * (2.0 * r[k] + b[k]);
            x[k] = -old;
            for j in 0..n {
                r[j] -= 2.0 * old * a[(j, k)];
            }
            if value > best_v {
                best_v = value;
                best_s = s;
            }
        }
        let gray = best_s ^ (best_s >> 1);
        let mut xb = vec![delta; n];
        for i in 0..low {
            if gray >> i & 1 == 1 {
                xb[i] = -delta;
            }
        }
        xb[low..].copy_from_slice(&x[low..]);
        let v = g.eval(&xb);
        (v, xb)
    });
    best_of(results)
}

fn best_of(results: Vec<(f64, Vec<f64>)>) -> (Vec<f64>, f64) {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (v, x) in results {
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, x));
        }
    }
    let (v, x) = best.expect("nonempty");
    (x, v)
}

fn faces_max(g: &QuadPoly, delta: f64) -> (Vec<f64>, f64) {
    let n = g.n();
    let total = 3usize.pow(n as u32);
    const CHUNK: usize = 2048;
    let chunks = total.div_ceil(CHUNK);
    let a = g.a();
    let b = g.b();
    let results = par::map_indexed(chunks, Parallelism::Parallel, |c| {
        let mut best: (f64, Vec<f64>) = (f64::NEG_INFINITY, vec![0.0; n]);
        let mut x = vec![0.0; n];
        let mut free = Vec::with_capacity(n);
        for pattern in c * CHUNK..((c + 1) * CHUNK).min(total) {
            free.clear();
            let mut p = pattern;
            for (i, xi) in x.iter_mut().enumerate() {
                match p % 3 {
                    0 => *xi = -delta,
                    1 => *xi = delta,
                    _ => {
                        *xi = 0.0;
                        free.push(i);
                    }
                }
                p /= 3;
            }
            if !free.is_empty() {
                let k = free.len();
                let mut m = DMatrix::zeros(k, k);
                let mut rhs = DVector::zeros(k);
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        m[(r, s)] = a[(i, j)];
                    }
                    let mut acc = 0.5 * b[i];
                    for j in 0..n {
                        acc += a[(i, j)] * x[j];
                    }
                    rhs[r] = -acc;
                }
                let Some(sol) = m.lu().solve(&rhs) else { continue };
                let tol = 1e-12 * delta.max(1.0);
                if sol.iter().any(|v| !v.is_finite() || v.abs() > delta + tol) {
                    continue;
                }
                for (r, &i) in free.iter().enumerate() {
                    x[i] = sol[r].clamp(-delta, delta);
                }
            }
            let v = g.eval(&x);
            if v > best.0 {
                best = (v, x.clone());
            }
        }
        best
    });
    best_of(results)
}

/// Grid search over the δ-box for an arbitrary objective.
#[derive(Debug, Clone, Copy)]
pub struct GridSearch {
    pub points: usize,
    /// Polish the best grid point by golden-section search along each
    /// coordinate within one grid cell.
    pub refine: bool,
    pub parallelism: Parallelism,
}

impl GridSearch {
    pub fn maximize(&self, n: usize, delta: f64, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<(Vec<f64>, f64)> {
        grid_maximize(n, delta, *self, f)
    }
}

/// Maximize `f` over `[-δ, δ]ⁿ` on a `points`-per-axis grid.
pub fn grid_maximize(
    n: usize,
    delta: f64,
    search: GridSearch,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<(Vec<f64>, f64)> {
    let p = search.points;
    if p < 2 {
        return Err(Error::invalid("a grid needs at least 2 points per axis"));
    }
    if n > MAX_GENERIC_GRID_DIM || (p as f64).powi(n as i32) > MAX_GRID_EVALS {
        return Err(Error::TooLarge { what: "grid search", detail: format!("{p}^{n} points") });
    }
    if n == 0 {
        return Ok((vec![], f(&[])));
    }
    let h = 2.0 * delta / (p - 1) as f64;
    let coord = |k: usize| if k == p - 1 { delta } else { -delta + k as f64 * h };
    let outer_dims = n.min(2);
    let outer = p.pow(outer_dims as u32);
    let inner = p.pow((n - outer_dims) as u32);
    let results = par::map_indexed(outer, search.parallelism, |o| {
        let mut idx = vec![0usize; n];
        let mut q = o;
        for slot in idx.iter_mut().take(outer_dims) {
            *slot = q % p;
            q /= p;
        }
        let mut x: Vec<f64> = idx.iter().map(|&k| coord(k)).collect();
        let mut best = (f64::NEG_INFINITY, x.clone());
        for step in 0..inner {
            if step > 0 {
                for d in outer_dims..n {
                    idx[d] += 1;
                    if idx[d] < p {
                        x[d] = coord(idx[d]);
                        break;
                    }
                    idx[d] = 0;
                    x[d] = coord(0);
                }
            }
            let v = f(&x);
            if v > best.0 {
                best = (v, x.clone());
            }
        }
        best
    });
    let (mut x, mut v) = best_of(results);
    if search.refine {
        for _ in 0..3 {
            for k in 0..n {
                let lo = (x[k] - h).max(-delta);
                let hi = (x[k] + h).min(delta);
                let mut y = x.clone();
                let t = golden_max(lo, hi, |t| {
                    y[k] = t;
                    f(&y)
                });
                let mut cand = x.clone();
                cand[k] = t;
                let cv = f(&cand);
                if cv > v {
                    x = cand;
                    v = cv;
                }
            }
        }
    }
    Ok((x, v))
}

/// Golden-section search for the maximizer of a unimodal function on `[lo, hi]`.
pub(crate) fn golden_max(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    let candidates = [lo, hi, m];
    let mut best = (f(m), m);
    for t in candidates {
        let v = f(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_poly(n: usize, zero_diag: bool, seed: u64) -> QuadPoly {
        let mut r = rng::stream(seed, 0);
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = r.gen_range(-1.0..1.0);
                if i != j || !zero_diag {
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        QuadPoly::from_rows(&a, &b, r.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn vertex_equals_naive_enumeration() {
        for seed in 0..5 {
            let g = random_poly(9, true, seed);
            let got = brute_force_boxmax(&g, 0.7, BruteMode::Vertex).unwrap();
            let mut best = f64::NEG_INFINITY;
            for m in 0..(1u32 << 9) {
                let x: Vec<f64> = (0..9).map(|i| if m >> i & 1 == 1 { -0.7 } else { 0.7 }).collect();
                best = best.max(g.eval(&x));
            }
            assert!((got.value - best).abs() < 1e-12, "{} vs {best}", got.value);
        }
    }

    #[test]
    fn vertex_rejects_diagonal() {
        let g = random_poly(3, false, 1);
        assert!(matches!(brute_force_boxmax(&g, 1.0, BruteMode::Vertex), Err(Error::NonzeroDiagonal { .. })));
    }

    #[test]
    fn faces_agree_with_vertex_on_zero_diagonal() {
        for seed in 0..5 {
            let g = random_poly(6, true, seed);
            let v = brute_force_boxmax(&g, 1.3, BruteMode::Vertex).unwrap().value;
            let f = brute_force_boxmax(&g, 1.3, BruteMode::Faces).unwrap().value;
            assert!((v - f).abs() < 1e-10);
        }
    }

    #[test]
    fn faces_agree_with_grid() {
        for seed in 10..14 {
            let g = random_poly(3, false, seed);
            let f = brute_force_boxmax(&g, 1.0, BruteMode::Faces).unwrap();
            let gr = brute_force_boxmax(&g, 1.0, BruteMode::Grid { points: 41 }).unwrap();
            assert!(f.value >= gr.value - 1e-12);
            assert!(f.value - gr.value < 1e-6, "{} vs {}", f.value, gr.value);
        }
    }

    #[test]
    fn concave_interior_maximum() {
        // -(x-0.2)² - (y+0.1)² + 1
        let g = QuadPoly::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]], &[0.4, -0.2], 1.0 - 0.05).unwrap();
        let r = exact_boxmax(&g, 1.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14);
        assert!((r.x_hat[0] - 0.2).abs() < 1e-12 && (r.x_hat[1] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn grid_limits() {
        let g = random_poly(7, false, 0);
        assert!(brute_force_boxmax(&g, 1.0, BruteMode::Grid { points: 3 }).is_err());
        let g = random_poly(5, false, 0);
        assert!(brute_force_boxmax(&g, 1.0, BruteMode::Grid { points: 401 }).is_err());
    }

    #[test]
    fn golden_section_finds_peak() {
        let t = golden_max(-1.0, 1.0, |t| -(t - 0.3) * (t - 0.3));
        assert!((t - 0.3).abs() < 1e-7);
    }
}
