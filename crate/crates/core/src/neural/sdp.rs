//! Vector relaxation of the reduced network problem:
//!
//! ```text
//! max Σ A_ji⟨v_j,u_i⟩ + Σ c₁_i⟨u_i,u₀⟩ + Σ c₂_j⟨u₀,v_j⟩ − Σ_j |β_j + Σ_i B_ji⟨u_i,u₀⟩| + c0
//! s.t. ‖v_j‖ ≤ 1, ‖u_i‖ ≤ δ, ‖u₀‖ = 1
//! ```
//!
//! Only inner products matter, so `u₀ = e₀` is fixed. Given the `u_i`, each
//! `v_j` is the normalized `Σ_i A_ji u_i + c₂_j e₀`. Given the `v_j` and the
//! other `u_l`, the best `u_i` is `t e₀ + √(δ²−t²)·g⊥/‖g⊥‖` with
//! `g = Σ_j A_ji v_j`, where `t` maximizes a concave function of one
//! variable. The `|·|` terms are smoothed to `√(s² + μ²)` while `μ` is
//! annealed; reported values use the exact absolute value.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::reduce::NnOptInstance;
use crate::boxmax::{golden_max, gram_dual_bound, DiagnosticSink};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::rng;

#[derive(Debug, Clone)]
pub struct NnSdpConfig {
    /// Per-stage stopping threshold on the sweep improvement, relative to
    /// [`nn_scale`].
    pub tol: f64,
    pub max_sweeps: usize,
    pub restarts: usize,
    pub rank: Option<usize>,
    pub mu_start: f64,
    pub mu_end: f64,
    /// `‖v_j‖ ≤ shrink`; 1 is the plain relaxation.
    pub shrink: f64,
    pub parallelism: Parallelism,
    pub diagnostics: Option<DiagnosticSink>,
}

impl Default for NnSdpConfig {
    fn default() -> Self {
        NnSdpConfig {
            tol: 1e-11,
            max_sweeps: 100_000,
            restarts: 3,
            rank: None,
            mu_start: 1e-2,
            mu_end: 1e-8,
            shrink: 1.0,
            parallelism: Parallelism::Parallel,
            diagnostics: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnSdpSolution {
    /// Rows `u₀ = e₀, u₁, …, u_n`.
    pub u: DMatrix<f64>,
    /// Rows `v₁, …, v_{m₁}`.
    pub v: DMatrix<f64>,
    /// `r_j = |β_j + Σ_i B_ji⟨u_i,u₀⟩|`.
    pub r: Vec<f64>,
    pub objective: f64,
    pub dual_bound: f64,
    pub delta: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Magnitude reference for tolerances on `inst`.
pub fn nn_scale(inst: &NnOptInstance) -> f64 {
    let d = inst.delta;
    let l1 = |m: &DMatrix<f64>| m.iter().map(|v| v.abs()).sum::<f64>();
    let s = d * l1(&inst.a)
        + inst.c2.iter().map(|v| v.abs()).sum::<f64>()
        + d * inst.c1.iter().map(|v| v.abs()).sum::<f64>()
        + inst.beta.iter().map(|v| v.abs()).sum::<f64>()
        + d * l1(&inst.b)
        + inst.c0.abs();
    s.max(1.0)
}

/// [`solve_nn_sdp_with`] with default settings except `tol`.
pub fn solve_nn_sdp(inst: &NnOptInstance, tol: f64, seed: u64) -> Result<NnSdpSolution> {
    solve_nn_sdp_with(inst, &NnSdpConfig { tol, ..NnSdpConfig::default() }, seed)
}

pub fn solve_nn_sdp_with(inst: &NnOptInstance, cfg: &NnSdpConfig, seed: u64) -> Result<NnSdpSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    if !(inst.delta > 0.0) {
        return Err(Error::invalid("SDP budget must be positive"));
    }
    let runs = par::map_indexed(cfg.restarts.max(1), cfg.parallelism, |r| {
        let mut rng = rng::stream(seed, r as u64);
        ascent(inst, cfg, &mut rng, r)
    });
    let mut best: Option<NnSdpSolution> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.objective > b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    if !best.converged {
        return Err(Error::NetNonConvergence {
            sweeps: best.sweeps,
            objective: best.objective,
            dual_bound: best.dual_bound,
        });
    }
    Ok(best)
}

struct Work<'a> {
    inst: &'a NnOptInstance,
    d: usize,
    /// row-major `u_1..u_n`
    u: Vec<f64>,
    /// row-major `v_1..v_{m₁}`
    v: Vec<f64>,
    shrink: f64,
}

impl Work<'_> {
    fn t(&self, i: usize) -> f64 {
        self.u[i * self.d]
    }

    fn update_v(&mut self) {
        let (d, n) = (self.d, self.inst.n());
        for j in 0..self.inst.m1() {
            let mut l = vec![0.0; d];
            l[0] = self.inst.c2[j];
            for i in 0..n {
                let a = self.inst.a[(j, i)];
                if a != 0.0 {
                    for k in 0..d {
                        l[k] += a * self.u[i * d + k];
                    }
                }
            }
            let norm = l.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for k in 0..d {
                    self.v[j * d + k] = self.shrink * l[k] / norm;
                }
            }
        }
    }

    fn update_u(&mut self, i: usize, mu: f64) {
        let inst = self.inst;
        let (d, n, delta) = (self.d, inst.n(), inst.delta);
        let mut g = vec![0.0; d];
        for j in 0..inst.m1() {
            let a = inst.a[(j, i)];
            if a != 0.0 {
                for k in 0..d {
                    g[k] += a * self.v[j * d + k];
                }
            }
        }
        let g0 = g[0] + inst.c1[i];
        g[0] = 0.0;
        let gp = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let q: Vec<f64> = (0..inst.m2())
            .map(|j| inst.beta[j] + (0..n).filter(|&l| l != i).map(|l| inst.b[(j, l)] * self.t(l)).sum::<f64>())
            .collect();
        let phi = |t: f64| {
            let mut val = gp * (delta * delta - t * t).max(0.0).sqrt() + g0 * t;
            for (j, qj) in q.iter().enumerate() {
                let s = qj + inst.b[(j, i)] * t;
                val -= (s * s + mu * mu).sqrt();
            }
            val
        };
        let t = golden_max(-delta, delta, phi);
        let w = (delta * delta - t * t).max(0.0).sqrt();
        let row = &mut self.u[i * d..(i + 1) * d];
        if gp > 0.0 {
            for k in 1..d {
                row[k] = w * g[k] / gp;
            }
        } else {
            let cur = row[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if cur > 0.0 {
                for k in 1..d {
                    row[k] *= w / cur;
                }
            }
        }
        row[0] = t;
    }

    /// Objective with `|·|` replaced by `√(·² + μ²)`; `mu = 0` is exact.
    fn objective(&self, mu: f64) -> f64 {
        let inst = self.inst;
        let (d, n) = (self.d, inst.n());
        let mut val = inst.c0;
        for j in 0..inst.m1() {
            let vj = &self.v[j * d..(j + 1) * d];
            val += inst.c2[j] * vj[0];
            for i in 0..n {
                let a = inst.a[(j, i)];
                if a != 0.0 {
                    val += a * vj.iter().zip(&self.u[i * d..(i + 1) * d]).map(|(p, q)| p * q).sum::<f64>();
                }
            }
        }
        for i in 0..n {
            val += inst.c1[i] * self.t(i);
        }
        for s in self.minus_terms() {
            val -= (s * s + mu * mu).sqrt();
        }
        val
    }

    fn minus_terms(&self) -> Vec<f64> {
        let inst = self.inst;
        (0..inst.m2())
            .map(|j| inst.beta[j] + (0..inst.n()).map(|i| inst.b[(j, i)] * self.t(i)).sum::<f64>())
            .collect()
    }
}

fn ascent(inst: &NnOptInstance, cfg: &NnSdpConfig, rng: &mut rng::StreamRng, restart: usize) -> NnSdpSolution {
    let (n, m1) = (inst.n(), inst.m1());
    let d = cfg.rank.unwrap_or(n + m1 + 2).max(2);
    let delta = inst.delta;
    let scale = nn_scale(inst);
    let mut u = vec![0.0; n * d];
    for i in 0..n {
        let row = &mut u[i * d..(i + 1) * d];
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        row.iter_mut().for_each(|x| *x *= delta / norm);
    }
    let mut w = Work { inst, d, u, v: vec![0.0; m1 * d], shrink: cfg.shrink };
    w.update_v();

    let mu_scale = inst.beta.iter().map(|b| b.abs()).fold(0.0, f64::max).max(1.0);
    let mut mu = cfg.mu_start;
    let mut sweeps = 0;
    let mut converged = false;
    loop {
        let mu_abs = mu * mu_scale;
        let mut obj = w.objective(mu_abs);
        let mut stage_done = false;
        while sweeps < cfg.max_sweeps {
            sweeps += 1;
            for i in 0..n {
                w.update_u(i, mu_abs);
            }
            w.update_v();
            let next = w.objective(mu_abs);
            let improvement = next - obj;
            obj = next;
            if let Some(sink) = &cfg.diagnostics {
                (sink.0)(&format!(
                    "{{\"event\":\"nn_sdp_sweep\",\"restart\":{restart},\"sweep\":{sweeps},\"mu\":{mu_abs:e},\"objective\":{obj:e},\"improvement\":{improvement:e}}}"
                ));
            }
            if improvement.abs() <= cfg.tol * scale {
                stage_done = true;
                break;
            }
        }
        if !stage_done {
            break;
        }
        if mu <= cfg.mu_end {
            converged = true;
            break;
        }
        mu = (mu * 0.1).max(cfg.mu_end);
    }

    let mut full = DMatrix::zeros(n + 1, d);
    full[(0, 0)] = 1.0;
    for i in 0..n {
        for k in 0..d {
            full[(i + 1, k)] = w.u[i * d + k];
        }
    }
    let v = DMatrix::from_row_slice(m1, d, &w.v);
    let terms = w.minus_terms();
    let mu_final = cfg.mu_end * mu_scale;
    let dual_bound = nn_dual_bound(inst, &full, &v, &terms, mu_final, cfg.shrink);
    NnSdpSolution {
        objective: w.objective(0.0),
        r: terms.iter().map(|s| s.abs()).collect(),
        u: full,
        v,
        dual_bound,
        delta,
        sweeps,
        converged,
    }
}

/// For any `s ∈ [−1,1]^{m₂}`, `−|t_j| ≤ −s_j t_j`, which turns the relaxation
/// into a plain Gram program whose dual bound is computed as in `boxmax`.
/// `s` is the smoothed sign at the solution.
fn nn_dual_bound(inst: &NnOptInstance, u: &DMatrix<f64>, v: &DMatrix<f64>, terms: &[f64], mu: f64, shrink: f64) -> f64 {
    let (n, m1) = (inst.n(), inst.m1());
    let size = 1 + n + m1;
    let s: Vec<f64> = terms.iter().map(|t| t / (t * t + mu * mu).sqrt()).collect();
    let mut c = DMatrix::zeros(size, size);
    c[(0, 0)] = inst.c0 - s.iter().zip(inst.beta.iter()).map(|(a, b)| a * b).sum::<f64>();
    for i in 0..n {
        let lin = inst.c1[i] - (0..inst.m2()).map(|j| s[j] * inst.b[(j, i)]).sum::<f64>();
        c[(0, 1 + i)] = 0.5 * lin;
        c[(1 + i, 0)] = 0.5 * lin;
        for j in 0..m1 {
            c[(1 + i, 1 + n + j)] = 0.5 * inst.a[(j, i)];
            c[(1 + n + j, 1 + i)] = 0.5 * inst.a[(j, i)];
        }
    }
    for j in 0..m1 {
        c[(0, 1 + n + j)] = 0.5 * inst.c2[j];
        c[(1 + n + j, 0)] = 0.5 * inst.c2[j];
    }
    let d = u.ncols();
    let mut rows = DMatrix::zeros(size, d);
    rows.rows_mut(0, n + 1).copy_from(u);
    rows.rows_mut(n + 1, m1).copy_from(v);
    let mut caps = vec![inst.delta * inst.delta; n];
    caps.extend(std::iter::repeat_n(shrink * shrink, m1));
    gram_dual_bound(&c, &caps, &rows)
}

/// Rounded candidate for the network problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnRounding {
    pub z_hat: Vec<f64>,
    /// The rounded `ŷ`, clamped to `[−1, 1]`; diagnostics only.
    pub y_hat: Vec<f64>,
    /// True objective at `z_hat` with the optimal `y`.
    pub value: f64,
    pub linf: f64,
    pub trials: usize,
}

/// `ε = a/√(ln m₁)` clamped to `(0, 1]`, and 1 when `m₁ ≤ 1`.
pub fn rounding_epsilon(a: f64, m1: usize) -> f64 {
    if m1 <= 1 {
        return 1.0;
    }
    (a / (m1 as f64).ln().sqrt()).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Precomputed means and orthogonal parts for asymmetric rounding.
#[derive(Debug, Clone)]
pub struct NnFrame {
    pub mean_z: Vec<f64>,
    pub mean_y: Vec<f64>,
    perp_u: Vec<Vec<f64>>,
    perp_v: Vec<Vec<f64>>,
    eps: f64,
    rank: usize,
}

impl NnFrame {
    pub fn new(sol: &NnSdpSolution, eps: f64) -> Self {
        let d = sol.u.ncols();
        let split = |m: &DMatrix<f64>, skip: usize| {
            let mut means = Vec::new();
            let mut perps = Vec::new();
            for r in skip..m.nrows() {
                means.push(m[(r, 0)]);
                let mut p: Vec<f64> = (0..d).map(|k| m[(r, k)]).collect();
                p[0] = 0.0;
                perps.push(p);
            }
            (means, perps)
        };
        let (mean_z, perp_u) = split(&sol.u, 1);
        let (mean_y, perp_v) = split(&sol.v, 0);
        NnFrame { mean_z, mean_y, perp_u, perp_v, eps, rank: d }
    }

    /// `(ẑ, ŷ)` for one trial, `ŷ` not yet clamped.
    pub fn sample(&self, seed: u64, trial: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rng::stream(seed, trial);
        let zeta: Vec<f64> = (0..self.rank).map(|_| rng.sample(StandardNormal)).collect();
        let dot = |p: &Vec<f64>| p.iter().zip(&zeta).map(|(a, b)| a * b).sum::<f64>();
        let z = self.mean_z.iter().zip(&self.perp_u).map(|(t, p)| t + dot(p) / self.eps).collect();
        let y = self.mean_y.iter().zip(&self.perp_v).map(|(t, p)| t + self.eps * dot(p)).collect();
        (z, y)
    }
}

/// Best of `trials` rounded points, no ℓ∞ cap, with `ε` from constant 1.
pub fn round_nn(sol: &NnSdpSolution, inst: &NnOptInstance, trials: usize, seed: u64) -> Result<NnRounding> {
    round_nn_within(sol, inst, trials, seed, rounding_epsilon(1.0, inst.m1()), None, Parallelism::Parallel)
}

/// Best of `trials` rounded points with `‖ẑ‖∞ ≤ radius`; the mean point
/// `(⟨u_i,u₀⟩)_i` competes too.
pub fn round_nn_within(
    sol: &NnSdpSolution,
    inst: &NnOptInstance,
    trials: usize,
    seed: u64,
    eps: f64,
    radius: Option<f64>,
    parallelism: Parallelism,
) -> Result<NnRounding> {
    if trials == 0 {
        return Err(Error::invalid("rounding needs at least one trial"));
    }
    let frame = NnFrame::new(sol, eps);
    let linf = |z: &[f64]| z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let best = par::argmax_by_key(trials, parallelism, |t| {
        let (z, y) = frame.sample(seed, t as u64);
        if radius.is_some_and(|r| linf(&z) > r * (1.0 + 1e-12)) {
            return None;
        }
        Some((inst.objective(&z), (z, y)))
    });
    let mut best = best.map(|(_, v, zy)| (v, zy));
    let mean = frame.mean_z.clone();
    let mv = inst.objective(&mean);
    if best.as_ref().is_none_or(|(bv, _)| mv > *bv) {
        best = Some((mv, (mean, frame.mean_y.clone())));
    }
    let (value, (z_hat, y)) = best.expect("mean candidate");
    Ok(NnRounding {
        linf: linf(&z_hat),
        z_hat,
        y_hat: y.iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        value,
        trials,
    })
}
