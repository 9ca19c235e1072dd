//! The vector-program relaxation
//!
//! ```text
//! max  Σ A_ij⟨u_i,u_j⟩ + Σ b_i⟨u_i,u₀⟩ + c
//! s.t. ‖u_i‖² ≤ δ²  (i = 1..n),   ‖u₀‖² = 1
//! ```
//!
//! solved by block-coordinate ascent on the factor `U = [u₀; u₁; …; u_n]`
//! with rank `n + 2`. Each block update is an exact maximization:
//! for `i ≥ 1` the objective restricted to `u_i` is `A_ii‖u‖² + ⟨ℓ_i, u⟩`
//! with `ℓ_i = 2Σ_{j≠i} A_ij u_j + b_i u₀`, maximized over the δ-ball in
//! closed form; `u₀` is the normalized linear coefficient `Σ b_i u_i`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::poly::QuadPoly;
use crate::rng;

/// Receives one line-delimited JSON record per solver sweep.
#[derive(Clone)]
pub struct DiagnosticSink(pub Arc<dyn Fn(&str) + Send + Sync>);

impl fmt::Debug for DiagnosticSink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DiagnosticSink")
    }
}

impl DiagnosticSink {
    pub fn stderr() -> Self {
        DiagnosticSink(Arc::new(|line| eprintln!("{line}")))
    }
}

#[derive(Debug, Clone)]
pub struct SdpConfig {
    /// Once a sweep improves the objective by at most `tol · scale`, the
    /// duality gap is checked and the solver stops if it is below
    /// `gap_tol · scale`, or if progress has stalled at rounding level.
    pub tol: f64,
    pub gap_tol: f64,
    pub max_sweeps: usize,
    /// Independent random starts; the best objective wins.
    pub restarts: usize,
    /// Factorization rank; `None` means `n + 2`.
    pub rank: Option<usize>,
    pub parallelism: Parallelism,
    pub diagnostics: Option<DiagnosticSink>,
}

impl Default for SdpConfig {
    fn default() -> Self {
        SdpConfig {
            tol: 1e-12,
            gap_tol: 1e-8,
            max_sweeps: 200_000,
            restarts: 3,
            rank: None,
            parallelism: Parallelism::Parallel,
            diagnostics: None,
        }
    }
}

/// A relaxation instance for `g` at budget `δ`.
#[derive(Debug, Clone)]
pub struct SdpInstance {
    g: QuadPoly,
    delta: f64,
}

pub fn build_sdp(g: &QuadPoly, delta: f64) -> Result<SdpInstance> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("SDP budget must be positive, got {delta}")));
    }
    Ok(SdpInstance { g: g.clone(), delta })
}

impl SdpInstance {
    pub fn poly(&self) -> &QuadPoly {
        &self.g
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn scale(&self) -> f64 {
        self.g.scale(self.delta)
    }

    /// Objective of a factor whose rows are `u₀, u₁, …, u_n`.
    pub fn objective(&self, u: &DMatrix<f64>) -> f64 {
        let n = self.n();
        let a = self.g.a();
        let b = self.g.b();
        let dot = |i: usize, j: usize| u.row(i).dot(&u.row(j));
        let mut val = self.g.c() * dot(0, 0);
        for i in 0..n {
            val += b[i] * dot(i + 1, 0);
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    val += a[(i, j)] * dot(i + 1, j + 1);
                }
            }
        }
        val
    }

    /// `max(|‖u₀‖² − 1|, max_i (‖u_i‖² − δ²)⁺)`.
    pub fn feasibility(&self, u: &DMatrix<f64>) -> f64 {
        let d2 = self.delta * self.delta;
        let mut r = (u.row(0).norm_squared() - 1.0).abs();
        for i in 1..u.nrows() {
            r = r.max(u.row(i).norm_squared() - d2);
        }
        r.max(0.0)
    }

    /// `C` with objective `Σ_kl C_kl⟨u_k,u_l⟩`: `C₀₀ = c`, `C₀ᵢ = b_i/2`,
    /// `Cᵢⱼ = A_ij`.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut c = DMatrix::zeros(n + 1, n + 1);
        c[(0, 0)] = self.g.c();
        for i in 0..n {
            c[(0, i + 1)] = 0.5 * self.g.b()[i];
            c[(i + 1, 0)] = 0.5 * self.g.b()[i];
            for j in 0..n {
                c[(i + 1, j + 1)] = self.g.a()[(i, j)];
            }
        }
        c
    }

    /// Rank-one witness `u₀ = e₀`, `u_i = x_i·e₀` for a box point `x`; its
    /// objective equals `g(x)`.
    pub fn embed(&self, x: &[f64], rank: usize) -> Result<DMatrix<f64>> {
        Error::check_dim(self.n(), x.len())?;
        let mut u = DMatrix::zeros(self.n() + 1, rank.max(1));
        u[(0, 0)] = 1.0;
        for (i, &xi) in x.iter().enumerate() {
            u[(i + 1, 0)] = xi;
        }
        Ok(u)
    }
}

/// Factorized solution; row 0 is `u₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub u: DMatrix<f64>,
    pub objective: f64,
    pub feasibility: f64,
    pub delta: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Weak-duality upper bound on the relaxation optimum, valid for any
    /// iterate. This is what certificates are built on.
    pub dual_bound: f64,
}

impl SdpSolution {
    pub fn n(&self) -> usize {
        self.u.nrows() - 1
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }
}

/// Solve with default settings except for `tol` and the sweep cap.
pub fn solve_sdp(inst: &SdpInstance, tol: f64, max_iters: usize, seed: u64) -> Result<SdpSolution> {
    let cfg = SdpConfig {
        tol,
        max_sweeps: max_iters,
        ..SdpConfig::default()
    };
    solve_sdp_with(inst, &cfg, seed)
}

pub fn solve_sdp_with(inst: &SdpInstance, cfg: &SdpConfig, seed: u64) -> Result<SdpSolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    let restarts = cfg.restarts.max(1);
    let runs = par::map_indexed(restarts, cfg.parallelism, |r| {
        let mut rng = rng::stream(seed, r as u64);
        coordinate_ascent(inst, cfg, &mut rng, r)
    });
    let mut best: Option<Factor> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.objective > b.objective) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let d = best.rank;
    let u = DMatrix::from_row_slice(inst.n() + 1, d, &best.rows);
    let objective = inst.objective(&u);
    let feasibility = inst.feasibility(&u);
    let caps = vec![inst.delta * inst.delta; inst.n()];
    let dual_bound = gram_dual_bound(&inst.cost_matrix(), &caps, &u);
    let sol = SdpSolution {
        u,
        objective,
        feasibility,
        delta: inst.delta,
        sweeps: best.sweeps,
        converged: best.converged,
        dual_bound,
    };
    if !sol.converged {
        return Err(Error::NonConvergence {
            sweeps: best.sweeps,
            last_improvement: best.last_improvement,
            feasibility,
            best: Box::new(sol),
        });
    }
    Ok(sol)
}

const STALL: f64 = 1e-15;

struct Factor {
    rows: Vec<f64>,
    rank: usize,
    objective: f64,
    sweeps: usize,
    converged: bool,
    last_improvement: f64,
}

fn coordinate_ascent(inst: &SdpInstance, cfg: &SdpConfig, rng: &mut rng::StreamRng, restart: usize) -> Factor {
    let n = inst.n();
    let d = cfg.rank.unwrap_or(n + 2).max(2);
    let delta = inst.delta;
    let a = inst.g.a();
    let b = inst.g.b();
    let scale = inst.scale();
    let cost = inst.cost_matrix();
    let caps = vec![delta * delta; n];

    let mut rows = vec![0.0; (n + 1) * d];
    for k in 0..d {
        rows[k] = rng.sample(StandardNormal);
    }
    normalize(&mut rows[0..d], 1.0);
    for i in 1..=n {
        let r = &mut rows[i * d..(i + 1) * d];
        for v in r.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        normalize(r, delta);
    }

    let mut ell = vec![0.0; d];
    let mut obj = objective_rows(inst, &rows, d);
    let mut sweeps = 0;
    let mut last_improvement = f64::INFINITY;
    let mut converged = false;

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        for i in 1..=n {
            let aii = a[(i - 1, i - 1)];
            ell.iter_mut().for_each(|v| *v = 0.0);
            let bi = b[i - 1];
            if bi != 0.0 {
                for k in 0..d {
                    ell[k] += bi * rows[k];
                }
            }
            for j in 1..=n {
                let aij = a[(i - 1, j - 1)];
                if j != i && aij != 0.0 {
                    let uj = &rows[j * d..(j + 1) * d];
                    for k in 0..d {
                        ell[k] += 2.0 * aij * uj[k];
                    }
                }
            }
            let l = norm(&ell);
            let ui = &mut rows[i * d..(i + 1) * d];
            if l > 0.0 {
                let s = if aii >= 0.0 { delta } else { delta.min(l / (2.0 * aii.abs())) };
                for k in 0..d {
                    ui[k] = s * ell[k] / l;
                }
            } else if aii > 0.0 {
                if norm(ui) == 0.0 {
                    ui[1] = 1.0;
                }
                normalize(ui, delta);
            } else if aii < 0.0 {
                ui.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        // u₀ block
        ell.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=n {
            let bi = b[i - 1];
            if bi != 0.0 {
                for k in 0..d {
                    ell[k] += bi * rows[i * d + k];
                }
            }
        }
        if norm(&ell) > 0.0 {
            rows[0..d].copy_from_slice(&ell);
            normalize(&mut rows[0..d], 1.0);
        }

        let new_obj = objective_rows(inst, &rows, d);
        last_improvement = new_obj - obj;
        obj = new_obj;
        if let Some(sink) = &cfg.diagnostics {
            (sink.0)(&format!(
                "{{\"event\":\"sdp_sweep\",\"restart\":{restart},\"sweep\":{sweeps},\"objective\":{obj:e},\"improvement\":{last_improvement:e}}}"
            ));
        }
        if last_improvement.abs() <= cfg.tol * scale {
            if last_improvement.abs() <= STALL * scale {
                converged = true;
                break;
            }
            let u = DMatrix::from_row_slice(n + 1, d, &rows);
            let gap = gram_dual_bound(&cost, &caps, &u) - obj;
            if gap <= cfg.gap_tol * scale {
                converged = true;
                break;
            }
        }
    }
    Factor {
        rows,
        rank: d,
        objective: obj,
        sweeps,
        converged,
        last_improvement,
    }
}

fn objective_rows(inst: &SdpInstance, rows: &[f64], d: usize) -> f64 {
    let n = inst.n();
    let a = inst.g.a();
    let b = inst.g.b();
    let row = |i: usize| &rows[i * d..(i + 1) * d];
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let u0 = row(0);
    let mut val = inst.g.c() * dot(u0, u0);
    for i in 0..n {
        let ui = row(i + 1);
        if b[i] != 0.0 {
            val += b[i] * dot(ui, u0);
        }
        for j in i..n {
            let aij = a[(i, j)];
            if aij != 0.0 {
                let w = if i == j { aij } else { 2.0 * aij };
                val += w * dot(ui, row(j + 1));
            }
        }
    }
    val
}

/// Upper bound on `max Σ C_kl⟨u_k,u_l⟩` subject to `‖u₀‖ = 1` and
/// `‖u_k‖² ≤ caps[k-1]`, from the dual `min μ + Σ caps_k λ_k` over
/// `Diag(μ, λ) − C ⪰ 0, λ ≥ 0`. Multipliers are read off the stationarity
/// conditions at `u`; any negative eigenvalue is repaired by a uniform
/// diagonal shift, so the bound is valid whatever `u` is.
pub(crate) fn gram_dual_bound(c: &DMatrix<f64>, caps: &[f64], u: &DMatrix<f64>) -> f64 {
    let m = c.nrows();
    let g = u * u.transpose();
    let mut diag = vec![0.0; m];
    for k in 0..m {
        // ⟨ℓ_k, u_k⟩ with ℓ_k = 2 Σ_{l≠k} C_kl u_l
        let lu: f64 = 2.0 * (0..m).filter(|&l| l != k).map(|l| c[(k, l)] * g[(k, l)]).sum::<f64>();
        let nk = g[(k, k)];
        diag[k] = if k == 0 {
            c[(0, 0)] + 0.5 * lu
        } else if nk > 0.0 {
            (c[(k, k)] + lu / (2.0 * nk)).max(0.0)
        } else {
            c[(k, k)].max(0.0)
        };
    }
    let mut mat = -c.clone();
    for k in 0..m {
        mat[(k, k)] += diag[k];
    }
    let lam_min = mat.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let norm_c = c.iter().fold(0.0f64, |a, v| a.max(v.abs())) * m as f64;
    // pad for eigenvalue rounding error
    let shift = (-lam_min).max(0.0) + 64.0 * f64::EPSILON * norm_c.max(1.0);
    let mut bound = diag[0] + shift;
    for k in 1..m {
        bound += caps[k - 1] * (diag[k] + shift);
    }
    bound
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64], target: f64) {
    let l = norm(v);
    if l > 0.0 {
        v.iter_mut().for_each(|x| *x *= target / l);
    }
}
