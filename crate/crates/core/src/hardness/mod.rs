//! Point sets from the hardness reductions, and verifiers for their
//! structural properties at toy scale.
//!
//! Both reductions start from a QP instance: a symmetric zero-diagonal `A`
//! and a threshold. Points live in `ℝⁿ⁺¹` with coordinates `(x, z)`.

mod appendix;
mod main_gadget;
mod verify;

pub use appendix::{gen_appendix_gadget, gen_redundant_gadget, AppendixOptions};
pub use main_gadget::{expected_main_count, gen_main_gadget};
pub use verify::{
    pigeonhole_check, verify_counts, verify_intended, verify_no_robust_ptf_candidates, verify_pair_separation,
    verify_uniqueness_rank, CandidateVerdict, PigeonholeReport, RankReport,
};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boxmax::{brute_force_boxmax, BruteMode};
use crate::error::{Error, Result};
use crate::poly::{LabeledSet, PtfClassifier, QuadPoly};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GadgetKind {
    Main,
    Appendix,
    Redundant,
}

/// Everything that went into a gadget, so verifier output can be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadgetParams {
    /// Source QP matrix after scaling.
    pub a: Vec<Vec<f64>>,
    /// Factor applied to the input `A` (and `s`).
    pub scale_factor: f64,
    /// QP threshold `s` (main) after scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// QP threshold `β` (appendix, redundant).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_requested: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_gadget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Number of sampled surface points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Coordinates of sampled points are multiples of `2^-grid_bits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_bits: Option<i32>,
    /// True when every sampled `z` equals `xᵀAx` exactly in floating point.
    #[serde(default)]
    pub surface_exact: bool,
    /// Robustness is judged on the open δ-ball. The paired points sit at
    /// ℓ∞ distance exactly δ from the decision surface.
    pub open_ball: bool,
}

/// A sampled surface point `(x, z = xᵀAx)` and the indices of its `u`/`v`
/// points in the set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: Vec<f64>,
    pub z: f64,
    pub u_index: usize,
    pub v_index: usize,
    /// `|⟨A_i, x⟩| > δ‖A_i‖₁` for every nonzero row `A_i`.
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GadgetInstance {
    pub kind: GadgetKind,
    pub set: LabeledSet,
    pub params: GadgetParams,
    pub intended: PtfClassifier,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surface: Vec<SurfacePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GadgetInstance {
    /// Dimension `n` of the QP (points have `n + 1` coordinates).
    pub fn n(&self) -> usize {
        self.params.a.len()
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.params.a[i][j])
    }
}

pub(crate) fn check_qp_matrix(a: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("QP matrix must be square"));
    }
    for i in 0..n {
        if a[(i, i)] != 0.0 {
            return Err(Error::NonzeroDiagonal { index: i, value: a[(i, i)] });
        }
        for j in 0..n {
            if a[(i, j)] != a[(j, i)] || !a[(i, j)].is_finite() {
                return Err(Error::invalid("QP matrix must be finite and symmetric"));
            }
        }
    }
    Ok(())
}

pub(crate) fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

/// `max_{x ∈ {±1}ⁿ} xᵀAx` by enumeration.
pub fn qp_value(a: &DMatrix<f64>) -> Result<f64> {
    check_qp_matrix(a)?;
    let n = a.nrows();
    let g = QuadPoly::new(a.clone(), nalgebra::DVector::zeros(n), 0.0)?;
    Ok(brute_force_boxmax(&g, 1.0, BruteMode::Vertex)?.value)
}

/// Random symmetric zero-diagonal matrix with integer entries in
/// `[−k, k]`, not all zero.
pub fn random_qp(n: usize, k: i32, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 || k < 1 {
        return Err(Error::invalid("random QP needs n ≥ 2 and k ≥ 1"));
    }
    let mut rng = rng::stream(seed, 0x7170);
    loop {
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(-k..=k) as f64;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        if a.iter().any(|&v| v != 0.0) {
            return Ok(a);
        }
    }
}

/// `(x, z) ↦ sign·(xᵀAx − z)` as a polynomial in `n + 1` variables.
pub(crate) fn lifted(a: &DMatrix<f64>, sign: f64) -> QuadPoly {
    let n = a.nrows();
    let mut big = DMatrix::zeros(n + 1, n + 1);
    big.view_mut((0, 0), (n, n)).copy_from(&(a * sign));
    let mut b = nalgebra::DVector::zeros(n + 1);
    b[n] = -sign;
    QuadPoly::new(big, b, 0.0).expect("square by construction")
}
