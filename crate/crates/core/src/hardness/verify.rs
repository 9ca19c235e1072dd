use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{expected_main_count, GadgetInstance, GadgetKind};
use crate::attack::{attack_ptf, Verdict};
use crate::boxmax::brute::{MAX_FACES_DIM, MAX_VERTEX_DIM};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::poly::{has_flip, BoxOracle, FlipMode, PtfClassifier};
use crate::rng;

/// Open-ball checks run on the closed ball of radius `δ·(1 − 2⁻²⁰)`.
const OPEN_BALL_SHRINK: f64 = 1.0 - 1.0 / (1u64 << 20) as f64;

/// Number of points the generator should have emitted.
pub fn verify_counts(inst: &GadgetInstance) -> Result<(usize, usize)> {
    let n = inst.n();
    let expected = match inst.kind {
        GadgetKind::Main => expected_main_count(n),
        GadgetKind::Appendix => 2 * inst.params.m.ok_or_else(|| Error::invalid("appendix gadget without m"))? + 1,
        GadgetKind::Redundant => 3 * n * n * n,
    };
    Ok((inst.set.len(), expected))
}

/// Do the two points of every surface pair differ by exactly `2δ` in every
/// coordinate? Compared bit for bit, no tolerance.
pub fn verify_pair_separation(inst: &GadgetInstance) -> bool {
    let two_d = 2.0 * inst.params.delta;
    let pts = inst.set.points();
    !inst.surface.is_empty()
        && inst.surface.iter().all(|sp| {
            let (u, v) = (&pts[sp.u_index].x, &pts[sp.v_index].x);
            u.iter().zip(v).all(|(a, b)| (a - b).abs() == two_d)
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateVerdict {
    pub delta: f64,
    pub open_ball: bool,
    /// `exact` or `sdp`.
    pub oracle: String,
    pub plain_errors: Vec<usize>,
    /// Points with a flip inside the ball.
    pub robust_failures: Vec<usize>,
    /// SDP path only: points that were neither certified nor flipped.
    pub unresolved: Vec<usize>,
    /// Zero plain error and certified robustness at every point.
    pub robust: bool,
}

/// Is `candidate` correct on every point and δ′-robust at each of them?
/// Exact box oracles when the dimension allows, SDP certificates otherwise.
pub fn verify_no_robust_ptf_candidates(inst: &GadgetInstance, candidate: &PtfClassifier, delta_prime: f64) -> Result<CandidateVerdict> {
    Error::check_dim(inst.set.dim(), candidate.n())?;
    if !(delta_prime >= 0.0) {
        return Err(Error::invalid("δ′ must be nonnegative"));
    }
    let dim = inst.set.dim();
    let g = &candidate.g;
    let exact = dim <= MAX_FACES_DIM || (g.has_zero_diagonal() && dim <= MAX_VERTEX_DIM) || g.degree() <= 1;
    let radius = if inst.params.open_ball { delta_prime * OPEN_BALL_SHRINK } else { delta_prime };
    let pts = inst.set.points();
    // 0 ok, 1 plain error, 2 flip, 3 unresolved
    let status = par::map_indexed(pts.len(), Parallelism::Parallel, |i| -> Result<u8> {
        let p = &pts[i];
        if candidate.classify(&p.x)? != p.y {
            return Ok(1);
        }
        if radius == 0.0 {
            return Ok(0);
        }
        if exact {
            return Ok(if has_flip(g, &p.x, p.y, radius, &BoxOracle::Exact)? { 2 } else { 0 });
        }
        let out = attack_ptf(candidate, &p.x, radius, 0.01, FlipMode::Label, Some(p.y), rng::derive_seed(0x6761, i as u64))?;
        Ok(match out.verdict {
            Verdict::Certified => 0,
            Verdict::Found if out.linf <= radius => 2,
            _ => 3,
        })
    });
    let mut v = CandidateVerdict {
        delta: delta_prime,
        open_ball: inst.params.open_ball,
        oracle: if exact { "exact" } else { "sdp" }.to_string(),
        plain_errors: Vec::new(),
        robust_failures: Vec::new(),
        unresolved: Vec::new(),
        robust: false,
    };
    for (i, s) in status.into_iter().enumerate() {
        match s? {
            1 => v.plain_errors.push(i),
            2 => v.robust_failures.push(i),
            3 => v.unresolved.push(i),
            _ => {}
        }
    }
    v.robust = v.plain_errors.is_empty() && v.robust_failures.is_empty() && v.unresolved.is_empty();
    Ok(v)
}

/// The intended classifier at the gadget's own δ.
pub fn verify_intended(inst: &GadgetInstance) -> Result<CandidateVerdict> {
    verify_no_robust_ptf_candidates(inst, &inst.intended, inst.params.delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub m: usize,
    /// Number of monomials, `C(n+1, 2) + 2n + 3`.
    pub r: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Null direction in monomial coordinates, unit norm, sign fixed so
    /// the `z` entry is nonnegative.
    pub null_vector: Vec<f64>,
    /// Coefficients of `z − xᵀAx` in the same coordinates.
    pub expected: Vec<f64>,
    pub cosine: f64,
}

/// Monomials `(1, x, x_i x_j (i ≤ j), x_i z, z², z)`.
fn monomials(x: &[f64], z: f64) -> Vec<f64> {
    let n = x.len();
    let mut f = Vec::with_capacity((n + 1) * n / 2 + 2 * n + 3);
    f.push(1.0);
    f.extend_from_slice(x);
    for i in 0..n {
        for j in i..n {
            f.push(x[i] * x[j]);
        }
    }
    f.extend(x.iter().map(|xi| xi * z));
    f.push(z * z);
    f.push(z);
    f
}

/// Rank of the monomial matrix of the sampled surface points, and its null
/// direction. Columns are normalized before the SVD because their
/// magnitudes range over `ρ⁰ … ρ⁴`; the threshold is `1e-8·σ_max` on the
/// normalized matrix.
pub fn verify_uniqueness_rank(inst: &GadgetInstance) -> Result<RankReport> {
    if inst.kind == GadgetKind::Main {
        return Err(Error::invalid("rank check applies to sampled gadgets only"));
    }
    let n = inst.n();
    let m = inst.surface.len();
    if m <= (n + 1) * (n + 1) {
        return Err(Error::invalid(format!("need more than (n+1)² = {} surface points, have {m}", (n + 1) * (n + 1))));
    }
    let rows: Vec<Vec<f64>> = inst.surface.iter().map(|s| monomials(&s.x, s.z)).collect();
    let r = rows[0].len();
    let mut mat = DMatrix::from_fn(m, r, |i, j| rows[i][j]);
    let norms: Vec<f64> = (0..r).map(|j| mat.column(j).norm()).collect();
    for (j, &nj) in norms.iter().enumerate() {
        if nj > 0.0 {
            mat.column_mut(j).scale_mut(1.0 / nj);
        }
    }
    let svd = mat.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let smax = singular_values[0];
    let rank = singular_values.iter().filter(|&&s| s > 1e-8 * smax).count();
    let last = *order.last().expect("r > 0");
    let mut null: Vec<f64> = (0..r).map(|j| if norms[j] > 0.0 { v_t[(last, j)] / norms[j] } else { 0.0 }).collect();
    let nn = null.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if null[r - 1] < 0.0 { -1.0 } else { 1.0 };
    null.iter_mut().for_each(|v| *v *= sign / nn);

    let a = inst.a_matrix();
    let mut expected = vec![0.0; r];
    let mut k = 1 + n;
    for i in 0..n {
        for j in i..n {
            expected[k] = if i == j { -a[(i, i)] } else { -2.0 * a[(i, j)] };
            k += 1;
        }
    }
    expected[r - 1] = 1.0;
    let en = expected.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cosine = null.iter().zip(&expected).map(|(p, q)| p * q).sum::<f64>().abs() / en;
    Ok(RankReport { m, r, rank, singular_values, null_vector: null, expected, cosine })
}

/// Counting argument for the redundant gadget with `N₁ = n³` repeated
/// points and `N₂ = 2n³` paired points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PigeonholeReport {
    pub n: usize,
    pub eps: f64,
    pub total: usize,
    /// `⌈(1−ε)·N⌉`.
    pub subset_size: usize,
    /// Fewest repeated points any subset of that size can contain.
    pub min_type_a: usize,
    /// Fewest complete pairs any subset of that size can contain.
    pub min_pairs: usize,
    /// `N₁ > ε(N₁ + N₂)`.
    pub sound1: bool,
    /// `(1−ε)(N₁ + N₂) > N₁ + N₂/2 + (n+1)²`.
    pub sound2: bool,
}

impl PigeonholeReport {
    pub fn holds(&self) -> bool {
        self.sound1 && self.sound2 && self.min_type_a >= 1 && self.min_pairs >= (self.n + 1) * (self.n + 1)
    }
}

pub fn pigeonhole_check(n: usize, eps: f64) -> PigeonholeReport {
    let n1 = n * n * n;
    let n2 = 2 * n1;
    let total = n1 + n2;
    let subset_size = ((1.0 - eps) * total as f64).ceil() as usize;
    PigeonholeReport {
        n,
        eps,
        total,
        subset_size,
        min_type_a: subset_size.saturating_sub(n2),
        min_pairs: subset_size.saturating_sub(n1 + n2 / 2),
        sound1: n1 as f64 > eps * total as f64,
        sound2: (1.0 - eps) * total as f64 > (n1 + n2 / 2 + (n + 1) * (n + 1)) as f64,
    }
}
