//! Adversarial search and certification for a single PTF prediction.
//!
//! For a reference label `y*` the flip polynomial is
//! `h(z) = −y*·g(x* + z)`; a perturbation flips the prediction exactly when
//! `h(z) > 0` (or `≥ 0` when `y* = −1`, since `sgn(0) = +1`). Degree-1 `h`
//! is maximized exactly, degree-2 `h` through the relaxation, whose dual
//! bound doubles as the certificate.

use serde::{Deserialize, Serialize};

use crate::boxmax::{self, MaximizeConfig};
use crate::error::{Error, Result};
use crate::par;
use crate::poly::{is_flip_value, sgn, FlipMode, Label, LabeledSet, PtfClassifier};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Found,
    Certified,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub verdict: Verdict,
    /// Present iff `verdict == Found`.
    pub z: Option<Vec<f64>>,
    /// `‖z‖∞` of the best candidate, found or not.
    pub linf: f64,
    /// Flip-polynomial value `h(z)` of the best candidate.
    pub margin: f64,
    /// Upper bound on `max h` over the δ-ball; present iff `Certified`.
    pub certificate_value: Option<f64>,
    pub gamma_used: f64,
    /// Primal relaxation value, when one was solved.
    pub sdp_value: Option<f64>,
    pub reference_label: Label,
}

#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub maximize: MaximizeConfig,
    /// Degree-2 certificates need a dual bound below `−cert_tol · scale`.
    pub cert_tol: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            maximize: MaximizeConfig::default(),
            cert_tol: 1e-9,
        }
    }
}

/// [`attack_ptf_with`] under the default configuration.
pub fn attack_ptf(
    f: &PtfClassifier,
    x_star: &[f64],
    delta: f64,
    eta: f64,
    mode: FlipMode,
    y: Option<Label>,
    seed: u64,
) -> Result<AttackOutcome> {
    attack_ptf_with(f, x_star, delta, eta, mode, y, seed, &AttackConfig::default())
}

#[allow(clippy::too_many_arguments)]
pub fn attack_ptf_with(
    f: &PtfClassifier,
    x_star: &[f64],
    delta: f64,
    eta: f64,
    mode: FlipMode,
    y: Option<Label>,
    seed: u64,
    cfg: &AttackConfig,
) -> Result<AttackOutcome> {
    Error::check_dim(f.n(), x_star.len())?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("δ must be positive, got {delta}")));
    }
    let g = &f.g;
    let y_star = match (mode, y) {
        (FlipMode::Model, _) => sgn(g.evaluate(x_star)?),
        (FlipMode::Label, Some(y)) => y,
        (FlipMode::Label, None) => return Err(Error::invalid("label mode needs a label")),
    };
    let h = g.shift(x_star)?.negate_for_label(y_star);

    if h.degree() <= 1 {
        let res = boxmax::maximize_linear(h.b().as_slice(), h.c(), delta);
        let found = is_flip_value(res.value, y_star);
        return Ok(AttackOutcome {
            verdict: if found { Verdict::Found } else { Verdict::Certified },
            z: found.then(|| res.x_hat.clone()),
            linf: res.linf,
            margin: res.value,
            certificate_value: (!found).then_some(res.value),
            gamma_used: 1.0,
            sdp_value: None,
            reference_label: y_star,
        });
    }

    let res = boxmax::maximize_quadratic_with(&h, delta, eta, seed, &cfg.maximize)?;
    let gamma = cfg.maximize.gamma(h.n());
    let x_adv: Vec<f64> = x_star.iter().zip(&res.x_hat).map(|(a, b)| a + b).collect();
    let flipped = sgn(g.eval(&x_adv)) != y_star;
    let found = res.value > 0.0 && flipped;
    let dual = res_dual_bound(&h, delta, &res, &cfg.maximize, seed)?;
    let certified = !found && dual < -cfg.cert_tol * res.scale;
    let verdict = if found {
        Verdict::Found
    } else if certified {
        Verdict::Certified
    } else {
        Verdict::Unknown
    };
    Ok(AttackOutcome {
        verdict,
        z: found.then(|| res.x_hat.clone()),
        linf: res.linf,
        margin: res.value,
        certificate_value: certified.then_some(dual),
        gamma_used: gamma,
        sdp_value: res.sdp_value,
        reference_label: y_star,
    })
}

fn res_dual_bound(
    h: &crate::poly::QuadPoly,
    delta: f64,
    res: &boxmax::BoxMaxResult,
    cfg: &MaximizeConfig,
    seed: u64,
) -> Result<f64> {
    match res.dual_bound {
        Some(d) => Ok(d),
        None => {
            let inst = boxmax::build_sdp(h, delta)?;
            Ok(boxmax::solve_sdp_with(&inst, &cfg.sdp, seed)?.dual_bound)
        }
    }
}

/// Per-point entry of a batch; exactly one of `outcome` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub index: usize,
    pub outcome: Option<AttackOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub found: usize,
    pub certified: usize,
    pub unknown: usize,
    pub errors: usize,
    /// `[certified/m, 1 − found/m]`: certified points are δ-robust, found
    /// points are not even γδ-robust.
    pub robust_accuracy_bracket: [f64; 2],
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub entries: Vec<BatchEntry>,
    pub summary: BatchSummary,
}

/// Attack every point of `s`; point `i` uses seed `derive_seed(seed, i)`.
pub fn batch_attack(
    f: &PtfClassifier,
    s: &LabeledSet,
    delta: f64,
    eta: f64,
    mode: FlipMode,
    seed: u64,
    cfg: &AttackConfig,
) -> Result<BatchResult> {
    Error::check_dim(f.n(), s.dim())?;
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("δ must be positive, got {delta}")));
    }
    let points = s.points();
    let entries = par::map_indexed(points.len(), cfg.maximize.parallelism, |i| {
        let p = &points[i];
        let r = attack_ptf_with(f, &p.x, delta, eta, mode, Some(p.y), rng::derive_seed(seed, i as u64), cfg);
        match r {
            Ok(o) => BatchEntry { index: i, outcome: Some(o), error: None },
            Err(e) => BatchEntry { index: i, outcome: None, error: Some(e.to_string()) },
        }
    });
    let summary = summarize(&entries, if f.degree() <= 1 { 1.0 } else { cfg.maximize.gamma(f.n()) });
    Ok(BatchResult { entries, summary })
}

pub fn summarize(entries: &[BatchEntry], gamma: f64) -> BatchSummary {
    let count = |v: Verdict| entries.iter().filter(|e| e.outcome.as_ref().is_some_and(|o| o.verdict == v)).count();
    let (found, certified, unknown) = (count(Verdict::Found), count(Verdict::Certified), count(Verdict::Unknown));
    let total = entries.len();
    let m = total.max(1) as f64;
    BatchSummary {
        total,
        found,
        certified,
        unknown,
        errors: entries.iter().filter(|e| e.error.is_some()).count(),
        robust_accuracy_bracket: if total == 0 { [1.0, 1.0] } else { [certified as f64 / m, 1.0 - found as f64 / m] },
        gamma,
    }
}
