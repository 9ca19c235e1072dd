//! Robust empirical risk minimization for degree-≤2 PTFs.
//!
//! The learner looks for `θ = (coeff, r)` satisfying the program in
//! [`oracle`]. A localizer (accumulated cuts with Chebyshev centers by
//! default, or the ellipsoid method) proposes a center, the separation oracle either
//! accepts it or returns a violated half-space. The robustness cuts come
//! from attacking the current classifier at budget `δ/γ`, so a feasible
//! center is `δ/γ`-robust on the sample with high probability.

mod cutting;
mod ellipsoid;
mod features;
mod oracle;

pub use cutting::ChebyshevLocalizer;
pub use ellipsoid::{CutResult, Ellipsoid};
pub use features::{coeff_to_poly, feature_dim, feature_map};
pub use oracle::{separation_oracle, separation_oracle_with, Cut, CutKind, LearnerState, OracleAnswer, OracleStats};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::attack::AttackConfig;
use crate::boxmax::{brute, gamma_factor};
use crate::error::{Error, Result};
use crate::poly::{robust_empirical_error, BoxOracle, LabeledSet, PtfClassifier, RobustError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Localizer {
    /// Reference implementation with the textbook iteration bound.
    Ellipsoid,
    /// Chebyshev centers of the accumulated cuts; far fewer oracle calls.
    #[default]
    CuttingPlane,
}

#[derive(Debug, Clone, Default)]
pub struct LearnConfig {
    pub localizer: Localizer,
    /// Iteration cap; `None` uses `ceil(10·N²·ln(N·m/κ))` with `N = D + m`.
    pub budget: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Strictness margin; `None` uses `1e-6·(1 + R)`.
    pub kappa: Option<f64>,
    /// Override the approximation factor (1 for degree 1, `4√ln n` otherwise).
    pub gamma: Option<f64>,
    pub attack: AttackConfig,
    pub record_transcript: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnStatus {
    Success,
    /// No ball of radius κ fits in the localizer.
    Infeasible,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub iteration: usize,
    pub kind: CutKind,
    pub index: Option<usize>,
    /// Normalized cut depth.
    pub depth: f64,
    /// Geometric-mean semi-axis (ellipsoid) or inscribed radius (cuts).
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnResult {
    pub f: PtfClassifier,
    pub status: LearnStatus,
    pub degree: usize,
    pub achieved_gamma: f64,
    /// Robust error on the sample at `δ/achieved_gamma`, by an exact oracle
    /// where one is available.
    pub train_robust_error: RobustError,
    pub oracle_calls: usize,
    pub oracle_failures: usize,
    pub iterations: usize,
    pub budget: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub cuts: CutCounts,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutCounts {
    pub norm: usize,
    pub margin: usize,
    pub robust: usize,
}

/// `ceil(8·(C(n+d, d) + ln(1/η)) / ε²)`.
pub fn sample_size(degree: usize, n: usize, epsilon: f64, eta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid("ε and η must lie in (0,1)"));
    }
    let vc = binomial(n + degree, degree) as f64;
    Ok((8.0 * (vc + (1.0 / eta).ln()) / (epsilon * epsilon)).ceil() as u64)
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// [`robust_learn_with`] under the default configuration.
pub fn robust_learn(
    s: &LabeledSet,
    degree: usize,
    delta: f64,
    epsilon: f64,
    eta: f64,
    seed: u64,
    budget: Option<usize>,
) -> Result<LearnResult> {
    let cfg = LearnConfig { budget, ..LearnConfig::default() };
    robust_learn_with(s, degree, delta, epsilon, eta, seed, &cfg)
}

pub fn robust_learn_with(
    s: &LabeledSet,
    degree: usize,
    delta: f64,
    epsilon: f64,
    eta: f64,
    seed: u64,
    cfg: &LearnConfig,
) -> Result<LearnResult> {
    if !(1..=2).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid("δ must be finite and nonnegative"));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid("η must lie in (0,1)"));
    }
    if s.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let n = s.dim();
    let m = s.len();
    let d = feature_dim(degree, n);
    let dim = d + m;
    let big_r = s
        .iter()
        .map(|p| feature_map(degree, &p.x).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let kappa = cfg.kappa.unwrap_or(1e-6 * (1.0 + big_r));
    let gamma = cfg.gamma.unwrap_or(if degree == 1 { 1.0 } else { gamma_factor(cfg.attack.maximize.gamma_constant, n) });
    let nf = dim as f64;
    let budget = cfg
        .budget
        .unwrap_or_else(|| (10.0 * nf * nf * (nf * m as f64 / kappa).ln()).ceil() as usize);
    let eta_prime = eta / (m as f64 * budget.max(1) as f64);
    let radius = (1.0 + m as f64 * big_r * big_r).sqrt();

    let mut loc: Box<dyn Localize> = match cfg.localizer {
        Localizer::Ellipsoid => Box::new(Ellipsoid::ball(dim, radius)),
        Localizer::CuttingPlane => Box::new(ChebyshevLocalizer::new(dim, radius)),
    };
    let stats = OracleStats::default();
    let started = Instant::now();
    let mut transcript = Vec::new();
    let mut cuts = CutCounts::default();
    let mut status = LearnStatus::BudgetExhausted;
    let mut iterations = 0;
    let mut theta = loc.center().to_vec();

    while iterations < budget {
        if cfg.time_limit.is_some_and(|t| started.elapsed() > t) {
            break;
        }
        theta = loc.center().to_vec();
        let state = LearnerState::from_theta(degree, n, &theta, kappa, iterations);
        let answer = oracle::separation_oracle_with(
            &state,
            s,
            delta,
            gamma,
            eta_prime,
            rng::derive_seed(seed, iterations as u64),
            &cfg.attack,
            &stats,
        )?;
        iterations += 1;
        let cut = match answer {
            OracleAnswer::Feasible => {
                status = LearnStatus::Success;
                break;
            }
            OracleAnswer::Cut(c) => c,
        };
        match cut.kind {
            CutKind::Norm => cuts.norm += 1,
            CutKind::Margin => cuts.margin += 1,
            CutKind::Robust => cuts.robust += 1,
        }
        let outcome = loc.cut(&cut.a, cut.b);
        if cfg.record_transcript {
            transcript.push(TranscriptEntry {
                iteration: iterations - 1,
                kind: cut.kind,
                index: cut.index,
                depth: match outcome {
                    CutResult::Shrunk { alpha } => alpha,
                    _ => 1.0,
                },
                size: loc.size(),
            });
        }
        match outcome {
            CutResult::Shrunk { .. } => {
                if loc.size() < kappa {
                    status = LearnStatus::Infeasible;
                    break;
                }
            }
            CutResult::Empty => {
                status = LearnStatus::Infeasible;
                break;
            }
            CutResult::Degenerate => break,
        }
    }

    let state = LearnerState::from_theta(degree, n, &theta, kappa, iterations);
    let f = PtfClassifier::new(coeff_to_poly(degree, n, &state.coeff)?);
    let check = if degree == 1 || n <= brute::MAX_FACES_DIM.min(8) {
        BoxOracle::Exact
    } else {
        BoxOracle::Sdp { eta, seed: rng::derive_seed(seed, u64::MAX), config: cfg.attack.maximize.clone() }
    };
    let train_robust_error = robust_empirical_error(&f, s, delta / gamma, &check)?;
    Ok(LearnResult {
        f,
        status,
        degree,
        achieved_gamma: gamma,
        train_robust_error,
        oracle_calls: stats.calls(),
        oracle_failures: stats.failures(),
        iterations,
        budget,
        kappa,
        epsilon,
        eta,
        cuts,
        transcript,
    })
}

trait Localize {
    fn center(&self) -> &[f64];
    fn cut(&mut self, a: &[f64], b: f64) -> CutResult;
    fn size(&self) -> f64;
}

impl Localize for Ellipsoid {
    fn center(&self) -> &[f64] {
        Ellipsoid::center(self)
    }
    fn cut(&mut self, a: &[f64], b: f64) -> CutResult {
        Ellipsoid::cut(self, a, b)
    }
    fn size(&self) -> f64 {
        self.mean_radius()
    }
}

impl Localize for ChebyshevLocalizer {
    fn center(&self) -> &[f64] {
        ChebyshevLocalizer::center(self)
    }
    fn cut(&mut self, a: &[f64], b: f64) -> CutResult {
        ChebyshevLocalizer::cut(self, a, b)
    }
    fn size(&self) -> f64 {
        self.radius()
    }
}
