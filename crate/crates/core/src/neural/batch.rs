//! Per-point net attacks over a data set, and the paired SDP-vs-PGD
//! comparison behind the `bench` command.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::attack::{attack_net_with, pgd_attack_with, NetAttackConfig, PgdConfig};
use super::net::TwoLayerNet;
use crate::attack::{summarize, BatchEntry, BatchResult, Verdict};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::poly::LabeledSet;
use crate::rng;

/// SDP attack at every point of `s`, each against the net's own
/// prediction; point `i` uses seed `derive_seed(seed, i)`.
pub fn batch_attack_net(net: &TwoLayerNet, s: &LabeledSet, delta: f64, seed: u64, cfg: &NetAttackConfig) -> Result<BatchResult> {
    Error::check_dim(net.n(), s.dim())?;
    let pts = s.points();
    let entries = par::map_indexed(pts.len(), cfg.parallelism, |i| {
        entry(i, attack_net_with(net, &pts[i].x, delta, rng::derive_seed(seed, i as u64), cfg))
    });
    let gamma = if cfg.alpha.is_some() { 1.0 } else { super::nn_gamma(cfg.gamma_constant, net.n(), net.k()) };
    Ok(BatchResult { summary: summarize(&entries, gamma), entries })
}

pub fn batch_pgd(net: &TwoLayerNet, s: &LabeledSet, delta: f64, seed: u64, cfg: &PgdConfig) -> Result<BatchResult> {
    Error::check_dim(net.n(), s.dim())?;
    let pts = s.points();
    let entries = par::map_indexed(pts.len(), cfg.parallelism, |i| {
        entry(i, pgd_attack_with(net, &pts[i].x, delta, rng::derive_seed(seed, i as u64), cfg))
    });
    Ok(BatchResult { summary: summarize(&entries, 1.0), entries })
}

fn entry(index: usize, r: Result<crate::attack::AttackOutcome>) -> BatchEntry {
    match r {
        Ok(o) => BatchEntry { index, outcome: Some(o), error: None },
        Err(e) => BatchEntry { index, outcome: None, error: Some(e.to_string()) },
    }
}

/// Gaussian net with `W_ji ~ N(0, 1/n)`, `v_j ~ N(0, 1/k)` and no skip term.
pub fn random_net(n: usize, k: usize, classes: usize, seed: u64) -> Result<TwoLayerNet> {
    if n == 0 || k == 0 || classes == 0 {
        return Err(Error::invalid("net dimensions must be positive"));
    }
    let mut r = rng::stream(seed, 0x6e6574);
    let mut g = |s: f64| s * r.sample::<f64, _>(StandardNormal);
    let w = DMatrix::from_fn(k, n, |_, _| g(1.0 / (n as f64).sqrt()));
    let v = DMatrix::from_fn(classes, k, |_, _| g(1.0 / (k as f64).sqrt()));
    TwoLayerNet::new(w, v, DVector::zeros(n))
}

/// Success counts for one `(n, k, δ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub instances: usize,
    pub sdp_found: usize,
    pub pgd_found: usize,
    pub sdp_certified: usize,
    pub both: usize,
    pub sdp_only: usize,
    pub pgd_only: usize,
    pub errors: usize,
}

/// Run both attacks on `instances` random binary nets at random `x*`.
pub fn paired_comparison(
    n: usize,
    k: usize,
    delta: f64,
    instances: usize,
    seed: u64,
    net_cfg: &NetAttackConfig,
    pgd_cfg: &PgdConfig,
) -> Result<PairedRow> {
    let results = par::map_indexed(instances, Parallelism::Parallel, |i| -> Result<(Verdict, Verdict)> {
        let s = rng::derive_seed(seed, i as u64);
        let net = random_net(n, k, 1, s)?;
        let mut r = rng::stream(s, 1);
        let x: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let sdp = attack_net_with(&net, &x, delta, s, &NetAttackConfig { parallelism: Parallelism::Sequential, ..net_cfg.clone() })?;
        let pgd = pgd_attack_with(&net, &x, delta, s, &PgdConfig { parallelism: Parallelism::Sequential, ..pgd_cfg.clone() })?;
        Ok((sdp.verdict, pgd.verdict))
    });
    let mut row = PairedRow {
        n,
        k,
        delta,
        instances,
        sdp_found: 0,
        pgd_found: 0,
        sdp_certified: 0,
        both: 0,
        sdp_only: 0,
        pgd_only: 0,
        errors: 0,
    };
    for r in results {
        match r {
            Ok((a, b)) => {
                let (sf, pf) = (a == Verdict::Found, b == Verdict::Found);
                row.sdp_found += sf as usize;
                row.pgd_found += pf as usize;
                row.sdp_certified += (a == Verdict::Certified) as usize;
                row.both += (sf && pf) as usize;
                row.sdp_only += (sf && !pf) as usize;
                row.pgd_only += (!sf && pf) as usize;
            }
            Err(_) => row.errors += 1,
        }
    }
    Ok(row)
}

/// Plain-text table of success counts.
pub fn format_table(rows: &[PairedRow]) -> String {
    let mut s = String::from("n   k   delta    total  SDP found  PGD found  both  SDP only  PGD only  certified\n");
    for r in rows {
        s.push_str(&format!(
            "{:<3} {:<3} {:<8} {:>5}  {:>9}  {:>9}  {:>4}  {:>8}  {:>8}  {:>9}\n",
            r.n, r.k, r.delta, r.instances, r.sdp_found, r.pgd_found, r.both, r.sdp_only, r.pgd_only, r.sdp_certified
        ));
    }
    s
}
