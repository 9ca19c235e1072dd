use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::json;

use robustptf::attack::{batch_attack, AttackConfig};
use robustptf::boxmax::MaximizeConfig;
use robustptf::hardness::{self, AppendixOptions, GadgetInstance, GadgetKind};
use robustptf::learner::{robust_learn_with, sample_size as learner_sample_size, LearnConfig, Localizer};
use robustptf::neural::{self, NetAttackConfig, PgdConfig, TwoLayerNet};
use robustptf::poly::{FlipMode, PtfClassifier};
use robustptf::report::{self, Report};
use robustptf::{io, par};

use crate::config::Resolver;
use crate::{AttackArgs, CaseArg, CheckArg, Common, Invalid, KindArg, LocalizerArg, ModeArg};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn unit_open(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(invalid(format!("--{name} must lie in (0, 1), got {v}")))
    }
}

/// Write through a temporary file so a failed run leaves nothing behind.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, &report.render()),
        None => {
            print!("{}", report.render());
            Ok(())
        }
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

const COMMON_KEYS: [&str; 2] = ["seed", "jobs"];

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    COMMON_KEYS.iter().chain(extra).copied().collect()
}

pub fn attack(a: AttackArgs, command: &str) -> Result<u8> {
    let mut r = Resolver::load(a.common.config.as_deref(), &keys(&["delta", "eta", "mode", "clip"]))?;
    let seed = r.get("seed", a.common.seed, 0u64)?;
    let jobs = r.get_opt("jobs", a.common.jobs)?;
    let delta = positive("delta", r.get("delta", a.delta, 0.1)?)?;
    let eta = unit_open("eta", r.get("eta", a.eta, 0.01)?)?;
    let mode = r.get("mode", a.mode, ModeArg::Label)?;
    let clip = r.get("clip", a.clip.then_some(true), false)?;
    let mut echo = r.echo();
    echo["model"] = json!(path_str(&a.model));
    echo["data"] = json!(path_str(&a.data));

    let f: PtfClassifier = io::load_json(&a.model)?;
    let s = io::load_labeled_csv(&a.data)?;
    let cfg = AttackConfig { maximize: MaximizeConfig { clip, ..Default::default() }, ..Default::default() };
    let mode = match mode {
        ModeArg::Label => FlipMode::Label,
        ModeArg::Model => FlipMode::Model,
    };
    let start = Instant::now();
    let res = par::with_jobs(jobs, || batch_attack(&f, &s, delta, eta, mode, seed, &cfg))?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut rep = Report::new(report::ATTACK, command, echo, Some(seed));
    rep.insert("summary", &res.summary)?.insert("entries", &res.entries)?;
    if !a.common.no_timings {
        rep.timing("total_seconds", elapsed);
    }
    emit(&rep, a.out.as_deref())?;
    let sm = &res.summary;
    eprintln!("{command}: {} points, found {}, certified {}, unknown {}, errors {}", sm.total, sm.found, sm.certified, sm.unknown, sm.errors);
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn attack_net(
    model: PathBuf,
    data: PathBuf,
    delta: Option<f64>,
    alpha: Option<f64>,
    trials: Option<usize>,
    target: Option<Vec<usize>>,
    pgd: bool,
    out: Option<PathBuf>,
    common: Common,
) -> Result<u8> {
    let mut r = Resolver::load(common.config.as_deref(), &keys(&["delta", "alpha", "trials", "target", "pgd"]))?;
    let seed = r.get("seed", common.seed, 0u64)?;
    let jobs = r.get_opt("jobs", common.jobs)?;
    let delta = positive("delta", r.get("delta", delta, 0.1)?)?;
    let alpha = r.get_opt("alpha", alpha)?.map(|a| positive("alpha", a)).transpose()?;
    let trials = r.get("trials", trials, 256usize)?;
    if trials == 0 {
        bail!(invalid("--trials must be at least 1"));
    }
    let target = r.get_opt("target", target)?;
    let pgd = r.get("pgd", pgd.then_some(true), false)?;
    let mut echo = r.echo();
    echo["model"] = json!(path_str(&model));
    echo["data"] = json!(path_str(&data));

    let net: TwoLayerNet = io::load_json(&model)?;
    let s = io::load_labeled_csv(&data)?;
    let target = match target.as_deref() {
        None => None,
        Some([i, j]) => Some((*i, *j)),
        Some(_) => bail!(invalid("--target takes two class indices")),
    };
    let cfg = NetAttackConfig { trials, alpha, target, ..Default::default() };
    let start = Instant::now();
    let (res, pgd_res) = par::with_jobs(jobs, || -> robustptf::Result<_> {
        let res = neural::batch_attack_net(&net, &s, delta, seed, &cfg)?;
        let p = if pgd {
            Some(neural::batch_pgd(&net, &s, delta, seed, &PgdConfig { target, ..Default::default() })?)
        } else {
            None
        };
        Ok((res, p))
    })?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut rep = Report::new(report::ATTACK, "attack-net", echo, Some(seed));
    rep.insert("summary", &res.summary)?.insert("entries", &res.entries)?;
    if let Some(p) = &pgd_res {
        rep.insert("pgd", p)?;
    }
    if !common.no_timings {
        rep.timing("total_seconds", elapsed);
    }
    emit(&rep, out.as_deref())?;
    let sm = &res.summary;
    eprintln!("attack-net: {} points, found {}, certified {}, unknown {}, errors {}", sm.total, sm.found, sm.certified, sm.unknown, sm.errors);
    if let Some(p) = pgd_res {
        eprintln!("pgd: found {}", p.summary.found);
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn learn(
    data: PathBuf,
    degree: Option<usize>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    eta: Option<f64>,
    budget: Option<usize>,
    localizer: Option<LocalizerArg>,
    out: Option<PathBuf>,
    transcript: Option<PathBuf>,
    report_path: Option<PathBuf>,
    common: Common,
) -> Result<u8> {
    let mut r = Resolver::load(common.config.as_deref(), &keys(&["degree", "delta", "epsilon", "eta", "budget", "localizer"]))?;
    let seed = r.get("seed", common.seed, 0u64)?;
    let jobs = r.get_opt("jobs", common.jobs)?;
    let degree = r.get("degree", degree, 1usize)?;
    if !(1..=2).contains(&degree) {
        bail!(invalid(format!("--degree must be 1 or 2, got {degree}")));
    }
    let delta = r.get("delta", delta, 0.1)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        bail!(invalid("--delta must be finite and nonnegative"));
    }
    let epsilon = unit_open("epsilon", r.get("epsilon", epsilon, 0.1)?)?;
    let eta = unit_open("eta", r.get("eta", eta, 0.1)?)?;
    let budget = r.get_opt("budget", budget)?;
    let localizer = r.get("localizer", localizer, LocalizerArg::CuttingPlane)?;
    let mut echo = r.echo();
    echo["data"] = json!(path_str(&data));

    let s = io::load_labeled_csv(&data)?;
    let cfg = LearnConfig {
        budget,
        localizer: match localizer {
            LocalizerArg::Ellipsoid => Localizer::Ellipsoid,
            LocalizerArg::CuttingPlane => Localizer::CuttingPlane,
        },
        record_transcript: transcript.is_some(),
        ..Default::default()
    };
    let start = Instant::now();
    let res = par::with_jobs(jobs, || robust_learn_with(&s, degree, delta, epsilon, eta, seed, &cfg))?;
    let elapsed = start.elapsed().as_secs_f64();

    if let Some(p) = &transcript {
        let mut text = String::new();
        for t in &res.transcript {
            let mut v = serde_json::to_value(t)?;
            report::canonicalize(&mut v);
            text.push_str(&serde_json::to_string(&v)?);
            text.push('\n');
        }
        write_atomic(p, &text)?;
    }
    if let Some(p) = &out {
        let mut text = serde_json::to_string_pretty(&res.f)?;
        text.push('\n');
        write_atomic(p, &text)?;
    }
    let mut summary = res.clone();
    summary.transcript.clear();
    let mut rep = Report::new(report::LEARN, "learn", echo, Some(seed));
    rep.insert("result", &summary)?
        .insert("model_path", out.as_deref().map(path_str))?
        .insert("training_points", s.len())?;
    if !common.no_timings {
        rep.timing("total_seconds", elapsed);
    }
    match &report_path {
        Some(p) => write_atomic(p, &rep.render())?,
        None if out.is_none() => print!("{}", rep.render()),
        None => {}
    }
    eprintln!(
        "learn: {:?} after {} iterations, train robust error {}/{} at δ/{:.4}",
        res.status, res.iterations, res.train_robust_error.flagged, res.train_robust_error.total, res.achieved_gamma
    );
    Ok(0)
}

pub fn sample_size(degree: Option<usize>, n: Option<usize>, epsilon: Option<f64>, eta: Option<f64>, out: Option<PathBuf>, common: Common) -> Result<u8> {
    let mut r = Resolver::load(common.config.as_deref(), &keys(&["degree", "n", "epsilon", "eta"]))?;
    let degree = r.get("degree", degree, 1usize)?;
    if !(1..=2).contains(&degree) {
        bail!(invalid(format!("--degree must be 1 or 2, got {degree}")));
    }
    let n = r.get_opt("n", n)?.ok_or_else(|| invalid("--n is required"))?;
    if n == 0 {
        bail!(invalid("--n must be positive"));
    }
    let epsilon = unit_open("epsilon", r.get("epsilon", epsilon, 0.1)?)?;
    let eta = unit_open("eta", r.get("eta", eta, 0.1)?)?;
    let m = learner_sample_size(degree, n, epsilon, eta)?;
    println!("{m}");
    if let Some(p) = out {
        let mut rep = Report::new(report::SAMPLE_SIZE, "sample-size", r.echo(), None);
        rep.insert("degree", degree)?.insert("n", n)?.insert("epsilon", epsilon)?.insert("eta", eta)?.insert("m", m)?;
        write_atomic(&p, &rep.render())?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn gen_gadget(
    kind: Option<KindArg>,
    n: Option<usize>,
    case: Option<CaseArg>,
    m: Option<usize>,
    delta: Option<f64>,
    out: PathBuf,
    csv: Option<PathBuf>,
    jitter: bool,
    common: Common,
) -> Result<u8> {
    let mut r = Resolver::load(common.config.as_deref(), &keys(&["kind", "n", "case", "m", "delta", "jitter"]))?;
    let seed = r.get("seed", common.seed, 0u64)?;
    let kind = r.get("kind", kind, KindArg::Main)?;
    let n = r.get("n", n, 2usize)?;
    if !(2..=8).contains(&n) {
        bail!(invalid(format!("--n must lie in 2..=8, got {n}")));
    }
    let case = r.get("case", case, CaseArg::Yes)?;
    let m = r.get("m", m, (n + 1) * (n + 1) + 3)?;
    let delta = positive("delta", r.get("delta", delta, 0.125)?)?;
    let jitter = r.get("jitter", jitter.then_some(true), false)?;

    let a = hardness::random_qp(n, 3, seed)?;
    let qp = hardness::qp_value(&a)?;
    let opts = AppendixOptions { jitter, ..Default::default() };
    let inst: GadgetInstance = match kind {
        KindArg::Main => {
            let (a, s) = match case {
                CaseArg::Yes => (a, (qp + 1.0).max(101.0)),
                CaseArg::No => (&a * (404.0 / qp).ceil(), 101.0),
            };
            hardness::gen_main_gadget(&a, s)?
        }
        KindArg::Appendix | KindArg::Redundant => {
            let beta = match case {
                CaseArg::Yes => qp + 1.0,
                CaseArg::No => qp / 2.0,
            };
            if kind == KindArg::Appendix {
                hardness::gen_appendix_gadget(&a, beta, delta, m, seed, &opts)?
            } else {
                hardness::gen_redundant_gadget(&a, beta, delta, seed, &opts)?
            }
        }
    };
    for w in &inst.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = serde_json::to_string_pretty(&inst)?;
    text.push('\n');
    write_atomic(&out, &text)?;
    if let Some(p) = csv {
        let mut buf = Vec::new();
        io::write_labeled_csv(&inst.set, &mut buf)?;
        write_atomic(&p, &String::from_utf8(buf)?)?;
    }
    eprintln!("gen-gadget: {:?} gadget, n = {n}, {} points", inst.kind, inst.set.len());
    Ok(0)
}

pub fn verify_gadget(input: PathBuf, checks: Vec<CheckArg>, delta_prime: Option<f64>, out: Option<PathBuf>, common: Common) -> Result<u8> {
    let mut r = Resolver::load(common.config.as_deref(), &keys(&["delta_prime"]))?;
    let jobs = r.get_opt("jobs", common.jobs)?;
    let inst: GadgetInstance = io::load_json(&input)?;
    let delta_prime = r.get("delta_prime", delta_prime, inst.params.delta)?;
    if !(delta_prime >= 0.0) || !delta_prime.is_finite() {
        bail!(invalid("--delta-prime must be finite and nonnegative"));
    }
    let mut echo = r.echo();
    echo["in"] = json!(path_str(&input));
    let all = checks.contains(&CheckArg::All);
    let want = |c: CheckArg| all || checks.contains(&c);
    let sampled = inst.kind != GadgetKind::Main;
    if !all && !sampled && (checks.contains(&CheckArg::Rank) || checks.contains(&CheckArg::Pairs)) {
        bail!(invalid("rank and pair checks apply to appendix and redundant gadgets"));
    }

    let start = Instant::now();
    let mut results = serde_json::Map::new();
    let mut ok = true;
    if want(CheckArg::Counts) {
        let (actual, expected) = hardness::verify_counts(&inst)?;
        ok &= actual == expected;
        results.insert("counts".into(), json!({"actual": actual, "expected": expected, "ok": actual == expected}));
    }
    if want(CheckArg::Pairs) && sampled {
        let pairs_ok = hardness::verify_pair_separation(&inst);
        ok &= pairs_ok;
        results.insert("pairs".into(), json!({"ok": pairs_ok}));
    }
    if want(CheckArg::Rank) && sampled {
        let rank = hardness::verify_uniqueness_rank(&inst)?;
        let rank_ok = rank.rank + 1 == rank.r && rank.cosine >= 1.0 - 1e-8;
        ok &= rank_ok;
        let mut v = serde_json::to_value(&rank)?;
        v["ok"] = json!(rank_ok);
        results.insert("rank".into(), v);
    }
    if want(CheckArg::Robustness) {
        let v = par::with_jobs(jobs, || hardness::verify_no_robust_ptf_candidates(&inst, &inst.intended, delta_prime))?;
        ok &= v.robust;
        results.insert("robustness".into(), serde_json::to_value(&v)?);
    }
    let elapsed = start.elapsed().as_secs_f64();

    let mut rep = Report::new(report::GADGET_VERIFY, "verify-gadget", echo, inst.params.seed);
    rep.insert("kind", inst.kind)?
        .insert("n", inst.n())?
        .insert("points", inst.set.len())?
        .insert("checks", results)?
        .insert("ok", ok)?;
    if !common.no_timings {
        rep.timing("total_seconds", elapsed);
    }
    emit(&rep, out.as_deref())?;
    eprintln!("verify-gadget: {}", if ok { "all checks passed" } else { "some checks failed" });
    Ok(if ok { 0 } else { 1 })
}

pub fn bench(sizes: Option<Vec<String>>, instances: Option<usize>, delta: Option<f64>, out: Option<PathBuf>, common: Common) -> Result<u8> {
    let mut r = Resolver::load(common.config.as_deref(), &keys(&["sizes", "instances", "delta"]))?;
    let seed = r.get("seed", common.seed, 0u64)?;
    let jobs = r.get_opt("jobs", common.jobs)?;
    let sizes = r.get("sizes", sizes, vec!["4x3".to_string(), "6x4".into(), "8x6".into()])?;
    let instances = r.get("instances", instances, 20usize)?;
    let delta = positive("delta", r.get("delta", delta, 0.3)?)?;
    let cells: Vec<(usize, usize)> = sizes
        .iter()
        .map(|c| {
            let (a, b) = c.split_once('x').ok_or_else(|| invalid(format!("bad size {c:?}, expected NxK")))?;
            let n = a.trim().parse().map_err(|_| invalid(format!("bad size {c:?}")))?;
            let k = b.trim().parse().map_err(|_| invalid(format!("bad size {c:?}")))?;
            if n == 0 || k == 0 {
                return Err(invalid(format!("bad size {c:?}")));
            }
            Ok((n, k))
        })
        .collect::<Result<_>>()?;

    let start = Instant::now();
    let rows = par::with_jobs(jobs, || -> robustptf::Result<Vec<_>> {
        cells
            .iter()
            .enumerate()
            .map(|(i, &(n, k))| {
                neural::paired_comparison(n, k, delta, instances, robustptf::rng::derive_seed(seed, i as u64), &NetAttackConfig::default(), &PgdConfig::default())
            })
            .collect()
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let table = neural::format_table(&rows);
    print!("{table}");
    let mut rep = Report::new(report::BENCH, "bench", r.echo(), Some(seed));
    rep.insert("rows", &rows)?.insert("table", &table)?;
    if !common.no_timings {
        rep.timing("total_seconds", elapsed);
    }
    if let Some(p) = out {
        write_atomic(&p, &rep.render())?;
    }
    Ok(0)
}
