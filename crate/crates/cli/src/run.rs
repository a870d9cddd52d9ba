//! Command execution and report files.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use steklov_core::radial::sigma1_ball;
use steklov_core::verify::{
    convergence_study, domain_spectrum, proof_chain_check, question_a_report, sweep_csv, Status, SWEEP_CSV_VERSION,
};
use steklov_core::{RadialWeight, TestDomain, VerificationReport};

use crate::config::{Command, RunConfig};

/// Process exit code of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// Some inequality check fell outside its slack.
    Flagged,
    /// At least one solve failed.
    Failed,
}

impl Verdict {
    pub fn code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Failed => 1,
            Verdict::Flagged => 2,
        }
    }

    fn worst(self, other: Verdict) -> Verdict {
        let rank = |v: Verdict| match v {
            Verdict::Pass => 0,
            Verdict::Flagged => 1,
            Verdict::Failed => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub files: Vec<PathBuf>,
    /// Human-readable summary, one line per run.
    pub lines: Vec<String>,
    /// Failed runs with their identifiers.
    pub errors: Vec<String>,
}

struct Emitted {
    csv: Option<String>,
    json: Value,
    extra: Vec<(String, String)>,
    verdict: Verdict,
    lines: Vec<String>,
    errors: Vec<String>,
}

/// Runs the configured command on a pool of `jobs` workers (all cores when
/// `None`) and writes the reports into the output directory.
pub fn run(cfg: &RunConfig, jobs: Option<usize>) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().context("building worker pool")?;
    let emitted = pool.install(|| execute(cfg))?;

    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let stem = cfg.command.name();
    let mut files = Vec::new();
    let mut write = |name: String, body: &str| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
        Ok(())
    };
    if cfg.output.format.json() {
        let doc = json!({ "config": cfg.to_json(), "result": emitted.json });
        write(format!("{stem}.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    }
    if cfg.output.format.csv() {
        if let Some(csv) = &emitted.csv {
            write(format!("{stem}.csv"), &embed_config(csv, cfg))?;
        }
        for (name, body) in &emitted.extra {
            write(name.clone(), &embed_config(body, cfg))?;
        }
    }
    Ok(Outcome {
        verdict: emitted.verdict,
        files,
        lines: emitted.lines,
        errors: emitted.errors,
    })
}

/// Puts the resolved config on a comment line right after the version line.
fn embed_config(csv: &str, cfg: &RunConfig) -> String {
    let config = format!("# config: {}\n", cfg.to_json());
    match csv.split_once('\n') {
        Some((first, rest)) if first.starts_with('#') => format!("{first}\n{config}{rest}"),
        _ => format!("{config}{csv}"),
    }
}

fn execute(cfg: &RunConfig) -> Result<Emitted> {
    match cfg.command {
        Command::Ball => ball(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Verify => verify(cfg),
        Command::Sweep => sweep(cfg),
        Command::Converge => converge(cfg),
        Command::Chain => chain(cfg),
    }
}

fn single(cfg: &RunConfig) -> (&TestDomain, &RadialWeight) {
    (&cfg.domains[0], &cfg.weights[0])
}

fn run_id(dom: &TestDomain, w: &RadialWeight) -> String {
    format!("domain {} with weight {}", dom.label(), w.label())
}

fn ball(cfg: &RunConfig) -> Result<Emitted> {
    let jobs: Vec<(&RadialWeight, f64)> = cfg.weights.iter().flat_map(|w| cfg.radii.iter().map(move |&r| (w, r))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(w, r)| sigma1_ball(&cfg.space, w, r, &cfg.verify.radial))
        .collect();
    let mut csv = String::from("# steklov-ball v1\nweight,curvature,n,R,sigma1,identity_value,identity_discrepancy\n");
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for ((w, r), res) in jobs.iter().zip(results) {
        let b = res.with_context(|| format!("ball run with weight {} at R = {r}", w.label()))?;
        csv.push_str(&format!(
            "{},{},{},{r},{:.15e},{:.15e},{:.3e}\n",
            w.label(),
            cfg.space.curvature.name(),
            cfg.space.dim,
            b.sigma,
            b.identity_value,
            b.discrepancy
        ));
        lines.push(format!("{} R = {r}: sigma1 = {:.12}", w.label(), b.sigma));
        rows.push(json!({ "weight": w.label(), "R": r, "sigma1": b.sigma, "identity": b }));
    }
    Ok(Emitted {
        csv: Some(csv),
        json: json!({ "rows": rows }),
        extra: Vec::new(),
        verdict: Verdict::Pass,
        lines,
        errors: Vec::new(),
    })
}

fn spectrum(cfg: &RunConfig) -> Result<Emitted> {
    let (dom, w) = single(cfg);
    let s = domain_spectrum(dom, &cfg.space, w, cfg.output.eigenvalues, &cfg.verify).with_context(|| run_id(dom, w))?;
    let mut csv = String::from("# steklov-spectrum v1\nindex,mode,sigma\n");
    for (i, v) in s.eigenvalues.iter().enumerate() {
        let mode = s.modes.as_ref().map_or(String::new(), |m| m[i].to_string());
        csv.push_str(&format!("{i},{mode},{v:.15e}\n"));
    }
    let extra = if s.boundary_eigenvectors.is_empty() {
        Vec::new()
    } else {
        vec![("eigenvectors.csv".to_string(), format!("# steklov-eigenvectors v1\n{}", s.eigenvectors_csv()))]
    };
    let lines = vec![format!(
        "{}: {}",
        dom.label(),
        s.eigenvalues.iter().map(|v| format!("{v:.8}")).collect::<Vec<_>>().join(" ")
    )];
    Ok(Emitted {
        csv: Some(csv),
        json: s.to_json(),
        extra,
        verdict: Verdict::Pass,
        lines,
        errors: Vec::new(),
    })
}

fn report_line(r: &VerificationReport) -> String {
    let status = match r.status {
        Status::Pass => "pass",
        Status::Flagged => "FLAGGED",
    };
    format!(
        "{} with {}: lhs {:.8} rhs {:.8} gap {:+.3e} slack {:.3e} {status}",
        r.domain, r.weight, r.lhs, r.rhs, r.gap, r.slack
    )
}

fn verdict_of(r: &VerificationReport) -> Verdict {
    if r.passed() {
        Verdict::Pass
    } else {
        Verdict::Flagged
    }
}

fn verify(cfg: &RunConfig) -> Result<Emitted> {
    let (dom, w) = single(cfg);
    let r = question_a_report(dom, &cfg.space, w, &cfg.verify).with_context(|| run_id(dom, w))?;
    Ok(Emitted {
        csv: Some(sweep_csv(std::slice::from_ref(&r))),
        json: r.to_json(),
        extra: Vec::new(),
        verdict: verdict_of(&r),
        lines: vec![report_line(&r)],
        errors: Vec::new(),
    })
}

fn sweep(cfg: &RunConfig) -> Result<Emitted> {
    let jobs: Vec<(usize, &TestDomain, &RadialWeight)> = cfg
        .domains
        .iter()
        .flat_map(|d| cfg.weights.iter().map(move |w| (d, w)))
        .enumerate()
        .map(|(i, (d, w))| (i, d, w))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(_, d, w)| question_a_report(d, &cfg.space, w, &cfg.verify))
        .collect();

    let mut reports = Vec::new();
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    let mut lines = Vec::new();
    let mut verdict = Verdict::Pass;
    for (&(i, d, w), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => {
                verdict = verdict.worst(verdict_of(&r));
                lines.push(format!("run {i}: {}", report_line(&r)));
                runs.push(json!({ "run": i, "report": r.to_json() }));
                reports.push(r);
            }
            Err(e) => {
                let msg = format!("run {i} ({}): {e}", run_id(d, w));
                runs.push(json!({ "run": i, "domain": d.label(), "weight": w.label(), "error": e.to_string() }));
                errors.push(msg);
                verdict = Verdict::Failed;
            }
        }
    }
    let csv = sweep_csv(&reports);
    debug_assert!(csv.starts_with(SWEEP_CSV_VERSION));
    Ok(Emitted {
        csv: Some(csv),
        json: json!({ "runs": runs }),
        extra: Vec::new(),
        verdict,
        lines,
        errors,
    })
}

fn converge(cfg: &RunConfig) -> Result<Emitted> {
    let (dom, w) = single(cfg);
    let t = convergence_study(dom, &cfg.space, w, cfg.output.eigenvalues, &cfg.verify).with_context(|| run_id(dom, w))?;
    let lines = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let order = r.order.map_or("-".into(), |p| format!("{p:.2}"));
            format!("sigma{} = {:.10} +- {:.2e} (order {order})", i + 1, r.limit, r.estimate)
        })
        .collect();
    Ok(Emitted {
        csv: Some(t.to_csv()),
        json: serde_json::to_value(&t)?,
        extra: Vec::new(),
        verdict: Verdict::Pass,
        lines,
        errors: Vec::new(),
    })
}

fn chain(cfg: &RunConfig) -> Result<Emitted> {
    let (dom, w) = single(cfg);
    let TestDomain::Planar(d) = dom else {
        anyhow::bail!("chain needs a planar domain");
    };
    let c = proof_chain_check(d, &cfg.space, w, &cfg.verify).with_context(|| run_id(dom, w))?;
    let mut csv = String::from("# steklov-chain v1\nlink,margin,slack,holds\n");
    let mut lines = vec![report_line(&c.brock)];
    for l in &c.links {
        csv.push_str(&format!("{},{:.12e},{:.6e},{}\n", l.name, l.margin, l.slack, l.holds));
        lines.push(format!("{}: margin {:+.3e} slack {:.3e} {}", l.name, l.margin, l.slack, if l.holds { "holds" } else { "FAILS" }));
    }
    let verdict = if c.all_links_hold && c.implication_holds && c.brock.passed() {
        Verdict::Pass
    } else {
        Verdict::Flagged
    };
    Ok(Emitted {
        csv: Some(csv),
        json: serde_json::to_value(&c)?,
        extra: Vec::new(),
        verdict,
        lines,
        errors: Vec::new(),
    })
}
