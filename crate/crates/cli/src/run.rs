//! Command dispatch and report assembly.

use crate::config::{ClassName, Command, EmbedMode, FkMode, Format, KernelChoice, PotentialMode, RunConfig};
use lpkato::geometry::{b0_profile, QuadStatus};
use lpkato::kernels::RadialKernel;
use lpkato::potentials::{
    classify, default_radii, default_tail_radii, local_kato_profile, p_potential, sup_p_potential, tail_profile,
    ClassifyOptions, Region, SupSearch,
};
use lpkato::report::{fmt_sig, profile_table, record_text, Table};
use lpkato::stochastic::{
    exit_time_estimate, feynman_kac_ladder, fk_decay_rate, green_bounded_probe, lifetime_tail, sample_path,
    trace_text, MCEstimate, PathConfig,
};
use lpkato::{forms, selftest, Verdict};
use serde::Serialize;
use std::path::PathBuf;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Everything a command produces.
pub struct Outcome {
    pub headline: Verdict,
    /// A failing self-test fails regardless of `assert_in`.
    pub hard_fail: bool,
    pub tables: Vec<(String, Table)>,
    pub record: toml::Value,
    pub extra_files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    headline: Verdict,
    result: &'a T,
}

fn to_value<T: Serialize>(cfg: &RunConfig, headline: Verdict, result: &T) -> toml::Value {
    toml::Value::try_from(Record {
        command: cfg.command.name(),
        version: VERSION,
        headline,
        result,
    })
    .expect("record serializes")
}

/// Exit status for a finished run.
pub fn exit_code(outcome: &Outcome, assert_in: bool) -> i32 {
    if outcome.hard_fail {
        return EXIT_FAIL;
    }
    match outcome.headline {
        Verdict::In => EXIT_PASS,
        Verdict::Out if assert_in => EXIT_FAIL,
        Verdict::Out => EXIT_PASS,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Header lines shared by every output file.
pub fn header(cfg: &RunConfig) -> Vec<String> {
    vec![
        format!("lpkato {VERSION}"),
        format!("command: {}", cfg.command.name()),
        "config:".into(),
        cfg.to_toml(),
    ]
}

pub fn run(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    match cfg.command {
        Command::Classify => run_classify(cfg),
        Command::Potential => run_potential(cfg),
        Command::Embed => run_embed(cfg),
        Command::Fk => run_fk(cfg),
        Command::B0 => run_b0(cfg),
        Command::KernelsSelftest => run_selftest(cfg),
    }
}

fn search(cfg: &RunConfig, grid: Option<usize>) -> SupSearch {
    let mut s = SupSearch {
        seed: cfg.seed,
        ..SupSearch::default()
    };
    if let Some(g) = grid {
        s.grid = g;
    }
    s
}

fn run_classify(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    let spec = cfg.process.expect("validated");
    let measure = cfg.measure.as_ref().expect("validated");
    let c = &cfg.classify;
    let mut opts = ClassifyOptions {
        search: search(cfg, c.grid),
        lambdas: c.lambdas.clone(),
        origin: c.origin.clone(),
        ..ClassifyOptions::default()
    };
    if let Some(r) = &c.radii {
        opts.radii = r.clone();
    }
    if let Some(r) = &c.tail_radii {
        opts.tail_radii = r.clone();
    }
    let rep = classify(&spec, cfg.p.expect("validated"), measure, &opts)?;
    let v = &rep.verdicts;
    let rows = [
        ("s_k", v.s_k),
        ("s_ek", v.s_ek),
        ("s_d", v.s_d),
        ("s_d0", v.s_d0),
        ("k_local", v.k_local),
        ("k_tail", v.k_tail),
        ("zhao", v.zhao),
        ("chen", v.chen),
    ];
    let mut verdicts = Table::new(["class", "verdict"]);
    for (n, v) in rows {
        verdicts.push(vec![n.into(), v.to_string()]);
    }
    let headline = match c.class {
        ClassName::SK => v.s_k,
        ClassName::SEk => v.s_ek,
        ClassName::SD => v.s_d,
        ClassName::SD0 => v.s_d0,
        ClassName::KLocal => v.k_local,
        ClassName::KTail => v.k_tail,
        ClassName::Zhao => v.zhao,
        ClassName::Chen => v.chen,
    };
    let profiles: Vec<_> = rep.profiles.iter().collect();
    let mut warnings = rep.warnings.clone();
    warnings.extend(v.audit().into_iter().map(|a| format!("inclusion audit: {a}")));
    Ok(Outcome {
        headline,
        hard_fail: false,
        tables: vec![("verdicts".into(), verdicts), ("profiles".into(), profile_table(&profiles))],
        record: to_value(cfg, headline, &rep),
        extra_files: Vec::new(),
        warnings,
    })
}

fn finite_verdict(value: f64, status: QuadStatus) -> Verdict {
    if value.is_infinite() || status == QuadStatus::Infinite {
        Verdict::Out
    } else if status == QuadStatus::Converged {
        Verdict::In
    } else {
        Verdict::Inconclusive
    }
}

fn run_potential(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    let spec = cfg.process.expect("validated");
    let measure = cfg.measure.as_ref().expect("validated");
    let p = cfg.p.expect("validated");
    let s = &cfg.potential;
    let kernel = match s.kernel {
        KernelChoice::Green => RadialKernel::green(spec)?,
        KernelChoice::Resolvent { lambda } => RadialKernel::resolvent(spec, lambda)?,
        KernelChoice::Reference { beta } => RadialKernel::reference(spec.dim, beta),
    };
    let search = search(cfg, s.grid);
    let origin = s.origin.clone().unwrap_or_else(|| vec![0.0; spec.dim]);
    let (headline, table, record, notes) = match s.mode {
        PotentialMode::Local | PotentialMode::Tail => {
            let prof = if s.mode == PotentialMode::Local {
                let radii = s.radii.clone().unwrap_or_else(default_radii);
                local_kato_profile(&kernel, p, measure, &radii, &search)?
            } else {
                let radii = s.radii.clone().unwrap_or_else(default_tail_radii);
                tail_profile(&kernel, p, measure, &origin, &radii, &search)?
            };
            (prof.verdict, profile_table(&[&prof]), to_value(cfg, prof.verdict, &prof), prof.notes.clone())
        }
        PotentialMode::Sup => {
            let r = sup_p_potential(&kernel, p, measure, &Region::all(), &search)?;
            let v = finite_verdict(r.value, r.status);
            let mut t = Table::new(["value", "argmax", "status", "low_confidence"]);
            t.push(vec![
                fmt_sig(r.value),
                r.argmax.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(" "),
                format!("{:?}", r.status).to_lowercase(),
                r.low_confidence.to_string(),
            ]);
            (v, t, to_value(cfg, v, &r), Vec::new())
        }
        PotentialMode::Point => {
            let x = s.x.clone().unwrap_or_else(|| vec![0.0; spec.dim]);
            let r = p_potential(&kernel, p, measure, &x, &Region::all())?;
            let v = finite_verdict(r.value, r.status);
            let mut t = Table::new(["value", "error", "status"]);
            t.push(vec![fmt_sig(r.value), fmt_sig(r.error), format!("{:?}", r.status).to_lowercase()]);
            (v, t, to_value(cfg, v, &r), Vec::new())
        }
    };
    Ok(Outcome {
        headline,
        hard_fail: false,
        tables: vec![("potential".into(), table)],
        record,
        extra_files: Vec::new(),
        warnings: notes,
    })
}

fn run_embed(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    let domain = cfg.domain.as_ref().expect("validated");
    let e = &cfg.embed;
    let rep = match e.mode {
        EmbedMode::Truncation => forms::embedding_truncation_study(domain, &e.lengths, e.h, e.k)?,
        EmbedMode::Dirichlet => forms::dirichlet_eigenvalues(domain, e.k, &e.spacings)?,
    };
    let headline = match (e.mode, rep.verdict) {
        (EmbedMode::Truncation, Some(v)) => v,
        (EmbedMode::Truncation, None) => Verdict::Inconclusive,
        (EmbedMode::Dirichlet, _) if rep.converged => Verdict::In,
        (EmbedMode::Dirichlet, _) => Verdict::Inconclusive,
    };
    let table = Table::from_csv(&rep.to_csv()?)?;
    Ok(Outcome {
        headline,
        hard_fail: false,
        tables: vec![("spectrum".into(), table)],
        record: to_value(cfg, headline, &rep),
        extra_files: Vec::new(),
        warnings: rep.notes.clone(),
    })
}

const MC_COLUMNS: [&str; 7] = ["t", "estimate", "se", "n", "dt", "seed", "bias_note"];

fn mc_row(t: f64, e: &MCEstimate) -> Vec<String> {
    vec![
        fmt_sig(t),
        fmt_sig(e.value),
        fmt_sig(e.se),
        e.n.to_string(),
        fmt_sig(e.dt),
        e.seed.to_string(),
        e.bias_note.clone(),
    ]
}

fn run_fk(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    let spec = cfg.process.expect("validated");
    let f = &cfg.fk;
    let horizon = f.horizon.max(*f.times.last().expect("validated"));
    let mut pc = PathConfig::new(spec, f.dt, horizon, cfg.seed, f.paths);
    pc.domain = cfg.domain.clone();
    let pot = f.potential;
    let v = move |x: &[f64]| pot.eval(x);
    let x0 = f.x0.clone().unwrap_or_else(|| vec![0.0; spec.dim]);
    let points = f.points.clone().unwrap_or_else(|| vec![x0.clone()]);
    let mut warnings = Vec::new();
    let mut extra_files = Vec::new();
    let (table, record) = match f.mode {
        FkMode::Value => {
            let est = feynman_kac_ladder(&pc, v, |_| 1.0, &f.times, &x0)?;
            let mut t = Table::new(MC_COLUMNS);
            for (ti, e) in f.times.iter().zip(&est) {
                t.push(mc_row(*ti, e));
            }
            (t, to_value(cfg, Verdict::In, &est))
        }
        FkMode::Decay => {
            let r = fk_decay_rate(&pc, v, |_| 1.0, &f.times, &points)?;
            let mut t = Table::new(["lambda0", "se", "times", "n", "dt", "seed"]);
            t.push(vec![
                fmt_sig(r.lambda0),
                fmt_sig(r.se),
                r.times.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(" "),
                f.paths.to_string(),
                fmt_sig(f.dt),
                cfg.seed.to_string(),
            ]);
            warnings.extend(r.notes.clone());
            (t, to_value(cfg, Verdict::In, &r))
        }
        FkMode::Exit => {
            let e = exit_time_estimate(&pc, &x0)?;
            let mut t = Table::new(["estimate", "se", "n", "dt", "seed", "bias_note"]);
            t.push(mc_row(0.0, &e)[1..].to_vec());
            if e.censored > 0 {
                warnings.push(format!("{} paths censored at the horizon", e.censored));
            }
            (t, to_value(cfg, Verdict::In, &e))
        }
        FkMode::GreenProbe => {
            let r = green_bounded_probe(&pc, &points)?;
            let mut t = Table::new(["x", "estimate", "se", "n"]);
            for (x, e) in r.points.iter().zip(&r.estimates) {
                t.push(vec![
                    x.iter().map(|v| fmt_sig(*v)).collect::<Vec<_>>().join(" "),
                    fmt_sig(e.value),
                    fmt_sig(e.se),
                    e.n.to_string(),
                ]);
            }
            warnings.extend(r.notes.clone());
            let headline = match r.volume_cap {
                Some(cap) => {
                    let se = r.estimates.iter().map(|e| e.se).fold(0.0, f64::max);
                    if r.sup <= cap + 3.0 * se {
                        Verdict::In
                    } else {
                        Verdict::Out
                    }
                }
                None => Verdict::In,
            };
            return Ok(Outcome {
                headline,
                hard_fail: false,
                tables: vec![("fk".into(), t)],
                record: to_value(cfg, headline, &r),
                extra_files,
                warnings,
            });
        }
        FkMode::Lifetime => {
            let tmax = *f.times.last().expect("validated");
            let r = lifetime_tail(&pc, v, tmax, &points)?;
            let mut t = Table::new(["x", "estimate", "se", "n"]);
            for (x, e) in points.iter().zip(&r.estimates) {
                t.push(vec![
                    x.iter().map(|v| fmt_sig(*v)).collect::<Vec<_>>().join(" "),
                    fmt_sig(e.value),
                    fmt_sig(e.se),
                    e.n.to_string(),
                ]);
            }
            (t, to_value(cfg, Verdict::In, &r))
        }
        FkMode::Trace => {
            let tmax = *f.times.last().expect("validated");
            let path = sample_path(&pc, &x0, tmax, 0)?;
            let text = trace_text(&pc, &path);
            let mut t = Table::new(["steps", "t_end", "exited"]);
            let last = path.last().expect("non-empty");
            let exited = pc.domain.as_ref().is_some_and(|d| !d.contains(&last.1).unwrap_or(true));
            t.push(vec![(path.len() - 1).to_string(), fmt_sig(last.0), exited.to_string()]);
            extra_files.push(("fk-trace.txt".into(), text));
            (t, to_value(cfg, Verdict::In, &path.len()))
        }
    };
    Ok(Outcome {
        headline: Verdict::In,
        hard_fail: false,
        tables: vec![("fk".into(), table)],
        record,
        extra_files,
        warnings,
    })
}

fn run_b0(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    let domain = cfg.domain.as_ref().expect("validated");
    let radii = cfg.b0.radii.clone().unwrap_or_else(default_tail_radii);
    let prof = b0_profile(domain, &radii)?;
    Ok(Outcome {
        headline: prof.verdict,
        hard_fail: false,
        tables: vec![("b0".into(), profile_table(&[&prof]))],
        record: to_value(cfg, prof.verdict, &prof),
        extra_files: Vec::new(),
        warnings: prof.notes.clone(),
    })
}

fn run_selftest(cfg: &RunConfig) -> lpkato::Result<Outcome> {
    let checks = selftest::kernels_selftest()?;
    let mut t = Table::new(["check", "defect", "tolerance", "pass"]);
    for c in &checks {
        t.push(vec![c.name.clone(), fmt_sig(c.defect), fmt_sig(c.tolerance), c.pass.to_string()]);
    }
    let ok = checks.iter().all(|c| c.pass);
    let headline = if ok { Verdict::In } else { Verdict::Out };
    #[derive(Serialize)]
    struct Checks<'a> {
        checks: &'a [selftest::Check],
    }
    Ok(Outcome {
        headline,
        hard_fail: !ok,
        tables: vec![("selftest".into(), t)],
        record: to_value(cfg, headline, &Checks { checks: &checks }),
        extra_files: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Writes report files into `dir`; returns the paths written.
pub fn write_outputs(cfg: &RunConfig, outcome: &Outcome, dir: &PathBuf) -> lpkato::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let head = header(cfg);
    let name = cfg.command.name();
    let mut written = Vec::new();
    match cfg.output.format {
        Format::Csv => {
            for (i, (tname, t)) in outcome.tables.iter().enumerate() {
                let file = if i == 0 {
                    format!("{name}.csv")
                } else {
                    format!("{name}-{tname}.csv")
                };
                let path = dir.join(file);
                std::fs::write(&path, t.to_csv(&head))?;
                written.push(path);
            }
        }
        Format::Record => {
            let path = dir.join(format!("{name}.toml"));
            std::fs::write(&path, record_text(&head, &outcome.record)?)?;
            written.push(path);
        }
    }
    for (file, text) in &outcome.extra_files {
        let path = dir.join(file);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// Terminal summary.
pub fn render_summary(cfg: &RunConfig, outcome: &Outcome) -> String {
    let mut s = format!("lpkato {VERSION} {}\n", cfg.command.name());
    for (name, t) in &outcome.tables {
        s.push_str(&format!("\n[{name}]\n"));
        s.push_str(&t.to_text());
    }
    for w in &outcome.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s.push_str(&format!("\nverdict: {}\n", outcome.headline));
    s
}
