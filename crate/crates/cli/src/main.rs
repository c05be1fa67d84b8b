use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use matchlab::analysis::Baseline;
use matchlab::da::render_trace_table;
use matchlab::eada::{eada_orbit, run_eada, ConsentSet};
use matchlab::io::{matching_to_json, parse_instance, read_matching};
use matchlab::jbc::run_jbc_with;
use matchlab::oracle::{oracle_report, DEFAULT_BUDGET};
use matchlab::simgen::{
    run_instances, write_instances_csv, AggregateStats, GenConfig, PreferenceModel,
};
use matchlab::sjbc_plus::run_sjbc_plus_with;
use matchlab::{fixtures, Matching, Problem};

/// Improvement mechanisms over student-proposing deferred acceptance.
///
/// Instances are JSON files. A path that does not exist is looked up by file
/// name in $MATCHLAB_FIXTURES, then among the bundled fixtures (ex1.json,
/// exnoeff.json, explus.json, exd.json, exe.json).
///
/// Exit codes: 0 success, 1 failed property check (analyze, oracle),
/// 2 input error.
#[derive(Parser)]
#[command(name = "matchlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Da,
    Jbc,
    #[value(name = "sjbc+")]
    SjbcPlus,
    Eada,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Iid,
    Correlated,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mechanism and print the matching file.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum)]
        mechanism: MechanismArg,
        /// Consent set for eada: `all`, `none`, or names like `i1,i5,i7`
        /// (default `all`).
        #[arg(long)]
        consent: Option<String>,
        /// jbc: print the school graph and its cycles to stderr.
        #[arg(long)]
        graph: bool,
        /// sjbc+: print each expansion step and executed cycle to stderr.
        #[arg(long)]
        log_phases: bool,
        /// Write the matching here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a human-readable assignment table instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Check a matching for justifiability, strong justifiability and
    /// efficiency. Exits 1 when it is not justifiable.
    Analyze {
        instance: PathBuf,
        matching: PathBuf,
    },
    /// Print the deferred acceptance round table (rejected students marked `*`).
    Trace {
        instance: PathBuf,
        /// Emit the full trace as JSON instead.
        #[arg(long)]
        json: bool,
    },
    /// Print envy edges with labels as `i -> j [h1,h2]`.
    Envy { instance: PathBuf },
    /// Brute-force cross-check of every structural claim. Exits 1 on any failure.
    Oracle {
        instance: PathBuf,
        /// Search-node budget for the enumeration.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// EADA outcome for every consent set (at most 20 students).
    EadaOrbit { instance: PathBuf },
    /// Monte-Carlo comparison on random markets; prints
    /// `mechanism,metric,mean,stderr` CSV.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "iid")]
        model: ModelArg,
        /// Correlation weight; required with `--model correlated`.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0.5)]
        consent_frac: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump one row per replication and mechanism.
        #[arg(long)]
        per_instance: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Full scale: 2,000 replications, overriding `--reps`.
        #[arg(long)]
        full: bool,
    },
}

const FULL_REPS: usize = 2000;

fn load_instance(path: &Path) -> Result<Problem> {
    let text = if path.exists() {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .with_context(|| format!("no such instance: {}", path.display()))?;
        let from_env = std::env::var_os("MATCHLAB_FIXTURES")
            .map(|dir| Path::new(&dir).join(name))
            .filter(|p| p.exists());
        match (from_env, fixtures::by_file_name(name)) {
            (Some(p), _) => {
                fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?
            }
            (None, Some(text)) => text.to_owned(),
            (None, None) => bail!("no such instance: {}", path.display()),
        }
    };
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn assignment_table(problem: &Problem, m: &Matching) -> String {
    problem
        .students()
        .map(|i| {
            format!(
                "{}\t{}\n",
                problem.student_name(i),
                problem.slot_name(m.school_of(i))
            )
        })
        .collect()
}

fn solve(
    instance: &Path,
    mechanism: MechanismArg,
    consent: Option<&str>,
    graph: bool,
    log_phases: bool,
    out: Option<&Path>,
    table: bool,
) -> Result<u8> {
    if consent.is_some() && !matches!(mechanism, MechanismArg::Eada) {
        bail!("--consent only applies to --mechanism eada");
    }
    if graph && !matches!(mechanism, MechanismArg::Jbc) {
        bail!("--graph only applies to --mechanism jbc");
    }
    if log_phases && !matches!(mechanism, MechanismArg::SjbcPlus) {
        bail!("--log-phases only applies to --mechanism sjbc+");
    }
    let p = load_instance(instance)?;
    let base = Baseline::new(&p);
    let m = match mechanism {
        MechanismArg::Da => base.da.clone(),
        MechanismArg::Jbc => {
            let (m, g) = run_jbc_with(&p, &base);
            if graph {
                eprint!("{}", g.render(&p));
            }
            m
        }
        MechanismArg::SjbcPlus => {
            let run = run_sjbc_plus_with(&p, &base);
            if log_phases {
                eprint!("{}", run.render_phases(&p));
            }
            run.outcome().clone()
        }
        MechanismArg::Eada => {
            let w = ConsentSet::parse(&p, consent.unwrap_or("all"))?;
            run_eada(&p, &w).0
        }
    };
    let text = if table {
        assignment_table(&p, &m)
    } else {
        matching_to_json(&p, &m)? + "\n"
    };
    emit(out, &text)?;
    Ok(0)
}

fn analyze(instance: &Path, matching: &Path) -> Result<u8> {
    let p = load_instance(instance)?;
    let m =
        read_matching(&p, matching).with_context(|| format!("reading {}", matching.display()))?;
    let verdict = Baseline::new(&p).verdict(&p, &m)?;
    print!("{}", verdict.render(&p));
    Ok(if verdict.justifiable { 0 } else { 1 })
}

fn envy(instance: &Path) -> Result<u8> {
    let p = load_instance(instance)?;
    let base = Baseline::new(&p);
    let mut edges: Vec<_> = base.envy.edges().collect();
    edges.sort();
    let mut out = String::new();
    for (i, j) in edges {
        let label: Vec<&str> = base
            .envy
            .label(&p, i, j)?
            .into_iter()
            .map(|h| p.student_name(h))
            .collect();
        out += &format!(
            "{} -> {} [{}]\n",
            p.student_name(i),
            p.student_name(j),
            label.join(",")
        );
    }
    emit(None, &out)?;
    Ok(0)
}

fn orbit(instance: &Path) -> Result<u8> {
    let p = load_instance(instance)?;
    let da = Baseline::new(&p).da;
    let mut out = String::new();
    for (w, m) in eada_orbit(&p)? {
        let moves: Vec<String> = p
            .students()
            .filter(|&i| m.school_of(i) != da.school_of(i))
            .map(|i| format!("{}->{}", p.student_name(i), p.slot_name(m.school_of(i))))
            .collect();
        let moves = if moves.is_empty() {
            "DA".to_owned()
        } else {
            moves.join(" ")
        };
        out += &format!("{}: {}\n", w.display(&p), moves);
    }
    emit(None, &out)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    n: usize,
    model: ModelArg,
    rho: Option<f64>,
    reps: usize,
    consent_frac: f64,
    seed: u64,
    out: Option<&Path>,
    per_instance: Option<&Path>,
    jobs: Option<usize>,
    full: bool,
) -> Result<u8> {
    let model = match (model, rho) {
        (ModelArg::Iid, None) => PreferenceModel::Iid,
        (ModelArg::Iid, Some(_)) => bail!("--rho only applies to --model correlated"),
        (ModelArg::Correlated, Some(rho)) => PreferenceModel::Correlated { rho },
        (ModelArg::Correlated, None) => bail!("--model correlated requires --rho"),
    };
    let config = GenConfig {
        n,
        model,
        consent_fraction: consent_frac,
        replications: if full { FULL_REPS } else { reps },
        seed,
    };
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .context("starting worker pool")?;
    let instances = pool.install(|| run_instances(&config))?;
    if let Some(path) = per_instance {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_instances_csv(&instances, file)?;
    }
    let stats = AggregateStats::from_instances(config, &instances);
    let mut buf = Vec::new();
    stats.write_csv(&mut buf)?;
    emit(out, &String::from_utf8(buf)?)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve {
            instance,
            mechanism,
            consent,
            graph,
            log_phases,
            out,
            table,
        } => solve(
            &instance,
            mechanism,
            consent.as_deref(),
            graph,
            log_phases,
            out.as_deref(),
            table,
        ),
        Command::Analyze { instance, matching } => analyze(&instance, &matching),
        Command::Trace { instance, json } => {
            let p = load_instance(&instance)?;
            let trace = Baseline::new(&p).trace;
            let text = if json {
                serde_json::to_string_pretty(&trace)? + "\n"
            } else {
                render_trace_table(&p, &trace)
            };
            emit(None, &text)?;
            Ok(0)
        }
        Command::Envy { instance } => envy(&instance),
        Command::Oracle { instance, budget } => {
            let p = load_instance(&instance)?;
            let report = oracle_report(&p, budget)?;
            print!("{}", report.render(&p));
            Ok(if report.all_passed() { 0 } else { 1 })
        }
        Command::EadaOrbit { instance } => orbit(&instance),
        Command::Simulate {
            n,
            model,
            rho,
            reps,
            consent_frac,
            seed,
            out,
            per_instance,
            jobs,
            full,
        } => simulate(
            n,
            model,
            rho,
            reps,
            consent_frac,
            seed,
            out.as_deref(),
            per_instance.as_deref(),
            jobs,
            full,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("matchlab: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
