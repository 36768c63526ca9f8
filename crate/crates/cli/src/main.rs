use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncstoch::automata::{check_prop1, monoid_closure, verify_thm2, Automaton, Thm2Config, DEFAULT_MONOID_CAP};
use ncstoch::commutative::{verify_b_equals_lambda_det, verify_lemma5_and_tree_theorem};
use ncstoch::quasidet::{verify_quasidet_basics, verify_retakh_identities, verify_thm6_series};
use ncstoch::report::Report;
use ncstoch::stochastic::{
    parse_scalar_fixture, verify_alpha, verify_fundamental_identity, verify_point, verify_thm1, Thm1Config,
};

/// Exact verification of path-series identities for noncommutative
/// stochastic matrices and unambiguous automata.
#[derive(Parser, Debug)]
#[command(name = "ncstoch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[arg(long, global = true, env = "NCSTOCH_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// C_i = 1, sum P_i^-1 = 1, lambda(C_i) = P_i and the eigenvector equation.
    Thm1(Thm1Args),
    /// The automaton suite: items (i)-(v) under scalar and block weights.
    Thm2(Thm2Args),
    /// (C_i - 1) = (P_ij)(M - 1)gamma and M* = D(C_i*)(P_ij) as series.
    Fundamental(SeriesArgs),
    /// Principal minors, arborescences and the derivative of det(I - A).
    Appendix1(Appendix1Args),
    /// Quasideterminant rules and the stochastic quasiminor identities.
    Quasidet(QuasidetArgs),
    /// Paths avoiding k sum to P_k.
    Thm6(SeriesArgs),
    /// Monoid, minimal ideal and R c = 1.
    Prop1(AutomatonArg),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args, Debug)]
struct Thm1Args {
    #[arg(long, default_value_t = 2, value_parser = positive)]
    n: usize,
    /// Series truncation; 6 by default, 4 for n >= 4.
    #[arg(long, value_parser = positive)]
    degree: Option<usize>,
    /// Block sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2], value_parser = positive)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    trials: usize,
    /// Drop the relation on this row (1-based) to watch the checks fail.
    #[arg(long, value_parser = positive)]
    break_row: Option<usize>,
    /// JSON file with a scalar stochastic matrix to check as well.
    #[arg(long)]
    assignment: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AutomatonArg {
    /// Automaton file; the three-state example when omitted.
    #[arg(long)]
    automaton: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Thm2Args {
    #[command(flatten)]
    automaton: AutomatonArg,
    #[arg(long, default_value_t = 6, value_parser = positive)]
    degree: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2], value_parser = positive)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    trials: usize,
}

#[derive(Args, Debug)]
struct SeriesArgs {
    #[arg(long, default_value_t = 2, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    degree: usize,
}

#[derive(Args, Debug)]
struct Appendix1Args {
    #[arg(long, default_value_t = 3, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    trials: usize,
}

#[derive(Args, Debug)]
struct QuasidetArgs {
    #[arg(long, default_value_t = 3, value_parser = positive)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2], value_parser = positive)]
    k: Vec<usize>,
    #[arg(long, default_value_t = 20, value_parser = positive)]
    trials: usize,
}

fn load_automaton(arg: &AutomatonArg) -> Result<Automaton, String> {
    match &arg.automaton {
        None => Ok(Automaton::example2()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Automaton::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn run(cli: &Cli) -> Result<Report, String> {
    let seed = cli.seed;
    let s = |e: &dyn std::fmt::Display| e.to_string();
    match &cli.command {
        Command::Thm1(a) => {
            let degree = a.degree.unwrap_or(if a.n >= 4 { 4 } else { 6 });
            if a.break_row.is_some_and(|r| r > a.n) {
                return Err(format!("--break-row must be at most {}", a.n));
            }
            let mut cfg = Thm1Config::new(a.n, degree, a.k.clone(), a.trials, seed);
            cfg.break_row = a.break_row.map(|r| r - 1);
            let mut r = verify_thm1(&cfg).map_err(|e| s(&e))?;
            // The symbolic star over rational functions grows fast with n·k.
            let alpha_k: Vec<usize> = a.k.iter().copied().filter(|&k| a.n * k <= 6).collect();
            if cfg.break_row.is_none() && !alpha_k.is_empty() {
                r.parameters.insert("alpha_k".into(), alpha_k.clone().into());
                r.absorb("alpha ", verify_alpha(a.n, &alpha_k, a.trials, seed).map_err(|e| s(&e))?);
            }
            if let Some(p) = &a.assignment {
                let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                let (g, asg) = parse_scalar_fixture(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                let point = verify_point(&g, &asg);
                for (k, v) in &point.parameters {
                    r.parameters.insert(format!("point_{k}"), v.clone());
                }
                r.absorb("", point);
            }
            Ok(r)
        }
        Command::Thm2(a) => {
            let aut = load_automaton(&a.automaton)?;
            verify_thm2(&aut, &Thm2Config::new(a.degree, a.k.clone(), a.trials, seed)).map_err(|e| s(&e))
        }
        Command::Fundamental(a) => verify_fundamental_identity(a.n, a.degree).map_err(|e| s(&e)),
        Command::Appendix1(a) => {
            let mut r = Report::new("appendix1").with_seed(seed).param("n", a.n).param("trials", a.trials);
            let trees = verify_lemma5_and_tree_theorem(a.n, a.trials, seed).map_err(|e| s(&e))?;
            r.absorb("", trees);
            if a.n <= 4 {
                let d = verify_b_equals_lambda_det(a.n).map_err(|e| s(&e))?;
                r.parameters.insert("epsilon".into(), d.parameters["epsilon"].clone());
                r.absorb("", d);
            }
            Ok(r)
        }
        Command::Quasidet(a) => {
            let mut r = Report::new("quasidet").with_seed(seed).param("n", a.n).param("k", a.k.clone()).param("trials", a.trials);
            r.absorb("", verify_quasidet_basics(4, a.trials, seed));
            for &k in &a.k {
                r.absorb("", verify_retakh_identities(a.n, k, a.trials, seed).map_err(|e| s(&e))?);
            }
            Ok(r)
        }
        Command::Thm6(a) => verify_thm6_series(a.n, a.degree).map_err(|e| s(&e)),
        Command::Prop1(a) => {
            let aut = load_automaton(a)?;
            let mon = monoid_closure(&aut, DEFAULT_MONOID_CAP).map_err(|e| s(&e))?;
            let rows = |v: &[Vec<u8>]| v.iter().map(|r| r.iter().map(|b| b.to_string()).collect::<String>()).collect::<Vec<_>>();
            Ok(check_prop1(&aut, &mon)
                .param("min_rank", mon.min_rank)
                .param("ideal_size", mon.ideal.len())
                .param("max_rows", rows(&mon.max_rows))
                .param("max_cols", rows(&mon.max_cols)))
        }
    }
}

fn emit(r: &Report, path: Option<&Path>) -> Result<(), String> {
    let text = r.to_json();
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&report, cli.report.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let bad = report.failures().count();
    eprintln!("{}: {} of {} checks pass", report.command, report.checks.len() - bad, report.checks.len());
    for c in report.failures() {
        eprintln!("  {:?} {}: {}", c.status, c.name, c.witness.as_deref().unwrap_or(&c.residual));
    }
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
