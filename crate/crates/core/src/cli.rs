//! Batch front end: argument and config-file parsing, and the `run` driver
//! that prints Newton tables and writes CSV files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{convergence_study, error_bound_terms, BoundInputs};
use crate::assembly::assemble;
use crate::catalog::{default_guess, exact_discrete_solution, problem, ProblemId};
use crate::error::{Error, Result};
use crate::grid::{cell_means, CellVector, UniformGrid};
use crate::solver::{newton_solve, InitialGuess, NewtonConfig, NewtonReport};

/// Exit status for a converged run.
pub const EXIT_OK: i32 = 0;
/// Exit status when some Newton run did not converge.
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Exit status for command-line or config errors.
pub const EXIT_USAGE: i32 = 64;
/// Exit status for failures during the computation itself.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "fredholm", version, about = "Product-integration Newton solver for weakly singular Fredholm equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a catalog problem and print the Newton table.
    Run(RunArgs),
    /// List catalog problems.
    List,
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Catalog problem id.
    pub problem: Option<String>,
    /// Same as the positional id.
    #[arg(long = "problem", value_name = "ID")]
    pub problem_flag: Option<String>,
    /// Number of cells, or a comma-separated list.
    #[arg(long, value_name = "N[,N...]")]
    pub n: Option<String>,
    /// Relative stopping tolerance for step and residual (default 1e-14).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Newton iteration limit (default 50).
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// catalog, zeros, ymeans or file.
    #[arg(long)]
    pub guess: Option<String>,
    /// Whitespace-separated cell values for `--guess file`.
    #[arg(long = "guess-file", value_name = "PATH")]
    pub guess_file: Option<PathBuf>,
    /// Backtrack with step factors 1, 1/2, 1/4, 1/8.
    #[arg(long)]
    pub damping: bool,
    /// Run a convergence study over these sizes instead of single solves.
    #[arg(long, value_name = "N,N,...")]
    pub study: Option<String>,
    /// Write the iteration history, or the study rows, as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write A and Y; with several sizes the file name gains `.n<N>`.
    #[arg(long = "dump-matrix", value_name = "PATH")]
    pub dump_matrix: Option<PathBuf>,
    /// Report the computable error-bound terms; needs --m0, --M1 and --M2.
    #[arg(long)]
    pub bound: bool,
    /// Bound on the norm of the linear part at projected arguments.
    #[arg(long)]
    pub m0: Option<f64>,
    /// Bound on the first derivative of the kernel operator.
    #[arg(long = "M1")]
    pub m1: Option<f64>,
    /// Bound on the second derivative of the kernel operator.
    #[arg(long = "M2")]
    pub m2: Option<f64>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuessPolicy {
    Catalog,
    Zeros,
    NegRhs,
    File(PathBuf),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    pub ns: Vec<usize>,
    pub study: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub guess: GuessPolicy,
    pub damping: bool,
    pub csv: Option<PathBuf>,
    pub dump_matrix: Option<PathBuf>,
    pub bound: Option<BoundInputs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub converged: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", lineno + 1)))?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", lineno + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let ns = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid cell count '{}'", t.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::Config("cell counts must be at least 1".into()));
    }
    Ok(ns)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}' for {key}"))),
    }
}

impl RunConfig {
    /// Merge an optional config file with command-line flags, flags winning.
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        for key in file.keys() {
            const KNOWN: [&str; 14] = [
                "problem", "n", "tol", "max_iter", "guess", "guess_file", "damping", "study", "csv",
                "dump_matrix", "bound", "m0", "M1", "M2",
            ];
            if !KNOWN.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key '{key}'")));
            }
        }
        let get = |k: &str| file.get(k).map(String::as_str);

        if args.problem.is_some() && args.problem_flag.is_some() && args.problem != args.problem_flag {
            return Err(Error::Config("problem given twice with different ids".into()));
        }
        let problem_id = args
            .problem_flag
            .as_deref()
            .or(args.problem.as_deref())
            .or(get("problem"))
            .ok_or_else(|| Error::Config("no problem given".into()))?
            .parse::<ProblemId>()?;

        let study_list = args.study.as_deref().or(get("study"));
        let n_list = args.n.as_deref().or(get("n"));
        let (study, ns) = match (study_list, n_list) {
            (Some(s), _) => (true, parse_sizes(s)?),
            (None, Some(n)) => (false, parse_sizes(n)?),
            (None, None) => (false, vec![10]),
        };

        let defaults = NewtonConfig::default();
        let tol = match args.tol {
            Some(t) => t,
            None => get("tol").map(|v| parse_value("tol", v)).transpose()?.unwrap_or(defaults.tol),
        };
        let max_iter = match args.max_iter {
            Some(m) => m,
            None => get("max_iter")
                .map(|v| parse_value("max_iter", v))
                .transpose()?
                .unwrap_or(defaults.max_iter),
        };
        let damping = args.damping || get("damping").map(|v| parse_bool("damping", v)).transpose()?.unwrap_or(false);

        let guess_file = args.guess_file.clone().or_else(|| get("guess_file").map(PathBuf::from));
        let guess = match args.guess.as_deref().or(get("guess")).unwrap_or("catalog") {
            "catalog" => GuessPolicy::Catalog,
            "zeros" => GuessPolicy::Zeros,
            "ymeans" => GuessPolicy::NegRhs,
            "file" => GuessPolicy::File(
                guess_file.ok_or_else(|| Error::Config("--guess file needs --guess-file PATH".into()))?,
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown guess '{other}' (expected catalog, zeros, ymeans or file)"
                )))
            }
        };

        let want_bound = args.bound || get("bound").map(|v| parse_bool("bound", v)).transpose()?.unwrap_or(false);
        let constant = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
            match flag {
                Some(v) => Ok(Some(v)),
                None => get(key).map(|v| parse_value(key, v)).transpose(),
            }
        };
        let bound = if want_bound {
            let (m0, m1, m2) = (constant(args.m0, "m0")?, constant(args.m1, "M1")?, constant(args.m2, "M2")?);
            match (m0, m1, m2) {
                (Some(m0), Some(big_m1), Some(big_m2)) => {
                    let b = BoundInputs { m0, big_m1, big_m2 };
                    b.validate()?;
                    Some(b)
                }
                _ => return Err(Error::Config("--bound requires --m0, --M1 and --M2".into())),
            }
        } else {
            None
        };

        let cfg = RunConfig {
            problem: problem_id,
            ns,
            study,
            tol,
            max_iter,
            guess,
            damping,
            csv: args.csv.clone().or_else(|| get("csv").map(PathBuf::from)),
            dump_matrix: args.dump_matrix.clone().or_else(|| get("dump_matrix").map(PathBuf::from)),
            bound,
        };
        cfg.newton(InitialGuess::Zeros).validate()?;
        Ok(cfg)
    }

    fn newton(&self, guess: InitialGuess) -> NewtonConfig {
        NewtonConfig {
            guess,
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
        }
    }

    fn initial_guess(&self, a: f64, b: f64) -> Result<InitialGuess> {
        Ok(match &self.guess {
            GuessPolicy::Catalog => default_guess(self.problem),
            GuessPolicy::Zeros => InitialGuess::Zeros,
            GuessPolicy::NegRhs => InitialGuess::NegRhs,
            GuessPolicy::File(path) => InitialGuess::User(read_guess(path, a, b)?),
        })
    }
}

/// Cell values from a whitespace-separated file, on a uniform grid of `[a, b]`
/// with as many cells as values.
pub fn read_guess(path: &Path, a: f64, b: f64) -> Result<CellVector> {
    let text = fs::read_to_string(path)?;
    let values = text
        .split_whitespace()
        .map(|t| parse_value::<f64>("guess file", t))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Config(format!("guess file {} is empty", path.display())));
    }
    CellVector::new(UniformGrid::new(a, b, values.len())?, values)
}

/// Two significant digits in the `1.5e-01` style of printed tables.
pub fn format_table_value(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.1e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            let sign = if e < 0 { '-' } else { '+' };
            format!("{mant}e{sign}{:02}", e.abs())
        }
        None => s,
    }
}

fn matrix_path(base: &Path, n: usize, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let mut name = base.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".n{n}"));
    if let Some(ext) = base.extension() {
        name.push(".");
        name.push(ext);
    }
    base.with_file_name(name)
}

fn write_table<W: Write>(out: &mut W, n: usize, rep: &NewtonReport) -> Result<()> {
    writeln!(out, "n = {n}")?;
    let errs = rep.relative_errors.as_ref();
    writeln!(out, "{:>4}  {:>10}  {:>10}", "k", "rel.error", "residual")?;
    for k in 0..rep.iterates.len() {
        let e = errs.map(|e| format_table_value(e[k])).unwrap_or_else(|| "-".into());
        writeln!(out, "{k:>4}  {e:>10}  {:>10}", format_table_value(rep.residual_norms[k]))?;
    }
    if rep.converged {
        writeln!(out, "converged after {} iterations", rep.iterations)?;
    } else {
        let why = rep.failure.as_ref().map(|f| f.to_string()).unwrap_or_default();
        writeln!(out, "not converged after {} iterations: {why}", rep.iterations)?;
    }
    writeln!(out, "condition estimate {:.3e}", rep.jacobian_condition_estimate)?;
    Ok(())
}

fn write_iteration_csv<W: Write>(out: &mut W, runs: &[(usize, NewtonReport)]) -> Result<()> {
    writeln!(out, "n,k,relative_error,residual,step")?;
    for (n, rep) in runs {
        for k in 0..rep.iterates.len() {
            let e = rep
                .relative_errors
                .as_ref()
                .map(|e| format!("{:.16e}", e[k]))
                .unwrap_or_default();
            writeln!(
                out,
                "{n},{k},{e},{:.16e},{:.16e}",
                rep.residual_norms[k], rep.step_norms[k]
            )?;
        }
    }
    Ok(())
}

/// Execute a run, writing the human-readable report to `out`.
pub fn run<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<RunOutcome> {
    let p = problem(cfg.problem);
    let guess = cfg.initial_guess(p.a, p.b)?;
    let newton = cfg.newton(guess);
    writeln!(out, "# {}: {}", cfg.problem, cfg.problem.title())?;

    if cfg.study {
        let result = convergence_study(&p, &cfg.ns, &newton, cfg.bound.as_ref())?;
        match &cfg.csv {
            Some(path) => {
                result.write_csv(fs::File::create(path)?)?;
                let mut tmp = Vec::new();
                result.write_csv(&mut tmp)?;
                out.write_all(&tmp)?;
            }
            None => result.write_csv(&mut *out)?,
        }
        if let Some(order) = result.order {
            writeln!(out, "# estimated order {order:.3}")?;
        }
        return Ok(RunOutcome {
            converged: result.rows.iter().all(|r| r.converged),
        });
    }

    let several = cfg.ns.len() > 1;
    let mut runs = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let g = p.grid(n)?;
        let sys = assemble(&p, &g)?;
        if let Some(base) = &cfg.dump_matrix {
            sys.write_matrix(fs::File::create(matrix_path(base, n, several))?)?;
        }
        let reference = match exact_discrete_solution(cfg.problem, &g) {
            Some(c) => Some(c),
            None => match &p.reference {
                Some(phi) => Some(cell_means(phi.as_ref(), &g)?),
                None => None,
            },
        };
        let rep = newton_solve(&sys, &newton, reference.as_ref())?;
        write_table(out, n, &rep)?;
        if let (Some(b), Some(phi)) = (&cfg.bound, &p.reference) {
            let v = error_bound_terms(&p.smooth, phi.as_ref(), &g, b)?;
            writeln!(out, "bound terms {v:.16e}")?;
        }
        writeln!(out)?;
        runs.push((n, rep));
    }
    if let Some(path) = &cfg.csv {
        let mut f = fs::File::create(path)?;
        write_iteration_csv(&mut f, &runs)?;
    }
    Ok(RunOutcome {
        converged: runs.iter().all(|(_, r)| r.converged),
    })
}

/// Parse arguments, run, and return the process exit status.
pub fn main_with_args<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match cli.command {
        Command::List => {
            for id in ProblemId::ALL {
                let _ = writeln!(out, "{:<16} {}", id.as_str(), id.title());
            }
            EXIT_OK
        }
        Command::Run(args) => {
            let cfg = match RunConfig::from_args(&args) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            match run(&cfg, out) {
                Ok(outcome) => outcome.exit_code(),
                Err(e @ Error::Config(_)) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_USAGE
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_FAILURE
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> RunArgs {
        let mut v = vec!["fredholm", "run"];
        v.extend_from_slice(extra);
        match Cli::try_parse_from(v).unwrap().command {
            Command::Run(a) => a,
            Command::List => unreachable!(),
        }
    }

    #[test]
    fn table_values_use_two_digit_exponents() {
        assert_eq!(format_table_value(0.15), "1.5e-01");
        assert_eq!(format_table_value(2.9e-16), "2.9e-16");
        assert_eq!(format_table_value(0.0), "0.0e+00");
        assert_eq!(format_table_value(12.0), "1.2e+01");
    }

    #[test]
    fn config_text_parsing() {
        let m = parse_config_text("# run\nproblem = example2  # inline\n\nmax-iter=8\n").unwrap();
        assert_eq!(m.get("problem").unwrap(), "example2");
        assert_eq!(m.get("max_iter").unwrap(), "8");
        assert!(parse_config_text("no equals sign").is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "problem = example2\nn = 20\ntol = 1e-10\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = RunConfig::from_args(&args(&["--config", p, "--n", "10,100"])).unwrap();
        assert_eq!(cfg.problem, ProblemId::Example2);
        assert_eq!(cfg.ns, vec![10, 100]);
        assert_eq!(cfg.tol, 1e-10);
        let cfg = RunConfig::from_args(&args(&["--config", p, "example1-sinpi"])).unwrap();
        assert_eq!(cfg.problem, ProblemId::Example1SinPi);
    }

    #[test]
    fn usage_errors() {
        assert!(RunConfig::from_args(&args(&[])).is_err());
        assert!(RunConfig::from_args(&args(&["example3"])).is_err());
        assert!(RunConfig::from_args(&args(&["example2", "--n", "0"])).is_err());
        assert!(RunConfig::from_args(&args(&["example2", "--bound", "--m0", "1"])).is_err());
        assert!(RunConfig::from_args(&args(&["example2", "--guess", "file"])).is_err());
        assert!(RunConfig::from_args(&args(&["example2", "--max-iter", "0"])).is_err());
    }

    #[test]
    fn exit_codes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(main_with_args(["fredholm", "run", "nope"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(main_with_args(["fredholm", "--bogus"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(main_with_args(["fredholm", "--help"], &mut out, &mut err), EXIT_OK);
        assert_eq!(main_with_args(["fredholm", "run", "example1-sinpi", "--n", "4"], &mut out, &mut err), EXIT_OK);
    }

    #[test]
    fn matrix_paths_for_several_sizes() {
        let base = Path::new("/tmp/a.txt");
        assert_eq!(matrix_path(base, 10, false), PathBuf::from("/tmp/a.txt"));
        assert_eq!(matrix_path(base, 10, true), PathBuf::from("/tmp/a.n10.txt"));
    }
}
