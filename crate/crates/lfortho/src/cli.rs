//! Command-line front end: `compute`, `verify` and `lf`.
//!
//! Settings come from flags, optionally layered over a flat `key=value` config
//! file (`--config`); flags win. Exit codes: 0 ok, 1 verification failed,
//! 2 invalid input, 3 singular minor, 4 non-convergent series, 5 unsupported
//! for the family, 6 other numerical failure, 7 I/O.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::error::Error;
use crate::hankel::Pipeline;
use crate::lf::forward_run;
use crate::precision::{parse_real, PrecisionContext};
use crate::report::{CoefficientTable, ForwardTable, Manifest, VerificationReport};
use crate::verify::{self, Options};
use crate::weights::{Family, FamilySpec};

#[derive(Debug, Parser)]
#[command(name = "lfortho", version, about = "Discrete hypergeometric orthogonal polynomials: coefficients and identity checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tables of ρ_n, H_n, β_n, γ_n, p¹_n for n < order
    Compute,
    /// Run residual suites and write a verification report
    Verify,
    /// Forward Laguerre-Freud recursion against the factorization
    Lf,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Compute => "compute",
            Command::Verify => "verify",
            Command::Lf => "lf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// f12, f22 or f32
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Numerator parameters, comma separated (decimals or p/q)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Denominator parameters, comma separated
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub b: Option<String>,
    #[arg(long, global = true)]
    pub eta: Option<String>,
    /// Number of exposed indices K [default: 16]
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Working precision in bits [default: LFORTHO_BITS or 384]
    #[arg(long, global = true)]
    pub bits: Option<u32>,
    /// Override of the verification tolerance 2^(-bits/2)
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated suites for verify
    #[arg(long, global = true)]
    pub suites: Option<String>,
    /// Forward steps for lf [default: 8]
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Seed for randomized-parameter checks
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat key=value file with the same keys as the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("verification failed: {0} failing records")]
    Failed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 7,
            CliError::Compute(e) => exit_code(e),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) | Error::OutOfRange { .. } => 2,
        Error::SingularMinor(_) => 3,
        Error::NonConvergent(_) => 4,
        Error::Unsupported(_) => 5,
        Error::InsufficientMoments { .. } | Error::DenominatorUnderflow { .. } | Error::BufferExhausted => 6,
    }
}

const KEYS: [&str; 12] = ["family", "a", "b", "eta", "order", "bits", "tol", "format", "out", "suites", "steps", "seed"];

/// Parses a flat config file: `key = value` lines, `#` comments, blank lines.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("config line {}: unknown key '{k}'", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: Family,
    pub a: Option<String>,
    pub b: Option<String>,
    pub eta: Option<String>,
    pub order: usize,
    pub bits: u32,
    pub tol: Option<String>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub suites: Option<String>,
    pub steps: usize,
    pub seed: Option<u64>,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| CliError::Config(format!("{key}: cannot parse '{v}'")))
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<RunConfig, CliError> {
        let file = match &flags.config {
            Some(p) => parse_config(&read(p)?)?,
            None => BTreeMap::new(),
        };
        let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());
        let family = pick(&flags.family, "family")
            .ok_or_else(|| CliError::Config("--family is required (f12, f22 or f32)".to_string()))?;
        let family = Family::parse(&family)?;
        let order = match (flags.order, file.get("order")) {
            (Some(k), _) => k,
            (None, Some(v)) => parse_num("order", v)?,
            (None, None) => 16,
        };
        let bits = match (flags.bits, file.get("bits")) {
            (Some(b), _) => b,
            (None, Some(v)) => parse_num("bits", v)?,
            (None, None) => PrecisionContext::from_env()?.bits,
        };
        let format = match (flags.format, file.get("format").map(String::as_str)) {
            (Some(f), _) => f,
            (None, Some("json")) | (None, None) => Format::Json,
            (None, Some("csv")) => Format::Csv,
            (None, Some(other)) => return Err(CliError::Config(format!("format: unknown '{other}'"))),
        };
        let steps = match (flags.steps, file.get("steps")) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_num("steps", v)?,
            (None, None) => 8,
        };
        let seed = match (flags.seed, file.get("seed")) {
            (Some(s), _) => Some(s),
            (None, Some(v)) => Some(parse_num("seed", v)?),
            (None, None) => None,
        };
        Ok(RunConfig {
            family,
            a: pick(&flags.a, "a"),
            b: pick(&flags.b, "b"),
            eta: pick(&flags.eta, "eta"),
            order,
            bits,
            tol: pick(&flags.tol, "tol"),
            format,
            out: flags.out.clone().or_else(|| file.get("out").map(PathBuf::from)),
            suites: pick(&flags.suites, "suites"),
            steps,
            seed,
        })
    }

    pub fn context(&self) -> Result<PrecisionContext, Error> {
        let ctx = PrecisionContext::new(self.bits)?;
        match &self.tol {
            Some(t) => ctx.with_eps_verify(parse_real(t, self.bits)?),
            None => Ok(ctx),
        }
    }

    /// The family's reference parameters fill in whatever is not given.
    pub fn spec(&self, ctx: &PrecisionContext) -> Result<FamilySpec, Error> {
        let reference = reference_spec(self.family, ctx);
        let list = |s: &Option<String>, fallback: &[rug::Float]| -> Result<Vec<rug::Float>, Error> {
            match s {
                Some(s) => s.split(',').map(|x| parse_real(x, ctx.bits)).collect(),
                None => Ok(fallback.to_vec()),
            }
        };
        let a = list(&self.a, &reference.a)?;
        let b = list(&self.b, &reference.b)?;
        let eta = match &self.eta {
            Some(e) => parse_real(e, ctx.bits)?,
            None => reference.eta.clone(),
        };
        FamilySpec::new(self.family, a, b, eta)
    }

    /// Settings echoed into the manifest.
    pub fn echo(&self, spec: &FamilySpec, ctx: &PrecisionContext) -> BTreeMap<String, String> {
        let digits = crate::report::full_digits(ctx.bits);
        let join = |xs: &[rug::Float]| {
            xs.iter().map(|x| crate::report::dec(x, digits)).collect::<Vec<_>>().join(",")
        };
        let mut m = BTreeMap::new();
        m.insert("family".into(), self.family.tag().to_string());
        m.insert("a".into(), join(&spec.a));
        m.insert("b".into(), join(&spec.b));
        m.insert("eta".into(), crate::report::dec(&spec.eta, digits));
        m.insert("order".into(), self.order.to_string());
        m.insert("bits".into(), self.bits.to_string());
        if let Some(t) = &self.tol {
            m.insert("tol".into(), t.clone());
        }
        if let Some(s) = &self.suites {
            m.insert("suites".into(), s.clone());
        }
        m.insert("steps".into(), self.steps.to_string());
        if let Some(s) = self.seed {
            m.insert("seed".into(), s.to_string());
        }
        m
    }
}

/// Fixed positive-mode parameters per family.
pub fn reference_spec(family: Family, ctx: &PrecisionContext) -> FamilySpec {
    let r = |p, q| ctx.ratio(p, q);
    let (a, b, eta) = match family {
        Family::F12 => (vec![r(3, 2)], vec![r(1, 2), r(1, 4)], r(2, 1)),
        Family::F22 => (vec![r(3, 2), r(5, 4)], vec![r(1, 2), r(1, 4)], r(2, 1)),
        Family::F32 => (vec![r(3, 2), r(5, 4), r(7, 4)], vec![r(1, 2), r(1, 4)], r(1, 2)),
    };
    FamilySpec::new(family, a, b, eta).expect("reference parameters are valid")
}

fn read(p: &Path) -> Result<String, CliError> {
    fs::read_to_string(p).map_err(|source| CliError::Io { path: p.display().to_string(), source })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".to_string(), source }),
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.flags)?;
    let ctx = cfg.context()?;
    let spec = cfg.spec(&ctx)?;
    let manifest = Manifest::new(cli.command.name(), cfg.echo(&spec, &ctx), ctx.bits, &ctx.eps_verify);
    match cli.command {
        Command::Compute => compute(&cfg, &spec, &ctx, manifest),
        Command::Verify => verify(&cfg, &spec, &ctx, manifest),
        Command::Lf => lf(&cfg, &spec, &ctx, manifest),
    }
}

fn compute(cfg: &RunConfig, spec: &FamilySpec, ctx: &PrecisionContext, mut manifest: Manifest) -> Result<(), CliError> {
    let pl = Pipeline::build(spec, cfg.order, ctx)?;
    manifest.finish();
    let table = CoefficientTable::new(manifest, &pl);
    let text = match cfg.format {
        Format::Json => table.to_json(),
        Format::Csv => table.to_csv(),
    };
    emit(&cfg.out, &text)
}

fn verify(cfg: &RunConfig, spec: &FamilySpec, ctx: &PrecisionContext, mut manifest: Manifest) -> Result<(), CliError> {
    let suites = match &cfg.suites {
        Some(s) => verify::parse_suites(s)?,
        None => verify::default_suites(spec.family),
    };
    let opts = Options { k: cfg.order, seed: cfg.seed, draws: 10 };
    let outcome = match verify::run(spec, &suites, &opts, ctx) {
        Ok(o) => o,
        Err(e) => {
            manifest.finish();
            let rep = VerificationReport::aborted(manifest, &e);
            emit(&cfg.out, &render(&rep, cfg.format))?;
            return Err(e.into());
        }
    };
    manifest.finish();
    let rep = VerificationReport::new(manifest, &outcome);
    emit(&cfg.out, &render(&rep, cfg.format))?;
    let s = &rep.summary;
    eprintln!("verify: {} pass, {} fail, {} errata-flagged", s.pass, s.fail, s.errata);
    for f in &outcome.failures {
        eprintln!("suite {} stopped: {}", f.suite, f.error);
    }
    if let Some(f) = outcome.failures.first() {
        return Err(f.error.clone().into());
    }
    if s.fail > 0 {
        return Err(CliError::Failed(s.fail));
    }
    Ok(())
}

fn render(rep: &VerificationReport, format: Format) -> String {
    match format {
        Format::Json => rep.to_json(),
        Format::Csv => rep.to_csv(),
    }
}

fn lf(cfg: &RunConfig, spec: &FamilySpec, ctx: &PrecisionContext, mut manifest: Manifest) -> Result<(), CliError> {
    if spec.family == Family::F32 {
        return Err(Error::Unsupported(
            "f32 has no explicit Laguerre-Freud step equations; its relations are checked as constraint residuals (verify --suites lf32-constraints)"
                .to_string(),
        )
        .into());
    }
    let k = cfg.order.max(crate::lf::FORWARD_SEED + cfg.steps + 3);
    let pl = Pipeline::build(spec, k, ctx)?;
    let rep = forward_run(&pl, cfg.steps, ctx)?;
    manifest.finish();
    let table = ForwardTable::new(manifest, &rep);
    let text = match cfg.format {
        Format::Json => table.to_json(),
        Format::Csv => table.to_csv(),
    };
    emit(&cfg.out, &text)?;
    if let Some(e) = &rep.stopped {
        eprintln!("lf: run stopped early: {e}");
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let m = parse_config("# comment\nfamily = f22\n\neta=3/2  # trailing\n").unwrap();
        assert_eq!(m["family"], "f22");
        assert_eq!(m["eta"], "3/2");
        assert!(parse_config("nonsense").is_err());
        assert!(parse_config("colour=red").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = std::env::temp_dir().join(format!("lfortho-cfg-{}", std::process::id()));
        fs::write(&dir, "family=f22\norder=9\nbits=256\n").unwrap();
        let flags = Flags { config: Some(dir.clone()), order: Some(5), ..Default::default() };
        let cfg = RunConfig::resolve(&flags).unwrap();
        fs::remove_file(&dir).unwrap();
        assert_eq!(cfg.family, Family::F22);
        assert_eq!(cfg.order, 5);
        assert_eq!(cfg.bits, 256);
    }

    #[test]
    fn exit_codes_are_distinct_per_kind() {
        assert_eq!(exit_code(&Error::InvalidSpec(String::new())), 2);
        assert_eq!(exit_code(&Error::SingularMinor(1)), 3);
        assert_eq!(exit_code(&Error::NonConvergent(1)), 4);
        assert_eq!(exit_code(&Error::Unsupported(String::new())), 5);
        assert_eq!(exit_code(&Error::BufferExhausted), 6);
        assert_eq!(CliError::Failed(1).exit_code(), 1);
    }
}
