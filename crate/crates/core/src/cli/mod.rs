//! Command-line front end.
//!
//! Exit codes: 0 when every requested check passes, 1 when one fails, 2 on
//! usage or input errors.

mod output;
mod settings;

pub use output::{render, Format, HEADER};
pub use settings::Settings;

use crate::error::{invalid, Error, Result};
use crate::identity_checks::{
    check_gg, check_gg_exact, check_iterated, check_main, check_main_exact, check_pd_identity, check_prop1,
    check_th2a, check_weight_invariance, check_zeta, IdentityReport, Target, Th2aInputs,
};
use crate::functionals::{Groups, IntervalSet, PartitionSpec};
use crate::mc_engine::{derive_stream, OUTER_LANE};
use crate::measure::GibbsMeasure;
use crate::pd_core::{sample_pd, TailPolicy, ZetaParam, DEFAULT_TRUNCATION};
use crate::structural_checks::{
    check_exchangeability, check_positivity, check_prop2, check_sequence, check_ultrametric, ExchangeOptions,
};
use crate::suite::{criterion, CRITERIA};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::ffi::OsString;
use std::io::Write;

#[derive(Debug, Parser)]
#[command(name = "gglab", version, about = "Monte Carlo checks of Ghirlanda-Guerra identities on random measures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one PD(ζ) weight vector.
    PdSample(Opts),
    /// Describe a cascade: its overlap law and one realization.
    CascadeInfo(Opts),
    /// Run an identity check.
    Check {
        kind: CheckKind,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a structural check.
    Struct {
        kind: StructKind,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the acceptance battery.
    Suite {
        /// Comma list of criteria to run (default: all).
        #[arg(long)]
        criteria: Option<String>,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Gg,
    Main,
    Iterated,
    Weights,
    Th2a,
    PdIdentity,
    Prop1,
    Zeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructKind {
    Ultra,
    Positivity,
    Prop2,
    Sequence,
    Exchange,
}

/// Flags shared by every subcommand; each overrides the config key of the
/// same name.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Config file with `key = value` lines and function blocks.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub zeta: Option<String>,
    #[arg(long)]
    pub depth: Option<String>,
    /// Comma list ζ_1, …, ζ_r.
    #[arg(long)]
    pub zetas: Option<String>,
    /// Comma list q_0, …, q_r.
    #[arg(long)]
    pub qs: Option<String>,
    /// Comma list of explicit nodes per level.
    #[arg(long)]
    pub branching: Option<String>,
    #[arg(long)]
    pub leaf_budget: Option<String>,
    /// PD truncation level.
    #[arg(long)]
    pub truncation: Option<String>,
    /// Finite measure file (weights row, then Gram rows).
    #[arg(long)]
    pub measure: Option<String>,
    /// Force the two heaviest leaves onto one branch above this weight.
    #[arg(long)]
    pub threshold: Option<String>,
    /// Replica count, sequence length, or sample count where neither applies.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub n_outer: Option<String>,
    #[arg(long)]
    pub n_batches: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    #[arg(long)]
    pub z_max: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    /// Comma list of s values for the prop1 sweep.
    #[arg(long)]
    pub s: Option<String>,
    /// Comma list t_1, …, t_n.
    #[arg(long)]
    pub t: Option<String>,
    /// Comma list of group sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    /// Interval list `B` for the sequence check.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long)]
    pub m: Option<String>,
    #[arg(long)]
    pub resamples: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// Enumerate a finite measure exactly instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Record wall-clock times.
    #[arg(long)]
    pub timing: bool,
}

impl Opts {
    /// Config file values overlaid by the flags that were given.
    pub fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let flags = [
            ("zeta", &self.zeta),
            ("depth", &self.depth),
            ("zetas", &self.zetas),
            ("qs", &self.qs),
            ("branching", &self.branching),
            ("leaf-budget", &self.leaf_budget),
            ("truncation", &self.truncation),
            ("measure", &self.measure),
            ("threshold", &self.threshold),
            ("n", &self.n),
            ("n-outer", &self.n_outer),
            ("n-batches", &self.n_batches),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("z-max", &self.z_max),
            ("q", &self.q),
            ("s", &self.s),
            ("t", &self.t),
            ("sizes", &self.sizes),
            ("eps", &self.eps),
            ("set", &self.set),
            ("m", &self.m),
            ("resamples", &self.resamples),
            ("alpha", &self.alpha),
            ("format", &self.format),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v.clone());
            }
        }
        if self.exact {
            s.set("exact", "true");
        }
        if self.timing {
            s.set("timing", "true");
        }
        Ok(s)
    }
}

/// What a subcommand produced.
enum Outcome {
    Reports(Vec<IdentityReport>),
    Document(serde_json::Value),
}

/// Parses `args` (program name first), runs, prints, and returns the exit code.
pub fn main<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn opts_of(command: &Command) -> &Opts {
    match command {
        Command::PdSample(o) | Command::CascadeInfo(o) => o,
        Command::Check { opts, .. } | Command::Struct { opts, .. } | Command::Suite { opts, .. } => opts,
    }
}

/// Runs a parsed command and writes its output; returns the exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    let s = opts_of(&cli.command).settings()?;
    let format: Format = s.get_or("format", Format::Json)?;
    let outcome = match &cli.command {
        Command::PdSample(_) => Outcome::Document(pd_sample(&s)?),
        Command::CascadeInfo(_) => Outcome::Document(cascade_info(&s)?),
        Command::Check { kind, .. } => Outcome::Reports(vec![run_check(*kind, &s)?]),
        Command::Struct { kind, .. } => Outcome::Reports(vec![run_struct(*kind, &s)?]),
        Command::Suite { criteria, .. } => Outcome::Reports(run_suite(criteria.as_deref(), &s)?),
    };
    let (text, code) = match outcome {
        Outcome::Reports(reports) => {
            let code = if reports.iter().all(|r| r.pass) { 0 } else { 1 };
            (render(&reports, format)?, code)
        }
        Outcome::Document(doc) => {
            if format == Format::Csv {
                return invalid("this subcommand only writes JSON");
            }
            let mut t = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
            t.push('\n');
            (t, 0)
        }
    };
    match s.raw("out") {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(code)
}

fn pd_sample(s: &Settings) -> Result<serde_json::Value> {
    let zeta: f64 = s.require("zeta")?;
    let k = s.get_or("truncation", DEFAULT_TRUNCATION)?;
    let seed = s.get_or("seed", 0u64)?;
    let w = sample_pd(ZetaParam::new(zeta)?, k, &mut derive_stream(seed, OUTER_LANE, 0))?;
    Ok(json!({
        "zeta": zeta,
        "truncation": k,
        "seed": seed,
        "tail_mass_estimate": w.tail_mass_estimate(),
        "sum_of_squares": w.sum_of_squares(TailPolicy::Diffuse),
        "weights": w.weights(),
    }))
}

fn cascade_info(s: &Settings) -> Result<serde_json::Value> {
    let spec = s.cascade_spec()?;
    let seed = s.get_or("seed", 0u64)?;
    let mu = spec.exact_mu();
    let m = spec.build(&mut derive_stream(seed, OUTER_LANE, 0))?;
    let heaviest: Vec<_> = (0..m.n_leaves().min(10))
        .map(|a| json!({ "weight": m.weights()[a], "path": m.path(a) }))
        .collect();
    Ok(json!({
        "depth": spec.depth(),
        "zetas": spec.zetas(),
        "qs": spec.qs(),
        "branching": spec.branching(),
        "leaf_budget": spec.leaf_budget(),
        "mu": mu.points.iter().zip(&mu.masses).map(|(q, w)| json!({ "q": q, "mass": w })).collect::<Vec<_>>(),
        "realization": {
            "seed": seed,
            "leaves": m.n_leaves(),
            "atoms": m.atom_count(),
            "diffuse_mass": m.diffuse_mass(),
            "heaviest_leaves": heaviest,
        },
    }))
}

fn finite_of(target: &Target) -> Result<&crate::finite_oracle::FiniteMeasure<f64>> {
    match target {
        Target::Finite(m) => Ok(m),
        _ => invalid("--exact needs --measure"),
    }
}

fn require_family(s: &Settings, target: &Target) -> Result<crate::functionals::FunctionFamily<f64>> {
    s.family(&target.mu())?
        .ok_or_else(|| Error::InvalidArgument("this check needs function blocks [f1], [f2], …".into()))
}

fn run_check(kind: CheckKind, s: &Settings) -> Result<IdentityReport> {
    match kind {
        CheckKind::Zeta => return check_zeta(s.require("zeta")?, &s.estimator_with_n_alias()?),
        CheckKind::PdIdentity => {
            let sizes: Vec<usize> = s.list("sizes")?.unwrap_or_else(|| vec![1, 1]);
            let total: usize = sizes.iter().sum();
            let t: Vec<f64> = s.list("t")?.unwrap_or_else(|| vec![0.0; total]);
            return check_pd_identity(s.require("zeta")?, &sizes, &t, &s.estimator_with_n_alias()?);
        }
        _ => {}
    }
    let target = s.target()?;
    let exact = s.flag("exact")?;
    match kind {
        CheckKind::Gg => {
            let config = s.estimator()?;
            let n = s.get_or("n", 2usize)?;
            let f = s.pair_product()?;
            let psi = s
                .overlap_fn("psi")?
                .ok_or_else(|| Error::InvalidArgument("check gg needs a [psi] block".into()))?;
            if exact {
                check_gg_exact(finite_of(&target)?, n, &f, &psi, &config)
            } else {
                check_gg(&target, n, &f, &psi, &config)
            }
        }
        CheckKind::Main => {
            let config = s.estimator()?;
            let family = require_family(s, &target)?;
            let phi = s.pair_product()?;
            if exact {
                check_main_exact(finite_of(&target)?, &family, &phi, &config)
            } else {
                check_main(&target, &family, &phi, &config)
            }
        }
        CheckKind::Iterated => {
            let family = require_family(s, &target)?;
            let sizes: Vec<usize> = s
                .list("sizes")?
                .ok_or_else(|| Error::InvalidArgument("check iterated needs --sizes".into()))?;
            check_iterated(&target, &family, &Groups::from_sizes(&sizes)?, &s.pair_product()?, &s.estimator()?)
        }
        CheckKind::Weights => {
            let family = require_family(s, &target)?;
            let sets = s.sets()?;
            let partition = if sets.is_empty() { PartitionSpec::Trivial } else { PartitionSpec::Membership(sets) };
            check_weight_invariance(&target, &family, &partition, &s.pair_product()?, &s.weight_fn()?, &s.estimator()?)
        }
        CheckKind::Th2a => {
            let sets = s.sets()?;
            let t: Vec<f64> = s
                .list("t")?
                .ok_or_else(|| Error::InvalidArgument("check th2a needs --t".into()))?;
            let inputs = Th2aInputs { sets, event: s.event()?, t, phi: s.weight_fn()? };
            check_th2a(&target, &inputs, &s.estimator_with_n_alias()?)
        }
        CheckKind::Prop1 => {
            let q = s.require("q")?;
            let sweep: Vec<f64> = s.list("s")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0]);
            check_prop1(&target, q, &sweep, &s.estimator_with_n_alias()?)
        }
        CheckKind::Zeta | CheckKind::PdIdentity => unreachable!("handled above"),
    }
}

fn run_struct(kind: StructKind, s: &Settings) -> Result<IdentityReport> {
    let target = s.target()?;
    match kind {
        StructKind::Ultra => check_ultrametric(&target, s.get("q")?, &s.estimator_with_n_alias()?),
        StructKind::Positivity => {
            check_positivity(&target, s.get_or("eps", 0.1)?, s.get_or("n", 3usize)?, &s.estimator()?)
        }
        StructKind::Prop2 => check_prop2(&target, &require_family(s, &target)?, &s.estimator()?),
        StructKind::Sequence => {
            let set = IntervalSet::parse(s.raw("set").ok_or_else(|| Error::InvalidArgument("missing --set".into()))?)?;
            check_sequence(&target, &set, s.get_or("n", 10usize)?, &s.estimator()?)
        }
        StructKind::Exchange => {
            let d = ExchangeOptions::new(s.get_or("m", 3usize)?);
            let opts = ExchangeOptions {
                resamples: s.get_or("resamples", d.resamples)?,
                alpha: s.get_or("alpha", d.alpha)?,
                ..d
            };
            check_exchangeability(&target, &opts, &s.estimator_with_n_alias()?)
        }
    }
}

fn run_suite(criteria: Option<&str>, s: &Settings) -> Result<Vec<IdentityReport>> {
    let config = s.estimator()?;
    let ks: Vec<usize> = match criteria {
        Some(list) => {
            let mut tmp = Settings::default();
            tmp.set("criteria", list);
            tmp.list("criteria")?.unwrap_or_default()
        }
        None => (1..=CRITERIA).collect(),
    };
    let mut out = Vec::new();
    for k in ks {
        out.extend(criterion(k, &config)?);
    }
    Ok(out)
}
