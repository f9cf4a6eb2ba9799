//! Command-line experiment runner.
//!
//! Every command prints (or writes to `--out`) an [`ExperimentReport`] and
//! exits with status 0 when all its checks pass, 1 when one fails, 2 on a
//! usage error, 3 when a level cap cut the run short (the partial report is
//! still written) and 4 on any other error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::brownian::{
    argmin_selector, dyadic_argmin_enumeration, fragment_stats_of, local_minima, nearest_in,
    simulate_path,
};
use crate::coupling::{couple, figure1, CoupledSample};
use crate::densities::{
    digit_share_family, digit_share_permuted_family, divergence_diagnostic, FamilyKind,
    IntensityProfile, Trend,
};
use crate::enumeration::{exhaustion_profile, EnumerationState, Extraction, DEFAULT_LEVEL_CAP};
use crate::error::{Error, Result};
use crate::replicate;
use crate::rng::{self, Purpose, PRNG_NAME};
use crate::selftest::{self, Config};
use crate::set_models::{combined_sample, count_in, rational_shift_selector};
use crate::stats::{
    chi_square_pmf, correlation_ci, ks_one_sample, ks_two_sample, mean, mean_z, TestReport,
};
use crate::strip::new_strip;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_ERROR: i32 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(name = "randset", version, about = "Random countable sets: strip enumerations, couplings and selectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Number of replicates (each command has its own default).
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Worker threads for replicates; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output: `json` or `csv` to standard output, or a file path.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Significance of the statistical checks.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub significance: f64,
    /// Hard cap on the strip level an enumeration may reach.
    #[arg(long, global = true, default_value_t = DEFAULT_LEVEL_CAP)]
    pub level_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate one strip up to a level.
    StripDemo {
        /// Strip level.
        #[arg(long, default_value_t = 10.0)]
        window: f64,
    },
    /// Run one enumeration and dump (k, X_k, Y_k, T_k).
    Enumerate {
        #[arg(long, value_enum, default_value_t = FamilyKind::Uniform)]
        family: FamilyKind,
        /// Number of steps.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Two enumerations of shared strips, compared inside a window.
    Couple {
        #[arg(long = "famA", alias = "fam-a", value_enum, default_value_t = FamilyKind::Uniform)]
        fam_a: FamilyKind,
        #[arg(long = "famB", alias = "fam-b", value_enum, default_value_t = FamilyKind::Triangular)]
        fam_b: FamilyKind,
        #[arg(long, default_value_t = 3.0)]
        window: f64,
    },
    /// Uniform, triangular and alternating orderings of one strip.
    Figure1 {
        /// Points per ordering.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Mean window residual and mean integral of (M - H_n)+ by step.
    Exhaustion {
        #[arg(long, value_enum, default_value_t = FamilyKind::Uniform)]
        family: FamilyKind,
        #[arg(long, default_value_t = 3.0)]
        window: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Fragment counts of the combined sample / Poisson set.
    PoissonCounts {
        /// Pieces `start:end:rate`, rate a number or `inf`.
        #[arg(long, default_value = "0:1:2.0")]
        profile: String,
        /// Interval `a,b`.
        #[arg(long = "B", default_value = "0,0.5")]
        b: String,
        /// Sample size on infinite-rate pieces.
        #[arg(long, default_value_t = 1000)]
        truncate: usize,
    },
    /// The counterexample constructions.
    Counterexample {
        #[arg(value_enum)]
        id: CounterexampleId,
        /// Digits reconstructed in 5n3.
        #[arg(long, default_value_t = 20)]
        digits: u32,
    },
    /// Local minima of simulated Brownian paths.
    Brownian {
        /// Grid size.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Dyadic depth for the argmin enumeration.
        #[arg(long, default_value_t = 10)]
        depth: u32,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = BrownianTest::value_variants().to_vec())]
        tests: Vec<BrownianTest>,
    },
    /// The acceptance suite.
    Selftest {
        /// Run a single criterion.
        #[arg(long)]
        criterion: Option<u32>,
        /// Also run the multi-seed false-rejection check.
        #[arg(long)]
        meta: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum CounterexampleId {
    #[value(name = "3n9")]
    #[serde(rename = "3n9")]
    RationalShift,
    #[value(name = "5n3")]
    #[serde(rename = "5n3")]
    DependentFragments,
    #[value(name = "9n75")]
    #[serde(rename = "9n75")]
    DigitShare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BrownianTest {
    Stationarity,
    Independence,
    Selectors,
    Hitmiss,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub command: String,
    pub parameters: Value,
    pub master_seed: u64,
    pub prng_name: &'static str,
    pub code_version: &'static str,
    pub reports: Vec<TestReport>,
    pub data_files: Vec<String>,
    pub wall_time: f64,
    /// A level cap stopped part of the run.
    pub partial: bool,
    pub data: Value,
}

impl ExperimentReport {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.partial {
            EXIT_RESOURCE
        } else if self.pass() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// What a command produced, before packaging.
#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<TestReport>,
    pub data: Value,
    pub csv: Option<String>,
    pub partial: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::StripDemo { .. } => "strip-demo",
            Command::Enumerate { .. } => "enumerate",
            Command::Couple { .. } => "couple",
            Command::Figure1 { .. } => "figure1",
            Command::Exhaustion { .. } => "exhaustion",
            Command::PoissonCounts { .. } => "poisson-counts",
            Command::Counterexample { .. } => "counterexample",
            Command::Brownian { .. } => "brownian",
            Command::Selftest { .. } => "selftest",
        }
    }
}

/// Output destination resolved from `--out` and `--format`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Destination {
    pub format: Format,
    pub path: Option<String>,
}

pub fn destination(common: &Common) -> Destination {
    let (implied, path) = match common.out.as_deref() {
        None => (None, None),
        Some("json") => (Some(Format::Json), None),
        Some("csv") => (Some(Format::Csv), None),
        Some(p) => (None, Some(p.to_string())),
    };
    Destination {
        format: common.format.or(implied).unwrap_or(Format::Json),
        path,
    }
}

/// Runs a parsed command and packages its report. The CSV body, if any, is
/// returned alongside and not written anywhere.
pub fn run(cli: &Cli) -> Result<(ExperimentReport, Option<String>)> {
    let start = Instant::now();
    let c = &cli.common;
    if c.threads == 0 {
        return Err(Error::contract("--threads must be at least 1"));
    }
    let outcome = replicate::with_threads(c.threads, || dispatch(&cli.command, c))?;
    let report = ExperimentReport {
        command: cli.command.name().to_string(),
        parameters: serde_json::to_value(cli).unwrap_or(Value::Null),
        master_seed: c.seed,
        prng_name: PRNG_NAME,
        code_version: env!("CARGO_PKG_VERSION"),
        reports: outcome.reports,
        data_files: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
        partial: outcome.partial,
        data: outcome.data,
    };
    Ok((report, outcome.csv))
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match run(&cli) {
        Ok((mut report, csv)) => match emit(&cli.common, &mut report, csv) {
            Ok(()) => report.exit_code(),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_ERROR
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ResourceLimit { .. } => EXIT_RESOURCE,
                _ => EXIT_ERROR,
            }
        }
    }
}

/// Writes CSV data and the report where `--out`/`--format` say. With CSV
/// output the data goes to the destination and the report JSON to standard
/// output (or standard error when the CSV itself went to standard output).
fn emit(common: &Common, report: &mut ExperimentReport, csv: Option<String>) -> std::io::Result<()> {
    let dest = destination(common);
    let csv = match dest.format {
        Format::Csv => csv,
        Format::Json => None,
    };
    if dest.format == Format::Csv && csv.is_none() {
        eprintln!("note: {} has no CSV form; writing the JSON report", report.command);
    }
    match (&csv, &dest.path) {
        (Some(body), Some(path)) => {
            std::fs::write(path, body)?;
            report.data_files.push(path.clone());
            println!("{}", to_json(report));
        }
        (Some(body), None) => {
            print!("{body}");
            eprintln!("{}", to_json(report));
        }
        (None, Some(path)) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "{}", to_json(report))?;
        }
        (None, None) => println!("{}", to_json(report)),
    }
    Ok(())
}

fn to_json(report: &ExperimentReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

fn replicates(common: &Common, default: usize) -> usize {
    common.replicates.unwrap_or(default).max(1)
}

/// Seed of replicate `i`: the master seed itself for a single replicate.
fn replicate_seed(common: &Common, count: usize, i: usize) -> u64 {
    if count == 1 {
        common.seed
    } else {
        rng::split(common.seed, i as u64)
    }
}

fn dispatch(cmd: &Command, c: &Common) -> Result<Outcome> {
    match cmd {
        Command::StripDemo { window } => strip_demo(c, *window),
        Command::Enumerate { family, n } => enumerate(c, *family, *n),
        Command::Couple {
            fam_a,
            fam_b,
            window,
        } => couple_cmd(c, *fam_a, *fam_b, *window),
        Command::Figure1 { n } => figure1_cmd(c, *n),
        Command::Exhaustion {
            family,
            window,
            steps,
        } => exhaustion_cmd(c, *family, *window, *steps),
        Command::PoissonCounts {
            profile,
            b,
            truncate,
        } => poisson_cmd(c, profile, b, *truncate),
        Command::Counterexample { id, digits } => counterexample(c, *id, *digits),
        Command::Brownian { n, depth, tests } => brownian_cmd(c, *n, *depth, tests),
        Command::Selftest { criterion, meta } => selftest_cmd(c, *criterion, *meta),
    }
}

fn strip_demo(c: &Common, level: f64) -> Result<Outcome> {
    if !(level > 0.0 && level.is_finite()) {
        return Err(Error::contract("strip level must be positive and finite"));
    }
    let mut s = new_strip(c.seed);
    s.extend_to_level(level)?;
    let pts = s.points_below(level)?;
    let increasing = pts.windows(2).all(|w| w[0].y < w[1].y);
    let n = pts.len();
    Ok(Outcome {
        reports: vec![
            TestReport::exact("heights strictly increasing", n as f64, increasing, n),
            TestReport::z_bound(
                "point count = level (Poisson)",
                (n as f64 - level) / level.sqrt(),
                n,
            ),
        ],
        data: json!({ "level": level, "points": pts }),
        csv: Some(s.to_csv()),
        partial: false,
    })
}

/// Audits above this many steps are skipped (the audit is cubic).
const AUDIT_MAX_STEPS: usize = 200;

fn extraction_csv(rows: &[Extraction]) -> String {
    let mut out = String::from("k,x,y,t\n");
    for e in rows {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", e.step, e.x, e.y, e.time);
    }
    out
}

fn enumerate(c: &Common, family: FamilyKind, n: usize) -> Result<Outcome> {
    if n == 0 {
        return Err(Error::contract("--n must be at least 1"));
    }
    let mut strip = new_strip(c.seed);
    let mut st = EnumerationState::new(&strip, family.build()).with_level_cap(c.level_cap);
    let mut partial = false;
    for _ in 0..n {
        match st.step(&mut strip) {
            Ok(_) => {}
            Err(Error::ResourceLimit { .. }) => {
                partial = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut reports = Vec::new();
    if st.steps() <= AUDIT_MAX_STEPS {
        let a = st.audit(&strip)?;
        reports.push(TestReport::exact("race optimality (violations)", a.race_violations as f64, a.race_violations == 0, a.ratio_checks));
        reports.push(TestReport::exact("extracted above barrier (violations)", a.below_barrier as f64, a.below_barrier == 0, st.steps()));
        reports.push(TestReport::exact("race times reproduce (mismatches)", a.time_mismatches as f64, a.time_mismatches == 0, st.steps()));
        reports.push(TestReport::exact("distinct extractions (duplicates)", a.duplicates as f64, a.duplicates == 0, st.steps()));
    }
    Ok(Outcome {
        reports,
        data: json!({
            "family": st.family().name(),
            "steps": st.steps(),
            "strip_level": strip.level(),
            "extracted": st.extracted(),
        }),
        csv: Some(extraction_csv(st.extracted())),
        partial,
    })
}

fn couple_cmd(c: &Common, a: FamilyKind, b: FamilyKind, window: f64) -> Result<Outcome> {
    let count = replicates(c, 1);
    let samples: Vec<CoupledSample> = replicate::try_map(c.seed, count, |i, _| {
        couple(replicate_seed(c, count, i), a.build(), b.build(), window, c.level_cap)
    })?;
    let unexhausted = samples.iter().filter(|s| !s.exhausted).count();
    let done: Vec<&CoupledSample> = samples.iter().filter(|s| s.exhausted).collect();
    let unequal = done.iter().filter(|s| !s.sets_equal()).count();
    let non_bijective = done.iter().filter(|s| !s.permutation_bijective()).count();
    let mut csv = String::from("seed,family,k,id,x,y,t\n");
    for s in &samples {
        for (fam, seq) in [(&s.families[0], &s.seq_a), (&s.families[1], &s.seq_b)] {
            for e in seq {
                let _ = writeln!(csv, "{},{},{},{},{:.16e},{:.16e},{:.16e}", s.strip_seed, fam, e.step, e.id, e.x, e.y, e.time);
            }
        }
    }
    let data = if count == 1 {
        serde_json::to_value(&samples[0]).unwrap_or(Value::Null)
    } else {
        json!(samples
            .iter()
            .map(|s| json!({
                "strip_seed": s.strip_seed,
                "window_total": s.window_total,
                "exhausted": s.exhausted,
                "sets_equal": s.sets_equal(),
                "steps": [s.seq_a.len(), s.seq_b.len()],
            }))
            .collect::<Vec<_>>())
    };
    Ok(Outcome {
        reports: vec![
            TestReport::exact("window identity sets equal (failures)", unequal as f64, unequal == 0, done.len()),
            TestReport::exact("permutation bijective (failures)", non_bijective as f64, non_bijective == 0, done.len()),
        ],
        data,
        csv: Some(csv),
        partial: unexhausted > 0,
    })
}

fn figure1_cmd(c: &Common, n: usize) -> Result<Outcome> {
    let f = figure1(c.seed, n, c.level_cap)?;
    let height_order = f.orderings[0].iter().enumerate().all(|(k, e)| e.id == k);
    let tri_keys: Vec<f64> = f.orderings[1].iter().map(|e| e.y / (2.0 * e.x)).collect();
    let tri_sorted = tri_keys.windows(2).all(|w| w[0] < w[1]);
    let p = &f.permutations;
    let inverse = (0..3).all(|i| {
        (0..3).all(|j| {
            p[i][j]
                .iter()
                .enumerate()
                .all(|(k, m)| m.is_none_or(|m| p[j][i][m] == Some(k)))
        })
    });
    Ok(Outcome {
        reports: vec![
            TestReport::exact("uniform ordering is height order", n as f64, height_order, n),
            TestReport::exact("triangular ordering ascending in y/(2x)", n as f64, tri_sorted, n),
            TestReport::exact("orderings cover the same window set", f.window, f.window_sets_equal, n),
            TestReport::exact("pairwise position maps mutually inverse", n as f64, inverse, n),
        ],
        csv: Some(f.to_csv()),
        data: serde_json::to_value(&f).unwrap_or(Value::Null),
        partial: false,
    })
}

fn exhaustion_cmd(c: &Common, family: FamilyKind, window: f64, steps: usize) -> Result<Outcome> {
    let count = replicates(c, 500);
    let fam = family.build();
    let profiles = replicate::try_map(c.seed, count, |i, _| {
        let mut s = new_strip(replicate_seed(c, count, i));
        exhaustion_profile(&mut s, fam.clone(), window, steps, c.level_cap)
    })?;
    let truncated = profiles.iter().filter(|p| p.truncated_at.is_some()).count();
    // rows only up to the shortest profile
    let len = profiles.iter().map(|p| p.residuals.len()).min().unwrap_or(0);
    let mut csv = String::from("n,mean_residual,mean_integral\n");
    let mut rows = Vec::with_capacity(len);
    for k in 0..len {
        let r = mean(&profiles.iter().map(|p| p.residuals[k] as f64).collect::<Vec<_>>());
        let g = mean(&profiles.iter().map(|p| p.integrals[k]).collect::<Vec<_>>());
        let _ = writeln!(csv, "{k},{r:.16e},{g:.16e}");
        rows.push(json!({ "n": k, "mean_residual": r, "mean_integral": g }));
    }
    let mut reports = Vec::new();
    if fam.diverges() && len > 1 {
        let means: Vec<f64> = rows.iter().map(|r| r["mean_residual"].as_f64().unwrap_or(0.0)).collect();
        let inc = means.windows(2).filter(|w| w[1] > w[0]).count();
        reports.push(TestReport::exact("mean residual nonincreasing (increases)", inc as f64, inc == 0, count));
    }
    if count >= 2 {
        for k in [0, len / 2, len.saturating_sub(1)] {
            if k >= len {
                continue;
            }
            let d: Vec<f64> = profiles.iter().map(|p| p.residuals[k] as f64 - p.integrals[k]).collect();
            reports.push(TestReport::z_bound(format!("n = {k}: mean residual = mean integral"), mean_z(&d, 0.0), count));
        }
    }
    Ok(Outcome {
        reports,
        data: json!({
            "family": fam.name(),
            "window": window,
            "replicates": count,
            "warning": profiles.first().and_then(|p| p.warning.clone()),
            "truncated_replicates": truncated,
            "rows": rows,
        }),
        csv: Some(csv),
        partial: truncated > 0,
    })
}

fn parse_interval(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::contract(format!("interval {s:?} is not `a,b` with 0 <= a < b <= 1"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(bad());
    }
    Ok((a, b))
}

fn poisson_pmf(mean: f64) -> impl Fn(usize) -> f64 {
    move |k| {
        if mean == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        (-mean + k as f64 * mean.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp()
    }
}

fn poisson_cmd(c: &Common, profile: &str, b: &str, truncate: usize) -> Result<Outcome> {
    let profile = IntensityProfile::parse(profile)?;
    let set = [parse_interval(b)?];
    let count = replicates(c, 10_000);
    let results = replicate::try_map(c.seed, count, |i, _| {
        let s = combined_sample(&profile, truncate, replicate_seed(c, count, i))?;
        Ok::<_, Error>(count_in(&s, &set))
    })?;
    let counts: Vec<usize> = results.iter().map(|r| r.count).collect();
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut freq = vec![0u64; max + 1];
    for &k in &counts {
        freq[k] += 1;
    }
    let mut csv = String::from("count,frequency\n");
    for (k, f) in freq.iter().enumerate() {
        let _ = writeln!(csv, "{k},{f}");
    }
    let mass = profile.mass(&set);
    let mut reports = Vec::new();
    match mass {
        Some(m) if m > 0.0 => {
            let xs: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
            reports.push(TestReport::z_bound("mean count = integral of r over B", mean_z(&xs, m), count));
            match chi_square_pmf(format!("count vs Poisson({m})"), &freq, poisson_pmf(m), c.significance) {
                Ok(r) => reports.push(r),
                Err(Error::DegenerateTest(why)) => eprintln!("note: chi-square skipped: {why}"),
                Err(e) => return Err(e),
            }
        }
        Some(_) => {
            let nonzero = counts.iter().filter(|&&k| k > 0).count();
            reports.push(TestReport::exact("zero-mass set never hit", nonzero as f64, nonzero == 0, count));
        }
        None => {
            let hits = counts.iter().filter(|&&k| k > 0).count() as f64 / count as f64;
            reports.push(
                TestReport::exact("set meeting an infinite-rate piece is hit (rate)", hits, hits >= 0.999, count)
                    .with_note(format!("truncation-dependent: {truncate} points per infinite piece")),
            );
        }
    }
    Ok(Outcome {
        reports,
        data: json!({
            "profile": profile,
            "B": set,
            "mass": mass,
            "truncation_dependent": results.first().map(|r| r.truncation_dependent),
            "mean_count": mean(&counts.iter().map(|&k| k as f64).collect::<Vec<_>>()),
            "frequency": freq,
        }),
        csv: Some(csv),
        partial: false,
    })
}

/// Terms and probes of the digit-share divergence diagnostic.
const DIAGNOSTIC_TERMS: usize = 20;
const DIAGNOSTIC_PROBES: usize = 200;
const BOUNDED_FRACTION: f64 = 0.9;

fn counterexample(c: &Common, id: CounterexampleId, digits: u32) -> Result<Outcome> {
    let sig = c.significance;
    match id {
        CounterexampleId::RationalShift => {
            let count = replicates(c, 2000);
            let mut reports = selftest::rational_shift_checks(c.seed, count, sig)?;
            let xs = replicate::map(c.seed, count, |_, s| rational_shift_selector(s, 0));
            reports.push(ks_one_sample("q = 0 selector vs U(0,1/2)", &xs, |x| (2.0 * x).clamp(0.0, 1.0), sig)?);
            Ok(Outcome {
                reports,
                data: json!({ "q_index": 0, "selections": xs.len(), "max": xs.iter().copied().fold(0.0, f64::max) }),
                ..Default::default()
            })
        }
        CounterexampleId::DependentFragments => {
            let count = replicates(c, 1000);
            let report = selftest::fragment_check(c.seed, count, digits)?;
            let one = crate::set_models::dependent_fragments(c.seed, digits, crate::set_models::AssignmentRule::OneMeansMin)?;
            Ok(Outcome {
                reports: vec![report],
                data: json!({ "example_seed": c.seed, "true_digits": one.true_digits, "reconstructed": one.reconstructed }),
                ..Default::default()
            })
        }
        CounterexampleId::DigitShare => {
            let count = replicates(c, 200);
            let mut reports = selftest::digit_share_checks(c.seed, count)?;
            let orig = divergence_diagnostic(&*digit_share_family(), DIAGNOSTIC_TERMS, DIAGNOSTIC_PROBES, c.seed)?;
            let perm = divergence_diagnostic(&*digit_share_permuted_family(), DIAGNOSTIC_TERMS, DIAGNOSTIC_PROBES, c.seed)?;
            let perm_growing = perm.probes.iter().all(|p| p.trend == Trend::Increasing);
            reports.push(
                TestReport::exact("original order: partial sums bounded (constant fraction)", orig.fraction_constant, orig.fraction_constant >= BOUNDED_FRACTION, DIAGNOSTIC_PROBES)
                    .with_note(orig.note),
            );
            reports.push(TestReport::exact("permuted order: partial sums grow at every probe", perm.fraction_constant, perm_growing, DIAGNOSTIC_PROBES));
            Ok(Outcome {
                reports,
                data: json!({ "original": orig, "permuted": perm }),
                ..Default::default()
            })
        }
    }
}

const FRAGMENTS: [(f64, f64); 2] = [(0.1, 0.3), (0.6, 0.8)];

fn brownian_cmd(c: &Common, n: usize, depth: u32, tests: &[BrownianTest]) -> Result<Outcome> {
    if n < 2 {
        return Err(Error::contract("--n must be at least 2"));
    }
    let count = replicates(c, 2000);
    let sig = c.significance;
    struct Row {
        count: usize,
        left: Vec<f64>,
        right: Vec<f64>,
        argmin: f64,
        nearest: Option<f64>,
        dyadic_violations: usize,
    }
    let want_dyadic = (1usize << depth.min(62)) <= n && depth >= 1;
    let rows = replicate::try_map(c.seed, count, |i, _| {
        let s = replicate_seed(c, count, i);
        let path = simulate_path(n, s)?;
        let minima = local_minima(&path);
        let pos = minima.positions();
        let frags = fragment_stats_of(&pos, &FRAGMENTS)?;
        let v = rng::open01(&mut rng::stream(s, Purpose::Probe));
        let dyadic_violations = if want_dyadic {
            dyadic_argmin_enumeration(&path, depth)?
                .indices
                .iter()
                .filter(|i| minima.indices.binary_search(i).is_err())
                .count()
        } else {
            0
        };
        Ok::<_, Error>(Row {
            count: minima.len(),
            left: frags[0].rescaled.clone(),
            right: frags[1].rescaled.clone(),
            argmin: argmin_selector(&path).position,
            nearest: nearest_in(&pos, v).ok(),
            dyadic_violations,
        })
    })?;
    let mut reports = Vec::new();
    let counts: Vec<f64> = rows.iter().map(|r| r.count as f64).collect();
    if count >= 2 {
        reports.push(TestReport::z_bound(
            "minima count mean = (n-1)/4",
            mean_z(&counts, selftest::expected_minima(n)),
            count,
        ));
    }
    if want_dyadic {
        let v: usize = rows.iter().map(|r| r.dyadic_violations).sum();
        reports.push(TestReport::exact("dyadic argmins are strict local minima (violations)", v as f64, v == 0, count));
    }
    for t in tests {
        match t {
            BrownianTest::Stationarity => {
                let l: Vec<f64> = rows.iter().flat_map(|r| r.left.iter().copied()).collect();
                let r: Vec<f64> = rows.iter().flat_map(|r| r.right.iter().copied()).collect();
                if !l.is_empty() && !r.is_empty() {
                    reports.push(ks_two_sample("fragment stationarity (0.1,0.3) vs (0.6,0.8)", &l, &r, sig)?);
                }
            }
            BrownianTest::Independence => {
                let l: Vec<f64> = rows.iter().map(|r| r.left.len() as f64).collect();
                let r: Vec<f64> = rows.iter().map(|r| r.right.len() as f64).collect();
                match correlation_ci("fragment count correlation", &l, &r) {
                    Ok(rep) => reports.push(rep),
                    Err(e) => eprintln!("note: independence skipped: {e}"),
                }
            }
            BrownianTest::Selectors => {
                let a: Vec<f64> = rows.iter().map(|r| r.argmin).collect();
                let near: Vec<f64> = rows.iter().filter_map(|r| r.nearest).collect();
                reports.push(TestReport::expecting_rejection(ks_one_sample("argmin selector vs U(0,1)", &a, |x| x.clamp(0.0, 1.0), sig)?));
                if !near.is_empty() {
                    reports.push(ks_one_sample("nearest-to-uniform selector vs U(0,1)", &near, |x| x.clamp(0.0, 1.0), sig.max(1e-2))?);
                }
            }
            BrownianTest::Hitmiss => {
                reports.extend(selftest::hit_miss(rng::split(c.seed, 0x6869_74), count.min(1000), n)?);
            }
        }
    }
    Ok(Outcome {
        reports,
        data: json!({
            "n": n,
            "replicates": count,
            "mean_minima": mean(&counts),
            "expected_minima": selftest::expected_minima(n),
        }),
        ..Default::default()
    })
}

fn selftest_cmd(c: &Common, criterion: Option<u32>, meta: bool) -> Result<Outcome> {
    let cfg = Config {
        master_seed: c.seed,
        significance: c.significance,
    };
    let crits = match criterion {
        Some(id) => vec![selftest::run_criterion(id, &cfg)?],
        None => selftest::run_all(&cfg)?,
    };
    let mut reports = Vec::new();
    for cr in &crits {
        eprintln!("{}", cr.line());
        for r in &cr.reports {
            let mut r = r.clone();
            r.name = format!("criterion {}: {}", cr.id, r.name);
            reports.push(r);
        }
    }
    let mut meta_runs = Value::Null;
    if meta {
        let (r, runs) = selftest::meta_check(c.seed, selftest::META_RUNS)?;
        eprintln!("multi-seed {}", r.line());
        reports.push(r);
        meta_runs = serde_json::to_value(runs).unwrap_or(Value::Null);
    }
    Ok(Outcome {
        reports,
        data: json!({
            "criteria": crits
                .iter()
                .map(|c| json!({ "id": c.id, "title": c.title, "pass": c.pass(), "seconds": c.seconds }))
                .collect::<Vec<_>>(),
            "meta_runs": meta_runs,
        }),
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("randset").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn out_flag_is_format_or_path() {
        let d = destination(&parse(&["figure1", "--out", "csv"]).common);
        assert_eq!(d, Destination { format: Format::Csv, path: None });
        let d = destination(&parse(&["figure1", "--out", "x.json"]).common);
        assert_eq!(d, Destination { format: Format::Json, path: Some("x.json".into()) });
        let d = destination(&parse(&["figure1", "--out", "x.csv", "--format", "csv"]).common);
        assert_eq!(d.format, Format::Csv);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(main_with_args(["randset", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["randset", "figure1", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn counterexample_ids_parse() {
        for id in ["3n9", "5n3", "9n75"] {
            parse(&["counterexample", id]);
        }
        assert!(Cli::try_parse_from(["randset", "counterexample", "7x1"]).is_err());
    }

    #[test]
    fn interval_parsing() {
        assert_eq!(parse_interval("0,0.5").unwrap(), (0.0, 0.5));
        assert!(parse_interval("0.5,0.2").is_err());
        assert!(parse_interval("0.5").is_err());
    }
}
