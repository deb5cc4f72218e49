use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qmeet_core::authchannel::{authentication_capacity, estimate_error_rates, CQChannelFamily, DecoderConfig};
use qmeet_core::hypotest::CONVERSE_TOL;
use qmeet_core::io::{load_channel_family, load_density, validate_fixture};
use qmeet_core::operator::{DensityOperator, DEFAULT_DIM_CAP};
use qmeet_core::report::{Relation, Tally, ValidationReport};
use qmeet_core::suites::{self, Row, SuiteConfig};
use qmeet_core::Error;

const SUITES: [&str; 10] = [
    "meet",
    "lower",
    "many",
    "claim1",
    "facts",
    "beta-sweep",
    "stein",
    "composite",
    "authsim",
    "validate",
];

/// Seeded experiment runner. Writes report.csv, report.jsonl and
/// manifest.json into the output directory.
#[derive(Parser, Debug)]
#[command(name = "qmeet", version)]
struct Cli {
    /// meet, lower, many, claim1, facts, beta-sweep, stein, composite,
    /// authsim or validate (`run` defers to --suite)
    suite: String,
    #[arg(long = "suite", value_name = "SUITE")]
    suite_flag: Option<String>,
    /// JSON config or channel-family file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Block lengths, "1..8" or "2,4,6"
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "delta-prime")]
    delta_prime: Option<f64>,
    #[arg(long = "delta-auth")]
    delta_auth: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Code rate for authsim (default: half the capacity)
    #[arg(long = "R")]
    rate: Option<f64>,
    /// Channel-family file for authsim
    #[arg(long)]
    family: Option<PathBuf>,
    /// Null state for beta-sweep
    #[arg(long)]
    rho: Option<PathBuf>,
    /// Alternative state for beta-sweep
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// Fixture to check (validate), repeatable
    #[arg(long)]
    fixture: Vec<PathBuf>,
    /// Largest Hilbert-space dimension any tensor power may reach
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    suite: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    n: Option<NSpec>,
    eps: Option<f64>,
    delta: Option<f64>,
    delta_prime: Option<f64>,
    delta_auth: Option<f64>,
    tau: Option<f64>,
    #[serde(rename = "R")]
    rate: Option<f64>,
    family: Option<PathBuf>,
    rho: Option<PathBuf>,
    sigma: Option<PathBuf>,
    #[serde(default)]
    fixtures: Vec<PathBuf>,
    cap: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NSpec {
    List(Vec<usize>),
    Text(String),
}

/// Fully resolved run configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    suite: String,
    seed: u64,
    trials: usize,
    n_list: Vec<usize>,
    eps: f64,
    delta: f64,
    delta_prime: f64,
    delta_auth: f64,
    tau: f64,
    #[serde(rename = "R")]
    rate: Option<f64>,
    cap: usize,
    family: Option<PathBuf>,
    rho: Option<PathBuf>,
    sigma: Option<PathBuf>,
    fixtures: Vec<PathBuf>,
    #[serde(skip)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Suite(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::DimensionCap { .. } | Error::BudgetExceeded(_) => {
                Failure::Config(e.to_string())
            }
            e => Failure::Suite(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Suite(format!("writing reports: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Suite(format!("writing reports: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Suite(format!("writing reports: {e}"))
    }
}

fn parse_n(text: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("cannot parse block lengths '{text}'; use '1..8' or '2,4,6'");
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn read_config(path: &Path) -> Result<FileConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if value.get("states").is_some() {
        return Ok(FileConfig {
            family: Some(path.to_path_buf()),
            ..Default::default()
        });
    }
    let mut cfg: FileConfig =
        serde_json::from_value(value).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.family, &mut cfg.rho, &mut cfg.sigma].into_iter().flatten() {
        *p = base.join(&*p);
    }
    for p in &mut cfg.fixtures {
        *p = base.join(&*p);
    }
    Ok(cfg)
}

fn resolve(cli: Cli) -> Result<Resolved, Failure> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    let suite = if cli.suite == "run" {
        cli.suite_flag
            .or(file.suite)
            .ok_or_else(|| Failure::Config("`run` needs --suite".into()))?
    } else {
        cli.suite
    };
    if !SUITES.contains(&suite.as_str()) {
        return Err(Failure::Config(format!(
            "unknown suite '{suite}'; expected one of {}",
            SUITES.join(", ")
        )));
    }
    let auth = suite == "authsim";
    let n_list = match (cli.n, file.n) {
        (Some(t), _) | (None, Some(NSpec::Text(t))) => parse_n(&t).map_err(Failure::Config)?,
        (None, Some(NSpec::List(v))) => v,
        (None, None) => match suite.as_str() {
            "stein" | "beta-sweep" => (1..=8).collect(),
            "authsim" => vec![2, 4, 6],
            _ => vec![6],
        },
    };
    let decoder = DecoderConfig::default();
    let base = SuiteConfig::default();
    let r = Resolved {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        trials: cli
            .trials
            .or(file.trials)
            .unwrap_or(if auth { decoder.trials } else { base.trials }),
        n_list,
        eps: cli
            .eps
            .or(file.eps)
            .unwrap_or(if auth { decoder.epsilon_target } else { base.eps }),
        delta: cli.delta.or(file.delta).unwrap_or(match suite.as_str() {
            "authsim" => decoder.delta,
            "beta-sweep" => 0.1,
            _ => base.delta,
        }),
        delta_prime: cli.delta_prime.or(file.delta_prime).unwrap_or(base.delta_prime),
        delta_auth: cli.delta_auth.or(file.delta_auth).unwrap_or(decoder.delta_auth),
        tau: cli
            .tau
            .or(file.tau)
            .unwrap_or(if auth { decoder.tau } else { base.tau }),
        rate: cli.rate.or(file.rate),
        cap: cli.cap.or(file.cap).unwrap_or(DEFAULT_DIM_CAP),
        family: cli.family.or(file.family),
        rho: cli.rho.or(file.rho),
        sigma: cli.sigma.or(file.sigma),
        fixtures: if cli.fixture.is_empty() {
            file.fixtures
        } else {
            cli.fixture
        },
        out: cli.out.or(file.out).unwrap_or_else(|| PathBuf::from("qmeet-out")),
        suite,
    };
    check(&r)?;
    Ok(r)
}

fn check(r: &Resolved) -> Result<(), Failure> {
    let fail = |m: &str| Err(Failure::Config(m.to_string()));
    if r.trials == 0 {
        return fail("--trials must be at least 1");
    }
    if r.n_list.is_empty() || r.n_list.contains(&0) {
        return fail("--n must list positive block lengths");
    }
    if !(r.eps > 0.0 && r.eps < 1.0) {
        return fail("--eps must lie in (0, 1)");
    }
    if !(r.delta > 0.0 && r.delta_prime > 0.0 && r.delta_auth > 0.0) {
        return fail("δ parameters must be positive");
    }
    if !(r.tau > 0.0 && r.tau <= 1.0) {
        return fail("--tau must lie in (0, 1]");
    }
    if r.rate.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
        return fail("--R must be positive");
    }
    if r.rho.is_some() != r.sigma.is_some() {
        return fail("--rho and --sigma go together");
    }
    if r.suite == "validate" && r.fixtures.is_empty() {
        return fail("validate needs at least one --fixture");
    }
    Ok(())
}

fn suite_config(r: &Resolved) -> SuiteConfig {
    SuiteConfig {
        seed: r.seed,
        trials: r.trials,
        n_list: r.n_list.clone(),
        eps: r.eps,
        delta: r.delta,
        delta_prime: r.delta_prime,
        tau: r.tau,
        cap: r.cap,
    }
}

fn load_state(p: &Path) -> Result<DensityOperator, Failure> {
    load_density(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
}

fn load_family(p: &Path) -> Result<CQChannelFamily, Failure> {
    load_channel_family(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
}

/// Everything a suite produces before it is written out.
struct Output {
    csv: Vec<u8>,
    records: Vec<Value>,
    checks: Vec<ValidationReport>,
    extra: Value,
}

#[derive(Serialize)]
struct CheckCsv<'a> {
    suite: &'a str,
    seed: u64,
    instance: usize,
    check: &'a str,
    relation: Relation,
    lhs: f64,
    rhs: f64,
    margin: f64,
    tolerance: f64,
    status: &'a str,
    digest: &'a str,
}

fn check_output(r: &Resolved, rows: Vec<Row>) -> Result<Output, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let rep = &row.report;
        w.serialize(CheckCsv {
            suite: &row.suite,
            seed: r.seed,
            instance: row.instance,
            check: &rep.name,
            relation: rep.relation,
            lhs: rep.lhs,
            rhs: rep.rhs,
            margin: rep.margin,
            tolerance: rep.tolerance,
            status: rep.status(),
            digest: &rep.instance_digest,
        })?;
        let mut v = serde_json::to_value(row)?;
        v["status"] = json!(rep.status());
        records.push(v);
    }
    Ok(Output {
        csv: w.into_inner().map_err(|e| Failure::Suite(e.to_string()))?,
        records,
        checks: rows.into_iter().map(|r| r.report).collect(),
        extra: Value::Null,
    })
}

fn run_suite(r: &Resolved) -> Result<Output, Failure> {
    let cfg = suite_config(r);
    let rows = match r.suite.as_str() {
        "meet" => suites::meet_suite(&cfg)?,
        "lower" => suites::lower_suite(&cfg)?,
        "many" => suites::many_suite(&cfg)?,
        "claim1" => suites::claim1_suite(&cfg)?,
        "facts" => suites::facts_suite(&cfg)?,
        "stein" => suites::stein_suite(&cfg)?,
        "composite" => suites::composite_suite(&cfg)?,
        "beta-sweep" => return beta_sweep(r),
        "authsim" => return authsim(r),
        "validate" => return validate(r),
        other => unreachable!("suite '{other}' passed validation"),
    };
    check_output(r, rows)
}

fn beta_sweep(r: &Resolved) -> Result<Output, Failure> {
    let pair = match (&r.rho, &r.sigma) {
        (Some(a), Some(b)) => Some((load_state(a)?, load_state(b)?)),
        _ => None,
    };
    let rows = suites::beta_sweep(pair.as_ref().map(|(a, b)| (a, b)), &r.n_list, r.eps, r.delta, r.cap)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut records = Vec::new();
    let mut checks = Vec::new();
    for row in &rows {
        w.serialize(row)?;
        records.push(serde_json::to_value(row)?);
        checks.push(ValidationReport::bound(
            "stein.converse",
            Relation::Geq,
            row.beta,
            row.bound,
            CONVERSE_TOL,
        ));
    }
    Ok(Output {
        csv: w.into_inner().map_err(|e| Failure::Suite(e.to_string()))?,
        records,
        checks,
        extra: Value::Null,
    })
}

fn authsim(r: &Resolved) -> Result<Output, Failure> {
    let fam = match &r.family {
        Some(p) => load_family(p)?,
        None => suites::auth_demo_family(),
    };
    let config = DecoderConfig {
        delta: r.delta,
        delta_auth: r.delta_auth,
        epsilon_target: r.eps,
        trials: r.trials,
        seed: r.seed,
        tau: r.tau,
        cap: r.cap,
    };
    let rate = match r.rate {
        Some(x) => x,
        None => 0.5 * authentication_capacity(&fam, 101)?.0,
    };
    let report = estimate_error_rates(&fam, &config, &r.n_list, rate)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let checks = report
        .rows
        .iter()
        .filter_map(|row| {
            row.auth_target.map(|t| {
                ValidationReport::bound("auth.false_accept", Relation::Leq, row.auth_trace, t, 1e-10)
                    .with_digest(format!("s={},n={}", row.s, row.n))
            })
        })
        .collect();
    Ok(Output {
        csv,
        records: report.rows.iter().map(serde_json::to_value).collect::<Result<_, _>>()?,
        checks,
        extra: json!({
            "capacity": report.capacity,
            "input_distribution": report.input_distribution,
            "R": rate,
        }),
    })
}

fn validate(r: &Resolved) -> Result<Output, Failure> {
    #[derive(Serialize)]
    struct FixtureCsv<'a> {
        path: &'a str,
        kind: &'a str,
        pass: bool,
        violations: String,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut records = Vec::new();
    let mut checks = Vec::new();
    for p in &r.fixtures {
        let rep = validate_fixture(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        w.serialize(FixtureCsv {
            path: &rep.path,
            kind: &rep.kind,
            pass: rep.pass,
            violations: rep.violations.join("; "),
        })?;
        for v in &rep.violations {
            eprintln!("{}: {v}", rep.path);
        }
        let violations = rep.violations.len() as f64;
        checks.push(ValidationReport::new(
            "fixture.invariants",
            Relation::Leq,
            violations,
            0.0,
            0.0,
        ));
        records.push(serde_json::to_value(&rep)?);
    }
    Ok(Output {
        csv: w.into_inner().map_err(|e| Failure::Suite(e.to_string()))?,
        records,
        checks,
        extra: Value::Null,
    })
}

fn write_reports(r: &Resolved, out: &Output, started: &str) -> Result<Tally, Failure> {
    fs::create_dir_all(&r.out)?;
    fs::write(r.out.join("report.csv"), &out.csv)?;

    let version = env!("CARGO_PKG_VERSION");
    let mut jl = BufWriter::new(fs::File::create(r.out.join("report.jsonl"))?);
    let mut header = json!({ "record": "config", "version": version, "config": r });
    if !out.extra.is_null() {
        header["run"] = out.extra.clone();
    }
    writeln!(jl, "{}", serde_json::to_string(&header)?)?;
    for rec in &out.records {
        let mut v = json!({ "record": r.suite });
        if let (Value::Object(dst), Value::Object(src)) = (&mut v, rec) {
            dst.extend(src.clone());
        }
        writeln!(jl, "{}", serde_json::to_string(&v)?)?;
    }
    jl.flush()?;

    let mut tally = Tally::default();
    tally.extend(&out.checks);
    let manifest = json!({
        "tool": "qmeet",
        "version": version,
        "suite": r.suite,
        "config": r,
        "started": started,
        "finished": chrono::Utc::now().to_rfc3339(),
        "files": ["report.csv", "report.jsonl"],
        "summary": tally,
    });
    fs::write(
        r.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(tally)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = chrono::Utc::now().to_rfc3339();
    let result = resolve(cli).and_then(|r| {
        let out = run_suite(&r)?;
        let tally = write_reports(&r, &out, &started)?;
        Ok((r, tally))
    });
    match result {
        Ok((r, t)) => {
            println!(
                "{}: {} checks, {} pass, {} vacuous-pass, {} fail; reports in {}",
                r.suite,
                t.total(),
                t.pass,
                t.vacuous,
                t.fail,
                r.out.display()
            );
            if t.fail == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Config(m)) => {
            eprintln!("qmeet: configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Suite(m)) => {
            eprintln!("qmeet: suite failed: {m}");
            ExitCode::from(1)
        }
    }
}
