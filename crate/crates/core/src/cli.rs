//! Command-line front end. `run` parses arguments, executes one subcommand
//! and returns the process exit code: 0 on success, 1 on invalid input,
//! 2 when an iterative solver fails to converge.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bell::{
    builtin, canonicalize, evaluate, evaluate_canonical, invariance_check, BellExpression, Builtin,
    Evaluation,
};
use crate::constraints::build_constraint_system;
use crate::data::{
    frequencies, generate_drift_counts, load_counts, load_grid222, signalling_report, CountTable,
    DriftConfig, DriftMode,
};
use crate::error::{Error, Result};
use crate::projection::{
    estimate_ml, project_direct, project_l2, project_nonneg, project_weighted, SettingsWeights,
};
use crate::scenario::{uniform_behavior, BehaviorVector, Scenario};

#[derive(Debug, Parser)]
#[command(
    name = "nsbell",
    version,
    about = "No-signalling projection and canonical Bell evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Project count data onto the no-signalling set.
    Project(ProjectArgs),
    /// Rewrite a Bell expression in projection-invariant form.
    Canonicalize(CanonicalizeArgs),
    /// Evaluate a Bell expression before and after projection.
    Evaluate(EvaluateArgs),
    /// Report no-signalling residuals.
    Diagnose(DiagnoseArgs),
    /// Write synthetic drifting count data.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pipeline,
    Direct,
    Weighted,
    Nonneg,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Expected,
    Sampled,
}

/// Where behaviour data comes from.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Scenario as `n,m` (required for long-format CSV input).
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<Scenario>,
    /// Count table in long CSV format (`x1..xn,a1..an,count`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Read `--input` as a 4x4 (2,2,2) grid instead.
    #[arg(long)]
    pub grid222: bool,
    /// Behaviour JSON instead of counts.
    #[arg(long, conflicts_with_all = ["input", "grid222"])]
    pub behavior: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExprArgs {
    /// Built-in expression: chsh, mermin, tilted, i3322, losr_gtnl.
    #[arg(long, conflicts_with = "expr_file")]
    pub expr: Option<String>,
    /// Expression JSON file.
    #[arg(long)]
    pub expr_file: Option<PathBuf>,
    /// Tilted CHSH alpha.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Tilted CHSH beta.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = Method::Pipeline)]
    pub method: Method,
    /// Settings weights for `weighted`/`ml`: `from-counts`, `uniform` or a JSON file.
    #[arg(long, default_value = "from-counts")]
    pub weights: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CanonicalizeArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub expr: ExprArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    /// Base behaviour JSON; the uniform behaviour when omitted.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Trials per setting tuple.
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0.0)]
    pub drift: f64,
    #[arg(long, default_value_t = 1)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Expected)]
    pub mode: Mode,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    let (n, m) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'n,m', got '{s}'"))?;
    let n = n
        .trim()
        .parse()
        .map_err(|_| format!("bad party count '{n}'"))?;
    let m = m
        .trim()
        .parse()
        .map_err(|_| format!("bad setting count '{m}'"))?;
    Scenario::new(n, m).map_err(|e| e.to_string())
}

/// Formats `x` with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

/// Runs the CLI with process stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "error: {first}");
            return 1;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

/// 2 for convergence failures, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_convergence_failure() {
        2
    } else {
        1
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Project(a) => cmd_project(a, out),
        Command::Canonicalize(a) => cmd_canonicalize(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
        Command::Generate(a) => cmd_generate(a, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Input behaviour plus the counts it came from, if any.
struct Loaded {
    behavior: BehaviorVector,
    counts: Option<(CountTable, SettingsWeights)>,
}

fn load_data(args: &DataArgs) -> Result<Loaded> {
    if let Some(path) = &args.behavior {
        let behavior: BehaviorVector = serde_json::from_reader(open(path)?)?;
        if let Some(s) = args.scenario {
            s.ensure_same(&behavior.scenario())?;
        }
        return Ok(Loaded {
            behavior,
            counts: None,
        });
    }
    let path = args
        .input
        .as_ref()
        .ok_or_else(|| Error::Domain("one of --input or --behavior is required".into()))?;
    let table = if args.grid222 {
        let t = load_grid222(open(path)?)?;
        if let Some(s) = args.scenario {
            s.ensure_same(&t.scenario())?;
        }
        t
    } else {
        let s = args
            .scenario
            .ok_or_else(|| Error::Domain("--scenario n,m is required for CSV input".into()))?;
        load_counts(open(path)?, s)?
    };
    let (f, pi) = frequencies(&table)?;
    Ok(Loaded {
        behavior: f,
        counts: Some((table, pi)),
    })
}

fn resolve_weights(spec: &str, loaded: &Loaded) -> Result<SettingsWeights> {
    let s = loaded.behavior.scenario();
    match spec {
        "uniform" => Ok(SettingsWeights::uniform(s)),
        "from-counts" => loaded
            .counts
            .as_ref()
            .map(|(_, pi)| pi.clone())
            .ok_or_else(|| {
                Error::Domain(
                    "--weights from-counts needs count input; pass --weights uniform or a file"
                        .into(),
                )
            }),
        path => {
            let w: SettingsWeights = serde_json::from_reader(open(Path::new(path))?)?;
            s.ensure_same(&w.scenario())?;
            Ok(w)
        }
    }
}

fn cmd_project(a: ProjectArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = load_data(&a.data)?;
    let f = &loaded.behavior;
    let s = f.scenario();
    let system = build_constraint_system(s);
    let p = match a.method {
        Method::Pipeline => project_l2(f),
        Method::Direct => project_direct(f, &system)?,
        Method::Weighted => project_weighted(f, &resolve_weights(&a.weights, &loaded)?)?,
        Method::Nonneg => project_nonneg(f, &system)?,
        Method::Ml => estimate_ml(f, &resolve_weights(&a.weights, &loaded)?, &system)?,
    };
    let res = system.residual(&p)?;
    let negative = p.has_negative_entries();
    writeln!(out, "scenario {s}, method {:?}", a.method)?;
    writeln!(
        out,
        "residual nosig_max {} norm_max {}",
        sig12(res.nosig_max),
        sig12(res.norm_max)
    )?;
    writeln!(out, "min entry {}", sig12(p.min_entry()))?;
    if negative {
        writeln!(
            out,
            "warning: projected behaviour has negative entries; try --method nonneg"
        )?;
    }
    if let Some(path) = &a.out {
        match a.format {
            Format::Json => {
                let doc = json!({
                    "scenario": s,
                    "role": p.role(),
                    "entries": p.entries(),
                    "residual": { "nosig_max": res.nosig_max, "norm_max": res.norm_max },
                    "flags": { "negative_entries": negative },
                    "method": format!("{:?}", a.method).to_lowercase(),
                });
                write_json(path, &doc)?;
            }
            Format::Csv => {
                let mut w =
                    csv::Writer::from_path(path).map_err(|e| Error::Schema(e.to_string()))?;
                let n = s.parties();
                let mut head: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
                head.extend((1..=n).map(|i| format!("a{i}")));
                head.push("value".into());
                w.write_record(&head)
                    .map_err(|e| Error::Schema(e.to_string()))?;
                for (idx, v) in p.entries().iter().enumerate() {
                    let (aa, x) = s.decode_index(idx)?;
                    let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                    rec.extend(aa.iter().map(|v| v.to_string()));
                    rec.push(format!("{v:?}"));
                    w.write_record(&rec)
                        .map_err(|e| Error::Schema(e.to_string()))?;
                }
                w.flush()?;
            }
        }
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn load_expression(a: &ExprArgs) -> Result<BellExpression> {
    match (&a.expr, &a.expr_file) {
        (Some(name), None) => {
            let which = match name.parse::<Builtin>()? {
                Builtin::Tilted { .. } => Builtin::Tilted {
                    alpha: a.alpha,
                    beta: a.beta,
                },
                other => other,
            };
            builtin(which)
        }
        (None, Some(path)) => Ok(serde_json::from_reader(open(path)?)?),
        _ => Err(Error::Domain(
            "exactly one of --expr or --expr-file is required".into(),
        )),
    }
}

fn cmd_canonicalize(a: CanonicalizeArgs, out: &mut dyn Write) -> Result<()> {
    let expr = load_expression(&a.expr)?;
    let form = canonicalize(&expr);
    let s = form.scenario;
    writeln!(
        out,
        "scenario {s}, bound {} ({:?})",
        sig12(form.bound),
        form.direction
    )?;
    writeln!(out, "correlator coefficients:")?;
    for (r, b) in form.beta.iter().enumerate() {
        if *b != 0.0 {
            writeln!(
                out,
                "  {} {}",
                crate::correlators::CorrelatorKey::from_rank(s, r),
                sig12(*b)
            )?;
        }
    }
    writeln!(out, "probability blocks:")?;
    for xr in 0..s.setting_blocks() {
        let x = s.setting_tuple(xr);
        let block = form.block(&x)?;
        if block.iter().any(|g| *g != 0.0) {
            let cells: Vec<String> = block.iter().map(|g| sig12(*g)).collect();
            writeln!(out, "  x={x:?}: [{}]", cells.join(", "))?;
        }
    }
    if let Some(path) = &a.out {
        write_json(path, &form)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn print_eval(out: &mut dyn Write, label: &str, e: &Evaluation) -> Result<()> {
    writeln!(
        out,
        "{label}: value {} bound {} margin {} {}",
        sig12(e.value),
        sig12(e.bound),
        sig12(e.margin),
        if e.violated { "violated" } else { "satisfied" }
    )?;
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let expr = load_expression(&a.expr)?;
    let loaded = load_data(&a.data)?;
    let v = &loaded.behavior;
    expr.scenario().ensure_same(&v.scenario())?;
    let form = canonicalize(&expr);
    let p = project_l2(v);
    let raw = evaluate(&expr, v)?;
    let projected = evaluate_canonical(&form, &p)?;
    let written = invariance_check(&expr, v)?;
    print_eval(out, "raw", &raw)?;
    print_eval(out, "projected", &projected)?;
    writeln!(
        out,
        "as written: raw {} projected {} difference {}",
        sig12(written.value_raw),
        sig12(written.value_projected),
        sig12(written.difference)
    )?;
    if let Some(path) = &a.out {
        write_json(
            path,
            &json!({ "raw": raw, "projected": projected, "as_written": written }),
        )?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = load_data(&a.data)?;
    let f = &loaded.behavior;
    let system = build_constraint_system(f.scenario());
    let rep = signalling_report(f, &system)?;
    writeln!(out, "scenario {}", f.scenario())?;
    if let Some((t, _)) = &loaded.counts {
        let totals: Vec<String> = t.setting_totals().iter().map(|n| n.to_string()).collect();
        writeln!(
            out,
            "trials per setting [{}], total {}",
            totals.join(", "),
            t.total()
        )?;
    }
    writeln!(
        out,
        "no-signalling residuals: max {} mean {} over {} rows",
        sig12(rep.max_abs),
        sig12(rep.mean_abs),
        rep.rows.len()
    )?;
    for r in &rep.rows {
        writeln!(
            out,
            "  {}: {} vs {} (residual {})",
            r.label,
            sig12(r.marginal_at_zero),
            sig12(r.marginal_at_setting),
            sig12(r.residual)
        )?;
    }
    if let Some(w) = &rep.worst {
        writeln!(out, "worst: {} residual {}", w.label, sig12(w.residual))?;
    }
    if let Some(path) = &a.out {
        write_json(path, &rep)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let s = a.scenario;
    let base = match &a.base {
        Some(path) => {
            let b: BehaviorVector = serde_json::from_reader(open(path)?)?;
            s.ensure_same(&b.scenario())?;
            b
        }
        None => uniform_behavior(s),
    };
    let system = build_constraint_system(s);
    let config = DriftConfig {
        trials_per_setting: vec![a.trials; s.setting_blocks()],
        drift: a.drift,
        blocks: a.blocks,
        seed: a.seed,
        mode: match a.mode {
            Mode::Expected => DriftMode::Expected,
            Mode::Sampled => DriftMode::Sampled,
        },
    };
    let table = generate_drift_counts(&base, &system, &config)?;
    match &a.out {
        Some(path) => {
            table.write_csv(BufWriter::new(File::create(path)?))?;
            writeln!(out, "wrote {} ({} trials)", path.display(), table.total())?;
        }
        None => table.write_csv(out)?,
    }
    Ok(())
}
