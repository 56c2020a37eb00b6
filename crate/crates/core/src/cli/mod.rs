//! The `fqlab` command line.
//!
//! Exit status: 0 when every verdict holds, 1 when some verdict fails, 2 on
//! invalid arguments or refused work.

pub mod record;
pub mod sweep;
pub mod verify;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::bounds::{check_main_theorem, guard_pairs};
use crate::euclid::EuclidGraph;
use crate::field::PrimeField;
use crate::geometry::{
    generate_point_set, parse_point_set, sphere_points, sphere_table, GeneratorSpec, PointSet,
};
use crate::limits::Limits;

use record::{emit, report_fields, Format, Record, REPORT_FIELDS};
use sweep::{run_sweep, Check, SweepConfig, SWEEP_FIELDS, TOOL_VERSION};
use verify::{
    format_short, open_field, replay_hints, run_verify, UsageError, VerifyArgs, VERIFY_FIELDS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "fqlab",
    version,
    about = "Distance statistics and Euclidean graph spectra over F_p^d"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "FQLAB_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sphere sizes k_a, or the points of one sphere.
    Sphere(SphereCmd),
    /// Spectrum of G_q(a) for one or all radii.
    Spectrum(SpectrumCmd),
    /// f(E), the distance set and both bounds for one point set.
    Fcount(FcountCmd),
    /// Check batteries on random or generated vertex sets.
    Verify(VerifyCmd),
    /// Run a parameter sweep from a TOML config.
    Sweep(SweepCmd),
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Field size (an odd prime).
    #[arg(long)]
    pub q: u64,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Permit q = 1 (mod 4), where -1 is a square.
    #[arg(long)]
    pub allow_1mod4: bool,
    /// Lift the enumeration guardrails.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write records here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SphereCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    /// List the points of the sphere of this radius.
    #[arg(long)]
    pub points: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Radius; all nonzero radii when omitted.
    #[arg(long)]
    pub a: Option<u64>,
    /// Random frequencies for the eigenvector check.
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FcountCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Point-set file, one point per line.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    pub points: Option<PathBuf>,
    /// Generator spec, e.g. `random(20)` or `box(3)+sphere(1)`.
    #[arg(long)]
    pub gen: Option<GeneratorSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyCmd {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Radius; all nonzero radii when omitted.
    #[arg(long)]
    pub a: Option<u64>,
    /// Comma-separated subset of spectrum,variance,mixing,hinge,main,remark.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "spectrum,variance,mixing,hinge,main,remark"
    )]
    pub checks: Vec<Check>,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random frequencies for the eigenvector check.
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
    /// Check this one generated set instead of random trials.
    #[arg(long)]
    pub gen: Option<GeneratorSpec>,
    #[arg(long, default_value_t = 0, requires = "gen")]
    pub gen_seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// TOML config; the built-in default sweep when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    pub format: Format,
    #[arg(long)]
    pub force: bool,
    /// Print the built-in config and exit.
    #[arg(long)]
    pub print_default: bool,
}

fn usage(e: impl ToString) -> UsageError {
    UsageError(e.to_string())
}

/// Writes records to `out` (plus a `.meta.json` sidecar with the run
/// timestamp) or to standard output.
fn write_records(
    out: Option<&Path>,
    bytes: &[u8],
    command: &str,
    digest: Option<&str>,
) -> Result<(), UsageError> {
    match out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let ts = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let meta = serde_json::json!({
                "command": command,
                "tool_version": TOOL_VERSION,
                "config_digest": digest,
                "timestamp_unix": ts,
            });
            let mut meta_path = path.as_os_str().to_owned();
            meta_path.push(".meta.json");
            fs::write(&meta_path, format!("{meta}\n"))
                .map_err(|e| usage(format!("{}: {e}", PathBuf::from(meta_path).display())))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).map_err(usage)?;
        }
    }
    Ok(())
}

fn open(args: &FieldArgs) -> Result<(PrimeField, Limits), UsageError> {
    if args.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    Ok((
        open_field(args.q, args.allow_1mod4)?,
        Limits::with_force(args.force),
    ))
}

fn radius(field: &PrimeField, a: u64) -> Result<crate::field::Fe, UsageError> {
    field.try_elem(a).filter(|x| !x.is_zero()).ok_or_else(|| {
        usage(format!(
            "radius must be a nonzero residue below {}, got {a}",
            field.modulus()
        ))
    })
}

const SPHERE_FIELDS: &[&str] = &["q", "dim", "a", "size"];

fn cmd_sphere(cmd: &SphereCmd) -> Result<i32, UsageError> {
    let (field, limits) = open(&cmd.field)?;
    let dim = cmd.field.dim;
    if let Some(a) = cmd.points {
        let a = field
            .try_elem(a)
            .ok_or_else(|| usage("radius out of range"))?;
        let pts = sphere_points(&field, dim, a, &limits).map_err(usage)?;
        let set = PointSet::new(dim, pts, "sphere").map_err(usage)?;
        write_records(
            cmd.output.out.as_deref(),
            set.to_text().as_bytes(),
            "sphere",
            None,
        )?;
        return Ok(EXIT_OK);
    }
    let table = sphere_table(&field, dim);
    let records: Vec<Record> = field
        .elements()
        .map(|a| {
            Record::new()
                .with("q", field.modulus())
                .with("dim", dim)
                .with("a", a.value())
                .with("size", table.size(a))
        })
        .collect();
    write_records(
        cmd.output.out.as_deref(),
        &emit(SPHERE_FIELDS, &records, cmd.output.format),
        "sphere",
        None,
    )?;
    Ok(EXIT_OK)
}

const SPECTRUM_FIELDS: &[&str] = &[
    "q",
    "dim",
    "a",
    "valency",
    "n",
    "trivial_eigenvalue",
    "second_eigenvalue",
    "ramanujan_bound",
    "within_bound",
    "classes",
    "trace1_residual",
    "trace2_residual",
    "eigvec_residual",
    "error",
];

fn cmd_spectrum(cmd: &SpectrumCmd) -> Result<i32, UsageError> {
    let (field, limits) = open(&cmd.field)?;
    let dim = cmd.field.dim;
    let radii: Vec<_> = match cmd.a {
        Some(a) => vec![radius(&field, a)?],
        None => field.nonzero_elements().collect(),
    };
    let mut records = Vec::new();
    let mut failed = false;
    for a in radii {
        let g = EuclidGraph::new(field.clone(), dim, a, &limits).map_err(usage)?;
        let s = g.spectrum(&limits).map_err(usage)?;
        let classes: Vec<String> = s
            .classes
            .iter()
            .map(|c| format!("{}x{}", format_short(c.value), c.multiplicity))
            .collect();
        let mut rec = Record::new()
            .with("q", field.modulus())
            .with("dim", dim)
            .with("a", a.value())
            .with("valency", s.valency)
            .with("n", s.n)
            .with("trivial_eigenvalue", s.trivial_eigenvalue)
            .with("second_eigenvalue", s.second_eigenvalue)
            .with("ramanujan_bound", s.ramanujan_bound)
            .with("within_bound", s.within_ramanujan_bound())
            .with("classes", classes.join(" "));
        failed |= !s.within_ramanujan_bound();
        match g.verify_spectrum(&s, cmd.samples, cmd.seed) {
            Ok(d) => {
                rec.set("trace1_residual", d.trace1_residual)
                    .set("trace2_residual", d.trace2_residual)
                    .set("eigvec_residual", d.max_eigvec_residual);
            }
            Err(e) => {
                failed = true;
                rec.set("error", e.to_string());
            }
        }
        records.push(rec);
    }
    write_records(
        cmd.output.out.as_deref(),
        &emit(SPECTRUM_FIELDS, &records, cmd.output.format),
        "spectrum",
        None,
    )?;
    Ok(if failed { EXIT_VIOLATION } else { EXIT_OK })
}

const FCOUNT_PREFIX: &[&str] = &["source"];

fn cmd_fcount(cmd: &FcountCmd) -> Result<i32, UsageError> {
    let (field, limits) = open(&cmd.field)?;
    let dim = cmd.field.dim;
    let set = match (&cmd.points, &cmd.gen) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            parse_point_set(&field, &text, &path.display().to_string()).map_err(usage)?
        }
        (None, Some(spec)) => {
            generate_point_set(&field, dim, spec, cmd.seed, &limits).map_err(usage)?
        }
        (None, None) => return Err(usage("one of --points or --gen is required")),
    };
    if !set.is_empty() && set.dim() != dim {
        return Err(usage(format!(
            "points have dimension {}, --dim is {dim}",
            set.dim()
        )));
    }
    guard_pairs(set.len(), &limits).map_err(usage)?;
    let spectra = field
        .nonzero_elements()
        .map(|a| EuclidGraph::new(field.clone(), dim, a, &limits).and_then(|g| g.spectrum(&limits)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let report = check_main_theorem(&field, dim, &set, &spectra).map_err(usage)?;
    let mut rec = Record::new().with("source", set.origin_label());
    report_fields(&mut rec, &report);
    let schema: Vec<&str> = FCOUNT_PREFIX.iter().chain(REPORT_FIELDS).copied().collect();
    write_records(
        cmd.output.out.as_deref(),
        &emit(&schema, &[rec], cmd.output.format),
        "fcount",
        None,
    )?;
    Ok(if report.verdicts.all() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

fn cmd_verify(cmd: &VerifyCmd) -> Result<i32, UsageError> {
    let args = VerifyArgs {
        q: cmd.field.q,
        dim: cmd.field.dim,
        a: cmd.a,
        checks: cmd.checks.clone(),
        trials: cmd.trials,
        seed: cmd.seed,
        samples: cmd.samples,
        generator: cmd.gen.clone().map(|g| (g, cmd.gen_seed)),
        allow_1mod4: cmd.field.allow_1mod4,
        force: cmd.field.force,
    };
    let outcome = run_verify(&args)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    if let Some(out) = &cmd.output.out {
        write_records(
            Some(out),
            &emit(VERIFY_FIELDS, &outcome.records, cmd.output.format),
            "verify",
            None,
        )?;
    }
    if outcome.failures > 0 {
        for hint in replay_hints(&args, &outcome) {
            eprintln!("{hint}");
        }
        let failing: Vec<Record> = outcome
            .records
            .iter()
            .filter(|r| r.get("status") != Some(&"ok".into()))
            .cloned()
            .collect();
        let bytes = emit(VERIFY_FIELDS, &failing, Format::Jsonl);
        std::io::stderr().write_all(&bytes).map_err(usage)?;
        println!("{} verdict(s) failed", outcome.failures);
        return Ok(EXIT_VIOLATION);
    }
    println!("all verdicts hold");
    Ok(EXIT_OK)
}

fn cmd_sweep(cmd: &SweepCmd) -> Result<i32, UsageError> {
    if cmd.print_default {
        print!("{}", include_str!("../../configs/default.toml"));
        return Ok(EXIT_OK);
    }
    let mut config = match &cmd.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            SweepConfig::from_toml(&text).map_err(usage)?
        }
        None => SweepConfig::default_sweep(),
    };
    config.force |= cmd.force;
    if cmd.out.is_some() {
        config.output = cmd.out.clone();
    }
    let outcome = run_sweep(&config).map_err(usage)?;
    let bytes = emit(SWEEP_FIELDS, &outcome.records, cmd.format);
    let summary = outcome.summary.render();
    let tail = format!(
        "{} cells, {} failed, config digest {}",
        outcome.records.len(),
        outcome.failed_cells,
        &outcome.config_digest[..16]
    );
    match &config.output {
        Some(path) => {
            write_records(Some(path), &bytes, "sweep", Some(&outcome.config_digest))?;
            print!("{summary}");
            println!("{tail}");
        }
        None => {
            write_records(None, &bytes, "sweep", None)?;
            eprint!("{summary}");
            eprintln!("{tail}");
        }
    }
    Ok(if outcome.failed_cells > 0 {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    })
}

/// Dispatches a parsed command line and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    let result = match &cli.command {
        Command::Sphere(c) => cmd_sphere(c),
        Command::Spectrum(c) => cmd_spectrum(c),
        Command::Fcount(c) => cmd_fcount(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Sweep(c) => cmd_sweep(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
