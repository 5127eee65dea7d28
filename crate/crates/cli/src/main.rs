use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sable_core::analysis::analyze_source;
use sable_core::engine::{traversal_order, EngineConfig, DEFAULT_LOOP_CAP};
use sable_core::frontend::parse_procedure;
use sable_core::library::{Library, LIBRARY_DIR_ENV};
use sable_core::metrics::{self, ConfusionMatrix, Mode, VulnRecord};
use sable_core::report::Report;
use sable_core::sable::{parse_sable, parse_source_annotation, SableProgram};
use sable_core::scfg::Scfg;
use serde_json::json;

const ALARMS: u8 = 1;
const FAILURE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sable",
    version,
    about = "Static-aspect vulnerability analysis for Python procedures"
)]
struct Cli {
    /// Library asset directory; the embedded library is used otherwise.
    #[arg(long, global = true, env = LIBRARY_DIR_ENV)]
    library_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Sensitivity,
    Specificity,
    Precision,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze procedures; exits 1 when alarms are raised.
    Analyze {
        source: PathBuf,
        /// `file:qualified.name`; repeat to analyze several procedures.
        #[arg(long = "procedure", required = true)]
        procedures: Vec<String>,
        /// Definition files, in order.
        #[arg(long = "sable", required_unless_present = "library_entry")]
        sable: Vec<PathBuf>,
        #[arg(long, conflicts_with = "sable")]
        library_entry: Option<String>,
        #[arg(long)]
        annotation: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LOOP_CAP)]
        max_loop_iters: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the symbolic control-flow graph of a procedure.
    DumpScfg {
        source: PathBuf,
        #[arg(long)]
        procedure: String,
        #[arg(long)]
        dot: bool,
    },
    /// Parse and validate definition files, then print the traversal order.
    Check {
        #[arg(required = true)]
        sable: Vec<PathBuf>,
    },
    /// Detection metrics over a directory of vulnerability records.
    Eval {
        records: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Strict)]
        mode: ModeArg,
        /// Second record directory for a paired per-vulnerability comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MetricArg::Sensitivity)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// List library entries and fixtures.
    Library,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze {
            source,
            procedures,
            sable,
            library_entry,
            annotation,
            max_loop_iters,
            format,
        } => analyze(
            &source,
            &procedures,
            &sable,
            library_entry.as_deref(),
            cli.library_dir.as_deref(),
            &annotation,
            max_loop_iters,
            format,
        ),
        Command::DumpScfg {
            source,
            procedure,
            dot,
        } => dump_scfg(&source, &procedure, dot),
        Command::Check { sable } => check(&sable),
        Command::Eval {
            records,
            mode,
            compare,
            metric,
            format,
        } => eval(&records, mode, compare.as_deref(), metric, format),
        Command::Library => list_library(cli.library_dir.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(FAILURE)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn load_program(path: &Path) -> Result<SableProgram, String> {
    parse_sable(&read(path)?).map_err(|e| format!("{}:{e}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    source: &Path,
    procedures: &[String],
    sable: &[PathBuf],
    library_entry: Option<&str>,
    library_dir: Option<&Path>,
    annotation: &Path,
    max_loop_iters: usize,
    format: Format,
) -> Result<u8, String> {
    let (program, definition_name) = match library_entry {
        Some(name) => {
            let lib = Library::discover(library_dir).map_err(|e| e.to_string())?;
            let entry = lib.entry(name).map_err(|e| e.to_string())?;
            (
                entry.program.clone(),
                file_name(Path::new(&entry.definition_path)),
            )
        }
        None => {
            let programs = sable
                .iter()
                .map(|p| load_program(p))
                .collect::<Result<Vec<_>, _>>()?;
            let names: Vec<String> = sable.iter().map(|p| file_name(p)).collect();
            (SableProgram::merge(programs), names.join(", "))
        }
    };
    let ann = parse_source_annotation(&read(annotation)?)
        .map_err(|e| format!("{}: {e}", annotation.display()))?;
    let text = read(source)?;
    let config = EngineConfig {
        loop_cap: max_loop_iters,
        ..EngineConfig::default()
    };
    let ann_name = file_name(annotation);
    let results: Vec<Result<Report, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = procedures
            .iter()
            .map(|q| {
                let (program, ann, text, ann_name, definition_name) =
                    (&program, &ann, &text, &ann_name, &definition_name);
                scope.spawn(move || {
                    analyze_source(text, q, ann, program, config)
                        .map(|a| Report::new(&a, ann_name, definition_name))
                        .map_err(|e| format!("{}: {q}: {e}", source.display()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err("analysis worker panicked".to_string()))
            })
            .collect()
    });
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    match format {
        Format::Text => reports.iter().for_each(|r| print!("{}", r.to_text())),
        Format::Machine => {
            let value = serde_json::to_value(&reports).map_err(|e| e.to_string())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&value).map_err(|e| e.to_string())?
            );
        }
    }
    Ok(if reports.iter().any(|r| !r.alarms.is_empty()) {
        ALARMS
    } else {
        0
    })
}

fn dump_scfg(source: &Path, procedure: &str, dot: bool) -> Result<u8, String> {
    let ir = parse_procedure(&read(source)?, procedure)
        .map_err(|e| format!("{}: {e}", source.display()))?;
    let scfg = Scfg::build(&ir).map_err(|e| e.to_string())?;
    print!("{}", if dot { scfg.to_dot() } else { scfg.dump() });
    Ok(0)
}

fn check(paths: &[PathBuf]) -> Result<u8, String> {
    let mut programs = Vec::new();
    for p in paths {
        programs.push(load_program(p)?);
        println!("ok {}", p.display());
    }
    let order = traversal_order(&SableProgram::merge(programs)).map_err(|e| e.to_string())?;
    println!("order: {}", order.join(", "));
    Ok(0)
}

fn metric_of(cm: &ConfusionMatrix, metric: MetricArg) -> Result<f64, metrics::MetricsError> {
    match metric {
        MetricArg::Sensitivity => metrics::sensitivity(cm),
        MetricArg::Specificity => metrics::specificity(cm),
        MetricArg::Precision => Ok(metrics::precision(cm)),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

fn rate_or_dash(r: Result<f64, metrics::MetricsError>) -> String {
    r.map_or_else(|_| "-".to_string(), pct)
}

fn eval(
    dir: &Path,
    mode: ModeArg,
    compare: Option<&Path>,
    metric: MetricArg,
    format: Format,
) -> Result<u8, String> {
    let mode = match mode {
        ModeArg::Strict => Mode::Strict,
        ModeArg::Relaxed => Mode::Relaxed,
    };
    let records = metrics::load_records(dir).map_err(|e| e.to_string())?;
    if records.is_empty() {
        return Err(format!("{}: no records", dir.display()));
    }
    let per: Vec<(&VulnRecord, ConfusionMatrix)> = records
        .iter()
        .map(|r| (r, metrics::confusion(r, mode)))
        .collect();
    let total = metrics::aggregate(&records, mode);
    let comparison = match compare {
        Some(other) => Some(paired(
            &records,
            &metrics::load_records(other).map_err(|e| e.to_string())?,
            mode,
            metric,
        )?),
        None => None,
    };
    match format {
        Format::Machine => {
            let doc = json!({
                "mode": mode,
                "records": per.iter().map(|(r, cm)| json!({
                    "id": r.id,
                    "matrix": cm,
                    "sensitivity": metrics::sensitivity(cm).ok(),
                    "specificity": metrics::specificity(cm).ok(),
                    "precision": metrics::precision(cm),
                })).collect::<Vec<_>>(),
                "aggregate": {
                    "matrix": total,
                    "sensitivity": metrics::sensitivity(&total).ok(),
                    "specificity": metrics::specificity(&total).ok(),
                    "precision": metrics::precision(&total),
                },
                "comparison": comparison,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?
            );
        }
        Format::Text => {
            println!(
                "{:<20} {:>4} {:>4} {:>4} {:>4} {:>12} {:>12} {:>10}",
                "id", "TP", "FN", "TN", "FP", "sensitivity", "specificity", "precision"
            );
            for (r, cm) in &per {
                println!(
                    "{:<20} {:>4} {:>4} {:>4} {:>4} {:>12} {:>12} {:>10}",
                    r.id,
                    cm.tp,
                    cm.fn_,
                    cm.tn,
                    cm.fp,
                    rate_or_dash(metrics::sensitivity(cm)),
                    rate_or_dash(metrics::specificity(cm)),
                    pct(metrics::precision(cm))
                );
            }
            println!(
                "{:<20} {:>4} {:>4} {:>4} {:>4} {:>12} {:>12} {:>10}",
                "total",
                total.tp,
                total.fn_,
                total.tn,
                total.fp,
                rate_or_dash(metrics::sensitivity(&total)),
                rate_or_dash(metrics::specificity(&total)),
                pct(metrics::precision(&total))
            );
            if let Some(c) = &comparison {
                println!(
                    "wilcoxon ({}): n={} R+={} R-={} p={:.6} E={:.4}",
                    c["metric"].as_str().unwrap_or_default(),
                    c["n"],
                    c["r_plus"],
                    c["r_minus"],
                    c["p_value"].as_f64().unwrap_or(f64::NAN),
                    c["effect_size"].as_f64().unwrap_or(f64::NAN)
                );
            }
        }
    }
    Ok(0)
}

fn paired(
    a: &[VulnRecord],
    b: &[VulnRecord],
    mode: Mode,
    metric: MetricArg,
) -> Result<serde_json::Value, String> {
    let index = |rs: &[VulnRecord]| -> BTreeMap<String, ConfusionMatrix> {
        rs.iter()
            .map(|r| (r.id.clone(), metrics::confusion(r, mode)))
            .collect()
    };
    let (ia, ib) = (index(a), index(b));
    if ia.keys().ne(ib.keys()) {
        return Err("compared record sets must cover the same ids".to_string());
    }
    let score =
        |id: &String, cm: &ConfusionMatrix| metric_of(cm, metric).map_err(|e| format!("{id}: {e}"));
    let xs = ia
        .iter()
        .map(|(id, cm)| score(id, cm))
        .collect::<Result<Vec<_>, _>>()?;
    let ys = ib
        .iter()
        .map(|(id, cm)| score(id, cm))
        .collect::<Result<Vec<_>, _>>()?;
    let w = metrics::wilcoxon_signed_rank(&xs, &ys).map_err(|e| e.to_string())?;
    let mut v = serde_json::to_value(&w).map_err(|e| e.to_string())?;
    let name = match metric {
        MetricArg::Sensitivity => "sensitivity",
        MetricArg::Specificity => "specificity",
        MetricArg::Precision => "precision",
    };
    v["metric"] = json!(name);
    Ok(v)
}

fn list_library(dir: Option<&Path>) -> Result<u8, String> {
    let lib = Library::discover(dir).map_err(|e| e.to_string())?;
    for e in &lib.entries {
        let travs: Vec<&str> = e
            .program
            .traversals
            .iter()
            .map(|t| t.name.as_str())
            .collect();
        let labels: Vec<&str> = e.annotation_schema.iter().map(String::as_str).collect();
        println!(
            "{}: {} [{}] labels: {}",
            e.name,
            e.definition_path,
            travs.join(", "),
            labels.join(", ")
        );
    }
    for f in &lib.fixtures {
        println!(
            "  {} {:?} {} -> lines {:?}",
            f.id, f.variant, f.source_path, f.alarm_lines
        );
    }
    Ok(0)
}
