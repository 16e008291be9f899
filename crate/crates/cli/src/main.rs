use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use expsum_core::experiment::{
    emit_report, parse_config, run_experiment, ExperimentConfig, ExperimentError, ReportFormat,
};
use expsum_core::proof::{build_prime_basket, ell_choice, gcd_decompose, EllChoice};
use expsum_core::verify::{run_verification_suite, Fault, Scale};
use expsum_core::{Gamma, PrimeContext};

#[derive(Parser, Debug)]
#[command(
    name = "expsum",
    version,
    about = "Exact double exponential sums and the bounds they are compared against"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; stdout when omitted (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads (overrides `threads` in the config).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Verification corpus size.
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Smoke)]
    scale: ScaleArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact W for the configured cell(s), without bounds.
    Exact,
    /// Exact W next to every catalogued bound for the configured cell.
    Bounds,
    /// Full grid over the config's `sweep` axes.
    Sweep,
    /// Run the invariant suite.
    Verify {
        /// Inject a known defect to confirm the suite catches it.
        #[arg(long, value_enum)]
        inject_fault: Option<FaultArg>,
    },
    /// Print the gcd layers of Y with their prime baskets and basket sizes.
    Decompose,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Smoke,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    IncludeDegenerateTuples,
}

enum Failure {
    Experiment(ExperimentError),
    Verification,
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Experiment(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(2),
        Err(Failure::Experiment(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("--config <path> is required".into()))?;
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.clone(),
        source,
    })?;
    let mut config = parse_config(&text)?;
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    config.validate()?;
    Ok(config)
}

fn out_path<'a>(cli: &'a Cli, config: &'a ExperimentConfig) -> Option<&'a Path> {
    cli.out.as_deref().or(config.out.as_deref())
}

fn report_format(format: Format) -> ReportFormat {
    match format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Exact => exact(cli),
        Command::Bounds => {
            let mut config = load_config(cli)?;
            config.sweep = None;
            let record = run_experiment(&config)?;
            emit_report(&record, report_format(cli.format), out_path(cli, &config))?;
            warn_failed(
                &record
                    .failed_cells()
                    .map(|c| c.error.clone().unwrap_or_default())
                    .collect::<Vec<_>>(),
            );
            Ok(())
        }
        Command::Sweep => {
            let config = load_config(cli)?;
            if config.sweep.is_none() {
                return Err(ExperimentError::Config(
                    "sweep needs a `sweep` section in the config".into(),
                )
                .into());
            }
            let record = run_experiment(&config)?;
            emit_report(&record, report_format(cli.format), out_path(cli, &config))?;
            warn_failed(
                &record
                    .failed_cells()
                    .map(|c| c.error.clone().unwrap_or_default())
                    .collect::<Vec<_>>(),
            );
            Ok(())
        }
        Command::Verify { inject_fault } => verify(cli, *inject_fault),
        Command::Decompose => decompose(cli),
    }
}

fn warn_failed(errors: &[String]) {
    for e in errors {
        eprintln!("warning: cell failed: {e}");
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, ExperimentError> {
    Ok(match path {
        Some(path) => Box::new(
            fs::File::create(path).map_err(|source| ExperimentError::Io {
                path: path.to_path_buf(),
                source,
            })?,
        ),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_all(path: Option<&Path>, text: &str) -> Result<(), ExperimentError> {
    let mut sink = open_out(path)?;
    sink.write_all(text.as_bytes())
        .and_then(|_| sink.flush())
        .map_err(|source| ExperimentError::Io {
            path: path
                .map(Path::to_path_buf)
                .unwrap_or_else(|| "<stdout>".into()),
            source,
        })
}

#[derive(Serialize)]
struct ExactRow {
    p: u64,
    #[serde(rename = "T")]
    order: u64,
    size_x: u64,
    size_y: u64,
    seed: u64,
    exact: Option<f64>,
    error: Option<String>,
}

fn exact(cli: &Cli) -> Result<(), Failure> {
    let mut config = load_config(cli)?;
    // W does not depend on k
    config.k.truncate(1);
    let record = run_experiment(&config)?;
    let rows: Vec<ExactRow> = record
        .cells
        .iter()
        .map(|c| ExactRow {
            p: c.p,
            order: c.order,
            size_x: c.size_x,
            size_y: c.size_y,
            seed: c.seed,
            exact: c.report.as_ref().map(|r| r.exact),
            error: c.error.clone(),
        })
        .collect();
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&rows).expect("rows serialise") + "\n",
        Format::Csv => {
            let mut s = String::from("p,T,size_x,size_y,seed,exact\n");
            for r in &rows {
                let exact = r.exact.map(|w| w.to_string()).unwrap_or_default();
                s += &format!(
                    "{},{},{},{},{},{exact}\n",
                    r.p, r.order, r.size_x, r.size_y, r.seed
                );
            }
            s
        }
    };
    write_all(out_path(cli, &config), &text)?;
    Ok(())
}

fn verify(cli: &Cli, fault: Option<FaultArg>) -> Result<(), Failure> {
    let scale = match cli.scale {
        ScaleArg::Smoke => Scale::Smoke,
        ScaleArg::Full => Scale::Full,
    };
    let fault = fault.map(|FaultArg::IncludeDegenerateTuples| Fault::IncludeDegenerateTuples);
    let summary = run_verification_suite(scale, fault);
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&summary).expect("summary serialises") + "\n",
        Format::Csv => format!("{summary}\n"),
    };
    write_all(cli.out.as_deref(), &text)?;
    if summary.passed() {
        Ok(())
    } else {
        for f in summary.failures() {
            eprintln!(
                "FAILED {}/{}: {}",
                f.module,
                f.id,
                f.counterexample.as_deref().unwrap_or("")
            );
        }
        Err(Failure::Verification)
    }
}

#[derive(Serialize)]
struct LayerView {
    d: u64,
    modulus: u64,
    size: usize,
    elements: Vec<u64>,
    choices: Vec<(u32, EllChoice)>,
    basket: Vec<u64>,
}

#[derive(Serialize)]
struct Decomposition {
    p: u64,
    #[serde(rename = "T")]
    order: u64,
    t: u64,
    size_y: usize,
    layers: Vec<LayerView>,
}

fn decompose(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    let config_err = |e: expsum_core::Error| ExperimentError::Config(e.to_string());
    let ctx = PrimeContext::new(config.p).map_err(config_err)?;
    let order = config.resolved_order()?;
    let t = ctx.group_order() / order;
    let y = config.y.resolve(ctx.group_order(), Gamma::Ones)?;
    let mut layers = Vec::new();
    for (d, layer) in gcd_decompose(&y, &ctx).map_err(config_err)? {
        let choices = config
            .k
            .iter()
            .map(|&k| Ok((k, ell_choice(d, layer.len() as u64, t, k, &ctx)?)))
            .collect::<Result<Vec<_>, expsum_core::Error>>()
            .map_err(config_err)?;
        let ell = choices.iter().map(|(_, c)| c.ell).max().unwrap_or(1).max(1) as usize;
        let basket = build_prime_basket(layer.modulus(), ell).map_err(config_err)?;
        layers.push(LayerView {
            d,
            modulus: layer.modulus(),
            size: layer.len(),
            elements: layer.elements().to_vec(),
            choices,
            basket: basket.primes().to_vec(),
        });
    }
    let view = Decomposition {
        p: config.p,
        order,
        t,
        size_y: y.len(),
        layers,
    };
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&view).expect("view serialises") + "\n",
        Format::Csv => render_decomposition(&view),
    };
    write_all(out_path(cli, &config), &text)?;
    Ok(())
}

fn preview(values: &[u64], limit: usize) -> String {
    let shown: Vec<String> = values.iter().take(limit).map(u64::to_string).collect();
    let more = if values.len() > limit { ", ..." } else { "" };
    format!("[{}{more}]", shown.join(", "))
}

fn render_decomposition(v: &Decomposition) -> String {
    let mut s = format!(
        "p = {}, T = {}, t = {}, |Y| = {}, {} nonempty layers\n",
        v.p,
        v.order,
        v.t,
        v.size_y,
        v.layers.len()
    );
    for l in &v.layers {
        s += &format!(
            "d = {:<6} Z_{:<6} |L_d| = {:<6} L_d = {}\n",
            l.d,
            l.modulus,
            l.size,
            preview(&l.elements, 10)
        );
        for (k, c) in &l.choices {
            s += &format!(
                "    k = {k}: ell = {} (raw {:.4}), admissible = {}; {}\n",
                c.ell, c.raw, c.admissible, c.diagnostics
            );
        }
        s += &format!("    basket = {}\n", preview(&l.basket, 12));
    }
    s
}
