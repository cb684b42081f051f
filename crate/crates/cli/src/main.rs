use std::fs;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hearthcast::bench::{
    emit_report, run_benchmark, BenchmarkSpec, DataSource, Regime, ReportFormat, BENCHMARK_MODELS,
};
use hearthcast::data::{partition_outliers, HouseholdRecord, OutlierPolicy};
use hearthcast::features::LowConsumptionRule;
use hearthcast::ingest::{ingest_csv, write_dataset, write_rejections, CsvSchema};
use hearthcast::metrics::PriceConfig;
use hearthcast::models::{ForecastModel, ModelKind, ModelSpec};
use hearthcast::synth::{generate, GeneratorConfig};
use hearthcast_cli::price_with_env;
use hearthcast_cli::server::{serve, ExplainResponse, PredictResponse, ServeState};

/// Household annual consumption (CAR) forecasting.
#[derive(Debug, Parser)]
#[command(name = "hearthcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic household CSV.
    Gen {
        /// Generator config (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of households.
        #[arg(long)]
        n: Option<usize>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model on a household CSV and save it.
    Train {
        /// Household CSV.
        #[arg(long)]
        data: PathBuf,
        /// legacy, linear, cart, random_forest, gradient_boosting or constrained_tree.
        #[arg(long, default_value = "constrained_tree")]
        kind: ModelKind,
        /// Hyperparameters for the chosen kind (JSON object).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Low-consumption rule (JSON); the default rule otherwise.
        #[arg(long)]
        rule: Option<PathBuf>,
        /// Seed for forest and boosting fits.
        #[arg(long)]
        seed: Option<u64>,
        /// Drop targets outside the outlier band before fitting.
        #[arg(long)]
        filter_outliers: bool,
        /// Where to write rejected CSV rows.
        #[arg(long)]
        rejections: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict CAR and monthly installment for household records.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Records as a JSON object, a JSON array or a CSV file (by
        /// extension); `-` reads JSON from stdin.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Show the decision path of a constrained tree for household records.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the five model families with and without outlier filtering.
    Benchmark {
        /// Benchmark spec (JSON); synthetic defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the split/ensemble seed and a synthetic source's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        /// json: report.json; csv: metric, gap and importance tables;
        /// text: both, plus the RMSD table on stdout. Both files when omitted.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Serve a model over HTTP (`/v1/predict`, `/v1/explain`, `/v1/model`).
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

/// Invocation problems that exit with status 1 rather than 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => match io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

/// Records from JSON (one object or an array) or CSV with record columns.
fn read_records(path: &Path) -> Result<Vec<HouseholdRecord>> {
    let records = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        rdr.deserialize()
            .enumerate()
            .map(|(i, r)| r.with_context(|| format!("{} line {}", path.display(), i + 2)))
            .collect::<Result<Vec<HouseholdRecord>>>()?
    } else {
        let text = if path.as_os_str() == "-" {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        } else {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        };
        let value: serde_json::Value = serde_json::from_str(&text).context("records are not valid JSON")?;
        match value {
            serde_json::Value::Array(_) => serde_json::from_value(value)?,
            _ => vec![serde_json::from_value(value)?],
        }
    };
    for (i, r) in records.iter().enumerate() {
        r.validate().with_context(|| format!("record {i}"))?;
    }
    Ok(records)
}

fn cmd_gen(config: Option<PathBuf>, seed: Option<u64>, n: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = match &config {
        Some(p) => GeneratorConfig::from_json_file(p)?,
        None => GeneratorConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    let ds = generate(&cfg)?;
    match out {
        Some(p) => {
            let file = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
            write_dataset(&ds, io::BufWriter::new(file))?;
            eprintln!("wrote {} households to {}", ds.len(), p.display());
        }
        None => write_dataset(&ds, io::stdout().lock())?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: PathBuf,
    kind: ModelKind,
    config: Option<PathBuf>,
    rule: Option<PathBuf>,
    seed: Option<u64>,
    filter_outliers: bool,
    rejections: Option<PathBuf>,
    out: PathBuf,
) -> Result<()> {
    let ingested = ingest_csv(&data, &CsvSchema::default())?;
    if !ingested.rejections.is_empty() {
        eprintln!("{} rows rejected", ingested.rejections.len());
    }
    if let Some(p) = &rejections {
        write_rejections(&ingested.rejections, p)?;
    }
    let mut train = ingested.dataset;
    if filter_outliers {
        let (inliers, outliers) = partition_outliers(&train, &OutlierPolicy::default());
        eprintln!("dropped {} outlier targets", outliers.len());
        train = inliers;
    }
    let rule: LowConsumptionRule = match &rule {
        Some(p) => read_json(p)?,
        None => LowConsumptionRule::default(),
    };
    let mut spec = match &config {
        Some(p) => ModelSpec::from_json_params(kind, read_json(p)?)?,
        None => ModelSpec::default_for(kind),
    };
    if let Some(s) = seed {
        spec = spec.with_seed(s);
    }
    let model = spec.fit(&train, &rule)?;
    model.save(&out)?;
    eprintln!("trained {} on {} households -> {}", kind, train.len(), out.display());
    Ok(())
}

fn cmd_predict(model: PathBuf, input: PathBuf, format: Format, out: Option<PathBuf>, price: PriceConfig) -> Result<()> {
    let model = ForecastModel::load(&model)?;
    let records = read_records(&input)?;
    let rows: Vec<PredictResponse> = records
        .iter()
        .map(|r| {
            let car = model.predict(r).kwh();
            PredictResponse {
                car_kwh: car,
                monthly_installment_eur: price.monthly_installment(car),
            }
        })
        .collect();
    let text = match format {
        Format::Json if rows.len() == 1 => serde_json::to_string_pretty(&rows[0])? + "\n",
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["row", "car_kwh", "monthly_installment_eur"])?;
            for (i, r) in rows.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    r.car_kwh.to_string(),
                    format!("{:.2}", r.monthly_installment_eur),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                format!(
                    "{i}: {:.1} kWh/year, {:.2} €/month\n",
                    r.car_kwh, r.monthly_installment_eur
                )
            })
            .collect(),
    };
    write_output(out.as_deref(), &text)
}

fn cmd_explain(model: PathBuf, input: PathBuf, format: Format, out: Option<PathBuf>) -> Result<()> {
    let model = ForecastModel::load(&model)?;
    if model.kind() != ModelKind::ConstrainedTree {
        bail!(
            "model kind '{}' has no decision trace; explain needs a constrained_tree model",
            model.kind()
        );
    }
    let records = read_records(&input)?;
    let explained: Vec<ExplainResponse> = records
        .iter()
        .map(|r| {
            let (car, trace) = model.explain(r).expect("constrained trees explain every record");
            ExplainResponse {
                car_kwh: car.kwh(),
                text: trace.render_text(),
                trace,
            }
        })
        .collect();
    let text = match format {
        Format::Json if explained.len() == 1 => serde_json::to_string_pretty(&explained[0])? + "\n",
        Format::Json => serde_json::to_string_pretty(&explained)? + "\n",
        Format::Text => explained.iter().map(|e| e.text.clone()).collect::<Vec<_>>().join("\n"),
        Format::Csv => return Err(usage("explain supports --format json or text")),
    };
    write_output(out.as_deref(), &text)
}

fn rmsd_table(report: &hearthcast::bench::BenchmarkReport) -> String {
    let mut s = format!(
        "{:<20}{:>16}{:>16}{:>12}\n",
        "model", "RMSD with outl.", "RMSD filtered", "change %"
    );
    for kind in BENCHMARK_MODELS {
        let a = report.result(kind, Regime::WithOutliers);
        let b = report.result(kind, Regime::Filtered);
        if let (Some(a), Some(b)) = (a, b) {
            s.push_str(&format!(
                "{:<20}{:>16.1}{:>16.1}{:>12.1}\n",
                kind.display_name(),
                a.metrics.rmsd,
                b.metrics.rmsd,
                b.rmsd_delta_pct
            ));
        }
    }
    s
}

fn cmd_benchmark(config: Option<PathBuf>, seed: Option<u64>, out: PathBuf, format: Option<Format>) -> Result<()> {
    let mut spec = match &config {
        Some(p) => BenchmarkSpec::from_json_file(p)?,
        None => BenchmarkSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
        if let DataSource::Synthetic(g) = &mut spec.data {
            g.seed = s;
        }
    }
    spec.price = price_with_env(spec.price).map_err(|e| usage(e.to_string()))?;
    let report = run_benchmark(&spec)?;
    let formats: &[ReportFormat] = match format {
        Some(Format::Json) => &[ReportFormat::Json],
        Some(Format::Csv) => &[ReportFormat::Csv],
        Some(Format::Text) | None => &[ReportFormat::Json, ReportFormat::Csv],
    };
    let mut written = Vec::new();
    for &f in formats {
        written.extend(emit_report(&report, f, &out)?);
    }
    if format == Some(Format::Text) {
        print!("{}", rmsd_table(&report));
    }
    eprintln!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let price = || price_with_env(PriceConfig::default()).map_err(|e| usage(e.to_string()));
    match cli.command {
        Command::Gen { config, seed, n, out } => cmd_gen(config, seed, n, out),
        Command::Train {
            data,
            kind,
            config,
            rule,
            seed,
            filter_outliers,
            rejections,
            out,
        } => cmd_train(data, kind, config, rule, seed, filter_outliers, rejections, out),
        Command::Predict {
            model,
            input,
            format,
            out,
        } => cmd_predict(model, input, format, out, price()?),
        Command::Explain {
            model,
            input,
            format,
            out,
        } => cmd_explain(model, input, format, out),
        Command::Benchmark {
            config,
            seed,
            out,
            format,
        } => cmd_benchmark(config, seed, out, format),
        Command::Serve { model, port, host } => {
            let state = Arc::new(ServeState::from_file(&model, price()?)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(serve(state, SocketAddr::new(host, port)))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
