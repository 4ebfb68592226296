//! `footprint`: estimate the carbon footprint of computations.

mod serve;

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use footprint_core::ingest::{estimate_jobs, parse_jobs, GroupKey, IngestError, ResolveDefaults};
use footprint_core::reference::{
    is_sub_region, verify_bundled_checksums, verify_checksums_in, NATIONAL_CI_SPAN,
};
use footprint_core::report::{
    compare_report, estimate_report, render, render_comparison, render_ingest, render_sweep,
    sweep_report, Format, IngestReport,
};
use footprint_core::request::{ErrorCode, EstimateRequest, RequestError, RequestMode};
use footprint_core::scenario::load_curve;
use footprint_core::{DataError, ReferenceData};

const EXIT_VALIDATION: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "footprint",
    version,
    about = "Estimate the carbon footprint of computations"
)]
struct Cli {
    /// Directory with processors.csv, carbon_intensity.csv and constants.csv
    /// to use instead of the bundled tables.
    #[arg(long, global = true, value_name = "PATH")]
    data_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate one workload.
    #[command(allow_negative_numbers = true)]
    Estimate(EstimateArgs),
    /// Compare two scenario files.
    Compare {
        #[arg(long, value_name = "FILE")]
        scenario_a: PathBuf,
        #[arg(long, value_name = "FILE")]
        scenario_b: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Estimate a base workload at every point of a scaling curve.
    Sweep {
        #[arg(long, value_name = "FILE")]
        base: PathBuf,
        /// CSV with header `cores,runtime_hours`.
        #[arg(long, value_name = "FILE")]
        curve: PathBuf,
        /// Scale memory with the core count instead of keeping the base allocation.
        #[arg(long, value_name = "GB")]
        memory_gb_per_core: Option<f64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Aggregate a scheduler accounting export.
    Ingest {
        #[arg(long, value_name = "FILE")]
        jobs: PathBuf,
        #[arg(long, value_enum)]
        group_by: GroupBy,
        #[arg(long, value_name = "F")]
        default_pue: Option<f64>,
        #[arg(long, value_name = "CODE")]
        default_region: Option<String>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Reference data maintenance.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Check checksums and invariants of the reference tables.
    Validate,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_name = "F")]
    runtime_hours: f64,
    #[arg(long, value_name = "N")]
    cores: Option<u64>,
    /// Processor model from the catalog.
    #[arg(long, value_name = "NAME", group = "power")]
    processor: Option<String>,
    /// Thermal design power of one processor, shared by `--units` cores.
    #[arg(long, value_name = "W", group = "power", requires = "units")]
    tdp: Option<f64>,
    #[arg(long, value_name = "N", requires = "tdp")]
    units: Option<u64>,
    /// Total power draw of the hardware, replacing the per-core model.
    #[arg(long, value_name = "F", group = "power")]
    power_kw: Option<f64>,
    #[arg(long, value_name = "F")]
    usage: Option<f64>,
    #[arg(long, value_name = "F")]
    memory_gb: Option<f64>,
    #[arg(long, value_name = "CODE")]
    region: Option<String>,
    #[arg(long, value_name = "F")]
    pue: Option<f64>,
    #[arg(long, value_name = "F")]
    psf: Option<f64>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Markdown,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Text => Format::Text,
            OutputFormat::Markdown => Format::Markdown,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupBy {
    User,
    Project,
    Region,
    Month,
}

impl From<GroupBy> for GroupKey {
    fn from(g: GroupBy) -> Self {
        match g {
            GroupBy::User => GroupKey::User,
            GroupBy::Project => GroupKey::Project,
            GroupBy::Region => GroupKey::Region,
            GroupBy::Month => GroupKey::Month,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    fn data(e: DataError) -> Self {
        let code = if matches!(e, DataError::Io(_)) {
            EXIT_IO
        } else {
            EXIT_DATA
        };
        Self::new(code, e)
    }

    fn request(e: RequestError) -> Self {
        let code = if e.code == ErrorCode::NotFound {
            EXIT_DATA
        } else {
            EXIT_VALIDATION
        };
        Self::new(code, e)
    }

    /// Like [`Failure::request`], naming the `estimate` flag instead of the field.
    fn flag(e: RequestError) -> Self {
        Self::request(RequestError {
            field: flag_name(&e.field),
            ..e
        })
    }

    fn ingest(e: IngestError) -> Self {
        match e {
            IngestError::Lookup { .. } => Self::new(EXIT_DATA, e),
            IngestError::Data(d) => Self::data(d),
            other => Self::new(EXIT_VALIDATION, other),
        }
    }
}

/// Maps request field names to the `estimate` flags that set them.
fn flag_name(field: &str) -> String {
    let flag = match field {
        "runtime_hours" => "--runtime-hours",
        "cores" => "--cores",
        "processor_name" => "--processor",
        "tdp_watts" => "--tdp",
        "unit_count" => "--units",
        "explicit_power_kw" => "--power-kw",
        "usage_factor" => "--usage",
        "mem_gb" => "--memory-gb",
        "region_code" => "--region",
        "pue" => "--pue",
        "psf" => "--psf",
        other => other,
    };
    flag.to_owned()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_data(dir: Option<&Path>) -> Result<ReferenceData, Failure> {
    match dir {
        Some(d) => ReferenceData::load_dir(d).map_err(Failure::data),
        None => Ok(ReferenceData::bundled().clone()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn emit(bytes: &[u8]) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
}

fn scenario(path: &Path, mode: RequestMode) -> Result<EstimateRequest, Failure> {
    let text = read(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        EstimateRequest::from_json(&text, mode)
    } else {
        EstimateRequest::from_kv(&text, mode)
    };
    parsed.map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let dir = cli.data_dir.as_deref();
    match cli.command {
        Command::Estimate(args) => {
            let data = load_data(dir)?;
            let format = args.format.into();
            let request = EstimateRequest::from_map(&args.into_map(), RequestMode::Estimate)
                .map_err(Failure::flag)?;
            let payload = estimate_report(&request, &data).map_err(Failure::flag)?;
            emit(&render(&payload, format))
        }
        Command::Compare {
            scenario_a,
            scenario_b,
            format,
        } => {
            let a = scenario(&scenario_a, RequestMode::Estimate)?;
            let b = scenario(&scenario_b, RequestMode::Estimate)?;
            let data = load_data(dir)?;
            let report = compare_report(&a, &b, &data).map_err(Failure::request)?;
            emit(&render_comparison(&report, format.into()))
        }
        Command::Sweep {
            base,
            curve,
            memory_gb_per_core,
            format,
        } => {
            let request = scenario(&base, RequestMode::SweepBase)?;
            let text = read(&curve)?;
            let points = load_curve(text.as_bytes())
                .map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", curve.display())))?;
            let data = load_data(dir)?;
            let report = sweep_report(&request, points.into(), memory_gb_per_core, &data)
                .map_err(Failure::request)?;
            emit(&render_sweep(&report, format.into()))
        }
        Command::Ingest {
            jobs,
            group_by,
            default_pue,
            default_region,
            format,
        } => {
            let text = read(&jobs)?;
            let records = parse_jobs(text.as_bytes()).map_err(Failure::ingest)?;
            let data = load_data(dir)?;
            let mut defaults = ResolveDefaults {
                pue: data.constants.world_avg_pue,
                ..ResolveDefaults::default()
            };
            if let Some(p) = default_pue {
                if !(p.is_finite() && p >= 1.0) {
                    return Err(Failure::new(EXIT_VALIDATION, "--default-pue: must be >= 1"));
                }
                defaults.pue = p;
            }
            if let Some(r) = default_region {
                defaults.region = data
                    .carbon_intensity
                    .lookup(&r)
                    .map_err(|e| Failure::new(EXIT_DATA, format!("--default-region: {e}")))?
                    .region_code
                    .clone();
            }
            let estimates = estimate_jobs(records, &defaults, &data).map_err(Failure::ingest)?;
            let report = IngestReport::new(group_by.into(), &estimates, &data);
            emit(&render_ingest(&report, format.into()))
        }
        Command::Data {
            command: DataCommand::Validate,
        } => validate(dir),
        Command::Serve { port, host } => serve::run(load_data(dir)?, &host, port),
    }
}

impl EstimateArgs {
    fn into_map(self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut real = |k: &str, v: Option<f64>| {
            if let Some(v) = v {
                // Non-finite values become null and are then reported as missing.
                m.insert(
                    k.to_owned(),
                    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number),
                );
            }
        };
        real("runtime_hours", Some(self.runtime_hours));
        real("tdp_watts", self.tdp);
        real("explicit_power_kw", self.power_kw);
        real("usage_factor", self.usage);
        real("mem_gb", self.memory_gb);
        real("pue", self.pue);
        real("psf", self.psf);
        let counts = [("cores", self.cores), ("unit_count", self.units)];
        for (k, v) in counts.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))) {
            m.insert(k.to_owned(), v.into());
        }
        let texts = [
            ("label", self.label),
            ("processor_name", self.processor),
            ("region_code", self.region),
        ];
        for (k, v) in texts.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))) {
            m.insert(k.to_owned(), v.into());
        }
        m
    }
}

fn validate(dir: Option<&Path>) -> Result<(), Failure> {
    let mut out = String::new();
    match dir {
        Some(d) => match verify_checksums_in(d).map_err(Failure::data)? {
            Some(n) => out.push_str(&format!("checksums: {n} files match SHA256SUMS\n")),
            None => out.push_str("checksums: no SHA256SUMS file, skipped\n"),
        },
        None => {
            verify_bundled_checksums().map_err(Failure::data)?;
            out.push_str("checksums: bundled tables match their pins\n");
        }
    }
    let data = load_data(dir)?;
    out.push_str(&format!(
        "tables: {} processors, {} carbon-intensity regions, {} constants ({})\n",
        data.processors.len(),
        data.carbon_intensity.len(),
        data.constant_rows.len(),
        data.version
    ));
    for key in data.constants.deviations() {
        out.push_str(&format!(
            "note: constant {key} = {} differs from the built-in default\n",
            data.constants.get(key).unwrap_or(f64::NAN)
        ));
    }
    let subregions = data
        .carbon_intensity
        .entries()
        .iter()
        .filter(|r| is_sub_region(&r.region_code))
        .count();
    let outliers = data.ci_span_outliers();
    let (lo, hi) = NATIONAL_CI_SPAN;
    for r in &outliers {
        out.push_str(&format!(
            "outlier: {} {} gCO2e/kWh is outside [{lo}, {hi}]\n",
            r.region_code, r.gco2e_per_kwh
        ));
    }
    out.push_str(&format!(
        "carbon intensity: {} national regions within [{lo}, {hi}], {subregions} sub-regions exempt\n",
        data.carbon_intensity.len() - subregions - outliers.len()
    ));
    emit(out.as_bytes())?;
    if outliers.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_DATA,
            format!("{} regions outside the expected span", outliers.len()),
        ))
    }
}
