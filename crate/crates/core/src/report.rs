//! Report payloads and their text, Markdown and JSON renderings.
//!
//! Payloads carry unrounded values. Rendering rounds gCO2e, kilometres and
//! tree-months to the nearest integer (half away from zero) with thousands
//! separators, flights to one decimal and kWh to two decimals. JSON output
//! is the payload itself.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{aggregate_with, GroupKey, GroupSummary, JobRecord};
use crate::reference::ReferenceData;
use crate::request::ErrorCode;
use crate::request::{EstimateRequest, RequestError};
use crate::scenario::{
    compare, sweep_with, Comparison, CurvePoint, MemoryPolicy, ScalingCurve, ScenarioSetting,
    SweepResult,
};
use crate::{
    estimate_with, EnergyEstimate, EquivalenceSet, FootprintEstimate, GridCarbonIntensity,
    ModelError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown format {0:?} (text|markdown|json)")]
pub struct UnknownFormat(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Markdown,
    Json,
}

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Format::Text),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            other => Err(UnknownFormat(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPayload {
    pub request: EstimateRequest,
    pub energy: EnergyEstimate,
    pub gco2e_single: f64,
    pub psf: f64,
    pub gco2e_scaled: f64,
    pub pue: f64,
    pub carbon_intensity: GridCarbonIntensity,
    pub equivalences: EquivalenceSet,
    pub data_version: String,
}

impl ReportPayload {
    pub fn new(
        request: EstimateRequest,
        estimate: FootprintEstimate,
        data_version: impl Into<String>,
    ) -> Self {
        Self {
            request,
            energy: estimate.energy,
            gco2e_single: estimate.gco2e_single,
            psf: estimate.psf,
            gco2e_scaled: estimate.gco2e_scaled,
            pue: estimate.pue,
            carbon_intensity: estimate.ci_used,
            equivalences: estimate.equivalences,
            data_version: data_version.into(),
        }
    }
}

/// Validates, resolves and estimates a request. This is the one code path
/// behind the CLI, the service and library callers.
pub fn estimate_report(
    request: &EstimateRequest,
    data: &ReferenceData,
) -> Result<ReportPayload, RequestError> {
    let (workload, facility, ci) = request.to_model(data)?;
    let est = estimate_with(&workload, &facility, &ci, &data.constants).map_err(model_error)?;
    Ok(ReportPayload::new(
        request.clone(),
        est,
        data.version.clone(),
    ))
}

fn model_error(e: ModelError) -> RequestError {
    RequestError::new(
        ErrorCode::OutOfRange,
        e.field().unwrap_or("request"),
        e.to_string(),
    )
}

fn setting(
    request: &EstimateRequest,
    data: &ReferenceData,
    field: &str,
) -> Result<ScenarioSetting<f64>, RequestError> {
    let (workload, facility, ci) = request.to_model(data).map_err(|e| e.nested(field))?;
    Ok(ScenarioSetting {
        label: facility.label.clone(),
        workload,
        facility,
        ci,
    })
}

/// Compares two requests; the relative change is taken against `a`.
pub fn compare_report(
    a: &EstimateRequest,
    b: &EstimateRequest,
    data: &ReferenceData,
) -> Result<ComparisonReport, RequestError> {
    let (sa, sb) = (setting(a, data, "a")?, setting(b, data, "b")?);
    let cmp = compare(&sa, &sb).map_err(|e| match e {
        ModelError::ZeroBaseline => RequestError::new(ErrorCode::OutOfRange, "a", e.to_string()),
        other => model_error(other),
    })?;
    Ok(ComparisonReport::new(
        a.clone(),
        b.clone(),
        cmp,
        &data.version,
    ))
}

/// Estimates `base` at every point of the scaling curve.
pub fn sweep_report(
    base: &EstimateRequest,
    curve: Vec<CurvePoint<f64>>,
    memory_gb_per_core: Option<f64>,
    data: &ReferenceData,
) -> Result<SweepReport, RequestError> {
    let curve = ScalingCurve::new(curve)
        .map_err(|e| RequestError::new(ErrorCode::OutOfRange, "curve", e.to_string()))?;
    let policy = match memory_gb_per_core {
        None => MemoryPolicy::Fixed,
        Some(g) if g.is_finite() && g >= 0.0 => MemoryPolicy::PerCore { gb_per_core: g },
        Some(_) => {
            return Err(RequestError::new(
                ErrorCode::OutOfRange,
                "memory_gb_per_core",
                "must be >= 0",
            ))
        }
    };
    let mut probe = base.clone();
    probe.runtime_hours.get_or_insert(0.0);
    let (workload, facility, ci) = probe.to_model(data).map_err(|e| e.nested("base"))?;
    let result = sweep_with(&workload, &curve, &facility, &ci, policy)
        .map_err(|e| model_error(e).nested("base"))?;
    Ok(SweepReport::new(base.clone(), result, &data.version))
}

/// Integer with thousands separators, rounded half away from zero.
pub fn fmt_int(value: f64) -> String {
    group(&format!("{:.0}", value.round() + 0.0))
}

/// Fixed decimals with thousands separators on the integer part.
pub fn fmt_dec(value: f64, places: usize) -> String {
    group(&format!("{:.*}", places, value + 0.0))
}

fn group(digits: &str) -> String {
    let (sign, rest) = match digits.strip_prefix('-') {
        Some(r) => ("-", r),
        None => ("", digits),
    };
    let (int, frac) = match rest.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (rest, None),
    };
    let mut out = String::with_capacity(digits.len() + int.len() / 3);
    out.push_str(sign);
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if let Some(f) = frac {
        out.push('.');
        out.push_str(f);
    }
    out
}

/// Pretty-printed JSON with a trailing newline. Every JSON output of the
/// crate goes through here.
pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("payload serializes");
    out.push(b'\n');
    out
}

pub fn render(payload: &ReportPayload, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_json(payload),
        Format::Text => render_text(payload).into_bytes(),
        Format::Markdown => render_markdown(payload).into_bytes(),
    }
}

/// Like [`render`] but takes the format by name.
pub fn render_named(payload: &ReportPayload, format: &str) -> Result<Vec<u8>, UnknownFormat> {
    Ok(render(payload, format.parse()?))
}

fn render_text(p: &ReportPayload) -> String {
    let e = &p.equivalences;
    let mut s = String::new();
    let _ = writeln!(s, "Carbon footprint: {} gCO2e", fmt_int(p.gco2e_scaled));
    if p.psf != 1.0 {
        let _ = writeln!(
            s,
            "  {} gCO2e per run x pragmatic scaling factor {}",
            fmt_int(p.gco2e_single),
            p.psf
        );
    }
    let _ = writeln!(
        s,
        "Energy: {} kWh (cores {} kWh, memory {} kWh, PUE {})",
        fmt_dec(p.energy.total_kwh, 2),
        fmt_dec(p.energy.core_kwh, 2),
        fmt_dec(p.energy.memory_kwh, 2),
        p.pue
    );
    let _ = writeln!(
        s,
        "Carbon intensity: {} gCO2e/kWh ({}, {})",
        p.carbon_intensity.gco2e_per_kwh,
        p.carbon_intensity.region_code,
        p.carbon_intensity.region_name
    );
    let _ = writeln!(s, "Equivalent to:");
    let _ = writeln!(
        s,
        "  driving {} km in a European car ({} km in a US car)",
        fmt_int(e.car_km_eu),
        fmt_int(e.car_km_us)
    );
    let _ = writeln!(
        s,
        "  {} flights Paris-London",
        fmt_dec(e.flights_paris_london, 1)
    );
    let _ = writeln!(
        s,
        "  {} flights New York-San Francisco",
        fmt_dec(e.flights_ny_sf, 1)
    );
    let _ = writeln!(
        s,
        "  {} flights New York-Melbourne",
        fmt_dec(e.flights_ny_melbourne, 1)
    );
    let _ = writeln!(
        s,
        "  {} tree-months of carbon sequestration ({} tree-years)",
        fmt_int(e.tree_months),
        fmt_int(e.tree_years)
    );
    let _ = writeln!(s, "Reference data: {}", p.data_version);
    s
}

fn render_markdown(p: &ReportPayload) -> String {
    let e = &p.equivalences;
    let mut s = String::new();
    let _ = writeln!(s, "## Carbon footprint\n");
    let _ = writeln!(s, "| Quantity | Value |");
    let _ = writeln!(s, "|---|---|");
    let _ = writeln!(
        s,
        "| Carbon footprint | {} gCO2e |",
        fmt_int(p.gco2e_scaled)
    );
    let _ = writeln!(s, "| Per run | {} gCO2e |", fmt_int(p.gco2e_single));
    let _ = writeln!(s, "| Pragmatic scaling factor | {} |", p.psf);
    let _ = writeln!(s, "| Energy | {} kWh |", fmt_dec(p.energy.total_kwh, 2));
    let _ = writeln!(s, "| Cores | {} kWh |", fmt_dec(p.energy.core_kwh, 2));
    let _ = writeln!(s, "| Memory | {} kWh |", fmt_dec(p.energy.memory_kwh, 2));
    let _ = writeln!(s, "| PUE | {} |", p.pue);
    let _ = writeln!(
        s,
        "| Carbon intensity | {} gCO2e/kWh ({}) |",
        p.carbon_intensity.gco2e_per_kwh, p.carbon_intensity.region_code
    );
    let _ = writeln!(s, "\n### Equivalent to\n");
    let _ = writeln!(s, "- driving {} km in a European car", fmt_int(e.car_km_eu));
    let _ = writeln!(s, "- driving {} km in a US car", fmt_int(e.car_km_us));
    let _ = writeln!(
        s,
        "- {} flights Paris-London",
        fmt_dec(e.flights_paris_london, 1)
    );
    let _ = writeln!(
        s,
        "- {} flights New York-San Francisco",
        fmt_dec(e.flights_ny_sf, 1)
    );
    let _ = writeln!(
        s,
        "- {} flights New York-Melbourne",
        fmt_dec(e.flights_ny_melbourne, 1)
    );
    let _ = writeln!(
        s,
        "- {} tree-months ({} tree-years)",
        fmt_int(e.tree_months),
        fmt_int(e.tree_years)
    );
    let _ = writeln!(s, "\n_Reference data {}_", p.data_version);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: ReportPayload,
    pub b: ReportPayload,
    pub absolute_delta_g: f64,
    pub relative_change: f64,
}

impl ComparisonReport {
    pub fn new(
        a: EstimateRequest,
        b: EstimateRequest,
        cmp: Comparison<f64>,
        version: &str,
    ) -> Self {
        Self {
            a: ReportPayload::new(a, cmp.a, version),
            b: ReportPayload::new(b, cmp.b, version),
            absolute_delta_g: cmp.absolute_delta_g,
            relative_change: cmp.relative_change,
        }
    }
}

pub fn render_comparison(report: &ComparisonReport, format: Format) -> Vec<u8> {
    let label = |p: &ReportPayload| {
        p.request
            .label
            .clone()
            .unwrap_or_else(|| format!("{} / PUE {}", p.carbon_intensity.region_code, p.pue))
    };
    match format {
        Format::Json => to_json(report),
        Format::Text | Format::Markdown => {
            let bullet = if format == Format::Markdown { "- " } else { "" };
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{bullet}A ({}): {} gCO2e",
                label(&report.a),
                fmt_int(report.a.gco2e_scaled)
            );
            let _ = writeln!(
                s,
                "{bullet}B ({}): {} gCO2e",
                label(&report.b),
                fmt_int(report.b.gco2e_scaled)
            );
            let sign = if report.absolute_delta_g >= 0.0 {
                "+"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "{bullet}Change: {sign}{} gCO2e ({sign}{}%)",
                fmt_int(report.absolute_delta_g),
                fmt_dec(report.relative_change * 100.0, 1)
            );
            s.into_bytes()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReportRow {
    pub core_count: u64,
    pub runtime_hours: f64,
    pub energy: EnergyEstimate,
    pub gco2e_single: f64,
    pub gco2e_scaled: f64,
    pub equivalences: EquivalenceSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base: EstimateRequest,
    pub rows: Vec<SweepReportRow>,
    pub optimal_core_count: u64,
    pub data_version: String,
}

impl SweepReport {
    pub fn new(base: EstimateRequest, result: SweepResult<f64>, version: &str) -> Self {
        Self {
            base,
            rows: result
                .rows
                .into_iter()
                .map(|r| SweepReportRow {
                    core_count: r.core_count,
                    runtime_hours: r.runtime_hours,
                    energy: r.estimate.energy,
                    gco2e_single: r.estimate.gco2e_single,
                    gco2e_scaled: r.estimate.gco2e_scaled,
                    equivalences: r.estimate.equivalences,
                })
                .collect(),
            optimal_core_count: result.optimal_core_count,
            data_version: version.to_owned(),
        }
    }
}

pub fn render_sweep(report: &SweepReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_json(report),
        Format::Text | Format::Markdown => {
            let mut s = String::new();
            if format == Format::Markdown {
                let _ = writeln!(s, "| Cores | Runtime (h) | Energy (kWh) | gCO2e | |");
                let _ = writeln!(s, "|---:|---:|---:|---:|---|");
            } else {
                let _ = writeln!(
                    s,
                    "{:>8}  {:>12}  {:>14}  {:>14}",
                    "cores", "runtime_h", "kWh", "gCO2e"
                );
            }
            for r in &report.rows {
                let mark = if r.core_count == report.optimal_core_count {
                    "optimal"
                } else {
                    ""
                };
                if format == Format::Markdown {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} | {mark} |",
                        r.core_count,
                        r.runtime_hours,
                        fmt_dec(r.energy.total_kwh, 2),
                        fmt_int(r.gco2e_scaled)
                    );
                } else {
                    let _ = writeln!(
                        s,
                        "{:>8}  {:>12}  {:>14}  {:>14}  {mark}",
                        r.core_count,
                        r.runtime_hours,
                        fmt_dec(r.energy.total_kwh, 2),
                        fmt_int(r.gco2e_scaled)
                    );
                }
            }
            let _ = writeln!(
                s,
                "\nLowest emissions at {} cores",
                report.optimal_core_count
            );
            s.into_bytes()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub group_by: GroupKey,
    pub job_count: usize,
    pub total_kwh: f64,
    pub total_gco2e: f64,
    pub groups: Vec<GroupSummary>,
    pub data_version: String,
}

impl IngestReport {
    pub fn new(
        group_by: GroupKey,
        estimates: &[(JobRecord, FootprintEstimate)],
        data: &ReferenceData,
    ) -> Self {
        Self {
            group_by,
            job_count: estimates.len(),
            total_kwh: estimates.iter().map(|(_, e)| e.energy.total_kwh).sum(),
            total_gco2e: estimates.iter().map(|(_, e)| e.gco2e_scaled).sum(),
            groups: aggregate_with(estimates, group_by, &data.constants),
            data_version: data.version.clone(),
        }
    }
}

pub fn render_ingest(report: &IngestReport, format: Format) -> Vec<u8> {
    if format == Format::Json {
        return to_json(report);
    }
    let md = format == Format::Markdown;
    let mut s = String::new();
    let key = serde_json::to_value(report.group_by)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    if md {
        let _ = writeln!(
            s,
            "| {key} | Jobs | Energy (kWh) | gCO2e | Car km (EU) | Tree-months |"
        );
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
    } else {
        let _ = writeln!(
            s,
            "{key:<20}  {:>6}  {:>14}  {:>16}  {:>12}  {:>12}",
            "jobs", "kWh", "gCO2e", "car_km_eu", "tree_months"
        );
    }
    for g in &report.groups {
        let cells = [
            fmt_dec(g.total_kwh, 2),
            fmt_int(g.total_gco2e),
            fmt_int(g.equivalences.car_km_eu),
            fmt_int(g.equivalences.tree_months),
        ];
        if md {
            let _ = writeln!(
                s,
                "| {} | {} | {} |",
                g.group_key,
                g.job_count,
                cells.join(" | ")
            );
        } else {
            let _ = writeln!(
                s,
                "{:<20}  {:>6}  {:>14}  {:>16}  {:>12}  {:>12}",
                g.group_key, g.job_count, cells[0], cells[1], cells[2], cells[3]
            );
        }
    }
    let _ = writeln!(
        s,
        "\nTotal: {} jobs, {} kWh, {} gCO2e",
        report.job_count,
        fmt_dec(report.total_kwh, 2),
        fmt_int(report.total_gco2e)
    );
    s.into_bytes()
}
