//! Scheduler accounting ingestion.
//!
//! Jobs arrive as a generic CSV export (one row per job), are resolved
//! against the reference catalogs into model inputs, and their footprints
//! are summed per user, project, region or month.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::ReferenceConstants;
use crate::error::ModelError;
use crate::model::equivalences;
use crate::reference::{parse_table, DataError, ReferenceData};
use crate::{
    estimate_with, EquivalenceSet, Facility, FootprintEstimate, GridCarbonIntensity, Workload,
};

pub const JOBS_HEADER: [&str; 11] = [
    "job_id",
    "user",
    "project",
    "start",
    "runtime_hours",
    "cores",
    "cpu_model",
    "usage_factor",
    "mem_gb",
    "region_code",
    "pue",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: {field} must not be negative")]
    NegativeValue { field: &'static str, line: u64 },

    #[error("line {line}: usage_factor must be within [0, 1]")]
    UsageOutOfRange { line: u64 },

    #[error("line {line}: pue must be >= 1")]
    PueOutOfRange { line: u64 },

    #[error("job {job_id}: cores requested but no cpu_model given")]
    MissingProcessor { job_id: String },

    #[error("job {job_id}: {source}")]
    Lookup { job_id: String, source: DataError },

    #[error("job {job_id}: {source}")]
    Model { job_id: String, source: ModelError },

    #[error(transparent)]
    Data(#[from] DataError),
}

/// One row of the accounting export. Optional cells are `None` when empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub user: String,
    pub project: String,
    pub start: DateTime<Utc>,
    pub runtime_hours: f64,
    pub cores: u64,
    pub cpu_model: String,
    pub usage_factor: Option<f64>,
    pub mem_gb: f64,
    pub region_code: Option<String>,
    pub pue: Option<f64>,
}

fn malformed(line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

fn real(line: u64, field: &'static str, raw: &str) -> Result<f64, IngestError> {
    let v: f64 = raw
        .parse()
        .map_err(|_| malformed(line, format!("{field}: cannot parse {raw:?}")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("{field}: not finite")));
    }
    if v < 0.0 {
        return Err(IngestError::NegativeValue { field, line });
    }
    Ok(v)
}

fn optional(raw: &str) -> Option<&str> {
    (!raw.is_empty()).then_some(raw)
}

/// Parses a jobs CSV. The header must match [`JOBS_HEADER`] exactly.
pub fn parse_jobs(mut source: impl Read) -> Result<Vec<JobRecord>, IngestError> {
    let mut text = String::new();
    source.read_to_string(&mut text).map_err(DataError::from)?;
    let rows = parse_table(&text, &JOBS_HEADER).map_err(|e| match e {
        DataError::MalformedRow { line, reason } => IngestError::MalformedRow { line, reason },
        other => IngestError::Data(other),
    })?;

    let mut jobs = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        if f[0].is_empty() {
            return Err(malformed(line, "job_id is empty"));
        }
        let start = DateTime::parse_from_rfc3339(&f[3])
            .map_err(|e| malformed(line, format!("start: {e}")))?
            .with_timezone(&Utc);
        let runtime_hours = real(line, "runtime_hours", &f[4])?;
        let cores: u64 = if f[5].starts_with('-') {
            return Err(IngestError::NegativeValue {
                field: "cores",
                line,
            });
        } else {
            f[5].parse()
                .map_err(|_| malformed(line, format!("cores: cannot parse {:?}", f[5])))?
        };
        let usage_factor = match optional(&f[7]) {
            Some(raw) => {
                let u = real(line, "usage_factor", raw).map_err(|e| match e {
                    IngestError::NegativeValue { .. } => IngestError::UsageOutOfRange { line },
                    other => other,
                })?;
                if u > 1.0 {
                    return Err(IngestError::UsageOutOfRange { line });
                }
                Some(u)
            }
            None => None,
        };
        let mem_gb = match optional(&f[8]) {
            Some(raw) => real(line, "mem_gb", raw)?,
            None => 0.0,
        };
        let pue = match optional(&f[10]) {
            Some(raw) => {
                let p = real(line, "pue", raw)?;
                if p < 1.0 {
                    return Err(IngestError::PueOutOfRange { line });
                }
                Some(p)
            }
            None => None,
        };
        jobs.push(JobRecord {
            job_id: f[0].clone(),
            user: f[1].clone(),
            project: f[2].clone(),
            start,
            runtime_hours,
            cores,
            cpu_model: f[6].clone(),
            usage_factor,
            mem_gb,
            region_code: optional(&f[9]).map(str::to_owned),
            pue,
        });
    }
    Ok(jobs)
}

/// Writes records back in the jobs CSV format.
pub fn write_jobs(records: &[JobRecord]) -> String {
    fn opt<T: ToString>(v: &Option<T>) -> String {
        v.as_ref().map(ToString::to_string).unwrap_or_default()
    }
    let mut out = JOBS_HEADER.join(",");
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.job_id,
            r.user,
            r.project,
            r.start.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            r.runtime_hours,
            r.cores,
            r.cpu_model,
            opt(&r.usage_factor),
            r.mem_gb,
            opt(&r.region_code),
            opt(&r.pue),
        );
    }
    out
}

/// Values applied to cells left empty in the export.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolveDefaults {
    pub pue: f64,
    pub region: String,
}

impl Default for ResolveDefaults {
    fn default() -> Self {
        Self {
            pue: crate::constants::WORLD_AVG_PUE,
            region: crate::reference::WORLD.into(),
        }
    }
}

/// Turns a job record into model inputs. Missing usage means full usage.
pub fn resolve(
    record: &JobRecord,
    defaults: &ResolveDefaults,
    data: &ReferenceData,
) -> Result<(Workload, Facility, GridCarbonIntensity), IngestError> {
    let lookup_err = |source| IngestError::Lookup {
        job_id: record.job_id.clone(),
        source,
    };
    let model_err = |source| IngestError::Model {
        job_id: record.job_id.clone(),
        source,
    };

    let per_core_power = if record.cpu_model.is_empty() {
        if record.cores > 0 {
            return Err(IngestError::MissingProcessor {
                job_id: record.job_id.clone(),
            });
        }
        0.0
    } else {
        data.processors
            .lookup(&record.cpu_model)
            .map_err(lookup_err)?
            .per_unit_power()
    };

    let workload = Workload::new(
        record.runtime_hours,
        record.cores,
        per_core_power,
        record.mem_gb,
    )
    .with_usage(record.usage_factor.unwrap_or(1.0))
    .with_memory_power(data.constants.memory_w_per_gb);

    let facility = Facility::new(record.job_id.clone(), record.pue.unwrap_or(defaults.pue))
        .map_err(model_err)?;
    let region = record.region_code.as_deref().unwrap_or(&defaults.region);
    let ci = data
        .carbon_intensity
        .lookup(region)
        .map_err(lookup_err)?
        .clone();
    workload.validate().map_err(model_err)?;
    Ok((workload, facility, ci))
}

/// Resolves and estimates every record.
pub fn estimate_jobs(
    records: Vec<JobRecord>,
    defaults: &ResolveDefaults,
    data: &ReferenceData,
) -> Result<Vec<(JobRecord, FootprintEstimate)>, IngestError> {
    records
        .into_iter()
        .map(|r| {
            let (w, f, ci) = resolve(&r, defaults, data)?;
            let est = estimate_with(&w, &f, &ci, &data.constants).map_err(|source| {
                IngestError::Model {
                    job_id: r.job_id.clone(),
                    source,
                }
            })?;
            Ok((r, est))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    User,
    Project,
    Region,
    Month,
}

impl FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user" => Ok(GroupKey::User),
            "project" => Ok(GroupKey::Project),
            "region" => Ok(GroupKey::Region),
            "month" => Ok(GroupKey::Month),
            other => Err(format!(
                "unknown group key {other:?} (user|project|region|month)"
            )),
        }
    }
}

impl GroupKey {
    fn key_of(self, record: &JobRecord, estimate: &FootprintEstimate) -> String {
        match self {
            GroupKey::User => record.user.clone(),
            GroupKey::Project => record.project.clone(),
            GroupKey::Region => estimate.ci_used.region_code.clone(),
            GroupKey::Month => record.start.format("%Y-%m").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_key: String,
    pub job_count: usize,
    pub total_kwh: f64,
    pub total_gco2e: f64,
    pub equivalences: EquivalenceSet,
}

/// Sums energy and emissions per group, largest emitter first.
pub fn aggregate(estimates: &[(JobRecord, FootprintEstimate)], key: GroupKey) -> Vec<GroupSummary> {
    aggregate_with(estimates, key, &ReferenceConstants::default())
}

pub fn aggregate_with(
    estimates: &[(JobRecord, FootprintEstimate)],
    key: GroupKey,
    constants: &ReferenceConstants<f64>,
) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
    for (record, est) in estimates {
        let slot = groups.entry(key.key_of(record, est)).or_default();
        slot.0 += 1;
        slot.1 += est.energy.total_kwh;
        slot.2 += est.gco2e_scaled;
    }
    let mut out: Vec<GroupSummary> = groups
        .into_iter()
        .map(
            |(group_key, (job_count, total_kwh, total_gco2e))| GroupSummary {
                group_key,
                job_count,
                total_kwh,
                total_gco2e,
                equivalences: equivalences(total_gco2e, constants),
            },
        )
        .collect();
    // Stable sort keeps key order among equal totals.
    out.sort_by(|a, b| b.total_gco2e.total_cmp(&a.total_gco2e));
    out
}
