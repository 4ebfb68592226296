//! Estimate requests as received by the CLI, the service and scenario files.
//!
//! All three front ends build a JSON object and go through
//! [`EstimateRequest::from_value`], so validation and error reporting are
//! shared. Every error names the offending field.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ModelError;
use crate::reference::{DataError, ReferenceData, WORLD};
use crate::{Facility, GridCarbonIntensity, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidJson,
    MissingField,
    UnknownField,
    InvalidType,
    OutOfRange,
    ConflictingFields,
    NotFound,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InvalidJson => "invalid_json",
            ErrorCode::MissingField => "missing_field",
            ErrorCode::UnknownField => "unknown_field",
            ErrorCode::InvalidType => "invalid_type",
            ErrorCode::OutOfRange => "out_of_range",
            ErrorCode::ConflictingFields => "conflicting_fields",
            ErrorCode::NotFound => "not_found",
        }
    }
}

/// A validation failure tied to one request field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestError {
    pub code: ErrorCode,
    pub field: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggestions: Vec<String>,
}

impl RequestError {
    pub fn new(code: ErrorCode, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            field: field.into(),
            message: message.into(),
            suggestions: Vec::new(),
        }
    }

    /// Prefixes the field path, e.g. `runtime_hours` → `a.runtime_hours`.
    pub fn nested(mut self, parent: &str) -> Self {
        self.field = if self.field.is_empty() {
            parent.to_owned()
        } else {
            format!("{parent}.{}", self.field)
        };
        self
    }

    fn from_model(e: ModelError) -> Self {
        let field = e.field().unwrap_or("request");
        Self::new(ErrorCode::OutOfRange, field, e.to_string())
    }

    fn from_lookup(field: &str, e: DataError) -> Self {
        match e {
            DataError::NotFound { name, suggestions } => Self {
                code: ErrorCode::NotFound,
                field: field.to_owned(),
                message: format!("{name:?} not found"),
                suggestions,
            },
            other => Self::new(ErrorCode::OutOfRange, field, other.to_string()),
        }
    }
}

impl fmt::Display for RequestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)?;
        if !self.suggestions.is_empty() {
            write!(f, " (did you mean {}?)", self.suggestions.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for RequestError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    Text,
}

const FIELDS: [(&str, Kind); 12] = [
    ("label", Kind::Text),
    ("runtime_hours", Kind::Real),
    ("cores", Kind::Count),
    ("processor_name", Kind::Text),
    ("tdp_watts", Kind::Real),
    ("unit_count", Kind::Count),
    ("explicit_power_kw", Kind::Real),
    ("usage_factor", Kind::Real),
    ("mem_gb", Kind::Real),
    ("region_code", Kind::Text),
    ("pue", Kind::Real),
    ("psf", Kind::Real),
];

fn kind_of(field: &str) -> Option<Kind> {
    FIELDS.iter().find(|(f, _)| *f == field).map(|(_, k)| *k)
}

/// Where the per-core power (or the total power) comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerSpec {
    Processor(String),
    Tdp { tdp_watts: f64, unit_count: u64 },
    Explicit { power_kw: f64 },
}

/// A request for one footprint estimate.
///
/// `runtime_hours` and `cores` are optional only for sweep bases, where the
/// scaling curve supplies them.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRequest {
    pub label: Option<String>,
    pub runtime_hours: Option<f64>,
    pub cores: Option<u64>,
    pub power: PowerSpec,
    pub usage_factor: Option<f64>,
    pub mem_gb: Option<f64>,
    pub region_code: Option<String>,
    pub pue: Option<f64>,
    pub psf: Option<f64>,
}

/// Which fields a request must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestMode {
    Estimate,
    SweepBase,
}

struct Fields<'a>(&'a Map<String, Value>);

impl Fields<'_> {
    fn real(&self, field: &str) -> Result<Option<f64>, RequestError> {
        match self.0.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => {
                n.as_f64()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| {
                        RequestError::new(ErrorCode::InvalidType, field, "expected a finite number")
                    })
            }
            Some(_) => Err(RequestError::new(
                ErrorCode::InvalidType,
                field,
                "expected a number",
            )),
        }
    }

    fn count(&self, field: &str) -> Result<Option<u64>, RequestError> {
        match self.0.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::Number(n)) => n.as_u64().map(Some).ok_or_else(|| {
                RequestError::new(
                    ErrorCode::InvalidType,
                    field,
                    "expected a non-negative integer",
                )
            }),
            Some(_) => Err(RequestError::new(
                ErrorCode::InvalidType,
                field,
                "expected a non-negative integer",
            )),
        }
    }

    fn text(&self, field: &str) -> Result<Option<String>, RequestError> {
        match self.0.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.trim().to_owned())),
            Some(_) => Err(RequestError::new(
                ErrorCode::InvalidType,
                field,
                "expected a string",
            )),
        }
    }
}

fn missing(field: &str) -> RequestError {
    RequestError::new(ErrorCode::MissingField, field, "required field is missing")
}

impl EstimateRequest {
    pub fn from_value(value: &Value, mode: RequestMode) -> Result<Self, RequestError> {
        let map = value.as_object().ok_or_else(|| {
            RequestError::new(ErrorCode::InvalidType, "", "expected a JSON object")
        })?;
        Self::from_map(map, mode)
    }

    pub fn from_map(map: &Map<String, Value>, mode: RequestMode) -> Result<Self, RequestError> {
        if let Some(unknown) = map.keys().find(|k| kind_of(k).is_none()) {
            return Err(RequestError::new(
                ErrorCode::UnknownField,
                unknown.as_str(),
                "unknown field",
            ));
        }
        let f = Fields(map);

        let processor = f.text("processor_name")?.filter(|s| !s.is_empty());
        let tdp = f.real("tdp_watts")?;
        let units = f.count("unit_count")?;
        let explicit = f.real("explicit_power_kw")?;

        let mut specs: Vec<(&str, PowerSpec)> = Vec::new();
        if let Some(name) = processor {
            specs.push(("processor_name", PowerSpec::Processor(name)));
        }
        match (tdp, units) {
            (Some(tdp_watts), Some(unit_count)) => specs.push((
                "tdp_watts",
                PowerSpec::Tdp {
                    tdp_watts,
                    unit_count,
                },
            )),
            (Some(_), None) => return Err(missing("unit_count")),
            (None, Some(_)) => return Err(missing("tdp_watts")),
            (None, None) => {}
        }
        if let Some(power_kw) = explicit {
            specs.push(("explicit_power_kw", PowerSpec::Explicit { power_kw }));
        }
        let power = match specs.len() {
            0 => return Err(RequestError::new(
                ErrorCode::MissingField,
                "processor_name",
                "one of processor_name, tdp_watts + unit_count or explicit_power_kw is required",
            )),
            1 => specs.pop().expect("one spec").1,
            _ => {
                return Err(RequestError::new(
                    ErrorCode::ConflictingFields,
                    specs[1].0,
                    format!(
                        "conflicts with {}; give exactly one power specification",
                        specs[0].0
                    ),
                ))
            }
        };
        let explicit_mode = matches!(power, PowerSpec::Explicit { .. });
        if mode == RequestMode::SweepBase && explicit_mode {
            return Err(RequestError::new(
                ErrorCode::ConflictingFields,
                "explicit_power_kw",
                "a sweep needs a per-core power model",
            ));
        }

        let runtime_hours = f.real("runtime_hours")?;
        let cores = f.count("cores")?;
        let mem_gb = f.real("mem_gb")?;
        if mode == RequestMode::Estimate {
            if runtime_hours.is_none() {
                return Err(missing("runtime_hours"));
            }
            if !explicit_mode && cores.is_none() {
                return Err(missing("cores"));
            }
        }
        if !explicit_mode && mem_gb.is_none() {
            return Err(missing("mem_gb"));
        }

        let req = Self {
            label: f.text("label")?,
            runtime_hours,
            cores,
            power,
            usage_factor: f.real("usage_factor")?,
            mem_gb,
            region_code: f.text("region_code")?.filter(|s| !s.is_empty()),
            pue: f.real("pue")?,
            psf: f.real("psf")?,
        };
        req.check_ranges()?;
        Ok(req)
    }

    fn check_ranges(&self) -> Result<(), RequestError> {
        let check = |field: &str, v: Option<f64>, ok: fn(f64) -> bool, reason: &str| match v {
            Some(v) if !ok(v) => Err(RequestError::new(ErrorCode::OutOfRange, field, reason)),
            _ => Ok(()),
        };
        check(
            "runtime_hours",
            self.runtime_hours,
            |v| v >= 0.0,
            "must be >= 0",
        )?;
        check(
            "usage_factor",
            self.usage_factor,
            |v| (0.0..=1.0).contains(&v),
            "must be within [0, 1]",
        )?;
        check("mem_gb", self.mem_gb, |v| v >= 0.0, "must be >= 0")?;
        check("pue", self.pue, |v| v >= 1.0, "must be >= 1")?;
        check("psf", self.psf, |v| v >= 1.0, "must be >= 1")?;
        match self.power {
            PowerSpec::Tdp {
                tdp_watts,
                unit_count,
            } => {
                check("tdp_watts", Some(tdp_watts), |v| v > 0.0, "must be > 0")?;
                if unit_count == 0 {
                    return Err(RequestError::new(
                        ErrorCode::OutOfRange,
                        "unit_count",
                        "must be >= 1",
                    ));
                }
            }
            PowerSpec::Explicit { power_kw } => {
                check(
                    "explicit_power_kw",
                    Some(power_kw),
                    |v| v > 0.0,
                    "must be > 0",
                )?;
            }
            PowerSpec::Processor(_) => {}
        }
        Ok(())
    }

    /// Parses a JSON text.
    pub fn from_json(text: &str, mode: RequestMode) -> Result<Self, RequestError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| RequestError::new(ErrorCode::InvalidJson, "", e.to_string()))?;
        Self::from_value(&value, mode)
    }

    /// Parses a scenario file: one `key = value` pair per line, `#` starts a
    /// comment, keys are the JSON field names.
    pub fn from_kv(text: &str, mode: RequestMode) -> Result<Self, RequestError> {
        Self::from_map(&kv_to_map(text)?, mode)
    }

    /// Flat JSON object with only the fields that are set.
    pub fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_owned(), v);
        };
        if let Some(l) = &self.label {
            put("label", l.clone().into());
        }
        if let Some(v) = self.runtime_hours {
            put("runtime_hours", v.into());
        }
        if let Some(v) = self.cores {
            put("cores", v.into());
        }
        match &self.power {
            PowerSpec::Processor(name) => put("processor_name", name.clone().into()),
            PowerSpec::Tdp {
                tdp_watts,
                unit_count,
            } => {
                put("tdp_watts", (*tdp_watts).into());
                put("unit_count", (*unit_count).into());
            }
            PowerSpec::Explicit { power_kw } => put("explicit_power_kw", (*power_kw).into()),
        }
        if let Some(v) = self.usage_factor {
            put("usage_factor", v.into());
        }
        if let Some(v) = self.mem_gb {
            put("mem_gb", v.into());
        }
        if let Some(v) = &self.region_code {
            put("region_code", v.clone().into());
        }
        if let Some(v) = self.pue {
            put("pue", v.into());
        }
        if let Some(v) = self.psf {
            put("psf", v.into());
        }
        m
    }

    /// Resolves catalog references and applies defaults (full usage, world
    /// average PUE and carbon intensity, PSF 1).
    pub fn to_model(
        &self,
        data: &ReferenceData,
    ) -> Result<(Workload, Facility, GridCarbonIntensity), RequestError> {
        let runtime = self.runtime_hours.unwrap_or(0.0);
        let mut workload = match &self.power {
            PowerSpec::Explicit { power_kw } => Workload::from_power(*power_kw, runtime),
            spec => {
                let per_core = match spec {
                    PowerSpec::Processor(name) => data
                        .processors
                        .lookup(name)
                        .map_err(|e| RequestError::from_lookup("processor_name", e))?
                        .per_unit_power(),
                    PowerSpec::Tdp {
                        tdp_watts,
                        unit_count,
                    } => tdp_watts / *unit_count as f64,
                    PowerSpec::Explicit { .. } => unreachable!(),
                };
                Workload::new(
                    runtime,
                    self.cores.unwrap_or(0),
                    per_core,
                    self.mem_gb.unwrap_or(0.0),
                )
                .with_usage(self.usage_factor.unwrap_or(1.0))
                .with_memory_power(data.constants.memory_w_per_gb)
            }
        };
        workload.psf = self.psf.unwrap_or(1.0);
        workload.validate().map_err(RequestError::from_model)?;

        let pue = self.pue.unwrap_or(data.constants.world_avg_pue);
        let label = self.label.clone().unwrap_or_else(|| format!("PUE {pue}"));
        let facility = Facility::new(label, pue).map_err(RequestError::from_model)?;

        let region = self.region_code.as_deref().unwrap_or(WORLD);
        let ci = data
            .carbon_intensity
            .lookup(region)
            .map_err(|e| RequestError::from_lookup("region_code", e))?
            .clone();
        Ok((workload, facility, ci))
    }
}

fn kv_to_map(text: &str) -> Result<Map<String, Value>, RequestError> {
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            RequestError::new(
                ErrorCode::InvalidType,
                "",
                format!("line {}: expected `key = value`", i + 1),
            )
        })?;
        let (key, value) = (key.trim(), value.trim());
        let kind = kind_of(key)
            .ok_or_else(|| RequestError::new(ErrorCode::UnknownField, key, "unknown field"))?;
        let parsed = match kind {
            Kind::Text => Value::String(value.to_owned()),
            Kind::Real => value
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(Value::Number)
                .ok_or_else(|| {
                    RequestError::new(ErrorCode::InvalidType, key, "expected a number")
                })?,
            Kind::Count => value.parse::<u64>().map(Value::from).map_err(|_| {
                RequestError::new(
                    ErrorCode::InvalidType,
                    key,
                    "expected a non-negative integer",
                )
            })?,
        };
        if map.insert(key.to_owned(), parsed).is_some() {
            return Err(RequestError::new(
                ErrorCode::ConflictingFields,
                key,
                "given twice",
            ));
        }
    }
    Ok(map)
}

impl Serialize for EstimateRequest {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_map().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EstimateRequest {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        let mode = if value.get("runtime_hours").is_some() {
            RequestMode::Estimate
        } else {
            RequestMode::SweepBase
        };
        Self::from_value(&value, mode).map_err(serde::de::Error::custom)
    }
}
