//! Transport-independent request handling for the `/v1` JSON API.
//!
//! [`Service::handle_request`] maps a method, path and body to a status code
//! and a JSON body. It holds only immutable reference data, so one instance
//! can serve any number of concurrent requests.

use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::presets::presets;
use crate::reference::ReferenceData;
use crate::report::{compare_report, estimate_report, sweep_report, to_json};
use crate::request::{ErrorCode, EstimateRequest, RequestError, RequestMode};
use crate::scenario::CurvePoint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
}

impl Response {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        Self {
            status,
            body: to_json(value),
        }
    }

    fn error(status: u16, code: &str, field: &str, message: &str) -> Self {
        Self::json(
            status,
            &json!({"error": {"code": code, "field": field, "message": message}}),
        )
    }

    fn from_request_error(e: &RequestError) -> Self {
        let status = if e.code == ErrorCode::NotFound {
            404
        } else {
            400
        };
        Self::json(status, &json!({ "error": e }))
    }
}

#[derive(Debug, Clone)]
pub struct Service {
    data: Arc<ReferenceData>,
}

impl Service {
    pub fn new(data: ReferenceData) -> Self {
        Self {
            data: Arc::new(data),
        }
    }

    pub fn bundled() -> Self {
        Self::new(ReferenceData::bundled().clone())
    }

    pub fn data(&self) -> &ReferenceData {
        &self.data
    }

    pub fn handle_request(&self, method: &str, path: &str, body: &[u8]) -> Response {
        let path = path.split('?').next().unwrap_or(path).trim_end_matches('/');
        let allowed = match path {
            "/v1/estimate" | "/v1/compare" | "/v1/sweep" => "POST",
            "/v1/data/processors"
            | "/v1/data/carbon-intensity"
            | "/v1/data/constants"
            | "/v1/presets"
            | "/v1/health" => "GET",
            _ => {
                return Response::error(404, "not_found", "path", &format!("no endpoint at {path}"))
            }
        };
        if !method.eq_ignore_ascii_case(allowed) {
            return Response::error(
                405,
                "method_not_allowed",
                "method",
                &format!("use {allowed}"),
            );
        }
        let result = match path {
            "/v1/estimate" => self.estimate(body),
            "/v1/compare" => self.compare(body),
            "/v1/sweep" => self.sweep(body),
            "/v1/data/processors" => Ok(Response::json(200, &self.data.processors.entries())),
            "/v1/data/carbon-intensity" => {
                Ok(Response::json(200, &self.data.carbon_intensity.entries()))
            }
            "/v1/data/constants" => Ok(Response::json(200, &self.data.constant_rows)),
            "/v1/presets" => Ok(Response::json(200, &presets())),
            _ => Ok(Response::json(
                200,
                &json!({"status": "ok", "data_version": self.data.version}),
            )),
        };
        result.unwrap_or_else(|e| Response::from_request_error(&e))
    }

    fn estimate(&self, body: &[u8]) -> Result<Response, RequestError> {
        let value = parse_body(body)?;
        let request = EstimateRequest::from_value(&value, RequestMode::Estimate)?;
        Ok(Response::json(200, &estimate_report(&request, &self.data)?))
    }

    fn compare(&self, body: &[u8]) -> Result<Response, RequestError> {
        let map = object(parse_body(body)?, "")?;
        reject_unknown(&map, &["a", "b"])?;
        let side = |key: &str| -> Result<EstimateRequest, RequestError> {
            let v = map.get(key).ok_or_else(|| missing(key))?;
            EstimateRequest::from_value(v, RequestMode::Estimate).map_err(|e| e.nested(key))
        };
        let (a, b) = (side("a")?, side("b")?);
        Ok(Response::json(200, &compare_report(&a, &b, &self.data)?))
    }

    fn sweep(&self, body: &[u8]) -> Result<Response, RequestError> {
        let map = object(parse_body(body)?, "")?;
        reject_unknown(&map, &["base", "curve", "memory_gb_per_core"])?;
        let base = map.get("base").ok_or_else(|| missing("base"))?;
        let base = EstimateRequest::from_value(base, RequestMode::SweepBase)
            .map_err(|e| e.nested("base"))?;
        let curve = map.get("curve").ok_or_else(|| missing("curve"))?;
        let curve: Vec<CurvePoint<f64>> = serde_json::from_value(curve.clone())
            .map_err(|e| RequestError::new(ErrorCode::InvalidType, "curve", e.to_string()))?;
        let per_core = match map.get("memory_gb_per_core") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| {
                RequestError::new(
                    ErrorCode::InvalidType,
                    "memory_gb_per_core",
                    "expected a number",
                )
            })?),
        };
        Ok(Response::json(
            200,
            &sweep_report(&base, curve, per_core, &self.data)?,
        ))
    }
}

fn parse_body(body: &[u8]) -> Result<Value, RequestError> {
    serde_json::from_slice(body)
        .map_err(|e| RequestError::new(ErrorCode::InvalidJson, "", e.to_string()))
}

fn object(value: Value, field: &str) -> Result<Map<String, Value>, RequestError> {
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(RequestError::new(
            ErrorCode::InvalidType,
            field,
            "expected a JSON object",
        )),
    }
}

fn reject_unknown(map: &Map<String, Value>, known: &[&str]) -> Result<(), RequestError> {
    match map.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(RequestError::new(
            ErrorCode::UnknownField,
            k.as_str(),
            "unknown field",
        )),
        None => Ok(()),
    }
}

fn missing(field: &str) -> RequestError {
    RequestError::new(ErrorCode::MissingField, field, "required field is missing")
}
