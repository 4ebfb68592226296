//! Named reference workloads with their published footprints.

use serde::Serialize;
use serde_json::{json, Value};

use crate::request::{EstimateRequest, RequestMode};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub request: EstimateRequest,
    /// Published scaled footprint in gCO2e.
    pub expected_gco2e: f64,
    pub relative_tolerance: f64,
}

const FORECAST_DAY_HOURS: f64 = 8.0 / 60.0;

fn preset(
    name: &'static str,
    description: &'static str,
    body: Value,
    expected: f64,
    tol: f64,
) -> Preset {
    Preset {
        name,
        description,
        request: EstimateRequest::from_value(&body, RequestMode::Estimate)
            .expect("preset request is valid"),
        expected_gco2e: expected,
        relative_tolerance: tol,
    }
}

/// The bundled presets, in a fixed order.
pub fn presets() -> Vec<Preset> {
    vec![
        preset(
            "geant4-dna",
            "Particle-physics simulation: three weeks on 12 cores, repeated 11 times",
            json!({
                "label": "Geant4-DNA", "runtime_hours": 504, "cores": 12,
                "processor_name": "Xeon E5-2680 v3", "usage_factor": 1, "mem_gb": 10,
                "region_code": "WORLD", "pue": 1.67, "psf": 11
            }),
            544_115.0,
            2e-6,
        ),
        preset(
            "icon",
            "Weather model, one forecast day on 20,700 cores, 180 forecast days per day",
            json!({
                "label": "ICON", "runtime_hours": FORECAST_DAY_HOURS, "cores": 20_700,
                "processor_name": "Xeon E5-2695 v4", "mem_gb": 36_800,
                "region_code": "DE", "pue": 1.67, "psf": 180
            }),
            2_312_653.0,
            0.15,
        ),
        preset(
            "ifs-reading",
            "Weather model, one forecast day on 4,608 cores in Reading, 180 forecast days per day",
            json!({
                "label": "IFS Reading", "runtime_hours": FORECAST_DAY_HOURS, "cores": 4_608,
                "processor_name": "Xeon E5-2695 v4", "mem_gb": 8_192,
                "region_code": "GB", "pue": 1.45, "psf": 180
            }),
            298_915.0,
            0.015,
        ),
        preset(
            "ifs-bologna",
            "The Reading weather workload relocated to Bologna",
            json!({
                "label": "IFS Bologna", "runtime_hours": FORECAST_DAY_HOURS, "cores": 4_608,
                "processor_name": "Xeon E5-2695 v4", "mem_gb": 8_192,
                "region_code": "IT", "pue": 1.27, "psf": 180
            }),
            350_063.0,
            0.015,
        ),
        preset(
            "bert",
            "Language-model training: 79 hours on 64 GPUs, 100 tuning runs",
            json!({
                "label": "BERT", "runtime_hours": 79, "cores": 64,
                "processor_name": "Tesla V100", "usage_factor": 0.627, "mem_gb": 0,
                "region_code": "WORLD", "pue": 1.67, "psf": 100
            }),
            75_440_740.0,
            2e-6,
        ),
        preset(
            "meena",
            "Chatbot training: a 288 kW TPU pod for 30 days",
            json!({
                "label": "Meena", "runtime_hours": 720, "explicit_power_kw": 288,
                "region_code": "WORLD", "pue": 1.67
            }),
            164_488_320.0,
            1e-7,
        ),
    ]
}

pub fn find(name: &str) -> Option<Preset> {
    presets()
        .into_iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::ReferenceData;
    use crate::report::estimate_report;

    #[test]
    fn presets_reproduce_their_figures() {
        let data = ReferenceData::bundled();
        for p in presets() {
            let got = estimate_report(&p.request, data).unwrap().gco2e_scaled;
            let rel = (got - p.expected_gco2e).abs() / p.expected_gco2e;
            assert!(
                rel <= p.relative_tolerance,
                "{}: {got} vs {}",
                p.name,
                p.expected_gco2e
            );
        }
    }

    #[test]
    fn names_are_unique() {
        let all = presets();
        for (i, p) in all.iter().enumerate() {
            assert!(all[i + 1..].iter().all(|q| q.name != p.name));
        }
        assert_eq!(find("ICON").unwrap().name, "icon");
    }
}
