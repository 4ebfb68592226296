use std::collections::BTreeSet;

use chrono::{TimeZone, Utc};
use footprint_core::ingest::{
    aggregate, estimate_jobs, parse_jobs, write_jobs, GroupKey, JobRecord, ResolveDefaults,
};
use footprint_core::reference::{
    load_carbon_intensities, load_processors, verify_bundled_checksums, CarbonIntensityCatalog,
    ProcessorCatalog,
};
use footprint_core::report::{estimate_report, render, Format, ReportPayload};
use footprint_core::request::{EstimateRequest, RequestMode};
use footprint_core::{
    DataError, GridCarbonIntensity, ProcessorKind, ProcessorProfile, ReferenceData,
};
use proptest::prelude::*;
use serde_json::json;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Plain dynamic-programming edit distance over chars.
fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

#[test]
fn bundled_files_validate() {
    verify_bundled_checksums().unwrap();
    for (name, text) in ReferenceData::bundled_files() {
        assert!(!text.is_empty(), "{name}");
    }
    let data = ReferenceData::bundled();
    assert_eq!(data.carbon_intensity.world_average().gco2e_per_kwh, 475.0);
    assert!(data.constants.deviations().is_empty());
    assert!(data.ci_span_outliers().is_empty());
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    assert_eq!(&ReferenceData::load_dir(dir).unwrap(), data);
}

#[test]
fn bundled_catalogs_round_trip_through_csv() {
    let data = ReferenceData::bundled();
    let p = load_processors(data.processors.to_csv().as_bytes()).unwrap();
    assert_eq!(p, data.processors);
    assert_eq!(p.to_csv(), data.processors.to_csv());
    let ci = load_carbon_intensities(data.carbon_intensity.to_csv().as_bytes()).unwrap();
    assert_eq!(ci, data.carbon_intensity);
}

#[test]
fn suggestions_are_the_nearest_names() {
    let catalog = &ReferenceData::bundled().processors;
    for query in ["Xeon E5-2680", "tesla v10", "Core i5", "EPYC", "zzz"] {
        let Err(DataError::NotFound { suggestions, .. }) = catalog.lookup(query) else {
            panic!("{query} should miss");
        };
        let q = query.to_lowercase();
        let mut all: Vec<(usize, &str)> = catalog
            .entries()
            .iter()
            .map(|p| (edit_distance(&q, &p.name().to_lowercase()), p.name()))
            .collect();
        all.sort_by_key(|&(d, _)| d);
        let worst_kept = edit_distance(&q, &suggestions.last().unwrap().to_lowercase());
        assert_eq!(suggestions.len(), 3);
        assert!(suggestions
            .iter()
            .all(|s| edit_distance(&q, &s.to_lowercase()) <= all[2].0));
        assert_eq!(worst_kept, all[2].0, "{query}: {suggestions:?}");
    }
}

fn token() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ._-]{0,10}[A-Za-z0-9]"
}

fn region_code() -> impl Strategy<Value = String> {
    "[A-Z]{2}(-[A-Z0-9]{1,3})?"
}

proptest! {
    #[test]
    fn processor_csv_round_trip(rows in prop::collection::vec(
        (token(), 0usize..4, 1.0f64..1000.0, 1u32..64, token()), 1..20)
    ) {
        let kinds = [ProcessorKind::Cpu, ProcessorKind::Gpu, ProcessorKind::Tpu, ProcessorKind::Other];
        let mut seen = BTreeSet::new();
        let entries: Vec<ProcessorProfile> = rows
            .into_iter()
            .filter(|(name, _, tdp, units, _)| seen.insert(name.to_lowercase()) && tdp / f64::from(*units) <= 500.0)
            .map(|(name, k, tdp, units, src)| {
                ProcessorProfile::new(name, kinds[k], tdp, units).unwrap().with_source(src)
            })
            .collect();
        prop_assume!(!entries.is_empty());
        let catalog = ProcessorCatalog::from_entries(entries).unwrap();
        let text = catalog.to_csv();
        let back = load_processors(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &catalog);
        prop_assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn carbon_intensity_csv_round_trip(rows in prop::collection::vec(
        (region_code(), token(), 1.0f64..1999.0, 1990i32..2030, token()), 0..20)
    ) {
        let mut seen = BTreeSet::from(["WORLD".to_owned()]);
        let mut entries = vec![GridCarbonIntensity::new("WORLD", "World average", 475.0, 2019, "IEA").unwrap()];
        for (code, name, v, year, src) in rows {
            if seen.insert(code.clone()) {
                entries.push(GridCarbonIntensity::new(code, name, v, year, src).unwrap());
            }
        }
        let catalog = CarbonIntensityCatalog::from_entries(entries).unwrap();
        let back = load_carbon_intensities(catalog.to_csv().as_bytes()).unwrap();
        prop_assert_eq!(back, catalog);
    }
}

const PROCESSORS: [&str; 4] = [
    "Xeon E5-2680 v3",
    "Xeon E5-2695 v4",
    "Tesla V100",
    "Core i5-9400",
];
const REGIONS: [&str; 4] = ["WORLD", "GB", "FR", "US-CA"];

prop_compose! {
    fn job(id: usize)(
        user in "[a-z]{3,6}",
        project in "[a-z]{4,8}",
        secs in 1_600_000_000i64..1_800_000_000,
        runtime in 0.0f64..1000.0,
        cores in 0u64..256,
        cpu in 0usize..4,
        usage in prop::option::of(0.0f64..=1.0),
        mem in 0.0f64..2048.0,
        region in prop::option::of(0usize..4),
        pue in prop::option::of(1.0f64..2.5),
    ) -> JobRecord {
        JobRecord {
            job_id: format!("job{id}"),
            user,
            project,
            start: Utc.timestamp_opt(secs, 0).unwrap(),
            runtime_hours: runtime,
            cores,
            cpu_model: PROCESSORS[cpu].to_owned(),
            usage_factor: usage,
            mem_gb: mem,
            region_code: region.map(|r| REGIONS[r].to_owned()),
            pue,
        }
    }
}

fn jobs() -> impl Strategy<Value = Vec<JobRecord>> {
    (1usize..30).prop_flat_map(|n| (0..n).map(job).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jobs_csv_round_trip(records in jobs()) {
        let text = write_jobs(&records);
        let back = parse_jobs(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(write_jobs(&back), text);
    }

    #[test]
    fn group_sums_equal_grand_total(records in jobs()) {
        let data = ReferenceData::bundled();
        let est = estimate_jobs(records, &ResolveDefaults::default(), data).unwrap();
        let total: f64 = est.iter().map(|(_, e)| e.gco2e_scaled).sum();
        let kwh: f64 = est.iter().map(|(_, e)| e.energy.total_kwh).sum();
        for key in [GroupKey::User, GroupKey::Project, GroupKey::Region, GroupKey::Month] {
            let groups = aggregate(&est, key);
            let g: f64 = groups.iter().map(|s| s.total_gco2e).sum();
            let k: f64 = groups.iter().map(|s| s.total_kwh).sum();
            prop_assert!(rel(g, total) <= 1e-12 || (g - total).abs() < 1e-9);
            prop_assert!(rel(k, kwh) <= 1e-12 || (k - kwh).abs() < 1e-9);
            prop_assert_eq!(groups.iter().map(|s| s.job_count).sum::<usize>(), est.len());
            prop_assert!(groups.windows(2).all(|w| w[0].total_gco2e >= w[1].total_gco2e));
        }
    }

    #[test]
    fn aggregation_ignores_job_order(records in jobs(), seed in any::<u64>()) {
        let data = ReferenceData::bundled();
        let mut shuffled = records.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 7) % (i as u64 + 1)) as usize);
        }
        let d = ResolveDefaults::default();
        let a = aggregate(&estimate_jobs(records, &d, data).unwrap(), GroupKey::Project);
        let b = aggregate(&estimate_jobs(shuffled, &d, data).unwrap(), GroupKey::Project);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.group_key, &y.group_key);
            prop_assert_eq!(x.job_count, y.job_count);
            prop_assert!(rel(x.total_gco2e, y.total_gco2e) <= 1e-12);
        }
    }

    #[test]
    fn json_render_round_trips(
        t in 0.0f64..5000.0, n in 1u64..5000, tdp in 1.0f64..400.0, units in 1u64..64,
        u in 0.0f64..=1.0, m in 0.0f64..4096.0, pue in 1.0f64..2.5, psf in 1.0f64..500.0,
        region in 0usize..4,
    ) {
        let body = json!({
            "runtime_hours": t, "cores": n, "tdp_watts": tdp, "unit_count": units,
            "usage_factor": u, "mem_gb": m, "pue": pue, "psf": psf, "region_code": REGIONS[region]
        });
        let req = EstimateRequest::from_value(&body, RequestMode::Estimate).unwrap();
        let payload = estimate_report(&req, ReferenceData::bundled()).unwrap();
        let bytes = render(&payload, Format::Json);
        let back: ReportPayload = serde_json::from_slice(&bytes).unwrap();
        prop_assert!(rel(back.gco2e_scaled, payload.gco2e_scaled) <= 1e-12);
        prop_assert!(rel(back.energy.total_kwh, payload.energy.total_kwh) <= 1e-12);
        prop_assert!(rel(back.equivalences.tree_months, payload.equivalences.tree_months) <= 1e-12);
        prop_assert_eq!(&back.request, &payload.request);
        for f in [Format::Text, Format::Markdown, Format::Json] {
            prop_assert_eq!(render(&payload, f), render(&back, f));
        }
    }
}
