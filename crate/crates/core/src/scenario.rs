//! What-if analyses built on the footprint model: comparing two settings,
//! sweeping core counts along a measured scaling curve, and the
//! sector-scale estimate from total electricity demand.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, ModelResult};
use crate::model::{estimate, Facility, FootprintEstimate, GridCarbonIntensity, Workload};
use crate::num::Scalar;
use crate::reference::{parse_num, parse_table, DataError, DataResult};

pub const CURVE_HEADER: [&str; 2] = ["cores", "runtime_hours"];

/// A workload placed in a facility and grid region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSetting<T> {
    pub label: String,
    pub workload: Workload<T>,
    pub facility: Facility<T>,
    pub ci: GridCarbonIntensity<T>,
}

impl<T: Scalar> ScenarioSetting<T> {
    pub fn estimate(&self) -> ModelResult<FootprintEstimate<T>> {
        estimate(&self.workload, &self.facility, &self.ci)
    }
}

/// Outcome of comparing setting `b` against baseline `a`, on PSF-scaled
/// emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison<T> {
    pub a: FootprintEstimate<T>,
    pub b: FootprintEstimate<T>,
    pub absolute_delta_g: T,
    pub relative_change: T,
}

pub fn compare<T: Scalar>(
    a: &ScenarioSetting<T>,
    b: &ScenarioSetting<T>,
) -> ModelResult<Comparison<T>> {
    let ea = a.estimate()?;
    let eb = b.estimate()?;
    let delta = eb.gco2e_scaled - ea.gco2e_scaled;
    let relative_change = if ea.gco2e_scaled > T::zero() {
        delta / ea.gco2e_scaled
    } else if eb.gco2e_scaled == T::zero() {
        T::zero()
    } else {
        return Err(ModelError::ZeroBaseline);
    };
    Ok(Comparison {
        a: ea,
        b: eb,
        absolute_delta_g: delta,
        relative_change,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub cores: u64,
    pub runtime_hours: T,
}

/// Measured runtime against core count for a fixed problem size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CurvePoint<T>>", into = "Vec<CurvePoint<T>>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct ScalingCurve<T> {
    points: Vec<CurvePoint<T>>,
}

impl<T: Scalar> ScalingCurve<T> {
    pub fn new(points: Vec<CurvePoint<T>>) -> ModelResult<Self> {
        if points.is_empty() {
            return Err(ModelError::InvalidCurve("no points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.cores == 0 {
                return Err(ModelError::InvalidCurve(format!(
                    "point {i}: cores must be >= 1"
                )));
            }
            if !(p.runtime_hours.is_finite() && p.runtime_hours > T::zero()) {
                return Err(ModelError::InvalidCurve(format!(
                    "point {i}: runtime must be positive"
                )));
            }
            if i > 0 && points[i - 1].cores >= p.cores {
                return Err(ModelError::InvalidCurve(format!(
                    "point {i}: core counts must be strictly increasing"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[CurvePoint<T>] {
        &self.points
    }
}

impl<T: Scalar> TryFrom<Vec<CurvePoint<T>>> for ScalingCurve<T> {
    type Error = ModelError;

    fn try_from(points: Vec<CurvePoint<T>>) -> ModelResult<Self> {
        Self::new(points)
    }
}

impl<T> From<ScalingCurve<T>> for Vec<CurvePoint<T>> {
    fn from(c: ScalingCurve<T>) -> Self {
        c.points
    }
}

/// Reads a scaling curve from CSV with header `cores,runtime_hours`.
pub fn load_curve(mut source: impl Read) -> DataResult<ScalingCurve<f64>> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let rows = parse_table(&text, &CURVE_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        points.push(CurvePoint {
            cores: parse_num(line, "cores", &f[0])?,
            runtime_hours: parse_num(line, "runtime_hours", &f[1])?,
        });
    }
    ScalingCurve::new(points).map_err(|e| DataError::InvariantViolation {
        name: "curve".into(),
        reason: e.to_string(),
    })
}

/// How memory follows the core count in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MemoryPolicy<T> {
    /// Memory stays at the base workload's allocation.
    #[default]
    Fixed,
    /// Memory is allocated per core, as on node-exclusive clusters.
    PerCore { gb_per_core: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub core_count: u64,
    pub runtime_hours: T,
    pub estimate: FootprintEstimate<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub rows: Vec<SweepRow<T>>,
    /// Core count with the lowest emissions; the smallest one on ties.
    pub optimal_core_count: u64,
}

impl<T: Scalar> SweepResult<T> {
    pub fn optimal(&self) -> &SweepRow<T> {
        self.rows
            .iter()
            .find(|r| r.core_count == self.optimal_core_count)
            .expect("optimal row present")
    }
}

pub fn sweep<T: Scalar>(
    base: &Workload<T>,
    curve: &ScalingCurve<T>,
    facility: &Facility<T>,
    ci: &GridCarbonIntensity<T>,
) -> ModelResult<SweepResult<T>> {
    sweep_with(base, curve, facility, ci, MemoryPolicy::Fixed)
}

/// Estimates the base workload at every curve point, substituting the
/// point's core count and runtime.
pub fn sweep_with<T: Scalar>(
    base: &Workload<T>,
    curve: &ScalingCurve<T>,
    facility: &Facility<T>,
    ci: &GridCarbonIntensity<T>,
    memory: MemoryPolicy<T>,
) -> ModelResult<SweepResult<T>> {
    if base.explicit_power_kw.is_some() {
        return Err(ModelError::ExplicitPowerWorkload);
    }
    let mut rows = Vec::with_capacity(curve.points().len());
    let mut best: Option<(T, u64)> = None;
    for p in curve.points() {
        let mut w = base.clone();
        w.core_count = p.cores;
        w.runtime_hours = p.runtime_hours;
        if let MemoryPolicy::PerCore { gb_per_core } = memory {
            w.memory.size_gb = gb_per_core * T::count(p.cores);
        }
        let est = estimate(&w, facility, ci)?;
        if best.is_none_or(|(g, _)| est.gco2e_scaled < g) {
            best = Some((est.gco2e_scaled, p.cores));
        }
        rows.push(SweepRow {
            core_count: p.cores,
            runtime_hours: p.runtime_hours,
            estimate: est,
        });
    }
    let (_, optimal_core_count) = best.expect("curve is non-empty");
    Ok(SweepResult {
        rows,
        optimal_core_count,
    })
}

/// Emissions in tonnes CO2e of a sector consuming `total_twh` of
/// electricity at intensity `ci`.
pub fn sector_estimate<T: Scalar>(total_twh: T, ci: &GridCarbonIntensity<T>) -> ModelResult<T> {
    if !total_twh.is_finite() {
        return Err(ModelError::NonFinite { field: "total_twh" });
    }
    if total_twh < T::zero() {
        return Err(ModelError::OutOfRange {
            field: "total_twh",
            reason: "must be >= 0",
        });
    }
    ci.validate()?;
    let kwh = total_twh * T::lit(1e9);
    Ok(kwh * ci.gco2e_per_kwh / T::lit(1e6))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ci(v: f64) -> GridCarbonIntensity<f64> {
        GridCarbonIntensity::custom(v).unwrap()
    }

    fn setting(pue: f64, civ: f64) -> ScenarioSetting<f64> {
        ScenarioSetting {
            label: format!("pue {pue}"),
            workload: Workload::new(10.0, 4, 10.0, 8.0),
            facility: Facility::new("dc", pue).unwrap(),
            ci: ci(civ),
        }
    }

    fn curve(points: &[(u64, f64)]) -> ScalingCurve<f64> {
        ScalingCurve::new(
            points
                .iter()
                .map(|&(cores, runtime_hours)| CurvePoint {
                    cores,
                    runtime_hours,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn compare_identical_is_zero() {
        let c = compare(&setting(1.5, 300.0), &setting(1.5, 300.0)).unwrap();
        assert_eq!(c.relative_change, 0.0);
        assert_eq!(c.absolute_delta_g, 0.0);
    }

    #[test]
    fn compare_pue_doubling() {
        let c = compare(&setting(1.0, 300.0), &setting(2.0, 300.0)).unwrap();
        assert!((c.relative_change - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_zero_baseline() {
        let mut a = setting(1.0, 300.0);
        a.workload.runtime_hours = 0.0;
        let b = a.clone();
        assert_eq!(compare(&a, &b).unwrap().relative_change, 0.0);
        assert_eq!(
            compare(&a, &setting(1.0, 300.0)),
            Err(ModelError::ZeroBaseline)
        );
    }

    #[test]
    fn sweep_three_points() {
        let base = Workload::new(1.0, 1, 10.0, 0.0);
        let r = sweep(
            &base,
            &curve(&[(1, 60.0), (15, 3.0), (60, 1.5)]),
            &Facility::personal_device(),
            &ci(100.0),
        )
        .unwrap();
        let g: Vec<f64> = r.rows.iter().map(|r| r.estimate.gco2e_scaled).collect();
        for (got, want) in g.iter().zip([60.0, 45.0, 90.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert_eq!(r.optimal_core_count, 15);
        assert_eq!(r.optimal().core_count, 15);
    }

    #[test]
    fn sweep_single_point_and_ties() {
        let base = Workload::new(1.0, 1, 10.0, 0.0);
        let r = sweep(
            &base,
            &curve(&[(8, 2.0)]),
            &Facility::personal_device(),
            &ci(100.0),
        )
        .unwrap();
        assert_eq!(r.optimal_core_count, 8);
        // 2×4 and 4×2 core-hours tie.
        let r = sweep(
            &base,
            &curve(&[(2, 4.0), (4, 2.0)]),
            &Facility::personal_device(),
            &ci(100.0),
        )
        .unwrap();
        assert_eq!(r.optimal_core_count, 2);
    }

    #[test]
    fn sweep_memory_per_core() {
        let base = Workload::new(1.0, 1, 0.0, 0.0);
        let r = sweep_with(
            &base,
            &curve(&[(1, 1.0), (10, 1.0)]),
            &Facility::personal_device(),
            &ci(1000.0),
            MemoryPolicy::PerCore { gb_per_core: 4.0 },
        )
        .unwrap();
        assert!(
            (r.rows[1].estimate.energy.memory_kwh - 10.0 * r.rows[0].estimate.energy.memory_kwh)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn doubling_check() {
        let base = Workload::new(1.0, 1, 7.5, 0.0);
        let r = sweep(
            &base,
            &curve(&[(15, 3.0), (60, 1.5)]),
            &Facility::world_average(),
            &ci(475.0),
        )
        .unwrap();
        let ratio = r.rows[1].estimate.gco2e_scaled / r.rows[0].estimate.gco2e_scaled;
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn curve_validation() {
        assert!(ScalingCurve::<f64>::new(vec![]).is_err());
        assert!(ScalingCurve::new(vec![CurvePoint {
            cores: 0,
            runtime_hours: 1.0
        }])
        .is_err());
        assert!(ScalingCurve::new(vec![CurvePoint {
            cores: 1,
            runtime_hours: 0.0
        }])
        .is_err());
        assert!(ScalingCurve::new(vec![
            CurvePoint {
                cores: 2,
                runtime_hours: 1.0
            },
            CurvePoint {
                cores: 2,
                runtime_hours: 0.5
            }
        ])
        .is_err());
    }

    #[test]
    fn curve_csv() {
        let c = load_curve("cores,runtime_hours\n1,60\n15,3\n60,1.5\n".as_bytes()).unwrap();
        assert_eq!(c.points().len(), 3);
        assert!(matches!(
            load_curve("cores,runtime_hours\n".as_bytes()),
            Err(DataError::InvariantViolation { .. })
        ));
        assert!(matches!(
            load_curve("cores,runtime_hours\n1,x\n".as_bytes()),
            Err(DataError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn curve_serde_validates() {
        let bad: Result<ScalingCurve<f64>, _> = serde_json::from_str(
            r#"[{"cores":3,"runtime_hours":1},{"cores":1,"runtime_hours":1}]"#,
        );
        assert!(bad.is_err());
        let ok: ScalingCurve<f64> =
            serde_json::from_str(r#"[{"cores":1,"runtime_hours":2.5}]"#).unwrap();
        assert_eq!(ok.points()[0].runtime_hours, 2.5);
    }

    #[test]
    fn sweep_rejects_explicit_power() {
        let base = Workload::from_power(1.0, 1.0);
        assert_eq!(
            sweep(
                &base,
                &curve(&[(1, 1.0)]),
                &Facility::personal_device(),
                &ci(1.0)
            ),
            Err(ModelError::ExplicitPowerWorkload)
        );
    }

    #[test]
    fn sector_examples() {
        assert_eq!(sector_estimate(200.0, &ci(475.0)).unwrap(), 95e6);
        assert_eq!(sector_estimate(0.0, &ci(475.0)).unwrap(), 0.0);
        assert_eq!(sector_estimate(1.0, &ci(1.0)).unwrap(), 1000.0);
        assert!(sector_estimate(-1.0, &ci(1.0)).is_err());
    }
}
