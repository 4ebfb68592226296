//! Energy and emissions model for a single computational workload.
//!
//! Energy (kWh) is
//!
//! ```text
//! E = t × (n_c × P_c × u_c + n_m × P_m) × PUE × 0.001
//! ```
//!
//! with runtime `t` in hours, `n_c` cores drawing `P_c` W each at usage
//! factor `u_c`, and `n_m` GB of memory drawing `P_m` W/GB. The footprint in
//! gCO2e is `E × CI`, and the reported total multiplies that by the
//! pragmatic scaling factor (PSF), the number of times the computation is
//! actually run.
//!
//! Storage power is not modelled.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::{ReferenceConstants, MEMORY_W_PER_GB, PERSONAL_DEVICE_PUE, WORLD_AVG_PUE};
use crate::error::{ModelError, ModelResult};
use crate::num::Scalar;

fn finite<T: Scalar>(field: &'static str, v: T) -> ModelResult<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite { field })
    }
}

fn require<T: Scalar>(
    field: &'static str,
    v: T,
    ok: impl FnOnce(T) -> bool,
    reason: &'static str,
) -> ModelResult<T> {
    finite(field, v)?;
    if ok(v) {
        Ok(v)
    } else {
        Err(ModelError::OutOfRange { field, reason })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessorKind {
    Cpu,
    Gpu,
    Tpu,
    Other,
}

impl ProcessorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProcessorKind::Cpu => "cpu",
            ProcessorKind::Gpu => "gpu",
            ProcessorKind::Tpu => "tpu",
            ProcessorKind::Other => "other",
        }
    }
}

impl fmt::Display for ProcessorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcessorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cpu" => Ok(ProcessorKind::Cpu),
            "gpu" => Ok(ProcessorKind::Gpu),
            "tpu" => Ok(ProcessorKind::Tpu),
            "other" => Ok(ProcessorKind::Other),
            other => Err(format!("unknown processor kind {other:?}")),
        }
    }
}

/// A named compute device with its manufacturer TDP.
///
/// TDP is given for the whole package; `unit_count` is the number of cores
/// (CPU) or devices (GPU/TPU) it is shared across.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessorProfile<T> {
    name: String,
    kind: ProcessorKind,
    tdp_watts: T,
    unit_count: u32,
    #[serde(default)]
    source: String,
}

impl<T: Scalar> ProcessorProfile<T> {
    pub fn new(
        name: impl Into<String>,
        kind: ProcessorKind,
        tdp_watts: T,
        unit_count: u32,
    ) -> ModelResult<Self> {
        require("tdp_watts", tdp_watts, |v| v > T::zero(), "must be > 0")?;
        if unit_count == 0 {
            return Err(ModelError::OutOfRange {
                field: "unit_count",
                reason: "must be >= 1",
            });
        }
        let per_unit = tdp_watts / T::count(unit_count.into());
        require(
            "tdp_watts",
            per_unit,
            |v| v > T::zero(),
            "per-unit power must be positive",
        )?;
        Ok(Self {
            name: name.into(),
            kind,
            tdp_watts,
            unit_count,
            source: String::new(),
        })
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ProcessorKind {
        self.kind
    }

    pub fn tdp_watts(&self) -> T {
        self.tdp_watts
    }

    pub fn unit_count(&self) -> u32 {
        self.unit_count
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Power draw of one core or device, W.
    pub fn per_unit_power(&self) -> T {
        self.tdp_watts / T::count(self.unit_count.into())
    }
}

/// Per-core (or per-device) power of a processor: TDP divided by unit count.
pub fn per_unit_power<T: Scalar>(profile: &ProcessorProfile<T>) -> T {
    profile.per_unit_power()
}

/// Memory allocated to a workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec<T> {
    pub size_gb: T,
    pub power_per_gb: T,
}

impl<T: Scalar> MemorySpec<T> {
    /// Memory of `size_gb` gigabytes at the default 0.3725 W/GB.
    pub fn new(size_gb: T) -> Self {
        Self {
            size_gb,
            power_per_gb: T::lit(MEMORY_W_PER_GB),
        }
    }

    pub fn none() -> Self {
        Self::new(T::zero())
    }

    /// Power drawn by this allocation, W.
    pub fn power_w(&self) -> T {
        self.size_gb * self.power_per_gb
    }

    pub fn validate(&self) -> ModelResult<()> {
        require("mem_gb", self.size_gb, |v| v >= T::zero(), "must be >= 0")?;
        require(
            "power_per_gb",
            self.power_per_gb,
            |v| v >= T::zero(),
            "must be >= 0",
        )?;
        Ok(())
    }
}

/// One computational task.
///
/// When `explicit_power_kw` is set, the whole-system power replaces the
/// core and memory model and those fields are ignored for energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload<T> {
    pub runtime_hours: T,
    pub core_count: u64,
    pub usage_factor: T,
    pub per_core_power_w: T,
    pub memory: MemorySpec<T>,
    pub psf: T,
    pub explicit_power_kw: Option<T>,
}

impl<T: Scalar> Workload<T> {
    /// A workload with full core usage, default memory power and PSF 1.
    pub fn new(runtime_hours: T, core_count: u64, per_core_power_w: T, mem_gb: T) -> Self {
        Self {
            runtime_hours,
            core_count,
            usage_factor: T::one(),
            per_core_power_w,
            memory: MemorySpec::new(mem_gb),
            psf: T::one(),
            explicit_power_kw: None,
        }
    }

    /// A workload whose total power draw is known directly.
    pub fn from_power(power_kw: T, runtime_hours: T) -> Self {
        Self {
            runtime_hours,
            core_count: 0,
            usage_factor: T::one(),
            per_core_power_w: T::zero(),
            memory: MemorySpec::none(),
            psf: T::one(),
            explicit_power_kw: Some(power_kw),
        }
    }

    pub fn on_processor(
        runtime_hours: T,
        core_count: u64,
        processor: &ProcessorProfile<T>,
        mem_gb: T,
    ) -> Self {
        Self::new(
            runtime_hours,
            core_count,
            processor.per_unit_power(),
            mem_gb,
        )
    }

    pub fn with_usage(mut self, usage_factor: T) -> Self {
        self.usage_factor = usage_factor;
        self
    }

    pub fn with_psf(mut self, psf: T) -> Self {
        self.psf = psf;
        self
    }

    pub fn with_memory_power(mut self, power_per_gb: T) -> Self {
        self.memory.power_per_gb = power_per_gb;
        self
    }

    pub fn validate(&self) -> ModelResult<()> {
        require(
            "runtime_hours",
            self.runtime_hours,
            |v| v >= T::zero(),
            "must be >= 0",
        )?;
        require("psf", self.psf, |v| v >= T::one(), "must be >= 1")?;
        match self.explicit_power_kw {
            Some(kw) => {
                require("explicit_power_kw", kw, |v| v > T::zero(), "must be > 0")?;
            }
            None => {
                require(
                    "usage_factor",
                    self.usage_factor,
                    |v| v >= T::zero() && v <= T::one(),
                    "must be within [0, 1]",
                )?;
                require(
                    "per_core_power_w",
                    self.per_core_power_w,
                    |v| v >= T::zero(),
                    "must be >= 0",
                )?;
                self.memory.validate()?;
            }
        }
        Ok(())
    }
}

/// The facility hosting the computation.
///
/// `pue` is total facility power over IT power. Exactly 1 stands for either
/// an ideal data centre or a personal device with unknown overhead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility<T> {
    pub label: String,
    pub pue: T,
}

impl<T: Scalar> Facility<T> {
    pub fn new(label: impl Into<String>, pue: T) -> ModelResult<Self> {
        let f = Self {
            label: label.into(),
            pue,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn world_average() -> Self {
        Self {
            label: "world average data centre".into(),
            pue: T::lit(WORLD_AVG_PUE),
        }
    }

    pub fn personal_device() -> Self {
        Self {
            label: "personal device".into(),
            pue: T::lit(PERSONAL_DEVICE_PUE),
        }
    }

    pub fn validate(&self) -> ModelResult<()> {
        require("pue", self.pue, |v| v >= T::one(), "must be >= 1").map(drop)
    }
}

/// Carbon intensity of electricity in a region, gCO2e per kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCarbonIntensity<T> {
    pub region_code: String,
    pub region_name: String,
    pub gco2e_per_kwh: T,
    pub year: i32,
    pub source: String,
}

impl<T: Scalar> GridCarbonIntensity<T> {
    pub fn new(
        region_code: impl Into<String>,
        region_name: impl Into<String>,
        gco2e_per_kwh: T,
        year: i32,
        source: impl Into<String>,
    ) -> ModelResult<Self> {
        let ci = Self {
            region_code: region_code.into(),
            region_name: region_name.into(),
            gco2e_per_kwh,
            year,
            source: source.into(),
        };
        ci.validate()?;
        Ok(ci)
    }

    /// An ad-hoc intensity value not tied to a catalogued region.
    pub fn custom(gco2e_per_kwh: T) -> ModelResult<Self> {
        Self::new("CUSTOM", "custom", gco2e_per_kwh, 0, "user supplied")
    }

    pub fn validate(&self) -> ModelResult<()> {
        require(
            "gco2e_per_kwh",
            self.gco2e_per_kwh,
            |v| v > T::zero(),
            "must be > 0",
        )
        .map(drop)
    }
}

/// Energy breakdown in kWh. `it_kwh` is before facility overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate<T> {
    pub core_kwh: T,
    pub memory_kwh: T,
    pub it_kwh: T,
    pub total_kwh: T,
}

impl<T: Scalar> EnergyEstimate<T> {
    pub fn zero() -> Self {
        Self {
            core_kwh: T::zero(),
            memory_kwh: T::zero(),
            it_kwh: T::zero(),
            total_kwh: T::zero(),
        }
    }
}

/// A gCO2e amount expressed in everyday terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSet<T> {
    pub car_km_eu: T,
    pub car_km_us: T,
    pub flights_paris_london: T,
    pub flights_ny_sf: T,
    pub flights_ny_melbourne: T,
    pub tree_months: T,
    pub tree_years: T,
}

/// Result of a full estimate. Equivalences refer to `gco2e_scaled`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintEstimate<T> {
    pub gco2e_single: T,
    pub psf: T,
    pub gco2e_scaled: T,
    pub pue: T,
    pub energy: EnergyEstimate<T>,
    pub ci_used: GridCarbonIntensity<T>,
    pub equivalences: EquivalenceSet<T>,
}

/// Energy of a workload under the core/memory power model.
pub fn energy<T: Scalar>(
    workload: &Workload<T>,
    facility: &Facility<T>,
) -> ModelResult<EnergyEstimate<T>> {
    if workload.explicit_power_kw.is_some() {
        return Err(ModelError::ExplicitPowerWorkload);
    }
    workload.validate()?;
    facility.validate()?;

    let milli = T::lit(0.001);
    let t = workload.runtime_hours;
    let core_kwh = t
        * T::count(workload.core_count)
        * workload.per_core_power_w
        * workload.usage_factor
        * milli;
    let memory_kwh = t * workload.memory.size_gb * workload.memory.power_per_gb * milli;
    let it_kwh = core_kwh + memory_kwh;
    Ok(EnergyEstimate {
        core_kwh,
        memory_kwh,
        it_kwh,
        total_kwh: it_kwh * facility.pue,
    })
}

/// Energy of a system with a known total power draw. Memory is not counted
/// separately; all power is attributed to the compute line.
pub fn energy_from_power<T: Scalar>(
    power_kw: T,
    runtime_hours: T,
    facility: &Facility<T>,
) -> ModelResult<EnergyEstimate<T>> {
    require(
        "explicit_power_kw",
        power_kw,
        |v| v > T::zero(),
        "must be > 0",
    )?;
    require(
        "runtime_hours",
        runtime_hours,
        |v| v >= T::zero(),
        "must be >= 0",
    )?;
    facility.validate()?;
    let it_kwh = power_kw * runtime_hours;
    Ok(EnergyEstimate {
        core_kwh: it_kwh,
        memory_kwh: T::zero(),
        it_kwh,
        total_kwh: it_kwh * facility.pue,
    })
}

/// Emissions in gCO2e of producing `energy_kwh` at the given intensity.
pub fn footprint<T: Scalar>(energy_kwh: T, ci: &GridCarbonIntensity<T>) -> ModelResult<T> {
    require("energy_kwh", energy_kwh, |v| v >= T::zero(), "must be >= 0")?;
    ci.validate()?;
    Ok(energy_kwh * ci.gco2e_per_kwh)
}

pub fn equivalences<T: Scalar>(gco2e: T, constants: &ReferenceConstants<T>) -> EquivalenceSet<T> {
    debug_assert!(gco2e >= T::zero());
    let tree_months = gco2e / constants.tree_g_per_month();
    EquivalenceSet {
        car_km_eu: gco2e / constants.car_eu_g_per_km,
        car_km_us: gco2e / constants.car_us_g_per_km,
        flights_paris_london: gco2e / constants.flight_paris_london_g,
        flights_ny_sf: gco2e / constants.flight_ny_sf_g,
        flights_ny_melbourne: gco2e / constants.flight_ny_melbourne_g,
        tree_months,
        tree_years: tree_months / T::lit(12.0),
    }
}

/// Full footprint with the default reference constants.
pub fn estimate<T: Scalar>(
    workload: &Workload<T>,
    facility: &Facility<T>,
    ci: &GridCarbonIntensity<T>,
) -> ModelResult<FootprintEstimate<T>> {
    estimate_with(workload, facility, ci, &ReferenceConstants::default())
}

pub fn estimate_with<T: Scalar>(
    workload: &Workload<T>,
    facility: &Facility<T>,
    ci: &GridCarbonIntensity<T>,
    constants: &ReferenceConstants<T>,
) -> ModelResult<FootprintEstimate<T>> {
    let energy = match workload.explicit_power_kw {
        Some(kw) => {
            require("psf", workload.psf, |v| v >= T::one(), "must be >= 1")?;
            energy_from_power(kw, workload.runtime_hours, facility)?
        }
        None => energy(workload, facility)?,
    };
    let gco2e_single = footprint(energy.total_kwh, ci)?;
    let gco2e_scaled = gco2e_single * workload.psf;
    Ok(FootprintEstimate {
        gco2e_single,
        psf: workload.psf,
        gco2e_scaled,
        pue: facility.pue,
        energy,
        ci_used: ci.clone(),
        equivalences: equivalences(gco2e_scaled, constants),
    })
}
