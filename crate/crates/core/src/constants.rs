//! Fixed reference constants used by the energy model and the equivalence
//! metrics.

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

/// Memory power draw, W per GB allocated.
pub const MEMORY_W_PER_GB: f64 = 0.3725;
/// Average European passenger car, gCO2e per km.
pub const CAR_EU_G_PER_KM: f64 = 175.0;
/// Average US passenger car, gCO2e per km.
pub const CAR_US_G_PER_KM: f64 = 251.0;
pub const FLIGHT_PARIS_LONDON_G: f64 = 50_000.0;
pub const FLIGHT_NY_SF_G: f64 = 570_000.0;
pub const FLIGHT_NY_MELBOURNE_G: f64 = 2_310_000.0;
/// CO2 sequestered by one mature tree in a year, kg.
pub const TREE_KG_PER_YEAR: f64 = 11.0;
/// Global average data-centre PUE (2019).
pub const WORLD_AVG_PUE: f64 = 1.67;
/// PUE used for laptops and desktops, where no facility overhead is known.
pub const PERSONAL_DEVICE_PUE: f64 = 1.0;
/// World average grid carbon intensity (2019), gCO2e/kWh.
pub const WORLD_AVG_CI: f64 = 475.0;

/// The reference constants as one value.
///
/// Field names double as the keys of `constants.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants<T> {
    pub memory_w_per_gb: T,
    pub car_eu_g_per_km: T,
    pub car_us_g_per_km: T,
    pub flight_paris_london_g: T,
    pub flight_ny_sf_g: T,
    pub flight_ny_melbourne_g: T,
    pub tree_kg_per_year: T,
    pub world_avg_pue: T,
    pub personal_device_pue: T,
    pub world_avg_ci: T,
}

impl<T: Scalar> Default for ReferenceConstants<T> {
    fn default() -> Self {
        Self {
            memory_w_per_gb: T::lit(MEMORY_W_PER_GB),
            car_eu_g_per_km: T::lit(CAR_EU_G_PER_KM),
            car_us_g_per_km: T::lit(CAR_US_G_PER_KM),
            flight_paris_london_g: T::lit(FLIGHT_PARIS_LONDON_G),
            flight_ny_sf_g: T::lit(FLIGHT_NY_SF_G),
            flight_ny_melbourne_g: T::lit(FLIGHT_NY_MELBOURNE_G),
            tree_kg_per_year: T::lit(TREE_KG_PER_YEAR),
            world_avg_pue: T::lit(WORLD_AVG_PUE),
            personal_device_pue: T::lit(PERSONAL_DEVICE_PUE),
            world_avg_ci: T::lit(WORLD_AVG_CI),
        }
    }
}

impl<T: Scalar> ReferenceConstants<T> {
    /// Keys in their canonical order.
    pub const KEYS: [&'static str; 10] = [
        "memory_w_per_gb",
        "car_eu_g_per_km",
        "car_us_g_per_km",
        "flight_paris_london_g",
        "flight_ny_sf_g",
        "flight_ny_melbourne_g",
        "tree_kg_per_year",
        "world_avg_pue",
        "personal_device_pue",
        "world_avg_ci",
    ];

    pub fn get(&self, key: &str) -> Option<T> {
        Some(match key {
            "memory_w_per_gb" => self.memory_w_per_gb,
            "car_eu_g_per_km" => self.car_eu_g_per_km,
            "car_us_g_per_km" => self.car_us_g_per_km,
            "flight_paris_london_g" => self.flight_paris_london_g,
            "flight_ny_sf_g" => self.flight_ny_sf_g,
            "flight_ny_melbourne_g" => self.flight_ny_melbourne_g,
            "tree_kg_per_year" => self.tree_kg_per_year,
            "world_avg_pue" => self.world_avg_pue,
            "personal_device_pue" => self.personal_device_pue,
            "world_avg_ci" => self.world_avg_ci,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: T) -> bool {
        let slot = match key {
            "memory_w_per_gb" => &mut self.memory_w_per_gb,
            "car_eu_g_per_km" => &mut self.car_eu_g_per_km,
            "car_us_g_per_km" => &mut self.car_us_g_per_km,
            "flight_paris_london_g" => &mut self.flight_paris_london_g,
            "flight_ny_sf_g" => &mut self.flight_ny_sf_g,
            "flight_ny_melbourne_g" => &mut self.flight_ny_melbourne_g,
            "tree_kg_per_year" => &mut self.tree_kg_per_year,
            "world_avg_pue" => &mut self.world_avg_pue,
            "personal_device_pue" => &mut self.personal_device_pue,
            "world_avg_ci" => &mut self.world_avg_ci,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Grams of CO2 a mature tree sequesters per month.
    pub fn tree_g_per_month(&self) -> T {
        self.tree_kg_per_year * T::lit(1000.0) / T::lit(12.0)
    }

    /// Keys whose value differs from the contractual default.
    pub fn deviations(&self) -> Vec<&'static str> {
        let pinned = Self::default();
        Self::KEYS
            .iter()
            .copied()
            .filter(|k| self.get(k) != pinned.get(k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_round_trip_through_get_and_set() {
        let defaults = ReferenceConstants::<f64>::default();
        let mut c = ReferenceConstants::<f64>::default();
        for key in ReferenceConstants::<f64>::KEYS {
            let v = c.get(key).unwrap();
            assert!(v > 0.0, "{key}");
            assert!(c.set(key, v * 2.0));
        }
        assert_eq!(c.deviations().len(), 10);
        assert!(defaults.deviations().is_empty());
        assert!(!c.set("nope", 1.0));
        assert_eq!(c.get("nope"), None);
    }

    #[test]
    fn tree_month_divisor() {
        let c = ReferenceConstants::<f64>::default();
        assert!((c.tree_g_per_month() - 916.666_666_666_666_7).abs() < 1e-9);
    }
}
