//! Reference catalogs: processors, grid carbon intensities and constants.
//!
//! Catalogs are loaded from small CSV files (comma separated, UTF-8, LF or
//! CRLF line endings, no quoting) and validated on load. A copy of each
//! table is compiled into the crate and pinned by SHA-256; see
//! [`ReferenceData::bundled`].

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constants::ReferenceConstants;
use crate::model::{GridCarbonIntensity, ProcessorKind, ProcessorProfile};

pub const PROCESSORS_FILE: &str = "processors.csv";
pub const CARBON_INTENSITY_FILE: &str = "carbon_intensity.csv";
pub const CONSTANTS_FILE: &str = "constants.csv";

pub const PROCESSORS_HEADER: [&str; 5] = ["name", "kind", "tdp_watts", "unit_count", "source"];
pub const CARBON_INTENSITY_HEADER: [&str; 5] = [
    "region_code",
    "region_name",
    "gco2e_per_kwh",
    "year",
    "source",
];
pub const CONSTANTS_HEADER: [&str; 4] = ["key", "value", "unit", "source"];

/// Reserved pseudo-region holding the world average intensity.
pub const WORLD: &str = "WORLD";

const MAX_PER_UNIT_W: f64 = 500.0;
const MAX_CI: f64 = 2000.0;
const SUGGESTIONS: usize = 3;

/// Expected span of national grid intensities in gCO2e/kWh.
pub const NATIONAL_CI_SPAN: (f64, f64) = (19.0, 880.0);

pub const CHECKSUMS_FILE: &str = "SHA256SUMS";

static BUNDLED_PROCESSORS: &str = include_str!("../data/processors.csv");
static BUNDLED_CARBON_INTENSITY: &str = include_str!("../data/carbon_intensity.csv");
static BUNDLED_CONSTANTS: &str = include_str!("../data/constants.csv");

/// SHA-256 pins of the bundled tables, mirrored in `data/SHA256SUMS`.
pub const BUNDLED_PINS: [(&str, &str); 3] = [
    (
        PROCESSORS_FILE,
        "6513b33b500fa956d7a168e9bc3032d39654d8ed1a7ca6ab9a9a901bc4e27841",
    ),
    (
        CARBON_INTENSITY_FILE,
        "0055eb072aacc92c9b27bcc1c0b9a6563c1a78ba0540f283ad084777caabc0c8",
    ),
    (
        CONSTANTS_FILE,
        "60ed34ec0594d9e54f10d4a71bb35278f148a8ff60e5f81f6f247d2da3975318",
    ),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("I/O error: {0}")]
    Io(String),

    #[error("bad header: expected {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },

    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("duplicate name {0:?}")]
    DuplicateName(String),

    #[error("{name}: {reason}")]
    InvariantViolation { name: String, reason: String },

    #[error("carbon intensity table has no WORLD row")]
    MissingWorldAverage,

    #[error("constant {0:?} missing")]
    MissingConstant(String),

    #[error("unknown constant {0:?}")]
    UnknownConstant(String),

    #[error("{name:?} not found{}", suggestion_hint(.suggestions))]
    NotFound {
        name: String,
        suggestions: Vec<String>,
    },

    #[error("{file}: checksum mismatch (pinned {expected}, actual {actual})")]
    ChecksumMismatch {
        file: String,
        expected: String,
        actual: String,
    },
}

fn suggestion_hint(suggestions: &[String]) -> String {
    if suggestions.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", suggestions.join(", "))
    }
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e.to_string())
    }
}

pub type DataResult<T> = Result<T, DataError>;

fn fold(name: &str) -> String {
    name.trim().to_lowercase()
}

/// Reads all rows after checking the header; returns `(line, fields)`.
fn read_table(mut source: impl Read, header: &[&str]) -> DataResult<Vec<(u64, Vec<String>)>> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| DataError::Io(e.to_string()))?;
    parse_table(&text, header)
}

pub(crate) fn parse_table(text: &str, header: &[&str]) -> DataResult<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows = Vec::new();
    let mut seen_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| DataError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if !seen_header {
            if fields != header {
                return Err(DataError::BadHeader {
                    expected: header.join(","),
                    found: fields.join(","),
                });
            }
            seen_header = true;
            continue;
        }
        if fields.len() != header.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", header.len(), fields.len()),
            });
        }
        rows.push((line, fields));
    }
    if !seen_header {
        return Err(DataError::BadHeader {
            expected: header.join(","),
            found: String::new(),
        });
    }
    Ok(rows)
}

pub(crate) fn parse_num<T: std::str::FromStr>(line: u64, column: &str, raw: &str) -> DataResult<T> {
    raw.parse().map_err(|_| DataError::MalformedRow {
        line,
        reason: format!("{column}: cannot parse {raw:?}"),
    })
}

fn closest<'a>(query: &str, names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let q = fold(query);
    let mut scored: Vec<(usize, usize, &str)> = names
        .enumerate()
        .map(|(i, n)| (strsim::levenshtein(&q, &fold(n)), i, n))
        .collect();
    scored.sort_by_key(|&(d, i, _)| (d, i));
    scored
        .into_iter()
        .take(SUGGESTIONS)
        .map(|(_, _, n)| n.to_owned())
        .collect()
}

/// Processor profiles, in file order, indexed by case-folded name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProcessorCatalog {
    entries: Vec<ProcessorProfile<f64>>,
    index: HashMap<String, usize>,
}

impl ProcessorCatalog {
    pub fn from_entries(entries: Vec<ProcessorProfile<f64>>) -> DataResult<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, p) in entries.iter().enumerate() {
            let per_unit = p.per_unit_power();
            if !(per_unit > 0.0 && per_unit <= MAX_PER_UNIT_W) {
                return Err(DataError::InvariantViolation {
                    name: p.name().to_owned(),
                    reason: format!("per-unit power {per_unit} W outside (0, {MAX_PER_UNIT_W}]"),
                });
            }
            let key = fold(p.name());
            if key.is_empty() {
                return Err(DataError::InvariantViolation {
                    name: p.name().to_owned(),
                    reason: "empty name".into(),
                });
            }
            if index.insert(key, i).is_some() {
                return Err(DataError::DuplicateName(p.name().to_owned()));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[ProcessorProfile<f64>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-insensitive exact lookup; on a miss the error carries the
    /// closest names by edit distance.
    pub fn lookup(&self, name: &str) -> DataResult<&ProcessorProfile<f64>> {
        match self.index.get(&fold(name)) {
            Some(&i) => Ok(&self.entries[i]),
            None => Err(DataError::NotFound {
                name: name.to_owned(),
                suggestions: closest(name, self.entries.iter().map(|p| p.name())),
            }),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = PROCESSORS_HEADER.join(",");
        out.push('\n');
        for p in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.name(),
                p.kind(),
                p.tdp_watts(),
                p.unit_count(),
                p.source()
            );
        }
        out
    }
}

pub fn load_processors(source: impl Read) -> DataResult<ProcessorCatalog> {
    let rows = read_table(source, &PROCESSORS_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let kind: ProcessorKind = f[1]
            .parse()
            .map_err(|reason| DataError::MalformedRow { line, reason })?;
        let tdp: f64 = parse_num(line, "tdp_watts", &f[2])?;
        let units: u32 = parse_num(line, "unit_count", &f[3])?;
        let profile = ProcessorProfile::new(f[0].clone(), kind, tdp, units).map_err(|e| {
            DataError::InvariantViolation {
                name: f[0].clone(),
                reason: e.to_string(),
            }
        })?;
        entries.push(profile.with_source(f[4].clone()));
    }
    ProcessorCatalog::from_entries(entries)
}

pub fn lookup_processor<'a>(
    catalog: &'a ProcessorCatalog,
    name: &str,
) -> DataResult<&'a ProcessorProfile<f64>> {
    catalog.lookup(name)
}

fn valid_region_code(code: &str) -> bool {
    !code.is_empty()
        && !code.starts_with('-')
        && !code.ends_with('-')
        && code
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '-')
}

/// True for sub-national regions such as `US-CA`.
pub fn is_sub_region(code: &str) -> bool {
    code.contains('-')
}

/// Grid carbon intensities indexed by region code, with a mandatory
/// `WORLD` row.
#[derive(Debug, Clone, PartialEq)]
pub struct CarbonIntensityCatalog {
    entries: Vec<GridCarbonIntensity<f64>>,
    index: HashMap<String, usize>,
    world: usize,
}

impl CarbonIntensityCatalog {
    pub fn from_entries(entries: Vec<GridCarbonIntensity<f64>>) -> DataResult<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, ci) in entries.iter().enumerate() {
            if !valid_region_code(&ci.region_code) {
                return Err(DataError::InvariantViolation {
                    name: ci.region_code.clone(),
                    reason: "region code must be uppercase letters, digits or '-'".into(),
                });
            }
            let v = ci.gco2e_per_kwh;
            if !(v > 0.0 && v < MAX_CI) {
                return Err(DataError::InvariantViolation {
                    name: ci.region_code.clone(),
                    reason: format!("carbon intensity {v} outside (0, {MAX_CI})"),
                });
            }
            if index.insert(ci.region_code.clone(), i).is_some() {
                return Err(DataError::DuplicateName(ci.region_code.clone()));
            }
        }
        let world = *index.get(WORLD).ok_or(DataError::MissingWorldAverage)?;
        let expected = crate::constants::WORLD_AVG_CI;
        if entries[world].gco2e_per_kwh != expected {
            return Err(DataError::InvariantViolation {
                name: WORLD.into(),
                reason: format!("world average must be {expected} gCO2e/kWh"),
            });
        }
        Ok(Self {
            entries,
            index,
            world,
        })
    }

    pub fn entries(&self) -> &[GridCarbonIntensity<f64>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn world_average(&self) -> &GridCarbonIntensity<f64> {
        &self.entries[self.world]
    }

    pub fn lookup(&self, region_code: &str) -> DataResult<&GridCarbonIntensity<f64>> {
        let code = region_code.trim().to_ascii_uppercase();
        match self.index.get(&code) {
            Some(&i) => Ok(&self.entries[i]),
            None => Err(DataError::NotFound {
                name: region_code.to_owned(),
                suggestions: closest(
                    region_code,
                    self.entries.iter().map(|c| c.region_code.as_str()),
                ),
            }),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = CARBON_INTENSITY_HEADER.join(",");
        out.push('\n');
        for c in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.region_code, c.region_name, c.gco2e_per_kwh, c.year, c.source
            );
        }
        out
    }
}

pub fn load_carbon_intensities(source: impl Read) -> DataResult<CarbonIntensityCatalog> {
    let rows = read_table(source, &CARBON_INTENSITY_HEADER)?;
    let mut entries = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let value: f64 = parse_num(line, "gco2e_per_kwh", &f[2])?;
        let year: i32 = parse_num(line, "year", &f[3])?;
        let ci = GridCarbonIntensity::new(f[0].clone(), f[1].clone(), value, year, f[4].clone())
            .map_err(|e| DataError::InvariantViolation {
                name: f[0].clone(),
                reason: e.to_string(),
            })?;
        entries.push(ci);
    }
    CarbonIntensityCatalog::from_entries(entries)
}

pub fn lookup_ci<'a>(
    catalog: &'a CarbonIntensityCatalog,
    region_code: &str,
) -> DataResult<&'a GridCarbonIntensity<f64>> {
    catalog.lookup(region_code)
}

/// Constants table row, kept for display alongside the parsed values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantRow {
    pub key: String,
    pub value: f64,
    pub unit: String,
    pub source: String,
}

/// Loads `constants.csv`. Every key must appear exactly once and every
/// value must be positive.
pub fn load_constants(
    source: impl Read,
) -> DataResult<(ReferenceConstants<f64>, Vec<ConstantRow>)> {
    let rows = read_table(source, &CONSTANTS_HEADER)?;
    let mut constants = ReferenceConstants::<f64>::default();
    let mut seen = Vec::with_capacity(rows.len());
    let mut table = Vec::with_capacity(rows.len());
    for (line, f) in rows {
        let value: f64 = parse_num(line, "value", &f[1])?;
        if !(value.is_finite() && value > 0.0) {
            return Err(DataError::InvariantViolation {
                name: f[0].clone(),
                reason: "constants must be positive".into(),
            });
        }
        if seen.contains(&f[0]) {
            return Err(DataError::DuplicateName(f[0].clone()));
        }
        if !constants.set(&f[0], value) {
            return Err(DataError::UnknownConstant(f[0].clone()));
        }
        seen.push(f[0].clone());
        table.push(ConstantRow {
            key: f[0].clone(),
            value,
            unit: f[2].clone(),
            source: f[3].clone(),
        });
    }
    for key in ReferenceConstants::<f64>::KEYS {
        if !seen.iter().any(|k| k == key) {
            return Err(DataError::MissingConstant(key.to_owned()));
        }
    }
    Ok((constants, table))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checks the compiled-in tables against their pinned digests.
pub fn verify_bundled_checksums() -> DataResult<()> {
    let files = [
        BUNDLED_PROCESSORS,
        BUNDLED_CARBON_INTENSITY,
        BUNDLED_CONSTANTS,
    ];
    for ((file, pin), contents) in BUNDLED_PINS.iter().zip(files) {
        let actual = sha256_hex(contents.as_bytes());
        if actual != *pin {
            return Err(DataError::ChecksumMismatch {
                file: (*file).to_owned(),
                expected: (*pin).to_owned(),
                actual,
            });
        }
    }
    Ok(())
}

/// Checks the files listed in `dir/SHA256SUMS` (`<hex>  <file>` lines, `#`
/// comments). Returns the number of files checked, or `None` when the
/// directory has no checksum file.
pub fn verify_checksums_in(dir: impl AsRef<Path>) -> DataResult<Option<usize>> {
    let dir = dir.as_ref();
    let sums = match std::fs::read_to_string(dir.join(CHECKSUMS_FILE)) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => {
            return Err(DataError::Io(format!(
                "{}: {e}",
                dir.join(CHECKSUMS_FILE).display()
            )))
        }
    };
    let mut checked = 0;
    for (i, raw) in sums.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (expected, file) =
            line.split_once(char::is_whitespace)
                .ok_or_else(|| DataError::MalformedRow {
                    line: i as u64 + 1,
                    reason: format!("{CHECKSUMS_FILE}: expected `<sha256>  <file>`"),
                })?;
        let file = file.trim().trim_start_matches('*');
        let bytes =
            std::fs::read(dir.join(file)).map_err(|e| DataError::Io(format!("{file}: {e}")))?;
        let actual = sha256_hex(&bytes);
        if !actual.eq_ignore_ascii_case(expected) {
            return Err(DataError::ChecksumMismatch {
                file: file.to_owned(),
                expected: expected.to_owned(),
                actual,
            });
        }
        checked += 1;
    }
    Ok(Some(checked))
}

/// All reference tables plus a version tag derived from their contents.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceData {
    pub processors: ProcessorCatalog,
    pub carbon_intensity: CarbonIntensityCatalog,
    pub constants: ReferenceConstants<f64>,
    pub constant_rows: Vec<ConstantRow>,
    pub version: String,
}

impl ReferenceData {
    /// Parses the three tables from their raw text.
    pub fn from_texts(
        processors: &str,
        carbon_intensity: &str,
        constants: &str,
    ) -> DataResult<Self> {
        let p = load_processors(processors.as_bytes())?;
        let ci = load_carbon_intensities(carbon_intensity.as_bytes())?;
        let (c, rows) = load_constants(constants.as_bytes())?;
        let mut h = Sha256::new();
        for text in [processors, carbon_intensity, constants] {
            h.update(Sha256::digest(text.as_bytes()));
        }
        let version = format!("sha256:{}", &hex::encode(h.finalize())[..12]);
        Ok(Self {
            processors: p,
            carbon_intensity: ci,
            constants: c,
            constant_rows: rows,
            version,
        })
    }

    /// Loads `processors.csv`, `carbon_intensity.csv` and `constants.csv`
    /// from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> DataResult<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| -> DataResult<String> {
            let mut s = String::new();
            File::open(dir.join(name))
                .and_then(|mut f| f.read_to_string(&mut s))
                .map_err(|e| DataError::Io(format!("{}: {e}", dir.join(name).display())))?;
            Ok(s)
        };
        Self::from_texts(
            &read(PROCESSORS_FILE)?,
            &read(CARBON_INTENSITY_FILE)?,
            &read(CONSTANTS_FILE)?,
        )
    }

    /// The tables compiled into this crate.
    pub fn bundled() -> &'static ReferenceData {
        static DATA: OnceLock<ReferenceData> = OnceLock::new();
        DATA.get_or_init(|| {
            Self::from_texts(
                BUNDLED_PROCESSORS,
                BUNDLED_CARBON_INTENSITY,
                BUNDLED_CONSTANTS,
            )
            .expect("bundled reference data is valid")
        })
    }

    /// National rows whose intensity falls outside [`NATIONAL_CI_SPAN`].
    pub fn ci_span_outliers(&self) -> Vec<&GridCarbonIntensity<f64>> {
        let (lo, hi) = NATIONAL_CI_SPAN;
        self.carbon_intensity
            .entries()
            .iter()
            .filter(|r| !is_sub_region(&r.region_code) && !(lo..=hi).contains(&r.gco2e_per_kwh))
            .collect()
    }

    /// Raw text of the bundled tables as `(file name, contents)`.
    pub fn bundled_files() -> [(&'static str, &'static str); 3] {
        [
            (PROCESSORS_FILE, BUNDLED_PROCESSORS),
            (CARBON_INTENSITY_FILE, BUNDLED_CARBON_INTENSITY),
            (CONSTANTS_FILE, BUNDLED_CONSTANTS),
        ]
    }
}
