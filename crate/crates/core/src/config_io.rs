//! Scenario files, presets and result emission.
//!
//! Scenarios use the same flat `section.key = value` format as the rate
//! file. Every scenario starts from the bundled `base` configuration; a
//! `base = <preset>` line starts from a named preset instead. Unknown keys
//! are rejected. A trailing `# comment` on a line is kept as the provenance
//! note of that key.
//!
//! Presets are compiled in. Setting `NVLASER_DATA_DIR` makes the loader look
//! for `<dir>/presets/<name>.conf` first.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cavity::{CavityGeometry, ReflectivityModel};
use crate::error::{Error, Result};
use crate::laser::{DiodeParams, GainModel};
use crate::nv_levels::{MicrowaveMixing, NvSystem, PumpCondition, RateConstantSet};
use crate::sensing::{NoiseKind, NoiseModel, OdmrConfig, OperatingLimits, SensorChain};

pub const DATA_DIR_ENV: &str = "NVLASER_DATA_DIR";
pub const SCHEMA_VERSION: u32 = 1;

const BASE_PRESET: &str = include_str!("../data/presets/base.conf");
const PRESETS: [(&str, &str); 4] = [
    ("D1", include_str!("../data/presets/D1.conf")),
    ("D2", include_str!("../data/presets/D2.conf")),
    ("D3", include_str!("../data/presets/D3.conf")),
    ("experimental", include_str!("../data/presets/experimental.conf")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// ODMR sampling settings stored in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdmrSettings {
    pub center_frequency: f64,
    pub points: usize,
    pub half_span_linewidths: f64,
    /// `None` drives at the off-resonance threshold.
    pub drive_current: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub nv: NvSystem,
    /// `default` or the path the rate set was read from.
    pub rates_source: String,
    pub pump: PumpCondition,
    pub cavity: CavityGeometry,
    pub diode: DiodeParams,
    pub odmr: OdmrSettings,
    pub noise: Vec<NoiseModel>,
    pub limits: OperatingLimits,
    /// Per-key notes taken from trailing comments.
    pub provenance: BTreeMap<String, String>,
}

impl Scenario {
    pub fn chain(&self) -> SensorChain {
        SensorChain {
            nv: self.nv.clone(),
            pump: self.pump,
            cavity: self.cavity,
            diode: self.diode,
        }
    }

    pub fn odmr_config(&self) -> Result<OdmrConfig> {
        let mut cfg = OdmrConfig::uniform(
            self.odmr.center_frequency,
            self.nv.linewidth(),
            self.odmr.half_span_linewidths,
            self.odmr.points,
        )?;
        cfg.drive_current = self.odmr.drive_current;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.nv.validate()?;
        self.cavity.validate()?;
        self.diode.validate()?;
        self.odmr_config()?.validate()?;
        for n in &self.noise {
            n.validate()?;
        }
        Ok(())
    }

    /// Serialises to the scenario format; loading the result gives back an
    /// identical scenario.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            if let Some(note) = self.provenance.get(key) {
                out.push_str("  # ");
                out.push_str(note);
            }
            out.push('\n');
        };
        let f = |v: f64| format!("{v:?}");
        put("name", self.name.clone());
        put("diamond.density_ppm", f(self.nv.density_ppm));
        put("diamond.t2_star", f(self.nv.t2_star));
        put("diamond.thickness", f(self.nv.thickness));
        put("diamond.rates", self.rates_source.clone());
        put(
            "diamond.mixing",
            match self.nv.mixing {
                MicrowaveMixing::IncoherentLimit => "incoherent".into(),
                MicrowaveMixing::Fixed(r) => f(r),
            },
        );
        put("pump.intensity", f(self.pump.intensity));
        put("pump.rabi_frequency", f(self.pump.rabi_frequency));
        let c = &self.cavity;
        put("cavity.diode_length", f(c.diode_length));
        put("cavity.external_length", f(c.external_length));
        put("cavity.r1", f(c.r1));
        put("cavity.r2", f(c.r2));
        put("cavity.r3", f(c.r3));
        put("cavity.alpha_c", f(c.alpha_c));
        put("cavity.external_transmission", f(c.external_transmission));
        put(
            "cavity.reflectivity_model",
            match c.reflectivity_model {
                ReflectivityModel::MultiBounce => "multi-bounce",
                ReflectivityModel::SingleBounce => "single-bounce",
            }
            .into(),
        );
        let d = &self.diode;
        put("diode.n_tr", f(d.n_tr));
        put("diode.a", f(d.a));
        put("diode.gamma", f(d.gamma));
        put("diode.epsilon", f(d.epsilon));
        put("diode.beta", f(d.beta));
        put("diode.tau_n", f(d.tau_n));
        put("diode.volume", f(d.volume));
        put("diode.eta_i", f(d.eta_i));
        put("diode.wavelength", f(d.wavelength));
        put("diode.group_index", f(d.group_index));
        put(
            "diode.gain_model",
            match d.gain_model {
                GainModel::Linear => "linear",
                GainModel::Logarithmic => "logarithmic",
            }
            .into(),
        );
        put("odmr.center_frequency", f(self.odmr.center_frequency));
        put("odmr.points", self.odmr.points.to_string());
        put("odmr.half_span_linewidths", f(self.odmr.half_span_linewidths));
        put(
            "odmr.drive_current",
            self.odmr.drive_current.map_or_else(|| "threshold".into(), f),
        );
        let names: Vec<&str> = self.noise.iter().map(|n| n.name()).collect();
        put("noise.models", names.join(", "));
        put("noise.bandwidth", f(self.noise.first().map_or(1.0, |n| n.bandwidth)));
        if let Some(r) = self.noise.iter().find_map(|n| match n.kind {
            NoiseKind::RelativeCurrent { fraction } => Some(fraction),
            _ => None,
        }) {
            put("noise.relative_current", f(r));
        }
        put("limits.max_current", f(self.limits.max_current));
        put("limits.bandwidth", f(self.limits.bandwidth));
        out
    }

    /// Short digest of the serialised scenario.
    pub fn hash(&self) -> String {
        short_hash(self.to_kv().as_bytes())
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    origin: String,
}

/// Ordered key-value document with per-key origin for error messages.
#[derive(Debug, Clone, Default)]
struct KvDoc {
    entries: BTreeMap<String, Entry>,
    notes: BTreeMap<String, String>,
}

impl KvDoc {
    fn merge_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let (body, note) = match raw.split_once('#') {
                Some((b, n)) => (b, Some(n.trim())),
                None => (raw, None),
            };
            let line = body.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: k + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if let Some(n) = note.filter(|n| !n.is_empty()) {
                self.notes.insert(key.clone(), n.to_string());
            }
            self.entries.insert(
                key,
                Entry {
                    value: value.trim().to_string(),
                    line: k + 1,
                    origin: origin.to_string(),
                },
            );
        }
        Ok(())
    }

    fn take(&mut self, key: &str) -> Result<Entry> {
        self.entries.remove(key).ok_or_else(|| Error::Parse {
            path: "<scenario>".into(),
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    fn parse_err(entry: &Entry, key: &str, message: String) -> Error {
        Error::Parse {
            path: entry.origin.clone(),
            line: entry.line,
            message: format!("`{key}`: {message}"),
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        let e = self.take(key)?;
        let v: f64 = e
            .value
            .parse()
            .map_err(|_| Self::parse_err(&e, key, format!("`{}` is not a number", e.value)))?;
        if !v.is_finite() {
            return Err(Self::parse_err(&e, key, "must be finite".into()));
        }
        Ok(v)
    }

    fn text(&mut self, key: &str) -> Result<Entry> {
        self.take(key)
    }
}

fn read_preset_text(name: &str) -> Result<Option<String>> {
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        let path = PathBuf::from(dir).join("presets").join(format!("{name}.conf"));
        if path.is_file() {
            return std::fs::read_to_string(&path)
                .map(Some)
                .map_err(|source| Error::Io { path, source });
        }
    }
    Ok(PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string()))
}

fn base_doc() -> Result<KvDoc> {
    let mut doc = KvDoc::default();
    let base = read_preset_text("base")?.unwrap_or_else(|| BASE_PRESET.to_string());
    doc.merge_text(&base, "preset:base")?;
    Ok(doc)
}

fn preset_doc(name: &str) -> Result<KvDoc> {
    let text = read_preset_text(name)?.ok_or_else(|| Error::UnknownScenario(name.to_string()))?;
    let mut doc = base_doc()?;
    doc.merge_text(&text, &format!("preset:{name}"))?;
    Ok(doc)
}

/// Loads a preset by name, or a scenario file by path.
pub fn load_scenario(reference: &str) -> Result<Scenario> {
    if let Some(name) = preset_names().find(|n| n.eq_ignore_ascii_case(reference)) {
        return scenario_from_doc(preset_doc(name)?, None);
    }
    let path = Path::new(reference);
    if !path.exists() {
        return Err(Error::UnknownScenario(reference.to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string(), path.parent())
}

/// Parses scenario text. Relative rate-file paths resolve against `dir`.
pub fn parse_scenario(text: &str, origin: &str, dir: Option<&Path>) -> Result<Scenario> {
    let mut overlay = KvDoc::default();
    overlay.merge_text(text, origin)?;
    let mut doc = match overlay.entries.remove("base") {
        Some(e) => {
            let name = preset_names()
                .find(|n| n.eq_ignore_ascii_case(&e.value))
                .ok_or_else(|| KvDoc::parse_err(&e, "base", format!("unknown preset `{}`", e.value)))?;
            preset_doc(name)?
        }
        None => base_doc()?,
    };
    doc.entries.extend(overlay.entries);
    doc.notes.extend(overlay.notes);
    scenario_from_doc(doc, dir)
}

fn scenario_from_doc(mut doc: KvDoc, dir: Option<&Path>) -> Result<Scenario> {
    let name = doc.text("name")?.value;

    let rates_entry = doc.text("diamond.rates")?;
    let (rates, rates_source) = if rates_entry.value == "default" {
        (RateConstantSet::literature_default(), "default".to_string())
    } else {
        let p = PathBuf::from(&rates_entry.value);
        let resolved = match dir {
            Some(d) if p.is_relative() => d.join(&p),
            _ => p,
        };
        (RateConstantSet::from_file(&resolved)?, rates_entry.value.clone())
    };
    let mixing_entry = doc.text("diamond.mixing")?;
    let mixing = match mixing_entry.value.as_str() {
        "incoherent" => MicrowaveMixing::IncoherentLimit,
        v => MicrowaveMixing::Fixed(v.parse().map_err(|_| {
            KvDoc::parse_err(&mixing_entry, "diamond.mixing", "expected `incoherent` or a rate in s^-1".into())
        })?),
    };
    let nv = NvSystem {
        density_ppm: doc.f64("diamond.density_ppm")?,
        t2_star: doc.f64("diamond.t2_star")?,
        thickness: doc.f64("diamond.thickness")?,
        rates,
        mixing,
    };
    let pump = PumpCondition {
        intensity: doc.f64("pump.intensity")?,
        rabi_frequency: doc.f64("pump.rabi_frequency")?,
        microwaves_on: true,
    };

    let model_entry = doc.text("cavity.reflectivity_model")?;
    let reflectivity_model = match model_entry.value.as_str() {
        "multi-bounce" => ReflectivityModel::MultiBounce,
        "single-bounce" => ReflectivityModel::SingleBounce,
        other => {
            return Err(KvDoc::parse_err(
                &model_entry,
                "cavity.reflectivity_model",
                format!("`{other}` is not multi-bounce or single-bounce"),
            ))
        }
    };
    let cavity = CavityGeometry {
        diode_length: doc.f64("cavity.diode_length")?,
        external_length: doc.f64("cavity.external_length")?,
        r1: doc.f64("cavity.r1")?,
        r2: doc.f64("cavity.r2")?,
        r3: doc.f64("cavity.r3")?,
        alpha_c: doc.f64("cavity.alpha_c")?,
        external_transmission: doc.f64("cavity.external_transmission")?,
        reflectivity_model,
    };

    let gain_entry = doc.text("diode.gain_model")?;
    let gain_model = match gain_entry.value.as_str() {
        "linear" => GainModel::Linear,
        "logarithmic" => GainModel::Logarithmic,
        other => {
            return Err(KvDoc::parse_err(
                &gain_entry,
                "diode.gain_model",
                format!("`{other}` is not linear or logarithmic"),
            ))
        }
    };
    let diode = DiodeParams {
        n_tr: doc.f64("diode.n_tr")?,
        a: doc.f64("diode.a")?,
        gamma: doc.f64("diode.gamma")?,
        epsilon: doc.f64("diode.epsilon")?,
        beta: doc.f64("diode.beta")?,
        tau_n: doc.f64("diode.tau_n")?,
        volume: doc.f64("diode.volume")?,
        eta_i: doc.f64("diode.eta_i")?,
        wavelength: doc.f64("diode.wavelength")?,
        group_index: doc.f64("diode.group_index")?,
        gain_model,
    };

    let points_entry = doc.text("odmr.points")?;
    let points: usize = points_entry
        .value
        .parse()
        .map_err(|_| KvDoc::parse_err(&points_entry, "odmr.points", "expected a positive integer".into()))?;
    let drive_entry = doc.text("odmr.drive_current")?;
    let drive_current = match drive_entry.value.as_str() {
        "threshold" => None,
        v => Some(v.parse::<f64>().map_err(|_| {
            KvDoc::parse_err(&drive_entry, "odmr.drive_current", "expected `threshold` or a current in A".into())
        })?),
    };
    let odmr = OdmrSettings {
        center_frequency: doc.f64("odmr.center_frequency")?,
        points,
        half_span_linewidths: doc.f64("odmr.half_span_linewidths")?,
        drive_current,
    };

    let bandwidth = doc.f64("noise.bandwidth")?;
    let relative = match doc.entries.contains_key("noise.relative_current") {
        true => Some(doc.f64("noise.relative_current")?),
        false => None,
    };
    let models_entry = doc.text("noise.models")?;
    let mut noise = Vec::new();
    for name in models_entry.value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = match name {
            "optical-shot" => NoiseKind::OpticalShot,
            "current-shot" => NoiseKind::CurrentShot,
            "relative-current" => NoiseKind::RelativeCurrent {
                fraction: relative.ok_or_else(|| {
                    KvDoc::parse_err(&models_entry, "noise.models", "relative-current needs noise.relative_current".into())
                })?,
            },
            other => {
                return Err(KvDoc::parse_err(
                    &models_entry,
                    "noise.models",
                    format!("unknown noise model `{other}`"),
                ))
            }
        };
        noise.push(NoiseModel { kind, bandwidth });
    }
    let limits = OperatingLimits {
        max_current: doc.f64("limits.max_current")?,
        bandwidth: doc.f64("limits.bandwidth")?,
    };

    if let Some((key, e)) = doc.entries.iter().next() {
        return Err(KvDoc::parse_err(e, key, "unknown key".into()));
    }
    let scenario = Scenario {
        name,
        nv,
        rates_source,
        pump,
        cavity,
        diode,
        odmr,
        noise,
        limits,
        provenance: doc.notes,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Column-oriented result table; every cell is a number or a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// 17 significant digits, locale independent.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(
                "table row",
                format!("{} cells for {} columns", row.len(), self.columns.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::invalid("csv", e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_float(*v),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            w.write_record(&fields).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Reads a table written by [`Table::to_csv`]. Fields that parse as
    /// numbers become [`Cell::Num`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let io = |e: csv::Error| Error::Parse {
            path: "<csv>".into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        };
        let columns = r.headers().map_err(io)?.iter().map(String::from).collect();
        let mut table = Table { columns, rows: Vec::new() };
        for rec in r.records() {
            let rec = rec.map_err(io)?;
            table.rows.push(
                rec.iter()
                    .map(|f| match f.parse::<f64>() {
                        Ok(v) => Cell::Num(v),
                        Err(_) => Cell::Text(f.to_string()),
                    })
                    .collect(),
            );
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid("format", format!("`{other}` is not csv or json"))),
        }
    }
}

/// Schema-versioned JSON wrapper.
pub fn json_document<T: Serialize>(kind: &str, scenario_hash: &str, data: &T) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        schema_version: u32,
        kind: &'a str,
        scenario_hash: &'a str,
        data: &'a T,
    }
    let mut s = serde_json::to_string_pretty(&Doc {
        schema_version: SCHEMA_VERSION,
        kind,
        scenario_hash,
        data,
    })?;
    s.push('\n');
    Ok(s)
}

/// Writes a table as CSV or as a JSON document of column arrays.
pub fn emit_table(table: &Table, format: Format, kind: &str, scenario_hash: &str, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => table.to_csv()?,
        Format::Json => {
            let columns: BTreeMap<&str, Vec<serde_json::Value>> = table
                .columns
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let values = table
                        .rows
                        .iter()
                        .map(|row| match &row[k] {
                            Cell::Num(v) => serde_json::Number::from_f64(*v)
                                .map_or_else(|| serde_json::Value::String(format_float(*v)), serde_json::Value::Number),
                            Cell::Text(t) => serde_json::Value::String(t.clone()),
                        })
                        .collect();
                    (name.as_str(), values)
                })
                .collect();
            json_document(kind, scenario_hash, &columns)?
        }
    };
    atomic_write(path, text.as_bytes())
}

/// Writes via a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Appends one completed record to a checkpoint file.
pub fn append_checkpoint(path: &Path, index: usize, fields: &[String]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut rec = vec![index.to_string()];
    rec.extend(fields.iter().cloned());
    w.write_record(&rec).map_err(|e| Error::invalid("checkpoint", e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::invalid("checkpoint", e.to_string()))?;
    f.write_all(&bytes).map_err(io)?;
    Ok(())
}

/// Completed records by index. A torn final line is ignored.
pub fn read_checkpoint(path: &Path) -> Result<BTreeMap<usize, Vec<String>>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let complete = match text.rfind('\n') {
        Some(k) => &text[..=k],
        None => "",
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(complete.as_bytes());
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let mut it = rec.iter();
        let index = it.next().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: rec.position().map_or(0, |p| p.line() as usize),
            message: "record without index".into(),
        })?;
        out.insert(index, it.map(String::from).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d3_preset() {
        let s = load_scenario("D3").unwrap();
        assert_eq!(s.nv.density_ppm, 10.0);
        assert_eq!(s.nv.t2_star, 1e-7);
        assert_eq!(s.nv.thickness, 5e-4);
        assert_eq!(s.name, "D3");
    }

    #[test]
    fn presets_share_thickness() {
        for (name, ppm, t2) in [("D1", 0.001, 5e-6), ("D2", 0.1, 7.5e-7), ("D3", 10.0, 1e-7)] {
            let s = load_scenario(name).unwrap();
            assert_eq!((s.nv.density_ppm, s.nv.t2_star, s.nv.thickness), (ppm, t2, 5e-4));
        }
        let e = load_scenario("experimental").unwrap();
        assert_eq!((e.nv.density_ppm, e.nv.thickness, e.pump.intensity), (15.0, 1e-3, 2.5e4));
    }

    #[test]
    fn negative_t2_names_the_field() {
        let err = parse_scenario("base = D3\ndiamond.t2_star = -1e-7\n", "neg.conf", None).unwrap_err();
        assert!(err.to_string().contains("t2_star"), "{err}");
    }

    #[test]
    fn unknown_key_has_line_number() {
        let err = parse_scenario("base = D3\n\ndiode.gama = 0.02\n", "typo.conf", None).unwrap_err();
        match err {
            Error::Parse { line, ref message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("diode.gama"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_has_line_number() {
        match parse_scenario("diode.a = lots\n", "x.conf", None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_scenario() {
        assert!(matches!(load_scenario("/no/such/file.conf"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn scenario_round_trip() {
        for name in preset_names() {
            let s = load_scenario(name).unwrap();
            let again = parse_scenario(&s.to_kv(), "emitted", None).unwrap();
            assert_eq!(s, again);
            assert_eq!(s.hash(), again.hash());
        }
    }

    #[test]
    fn provenance_from_comments() {
        let s = load_scenario("D3").unwrap();
        assert!(s.provenance.get("cavity.r2").unwrap().contains("2.75"));
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["frequency_hz", "power_w"]);
        assert_eq!(t.to_csv().unwrap(), "frequency_hz,power_w\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(["x", "label"]);
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            t.push(vec![Cell::Num(v), Cell::from("B, maybe")]).unwrap();
        }
        let back = Table::from_csv(&t.to_csv().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn emission_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["a_m2"]);
        t.push(vec![Cell::Num(1.6e-20)]).unwrap();
        let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
        emit_table(&t, Format::Json, "test", "abc", &p1).unwrap();
        emit_table(&t, Format::Json, "test", "abc", &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&p1).unwrap()).unwrap();
        assert_eq!(doc["schema_version"], 1);
    }

    #[test]
    fn checkpoint_ignores_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ck.csv");
        append_checkpoint(&p, 0, &["1".into(), "x".into()]).unwrap();
        append_checkpoint(&p, 2, &["3".into(), "y".into()]).unwrap();
        let mut f = std::fs::OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(b"5,half").unwrap();
        let back = read_checkpoint(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[&2], vec!["3".to_string(), "y".to_string()]);
    }
}
