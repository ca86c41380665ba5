//! Experiment suites and their report files.
//!
//! A report cell aggregates one batch: for every replication the attacks and
//! denounces of all areas are pooled into per-100k rates, and the cell keeps
//! mean, median and sample standard deviation of those rates together with
//! the raw per-area metrics. All cells of a suite share the master seed, so
//! differences between cells are paired comparisons.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{per_100k, AreaProfile, RunMetrics, SimParams};
use crate::engine::run_batch;
use crate::error::{check_unit, Error, Result};
use crate::geometry::wkt_to_geojson;

/// Parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GenderStressMale,
    PctEmployed,
    PctGun,
    PctAddicted,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [
        SweepParam::GenderStressMale,
        SweepParam::PctEmployed,
        SweepParam::PctGun,
        SweepParam::PctAddicted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::GenderStressMale => "gender_stress_male",
            SweepParam::PctEmployed => "pct_employed",
            SweepParam::PctGun => "pct_gun",
            SweepParam::PctAddicted => "pct_addicted",
        }
    }

    pub fn apply(self, params: &mut SimParams, value: f64) {
        match self {
            SweepParam::GenderStressMale => params.gender_stress_male = value,
            SweepParam::PctEmployed => params.pct_employed = value,
            SweepParam::PctGun => params.pct_gun = value,
            SweepParam::PctAddicted => params.pct_addicted = value,
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::validation(
                    "parameter",
                    format!("unknown parameter `{s}`; valid names: {}", Self::valid_names()),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub grid: Vec<f64>,
    pub base: SimParams,
    pub profiles: Vec<AreaProfile>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::validation("grid", "must contain at least one value"));
        }
        for &v in &self.grid {
            check_unit(self.parameter.name(), v)?;
        }
        if self.profiles.is_empty() {
            return Err(Error::validation("profiles", "must contain at least one area"));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

impl Summary {
    /// Mean, median and sample standard deviation (0 for fewer than two values).
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Summary {
                mean: f64::NAN,
                median: f64::NAN,
                sd: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Summary { mean, median, sd }
    }
}

/// Aggregated statistics of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cell_id: String,
    pub parameter: Option<String>,
    pub value: Option<f64>,
    pub replications: u32,
    pub seed: u64,
    pub cases: Summary,
    pub denounces: Summary,
    /// Per-area metrics of every replication, in batch order.
    pub raw: Vec<RunMetrics>,
}

/// Per replication, attacks and denounces of all areas pooled into rates.
/// Returns `(cases_per_100k, denounces_per_100k)` ordered by replication id.
pub fn pooled_rates(raw: &[RunMetrics]) -> Vec<(f64, f64)> {
    let mut by_rep: BTreeMap<u32, (u64, u64, u64)> = BTreeMap::new();
    for m in raw {
        let e = by_rep.entry(m.replication_id).or_default();
        e.0 += m.attacks;
        e.1 += m.denounces;
        e.2 += m.women_count;
    }
    by_rep
        .values()
        .map(|&(a, d, w)| (per_100k(a, w), per_100k(d, w)))
        .collect()
}

impl ExperimentReport {
    pub fn from_metrics(
        cell_id: impl Into<String>,
        parameter: Option<String>,
        value: Option<f64>,
        seed: u64,
        raw: Vec<RunMetrics>,
    ) -> Self {
        let rates = pooled_rates(&raw);
        let cases: Vec<f64> = rates.iter().map(|r| r.0).collect();
        let denounces: Vec<f64> = rates.iter().map(|r| r.1).collect();
        ExperimentReport {
            cell_id: cell_id.into(),
            parameter,
            value,
            replications: rates.len() as u32,
            seed,
            cases: Summary::of(&cases),
            denounces: Summary::of(&denounces),
            raw,
        }
    }
}

/// One report per grid value; every cell reuses the base seed plan.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ExperimentReport>> {
    spec.validate()?;
    spec.grid
        .iter()
        .map(|&value| {
            let mut params = spec.base.clone();
            spec.parameter.apply(&mut params, value);
            let raw = run_batch(&spec.profiles, &params)?;
            Ok(ExperimentReport::from_metrics(
                format!("{}={value}", spec.parameter),
                Some(spec.parameter.name().to_owned()),
                Some(value),
                params.master_seed,
                raw,
            ))
        })
        .collect()
}

/// Cell identifier of a deterrence × distancing combination.
pub fn design_cell_id(deterrence: bool, distancing: bool) -> String {
    format!("deterrence={deterrence};distancing={distancing}")
}

/// The four deterrence × distancing cells, in the order
/// (off, off), (off, on), (on, off), (on, on).
pub fn run_design(profiles: &[AreaProfile], base: &SimParams) -> Result<Vec<ExperimentReport>> {
    if profiles.is_empty() {
        return Err(Error::validation("profiles", "must contain at least one area"));
    }
    let mut reports = Vec::with_capacity(4);
    for deterrence in [false, true] {
        for distancing in [false, true] {
            let params = SimParams {
                deterrence_enabled: deterrence,
                distancing_enabled: distancing,
                ..base.clone()
            };
            let raw = run_batch(profiles, &params)?;
            reports.push(ExperimentReport::from_metrics(
                design_cell_id(deterrence, distancing),
                Some("design".to_owned()),
                None,
                params.master_seed,
                raw,
            ));
        }
    }
    Ok(reports)
}

/// One report per area of a batch, keyed by area id.
pub fn per_area_reports(raw: &[RunMetrics], seed: u64) -> Vec<ExperimentReport> {
    group_reports(raw, seed, "area", |m| m.area_id.clone())
}

/// One report per metropolitan region of a batch, keyed by region id.
pub fn per_region_reports(raw: &[RunMetrics], profiles: &[AreaProfile], seed: u64) -> Vec<ExperimentReport> {
    let region: BTreeMap<&str, &str> = profiles
        .iter()
        .map(|p| (p.area_id.as_str(), p.region_id.as_str()))
        .collect();
    group_reports(raw, seed, "region", |m| {
        region.get(m.area_id.as_str()).copied().unwrap_or(m.area_id.as_str()).to_owned()
    })
}

fn group_reports(
    raw: &[RunMetrics],
    seed: u64,
    kind: &str,
    key: impl Fn(&RunMetrics) -> String,
) -> Vec<ExperimentReport> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<String, Vec<RunMetrics>> = BTreeMap::new();
    for m in raw {
        let k = key(m);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(m.clone());
    }
    order
        .into_iter()
        .map(|k| {
            let metrics = groups.remove(&k).unwrap_or_default();
            ExperimentReport::from_metrics(k, Some(kind.to_owned()), None, seed, metrics)
        })
        .collect()
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "cell_id",
    "parameter",
    "value",
    "cases_mean",
    "cases_median",
    "cases_sd",
    "denounces_mean",
    "denounces_median",
    "denounces_sd",
    "replications",
    "seed",
];

/// One line of a report CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cell_id: String,
    pub parameter: Option<String>,
    pub value: Option<f64>,
    pub cases_mean: f64,
    pub cases_median: f64,
    pub cases_sd: f64,
    pub denounces_mean: f64,
    pub denounces_median: f64,
    pub denounces_sd: f64,
    pub replications: u32,
    pub seed: u64,
}

impl From<&ExperimentReport> for ReportRow {
    fn from(r: &ExperimentReport) -> Self {
        ReportRow {
            cell_id: r.cell_id.clone(),
            parameter: r.parameter.clone(),
            value: r.value,
            cases_mean: r.cases.mean,
            cases_median: r.cases.median,
            cases_sd: r.cases.sd,
            denounces_mean: r.denounces.mean,
            denounces_median: r.denounces.median,
            denounces_sd: r.denounces.sd,
            replications: r.replications,
            seed: r.seed,
        }
    }
}

pub fn write_report_csv(reports: &[ExperimentReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    writer.write_record(REPORT_COLUMNS)?;
    for report in reports {
        writer.serialize(ReportRow::from(report))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let rows = reader.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
    Ok(rows)
}

/// Raw per-replication metrics, one line per area and replication.
pub fn write_raw_csv(reports: &[ExperimentReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record([
        "cell_id",
        "replication_id",
        "area_id",
        "women_count",
        "attacks",
        "denounces",
        "protections",
        "convictions",
        "cases_per_100k",
        "denounces_per_100k",
    ])?;
    for report in reports {
        for m in &report.raw {
            writer.write_record([
                report.cell_id.clone(),
                m.replication_id.to_string(),
                m.area_id.clone(),
                m.women_count.to_string(),
                m.attacks.to_string(),
                m.denounces.to_string(),
                m.protections.to_string(),
                m.convictions.to_string(),
                m.cases_per_100k.to_string(),
                m.denounces_per_100k.to_string(),
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Builds the FeatureCollection for per-area reports. Areas whose profile has
/// no outline get a null geometry; their ids are returned as warnings.
pub fn area_feature_collection(reports: &[ExperimentReport], profiles: &[AreaProfile]) -> Result<(Value, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut features = Vec::with_capacity(reports.len());
    for report in reports {
        let profile = profiles.iter().find(|p| p.area_id == report.cell_id);
        let geometry = match profile.and_then(|p| p.geometry.as_deref()) {
            Some(wkt) => wkt_to_geojson(wkt).map_err(|reason| Error::validation("geometry", reason))?,
            None => {
                warnings.push(format!("area `{}` has no geometry", report.cell_id));
                Value::Null
            }
        };
        features.push(json!({
            "type": "Feature",
            "geometry": geometry,
            "properties": {
                "area_id": report.cell_id,
                "name": profile.map_or(report.cell_id.as_str(), |p| p.name.as_str()),
                "cases_per_100k_mean": report.cases.mean,
                "denounces_per_100k_mean": report.denounces.mean,
            },
        }));
    }
    Ok((json!({ "type": "FeatureCollection", "features": features }), warnings))
}

/// Writes [`area_feature_collection`] to `path` and returns its warnings.
pub fn write_area_geojson(
    reports: &[ExperimentReport],
    profiles: &[AreaProfile],
    path: impl AsRef<Path>,
) -> Result<Vec<String>> {
    let path = path.as_ref();
    let (collection, warnings) = area_feature_collection(reports, profiles)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(file, &collection)?;
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(rep: u32, area: &str, women: u64, attacks: u64, denounces: u64) -> RunMetrics {
        let mut m = RunMetrics::new(rep, area, women).unwrap();
        m.attacks = attacks;
        m.denounces = denounces;
        m.finalize();
        m
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.sd - 1.290_994_448_735_805_6).abs() < 1e-12);
        let s = Summary::of(&[7.0]);
        assert_eq!((s.mean, s.median, s.sd), (7.0, 7.0, 0.0));
        assert_eq!(Summary::of(&[3.0, 1.0, 2.0]).median, 2.0);
    }

    #[test]
    fn pooling_sums_areas_within_a_replication() {
        let raw = vec![
            metrics(0, "a", 1000, 10, 2),
            metrics(0, "b", 3000, 2, 1),
            metrics(1, "a", 1000, 0, 0),
            metrics(1, "b", 3000, 4, 0),
        ];
        let rates = pooled_rates(&raw);
        assert_eq!(rates, vec![(300.0, 75.0), (100.0, 0.0)]);
        let r = ExperimentReport::from_metrics("c", None, None, 1, raw.clone());
        assert_eq!(r.replications, 2);
        assert_eq!(r.cases.mean, 200.0);
        let areas = per_area_reports(&raw, 1);
        assert_eq!(areas.len(), 2);
        assert_eq!(areas[0].cell_id, "a");
        assert_eq!(areas[0].cases.mean, 500.0);
    }

    #[test]
    fn sweep_parameter_names() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        let err = "pct_cats".parse::<SweepParam>().unwrap_err().to_string();
        assert!(err.contains("pct_gun"));
    }

    #[test]
    fn sweep_spec_validation() {
        let spec = SweepSpec {
            parameter: SweepParam::PctGun,
            grid: vec![],
            base: SimParams::default(),
            profiles: vec![],
        };
        assert!(spec.validate().is_err());
        let spec = SweepSpec {
            grid: vec![0.5, 1.5],
            ..spec
        };
        assert!(spec.validate().is_err());
    }
}
