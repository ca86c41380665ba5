//! Area profiles and synthetic family populations.
//!
//! An area profile is a row of aggregate demographics. Sampling turns it into
//! `num_families_sample` two-adult families: ages, schooling and raw incomes
//! from truncated normals, children from a Poisson, and the binary traits from
//! Bernoulli draws. The three income figures (individual, household, per
//! capita) are min-max normalized within the sample.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{
    AreaProfile, Family, Gender, PersonAgent, SimParams, VictimGroup, MAX_SCHOOLING_YEARS,
};
use crate::error::{Error, Result};
use crate::geometry::{square_wkt, wkt_to_geojson};
use crate::rng::Stream;

pub const PROFILE_COLUMNS: [&str; 14] = [
    "area_id",
    "region_id",
    "name",
    "num_families_sample",
    "pct_female_black",
    "pct_male_black",
    "age_mean",
    "age_sd",
    "schooling_mean",
    "schooling_sd",
    "income_mean",
    "income_sd",
    "avg_children",
    "geometry",
];

const MIN_ADULT_AGE: f64 = 18.0;
const MAX_AGE: f64 = 100.0;

/// Loads area profiles from a comma-delimited file.
///
/// The header must name exactly the profile fields; `geometry` is optional and
/// holds a WKT polygon. Lines starting with `#` are comments.
pub fn load_area_profiles(path: impl AsRef<Path>) -> Result<Vec<AreaProfile>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);

    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let parse_err = |row: usize, column: &str, reason: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_owned(),
        reason,
    };
    for col in &header {
        if !PROFILE_COLUMNS.contains(&col.as_str()) {
            return Err(parse_err(1, col, "unknown column".into()));
        }
    }
    let index_of = |name: &str| header.iter().position(|h| h == name);
    let mut columns = Vec::with_capacity(PROFILE_COLUMNS.len());
    for name in PROFILE_COLUMNS {
        match index_of(name) {
            Some(i) => columns.push(Some(i)),
            None if name == "geometry" => columns.push(None),
            None => return Err(parse_err(1, name, "missing column".into())),
        }
    }

    let mut profiles = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let text = |col: usize| -> &str {
            columns[col].and_then(|i| record.get(i)).unwrap_or("")
        };
        let number = |col: usize| -> Result<f64> {
            let raw = text(col);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(row, PROFILE_COLUMNS[col], format!("`{raw}` is not a number")))
        };
        let families_raw = text(3);
        let num_families_sample = families_raw.parse::<u32>().map_err(|_| {
            parse_err(row, "num_families_sample", format!("`{families_raw}` is not a non-negative integer"))
        })?;
        let geometry = match text(13) {
            "" => None,
            wkt => {
                wkt_to_geojson(wkt).map_err(|reason| parse_err(row, "geometry", reason))?;
                Some(wkt.to_owned())
            }
        };
        let profile = AreaProfile {
            area_id: text(0).to_owned(),
            region_id: text(1).to_owned(),
            name: text(2).to_owned(),
            num_families_sample,
            pct_female_black: number(4)?,
            pct_male_black: number(5)?,
            age_mean: number(6)?,
            age_sd: number(7)?,
            schooling_mean: number(8)?,
            schooling_sd: number(9)?,
            income_mean: number(10)?,
            income_sd: number(11)?,
            avg_children: number(12)?,
            geometry,
        };
        profile.validate().map_err(|e| match e {
            Error::Validation { field, reason } => parse_err(row, &field, reason),
            other => other,
        })?;
        if !seen.insert(profile.area_id.clone()) {
            return Err(parse_err(row, "area_id", format!("duplicate area `{}`", profile.area_id)));
        }
        profiles.push(profile);
    }
    Ok(profiles)
}

/// Writes profiles in the format read by [`load_area_profiles`].
pub fn write_area_profiles(path: impl AsRef<Path>, profiles: &[AreaProfile]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(PROFILE_COLUMNS)?;
    for p in profiles {
        writer.write_record([
            p.area_id.clone(),
            p.region_id.clone(),
            p.name.clone(),
            p.num_families_sample.to_string(),
            p.pct_female_black.to_string(),
            p.pct_male_black.to_string(),
            p.age_mean.to_string(),
            p.age_sd.to_string(),
            p.schooling_mean.to_string(),
            p.schooling_sd.to_string(),
            p.income_mean.to_string(),
            p.income_sd.to_string(),
            p.avg_children.to_string(),
            p.geometry.clone().unwrap_or_default(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Observed `[min, max]` of a quantity, used for min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut b = Bounds {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for v in values {
            b.min = b.min.min(v);
            b.max = b.max.max(v);
        }
        b
    }

    /// Maps `x` onto `[0, 1]`. A degenerate range maps everything to 0.5.
    pub fn normalize(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.5;
        }
        ((x - self.min) / span).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeNormalization {
    pub individual: Bounds,
    pub household: Bounds,
    pub per_capita: Bounds,
}

impl IncomeNormalization {
    /// Recomputes every normalized income figure from the raw incomes.
    pub fn apply(&self, agents: &mut [PersonAgent], families: &mut [Family]) {
        for a in agents.iter_mut() {
            a.income_norm = self.individual.normalize(a.income_raw);
        }
        for f in families.iter_mut() {
            let household = agents[f.male_id as usize].income_raw + agents[f.female_id as usize].income_raw;
            f.household_income_norm = self.household.normalize(household);
            f.income_pc_norm = self.per_capita.normalize(household / f64::from(f.size()));
        }
    }
}

/// The sampled families of one area. Agent `i` has id `i`; family `k` owns
/// agents `2k` (man) and `2k + 1` (woman).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSample {
    pub area_id: String,
    pub families: Vec<Family>,
    pub agents: Vec<PersonAgent>,
    pub income_normalization: IncomeNormalization,
}

impl PopulationSample {
    pub fn validate(&self) -> Result<()> {
        for f in &self.families {
            f.validate()?;
            let male = self.agents.get(f.male_id as usize);
            let female = self.agents.get(f.female_id as usize);
            match (male, female) {
                (Some(m), Some(w))
                    if m.gender == Gender::Male
                        && w.gender == Gender::Female
                        && m.family_id == f.id
                        && w.family_id == f.id => {}
                _ => {
                    return Err(Error::validation(
                        "families",
                        format!("family {} does not have one man and one woman", f.id),
                    ))
                }
            }
        }
        for a in &self.agents {
            a.validate()?;
        }
        Ok(())
    }
}

/// Draws from a normal restricted to `[lo, hi]` by inverting the CDF.
/// Always consumes exactly one uniform.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    if sd <= 0.0 {
        return mean.clamp(lo, hi);
    }
    let std = Normal::standard();
    let a = std.cdf((lo - mean) / sd);
    let b = std.cdf((hi - mean) / sd);
    if b - a <= 1e-12 {
        // all mass beyond one bound
        return if mean < lo { lo } else { hi };
    }
    let p = (a + u * (b - a)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    (mean + sd * std.inverse_cdf(p)).clamp(lo, hi)
}

struct Adult {
    age: u32,
    schooling: u8,
    income: f64,
    black: bool,
    employed: bool,
    gun: bool,
    addicted: bool,
}

fn draw_adult(rng: &mut Stream, profile: &AreaProfile, params: &SimParams, pct_black: f64) -> Adult {
    let age = truncated_normal(rng, profile.age_mean, profile.age_sd, MIN_ADULT_AGE, MAX_AGE).round() as u32;
    let max_years = f64::from(MAX_SCHOOLING_YEARS);
    let schooling = truncated_normal(rng, profile.schooling_mean, profile.schooling_sd, -0.5, max_years + 0.5)
        .round()
        .clamp(0.0, max_years) as u8;
    let income = truncated_normal(rng, profile.income_mean, profile.income_sd, 0.0, f64::INFINITY);
    // one uniform per trait, compared against the threshold, so that changing a
    // percentage never shifts the draws of other traits
    let black = rng.next_f64() < pct_black;
    let employed = rng.next_f64() < params.pct_employed;
    let gun = rng.next_f64() < params.pct_gun;
    let addicted = rng.next_f64() < params.pct_addicted;
    Adult {
        age,
        schooling,
        income,
        black,
        employed,
        gun,
        addicted,
    }
}

fn agent_from(id: u32, gender: Gender, a: &Adult, params: &SimParams) -> PersonAgent {
    let base = params.gender_stress(gender);
    PersonAgent {
        id,
        gender,
        age: a.age,
        years_schooling: a.schooling,
        is_black: a.black,
        income_raw: a.income,
        income_norm: 0.5,
        employed: a.employed,
        has_gun: a.gun,
        is_addicted: a.addicted,
        base_stress: base,
        current_stress: base,
        family_id: id / 2,
    }
}

/// Samples the families of one area. Family `k` draws from `stream.derive(k)`.
pub fn sample_population(profile: &AreaProfile, params: &SimParams, stream: &Stream) -> Result<PopulationSample> {
    profile.validate()?;
    params.validate()?;
    let n = profile.num_families_sample as usize;
    let mut agents = Vec::with_capacity(2 * n);
    let mut families = Vec::with_capacity(n);
    for k in 0..n as u32 {
        let mut rng = stream.derive(u64::from(k));
        let man = draw_adult(&mut rng, profile, params, profile.pct_male_black);
        let woman = draw_adult(&mut rng, profile, params, profile.pct_female_black);
        let victim_group = VictimGroup::from_unit(rng.next_f64());
        let num_children = if profile.avg_children > 0.0 {
            let poisson = Poisson::new(profile.avg_children)
                .map_err(|e| Error::validation("avg_children", e.to_string()))?;
            poisson.sample(&mut rng) as u32
        } else {
            0
        };
        agents.push(agent_from(2 * k, Gender::Male, &man, params));
        agents.push(agent_from(2 * k + 1, Gender::Female, &woman, params));
        families.push(Family {
            id: k,
            area_id: profile.area_id.clone(),
            male_id: 2 * k,
            female_id: 2 * k + 1,
            num_children,
            household_income_norm: 0.5,
            income_pc_norm: 0.5,
            violence_history: 0,
            denounce_count: 0,
            protection_granted: false,
            conviction: false,
            victim_group,
        });
    }

    let household = |f: &Family| agents[f.male_id as usize].income_raw + agents[f.female_id as usize].income_raw;
    let normalization = IncomeNormalization {
        individual: Bounds::of(agents.iter().map(|a| a.income_raw)),
        household: Bounds::of(families.iter().map(household)),
        per_capita: Bounds::of(families.iter().map(|f| household(f) / f64::from(f.size()))),
    };
    normalization.apply(&mut agents, &mut families);

    Ok(PopulationSample {
        area_id: profile.area_id.clone(),
        families,
        agents,
        income_normalization: normalization,
    })
}

/// Shorthand description of an area, expanded by [`synthetic_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileSpec {
    pub area_id: String,
    pub region_id: String,
    pub name: Option<String>,
    pub families: u32,
    /// Share of black adults, used for both genders unless overridden.
    pub black_share: f64,
    pub female_black_share: Option<f64>,
    pub age_mean: f64,
    pub age_sd: f64,
    pub schooling_mean: f64,
    pub schooling_sd: f64,
    pub income_mean: f64,
    /// Income standard deviation as a multiple of the mean.
    pub income_cv: f64,
    pub avg_children: f64,
    /// Lower-left corner and side of a square outline, in degrees.
    pub cell: Option<(f64, f64, f64)>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec {
            area_id: "synthetic-0".into(),
            region_id: "synthetic".into(),
            name: None,
            families: 1000,
            black_share: 0.5,
            female_black_share: None,
            age_mean: 40.0,
            age_sd: 12.0,
            schooling_mean: 8.0,
            schooling_sd: 4.0,
            income_mean: 1500.0,
            income_cv: 1.0,
            avg_children: 1.2,
            cell: None,
        }
    }
}

impl ProfileSpec {
    /// Aggregates approximating the Federal District (Brasília) 2010 census;
    /// see `data/brasilia_like.csv` for the provenance notes.
    pub fn brasilia_like() -> Self {
        ProfileSpec {
            area_id: "5300108".into(),
            region_id: "RIDE-DF".into(),
            name: Some("Brasilia-like aggregate".into()),
            families: 2000,
            black_share: 0.57,
            female_black_share: Some(0.56),
            age_mean: 39.0,
            age_sd: 12.0,
            schooling_mean: 9.6,
            schooling_sd: 4.4,
            income_mean: 2400.0,
            income_cv: 1.1,
            avg_children: 1.2,
            cell: None,
        }
    }
}

/// Expands a shorthand spec into a validated profile.
pub fn synthetic_profile(spec: &ProfileSpec) -> Result<AreaProfile> {
    let profile = AreaProfile {
        area_id: spec.area_id.clone(),
        region_id: spec.region_id.clone(),
        name: spec.name.clone().unwrap_or_else(|| spec.area_id.clone()),
        num_families_sample: spec.families,
        pct_female_black: spec.female_black_share.unwrap_or(spec.black_share),
        pct_male_black: spec.black_share,
        age_mean: spec.age_mean,
        age_sd: spec.age_sd,
        schooling_mean: spec.schooling_mean,
        schooling_sd: spec.schooling_sd,
        income_mean: spec.income_mean,
        income_sd: spec.income_mean * spec.income_cv,
        avg_children: spec.avg_children,
        geometry: spec.cell.map(|(x, y, side)| square_wkt(x, y, side)),
    };
    if spec.income_cv < 0.0 {
        return Err(Error::validation("income_cv", "must be >= 0"));
    }
    profile.validate()?;
    Ok(profile)
}

/// A grid of `count` areas whose aggregates vary around `base` by up to
/// `±jitter` (relative), each with a square outline.
pub fn synthetic_profiles(base: &ProfileSpec, count: usize, jitter: f64, seed: u64) -> Result<Vec<AreaProfile>> {
    if !(0.0..1.0).contains(&jitter) {
        return Err(Error::validation("jitter", format!("{jitter} is outside [0, 1)")));
    }
    synthetic_profile(base)?;
    let root = Stream::new(seed);
    let side = 0.05;
    let columns = (count as f64).sqrt().ceil().max(1.0) as usize;
    let (x0, y0) = base.cell.map_or((-48.2, -16.0), |(x, y, _)| (x, y));
    (0..count)
        .map(|i| {
            let mut rng = root.derive(i as u64);
            let mut vary = |v: f64| round_to(v * (1.0 + jitter * (2.0 * rng.next_f64() - 1.0)), 3);
            let spec = ProfileSpec {
                area_id: format!("{}-{i:03}", base.region_id),
                name: Some(format!("{} area {i}", base.region_id)),
                black_share: vary(base.black_share).clamp(0.0, 1.0),
                female_black_share: base.female_black_share.map(|s| vary(s).clamp(0.0, 1.0)),
                age_mean: vary(base.age_mean),
                schooling_mean: vary(base.schooling_mean),
                income_mean: vary(base.income_mean),
                avg_children: vary(base.avg_children),
                cell: Some((
                    round_to(x0 + side * (i % columns) as f64, 6),
                    round_to(y0 + side * (i / columns) as f64, 6),
                    side,
                )),
                ..base.clone()
            };
            synthetic_profile(&spec)
        })
        .collect()
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (v * scale).round() / scale
}
