//! Core data types shared by the simulator.
//!
//! Everything here is plain data. Constructors and `validate` methods enforce
//! the range invariants; the engine is the only code that mutates agents and
//! families once a population has been sampled.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, check_unit, Error, Result};

pub const MAX_SCHOOLING_YEARS: u8 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Male,
    Female,
}

/// Help-seeking cohort of the woman in a family, fixed at creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VictimGroup {
    NeverDenounces,
    DenouncesAfterFirst,
    DenouncesAfterThird,
}

impl VictimGroup {
    pub const ALL: [VictimGroup; 3] = [
        VictimGroup::NeverDenounces,
        VictimGroup::DenouncesAfterFirst,
        VictimGroup::DenouncesAfterThird,
    ];

    /// Number of attacks after which a victim in this group starts denouncing.
    pub fn denounce_threshold(self) -> Option<u32> {
        match self {
            VictimGroup::NeverDenounces => None,
            VictimGroup::DenouncesAfterFirst => Some(1),
            VictimGroup::DenouncesAfterThird => Some(3),
        }
    }

    /// Maps a uniform draw in `[0, 1)` onto one of the three groups with equal mass.
    pub fn from_unit(u: f64) -> Self {
        let idx = ((u * 3.0) as usize).min(2);
        Self::ALL[idx]
    }
}

/// One adult family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonAgent {
    pub id: u32,
    pub gender: Gender,
    pub age: u32,
    pub years_schooling: u8,
    pub is_black: bool,
    /// Income before normalization; volatility acts on this value.
    pub income_raw: f64,
    pub income_norm: f64,
    pub employed: bool,
    pub has_gun: bool,
    pub is_addicted: bool,
    pub base_stress: f64,
    /// Recomputed every step. May be negative after deterrence reductions.
    pub current_stress: f64,
    pub family_id: u32,
}

impl PersonAgent {
    pub fn validate(&self) -> Result<()> {
        if self.years_schooling > MAX_SCHOOLING_YEARS {
            return Err(Error::validation(
                "years_schooling",
                format!("{} is outside [0, 17]", self.years_schooling),
            ));
        }
        check_unit("income_norm", self.income_norm)?;
        check_non_negative("income_raw", self.income_raw)?;
        check_non_negative("base_stress", self.base_stress)?;
        Ok(())
    }
}

/// The abuser/victim household unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub id: u32,
    pub area_id: String,
    pub male_id: u32,
    pub female_id: u32,
    /// Children only enter the per-capita income figure.
    pub num_children: u32,
    pub household_income_norm: f64,
    pub income_pc_norm: f64,
    pub violence_history: u32,
    pub denounce_count: u32,
    pub protection_granted: bool,
    pub conviction: bool,
    pub victim_group: VictimGroup,
}

impl Family {
    pub fn size(&self) -> u32 {
        2 + self.num_children
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("household_income_norm", self.household_income_norm)?;
        check_unit("income_pc_norm", self.income_pc_norm)?;
        if self.male_id == self.female_id {
            return Err(Error::validation(
                "female_id",
                "male and female adults must be distinct agents",
            ));
        }
        if self.denounce_count > 0 && self.victim_group == VictimGroup::NeverDenounces {
            return Err(Error::validation(
                "denounce_count",
                "a never-denouncing victim cannot have denounces",
            ));
        }
        if self.conviction && !self.protection_granted {
            return Err(Error::validation(
                "conviction",
                "conviction requires a granted protective measure",
            ));
        }
        if self.protection_granted && self.denounce_count == 0 {
            return Err(Error::validation(
                "protection_granted",
                "protection requires at least one denounce",
            ));
        }
        Ok(())
    }
}

/// Every modeller-controlled knob of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub gender_stress_male: f64,
    pub gender_stress_female: f64,
    pub pct_employed: f64,
    pub pct_gun: f64,
    pub pct_addicted: f64,
    pub weight_high: f64,
    pub weight_medium: f64,
    pub divisor_constant: f64,
    pub model_scale: f64,
    pub home_term_no_work: f64,
    pub home_term_work: f64,
    pub low_schooling_threshold: u8,
    pub low_schooling_uplift: f64,
    pub race_uplift: f64,
    pub deterrence_enabled: bool,
    pub distancing_enabled: bool,
    /// Chance that a denounce reaches the deterrence system while distancing is in force.
    pub distancing_denounce_chance: f64,
    pub chance_protection: f64,
    pub chance_conviction: f64,
    pub steps_per_run: u32,
    pub replications: u32,
    pub employment_volatility: f64,
    pub income_volatility: f64,
    pub master_seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            gender_stress_male: 0.8,
            gender_stress_female: 0.2,
            pct_employed: 0.8,
            pct_gun: 0.1,
            pct_addicted: 0.1,
            weight_high: 10.0,
            weight_medium: 5.0,
            divisor_constant: 10.0,
            model_scale: 1000.0,
            home_term_no_work: 0.67,
            home_term_work: 0.34,
            low_schooling_threshold: 6,
            low_schooling_uplift: 0.60,
            race_uplift: 0.30,
            deterrence_enabled: true,
            distancing_enabled: false,
            distancing_denounce_chance: 0.67,
            chance_protection: 0.5,
            chance_conviction: 0.5,
            steps_per_run: 10,
            replications: 200,
            employment_volatility: 0.05,
            income_volatility: 0.05,
            master_seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("gender_stress_male", self.gender_stress_male)?;
        check_unit("gender_stress_female", self.gender_stress_female)?;
        check_unit("pct_employed", self.pct_employed)?;
        check_unit("pct_gun", self.pct_gun)?;
        check_unit("pct_addicted", self.pct_addicted)?;
        check_unit("distancing_denounce_chance", self.distancing_denounce_chance)?;
        check_unit("chance_protection", self.chance_protection)?;
        check_unit("chance_conviction", self.chance_conviction)?;
        check_unit("employment_volatility", self.employment_volatility)?;
        check_unit("income_volatility", self.income_volatility)?;
        check_positive("weight_high", self.weight_high)?;
        check_positive("weight_medium", self.weight_medium)?;
        check_positive("divisor_constant", self.divisor_constant)?;
        check_positive("model_scale", self.model_scale)?;
        check_non_negative("home_term_no_work", self.home_term_no_work)?;
        check_non_negative("home_term_work", self.home_term_work)?;
        check_non_negative("low_schooling_uplift", self.low_schooling_uplift)?;
        check_non_negative("race_uplift", self.race_uplift)?;
        if self.steps_per_run < 1 {
            return Err(Error::validation("steps_per_run", "must be >= 1"));
        }
        if self.replications < 1 {
            return Err(Error::validation("replications", "must be >= 1"));
        }
        Ok(())
    }

    pub fn gender_stress(&self, gender: Gender) -> f64 {
        match gender {
            Gender::Male => self.gender_stress_male,
            Gender::Female => self.gender_stress_female,
        }
    }
}

/// Aggregate demographics of one weighted area, the source for sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaProfile {
    pub area_id: String,
    pub region_id: String,
    pub name: String,
    pub num_families_sample: u32,
    pub pct_female_black: f64,
    pub pct_male_black: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub schooling_mean: f64,
    pub schooling_sd: f64,
    pub income_mean: f64,
    pub income_sd: f64,
    pub avg_children: f64,
    /// Well-known-text polygon, passed through to GeoJSON output.
    #[serde(default)]
    pub geometry: Option<String>,
}

impl AreaProfile {
    pub fn validate(&self) -> Result<()> {
        if self.area_id.trim().is_empty() {
            return Err(Error::validation("area_id", "must not be empty"));
        }
        if self.num_families_sample < 1 {
            return Err(Error::validation("num_families_sample", "must be >= 1"));
        }
        check_unit("pct_female_black", self.pct_female_black)?;
        check_unit("pct_male_black", self.pct_male_black)?;
        for (field, value) in [
            ("age_mean", self.age_mean),
            ("age_sd", self.age_sd),
            ("schooling_mean", self.schooling_mean),
            ("schooling_sd", self.schooling_sd),
            ("income_mean", self.income_mean),
            ("income_sd", self.income_sd),
            ("avg_children", self.avg_children),
        ] {
            check_non_negative(field, value)?;
        }
        Ok(())
    }
}

/// Counters of a single replication of one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub replication_id: u32,
    pub area_id: String,
    pub women_count: u64,
    pub attacks: u64,
    pub denounces: u64,
    pub protections: u64,
    pub convictions: u64,
    pub cases_per_100k: f64,
    pub denounces_per_100k: f64,
}

impl RunMetrics {
    pub fn new(replication_id: u32, area_id: impl Into<String>, women_count: u64) -> Result<Self> {
        if women_count < 1 {
            return Err(Error::validation("women_count", "must be >= 1"));
        }
        Ok(RunMetrics {
            replication_id,
            area_id: area_id.into(),
            women_count,
            attacks: 0,
            denounces: 0,
            protections: 0,
            convictions: 0,
            cases_per_100k: 0.0,
            denounces_per_100k: 0.0,
        })
    }

    /// Recomputes the per-100k rates from the counters.
    pub fn finalize(&mut self) {
        self.cases_per_100k = per_100k(self.attacks, self.women_count);
        self.denounces_per_100k = per_100k(self.denounces, self.women_count);
    }

    pub fn counters_ordered(&self) -> bool {
        self.convictions <= self.protections
            && self.protections <= self.denounces
            && self.denounces <= self.attacks
    }
}

pub fn per_100k(count: u64, women: u64) -> f64 {
    count as f64 * 100_000.0 / women as f64
}
