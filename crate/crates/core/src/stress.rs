//! The indicator of stress.
//!
//! An agent's indicator is an additive ledger of relevance-weighted terms
//! (income, schooling, age, work, firearms, substance use, violence history),
//! scaled proportionally when the family's woman is black, minus the absolute
//! reductions earned through the deterrence system. Dividing the abuser's
//! indicator by the model scale gives the per-step probability of an attack.
//!
//! Terms conditioned on the woman of the family (employment, race) are read
//! from the family's woman for both adults: for her own indicator they are her
//! attributes, for the abuser's indicator they are his spouse's.

use serde::{Deserialize, Serialize};

use crate::domain::{Family, Gender, PersonAgent, SimParams};
use crate::error::{Error, Result};

/// Per-term contributions of one indicator evaluation, already weighted.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressBreakdown {
    pub gender_base: f64,
    pub income_term: f64,
    pub household_income_term: f64,
    pub income_pc_term: f64,
    pub schooling_term: f64,
    pub age_term: f64,
    pub employment_term: f64,
    pub home_term: f64,
    pub firearm_term: f64,
    pub addiction_term: f64,
    pub history_term: f64,
    pub race_multiplier_applied: bool,
    pub deterrence_reduction: f64,
    pub total: f64,
}

impl StressBreakdown {
    /// Sum of the additive terms, before the race multiplier and deterrence.
    pub fn additive_sum(&self) -> f64 {
        self.gender_base
            + self.income_term
            + self.household_income_term
            + self.income_pc_term
            + self.schooling_term
            + self.age_term
            + self.employment_term
            + self.home_term
            + self.firearm_term
            + self.addiction_term
            + self.history_term
    }

    /// Rebuilds the total from the parts.
    pub fn recompose(&self, params: &SimParams) -> f64 {
        let multiplier = if self.race_multiplier_applied {
            1.0 + params.race_uplift
        } else {
            1.0
        };
        self.additive_sum() * multiplier - self.deterrence_reduction
    }
}

/// Evaluates the indicator of stress for `agent`, whose partner is `spouse`.
///
/// `addiction_draw` is the per-step random intensity of substance use and is
/// only consulted when the agent is addicted.
pub fn compute_stress(
    agent: &PersonAgent,
    spouse: &PersonAgent,
    family: &Family,
    params: &SimParams,
    addiction_draw: f64,
) -> Result<StressBreakdown> {
    if agent.family_id != family.id || spouse.family_id != family.id {
        return Err(Error::validation(
            "family_id",
            format!(
                "agents {} and {} do not both belong to family {}",
                agent.id, spouse.id, family.id
            ),
        ));
    }
    if agent.gender == spouse.gender {
        return Err(Error::validation("gender", "spouses must be of opposite gender"));
    }
    if !(0.0..=1.0).contains(&addiction_draw) {
        return Err(Error::validation(
            "addiction_draw",
            format!("{addiction_draw} is outside [0, 1]"),
        ));
    }
    agent.validate()?;
    Ok(stress_unchecked(agent, spouse, family, params, addiction_draw))
}

pub(crate) fn stress_unchecked(
    agent: &PersonAgent,
    spouse: &PersonAgent,
    family: &Family,
    params: &SimParams,
    addiction_draw: f64,
) -> StressBreakdown {
    let high = params.weight_high;
    let medium = params.weight_medium;
    let woman = match agent.gender {
        Gender::Female => agent,
        Gender::Male => spouse,
    };

    let mut schooling = 1.0 - f64::from(agent.years_schooling) / params.divisor_constant;
    if agent.years_schooling < params.low_schooling_threshold {
        schooling *= 1.0 + params.low_schooling_uplift;
    }
    let young = agent.age > 18 && agent.age < 29;
    let goes_out_to_work = agent.employed && !params.distancing_enabled;
    let home = if goes_out_to_work {
        params.home_term_work
    } else {
        params.home_term_no_work
    };

    let mut b = StressBreakdown {
        gender_base: params.gender_stress(agent.gender),
        income_term: high * (1.0 - agent.income_norm),
        household_income_term: medium * -family.household_income_norm,
        income_pc_term: medium * (1.0 - family.income_pc_norm),
        schooling_term: high * schooling,
        age_term: if young { high } else { 0.0 },
        employment_term: if woman.employed { medium } else { 0.0 },
        home_term: medium * home,
        firearm_term: if agent.has_gun { high * high } else { 0.0 },
        addiction_term: if agent.is_addicted {
            high * addiction_draw
        } else {
            0.0
        },
        history_term: high * (f64::from(family.violence_history) / params.divisor_constant),
        race_multiplier_applied: woman.is_black,
        deterrence_reduction: match agent.gender {
            Gender::Male => deterrence_reduction(family, params),
            Gender::Female => 0.0,
        },
        total: 0.0,
    };
    b.total = b.recompose(params);
    b
}

/// Stress removed from the abuser by the deterrence events of his family.
pub fn deterrence_reduction(family: &Family, params: &SimParams) -> f64 {
    let mut reduction = params.weight_medium * f64::from(family.denounce_count);
    if family.protection_granted {
        reduction += params.weight_high;
    }
    if family.conviction {
        reduction += params.weight_high;
    }
    reduction
}

/// Per-step attack probability, `stress / model_scale` clamped to `[0, 1]`.
pub fn attack_probability(stress_total: f64, params: &SimParams) -> f64 {
    let p = stress_total / params.model_scale;
    if p.is_nan() {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}
