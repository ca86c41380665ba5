#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use vida::{Family, Gender, PersonAgent, SimParams, VictimGroup};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Independent recomputation of the indicator of stress, row by row of the
/// component table: (added value, relevance multiplier), then the proportional
/// race uplift, then the deterrence rows for the abuser.
pub fn brute_force_stress(
    agent: &PersonAgent,
    spouse: &PersonAgent,
    family: &Family,
    params: &SimParams,
    addiction_draw: f64,
) -> f64 {
    let high = params.weight_high;
    let medium = params.weight_medium;
    let woman = if agent.gender == Gender::Female { agent } else { spouse };
    let is_male = agent.gender == Gender::Male;

    let schooling_value = {
        let v = 1.0 - agent.years_schooling as f64 / 10.0;
        if agent.years_schooling < 6 {
            v + v * 0.60
        } else {
            v
        }
    };
    let at_home = !agent.employed || params.distancing_enabled;
    let rows: Vec<(f64, f64)> = vec![
        (if is_male { params.gender_stress_male } else { params.gender_stress_female }, 1.0),
        (1.0 - agent.income_norm, high),
        (-family.household_income_norm, medium),
        (1.0 - family.income_pc_norm, medium),
        (schooling_value, high),
        (if agent.age >= 19 && agent.age <= 28 { 1.0 } else { 0.0 }, high),
        (if woman.employed { 1.0 } else { 0.0 }, medium),
        (if at_home { 0.67 } else { 0.34 }, medium),
        (if agent.has_gun { 1.0 } else { 0.0 }, high * high),
        (if agent.is_addicted { addiction_draw } else { 0.0 }, high),
        (family.violence_history as f64 / 10.0, high),
    ];
    let mut total: f64 = rows.iter().map(|(v, w)| v * w).sum();
    if woman.is_black {
        total += total * 0.30;
    }
    if is_male {
        let deterrence_rows = [
            (family.denounce_count as f64, medium),
            (if family.protection_granted { 1.0 } else { 0.0 }, high),
            (if family.conviction { 1.0 } else { 0.0 }, high),
        ];
        for (v, w) in deterrence_rows {
            total -= v * w;
        }
    }
    total
}

pub fn arb_person(id: u32, gender: Gender) -> impl Strategy<Value = PersonAgent> {
    (
        (0u32..90, 0u8..=17, any::<bool>(), 0.0..=1.0f64),
        (any::<bool>(), any::<bool>(), any::<bool>()),
    )
        .prop_map(move |((age, years_schooling, is_black, income_norm), (employed, has_gun, is_addicted))| {
            PersonAgent {
                id,
                gender,
                age,
                years_schooling,
                is_black,
                income_raw: income_norm * 1000.0,
                income_norm,
                employed,
                has_gun,
                is_addicted,
                base_stress: 0.0,
                current_stress: 0.0,
                family_id: 0,
            }
        })
}

pub fn arb_family() -> impl Strategy<Value = Family> {
    (
        0.0..=1.0f64,
        0.0..=1.0f64,
        0u32..12,
        0u32..5,
        0u8..3,
        0u32..4,
    )
        .prop_map(|(household, pc, history, denounces, ladder, children)| {
            let victim_group = if denounces == 0 {
                VictimGroup::NeverDenounces
            } else {
                VictimGroup::DenouncesAfterFirst
            };
            Family {
                id: 0,
                area_id: "t".into(),
                male_id: 0,
                female_id: 1,
                num_children: children,
                household_income_norm: household,
                income_pc_norm: pc,
                violence_history: history,
                denounce_count: denounces,
                protection_granted: denounces > 0 && ladder >= 1,
                conviction: denounces > 0 && ladder >= 2,
                victim_group,
            }
        })
}

pub fn arb_household() -> impl Strategy<Value = (PersonAgent, PersonAgent, Family, bool, f64)> {
    (
        arb_person(0, Gender::Male),
        arb_person(1, Gender::Female),
        arb_family(),
        any::<bool>(),
        0.0..=1.0f64,
    )
}

pub struct Trace {
    pub events: Vec<vida::engine::Event>,
    pub male_stress: Vec<f64>,
    pub metrics: vida::RunMetrics,
}

fn trace_adult(id: u32, gender: Gender, has_gun: bool) -> PersonAgent {
    PersonAgent {
        id,
        gender,
        age: 40,
        years_schooling: 10,
        is_black: false,
        income_raw: 1000.0,
        income_norm: 0.5,
        employed: false,
        has_gun,
        is_addicted: false,
        base_stress: 0.0,
        current_stress: 0.0,
        family_id: 0,
    }
}

/// One family, ten steps, every random draw scripted. Any draw the script
/// does not expect aborts the trace.
pub fn hand_trace() -> Trace {
    use vida::population::{Bounds, IncomeNormalization};
    use vida::rng::DrawKind;

    let params = SimParams {
        employment_volatility: 0.0,
        income_volatility: 0.0,
        deterrence_enabled: true,
        distancing_enabled: false,
        steps_per_run: 10,
        ..SimParams::default()
    };
    let family = Family {
        id: 0,
        area_id: "trace".into(),
        male_id: 0,
        female_id: 1,
        num_children: 0,
        household_income_norm: 0.5,
        income_pc_norm: 0.5,
        violence_history: 0,
        denounce_count: 0,
        protection_granted: false,
        conviction: false,
        victim_group: VictimGroup::DenouncesAfterFirst,
    };
    let unit = Bounds { min: 0.0, max: 1.0 };
    let mut world = vida::PopulationSample {
        area_id: "trace".into(),
        families: vec![family],
        agents: vec![
            trace_adult(0, Gender::Male, true),
            trace_adult(1, Gender::Female, false),
        ],
        income_normalization: IncomeNormalization {
            individual: unit,
            household: unit,
            per_capita: unit,
        },
    };

    let attack = [0.1, 0.106, 0.105, 0.0812, 0.0811, 0.5, 0.077, 0.0732, 0.0731, 0.069];
    let mut script = |kind: DrawKind, step: u32, subject: u32| -> f64 {
        assert_eq!(subject, 0, "unexpected subject {subject} for {kind:?}");
        match (kind, step) {
            (DrawKind::Attack, s) => attack[s as usize],
            (DrawKind::Protection, 0) => 0.7,
            (DrawKind::Protection, 2) => 0.2,
            (DrawKind::Conviction, 2) => 0.3,
            other => panic!("unscripted draw {other:?}"),
        }
    };
    let mut metrics = vida::RunMetrics::new(0, "trace", 1).unwrap();
    let mut events = Vec::new();
    let mut male_stress = Vec::new();
    for s in 0..params.steps_per_run {
        events.extend(vida::engine::step(&mut world, &params, &mut script, &mut metrics, s));
        male_stress.push(world.agents[0].current_stress);
    }
    metrics.finalize();
    Trace {
        events,
        male_stress,
        metrics,
    }
}

/// The trace worked out by hand. Base indicator of the man is
/// 0.8 + 5 - 2.5 + 2.5 + 3.35 + 100 = 109.15, plus his violence history,
/// minus 5 per denounce and 10 each for protection and conviction.
pub fn expected_trace() -> (Vec<(u32, &'static str)>, Vec<f64>, [u64; 4]) {
    let events = vec![
        (0, "A"),
        (0, "D"),
        (2, "A"),
        (2, "D"),
        (2, "P"),
        (2, "C"),
        (4, "A"),
        (4, "D"),
        (6, "A"),
        (6, "D"),
        (8, "A"),
        (8, "D"),
        (9, "A"),
        (9, "D"),
    ];
    let stress = vec![109.15, 105.15, 105.15, 81.15, 81.15, 77.15, 77.15, 73.15, 73.15, 69.15];
    (events, stress, [6, 6, 1, 1])
}

pub fn trace_codes(events: &[vida::engine::Event]) -> Vec<(u32, &'static str)> {
    use vida::engine::EventKind;
    events
        .iter()
        .map(|e| {
            let code = match e.kind {
                EventKind::Attack => "A",
                EventKind::Denounce => "D",
                EventKind::Protection => "P",
                EventKind::Conviction => "C",
            };
            (e.step, code)
        })
        .collect()
}

/// Drives a sampled world for `steps` steps and reports the first step at
/// which any counter or family invariant breaks.
pub fn ordering_stress_test(steps: u32) -> Result<vida::RunMetrics, String> {
    use vida::population::{sample_population, ProfileSpec};
    use vida::rng::{KeyedDraws, Stream};

    let profile = vida::synthetic_profile(&ProfileSpec {
        families: 300,
        ..ProfileSpec::brasilia_like()
    })
    .unwrap();
    let params = SimParams {
        pct_gun: 0.6,
        pct_addicted: 0.3,
        steps_per_run: steps,
        ..SimParams::default()
    };
    let root = Stream::new(77);
    let mut world = sample_population(&profile, &params, &root.derive(1)).unwrap();
    let mut draws = KeyedDraws::new(&root.derive(2));
    let mut metrics = vida::RunMetrics::new(0, profile.area_id.clone(), world.families.len() as u64).unwrap();
    for s in 0..steps {
        vida::engine::step(&mut world, &params, &mut draws, &mut metrics, s);
        if !metrics.counters_ordered() {
            return Err(format!("counters out of order after step {s}: {metrics:?}"));
        }
        for f in &world.families {
            f.validate().map_err(|e| format!("family {} after step {s}: {e}", f.id))?;
            if f.denounce_count > f.violence_history {
                return Err(format!("family {} denounced more than attacked", f.id));
            }
        }
    }
    metrics.finalize();
    Ok(metrics)
}
