//! Replication engine.
//!
//! A step runs, in order: stress update for every adult, the violence trigger
//! for every family, the deterrence process for the families attacked in this
//! step, and finally employment and income volatility. Replications own their
//! population and draws, so a batch is a plain parallel map over
//! `(profile, replication)` indices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{AreaProfile, Family, RunMetrics, SimParams};
use crate::error::{Error, Result};
use crate::population::{sample_population, PopulationSample};
use crate::rng::{DrawKind, DrawSource, KeyedDraws, RngPlan};
use crate::stress::{attack_probability, stress_unchecked};

const POPULATION_LABEL: u64 = 1;
const DYNAMICS_LABEL: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Attack,
    Denounce,
    Protection,
    Conviction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: u32,
    pub family_id: u32,
    pub kind: EventKind,
}

/// Advances the world by one step and returns the events it produced.
pub fn step<D: DrawSource + ?Sized>(
    world: &mut PopulationSample,
    params: &SimParams,
    draws: &mut D,
    metrics: &mut RunMetrics,
    step_index: u32,
) -> Vec<Event> {
    let mut events = Vec::new();

    for family in &world.families {
        for (agent_id, spouse_id) in [
            (family.male_id, family.female_id),
            (family.female_id, family.male_id),
        ] {
            let agent = &world.agents[agent_id as usize];
            let addiction_draw = if agent.is_addicted {
                draws.draw(DrawKind::Addiction, step_index, agent_id)
            } else {
                0.0
            };
            let stress = stress_unchecked(
                agent,
                &world.agents[spouse_id as usize],
                family,
                params,
                addiction_draw,
            );
            world.agents[agent_id as usize].current_stress = stress.total;
        }
    }

    let mut attacked = Vec::new();
    for (idx, family) in world.families.iter_mut().enumerate() {
        let p = attack_probability(world.agents[family.male_id as usize].current_stress, params);
        if draws.draw(DrawKind::Attack, step_index, family.id) < p {
            family.violence_history += 1;
            metrics.attacks += 1;
            events.push(Event {
                step: step_index,
                family_id: family.id,
                kind: EventKind::Attack,
            });
            attacked.push(idx);
        }
    }

    if params.deterrence_enabled {
        for idx in attacked {
            deterrence_process(
                &mut world.families[idx],
                params,
                draws,
                metrics,
                step_index,
                &mut events,
            );
        }
    }

    apply_volatility(world, params, draws, step_index);
    events
}

/// Help-seeking of a victim who was attacked in the current step.
pub fn deterrence_process<D: DrawSource + ?Sized>(
    family: &mut Family,
    params: &SimParams,
    draws: &mut D,
    metrics: &mut RunMetrics,
    step_index: u32,
    events: &mut Vec<Event>,
) {
    let Some(threshold) = family.victim_group.denounce_threshold() else {
        return;
    };
    if family.violence_history < threshold {
        return;
    }
    if params.distancing_enabled
        && draws.draw(DrawKind::DenounceAccess, step_index, family.id) >= params.distancing_denounce_chance
    {
        return;
    }
    let mut push = |kind| {
        events.push(Event {
            step: step_index,
            family_id: family.id,
            kind,
        })
    };

    family.denounce_count += 1;
    metrics.denounces += 1;
    push(EventKind::Denounce);

    if family.protection_granted {
        return;
    }
    if draws.draw(DrawKind::Protection, step_index, family.id) < params.chance_protection {
        family.protection_granted = true;
        metrics.protections += 1;
        push(EventKind::Protection);
        if !family.conviction
            && draws.draw(DrawKind::Conviction, step_index, family.id) < params.chance_conviction
        {
            family.conviction = true;
            metrics.convictions += 1;
            push(EventKind::Conviction);
        }
    }
}

/// Neutral employment and income noise applied at the end of a step.
pub fn apply_volatility<D: DrawSource + ?Sized>(
    world: &mut PopulationSample,
    params: &SimParams,
    draws: &mut D,
    step_index: u32,
) {
    if params.employment_volatility == 0.0 && params.income_volatility == 0.0 {
        return;
    }
    for agent in &mut world.agents {
        if draws.draw(DrawKind::EmploymentFlip, step_index, agent.id) < params.employment_volatility {
            agent.employed = !agent.employed;
        }
        if params.income_volatility > 0.0 {
            let u = draws.draw(DrawKind::IncomeJitter, step_index, agent.id);
            let eps = params.income_volatility * (2.0 * u - 1.0);
            agent.income_raw *= 1.0 + eps;
        }
    }
    let normalization = world.income_normalization;
    normalization.apply(&mut world.agents, &mut world.families);
}

/// Runs `params.steps_per_run` steps over an already sampled world.
pub fn simulate<D: DrawSource + ?Sized>(
    world: &mut PopulationSample,
    params: &SimParams,
    draws: &mut D,
    metrics: &mut RunMetrics,
) -> Vec<Event> {
    let mut events = Vec::new();
    for s in 0..params.steps_per_run {
        events.extend(step(world, params, draws, metrics, s));
    }
    metrics.finalize();
    events
}

/// One independent replication: fresh population, derived seed, full run.
pub fn run_replication(profile: &AreaProfile, params: &SimParams, replication_id: u32) -> Result<RunMetrics> {
    params.validate()?;
    let root = RngPlan::new(params.master_seed).area_stream(replication_id, &profile.area_id);
    let mut world = sample_population(profile, params, &root.derive(POPULATION_LABEL))?;
    let mut draws = KeyedDraws::new(&root.derive(DYNAMICS_LABEL));
    let mut metrics = RunMetrics::new(replication_id, profile.area_id.clone(), world.families.len() as u64)?;
    simulate(&mut world, params, &mut draws, &mut metrics);
    Ok(metrics)
}

/// All replications of all profiles, profile-major, on the current rayon pool.
///
/// Output is identical to a sequential loop regardless of thread count.
pub fn run_batch(profiles: &[AreaProfile], params: &SimParams) -> Result<Vec<RunMetrics>> {
    params.validate()?;
    let reps = params.replications as usize;
    (0..profiles.len() * reps)
        .into_par_iter()
        .map(|i| {
            let profile = &profiles[i / reps];
            let replication = (i % reps) as u32;
            run_replication(profile, params, replication).map_err(|e| Error::Replication {
                area_id: profile.area_id.clone(),
                replication,
                source: Box::new(e),
            })
        })
        .collect()
}

/// [`run_batch`] on a dedicated pool of `threads` workers (0 = machine default).
pub fn run_batch_with_threads(profiles: &[AreaProfile], params: &SimParams, threads: usize) -> Result<Vec<RunMetrics>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::validation("threads", e.to_string()))?;
    pool.install(|| run_batch(profiles, params))
}

/// Sequential reference for [`run_batch`].
pub fn run_batch_sequential(profiles: &[AreaProfile], params: &SimParams) -> Result<Vec<RunMetrics>> {
    params.validate()?;
    let mut out = Vec::with_capacity(profiles.len() * params.replications as usize);
    for profile in profiles {
        for r in 0..params.replications {
            out.push(run_replication(profile, params, r)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::VictimGroup;
    use crate::population::{synthetic_profile, ProfileSpec};
    use crate::rng::Stream;

    fn world(n: u32) -> PopulationSample {
        let profile = AreaProfile {
            num_families_sample: n,
            ..synthetic_profile(&ProfileSpec::default()).unwrap()
        };
        sample_population(&profile, &SimParams::default(), &Stream::new(4)).unwrap()
    }

    fn metrics(w: &PopulationSample) -> RunMetrics {
        RunMetrics::new(0, "a", w.families.len() as u64).unwrap()
    }

    fn family(group: VictimGroup, history: u32) -> Family {
        Family {
            id: 0,
            area_id: "a".into(),
            male_id: 0,
            female_id: 1,
            num_children: 0,
            household_income_norm: 0.5,
            income_pc_norm: 0.5,
            violence_history: history,
            denounce_count: 0,
            protection_granted: false,
            conviction: false,
            victim_group: group,
        }
    }

    #[test]
    fn zero_probability_means_no_attacks() {
        let mut w = world(200);
        let params = SimParams {
            model_scale: 1e300,
            ..SimParams::default()
        };
        let mut m = metrics(&w);
        simulate(&mut w, &params, &mut KeyedDraws::new(&Stream::new(1)), &mut m);
        assert_eq!(m.attacks, 0);
    }

    #[test]
    fn certain_attack_hits_every_family() {
        let mut w = world(150);
        for a in &mut w.agents {
            a.has_gun = true;
        }
        let params = SimParams {
            model_scale: 1e-3,
            steps_per_run: 1,
            ..SimParams::default()
        };
        let mut m = metrics(&w);
        simulate(&mut w, &params, &mut KeyedDraws::new(&Stream::new(1)), &mut m);
        assert_eq!(m.attacks, 150);
    }

    #[test]
    fn never_denounces_changes_nothing() {
        let params = SimParams::default();
        let mut f = family(VictimGroup::NeverDenounces, 9);
        let mut m = RunMetrics::new(0, "a", 1).unwrap();
        let mut events = Vec::new();
        deterrence_process(&mut f, &params, &mut |_, _, _| 0.0, &mut m, 0, &mut events);
        assert_eq!(f, family(VictimGroup::NeverDenounces, 9));
        assert!(events.is_empty());
        assert_eq!(m.denounces, 0);
    }

    #[test]
    fn third_event_group_waits() {
        let params = SimParams::default();
        let mut f = family(VictimGroup::DenouncesAfterThird, 2);
        let mut m = RunMetrics::new(0, "a", 1).unwrap();
        deterrence_process(&mut f, &params, &mut |_, _, _| 0.0, &mut m, 0, &mut Vec::new());
        assert_eq!(f.denounce_count, 0);
        f.violence_history = 3;
        deterrence_process(&mut f, &params, &mut |_, _, _| 0.0, &mut m, 0, &mut Vec::new());
        assert_eq!(f.denounce_count, 1);
    }

    #[test]
    fn full_ladder_with_forced_draws() {
        let params = SimParams::default();
        let mut f = family(VictimGroup::DenouncesAfterFirst, 1);
        let mut m = RunMetrics::new(0, "a", 1).unwrap();
        let mut events = Vec::new();
        deterrence_process(&mut f, &params, &mut |_, _, _| 0.1, &mut m, 0, &mut events);
        assert_eq!(f.denounce_count, 1);
        assert!(f.protection_granted && f.conviction);
        assert_eq!((m.denounces, m.protections, m.convictions), (1, 1, 1));
        let kinds: Vec<_> = events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::Denounce, EventKind::Protection, EventKind::Conviction]);
        f.validate().unwrap();
    }

    #[test]
    fn failed_protection_blocks_conviction() {
        let params = SimParams::default();
        let mut f = family(VictimGroup::DenouncesAfterFirst, 1);
        let mut m = RunMetrics::new(0, "a", 1).unwrap();
        let mut draw = |kind: DrawKind, _, _| if kind == DrawKind::Protection { 0.9 } else { 0.0 };
        deterrence_process(&mut f, &params, &mut draw, &mut m, 0, &mut Vec::new());
        assert_eq!(f.denounce_count, 1);
        assert!(!f.protection_granted && !f.conviction);
    }

    #[test]
    fn distancing_can_block_a_denounce() {
        let params = SimParams {
            distancing_enabled: true,
            ..SimParams::default()
        };
        let mut f = family(VictimGroup::DenouncesAfterFirst, 1);
        let mut m = RunMetrics::new(0, "a", 1).unwrap();
        let mut draw = |kind: DrawKind, _, _| if kind == DrawKind::DenounceAccess { 0.99 } else { 0.0 };
        deterrence_process(&mut f, &params, &mut draw, &mut m, 0, &mut Vec::new());
        assert_eq!(f.denounce_count, 0);
        deterrence_process(&mut f, &params, &mut |_, _, _| 0.0, &mut m, 0, &mut Vec::new());
        assert_eq!(f.denounce_count, 1);
    }

    #[test]
    fn volatility_identity_and_certainty() {
        let mut w = world(100);
        let before = w.clone();
        let still = SimParams {
            employment_volatility: 0.0,
            income_volatility: 0.0,
            ..SimParams::default()
        };
        apply_volatility(&mut w, &still, &mut KeyedDraws::new(&Stream::new(2)), 0);
        assert_eq!(w, before);

        let flip = SimParams {
            employment_volatility: 1.0,
            income_volatility: 0.0,
            ..SimParams::default()
        };
        apply_volatility(&mut w, &flip, &mut KeyedDraws::new(&Stream::new(2)), 0);
        for (a, b) in w.agents.iter().zip(&before.agents) {
            assert_eq!(a.employed, !b.employed);
            assert_eq!(a.income_raw, b.income_raw);
        }
    }

    #[test]
    fn income_noise_is_neutral() {
        let mut w = world(5000);
        let before: Vec<f64> = w.agents.iter().map(|a| a.income_raw).collect();
        let params = SimParams {
            employment_volatility: 0.0,
            income_volatility: 0.1,
            ..SimParams::default()
        };
        apply_volatility(&mut w, &params, &mut KeyedDraws::new(&Stream::new(9)), 0);
        let n = before.len() as f64;
        let mean_change: f64 = w
            .agents
            .iter()
            .zip(&before)
            .filter(|(_, &b)| b > 0.0)
            .map(|(a, &b)| a.income_raw / b - 1.0)
            .sum::<f64>()
            / n;
        assert!(mean_change.abs() < 0.005, "mean relative change {mean_change}");
        assert!(w.agents.iter().all(|a| (0.0..=1.0).contains(&a.income_norm)));
    }

    #[test]
    fn replication_is_deterministic() {
        let profile = synthetic_profile(&ProfileSpec {
            families: 300,
            ..ProfileSpec::default()
        })
        .unwrap();
        let params = SimParams {
            master_seed: 77,
            ..SimParams::default()
        };
        let a = run_replication(&profile, &params, 5).unwrap();
        let b = run_replication(&profile, &params, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.counters_ordered());
    }

    #[test]
    fn batch_shape_and_errors() {
        let profiles: Vec<_> = (0..3)
            .map(|i| {
                synthetic_profile(&ProfileSpec {
                    area_id: format!("a{i}"),
                    families: 50,
                    ..ProfileSpec::default()
                })
                .unwrap()
            })
            .collect();
        let params = SimParams {
            replications: 1,
            ..SimParams::default()
        };
        assert_eq!(run_batch(&profiles, &params).unwrap().len(), 3);

        let mut broken = profiles.clone();
        broken[1].num_families_sample = 0;
        match run_batch(&broken, &params) {
            Err(Error::Replication { area_id, .. }) => assert_eq!(area_id, "a1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
