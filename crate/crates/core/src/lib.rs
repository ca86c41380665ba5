//! Agent-based simulation of domestic violence in sampled household
//! populations.
//!
//! Each family is a man (the potential abuser), a woman and optionally
//! children. Every step the man's indicator of stress is turned into an
//! attack probability; attacked women may denounce, which can lead to a
//! protective measure and a conviction, each lowering his future stress.
//! Experiments compare cells with and without the deterrence system and with
//! and without social distancing, and sweep the modeller-controlled shares.

pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod population;
pub mod rng;
pub mod stress;

pub use domain::{AreaProfile, Family, Gender, PersonAgent, RunMetrics, SimParams, VictimGroup};
pub use engine::{run_batch, run_batch_with_threads, run_replication};
pub use error::{Error, Result};
pub use experiments::{run_design, run_sweep, ExperimentReport, SweepParam, SweepSpec};
pub use population::{load_area_profiles, sample_population, synthetic_profile, PopulationSample, ProfileSpec};
pub use stress::{attack_probability, compute_stress, deterrence_reduction, StressBreakdown};
