use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vida::config::Config;
use vida::experiments::{
    per_area_reports, per_region_reports, run_design, run_sweep, write_area_geojson, write_raw_csv,
    write_report_csv, ExperimentReport, SweepParam, SweepSpec,
};
use vida::population::{synthetic_profiles, write_area_profiles, ProfileSpec};
use vida::{load_area_profiles, run_batch, AreaProfile, Error, Result, SimParams};

#[derive(Debug, Parser)]
#[command(name = "vida", version, about = "Agent-based simulation of domestic violence in sampled households")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a batch of replications and write per-area and pooled reports.
    Run(CommonArgs),
    /// Run the 2x2 deterrence x social-distancing design.
    Design(CommonArgs),
    /// Sweep one modeller-controlled share over a grid of values.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to sweep: gender_stress_male, pct_employed, pct_gun or pct_addicted.
        #[arg(long)]
        parameter: String,
        /// Comma-separated grid values in [0, 1], e.g. 0.1,0.44,0.9.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
    /// Write a synthetic area-profile file.
    GenFixture(FixtureArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config with [params] and [run] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; the only source of randomness.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// Steps per replication.
    #[arg(long)]
    steps: Option<u32>,
    /// Enable or disable the deterrence system (true/false).
    #[arg(long)]
    deterrence: Option<bool>,
    /// Enable or disable social distancing (true/false).
    #[arg(long)]
    distancing: Option<bool>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "VIDA_THREADS")]
    threads: Option<usize>,
    /// Directory for report files [default: vida-out].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Area-profile CSV file.
    #[arg(long)]
    profiles: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of areas to generate.
    #[arg(long, default_value_t = 9)]
    areas: usize,
    /// Maximum relative variation of the aggregates between areas.
    #[arg(long, default_value_t = 0.15)]
    jitter: f64,
    /// Start from the Brasilia-like aggregates instead of the generic defaults.
    #[arg(long)]
    brasilia: bool,
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    families: Option<u32>,
    #[arg(long)]
    black_share: Option<f64>,
    #[arg(long)]
    age_mean: Option<f64>,
    #[arg(long)]
    age_sd: Option<f64>,
    #[arg(long)]
    schooling_mean: Option<f64>,
    #[arg(long)]
    schooling_sd: Option<f64>,
    #[arg(long)]
    income_mean: Option<f64>,
    /// Income standard deviation as a multiple of the mean.
    #[arg(long)]
    income_cv: Option<f64>,
    #[arg(long)]
    avg_children: Option<f64>,
}

struct Setup {
    params: SimParams,
    profiles: Vec<AreaProfile>,
    out_dir: PathBuf,
    threads: usize,
}

impl CommonArgs {
    fn resolve(&self) -> Result<Setup> {
        let config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let mut params = config.params;
        if let Some(seed) = self.seed {
            params.master_seed = seed;
        }
        if let Some(r) = self.replications {
            params.replications = r;
        }
        if let Some(s) = self.steps {
            params.steps_per_run = s;
        }
        if let Some(d) = self.deterrence {
            params.deterrence_enabled = d;
        }
        if let Some(d) = self.distancing {
            params.distancing_enabled = d;
        }
        params.validate()?;

        let profiles_path = self.profiles.clone().or(config.run.profiles).ok_or_else(|| {
            Error::validation("profiles", "no area-profile file: pass --profiles or set [run].profiles")
        })?;
        let profiles = load_area_profiles(&profiles_path)?;
        if profiles.is_empty() {
            return Err(Error::validation(
                "profiles",
                format!("{} contains no areas", profiles_path.display()),
            ));
        }
        Ok(Setup {
            params,
            profiles,
            out_dir: self
                .out_dir
                .clone()
                .or(config.run.out_dir)
                .unwrap_or_else(|| PathBuf::from("vida-out")),
            threads: self.threads.or(config.run.threads).unwrap_or(0),
        })
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::validation("threads", e.to_string()))?;
    pool.install(f)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_run(args: &CommonArgs) -> Result<()> {
    let setup = args.resolve()?;
    let params = &setup.params;
    let raw = in_pool(setup.threads, || run_batch(&setup.profiles, params))?;
    let seed = params.master_seed;
    let pooled = ExperimentReport::from_metrics("all", Some("pooled".into()), None, seed, raw.clone());
    let areas = per_area_reports(&raw, seed);
    let regions = per_region_reports(&raw, &setup.profiles, seed);

    create_dir(&setup.out_dir)?;
    let mut rows = vec![pooled.clone()];
    rows.extend(regions);
    rows.extend(areas.iter().cloned());
    write_report_csv(&rows, setup.out_dir.join("run_report.csv"))?;
    write_raw_csv(std::slice::from_ref(&pooled), setup.out_dir.join("run_raw.csv"))?;
    if setup.profiles.iter().any(|p| p.geometry.is_some()) {
        write_area_geojson(&areas, &setup.profiles, setup.out_dir.join("areas.geojson"))?;
    }
    println!(
        "mean cases/100k: {:.2}, mean denounces/100k: {:.2} ({} areas x {} replications)",
        pooled.cases.mean,
        pooled.denounces.mean,
        setup.profiles.len(),
        params.replications
    );
    Ok(())
}

fn cmd_design(args: &CommonArgs) -> Result<()> {
    let setup = args.resolve()?;
    let reports = in_pool(setup.threads, || run_design(&setup.profiles, &setup.params))?;
    create_dir(&setup.out_dir)?;
    write_report_csv(&reports, setup.out_dir.join("design_report.csv"))?;
    write_raw_csv(&reports, setup.out_dir.join("design_raw.csv"))?;
    for r in &reports {
        println!(
            "{}: cases/100k {:.2}, denounces/100k {:.2}",
            r.cell_id, r.cases.mean, r.denounces.mean
        );
    }
    Ok(())
}

fn cmd_sweep(args: &CommonArgs, parameter: &str, grid: &[f64]) -> Result<()> {
    let parameter: SweepParam = parameter.parse()?;
    let setup = args.resolve()?;
    let spec = SweepSpec {
        parameter,
        grid: grid.to_vec(),
        base: setup.params.clone(),
        profiles: setup.profiles.clone(),
    };
    spec.validate()?;
    let reports = in_pool(setup.threads, || run_sweep(&spec))?;
    create_dir(&setup.out_dir)?;
    write_report_csv(&reports, setup.out_dir.join(format!("sweep_{parameter}.csv")))?;
    write_raw_csv(&reports, setup.out_dir.join(format!("sweep_{parameter}_raw.csv")))?;
    for r in &reports {
        println!(
            "{}: cases/100k {:.2}, denounces/100k {:.2}",
            r.cell_id, r.cases.mean, r.denounces.mean
        );
    }
    Ok(())
}

fn cmd_gen_fixture(args: &FixtureArgs) -> Result<()> {
    let mut spec = if args.brasilia {
        ProfileSpec::brasilia_like()
    } else {
        ProfileSpec::default()
    };
    if let Some(r) = &args.region {
        spec.region_id = r.clone();
    }
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { spec.$field = v; })*
        };
    }
    set!(families, black_share, age_mean, age_sd, schooling_mean, schooling_sd, income_mean, income_cv, avg_children);
    if args.black_share.is_some() {
        spec.female_black_share = None;
    }
    let profiles = synthetic_profiles(&spec, args.areas, args.jitter, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_area_profiles(&args.out, &profiles)?;
    println!("wrote {} areas to {}", profiles.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Design(args) => cmd_design(args),
        Command::Sweep {
            common,
            parameter,
            grid,
        } => cmd_sweep(common, parameter, grid),
        Command::GenFixture(args) => cmd_gen_fixture(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
