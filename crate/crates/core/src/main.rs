use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use irs_anm::anm::{estimate_anm, AnmSettings};
use irs_anm::crb::{closed_form_single_crb, crb_values, fisher_matrix};
use irs_anm::harness::{
    export_detail_csv, export_summary_csv, run_sweep, write_csv, RcrbBasis, SweepFile, DEFAULT_SEED,
};
use irs_anm::music::{estimate_music, MusicConfig};
use irs_anm::scene::{synthesize_echo, MeasurementKind, SceneConfig, SceneFile};
use irs_anm::spectrum::DoaEstimate;

#[derive(Parser)]
#[command(name = "irs-anm", version, about = "DoA estimation for semi-passive IRS sensing")]
struct Cli {
    /// Noise seed for single runs, master seed override for sweeps.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one echo matrix Y and write it as (row, col, re, im).
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        noiseless: bool,
    },
    /// Estimate K directions from one synthesized echo.
    Estimate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        grid_step_deg: Option<f64>,
        #[arg(long)]
        noiseless: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-target CRBs from the Fisher matrix of the scene's schedule.
    Crb {
        #[arg(long)]
        scene: PathBuf,
        /// Also report the single-target closed form.
        #[arg(long)]
        closed_form: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo sweep over one scene parameter.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-trial records.
        #[arg(long)]
        detail: Option<PathBuf>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
        /// Run with 64 REs and 64 slots.
        #[arg(long)]
        full_scale: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Anm,
    Music,
}

fn load_scene(path: &Path) -> Result<(SceneFile, SceneConfig)> {
    let file = SceneFile::load(path)?;
    let scene = file.to_scene()?;
    Ok((file, scene))
}

fn simulate(path: &Path, out: &Path, noiseless: bool, seed: u64) -> Result<()> {
    let (file, scene) = load_scene(path)?;
    let d = file.measurement.build(scene.n_res, scene.n_slots);
    let echo = synthesize_echo(&scene, &d, seed, noiseless)?;
    let y = &echo.y;
    let rows = (0..y.ncols()).flat_map(|c| {
        (0..y.nrows()).map(move |r| {
            vec![r.to_string(), c.to_string(), y[(r, c)].re.to_string(), y[(r, c)].im.to_string()]
        })
    });
    write_csv(out, &["row", "col", "re", "im"], rows)?;
    Ok(())
}

fn estimate(
    path: &Path,
    method: MethodArg,
    k: usize,
    grid_step_deg: Option<f64>,
    noiseless: bool,
    out: &Path,
    seed: u64,
) -> Result<DoaEstimate> {
    let (file, scene) = load_scene(path)?;
    let d = file.measurement.build(scene.n_res, scene.n_slots);
    let echo = synthesize_echo(&scene, &d, seed, noiseless)?;
    let est = match method {
        MethodArg::Anm => {
            let mut settings = AnmSettings::default();
            if let Some(step) = grid_step_deg {
                settings.grid_step_deg = step;
            }
            let cfg = settings.resolve(scene.n_res)?;
            estimate_anm(&echo, &d, scene.irs_arrival_angle, k, &cfg)?
        }
        MethodArg::Music => {
            let mut cfg = MusicConfig::default();
            if let Some(step) = grid_step_deg {
                cfg.grid_step = step.to_radians();
            }
            estimate_music(&echo, k, &cfg)?
        }
    };
    let rows = est.angles.iter().zip(&est.peak_values).enumerate().map(|(i, (a, v))| {
        vec![
            est.method.label().to_string(),
            i.to_string(),
            a.to_degrees().to_string(),
            v.to_string(),
            est.degraded.to_string(),
            est.solver_iterations.map(|n| n.to_string()).unwrap_or_default(),
        ]
    });
    write_csv(
        out,
        &["estimator", "index", "angle_deg", "peak_value", "degraded", "solver_iters"],
        rows,
    )?;
    Ok(est)
}

fn crb(path: &Path, closed_form: bool, out: &Path, verbose: bool) -> Result<()> {
    let (file, scene) = load_scene(path)?;
    let closed = if closed_form {
        if scene.n_targets() != 1 {
            bail!(irs_anm::Error::Config("--closed-form needs a single-target scene".into()));
        }
        if file.measurement.kind != MeasurementKind::Dft || scene.n_slots != scene.n_res {
            eprintln!("warning: the closed form assumes D·Dᴴ = L·I (DFT schedule with L = N)");
        }
        Some(closed_form_single_crb(&scene, scene.n_slots)?)
    } else {
        None
    };
    let d = file.measurement.build(scene.n_res, scene.n_slots);
    let report = crb_values(&fisher_matrix(&scene, &d)?)?;
    if verbose {
        eprintln!("RCRB = {:.6e} deg", report.rcrb.to_degrees());
    }
    let deg2 = (180.0 / std::f64::consts::PI).powi(2);
    let rcrb_deg = report.rcrb.to_degrees();
    let rows = scene.targets.iter().zip(&report.crb_per_target).enumerate().map(|(i, (t, c))| {
        vec![
            i.to_string(),
            t.angle.to_degrees().to_string(),
            c.to_string(),
            (c * deg2).to_string(),
            rcrb_deg.to_string(),
            closed.map(|v| v.to_string()).unwrap_or_default(),
        ]
    });
    write_csv(
        out,
        &["target", "angle_deg", "crb_rad2", "crb_deg2", "rcrb_deg", "closed_form_rad2"],
        rows,
    )?;
    Ok(())
}

fn sweep(
    path: &Path,
    out: &Path,
    detail: Option<&Path>,
    jobs: Option<usize>,
    full_scale: bool,
    seed: Option<u64>,
    verbose: bool,
) -> Result<()> {
    let file = SweepFile::load(path)?;
    let mut spec = file.to_spec()?;
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    if full_scale {
        eprintln!("warning: full scale (64 REs, 64 slots) is much slower than the desk default");
        let reference = SceneConfig::full_scale();
        spec.base_scene.n_res = reference.n_res;
        spec.base_scene.n_slots = reference.n_slots;
        spec.validate()?;
    }
    let result = run_sweep(&spec, jobs)?;
    if result.rcrb_basis == RcrbBasis::Expected {
        eprintln!("note: rcrb_deg uses the expected covariance L·I of the random-phase schedule");
    }
    if verbose {
        for row in &result.summary {
            eprintln!(
                "{}={} {}: rmse={} rcrb={} failures={}/{}",
                row.axis.label(),
                row.axis_value,
                row.estimator,
                row.rmse_deg.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                row.rcrb_deg.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                row.failures,
                row.trials
            );
        }
    }
    export_summary_csv(&result.summary, out)?;
    if let Some(detail) = detail {
        export_detail_csv(&result.records, detail)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Simulate { scene, out, noiseless } => {
            simulate(&scene, &out, noiseless, seed).with_context(|| format!("simulate {}", scene.display()))
        }
        Command::Estimate {
            scene,
            method,
            k,
            grid_step_deg,
            noiseless,
            out,
        } => {
            let est = estimate(&scene, method, k, grid_step_deg, noiseless, &out, seed)
                .with_context(|| format!("estimate {}", scene.display()))?;
            if cli.verbose {
                let angles: Vec<String> = est.angles.iter().map(|a| format!("{:.4}", a.to_degrees())).collect();
                eprintln!("{}: [{}] deg{}", est.method, angles.join(", "), if est.degraded { " (degraded)" } else { "" });
            }
            Ok(())
        }
        Command::Crb { scene, closed_form, out } => {
            crb(&scene, closed_form, &out, cli.verbose).with_context(|| format!("crb {}", scene.display()))
        }
        Command::Sweep {
            spec,
            out,
            detail,
            jobs,
            full_scale,
        } => sweep(&spec, &out, detail.as_deref(), jobs, full_scale, cli.seed, cli.verbose)
            .with_context(|| format!("sweep {}", spec.display())),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<irs_anm::Error>() {
        Some(e) if !e.is_config() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
