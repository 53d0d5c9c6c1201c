use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dicke_core::config::Config;
use dicke_core::harness::{load_phase_map, render_phase_map, resume_sweep, run_sweep, save_phase_map, Palette};
use dicke_core::quantum::{compare, default_fock_cutoff, parse_initial_state, CompareSettings};
use dicke_core::stability::{trace_boundary, FixedPoint, FixedPointKind};
use dicke_core::units::{to_angular, to_khz};
use dicke_core::*;
use serde_json::json;

use crate::args::{parse_atom_numbers, Cli, Command, Couplings, Global, Initial, Kind, TableFormat};
use crate::Failure;

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    let cfg = match &cli.global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let g = &cli.global;
    match cli.command {
        Command::Calibrate => calibrate(g, &cfg),
        Command::Trace { couplings, initial, format } => trace(g, &cfg, &couplings, initial, format),
        Command::Classify { trajectory, couplings } => classify_cmd(g, &cfg, trajectory.as_deref(), &couplings),
        Command::Boundary { kind, ratios, tol_khz } => boundary(g, &cfg, kind, ratios, tol_khz),
        Command::Sweep { checkpoint, resume, timestamp } => sweep(g, &cfg, checkpoint, resume, timestamp),
        Command::Render { input, output, block } => render(&input, &output, block),
        Command::Quantum { couplings, n, n_max, initial_state } => {
            quantum(g, &cfg, &couplings, n, n_max, initial_state.as_deref())
        }
        Command::Compare { couplings, n, n_max, truncation_step } => {
            compare_cmd(g, &cfg, &couplings, &n, n_max, truncation_step)
        }
    }
}

fn output(g: &Global) -> Result<Box<dyn Write>, Failure> {
    Ok(match &g.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn finish(mut out: Box<dyn Write>) -> Outcome {
    out.flush()?;
    Ok(())
}

fn pool(g: &Global) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(g.workers as usize)
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start {} workers: {e}", g.workers)))
}

fn model(cfg: &Config, c: &Couplings) -> Result<ModelParams, Failure> {
    let mut m = cfg.model_params()?;
    if let Some(l) = c.lambda_plus {
        m.lambda_plus = to_angular(l)?;
    }
    if let Some(l) = c.lambda_minus {
        m.lambda_minus = to_angular(l)?;
    }
    m.validate()?;
    Ok(m)
}

fn seed(g: &Global, cfg: &Config) -> Option<u64> {
    g.seed.or(cfg.sweep.seed)
}

fn khz(omega: f64) -> f64 {
    to_khz(omega).unwrap_or(f64::NAN)
}

fn model_json(m: &ModelParams) -> serde_json::Value {
    json!({
        "omega_khz": khz(m.omega),
        "omega0_khz": khz(m.omega0),
        "lambda_plus_khz": khz(m.lambda_plus),
        "lambda_minus_khz": khz(m.lambda_minus),
        "kappa_khz": khz(m.kappa),
    })
}

fn calibrate(g: &Global, cfg: &Config) -> Outcome {
    let cal = dicke_core::calibrate(&cfg.physical_params()?)?;
    if !cal.detunings.valid {
        eprintln!("dicke: warning: |δ±| is not small against 2ω_z; the neglected Raman couplings may matter");
    }
    let doc = json!({
        "model": model_json(&cal.model),
        "omega_d_khz": khz(cal.omega_d),
        "delta_plus_khz": khz(cal.detunings.delta_plus),
        "delta_minus_khz": khz(cal.detunings.delta_minus),
        "raman_valid": cal.detunings.valid,
        "cooperativity": cal.cooperativity,
        "gamma_s_plus_per_s": cal.gamma_s_plus,
        "gamma_s_minus_per_s": cal.gamma_s_minus,
    });
    let mut out = output(g)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json value"))?;
    finish(out)
}

fn initial_state(g: &Global, cfg: &Config, initial: Initial) -> Result<SemiclassicalState, Failure> {
    Ok(match initial {
        Initial::Perturbed => perturbed_initial(cfg.integrator.epsilon, seed(g, cfg))?,
        Initial::Normal => SemiclassicalState::normal(),
        Initial::Inverted => SemiclassicalState::inverted(),
    })
}

fn trace(g: &Global, cfg: &Config, c: &Couplings, initial: Initial, format: TableFormat) -> Outcome {
    let m = model(cfg, c)?;
    let traj = integrate(&initial_state(g, cfg, initial)?, &m, &cfg.integration_settings()?)?;
    let mut out = output(g)?;
    match format {
        TableFormat::Csv => traj.write_table(&mut out)?,
        TableFormat::Json => traj.write_json(&mut out)?,
    }
    finish(out)
}

fn classify_cmd(g: &Global, cfg: &Config, trajectory: Option<&Path>, c: &Couplings) -> Outcome {
    let m = model(cfg, c)?;
    let traj = match trajectory {
        Some(path) => Trajectory::load_table(path, m)?,
        None => integrate(&initial_state(g, cfg, Initial::Perturbed)?, &m, &cfg.integration_settings()?)?,
    };
    let p = classify(&traj, &cfg.thresholds())?;
    let doc = json!({
        "label": p.label.as_str(),
        "mean_alpha_sq": p.mean_photon_proxy,
        "rel_std": p.rel_std,
        "w_final": p.w_final,
        "peak_freq_khz": p.peak_freq_khz,
        "peak_prominence": p.peak_prominence,
    });
    let mut out = output(g)?;
    writeln!(out, "{doc}")?;
    finish(out)
}

fn boundary(g: &Global, cfg: &Config, kind: Kind, ratios: Option<Vec<f64>>, tol_khz: f64) -> Outcome {
    let template = cfg.model_params()?.with_couplings(0.0, 0.0);
    let s = &cfg.sweep;
    let ratios = match ratios {
        Some(r) => r,
        None => dicke_core::config::linspace(s.ratio_min, s.ratio_max, s.ratio_steps)?,
    };
    let fp = FixedPoint::new(match kind {
        Kind::Normal => FixedPointKind::NormalTrivial,
        Kind::Inverted => FixedPointKind::InvertedTrivial,
    });
    let bracket = (to_angular(s.lambda_min_khz)?, to_angular(s.lambda_max_khz)?);
    let tol = to_angular(tol_khz)?;
    let curve = pool(g)?.install(|| trace_boundary(&fp, &template, &ratios, bracket, tol));
    let mut out = output(g)?;
    curve.write_table(&mut out)?;
    finish(out)
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn sweep(g: &Global, cfg: &Config, checkpoint: Option<PathBuf>, resume: Option<PathBuf>, timestamp: bool) -> Outcome {
    let out = g.out.as_ref().ok_or_else(|| Failure::Usage("sweep needs --out <map file>".into()))?;
    let mut grid = cfg.sweep_grid()?;
    if g.seed.is_some() {
        grid.seed = g.seed;
    }
    let opts = SweepOptions {
        workers: g.workers as usize,
        checkpoint,
        checkpoint_every: cfg.sweep.checkpoint_every.max(1),
        timestamp: timestamp.then(now),
    };
    let mut map = match &resume {
        Some(partial) => resume_sweep(partial, &grid, &opts)?,
        None => run_sweep(&grid, &opts)?,
    };
    if timestamp {
        map.provenance.finished_unix = Some(now());
    }
    save_phase_map(&map, out)?;
    let mut counts = [0usize; PhaseLabel::ALL.len()];
    for c in &map.cells {
        counts[PhaseLabel::ALL.iter().position(|&l| l == c.point.label).expect("known label")] += 1;
    }
    let summary: Vec<String> = PhaseLabel::ALL.iter().zip(counts).map(|(l, n)| format!("{l}={n}")).collect();
    eprintln!("dicke: {} cells: {}", map.cells.len(), summary.join(" "));
    Ok(())
}

fn render(input: &Path, output: &Path, block: u32) -> Outcome {
    let map = load_phase_map(input)?;
    render_phase_map(&map, output, &Palette::default(), block as usize)?;
    Ok(())
}

fn quantum(
    g: &Global,
    cfg: &Config,
    c: &Couplings,
    n: Option<u32>,
    n_max: Option<u32>,
    initial: Option<&Path>,
) -> Outcome {
    let m = model(cfg, c)?;
    let n_atoms = n.unwrap_or(cfg.quantum.n_atoms);
    let n_max = n_max.unwrap_or(if n.is_some() { default_fock_cutoff(n_atoms) } else { cfg.quantum.n_max });
    let spec = HilbertSpec::new(n_atoms, n_max)?;
    let rho0 = match initial {
        Some(path) => parse_initial_state(&std::fs::read_to_string(path)?, spec)?,
        None => DensityState::spin_up_vacuum(spec)?,
    };
    let series = evolve_density(&rho0, &m, &cfg.quantum_settings()?)?;
    let mut out = output(g)?;
    series.write_table(&mut out)?;
    finish(out)
}

fn compare_cmd(g: &Global, cfg: &Config, c: &Couplings, n: &str, n_max: Option<u32>, truncation_step: u32) -> Outcome {
    let m = model(cfg, c)?;
    let sizes = parse_atom_numbers(n)
        .map_err(Failure::Usage)?
        .into_iter()
        .map(|k| (k, n_max.unwrap_or_else(|| default_fock_cutoff(k))))
        .collect();
    let settings = CompareSettings {
        sizes,
        quantum: cfg.quantum_settings()?,
        semiclassical: cfg.integration_settings()?,
        truncation_step,
        ..Default::default()
    };
    let report = pool(g)?.install(|| compare(&m, &settings))?;
    let mut out = output(g)?;
    report.write_table(&mut out)?;
    finish(out)?;
    eprintln!("dicke: gap decreasing with N: {}", if report.gap_decreasing() { "yes" } else { "no" });
    Ok(())
}
