//! `levent`: single points, sweeps, figure presets, feasibility estimates and
//! oracle checks for the two-nanoparticle entanglement model.
//!
//! Exit codes: 0 success, 1 some sweep rows failed, 2 configuration error,
//! 3 solver error.

mod args;
mod plot;

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use levent_core::config::KHZ;
use levent_core::floquet::{convergence_scan, solve_floquet_steady_state, CONVERGENCE_TOL};
use levent_core::lyapunov::residual;
use levent_core::oracle::periodic_initial_state;
use levent_core::sweep::{geometric_grid, linear_grid, read_csv, run_sweeps, write_csv, SweepSpec};
use levent_core::system::spectral_abscissa;
use levent_core::{
    integrate_lyapunov_ode, monte_carlo_covariance, run_point, solve_steady_state, stability_check, CovarianceMatrix,
    Error, FeasibilityInputs, SweepRow,
};
use nalgebra::DMatrix;

use args::{Cli, Command, FeasibilityArgs, OracleArgs, PlotArgs, PointArgs, PresetArgs, SweepArgs};

/// Largest number of Monte Carlo steps summed over trajectories.
const MC_STEP_BUDGET: f64 = 2e9;

/// Largest number of ODE steps.
const ODE_STEP_BUDGET: f64 = 5e7;

/// Agreement thresholds of `oracle-check`.
const MC_Z_MAX: f64 = 3.0;
const ODE_MATCH: f64 = 1e-3;

enum Status {
    Ok,
    PartialFailure,
}

/// A disagreement found by `oracle-check`.
#[derive(Debug)]
struct Mismatch(String);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Mismatch {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Point(a) => point(a),
        Command::Sweep(a) => sweep(a),
        Command::Preset(a) => preset(a),
        Command::Feasibility(a) => feasibility(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::Plot(a) => plot_csv(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::PartialFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Mismatch>().is_some() {
        return 3;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::Config(_)
            | Error::Parse(_)
            | Error::InvalidParams(_)
            | Error::UnsupportedVariant(_)
            | Error::Io(_)
            | Error::Csv(_),
        ) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn point(a: PointArgs) -> anyhow::Result<Status> {
    let config = a.model.config()?;
    let params = config.params()?;
    let variant = config.variant();
    let out = run_point(variant, &params, config.truncation())?;
    let r = &out.report;
    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
    println!("variant         {variant}");
    println!("stable          {}", r.stable);
    println!("log_negativity  {}", show(r.log_negativity));
    println!("nu_min          {}", show(r.nu_min));
    println!("epr_variance    {}", show(r.epr_variance));
    println!("nrf             {}", show(r.nrf));
    println!("purity          {}", show(r.purity));
    println!("mean_n1         {}", show(r.mean_phonons.map(|p| p.0)));
    println!("mean_n2         {}", show(r.mean_phonons.map(|p| p.1)));
    println!("k_used          {}", out.k_used.map_or("-".into(), |k| k.to_string()));
    println!("residual        {}", show(out.residual));
    if a.covariance {
        if let Some(v) = &out.covariance {
            let mech = variant.build_drift(&params)?.mechanical_modes()?;
            print!("{}", v.marginal(&mech)?.to_text());
        }
    }
    if let Some(path) = a.csv {
        let row = SweepRow::new(variant.name(), "point", 0.0, Ok(out));
        write_rows(&[row], Some(&path))?;
    }
    Ok(Status::Ok)
}

fn sweep(a: SweepArgs) -> anyhow::Result<Status> {
    let config = a.model.config()?;
    let grid = match (&a.values, a.from, a.to) {
        (Some(v), _, _) => v.clone(),
        (None, Some(from), Some(to)) if a.geometric => {
            if !(from > 0.0 && to > 0.0) {
                return Err(Error::Config("a geometric grid needs positive end points".into()).into());
            }
            geometric_grid(from, to, a.points)
        }
        (None, Some(from), Some(to)) => linear_grid(from, to, a.points),
        _ => return Err(Error::Config("give either --from/--to or --values".into()).into()),
    };
    let variant = config.variant();
    let spec = SweepSpec {
        series: a.series.unwrap_or_else(|| variant.name().to_string()),
        variant,
        parameter: a.parameter,
        grid,
        fixed: config.rates()?,
        truncation: config.truncation(),
    };
    let rows = run_sweeps(&[spec])?;
    finish(&rows, a.output.as_deref(), a.plot.as_deref(), plot::DEFAULT_PANELS)
}

fn preset(a: PresetArgs) -> anyhow::Result<Status> {
    let rows = run_sweeps(&a.preset.specs(a.truncation))?;
    finish(&rows, a.output.as_deref(), a.plot.as_deref(), a.preset.panels())
}

fn finish(rows: &[SweepRow], csv: Option<&Path>, svg: Option<&Path>, panels: &[&str]) -> anyhow::Result<Status> {
    write_rows(rows, csv)?;
    if let Some(svg) = svg {
        plot::plot_rows(rows, panels, svg)?;
    }
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        log::warn!("{failed} of {} rows failed", rows.len());
        Ok(Status::PartialFailure)
    } else {
        Ok(Status::Ok)
    }
}

fn write_rows(rows: &[SweepRow], path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(Error::Io)
                .with_context(|| p.display().to_string())?;
            write_csv(rows, io::BufWriter::new(file))?;
        }
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn feasibility(a: FeasibilityArgs) -> anyhow::Result<Status> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let inputs = FeasibilityInputs {
        temperature: a.temperature,
        mechanical_frequency: a.omega_khz * KHZ,
        g: two_pi * a.g_hz,
        n_phot: a.n_phot,
        kappa: two_pi * a.kappa_khz * 1e3,
        s_phidot: a.s_phidot,
        power: a.power,
        waist: a.waist_um * 1e-6,
    };
    let r = inputs.evaluate()?;
    println!("thermal_occupancy    {:.4e}", r.thermal_occupancy);
    println!("phase_noise_heating  {:.4e} Hz", r.phase_noise_heating);
    println!("beam_intensity       {:.4e} W/cm^2", r.tweezer_intensity);
    Ok(Status::Ok)
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn oracle_check(a: OracleArgs) -> anyhow::Result<Status> {
    let config = a.model.config()?;
    let params = config.params()?;
    let variant = config.variant();
    let m = variant.build_drift(&params)?;
    let n = variant.build_diffusion(&params);
    let stability = stability_check(&m);
    if !stability.stable {
        return Err(Error::NoSteadyState {
            abscissa: stability.abscissa,
        }
        .into());
    }
    let mut out = io::stdout().lock();
    let mut problems = Vec::new();

    if m.is_constant() {
        let v = solve_steady_state(&m, &n)?;
        let res = residual(m.constant(), v.matrix(), n.matrix())?;
        writeln!(out, "lyapunov residual      {:.3e}", res.relative)?;
        let rate = -spectral_abscissa(m.constant());
        let t_end = a.t_end.unwrap_or(12.0 / rate);
        let dt = a.dt.unwrap_or(0.01 / m.norm_bound());
        let steps = t_end / dt;
        if steps > ODE_STEP_BUDGET {
            writeln!(out, "ode                    skipped: {steps:.1e} steps over the budget")?;
        } else {
            let v0 = CovarianceMatrix::vacuum(m.basis().clone());
            let ode = integrate_lyapunov_ode(&m, &n, &v0, t_end, dt)?;
            let rel = relative(&ode.final_state, v.matrix());
            writeln!(out, "ode relative diff      {rel:.3e} (t_end {t_end:.3e} s)")?;
            if rel > ODE_MATCH {
                problems.push(format!("ODE differs by {rel:.2e}"));
            }
        }
        let work = steps * a.trajectories as f64;
        if a.trajectories > 0 && work > MC_STEP_BUDGET {
            writeln!(out, "monte carlo            skipped: {work:.1e} steps over the budget")?;
        } else if a.trajectories > 0 {
            let mc = monte_carlo_covariance(&m, &n, a.trajectories, t_end, dt, a.seed)?;
            let d = m.dim();
            let mut worst = 0.0f64;
            for i in 0..d {
                for j in i..d {
                    worst = worst.max((mc.v[(i, j)] - v.get(i, j)).abs() / mc.stderr[(i, j)]);
                }
            }
            writeln!(
                out,
                "monte carlo max |z|    {worst:.2} ({} trajectories)",
                a.trajectories
            )?;
            if worst > MC_Z_MAX {
                problems.push(format!("Monte Carlo z-score {worst:.2}"));
            }
        }
    } else {
        let scan = convergence_scan(&m, &n, &a.k_list)?;
        writeln!(out, "K    successive difference")?;
        for row in &scan.rows {
            let diff = row.difference.map_or("-".into(), |d| format!("{d:.3e}"));
            writeln!(out, "{:<4} {diff}", row.truncation)?;
        }
        let Some(k) = scan.production else {
            return Err(Mismatch(format!("no truncation reached {CONVERGENCE_TOL:e}")).into());
        };
        writeln!(out, "production K           {k}")?;
        if scan.non_monotone {
            writeln!(out, "warning: the difference rises again after the production K")?;
        }
        let floquet = solve_floquet_steady_state(&m, &n, k)?;
        let period = m.period().expect("periodic model");
        let dt = a.dt.unwrap_or(period / 400.0).min(period / 100.0);
        let v0 = periodic_initial_state(&m, &n, dt)?;
        let ode = integrate_lyapunov_ode(&m, &n, &v0, period, dt)?;
        let rel = relative(floquet.matrix(), &ode.dc);
        writeln!(out, "floquet vs periodic ode {rel:.3e}")?;
        if rel > ODE_MATCH {
            problems.push(format!("Floquet DC block differs from the ODE by {rel:.2e}"));
        }
    }
    if !problems.is_empty() {
        bail!(Mismatch(problems.join("; ")));
    }
    Ok(Status::Ok)
}

fn plot_csv(a: PlotArgs) -> anyhow::Result<Status> {
    let file = File::open(&a.csv)
        .map_err(Error::Io)
        .with_context(|| a.csv.display().to_string())?;
    let rows = read_csv(file)?;
    let panels: Vec<&str> = a.panels.iter().map(String::as_str).collect();
    plot::plot_rows(&rows, &panels, &a.output)?;
    Ok(Status::Ok)
}
