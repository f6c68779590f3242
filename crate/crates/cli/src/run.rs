//! Dispatch of one configured run to the library, and its artifacts.

use crate::config::{Command, RunConfig};
use critnls_core::bubbles::bubble_report;
use critnls_core::constants::{admissible, alpha_threshold, constants_table};
use critnls_core::dynamics::{blowup_probe, propagate_with, PropagateOptions, ProbeMode, WaveState};
use critnls_core::fem::FeSpace;
use critnls_core::fiber::{energy_from_norms, fiber_report, h_geometry, pohozaev_from_norms, FiberReport, GeometryReport};
use critnls_core::ground_state::{
    defocusing_check, fiber_projected_descent, homogeneous_ground_state, local_minimize_subcritical, match_mass,
    mu_sweep, DefocusingOptions, DescentOptions, DescentTrace, GridOptions, GroundStateResult,
};
use critnls_core::sampling::ProfileSampler;
use critnls_core::{ProblemParams, ProfileNorms, RadialGrid, RadialProfile, Regime};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] critnls_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(_) | RunError::Core(critnls_core::Error::Domain(_)) => 64,
            RunError::Core(critnls_core::Error::Structural(_)) => 2,
            _ => 1,
        }
    }
}

/// What a finished run produced. A violation still leaves its artifacts.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<String>,
    pub violation: Option<String>,
}

struct Sink<'a> {
    dir: &'a Path,
    outcome: Outcome,
}

impl Sink<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outcome.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        Ok(())
    }

    fn profile(&mut self, name: &str, u: &RadialProfile) -> Result<(), RunError> {
        u.write_csv(BufWriter::new(File::create(self.path(name))?))?;
        Ok(())
    }

    fn violate(&mut self, msg: impl Into<String>) {
        self.outcome.violation.get_or_insert(msg.into());
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let command = cfg
        .command
        .ok_or_else(|| RunError::Usage("no command given on the command line or in the config".into()))?;
    fs::create_dir_all(&cfg.out)?;
    let mut sink = Sink {
        dir: &cfg.out,
        outcome: Outcome::default(),
    };
    match command {
        Command::Constants => sink.json("constants.json", &constants_table(cfg.dim, cfg.q)?)?,
        Command::Fiber => fiber(cfg, &mut sink)?,
        Command::Bubbles => {
            let rep = bubble_report(&params(cfg)?, &cfg.eps_list)?;
            if rep.bound_certified == Some(false) {
                sink.violate("mountain-pass bound is not below the homogeneous level");
            }
            sink.json("bubbles.json", &rep)?;
        }
        Command::GroundState => ground_state(cfg, &mut sink)?,
        Command::MuSweep => {
            let sweep = mu_sweep(&params(cfg)?, &cfg.mu_list, &grid_options(cfg))?;
            if !sweep.all_ok() {
                sink.violate("mu-sweep monotonicity or limit checks failed");
            }
            let mut w = BufWriter::new(File::create(sink.path("mu_sweep.csv"))?);
            writeln!(w, "mu,level,grad_sq,lambda")?;
            for r in &sweep.rows {
                let cell = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
                writeln!(w, "{},{},{},{}", r.mu, cell(r.level), cell(r.grad_sq), cell(r.lambda))?;
            }
            w.flush()?;
            sink.json("mu_sweep.json", &sweep)?;
        }
        Command::Defocusing => defocusing(&params(cfg)?, &mut sink)?,
        Command::Dynamics => dynamics(cfg, &mut sink)?,
        Command::Blowup => blowup(cfg, &mut sink)?,
    }
    Ok(sink.outcome)
}

fn params(cfg: &RunConfig) -> Result<ProblemParams, RunError> {
    Ok(ProblemParams::new(cfg.dim, cfg.q, cfg.a, cfg.mu)?)
}

fn grid_options(cfg: &RunConfig) -> GridOptions {
    let d = GridOptions::default();
    GridOptions {
        nodes: cfg.grid_nodes.unwrap_or(d.nodes),
        r_max: cfg.r_max.or(d.r_max),
        ..d
    }
}

#[derive(Serialize)]
struct SampledFiber {
    index: usize,
    norms: ProfileNorms,
    energy: f64,
    pohozaev: f64,
    report: FiberReport,
}

#[derive(Serialize)]
struct FiberRun {
    params: ProblemParams,
    alpha: f64,
    admissible: bool,
    geometry: Option<GeometryReport>,
    seed: u64,
    profiles: Vec<SampledFiber>,
}

fn fiber(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let p = params(cfg)?;
    let grid = Arc::new(RadialGrid::graded(
        p.dim,
        cfg.r_max.unwrap_or(40.0),
        cfg.grid_nodes.unwrap_or(2001),
        6.0,
    )?);
    let mut sampler = ProfileSampler::new(cfg.seed);
    let expected = if p.regime == Regime::Subcritical && p.mu > 0.0 { 2 } else { 1 };
    let mut profiles = Vec::with_capacity(cfg.samples);
    for index in 0..cfg.samples {
        let u = sampler.profile(grid.clone(), p.a)?;
        let norms = u.norms(p.q)?;
        let report = fiber_report(&norms, &p)?;
        if report.critical_points.len() != expected {
            sink.violate(format!(
                "profile {index} has {} fiber critical points, expected {expected}",
                report.critical_points.len()
            ));
        }
        profiles.push(SampledFiber {
            index,
            norms,
            energy: energy_from_norms(&norms, &p),
            pohozaev: pohozaev_from_norms(&norms, &p),
            report,
        });
    }
    let geometry = match p.regime {
        Regime::Subcritical if p.mu > 0.0 => Some(h_geometry(&p)?),
        _ => None,
    };
    sink.json(
        "fiber.json",
        &FiberRun {
            params: p,
            alpha: alpha_threshold(&p)?.value(),
            admissible: admissible(&p)?,
            geometry,
            seed: cfg.seed,
            profiles,
        },
    )
}

#[derive(Serialize)]
struct DescentSummary<'a> {
    result: &'a GroundStateResult,
    iterations: usize,
    stop: critnls_core::ground_state::DescentStop,
    final_residual: Option<f64>,
    polish_steps: usize,
    polished_residual: f64,
}

impl<'a> DescentSummary<'a> {
    fn new(result: &'a GroundStateResult, trace: &DescentTrace) -> Self {
        DescentSummary {
            result,
            iterations: trace.iterations,
            stop: trace.stop,
            final_residual: trace.residuals.last().copied(),
            polish_steps: trace.polish_steps,
            polished_residual: trace.polished_residual,
        }
    }
}

#[derive(Serialize)]
struct GroundStateRun<'a> {
    shooting: &'a GroundStateResult,
    descent: Option<DescentSummary<'a>>,
    /// `|m_shooting - m_descent| / |m_shooting|`
    level_agreement: Option<f64>,
}

/// The descent route matching the regime.
fn descend(p: &ProblemParams, cfg: &RunConfig) -> Result<(GroundStateResult, DescentTrace), RunError> {
    let d = DescentOptions::default();
    let opts = DescentOptions {
        nodes: cfg.grid_nodes.unwrap_or(d.nodes),
        r_max: cfg.r_max.or(d.r_max),
        ..d
    };
    Ok(match p.regime {
        Regime::Subcritical => local_minimize_subcritical(p, &opts)?,
        _ => fiber_projected_descent(p, &opts)?,
    })
}

fn ground_state(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let p = params(cfg)?;
    if p.mu < 0.0 {
        return defocusing(&p, sink);
    }
    if p.mu == 0.0 {
        let hom = homogeneous_ground_state(&p, &grid_options(cfg))?;
        if let Err(e) = hom.check_predictions() {
            sink.violate(e.to_string());
        }
        sink.profile("profile.csv", &hom.profile)?;
        return sink.json(
            "ground_state.json",
            &GroundStateRun {
                shooting: &hom,
                descent: None,
                level_agreement: None,
            },
        );
    }
    let shot = match_mass(&p, None, &grid_options(cfg))?;
    if let Err(e) = shot.check_predictions() {
        sink.violate(e.to_string());
    }
    let (desc, trace) = descend(&p, cfg)?;
    sink.profile("profile.csv", &shot.profile)?;
    sink.profile("descent_profile.csv", &desc.profile)?;
    sink.json(
        "ground_state.json",
        &GroundStateRun {
            shooting: &shot,
            level_agreement: Some(((shot.energy_level - desc.energy_level) / shot.energy_level).abs()),
            descent: Some(DescentSummary::new(&desc, &trace)),
        },
    )
}

fn defocusing(p: &ProblemParams, sink: &mut Sink) -> Result<(), RunError> {
    let rep = defocusing_check(p, &DefocusingOptions::default())?;
    if !rep.consistent {
        sink.violate("defocusing scan produced a solution-like profile violating the sign law");
    }
    sink.json("defocusing.json", &rep)
}

#[derive(Serialize)]
struct DynamicsRun {
    params: ProblemParams,
    options: PropagateOptions,
    ground_state_level: f64,
    halt: critnls_core::dynamics::Halt,
    steps: usize,
    smallest_dt: f64,
    mass_drift_rate: f64,
    energy_drift_rate: f64,
    /// Largest pointwise change of `|ψ|` from the initial ground state.
    max_modulus_change: f64,
}

fn dynamics(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let p = params(cfg)?;
    let (gs, _) = descend(&p, cfg)?;
    let opts = PropagateOptions {
        dt: cfg.dt,
        t_end: cfg.t_end,
        ..Default::default()
    };
    let fe = FeSpace::new(gs.profile.grid().clone());
    let psi0 = WaveState::from_profile(&fe, &gs.profile, &p)?;
    let m0 = psi0.modulus();
    let mut worst = 0.0f64;
    let traj = propagate_with(&fe, &psi0, &p, &opts, |s| {
        for (z, a) in s.psi.iter().zip(&m0) {
            worst = worst.max((z.norm() - a).abs());
        }
    })?;
    traj.write_csv(BufWriter::new(File::create(sink.path("trajectory.csv"))?))?;
    sink.json(
        "dynamics.json",
        &DynamicsRun {
            params: p,
            options: opts,
            ground_state_level: gs.energy_level,
            halt: traj.halt,
            steps: traj.steps,
            smallest_dt: traj.smallest_dt,
            mass_drift_rate: traj.mass_drift_rate(),
            energy_drift_rate: traj.energy_drift_rate(),
            max_modulus_change: worst,
        },
    )?;
    if traj.halt == critnls_core::dynamics::Halt::Instability {
        return Err(critnls_core::Error::Numeric {
            what: "propagation lost mass conservation".into(),
            achieved: traj.mass_drift_rate(),
        }
        .into());
    }
    Ok(())
}

fn blowup(cfg: &RunConfig, sink: &mut Sink) -> Result<(), RunError> {
    let p = params(cfg)?;
    if p.regime == Regime::Subcritical {
        return Err(RunError::Usage("the blow-up probe needs q >= 2 + 4/N".into()));
    }
    let (gs, _) = descend(&p, &RunConfig { grid_nodes: None, r_max: None, ..cfg.clone() })?;
    let r_max = cfg.r_max.unwrap_or(gs.profile.grid().r_max());
    let grid = Arc::new(RadialGrid::with_first_cell(
        p.dim,
        r_max,
        cfg.grid_nodes.unwrap_or(16385),
        cfg.first_cell,
    )?);
    let u = gs.profile.resample(grid)?.normalize_mass(p.a)?;
    let opts = PropagateOptions {
        dt: cfg.dt,
        t_end: cfg.t_end,
        grad_ceiling: 60.0 * gs.norms.grad_sq.sqrt(),
        ..Default::default()
    };
    let rep = blowup_probe(&u, &p, ProbeMode::Scaled { s: cfg.s }, &opts)?;
    if !rep.pohozaev_negative {
        sink.violate("P(psi(t)) left the negative side along a probe with negative fiber maximum");
    }
    let mut w = BufWriter::new(File::create(sink.path("blowup.csv"))?);
    writeln!(w, "t,time_to_halt,grad_norm,virial,virial_second_diff,pohozaev,peak")?;
    for s in &rep.samples {
        let v2 = s.virial_second_diff.map_or(String::new(), |v| format!("{v:.12e}"));
        writeln!(
            w,
            "{:.15e},{:.12e},{:.12e},{:.12e},{v2},{:.12e},{:.12e}",
            s.t, s.time_to_halt, s.grad_norm, s.virial, s.pohozaev, s.peak
        )?;
    }
    w.flush()?;
    sink.json("blowup.json", &rep)
}
