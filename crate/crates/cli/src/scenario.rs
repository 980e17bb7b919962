//! One function per scenario. Each returns the files to write, the summary
//! entries and the verdict of the monitors it asserts.

use std::f64::consts::PI;
use std::fmt::Write as _;

use powershape::admissible::{
    boundary_passivity_monitor, conductance_for, dissipation_monitor, stability_condition, stability_from_norm,
};
use powershape::altmaps::{altmap_series, phat_rate_monitor, AltMapConfig};
use powershape::control::{simulate_closed_loop, ClosedLoopMode, Controller, TargetProfile};
use powershape::grid::PowerIteration;
use powershape::line::snapshot_text;
use powershape::monitor::FunctionalReport;
use powershape::rlc::{rlc_equilibrium, rlc_simulate, RlcParams, RlcState};
use powershape::{BoundaryMode, DiscreteOp, Field, FullState, Grid, Line, PortDrive, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Conductance, ConfigError, Initial, PortMode, Scenario, ScenarioConfig};

#[derive(Debug, Default)]
pub struct RunOutput {
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
    pub summary: Vec<(String, String)>,
    /// Asserted monitors and whether they passed.
    pub checks: Vec<(String, bool)>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.push((name.into(), ok));
    }

    fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    let mut out = RunOutput::default();
    out.put("scenario", cfg.scenario.name());
    out.put("name", &cfg.name);
    out.put("seed", cfg.seed);
    match cfg.scenario {
        Scenario::RlcDemo => rlc_demo(cfg, &mut out)?,
        Scenario::OpenLoopStability => open_loop(cfg, &mut out)?,
        Scenario::BoundaryPassivity => boundary_passivity(cfg, &mut out)?,
        Scenario::ClosedLoop => closed_loop(cfg, &mut out)?,
        Scenario::AltMap => altmap(cfg, &mut out)?,
    }
    for (name, ok) in out.checks.clone() {
        out.put(format!("check.{name}"), if ok { "pass" } else { "fail" });
    }
    out.put("passed", out.passed());
    Ok(out)
}

fn sim_config(cfg: &ScenarioConfig) -> SimConfig {
    SimConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        stride: cfg.stride,
        cfl_safety: cfg.cfl,
    }
}

fn build_line(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<Line, ConfigError> {
    let grid = Grid::new(cfg.n_cells)?;
    let mut params = cfg.params;
    if cfg.conductance == Conductance::Auto {
        let norm = DiscreteOp::sbp(grid).norm(PowerIteration::default())?;
        params.g = conductance_for(&params, norm, cfg.stability_target);
    }
    let line = Line::new(grid, params)?;
    out.put("n_cells", cfg.n_cells);
    out.put("L", params.l);
    out.put("C", params.c);
    out.put("R", params.r);
    out.put("G", params.g);
    out.put("R0", params.r0);
    Ok(line)
}

fn initial_field(cfg: &ScenarioConfig, line: &Line, rng: &mut ChaCha8Rng) -> Result<Field, ConfigError> {
    let g = line.params().g;
    let grid = line.grid();
    let field = match cfg.initial {
        Initial::Zero => Field::zeros(grid),
        Initial::Standing => Field::from_fns(grid, |z| (PI * z / 2.0).cos(), |z| 0.5 * (PI * z / 2.0).sin())?,
        Initial::Quiet => Field::from_fns(grid, |z| (PI * z / 2.0).cos(), |z| PI / 2.0 * (PI * z / 2.0).sin() / g)?,
        Initial::Random => {
            let mut series = || {
                let terms: Vec<(f64, f64)> = (0..4)
                    .map(|m| (rng.gen_range(-1.0..1.0) / (1.0 + m as f64), rng.gen_range(0.0..2.0 * PI)))
                    .collect();
                grid.sample(|z| terms.iter().enumerate().map(|(m, (a, ph))| a * (PI * m as f64 * z + ph).cos()).sum())
            };
            let i = series();
            let v = series();
            Field::new(grid, i, v)?
        }
        Initial::Target => {
            return Err(ConfigError::Invalid(powershape::Error::InvalidParameter(
                "initial = target only applies to closed-loop".into(),
            )))
        }
    };
    Ok(field)
}

fn monitor_csv(rep: &FunctionalReport) -> String {
    let mut s = String::from("t,value,rate,bound\n");
    for k in 0..rep.times.len() {
        let _ = writeln!(s, "{},{},{},{}", rep.times[k], rep.values[k], rep.rates[k], rep.bounds[k]);
    }
    s
}

fn put_report(out: &mut RunOutput, prefix: &str, rep: &FunctionalReport) {
    out.put(format!("{prefix}.max_violation"), rep.max_violation);
    out.put(format!("{prefix}.tol"), rep.tol);
    out.put(format!("{prefix}.holds"), rep.holds());
}

fn rlc_demo(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<(), ConfigError> {
    let p = RlcParams::new(cfg.params.l, cfg.params.c, cfg.r_l, cfg.r_c, cfg.k_gain, cfg.v_s_star)?;
    let dt = cfg.dt.unwrap_or_else(|| p.default_dt());
    let run = rlc_simulate(&p, RlcState::new(cfg.i_l0, cfg.v_c0), cfg.t_end, dt)?;
    let eq = rlc_equilibrium(&p)?;
    let last = run.final_state();
    out.put("dt", dt);
    out.put("admissible", run.admissible);
    out.put("i_L_star", eq.i_l);
    out.put("v_C_star", eq.v_c);
    out.put("i_L_final", last.i_l);
    out.put("v_C_final", last.v_c);
    out.put("final_error", (last.i_l - eq.i_l).abs().max((last.v_c - eq.v_c).abs()));
    out.put("pd_max_step_increase", run.max_step_increase);
    out.put("pd_monotone_tol", run.monotone_tol);
    out.put("pd_monotone", run.pd_monotone());
    out.check("pd_monotone", run.pd_monotone());
    out.file("trajectory.csv", run.to_csv());
    Ok(())
}

fn open_loop(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<(), ConfigError> {
    let line = build_line(cfg, out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mode = BoundaryMode::PassiveShort;
    let mut f0 = initial_field(cfg, &line, &mut rng)?;
    line.project(&mut f0, &mode);
    let stab = stability_condition(line.params(), line.op())?;
    let traj = line.simulate(&f0, &mode, &sim_config(cfg))?;
    let rep = dissipation_monitor(&line, &traj)?;
    out.put("op_norm", stab.op_norm);
    out.put("lhs", stab.lhs);
    out.put("condition_holds", stab.holds);
    put_report(out, "dissipation", &rep);
    out.check("dissipation", rep.holds());
    out.file("trajectory.csv", line.trajectory_csv(&traj, &mode, &cfg.probes));
    out.file("monitor.csv", monitor_csv(&rep));
    out.file("snapshot_initial.txt", snapshot_text(line.grid(), &traj.samples[0].field));
    out.file("snapshot_final.txt", snapshot_text(line.grid(), &traj.last().field));
    Ok(())
}

fn random_drive(rng: &mut ChaCha8Rng, amplitude: f64, ramp_time: f64) -> PortDrive {
    let terms = (0..3)
        .map(|_| {
            (
                amplitude * rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..8.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    PortDrive::Sinusoids { terms, ramp_time }
}

fn boundary_passivity(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<(), ConfigError> {
    let line = build_line(cfg, out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stab = stability_from_norm(line.params(), line.op().norm(PowerIteration::default())?);
    out.put("lhs", stab.lhs);
    out.put("condition_holds", stab.holds);
    let runs = match cfg.port {
        PortMode::PassiveShort => 1,
        PortMode::Controlled => cfg.drives.max(1),
    };
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;
    for k in 0..runs {
        let mode = match cfg.port {
            PortMode::PassiveShort => BoundaryMode::PassiveShort,
            PortMode::Controlled => BoundaryMode::Controlled(random_drive(&mut rng, cfg.drive_amplitude, cfg.ramp_time)),
        };
        let mut f0 = initial_field(cfg, &line, &mut rng)?;
        line.project(&mut f0, &mode);
        let traj = line.simulate(&f0, &mode, &sim_config(cfg))?;
        let rep = boundary_passivity_monitor(&line, &traj)?;
        put_report(out, &format!("run{k}"), &rep);
        all &= rep.holds();
        worst = worst.max(rep.max_violation / rep.tol);
        out.file(format!("trajectory_{k}.csv"), line.trajectory_csv(&traj, &mode, &cfg.probes));
        out.file(format!("monitor_{k}.csv"), monitor_csv(&rep));
        if k == 0 {
            out.file("snapshot_final.txt", snapshot_text(line.grid(), &traj.last().field));
        }
    }
    out.put("runs", runs);
    out.put("worst_violation_over_tol", worst);
    out.check("boundary_passivity", all);
    Ok(())
}

fn closed_loop(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<(), ConfigError> {
    let line = build_line(cfg, out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let i_star = line.grid().sample(|z| cfg.target_i0 + (cfg.target_i1 - cfg.target_i0) * z);
    let tp = TargetProfile::from_current(&line, i_star)?;
    let ctl = Controller::new(tp.clone(), cfg.k_gain, cfg.loop_mode)?;
    let f0 = match cfg.initial {
        Initial::Target => tp.as_field(),
        _ => initial_field(cfg, &line, &mut rng)?,
    };
    let run = simulate_closed_loop(&line, &ctl, &FullState::new(f0), &sim_config(cfg), cfg.terminal_tol)?;
    for l in run.summary().lines() {
        if let Some((k, v)) = l.split_once(" = ") {
            out.put(k, v);
        }
    }
    out.put("terminal_tol", run.terminal_tol);
    out.put("eq_residual_final", run.eq_residual.last().copied().unwrap_or(f64::NAN));
    out.put("eq_residual_at_target", ctl.equilibrium_residual(&line, &tp.as_field()));
    if cfg.loop_mode == ClosedLoopMode::ShapedDynamics {
        out.check("pd_monotone", run.pd_monotone());
        out.check("terminal_error", run.converged());
    }
    out.file("trajectory.csv", run.to_csv(&line, &cfg.probes));
    out.file("monitor.csv", monitor_csv(&run.pd_report));
    out.file("snapshot_final.txt", snapshot_text(line.grid(), &run.traj.last().field));
    out.file("target.txt", snapshot_text(line.grid(), &tp.as_field()));
    Ok(())
}

fn altmap(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<(), ConfigError> {
    let line = build_line(cfg, out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mode = BoundaryMode::PassiveShort;
    let mut f0 = initial_field(cfg, &line, &mut rng)?;
    line.project(&mut f0, &mode);
    let traj = line.simulate(&f0, &mode, &sim_config(cfg))?;
    let p = *line.params();
    let mut all = true;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut header = String::from("t,P1,P2");
    for (k, factor) in cfg.lambda_factors.iter().enumerate() {
        let ac = AltMapConfig::new(factor * p.r / p.l, cfg.half_p2, &line)?;
        let rep = phat_rate_monitor(&line, &traj, &ac)?;
        let key = format!("lambda{k}");
        out.put(format!("{key}.lambda"), rep.lambda);
        out.put(format!("{key}.window_ok"), rep.window_ok);
        out.put(format!("{key}.max_residual"), rep.max_residual);
        out.put(format!("{key}.tol"), rep.tol);
        out.put(format!("{key}.violation_observed"), rep.violation_observed);
        out.put(format!("{key}.supported_sign"), format!("{:?}", rep.supported_sign).to_lowercase());
        all &= rep.holds();
        let _ = write!(header, ",P_hat@{}", rep.lambda);
        columns.push(rep.functional.values.clone());
    }
    out.check("altmap_in_window", all);
    let base = altmap_series(&line, &traj, &AltMapConfig::new(0.0, cfg.half_p2, &line)?)?;
    let mut csv = header + "\n";
    for j in 0..base.times.len() {
        let _ = write!(csv, "{},{},{}", base.times[j], base.p1[j], base.p2[j]);
        for col in &columns {
            let _ = write!(csv, ",{}", col[j]);
        }
        csv.push('\n');
    }
    out.file("trajectory.csv", line.trajectory_csv(&traj, &mode, &cfg.probes));
    out.file("altmap.csv", csv);
    out.file("snapshot_final.txt", snapshot_text(line.grid(), &traj.last().field));
    Ok(())
}
