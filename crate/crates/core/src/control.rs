//! Boundary power-shaping controller.
//!
//! The controller `dxi/dt = u_c`, `y_c = dH_c/dxi` is attached at `z = 0`
//! through `u_0 = -y_c`, `u_c = y_0 = di_0/dt`. The functional
//! `C = -xi + int i dz` is the Casimir candidate linking controller and
//! line, and on its level sets the closed-loop storage is
//!
//! ```text
//! P_d = P~ + H_c + c
//! H_c = int (K/2 (i - i*)^2 - R i i* + v* di/dz) dz
//! c   = (1/2) int (R i*^2 + G v*^2) dz
//!     = (1/2G) int ((G v + di/dz)^2 + G (K + R)(i - i*)^2 + (G v* + di/dz)^2) dz
//! ```
//!
//! which vanishes exactly at a target `(i*, v*)` with `G v* + di*/dz = 0`.
//!
//! Two closed loops are available:
//!
//! * [`ClosedLoopMode::ShapedDynamics`] integrates
//!   `d/dt (i, v) = A~^{-1} dP_d` directly. In error coordinates
//!   `(i - i*, v - v*)` this is the open line with `R` replaced by `R + K`,
//!   so `P_d` decays. The far end is held at `i = i*(1)` and the near end
//!   port holds `v = v*(0)` (penalty form, as in [`crate::line`]).
//! * [`ClosedLoopMode::Interconnected`] runs the line in port mode with the
//!   controller state. `y_c` is the derivative of `H_c` restricted to the
//!   level set `xi = int i dz + c_leaf`, taken along the uniform direction
//!   `delta i = 1`:
//!   `y_c(xi) = K (xi - c_leaf - int i* dz) - R int i* dz`.
//!   Because `dxi/dt = di_0/dt` while `d/dt int i dz = int di/dt dz`, the
//!   Casimir is not conserved in general; its drift is measured and
//!   reported.

use std::fmt::Write as _;

use crate::admissible::{apply_atilde_inverse, ptilde_two_forms};
use crate::error::{Error, Result};
use crate::grid::{h0_norm, Field};
use crate::line::{flatten, unflatten, BoundaryMode, FullState, Line, Sample, SimConfig, Trajectory};
use crate::monitor::{time_derivative, FunctionalReport};
use crate::ode::{blown_up, rk4_step, BLOW_UP_LIMIT};

/// Desired equilibrium. Always satisfies `G v* + D i* = 0` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetProfile {
    pub i_star: Vec<f64>,
    pub v_star: Vec<f64>,
}

/// Tolerance on `||G v* + D i*||_inf`.
pub const TARGET_TOL: f64 = 1e-8;

impl TargetProfile {
    pub fn new(line: &Line, i_star: Vec<f64>, v_star: Vec<f64>) -> Result<Self> {
        let fl = Field::new(line.grid(), i_star, v_star)?;
        let res = Self::residual(line, &fl.i, &fl.v);
        if res > TARGET_TOL {
            return Err(Error::TargetNotEquilibrium(res));
        }
        Ok(Self {
            i_star: fl.i,
            v_star: fl.v,
        })
    }

    fn residual(line: &Line, i_star: &[f64], v_star: &[f64]) -> f64 {
        let g = line.params().g;
        line.d(i_star)
            .iter()
            .zip(v_star)
            .map(|(di, v)| (g * v + di).abs())
            .fold(0.0, f64::max)
    }

    /// `i* = const`, `v* = 0`.
    pub fn constant_current(line: &Line, i_star: f64) -> Result<Self> {
        let n = line.grid().n_nodes();
        Self::new(line, vec![i_star; n], vec![0.0; n])
    }

    /// Given `i*`, take `v* = -(di*/dz)/G`.
    pub fn from_current(line: &Line, i_star: Vec<f64>) -> Result<Self> {
        line.grid().check_len(i_star.len())?;
        let g = line.params().g;
        let v_star = line.d(&i_star).iter().map(|d| -d / g).collect();
        Self::new(line, i_star, v_star)
    }

    /// Given `v*` and `i*(1)`, take `i*(z) = i*(1) + int_z^1 G v* dzeta`
    /// (trapezoid), then recompute `v*` from the discrete relation so the
    /// target is an exact equilibrium of the grid.
    pub fn from_voltage(line: &Line, v_star: &[f64], i_end: f64) -> Result<Self> {
        line.grid().check_len(v_star.len())?;
        let g = line.params().g;
        let dz = line.grid().dz();
        let n = line.grid().n_cells();
        let mut i_star = vec![i_end; n + 1];
        for k in (0..n).rev() {
            i_star[k] = i_star[k + 1] + 0.5 * dz * g * (v_star[k] + v_star[k + 1]);
        }
        Self::from_current(line, i_star)
    }

    pub fn as_field(&self) -> Field {
        Field {
            i: self.i_star.clone(),
            v: self.v_star.clone(),
        }
    }
}

/// `-xi + int i dz + c`.
pub fn casimir_value(line: &Line, s: &FullState, c: f64) -> Result<f64> {
    let xi = s.xi.ok_or(Error::MissingController)?;
    Ok(-xi + line.integral(&s.field.i) + c)
}

/// Structural residuals of the Casimir conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasimirResiduals {
    /// `max |delta_v C|`; zero because `C` does not depend on `v`.
    pub dv: f64,
    /// `max |d/dz delta_i C|` with `delta_i C = 1`.
    pub dz_di: f64,
}

pub fn casimir_conditions(line: &Line, s: &FullState) -> Result<CasimirResiduals> {
    s.xi.ok_or(Error::MissingController)?;
    let ones = vec![1.0; line.grid().n_nodes()];
    Ok(CasimirResiduals {
        dv: 0.0,
        dz_di: line.d(&ones).iter().fold(0.0, |m, x| m.max(x.abs())),
    })
}

/// `H_c` of the field.
pub fn hc_eval(line: &Line, field: &Field, tp: &TargetProfile, k_gain: f64) -> f64 {
    let r = line.params().r;
    let di = line.d(&field.i);
    let density: Vec<f64> = (0..field.len())
        .map(|k| {
            let e = field.i[k] - tp.i_star[k];
            0.5 * k_gain * e * e - r * field.i[k] * tp.i_star[k] + di[k] * tp.v_star[k]
        })
        .collect();
    line.integral(&density)
}

/// `c = (1/2) int (R i*^2 + G v*^2) dz`.
pub fn shaping_constant(line: &Line, tp: &TargetProfile) -> f64 {
    let p = line.params();
    let density: Vec<f64> = (0..tp.i_star.len())
        .map(|k| 0.5 * (p.r * tp.i_star[k].powi(2) + p.g * tp.v_star[k].powi(2)))
        .collect();
    line.integral(&density)
}

/// `P_d` assembled as `P~ + H_c + c` and in its three-squares form.
pub fn pd_eval(line: &Line, field: &Field, tp: &TargetProfile, k_gain: f64) -> (f64, f64) {
    let p = line.params();
    let (ptilde_raw, _) = ptilde_two_forms(line, field);
    let assembled = ptilde_raw + hc_eval(line, field, tp, k_gain) + shaping_constant(line, tp);
    let di = line.d(&field.i);
    let density: Vec<f64> = (0..field.len())
        .map(|k| {
            let a = p.g * field.v[k] + di[k];
            let e = field.i[k] - tp.i_star[k];
            let b = p.g * tp.v_star[k] + di[k];
            (a * a + p.g * (k_gain + p.r) * e * e + b * b) / (2.0 * p.g)
        })
        .collect();
    (assembled, line.integral(&density))
}

/// Bulk variational derivative of `P_d`.
pub fn pd_variational(line: &Line, field: &Field, tp: &TargetProfile, k_gain: f64) -> Field {
    let p = line.params();
    let di = line.d(&field.i);
    let ddi = line.d(&di);
    let dv = line.d(&field.v);
    let dv_star = line.d(&tp.v_star);
    let n = field.len();
    Field {
        i: (0..n)
            .map(|k| {
                p.r * field.i[k] - dv[k] - 2.0 / p.g * ddi[k] + k_gain * (field.i[k] - tp.i_star[k])
                    - p.r * tp.i_star[k]
                    - dv_star[k]
            })
            .collect(),
        v: (0..n).map(|k| p.g * field.v[k] + di[k]).collect(),
    }
}

/// Variational derivative of `H_c` alone (the `i` component; `v` is zero).
pub fn hc_variational(line: &Line, field: &Field, tp: &TargetProfile, k_gain: f64) -> Vec<f64> {
    let r = line.params().r;
    let dv_star = line.d(&tp.v_star);
    (0..field.len())
        .map(|k| k_gain * (field.i[k] - tp.i_star[k]) - r * tp.i_star[k] - dv_star[k])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedLoopMode {
    ShapedDynamics,
    Interconnected,
}

impl ClosedLoopMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ShapedDynamics => "shaped",
            Self::Interconnected => "interconnected",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub target: TargetProfile,
    pub k_gain: f64,
    pub mode: ClosedLoopMode,
}

impl Controller {
    pub fn new(target: TargetProfile, k_gain: f64, mode: ClosedLoopMode) -> Result<Self> {
        if !(k_gain >= 0.0) || !k_gain.is_finite() {
            return Err(Error::InvalidParameter("K must be non-negative".into()));
        }
        Ok(Self { target, k_gain, mode })
    }

    /// Controller output `y_c(xi)` on the leaf with offset `c_leaf`.
    pub fn output(&self, line: &Line, xi: f64, c_leaf: f64) -> f64 {
        let mean_target = line.integral(&self.target.i_star);
        self.k_gain * (xi - c_leaf - mean_target) - line.params().r * mean_target
    }

    /// Closed-loop field rates for ShapedDynamics.
    pub fn shaped_rhs(&self, line: &Line, field: &Field) -> Field {
        let grad = pd_variational(line, field, &self.target, self.k_gain);
        let mut rates = apply_atilde_inverse(line, &grad);
        let n = line.grid().n_cells();
        let p = line.params();
        rates.i[0] += 2.0 / line.grid().dz() * (self.target.v_star[0] - field.v[0]) / p.l;
        rates.i[n] = 0.0;
        rates
    }

    /// Closed-loop rates of `(field, xi)`. `c_leaf` only matters for the
    /// interconnected loop.
    pub fn closed_loop_rhs(&self, line: &Line, s: &FullState, c_leaf: f64) -> Result<(Field, f64)> {
        line.check(&s.field)?;
        match self.mode {
            ClosedLoopMode::ShapedDynamics => {
                let rates = self.shaped_rhs(line, &s.field);
                Ok((rates, s.xi.map(|_| 0.0).unwrap_or(0.0)))
            }
            ClosedLoopMode::Interconnected => {
                let xi = s.xi.ok_or(Error::MissingController)?;
                let u0 = -self.output(line, xi, c_leaf);
                let rates = line.rhs_with_port(&s.field, &BoundaryMode::PassiveShort, u0);
                let xi_dot = rates.i[0];
                Ok((rates, xi_dot))
            }
        }
    }

    fn project(&self, line: &Line, field: &mut Field) {
        let n = line.grid().n_cells();
        field.i[n] = match self.mode {
            ClosedLoopMode::ShapedDynamics => self.target.i_star[n],
            ClosedLoopMode::Interconnected => 0.0,
        };
    }

    /// `||dP_d||_0` of the field.
    pub fn equilibrium_residual(&self, line: &Line, field: &Field) -> f64 {
        let grad = pd_variational(line, field, &self.target, self.k_gain);
        h0_norm(&grad, line.grid()).unwrap_or(f64::NAN)
    }

    fn port_voltage(&self, line: &Line, s: &FullState, c_leaf: f64) -> f64 {
        match (self.mode, s.xi) {
            (ClosedLoopMode::Interconnected, Some(xi)) => -self.output(line, xi, c_leaf),
            _ => self.target.v_star[0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub mode: ClosedLoopMode,
    pub k_gain: f64,
    pub traj: Trajectory,
    pub pd: Vec<f64>,
    pub casimir: Vec<f64>,
    pub eq_residual: Vec<f64>,
    /// `dP_d/dt <= 0` with tolerance `1e-8 max(1, |P_d(0)|)`.
    pub pd_report: FunctionalReport,
    /// `max |field - target|` at the final sample.
    pub terminal_error: f64,
    pub terminal_tol: f64,
    /// `C(T) - C(0)`.
    pub casimir_drift: f64,
}

impl ClosedLoopRun {
    pub fn pd_monotone(&self) -> bool {
        self.pd_report.holds()
    }

    pub fn converged(&self) -> bool {
        self.terminal_error <= self.terminal_tol
    }

    /// Columns `t`, probe currents and voltages, `P_d`, `casimir`, `eq_residual`.
    pub fn to_csv(&self, line: &Line, probes: &[f64]) -> String {
        let idx: Vec<usize> = probes.iter().map(|&z| line.grid().nearest(z)).collect();
        let mut out = String::from("t");
        for &k in &idx {
            let _ = write!(out, ",i@{}", line.grid().z(k));
        }
        for &k in &idx {
            let _ = write!(out, ",v@{}", line.grid().z(k));
        }
        out.push_str(",P_d,casimir,eq_residual\n");
        for (j, s) in self.traj.samples.iter().enumerate() {
            let _ = write!(out, "{}", s.t);
            for &k in &idx {
                let _ = write!(out, ",{}", s.field.i[k]);
            }
            for &k in &idx {
                let _ = write!(out, ",{}", s.field.v[k]);
            }
            let _ = writeln!(out, ",{},{},{}", self.pd[j], self.casimir[j], self.eq_residual[j]);
        }
        out
    }

    /// `{mode, K, terminal_error, pd_monotone, casimir_drift}` block.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode = {}", self.mode.name());
        let _ = writeln!(out, "K = {}", self.k_gain);
        let _ = writeln!(out, "terminal_error = {}", self.terminal_error);
        let _ = writeln!(out, "pd_monotone = {}", self.pd_monotone());
        let _ = writeln!(out, "pd_max_violation = {}", self.pd_report.max_violation);
        let _ = writeln!(out, "casimir_drift = {}", self.casimir_drift);
        out
    }
}

/// Run the closed loop from `initial`. A missing controller state is
/// initialised on the Casimir leaf `xi = int i dz`.
pub fn simulate_closed_loop(
    line: &Line,
    ctl: &Controller,
    initial: &FullState,
    cfg: &SimConfig,
    terminal_tol: f64,
) -> Result<ClosedLoopRun> {
    line.check(&initial.field)?;
    let mut field = initial.field.clone();
    ctl.project(line, &mut field);
    let xi0 = initial.xi.unwrap_or_else(|| line.integral(&field.i));
    let c_leaf = xi0 - line.integral(&field.i);
    let shaped = ctl.mode == ClosedLoopMode::ShapedDynamics;
    let limit = line.max_stable_dt(&BoundaryMode::PassiveShort, cfg.cfl_safety)
        .min(if shaped {
            let p = line.params();
            2.5 / ((p.r + ctl.k_gain) / p.l + 2.0 / (p.l * line.grid().dz()) * 2.0)
        } else {
            f64::INFINITY
        });
    let dt = cfg.resolve_dt(limit)?;
    let steps = (cfg.t_end / dt).round().max(1.0) as usize;

    let mut y = flatten(&field);
    y.push(xi0);
    let m = field.len();
    let split = |y: &[f64]| FullState::with_controller(unflatten(&y[..2 * m]), y[2 * m]);
    let mut f = |_t: f64, y: &[f64]| {
        let s = split(y);
        let (rates, xi_dot) = ctl.closed_loop_rhs(line, &s, c_leaf).expect("controller state present");
        let mut out = flatten(&rates);
        out.push(xi_dot);
        out
    };
    let project = |_t: f64, y: &mut [f64]| {
        let n = m - 1;
        y[n] = match ctl.mode {
            ClosedLoopMode::ShapedDynamics => ctl.target.i_star[n],
            ClosedLoopMode::Interconnected => 0.0,
        };
    };
    let record = |t: f64, y: &[f64]| -> Sample {
        let s = split(y);
        let (rates, _) = ctl.closed_loop_rhs(line, &s, c_leaf).expect("controller state present");
        Sample {
            t,
            u0: ctl.port_voltage(line, &s, c_leaf),
            xi: s.xi,
            field: s.field,
            rates,
        }
    };
    let mut samples = vec![record(0.0, &y)];
    for step in 0..steps {
        y = rk4_step(&mut f, &project, step as f64 * dt, &y, dt);
        if blown_up(&y) {
            return Err(Error::BlowUp { step: step + 1, limit: BLOW_UP_LIMIT });
        }
        if (step + 1) % cfg.stride == 0 || step + 1 == steps {
            samples.push(record((step + 1) as f64 * dt, &y));
        }
    }
    let traj = Trajectory {
        grid: *line.grid(),
        sample_dt: dt * cfg.stride as f64,
        samples,
        mode: ctl.mode.name().to_string(),
        notes: Vec::new(),
    };

    let pd: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| pd_eval(line, &s.field, &ctl.target, ctl.k_gain).1)
        .collect();
    let casimir: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| casimir_value(line, &FullState { field: s.field.clone(), xi: s.xi }, 0.0).unwrap_or(f64::NAN))
        .collect();
    let eq_residual = traj
        .samples
        .iter()
        .map(|s| ctl.equilibrium_residual(line, &s.field))
        .collect();
    let rates = time_derivative(&pd, traj.sample_dt);
    let n = pd.len();
    let mut pd_report = FunctionalReport::new("P_d", traj.times(), pd.clone(), rates, vec![0.0; n], 1e-8);
    pd_report.tol = 1e-8 * pd[0].abs().max(1.0);
    let last = traj.last();
    let terminal_error = last
        .field
        .i
        .iter()
        .zip(&ctl.target.i_star)
        .chain(last.field.v.iter().zip(&ctl.target.v_star))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let casimir_drift = casimir[n - 1] - casimir[0];
    Ok(ClosedLoopRun {
        mode: ctl.mode,
        k_gain: ctl.k_gain,
        traj,
        pd,
        casimir,
        eq_residual,
        pd_report,
        terminal_error,
        terminal_tol,
        casimir_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::line::LineParams;
    use approx::assert_abs_diff_eq;

    fn line(n: usize, p: LineParams) -> Line {
        Line::new(Grid::new(n).unwrap(), p).unwrap()
    }

    #[test]
    fn target_constructors() {
        let ln = line(20, LineParams { g: 3.0, ..Default::default() });
        assert!(TargetProfile::constant_current(&ln, 0.5).is_ok());
        let bad = TargetProfile::new(&ln, vec![0.0; 21], vec![1.0; 21]);
        assert!(matches!(bad, Err(Error::TargetNotEquilibrium(_))));
        let v = ln.grid().sample(|z| (z * 2.0).sin());
        let tp = TargetProfile::from_voltage(&ln, &v, 0.2).unwrap();
        assert_abs_diff_eq!(tp.i_star[20], 0.2, epsilon = 1e-15);
        // Re-projection moves v* by O(dz^2) at most.
        let dev = tp.v_star.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 0.05, "{dev}");
    }

    #[test]
    fn casimir_examples() {
        let ln = line(10, LineParams::default());
        let f = Field::from_fns(ln.grid(), |z| 1.0 + z, |_| 0.0).unwrap();
        let xi = ln.integral(&f.i);
        assert_abs_diff_eq!(casimir_value(&ln, &FullState::with_controller(f, xi), 0.0).unwrap(), 0.0);
        let f2 = Field::from_fns(ln.grid(), |_| 2.0, |_| 0.0).unwrap();
        let s = FullState::with_controller(f2.clone(), 0.0);
        assert_abs_diff_eq!(casimir_value(&ln, &s, 0.0).unwrap(), 2.0, epsilon = 1e-14);
        let res = casimir_conditions(&ln, &s).unwrap();
        assert_eq!(res.dv, 0.0);
        assert!(res.dz_di <= 1e-12);
        assert_eq!(casimir_value(&ln, &FullState::new(f2), 0.0), Err(Error::MissingController));
    }

    #[test]
    fn hc_examples() {
        let ln = line(10, LineParams { r: 1.5, ..Default::default() });
        let tp = TargetProfile::constant_current(&ln, 0.4).unwrap();
        let f = tp.as_field();
        assert_abs_diff_eq!(hc_eval(&ln, &f, &tp, 3.0), -1.5 * 0.16, epsilon = 1e-14);

        let ln = line(10, LineParams { r: 0.0, ..Default::default() });
        let tp = TargetProfile::constant_current(&ln, 0.4).unwrap();
        let f = Field::from_fns(ln.grid(), |z| z.sin(), |z| z).unwrap();
        assert_abs_diff_eq!(hc_eval(&ln, &f, &tp, 0.0), 0.0, epsilon = 1e-15);
        let f = Field::from_fns(ln.grid(), |_| 1.4, |_| 0.0).unwrap();
        assert_abs_diff_eq!(hc_eval(&ln, &f, &tp, 2.0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pd_examples() {
        let ln = line(16, LineParams { r: 1.0, g: 7.0, ..Default::default() });
        let tp = TargetProfile::constant_current(&ln, 0.3).unwrap();
        let (_, at_target) = pd_eval(&ln, &tp.as_field(), &tp, 1.0);
        assert!(at_target.abs() <= 1e-15);
        let f = Field::from_fns(ln.grid(), |_| 1.3, |_| 0.0).unwrap();
        let (assembled, closed) = pd_eval(&ln, &f, &tp, 1.0);
        assert_abs_diff_eq!(closed, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(assembled, closed, epsilon = 1e-13);
    }

    #[test]
    fn shaped_rates_vanish_at_target() {
        let ln = line(24, LineParams { r: 0.5, g: 4.0, ..Default::default() });
        let i_star = ln.grid().sample(|z| 0.3 + 0.2 * z * z);
        let tp = TargetProfile::from_current(&ln, i_star).unwrap();
        let ctl = Controller::new(tp.clone(), 1.0, ClosedLoopMode::ShapedDynamics).unwrap();
        let (rates, _) = ctl.closed_loop_rhs(&ln, &FullState::with_controller(tp.as_field(), 0.0), 0.0).unwrap();
        assert!(rates.max_abs() <= 1e-10, "{}", rates.max_abs());
        assert!(ctl.equilibrium_residual(&ln, &tp.as_field()) <= 1e-10);
    }

    #[test]
    fn shaped_reduces_to_open_loop_without_gain_or_target() {
        let ln = line(24, LineParams { r: 0.5, g: 4.0, ..Default::default() });
        let tp = TargetProfile::constant_current(&ln, 0.0).unwrap();
        let ctl = Controller::new(tp, 0.0, ClosedLoopMode::ShapedDynamics).unwrap();
        let mut f = Field::from_fns(ln.grid(), |z| (3.0 * z).cos(), |z| z.exp()).unwrap();
        f.i[24] = 0.0;
        let shaped = ctl.shaped_rhs(&ln, &f);
        let open = ln.rhs_with_port(&f, &BoundaryMode::PassiveShort, 0.0);
        for k in 0..=24 {
            assert_abs_diff_eq!(shaped.i[k], open.i[k], epsilon = 1e-9);
            assert_abs_diff_eq!(shaped.v[k], open.v[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn missing_controller_in_interconnected_mode() {
        let ln = line(8, LineParams::default());
        let tp = TargetProfile::constant_current(&ln, 0.0).unwrap();
        let ctl = Controller::new(tp, 1.0, ClosedLoopMode::Interconnected).unwrap();
        let s = FullState::new(Field::zeros(ln.grid()));
        assert_eq!(ctl.closed_loop_rhs(&ln, &s, 0.0).unwrap_err(), Error::MissingController);
    }
}
