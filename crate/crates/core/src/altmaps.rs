//! Storage functionals in the derivative ports `(di/dt, dv/dt)`.
//!
//! ```text
//! P1 = int (-R i^2/2 + G v^2/2 - i dv/dz) dz        (the mixed potential)
//! P2 = (1/2) int (L i_t^2 + C v_t^2) dz
//! P^ = lambda P1 + P2
//! ```
//!
//! Along solutions
//!
//! ```text
//! dP1/dt = L int i_t^2 - C int v_t^2 - (i v_t)|_0^1
//! dP2/dt = -R int i_t^2 - G int v_t^2 - (v_t i_t)|_0^1
//! dP^/dt + (v_t i_t)|_0^1 + lambda (i v_t)|_0^1
//!        = -(R - lambda L) int i_t^2 - (G + lambda C) int v_t^2
//! ```
//!
//! so the map from the derivative ports is passive for `0 < lambda < R/L`.
//! Without the `1/2` in `P2` its rate picks up a factor 2; that convention is
//! available through [`AltMapConfig::half_p2`].
//!
//! On the grid the near-end port is a penalty, so the node value `v_0` only
//! approximates the port trace `v^_0 = u_0 - R_0 i_0`. The boundary terms use
//! `v^_0`, and the monitored `P1` carries the matching correction
//! `i_0 (v^_0 - v_0)`; with these the identities above hold exactly for the
//! semi-discrete system.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::line::{Line, Trajectory};
use crate::monitor::{interior_range, require_samples, time_derivative, FunctionalReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltMapConfig {
    pub lambda: f64,
    pub half_p2: bool,
    /// `0 < lambda < R/L`, fixed at construction.
    pub window_ok: bool,
}

impl AltMapConfig {
    pub fn new(lambda: f64, half_p2: bool, line: &Line) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::NonFinite("lambda"));
        }
        let p = line.params();
        Ok(Self {
            lambda,
            half_p2,
            window_ok: lambda > 0.0 && lambda < p.r / p.l,
        })
    }

    fn p2_weight(&self) -> f64 {
        if self.half_p2 {
            1.0
        } else {
            2.0
        }
    }
}

pub fn p1_eval(line: &Line, field: &Field) -> f64 {
    line.mixed_potential(field)
}

/// `rate` is the field's time derivative.
pub fn p2_eval(line: &Line, rate: &Field, cfg: &AltMapConfig) -> f64 {
    let p = line.params();
    let density: Vec<f64> = (0..rate.len())
        .map(|k| p.l * rate.i[k].powi(2) + p.c * rate.v[k].powi(2))
        .collect();
    0.5 * cfg.p2_weight() * line.integral(&density)
}

pub fn phat_eval(line: &Line, field: &Field, rate: &Field, cfg: &AltMapConfig) -> f64 {
    cfg.lambda * p1_eval(line, field) + p2_eval(line, rate, cfg)
}

/// Per-sample series behind the monitor.
#[derive(Debug, Clone)]
pub struct AltMapSeries {
    pub times: Vec<f64>,
    /// `P1` with the port-trace correction.
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub phat: Vec<f64>,
    /// `(i v^_t)|_0^1`.
    pub flow_i_vt: Vec<f64>,
    /// `(v^_t i_t)|_0^1`.
    pub flow_vt_it: Vec<f64>,
    /// `int i_t^2` and `int v_t^2`.
    pub it_sq: Vec<f64>,
    pub vt_sq: Vec<f64>,
}

/// Evaluate the functionals and boundary terms along `traj`.
pub fn altmap_series(line: &Line, traj: &Trajectory, cfg: &AltMapConfig) -> Result<AltMapSeries> {
    require_samples(traj.len(), 5)?;
    let n = line.grid().n_cells();
    let r0 = line.params().r0;
    let port = traj.mode != "source-load";
    let u0: Vec<f64> = traj.samples.iter().map(|s| s.u0).collect();
    let du0 = time_derivative(&u0, traj.sample_dt);
    let mut out = AltMapSeries {
        times: traj.times(),
        p1: Vec::new(),
        p2: Vec::new(),
        phat: Vec::new(),
        flow_i_vt: Vec::new(),
        flow_vt_it: Vec::new(),
        it_sq: Vec::new(),
        vt_sq: Vec::new(),
    };
    for (j, s) in traj.samples.iter().enumerate() {
        let (f, r) = (&s.field, &s.rates);
        let (trace0, trace0_t) = if port {
            (s.u0 - r0 * f.i[0], du0[j] - r0 * r.i[0])
        } else {
            (f.v[0], r.v[0])
        };
        let p1 = p1_eval(line, f) + f.i[0] * (trace0 - f.v[0]);
        let p2 = p2_eval(line, r, cfg);
        out.p1.push(p1);
        out.p2.push(p2);
        out.phat.push(cfg.lambda * p1 + p2);
        out.flow_i_vt.push(f.i[n] * r.v[n] - f.i[0] * trace0_t);
        out.flow_vt_it.push(r.v[n] * r.i[n] - trace0_t * r.i[0]);
        out.it_sq.push(line.inner(&r.i, &r.i));
        out.vt_sq.push(line.inner(&r.v, &r.v));
    }
    Ok(out)
}

/// Which sign of the `(v_t i_t)|_0^1` supply the data supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupplySign {
    /// `dP^/dt <= -(v_t i_t)|_0^1 - lambda (i v_t)|_0^1`.
    Minus,
    /// `dP^/dt <= +(v_t i_t)|_0^1 - lambda (i v_t)|_0^1`.
    Plus,
    Both,
    Neither,
}

#[derive(Debug, Clone)]
pub struct AltMapReport {
    pub lambda: f64,
    pub window_ok: bool,
    /// Largest `dP^/dt + (v_t i_t)|_0^1 + lambda (i v_t)|_0^1`.
    pub max_residual: f64,
    /// The same with the `(v_t i_t)` supply sign flipped.
    pub max_residual_plus: f64,
    pub tol: f64,
    pub violation_observed: bool,
    pub supported_sign: SupplySign,
    pub functional: FunctionalReport,
}

impl AltMapReport {
    /// The inequality is only claimed inside the window.
    pub fn holds(&self) -> bool {
        !self.window_ok || !self.violation_observed
    }
}

impl fmt::Display for AltMapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lambda = {}", self.lambda)?;
        writeln!(f, "window_ok = {}", self.window_ok)?;
        writeln!(f, "max_residual = {:e}", self.max_residual)?;
        writeln!(f, "tol = {:e}", self.tol)?;
        writeln!(f, "violation_observed = {}", self.violation_observed)?;
        writeln!(f, "supported_sign = {:?}", self.supported_sign)
    }
}

/// Check the derivative-port inequality along `traj`. The tolerance is
/// `1e-6` of the largest `|dP^/dt|`.
pub fn phat_rate_monitor(line: &Line, traj: &Trajectory, cfg: &AltMapConfig) -> Result<AltMapReport> {
    let series = altmap_series(line, traj, cfg)?;
    let w = cfg.p2_weight();
    let rates = time_derivative(&series.phat, traj.sample_dt);
    let bounds: Vec<f64> = (0..rates.len())
        .map(|j| -w * series.flow_vt_it[j] - cfg.lambda * series.flow_i_vt[j])
        .collect();
    let functional = FunctionalReport::new("P^", series.times.clone(), series.phat.clone(), rates.clone(), bounds, 1e-6);
    let mut max_plus = f64::NEG_INFINITY;
    for j in interior_range(rates.len()) {
        let plus = rates[j] - w * series.flow_vt_it[j] + cfg.lambda * series.flow_i_vt[j];
        max_plus = max_plus.max(plus);
    }
    let tol = functional.tol;
    let max_residual = functional.max_violation;
    let supported_sign = match (max_residual <= tol, max_plus <= tol) {
        (true, true) => SupplySign::Both,
        (true, false) => SupplySign::Minus,
        (false, true) => SupplySign::Plus,
        (false, false) => SupplySign::Neither,
    };
    Ok(AltMapReport {
        lambda: cfg.lambda,
        window_ok: cfg.window_ok,
        max_residual,
        max_residual_plus: max_plus,
        tol,
        violation_observed: max_residual > tol,
        supported_sign,
        functional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::line::{BoundaryMode, LineParams, SimConfig};
    use approx::assert_abs_diff_eq;

    fn line(p: LineParams) -> Line {
        Line::new(Grid::new(20).unwrap(), p).unwrap()
    }

    #[test]
    fn functional_examples() {
        let ln = line(LineParams { r: 2.0, ..Default::default() });
        let cfg = AltMapConfig::new(0.5, true, &ln).unwrap();
        let zero = Field::zeros(ln.grid());
        assert_eq!(p1_eval(&ln, &zero), 0.0);
        assert_eq!(p2_eval(&ln, &zero, &cfg), 0.0);
        assert_eq!(phat_eval(&ln, &zero, &zero, &cfg), 0.0);
        let f = Field::from_fns(ln.grid(), |_| 1.0, |_| 0.0).unwrap();
        assert_abs_diff_eq!(p1_eval(&ln, &f), -1.0, epsilon = 1e-14);
        let unit = Field::from_fns(ln.grid(), |_| 1.0, |_| 1.0).unwrap();
        let half = p2_eval(&ln, &unit, &cfg);
        let full = p2_eval(&ln, &unit, &AltMapConfig { half_p2: false, ..cfg });
        assert_abs_diff_eq!(half, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(full, 2.0 * half, epsilon = 1e-14);
    }

    #[test]
    fn window_flag() {
        let ln = line(LineParams { r: 2.0, l: 4.0, ..Default::default() });
        assert!(AltMapConfig::new(0.25, true, &ln).unwrap().window_ok);
        assert!(!AltMapConfig::new(0.5, true, &ln).unwrap().window_ok);
        assert!(!AltMapConfig::new(0.0, true, &ln).unwrap().window_ok);
        assert!(AltMapConfig::new(f64::NAN, true, &ln).is_err());
    }

    #[test]
    fn equilibrium_trajectory_is_flat() {
        let ln = line(LineParams::default());
        let cfg = AltMapConfig::new(0.5, true, &ln).unwrap();
        let traj = ln
            .simulate(&Field::zeros(ln.grid()), &BoundaryMode::PassiveShort, &SimConfig { t_end: 0.1, ..Default::default() })
            .unwrap();
        let rep = phat_rate_monitor(&ln, &traj, &cfg).unwrap();
        assert_eq!(rep.max_residual, 0.0);
        assert!(rep.holds());
    }

    #[test]
    fn short_trajectory_rejected() {
        let ln = line(LineParams::default());
        let cfg = AltMapConfig::new(0.5, true, &ln).unwrap();
        let mut traj = ln
            .simulate(&Field::zeros(ln.grid()), &BoundaryMode::PassiveShort, &SimConfig { t_end: 0.1, ..Default::default() })
            .unwrap();
        traj.samples.truncate(4);
        assert!(matches!(phat_rate_monitor(&ln, &traj, &cfg), Err(Error::TrajectoryTooShort { .. })));
    }
}
