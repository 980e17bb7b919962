//! Admissible pair `(A~, P~)` of the line, the per-grid stability condition
//! and the boundary passivity monitor.
//!
//! A pair is built from a scalar `lambda` and a diagonal `K`:
//!
//! ```text
//! P~ = lambda P_0 + (1/2) int dP . K dP dz
//! ```
//!
//! where `dP = (-dv/dz - R i, G v + di/dz)` is the bulk variational
//! derivative and `P_0 = P + (i v)|_0^1 = int (v di/dz + G v^2/2 - R i^2/2)`
//! is the mixed potential with its boundary flow term removed (the two agree
//! whenever no power crosses the ends). For `lambda = -1`, `K = diag(0, 2/G)`
//! this is
//!
//! ```text
//! P~ = int (R i^2/2 + G v^2/2 + v di/dz + (di/dz)^2/G) dz
//!    = int ((di/dz + G v)^2/(2G) + (di/dz)^2/(2G) + R i^2/2) dz  >= 0
//! ```
//!
//! Along port-mode trajectories the discrete storage satisfies
//!
//! ```text
//! d/dt (P~ + R_0 i_0^2/2) = Q(di/dt, dv/dt) + u_0 di_0/dt
//! Q(a, b) = -L |a|^2 - C |b|^2 - (2C/G) <b, D a>
//! ```
//!
//! and `Q <= 0` as soon as `sqrt(C/L)/G ||D|| <= 1`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{DiscreteOp, Field, PowerIteration};
use crate::line::{BoundaryMode, Line, LineParams, Trajectory};
use crate::monitor::{require_samples, time_derivative, FunctionalReport};

/// `(lambda, K)` bound to a line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissiblePair {
    pub lambda: f64,
    pub k_diag: [f64; 2],
}

impl AdmissiblePair {
    pub fn new(lambda: f64, k_diag: [f64; 2], p: &LineParams) -> Result<Self> {
        if p.g <= 0.0 {
            return Err(Error::InvalidParameter("G must be positive".into()));
        }
        if k_diag.iter().any(|k| *k < 0.0 || !k.is_finite()) {
            return Err(Error::InvalidParameter("K entries must be non-negative".into()));
        }
        Ok(Self { lambda, k_diag })
    }

    /// `lambda = -1`, `K = diag(0, 2/G)`.
    pub fn standard(p: &LineParams) -> Result<Self> {
        if p.g <= 0.0 {
            return Err(Error::InvalidParameter("G must be positive".into()));
        }
        Self::new(-1.0, [0.0, 2.0 / p.g], p)
    }

    /// `P~` of `field` on `line`.
    pub fn ptilde(&self, line: &Line, field: &Field) -> f64 {
        let p = line.params();
        let n = line.grid().n_cells();
        let dv_dz = line.d(&field.v);
        let di_dz = line.d(&field.i);
        let density: Vec<f64> = (0..=n)
            .map(|k| {
                let d_i = -dv_dz[k] - p.r * field.i[k];
                let d_v = p.g * field.v[k] + di_dz[k];
                0.5 * (self.k_diag[0] * d_i * d_i + self.k_diag[1] * d_v * d_v)
            })
            .collect();
        let flow = field.i[n] * field.v[n] - field.i[0] * field.v[0];
        self.lambda * (line.mixed_potential(field) + flow) + line.integral(&density)
    }
}

/// `P~` for the standard pair in its expanded and completed-square forms.
pub fn ptilde_two_forms(line: &Line, field: &Field) -> (f64, f64) {
    let p = line.params();
    let di = line.d(&field.i);
    let n = field.len();
    let raw: Vec<f64> = (0..n)
        .map(|k| {
            0.5 * p.r * field.i[k].powi(2) + 0.5 * p.g * field.v[k].powi(2) + field.v[k] * di[k] + di[k].powi(2) / p.g
        })
        .collect();
    let squares: Vec<f64> = (0..n)
        .map(|k| {
            (di[k] + p.g * field.v[k]).powi(2) / (2.0 * p.g) + di[k].powi(2) / (2.0 * p.g) + 0.5 * p.r * field.i[k].powi(2)
        })
        .collect();
    (line.integral(&raw), line.integral(&squares))
}

/// Completed-square `P~` (the storage used by the monitors).
pub fn ptilde(line: &Line, field: &Field) -> f64 {
    ptilde_two_forms(line, field).1
}

/// Quadratic form `Q(di/dt, dv/dt)` of the admissible pair.
pub fn atilde_negativity(line: &Line, rates: &Field) -> f64 {
    let p = line.params();
    let d_it = line.d(&rates.i);
    -p.l * line.inner(&rates.i, &rates.i) - p.c * line.inner(&rates.v, &rates.v)
        - 2.0 * p.c / p.g * line.inner(&rates.v, &d_it)
}

/// Bulk variational derivative of the standard `P~`:
/// `(R i - dv/dz - (2/G) d^2 i/dz^2, G v + di/dz)`.
pub fn ptilde_variational(line: &Line, field: &Field) -> Field {
    let p = line.params();
    let di = line.d(&field.i);
    let ddi = line.d(&di);
    let dv = line.d(&field.v);
    Field {
        i: (0..field.len()).map(|k| p.r * field.i[k] - dv[k] - 2.0 / p.g * ddi[k]).collect(),
        v: (0..field.len()).map(|k| p.g * field.v[k] + di[k]).collect(),
    }
}

/// Apply `A~^{-1} = [[-1/L, -(2/(G L)) d/dz], [0, -1/C]]` to a gradient.
pub fn apply_atilde_inverse(line: &Line, grad: &Field) -> Field {
    let p = line.params();
    let d_gv = line.d(&grad.v);
    Field {
        i: (0..grad.len()).map(|k| -(grad.i[k] + 2.0 / p.g * d_gv[k]) / p.l).collect(),
        v: grad.v.iter().map(|x| -x / p.c).collect(),
    }
}

/// Line rates computed as `A~^{-1} dP~` with the boundary rows of `mode`.
pub fn atilde_rhs(line: &Line, field: &Field, mode: &BoundaryMode, u0: f64) -> Field {
    let mut rates = apply_atilde_inverse(line, &ptilde_variational(line, field));
    line.apply_boundary_rates(field, &mut rates, mode, u0);
    rates
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub op_norm: f64,
    /// `sqrt(C/L)/G ||D||`.
    pub lhs: f64,
    pub holds: bool,
}

/// Per-grid check of `sqrt(C/L)/G ||d/dz|| <= 1`.
pub fn stability_condition(p: &LineParams, op: &DiscreteOp) -> Result<StabilityReport> {
    let op_norm = op.norm(PowerIteration::default())?;
    Ok(stability_from_norm(p, op_norm))
}

pub fn stability_from_norm(p: &LineParams, op_norm: f64) -> StabilityReport {
    let lhs = (p.c / p.l).sqrt() / p.g * op_norm;
    StabilityReport { op_norm, lhs, holds: lhs <= 1.0 }
}

/// Smallest `G` for which the stability condition holds with `lhs = target`.
pub fn conductance_for(p: &LineParams, op_norm: f64, target_lhs: f64) -> f64 {
    (p.c / p.l).sqrt() * op_norm / target_lhs
}

fn require_port(traj: &Trajectory) -> Result<()> {
    if traj.mode == BoundaryMode::SourceLoad.name() {
        return Err(Error::ModeMismatch("monitor needs an open far end (passive-short or controlled)"));
    }
    Ok(())
}

/// `d/dt (P~ + R_0 i_0^2/2) <= u_0 di_0/dt` along a port-mode trajectory.
/// Rates are centered differences of the logged samples.
pub fn boundary_passivity_monitor(line: &Line, traj: &Trajectory) -> Result<FunctionalReport> {
    require_port(traj)?;
    require_samples(traj.len(), 3)?;
    let r0 = line.params().r0;
    let values: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| ptilde(line, &s.field) + 0.5 * r0 * s.field.i[0].powi(2))
        .collect();
    let i0: Vec<f64> = traj.samples.iter().map(|s| s.field.i[0]).collect();
    let rates = time_derivative(&values, traj.sample_dt);
    let di0 = time_derivative(&i0, traj.sample_dt);
    let bounds = traj.samples.iter().zip(&di0).map(|(s, d)| s.u0 * d).collect();
    Ok(FunctionalReport::new("P_tilde+R0*i0^2/2", traj.times(), values, rates, bounds, 1e-6))
}

/// `dP~/dt <= 0` along a trajectory with no boundary flow.
pub fn dissipation_monitor(line: &Line, traj: &Trajectory) -> Result<FunctionalReport> {
    require_port(traj)?;
    require_samples(traj.len(), 3)?;
    let values: Vec<f64> = traj.samples.iter().map(|s| ptilde(line, &s.field)).collect();
    let rates = time_derivative(&values, traj.sample_dt);
    let n = values.len();
    Ok(FunctionalReport::new("P_tilde", traj.times(), values, rates, vec![0.0; n], 1e-8))
}

/// `{lhs, holds, max_violation, tol}` block.
pub fn report_block(stab: &StabilityReport, rep: &FunctionalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lhs = {}", stab.lhs);
    let _ = writeln!(out, "holds = {}", stab.holds);
    let _ = writeln!(out, "max_violation = {}", rep.max_violation);
    let _ = writeln!(out, "tol = {}", rep.tol);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_abs_diff_eq;

    fn line(n: usize, p: LineParams) -> Line {
        Line::new(Grid::new(n).unwrap(), p).unwrap()
    }

    #[test]
    fn standard_pair_examples() {
        let ln = line(10, LineParams { g: 2.0, ..Default::default() });
        let pair = AdmissiblePair::standard(ln.params()).unwrap();
        assert_eq!(pair.ptilde(&ln, &Field::zeros(ln.grid())), 0.0);
        let f = Field::from_fns(ln.grid(), |_| 0.0, |_| 1.0).unwrap();
        assert_abs_diff_eq!(pair.ptilde(&ln, &f), 1.0, epsilon = 1e-14);

        let n = 10;
        let ln = line(n, LineParams { r: 1.0, g: 1.0, ..Default::default() });
        let pair = AdmissiblePair::standard(ln.params()).unwrap();
        let f = Field::from_fns(ln.grid(), |z| z, |_| 0.0).unwrap();
        // Trapezoid of z^2 overshoots 1/3 by dz^2/6.
        let dz = 1.0 / n as f64;
        assert_abs_diff_eq!(pair.ptilde(&ln, &f), 7.0 / 6.0 + dz * dz / 12.0, epsilon = 1e-13);
    }

    #[test]
    fn construction_errors() {
        let p = LineParams::default();
        assert!(AdmissiblePair::new(-1.0, [0.0, -1.0], &p).is_err());
        let bad = LineParams { g: 0.0, ..p };
        assert!(AdmissiblePair::standard(&bad).is_err());
    }

    #[test]
    fn quadratic_form_examples() {
        let ln = line(8, LineParams { c: 3.0, ..Default::default() });
        assert_eq!(atilde_negativity(&ln, &Field::zeros(ln.grid())), 0.0);
        let rates = Field::from_fns(ln.grid(), |_| 0.0, |z| 1.0 + z).unwrap();
        let expected = -3.0 * ln.inner(&rates.v, &rates.v);
        assert_abs_diff_eq!(atilde_negativity(&ln, &rates), expected, epsilon = 1e-14);
        assert!(expected < 0.0);
    }

    #[test]
    fn stability_condition_scales_with_g() {
        let op = DiscreteOp::sbp(Grid::new(20).unwrap());
        let p = LineParams::default();
        let a = stability_condition(&p, &op).unwrap();
        let b = stability_condition(&LineParams { g: 2.0, ..p }, &op).unwrap();
        assert_abs_diff_eq!(b.lhs, 0.5 * a.lhs, epsilon = 1e-12);
        let big = stability_condition(&LineParams { g: 2.0 * a.op_norm, ..p }, &op).unwrap();
        assert!(big.holds && big.lhs < 1.0);
    }

    #[test]
    fn unit_line_fails_condition_at_100_cells() {
        let op = DiscreteOp::sbp(Grid::new(100).unwrap());
        let rep = stability_condition(&LineParams::default(), &op).unwrap();
        assert!(!rep.holds && rep.lhs > 50.0);
    }

    #[test]
    fn monitor_rejects_source_load_and_short_runs() {
        let ln = line(8, LineParams::default());
        let cfg = crate::line::SimConfig { t_end: 0.05, ..Default::default() };
        let tr = ln.simulate(&Field::zeros(ln.grid()), &BoundaryMode::SourceLoad, &cfg).unwrap();
        assert!(matches!(boundary_passivity_monitor(&ln, &tr), Err(Error::ModeMismatch(_))));
        let mut tr = ln.simulate(&Field::zeros(ln.grid()), &BoundaryMode::PassiveShort, &cfg).unwrap();
        tr.samples.truncate(2);
        assert!(matches!(
            boundary_passivity_monitor(&ln, &tr),
            Err(Error::TrajectoryTooShort { needed: 3, got: 2 })
        ));
    }
}
