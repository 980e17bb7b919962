//! Telegrapher's equations in mixed-potential form, boundary terminations and
//! time stepping by the method of lines.
//!
//! The bulk equations at every node are
//!
//! ```text
//! L di/dt = -dv/dz - R i
//! C dv/dt = -di/dz - G v
//! ```
//!
//! with `d/dz` replaced by the summation-by-parts operator of
//! [`crate::grid`]. The rows at `z = 0` and `z = 1` are replaced according
//! to the [`BoundaryMode`]:
//!
//! * `SourceLoad`: `v_0 = E - R_0 i_0` is imposed algebraically after every
//!   stage and the end node follows `C_1 dv_1/dt = i_1 - v_1/R_1` (or
//!   `v_1 = R_1 i_1` when `C_1 = 0`).
//! * `PassiveShort` and `Controlled`: the far end is open, `i_1 = 0`
//!   (imposed exactly). The near end is a port with source voltage `u_0`
//!   behind the series resistor `R_0`, i.e. `v_0 + R_0 i_0 = u_0`. It enters
//!   the current equation of node 0 as a penalty
//!   `(2/dz)(u_0 - R_0 i_0 - v_0)/L`. With that penalty the discrete storage
//!   `P~ + R_0 i_0^2 / 2` obeys `d/dt <= u_0 di_0/dt` exactly (no truncation
//!   term) whenever the quadratic form of the admissible pair is
//!   non-positive. `PassiveShort` is the unforced case `u_0 = 0`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{h0_norm_sq, inner, trapezoid, DiscreteOp, Field, Grid};
use crate::ode::{blown_up, rk4_step, BLOW_UP_LIMIT};

/// Per-unit-length constants and terminations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    pub l: f64,
    pub c: f64,
    pub r: f64,
    pub g: f64,
    /// Source resistance at `z = 0`.
    pub r0: f64,
    /// Source voltage at `z = 0` (SourceLoad only).
    pub e: f64,
    /// Load resistance at `z = 1`.
    pub r1: f64,
    /// Load capacitance at `z = 1`.
    pub c1: f64,
}

impl Default for LineParams {
    fn default() -> Self {
        Self {
            l: 1.0,
            c: 1.0,
            r: 1.0,
            g: 1.0,
            r0: 0.0,
            e: 0.0,
            r1: 1.0,
            c1: 0.0,
        }
    }
}

impl LineParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.l, self.c, self.r, self.g, self.r0, self.e, self.r1, self.c1];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("line parameters"));
        }
        if self.g <= 0.0 {
            return Err(Error::InvalidParameter("G must be positive".into()));
        }
        if self.l <= 0.0 {
            return Err(Error::InvalidParameter("L must be positive".into()));
        }
        if self.c <= 0.0 {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if self.r < 0.0 {
            return Err(Error::InvalidParameter("R must be non-negative".into()));
        }
        if self.r0 < 0.0 {
            return Err(Error::InvalidParameter("R0 must be non-negative".into()));
        }
        if self.r1 <= 0.0 {
            return Err(Error::InvalidParameter("R1 must be positive".into()));
        }
        if self.c1 < 0.0 {
            return Err(Error::InvalidParameter("C1 must be non-negative".into()));
        }
        Ok(())
    }

    /// Wave speed `1/sqrt(LC)`.
    pub fn wave_speed(&self) -> f64 {
        1.0 / (self.l * self.c).sqrt()
    }

    /// Time for a wave to cross the unit line.
    pub fn transit_time(&self) -> f64 {
        (self.l * self.c).sqrt()
    }
}

/// Field plus the optional controller state. The load voltage `v_1` is the
/// last voltage node, so there is a single source of truth for it.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub field: Field,
    pub xi: Option<f64>,
}

impl FullState {
    pub fn new(field: Field) -> Self {
        Self { field, xi: None }
    }

    pub fn with_controller(field: Field, xi: f64) -> Self {
        Self { field, xi: Some(xi) }
    }

    pub fn i0(&self) -> f64 {
        self.field.i[0]
    }

    pub fn v0(&self) -> f64 {
        self.field.v[0]
    }

    pub fn i1(&self) -> f64 {
        *self.field.i.last().expect("non-empty field")
    }

    pub fn v1(&self) -> f64 {
        *self.field.v.last().expect("non-empty field")
    }
}

/// Time-dependent port voltage for [`BoundaryMode::Controlled`].
#[derive(Clone)]
pub enum PortDrive {
    Constant(f64),
    /// `ramp(t) * sum_j a_j sin(w_j t + phi_j)`, where the ramp rises
    /// smoothly from 0 to 1 over `ramp_time` (zero slope and curvature at both ends).
    Sinusoids {
        terms: Vec<(f64, f64, f64)>,
        ramp_time: f64,
    },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for PortDrive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(u) => write!(f, "Constant({u})"),
            Self::Sinusoids { terms, ramp_time } => f
                .debug_struct("Sinusoids")
                .field("terms", terms)
                .field("ramp_time", ramp_time)
                .finish(),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PortDrive {
    pub fn voltage(&self, t: f64) -> f64 {
        match self {
            Self::Constant(u) => *u,
            Self::Sinusoids { terms, ramp_time } => {
                let s = if *ramp_time > 0.0 { (t / ramp_time).clamp(0.0, 1.0) } else { 1.0 };
                let ramp = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                ramp * terms.iter().map(|(a, w, phi)| a * (w * t + phi).sin()).sum::<f64>()
            }
            Self::Custom(f) => f(t),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryMode {
    /// Source `E` behind `R_0` at `z = 0`, `R_1 || C_1` load at `z = 1`.
    SourceLoad,
    /// Open far end, near end closed through `R_0` with no source.
    PassiveShort,
    /// Open far end, near end driven by a port voltage behind `R_0`.
    Controlled(PortDrive),
}

impl BoundaryMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SourceLoad => "source-load",
            Self::PassiveShort => "passive-short",
            Self::Controlled(_) => "controlled",
        }
    }

    /// Port voltage `u_0` at time `t`; `None` for SourceLoad.
    pub fn port_voltage(&self, t: f64) -> Option<f64> {
        match self {
            Self::SourceLoad => None,
            Self::PassiveShort => Some(0.0),
            Self::Controlled(d) => Some(d.voltage(t)),
        }
    }

    pub fn is_port(&self) -> bool {
        !matches!(self, Self::SourceLoad)
    }
}

/// Grid, derivative operator and parameters of one line.
#[derive(Debug, Clone)]
pub struct Line {
    grid: Grid,
    op: DiscreteOp,
    params: LineParams,
}

/// Interior and boundary parts of the variational derivative of the
/// augmented mixed potential.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalDerivative {
    /// `-dv/dz - R i` at every node.
    pub di: Vec<f64>,
    /// `G v + di/dz` at every node.
    pub dv: Vec<f64>,
    /// Components for `(i_0, v_0, i_1, v_1)`.
    pub boundary: [f64; 4],
}

impl VariationalDerivative {
    /// Boundary-inclusive `H_0` norm of the stack. The bulk part is taken
    /// over the open interval, so the end nodes enter only through the
    /// boundary components.
    pub fn h0_norm(&self, grid: &Grid) -> f64 {
        let n = grid.n_cells();
        let mut di = self.di.clone();
        let mut dv = self.dv.clone();
        for k in [0, n] {
            di[k] = 0.0;
            dv[k] = 0.0;
        }
        let bulk = Field { i: di, v: dv };
        let b = self.boundary;
        let bulk_sq = h0_norm_sq(&bulk, grid).unwrap_or(f64::NAN);
        (bulk_sq + b[0] * b[0] + b[1] * b[1] + b[2] * b[2] + b[3] * b[3]).sqrt()
    }
}

impl Line {
    pub fn new(grid: Grid, params: LineParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid,
            op: DiscreteOp::sbp(grid),
            params,
        })
    }

    pub fn with_op(op: DiscreteOp, params: LineParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid: *op.grid(),
            op,
            params,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn op(&self) -> &DiscreteOp {
        &self.op
    }

    pub fn params(&self) -> &LineParams {
        &self.params
    }

    pub(crate) fn d(&self, f: &[f64]) -> Vec<f64> {
        self.op.apply_unchecked(f)
    }

    pub(crate) fn check(&self, field: &Field) -> Result<()> {
        self.grid.check_len(field.i.len())?;
        self.grid.check_len(field.v.len())
    }

    pub(crate) fn integral(&self, f: &[f64]) -> f64 {
        trapezoid(f, self.grid.dz())
    }

    pub(crate) fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        inner(f, g, self.grid.dz())
    }

    /// Bulk telegrapher rates at every node, no boundary treatment.
    pub fn bulk_rates(&self, field: &Field) -> Field {
        let p = &self.params;
        let dv = self.d(&field.v);
        let di = self.d(&field.i);
        Field {
            i: dv.iter().zip(&field.i).map(|(a, b)| -(a + p.r * b) / p.l).collect(),
            v: di.iter().zip(&field.v).map(|(a, b)| -(a + p.g * b) / p.c).collect(),
        }
    }

    /// Overwrite the boundary rows of `rates` for `mode`. `u0` is the port
    /// voltage (ignored for SourceLoad).
    pub fn apply_boundary_rates(&self, field: &Field, rates: &mut Field, mode: &BoundaryMode, u0: f64) {
        let p = &self.params;
        let n = self.grid.n_cells();
        match mode {
            BoundaryMode::SourceLoad => {
                rates.v[0] = -p.r0 * rates.i[0];
                rates.v[n] = if p.c1 > 0.0 {
                    (field.i[n] - field.v[n] / p.r1) / p.c1
                } else {
                    p.r1 * rates.i[n]
                };
            }
            BoundaryMode::PassiveShort | BoundaryMode::Controlled(_) => {
                rates.i[0] += self.port_penalty(field, u0) / p.l;
                rates.i[n] = 0.0;
            }
        }
    }

    /// Penalty `(2/dz)(u_0 - R_0 i_0 - v_0)` added to `L di_0/dt`.
    pub(crate) fn port_penalty(&self, field: &Field, u0: f64) -> f64 {
        2.0 / self.grid.dz() * (u0 - self.params.r0 * field.i[0] - field.v[0])
    }

    /// Re-impose the algebraic boundary rows.
    pub fn project(&self, field: &mut Field, mode: &BoundaryMode) {
        let p = &self.params;
        let n = self.grid.n_cells();
        match mode {
            BoundaryMode::SourceLoad => {
                field.v[0] = p.e - p.r0 * field.i[0];
                if p.c1 == 0.0 {
                    field.v[n] = p.r1 * field.i[n];
                }
            }
            BoundaryMode::PassiveShort | BoundaryMode::Controlled(_) => field.i[n] = 0.0,
        }
    }

    /// Rates with an explicit port voltage.
    pub fn rhs_with_port(&self, field: &Field, mode: &BoundaryMode, u0: f64) -> Field {
        let mut rates = self.bulk_rates(field);
        self.apply_boundary_rates(field, &mut rates, mode, u0);
        rates
    }

    /// Time derivative of the field under `mode` at time `t`.
    pub fn telegrapher_rhs(&self, s: &FullState, mode: &BoundaryMode, t: f64) -> Result<Field> {
        self.check(&s.field)?;
        let u0 = mode.port_voltage(t).unwrap_or(0.0);
        Ok(self.rhs_with_port(&s.field, mode, u0))
    }

    /// `P = int (-dv/dz i + G v^2/2 - R i^2/2) dz`.
    pub fn mixed_potential(&self, field: &Field) -> f64 {
        let p = &self.params;
        let dv = self.d(&field.v);
        let integrand: Vec<f64> = (0..field.len())
            .map(|k| -dv[k] * field.i[k] + 0.5 * p.g * field.v[k].powi(2) - 0.5 * p.r * field.i[k].powi(2))
            .collect();
        self.integral(&integrand)
    }

    /// `P + (E - v_0) i_0 - i_0^2 R_0/2 + v_1^2/(2 R_1)`.
    pub fn augmented_potential(&self, field: &Field) -> f64 {
        let p = &self.params;
        let (i0, v0) = (field.i[0], field.v[0]);
        let v1 = field.v[self.grid.n_cells()];
        self.mixed_potential(field) + (p.e - v0) * i0 - 0.5 * i0 * i0 * p.r0 + 0.5 * v1 * v1 / p.r1
    }

    /// Variational derivative of the augmented potential. For port modes the
    /// `i_0` component is the port residual `u_0 - v_0 - R_0 i_0` and the
    /// `i_1` component is the open-end residual `-i_1`.
    pub fn variational_derivative(&self, field: &Field, mode: &BoundaryMode, t: f64) -> VariationalDerivative {
        let p = &self.params;
        let n = self.grid.n_cells();
        let dv_dz = self.d(&field.v);
        let di_dz = self.d(&field.i);
        let di = (0..=n).map(|k| -dv_dz[k] - p.r * field.i[k]).collect();
        let dv = (0..=n).map(|k| p.g * field.v[k] + di_dz[k]).collect();
        let (i0, v0, i1, v1) = (field.i[0], field.v[0], field.i[n], field.v[n]);
        let boundary = match mode {
            BoundaryMode::SourceLoad => [p.e - v0 - p.r0 * i0, 0.0, 0.0, v1 / p.r1 - i1],
            _ => {
                let u0 = mode.port_voltage(t).unwrap_or(0.0);
                [u0 - v0 - p.r0 * i0, 0.0, -i1, 0.0]
            }
        };
        VariationalDerivative { di, dv, boundary }
    }

    /// Largest admissible step: the smaller of the CFL bound
    /// `cfl dz sqrt(LC)` and a Gershgorin bound on the stiffness of the
    /// semi-discrete system (RK4 stays stable for `|lambda dt| <= 2.5`).
    pub fn max_stable_dt(&self, mode: &BoundaryMode, cfl: f64) -> f64 {
        let p = &self.params;
        let dz = self.grid.dz();
        let cfl_dt = cfl * dz * (p.l * p.c).sqrt();
        let mut rho = (p.r / p.l + 2.0 / (p.l * dz)).max(p.g / p.c + 2.0 / (p.c * dz));
        match mode {
            BoundaryMode::SourceLoad => {
                if p.c1 > 0.0 {
                    rho = rho.max((1.0 + 1.0 / p.r1) / p.c1);
                }
                // v_0 follows i_0 through R_0.
                rho = rho.max((1.0 + p.r0) * (p.r / p.l + 2.0 / (p.l * dz)));
            }
            _ => rho = rho.max(p.r / p.l + 2.0 / (p.l * dz) * (2.0 + p.r0)),
        }
        cfl_dt.min(2.5 / rho)
    }
}

/// Time-stepping settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// `None` picks the largest stable step that divides `t_end`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Log every `stride`-th step.
    pub stride: usize,
    pub cfl_safety: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: 1.0,
            stride: 1,
            cfl_safety: 0.5,
        }
    }
}

impl SimConfig {
    pub fn resolve_dt(&self, limit: f64) -> Result<f64> {
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter("t_end must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        match self.dt {
            Some(dt) if !(dt > 0.0) => Err(Error::InvalidParameter("dt must be positive".into())),
            Some(dt) if dt > limit * (1.0 + 1e-12) => Err(Error::StepTooLarge { dt, suggested: limit }),
            Some(dt) => Ok(dt),
            None => Ok(self.t_end / (self.t_end / limit).ceil()),
        }
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub field: Field,
    /// Field rates at this sample (from the right-hand side, not differences).
    pub rates: Field,
    /// Port voltage `u_0` (0 for SourceLoad).
    pub u0: f64,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    /// Time between consecutive samples.
    pub sample_dt: f64,
    pub samples: Vec<Sample>,
    pub mode: String,
    /// Diagnostics raised during the run.
    pub notes: Vec<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub(crate) fn flatten(field: &Field) -> Vec<f64> {
    let mut y = field.i.clone();
    y.extend_from_slice(&field.v);
    y
}

pub(crate) fn unflatten(y: &[f64]) -> Field {
    let m = y.len() / 2;
    Field {
        i: y[..m].to_vec(),
        v: y[m..2 * m].to_vec(),
    }
}

impl Line {
    /// One RK4 step of the line under `mode` starting at time `t`.
    pub fn step(&self, field: &Field, mode: &BoundaryMode, t: f64, dt: f64) -> Result<Field> {
        self.check(field)?;
        let y = flatten(field);
        let mut f = |t: f64, y: &[f64]| {
            let fl = unflatten(y);
            flatten(&self.rhs_with_port(&fl, mode, mode.port_voltage(t).unwrap_or(0.0)))
        };
        let project = |_t: f64, y: &mut [f64]| {
            let mut fl = unflatten(y);
            self.project(&mut fl, mode);
            y.copy_from_slice(&flatten(&fl));
        };
        let out = rk4_step(&mut f, &project, t, &y, dt);
        if blown_up(&out) {
            return Err(Error::BlowUp { step: 0, limit: BLOW_UP_LIMIT });
        }
        Ok(unflatten(&out))
    }

    /// Integrate from `initial` and log every `stride`-th step.
    pub fn simulate(&self, initial: &Field, mode: &BoundaryMode, cfg: &SimConfig) -> Result<Trajectory> {
        self.check(initial)?;
        let dt = cfg.resolve_dt(self.max_stable_dt(mode, cfg.cfl_safety))?;
        let steps = (cfg.t_end / dt).round().max(1.0) as usize;
        let mut notes = Vec::new();
        if matches!(mode, BoundaryMode::SourceLoad) && self.params.c1 == 0.0 {
            notes.push("C1 = 0: load treated as the algebraic relation v1 = R1 i1".to_string());
        }
        let mut field = initial.clone();
        self.project(&mut field, mode);
        let mut samples = Vec::with_capacity(steps / cfg.stride + 2);
        let record = |t: f64, field: &Field| {
            let u0 = mode.port_voltage(t).unwrap_or(0.0);
            Sample {
                t,
                field: field.clone(),
                rates: self.rhs_with_port(field, mode, u0),
                u0,
                xi: None,
            }
        };
        samples.push(record(0.0, &field));
        for step in 0..steps {
            let t = step as f64 * dt;
            field = self.step(&field, mode, t, dt).map_err(|e| match e {
                Error::BlowUp { limit, .. } => Error::BlowUp { step: step + 1, limit },
                other => other,
            })?;
            if (step + 1) % cfg.stride == 0 || step + 1 == steps {
                samples.push(record((step + 1) as f64 * dt, &field));
            }
        }
        Ok(Trajectory {
            grid: self.grid,
            sample_dt: dt * cfg.stride as f64,
            samples,
            mode: mode.name().to_string(),
            notes,
        })
    }

    /// CSV with `t`, `i` and `v` at the probe positions, `P`, the augmented
    /// potential and the equilibrium residual `||delta P||_0`.
    pub fn trajectory_csv(&self, traj: &Trajectory, mode: &BoundaryMode, probes: &[f64]) -> String {
        let idx: Vec<usize> = probes.iter().map(|&z| self.grid.nearest(z)).collect();
        let mut out = String::from("t");
        for &k in &idx {
            let _ = write!(out, ",i@{}", self.grid.z(k));
        }
        for &k in &idx {
            let _ = write!(out, ",v@{}", self.grid.z(k));
        }
        out.push_str(",P,P_aug,eq_residual\n");
        for s in &traj.samples {
            let _ = write!(out, "{}", s.t);
            for &k in &idx {
                let _ = write!(out, ",{}", s.field.i[k]);
            }
            for &k in &idx {
                let _ = write!(out, ",{}", s.field.v[k]);
            }
            let res = self.variational_derivative(&s.field, mode, s.t).h0_norm(&self.grid);
            let _ = writeln!(
                out,
                ",{},{},{}",
                self.mixed_potential(&s.field),
                self.augmented_potential(&s.field),
                res
            );
        }
        out
    }
}

/// Plain text `z i v` columns of a full field.
pub fn snapshot_text(grid: &Grid, field: &Field) -> String {
    let mut out = String::from("# z i v\n");
    for k in 0..grid.n_nodes() {
        let _ = writeln!(out, "{} {} {}", grid.z(k), field.i[k], field.v[k]);
    }
    out
}
