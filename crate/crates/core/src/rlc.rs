//! Series-RL / parallel-RC circuit in mixed-potential form with the
//! power-shaping voltage controller.
//!
//! The circuit is a source `v_S` driving an inductor `L` with series
//! resistance `R_L` into a capacitor `C` shunted by `R_C`. With
//! `A = diag(-L, C)` the dynamics read
//!
//! ```text
//! A [di_L/dt, dv_C/dt]^T = grad P + [-1, 0]^T v_S
//! P = -(R_C/2)(v_C/R_C - i_L)^2 + (1/2)(R_L + R_C) i_L^2
//! ```
//!
//! The sign-flipped potential `P~` is a storage function for the port
//! `(v_S, di_L/dt)` whenever `L >= R_C^2 C`, and the controller
//! `v_S = -K (i_L - i*) + (R_L + R_C) i*` makes
//! `P~_d = (R_C/2)(v_C/R_C - i_L)^2 + (1/2)(R_L + R_C + K)(i_L - i*)^2`
//! a Lyapunov function for the target.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::monitor::{time_derivative, FunctionalReport};
use crate::ode::{blown_up, rk4_step, BLOW_UP_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlcParams {
    pub l: f64,
    pub c: f64,
    pub r_l: f64,
    pub r_c: f64,
    /// Controller gain `K >= 0`.
    pub k: f64,
    /// Source voltage that defines the target equilibrium.
    pub v_s_star: f64,
}

impl RlcParams {
    pub fn new(l: f64, c: f64, r_l: f64, r_c: f64, k: f64, v_s_star: f64) -> Result<Self> {
        let p = Self { l, c, r_l, r_c, k, v_s_star };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.l, self.c, self.r_l, self.r_c, self.k, self.v_s_star];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rlc parameters"));
        }
        if self.l < 0.0 || self.c < 0.0 {
            return Err(Error::InvalidParameter("L and C must be non-negative".into()));
        }
        if self.r_l < 0.0 {
            return Err(Error::InvalidParameter("R_L must be non-negative".into()));
        }
        if self.r_c <= 0.0 {
            return Err(Error::InvalidParameter("R_C must be positive".into()));
        }
        if self.k < 0.0 {
            return Err(Error::InvalidParameter("K must be non-negative".into()));
        }
        Ok(())
    }

    /// `L >= R_C^2 C`: the admissible pair yields a passive map.
    pub fn admissible(&self) -> bool {
        self.l >= self.r_c * self.r_c * self.c
    }

    /// `min(L, C) / (20 (R_L + R_C + K + 1))`.
    pub fn default_dt(&self) -> f64 {
        self.l.min(self.c) / (20.0 * (self.r_l + self.r_c + self.k + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RlcState {
    pub i_l: f64,
    pub v_c: f64,
}

impl RlcState {
    pub fn new(i_l: f64, v_c: f64) -> Self {
        Self { i_l, v_c }
    }
}

/// `(di_L/dt, dv_C/dt)` for source voltage `v_s`.
pub fn rlc_rhs(s: RlcState, p: &RlcParams, v_s: f64) -> Result<RlcState> {
    if p.l == 0.0 {
        return Err(Error::Singular("L = 0"));
    }
    if p.c == 0.0 {
        return Err(Error::Singular("C = 0"));
    }
    // grad P
    let dp_di = s.v_c + p.r_l * s.i_l;
    let dp_dv = s.i_l - s.v_c / p.r_c;
    // A = diag(-L, C)
    Ok(RlcState {
        i_l: (dp_di - v_s) / -p.l,
        v_c: dp_dv / p.c,
    })
}

/// `i* = v_S*/(R_C + R_L)`, `v* = R_C i*`.
pub fn rlc_equilibrium(p: &RlcParams) -> Result<RlcState> {
    let r = p.r_c + p.r_l;
    if r == 0.0 {
        return Err(Error::InvalidParameter("R_C + R_L must be non-zero".into()));
    }
    let i = p.v_s_star / r;
    Ok(RlcState { i_l: i, v_c: p.r_c * i })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlcPotentials {
    pub p: f64,
    pub p_tilde: f64,
    pub p_tilde_d: f64,
}

pub fn rlc_potentials(s: RlcState, p: &RlcParams) -> Result<RlcPotentials> {
    let eq = rlc_equilibrium(p)?;
    let mix = s.v_c / p.r_c - s.i_l;
    let res = 0.5 * (p.r_l + p.r_c) * s.i_l * s.i_l;
    let dev = s.i_l - eq.i_l;
    Ok(RlcPotentials {
        p: -0.5 * p.r_c * mix * mix + res,
        p_tilde: 0.5 * p.r_c * mix * mix + res,
        p_tilde_d: 0.5 * p.r_c * mix * mix + 0.5 * (p.r_l + p.r_c + p.k) * dev * dev,
    })
}

/// `v_S = -K (i_L - i*) + (R_L + R_C) i*`.
pub fn rlc_control(s: RlcState, p: &RlcParams) -> Result<f64> {
    let eq = rlc_equilibrium(p)?;
    Ok(-p.k * (s.i_l - eq.i_l) + (p.r_l + p.r_c) * eq.i_l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlcSample {
    pub t: f64,
    pub state: RlcState,
    pub v_s: f64,
    pub potentials: RlcPotentials,
}

#[derive(Debug, Clone)]
pub struct RlcRun {
    pub samples: Vec<RlcSample>,
    /// Rate monitor for `P~_d` against the bound 0.
    pub report: FunctionalReport,
    /// Largest one-step increase of `P~_d`.
    pub max_step_increase: f64,
    /// `1e-9 max(1, |P~_d(0)|)`.
    pub monotone_tol: f64,
    pub admissible: bool,
}

impl RlcRun {
    pub fn pd_monotone(&self) -> bool {
        self.max_step_increase <= self.monotone_tol
    }

    pub fn final_state(&self) -> RlcState {
        self.samples.last().map(|s| s.state).unwrap_or_default()
    }

    /// Columns `t,i_L,v_C,v_S,P,P_tilde,P_tilde_d`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,i_L,v_C,v_S,P,P_tilde,P_tilde_d\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t, s.state.i_l, s.state.v_c, s.v_s, s.potentials.p, s.potentials.p_tilde, s.potentials.p_tilde_d
            );
        }
        out
    }
}

/// Closed-loop RK4 run under [`rlc_control`].
pub fn rlc_simulate(p: &RlcParams, s0: RlcState, t_end: f64, dt: f64) -> Result<RlcRun> {
    p.validate()?;
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidParameter("dt and t_end must be positive".into()));
    }
    rlc_rhs(s0, p, 0.0)?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let record = |t: f64, s: RlcState| -> Result<RlcSample> {
        Ok(RlcSample {
            t,
            state: s,
            v_s: rlc_control(s, p)?,
            potentials: rlc_potentials(s, p)?,
        })
    };
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(record(0.0, s0)?);
    let mut y = vec![s0.i_l, s0.v_c];
    let mut f = |_t: f64, y: &[f64]| -> Vec<f64> {
        let s = RlcState::new(y[0], y[1]);
        // Parameters were validated above, so neither call can fail.
        let u = rlc_control(s, p).unwrap_or(0.0);
        let r = rlc_rhs(s, p, u).unwrap_or_default();
        vec![r.i_l, r.v_c]
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        y = rk4_step(&mut f, &|_, _| {}, t, &y, dt);
        if blown_up(&y) {
            return Err(Error::BlowUp { step: step + 1, limit: BLOW_UP_LIMIT });
        }
        samples.push(record((step + 1) as f64 * dt, RlcState::new(y[0], y[1]))?);
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.potentials.p_tilde_d).collect();
    let rates = time_derivative(&values, dt);
    let n = values.len();
    let max_step_increase = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone_tol = 1e-9 * values[0].abs().max(1.0);
    Ok(RlcRun {
        report: FunctionalReport::new("P_tilde_d", times, values, rates, vec![0.0; n], 1e-9),
        samples,
        max_step_increase,
        monotone_tol,
        admissible: p.admissible(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(k: f64, vs: f64) -> RlcParams {
        RlcParams::new(1.0, 1.0, 1.0, 1.0, k, vs).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let p = unit(1.0, 2.0);
        let r = rlc_rhs(RlcState::new(0.0, 0.0), &p, 1.0).unwrap();
        assert_abs_diff_eq!(r.i_l, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.v_c, 0.0, epsilon = 1e-15);

        let eq = rlc_equilibrium(&p).unwrap();
        let r = rlc_rhs(eq, &p, (p.r_l + p.r_c) * eq.i_l).unwrap();
        assert_abs_diff_eq!(r.i_l, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.v_c, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rhs_is_affine_in_source() {
        let p = RlcParams::new(0.7, 1.3, 0.2, 2.0, 0.5, 1.0).unwrap();
        let s = RlcState::new(0.3, -1.1);
        let a = rlc_rhs(s, &p, 0.4).unwrap();
        let b = rlc_rhs(s, &p, -2.5).unwrap();
        let z = rlc_rhs(s, &p, 0.0).unwrap();
        let ab = rlc_rhs(s, &p, 0.4 - 2.5).unwrap();
        assert_abs_diff_eq!(a.i_l + b.i_l - z.i_l, ab.i_l, epsilon = 1e-14);
        assert_abs_diff_eq!(a.v_c + b.v_c - z.v_c, ab.v_c, epsilon = 1e-14);
    }

    #[test]
    fn singular_mass_matrix() {
        let mut p = unit(1.0, 1.0);
        p.l = 0.0;
        assert_eq!(rlc_rhs(RlcState::default(), &p, 0.0), Err(Error::Singular("L = 0")));
        p.l = 1.0;
        p.c = 0.0;
        assert_eq!(rlc_rhs(RlcState::default(), &p, 0.0), Err(Error::Singular("C = 0")));
    }

    #[test]
    fn equilibrium_examples() {
        assert_eq!(rlc_equilibrium(&unit(1.0, 2.0)).unwrap(), RlcState::new(1.0, 1.0));
        assert_eq!(rlc_equilibrium(&unit(1.0, 0.0)).unwrap(), RlcState::new(0.0, 0.0));
        let p = RlcParams::new(1.0, 1.0, 1.0, 3.0, 1.0, 8.0).unwrap();
        assert_eq!(rlc_equilibrium(&p).unwrap(), RlcState::new(2.0, 6.0));
    }

    #[test]
    fn potential_examples() {
        let p = unit(1.0, 2.0);
        let z = rlc_potentials(RlcState::default(), &RlcParams { v_s_star: 0.0, ..p }).unwrap();
        assert_eq!((z.p, z.p_tilde), (0.0, 0.0));
        let eq = rlc_equilibrium(&p).unwrap();
        assert_abs_diff_eq!(rlc_potentials(eq, &p).unwrap().p_tilde_d, 0.0, epsilon = 1e-15);
        let pt = rlc_potentials(RlcState::new(1.0, 0.0), &p).unwrap();
        assert_abs_diff_eq!(pt.p_tilde, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn control_examples() {
        let p = RlcParams::new(1.0, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        let eq = rlc_equilibrium(&p).unwrap();
        assert_abs_diff_eq!(rlc_control(eq, &p).unwrap(), 2.0 * eq.i_l, epsilon = 1e-15);
        let off = RlcState::new(eq.i_l + 1.0, 0.0);
        assert_abs_diff_eq!(rlc_control(off, &p).unwrap(), 2.0 * eq.i_l - 2.0, epsilon = 1e-15);
        let p0 = RlcParams { k: 0.0, ..p };
        assert_eq!(rlc_control(RlcState::new(5.0, -3.0), &p0).unwrap(), 2.0);
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let p = unit(1.0, 2.0);
        let eq = rlc_equilibrium(&p).unwrap();
        let run = rlc_simulate(&p, eq, 5.0, p.default_dt()).unwrap();
        for s in &run.samples {
            assert!((s.state.i_l - 1.0).abs() <= 1e-10 && (s.state.v_c - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn converges_to_target_monotonically() {
        let p = unit(1.0, 2.0);
        let run = rlc_simulate(&p, RlcState::default(), 20.0, p.default_dt()).unwrap();
        let f = run.final_state();
        assert!((f.i_l - 1.0).abs() <= 1e-6 && (f.v_c - 1.0).abs() <= 1e-6);
        assert!(run.pd_monotone(), "increase {}", run.max_step_increase);
        assert!(run.admissible);
        assert!(run.to_csv().starts_with("t,i_L,v_C,v_S,P,P_tilde,P_tilde_d\n"));
    }

    #[test]
    fn blow_up_is_reported() {
        // A huge step on a stiff circuit diverges.
        let p = RlcParams::new(1e-3, 1e-3, 10.0, 1.0, 0.0, 1.0).unwrap();
        match rlc_simulate(&p, RlcState::new(1.0, 0.0), 1000.0, 1.0) {
            Err(Error::BlowUp { step, .. }) => assert!(step >= 1),
            other => panic!("{other:?}"),
        }
    }
}
