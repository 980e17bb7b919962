//! Classic fixed-step fourth-order Runge-Kutta on flat state vectors.

/// One RK4 step of `y' = f(t, y)`. `project` runs after every stage and on
/// the result; it re-imposes algebraic rows.
pub fn rk4_step<F, P>(f: &mut F, project: &P, t: f64, y: &[f64], dt: f64) -> Vec<f64>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
    P: Fn(f64, &mut [f64]),
{
    let n = y.len();
    let stage = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        (0..n).map(|j| base[j] + h * k[j]).collect()
    };
    let k1 = f(t, y);
    let mut y2 = stage(y, &k1, 0.5 * dt);
    project(t + 0.5 * dt, &mut y2);
    let k2 = f(t + 0.5 * dt, &y2);
    let mut y3 = stage(y, &k2, 0.5 * dt);
    project(t + 0.5 * dt, &mut y3);
    let k3 = f(t + 0.5 * dt, &y3);
    let mut y4 = stage(y, &k3, dt);
    project(t + dt, &mut y4);
    let k4 = f(t + dt, &y4);
    let mut out: Vec<f64> = (0..n)
        .map(|j| y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect();
    project(t + dt, &mut out);
    out
}

/// Magnitude above which a run is declared unstable.
pub const BLOW_UP_LIMIT: f64 = 1e12;

pub(crate) fn blown_up(y: &[f64]) -> bool {
    y.iter().any(|x| !x.is_finite() || x.abs() > BLOW_UP_LIMIT)
}
