//! Uniform grids on `[0, 1]`, node fields, the discrete `d/dz` operator and
//! trapezoid quadrature.
//!
//! Every functional in the crate is a trapezoid sum over the nodes of a
//! [`Grid`]. The trapezoid weights define the discrete inner product
//! `<f, g>_H = sum_k w_k f_k g_k`, and the default derivative operator is
//! chosen so that it satisfies summation by parts exactly against those
//! weights:
//!
//! ```text
//! <f, D g>_H + <D f, g>_H = f_N g_N - f_0 g_0
//! ```
//!
//! That identity is what makes the discrete dissipation inequalities hold
//! to rounding error instead of to truncation error.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Uniform grid with `n_cells + 1` nodes `z_k = k dz` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_cells: usize,
    dz: f64,
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::GridTooSmall(n_cells));
        }
        Ok(Self {
            n_cells,
            dz: 1.0 / n_cells as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.dz
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.z(k)).collect()
    }

    /// Trapezoid weights: `dz/2` at the ends, `dz` inside.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dz; self.n_nodes()];
        w[0] = 0.5 * self.dz;
        w[self.n_cells] = 0.5 * self.dz;
        w
    }

    /// Sample `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| f(self.z(k))).collect()
    }

    /// Index of the node nearest to `z` (clamped to `[0, 1]`).
    pub fn nearest(&self, z: f64) -> usize {
        let k = (z.clamp(0.0, 1.0) * self.n_cells as f64).round() as usize;
        k.min(self.n_cells)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_nodes() {
            return Err(Error::LengthMismatch {
                expected: self.n_nodes(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Trapezoid rule for `int_0^1 f dz`.
pub fn integrate(f: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(f.len())?;
    Ok(trapezoid(f, grid.dz()))
}

pub(crate) fn trapezoid(f: &[f64], dz: f64) -> f64 {
    let n = f.len() - 1;
    let inner: f64 = f[1..n].iter().sum();
    dz * (inner + 0.5 * (f[0] + f[n]))
}

/// Trapezoid inner product `<f, g>_H`.
pub(crate) fn inner(f: &[f64], g: &[f64], dz: f64) -> f64 {
    let n = f.len() - 1;
    let mut acc = 0.5 * (f[0] * g[0] + f[n] * g[n]);
    for k in 1..n {
        acc += f[k] * g[k];
    }
    dz * acc
}

/// Current and voltage profiles sampled on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub i: Vec<f64>,
    pub v: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, i: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        grid.check_len(i.len())?;
        grid.check_len(v.len())?;
        if i.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field"));
        }
        Ok(Self { i, v })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            i: vec![0.0; grid.n_nodes()],
            v: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn from_fns(grid: &Grid, i: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.sample(i), grid.sample(v))
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.i.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.i
            .iter()
            .chain(self.v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            i: self.i.iter().map(|x| alpha * x).collect(),
            v: self.v.iter().map(|x| alpha * x).collect(),
        }
    }
}

/// Boundary rows of the discrete derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    /// First-order one-sided rows `(f_1 - f_0)/dz`. Together with central
    /// differences inside, this is the diagonal-norm summation-by-parts
    /// operator for trapezoid weights. Used by every simulation.
    #[default]
    SummationByParts,
    /// Second-order one-sided rows `(-3 f_0 + 4 f_1 - f_2)/(2 dz)`.
    /// Summation by parts then holds only up to `O(dz^2)`.
    SecondOrder,
}

/// Three-point stencil representation of `d/dz` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOp {
    grid: Grid,
    closure: Closure,
    scale: f64,
}

/// Settings for [`DiscreteOp::norm`].
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_iter: 2_000_000,
            seed: 42,
        }
    }
}

impl DiscreteOp {
    pub fn new(grid: Grid, closure: Closure) -> Self {
        Self {
            grid,
            closure,
            scale: 1.0,
        }
    }

    pub fn sbp(grid: Grid) -> Self {
        Self::new(grid, Closure::SummationByParts)
    }

    /// The same stencil multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    /// Row `k` as `(column, coefficient)` pairs.
    fn row(&self, k: usize) -> [(usize, f64); 3] {
        let n = self.grid.n_cells();
        let h = self.scale / self.grid.dz();
        match (k, self.closure) {
            (0, Closure::SummationByParts) => [(0, -h), (1, h), (2, 0.0)],
            (0, Closure::SecondOrder) => [(0, -1.5 * h), (1, 2.0 * h), (2, -0.5 * h)],
            (k, Closure::SummationByParts) if k == n => [(n - 1, -h), (n, h), (n - 2, 0.0)],
            (k, Closure::SecondOrder) if k == n => {
                [(n - 2, 0.5 * h), (n - 1, -2.0 * h), (n, 1.5 * h)]
            }
            (k, _) => [(k - 1, -0.5 * h), (k + 1, 0.5 * h), (k, 0.0)],
        }
    }

    /// `D f`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(f.len())?;
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &[f64]) -> Vec<f64> {
        (0..f.len())
            .map(|k| self.row(k).iter().map(|&(j, c)| c * f[j]).sum())
            .collect()
    }

    /// `D^T f` (plain transpose, no weights).
    pub(crate) fn apply_transpose(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for (k, fk) in f.iter().enumerate() {
            for (j, c) in self.row(k) {
                out[j] += c * fk;
            }
        }
        out
    }

    /// Dense matrix, row major. Test and diagnostic use only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.grid.n_nodes();
        (0..n)
            .map(|k| {
                let mut r = vec![0.0; n];
                for (j, c) in self.row(k) {
                    r[j] += c;
                }
                r
            })
            .collect()
    }

    /// Operator norm of `D` on `L^2(0,1)` discretised with trapezoid weights,
    /// i.e. the largest singular value of `H^{1/2} D H^{-1/2}`.
    ///
    /// Power iteration on the `H`-self-adjoint product `H^{-1} D^T H D`. The
    /// iteration stops once the eigen-residual is below `rel_tol` times the
    /// current estimate.
    pub fn norm(&self, cfg: PowerIteration) -> Result<f64> {
        let w = self.grid.weights();
        let n = w.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize_h(&mut x, &w);
        let mut sigma2 = 0.0;
        for it in 0..cfg.max_iter {
            let dx = self.apply_unchecked(&x);
            let hdx: Vec<f64> = dx.iter().zip(&w).map(|(a, b)| a * b).collect();
            let mut y = self.apply_transpose(&hdx);
            for (yk, wk) in y.iter_mut().zip(&w) {
                *yk /= wk;
            }
            // Rayleigh quotient <x, y>_H with <x, x>_H = 1.
            sigma2 = x.iter().zip(&y).zip(&w).map(|((a, b), c)| a * b * c).sum::<f64>();
            let resid: f64 = x
                .iter()
                .zip(&y)
                .zip(&w)
                .map(|((a, b), c)| (b - sigma2 * a).powi(2) * c)
                .sum::<f64>()
                .sqrt();
            if sigma2 > 0.0 && resid <= cfg.rel_tol * sigma2 {
                return Ok(sigma2.sqrt());
            }
            if sigma2 == 0.0 && it > 0 {
                return Ok(0.0);
            }
            x = y;
            normalize_h(&mut x, &w);
        }
        Err(Error::NoConvergence {
            iterations: cfg.max_iter,
            last_estimate: sigma2.max(0.0).sqrt(),
        })
    }
}

fn normalize_h(x: &mut [f64], w: &[f64]) {
    let nrm = x.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|a| *a /= nrm);
    }
}

/// Squared boundary-inclusive `H_0` norm of a two-component field:
/// `|u(0)|^2 + |u(1)|^2 + int |u|^2 dz`.
pub fn h0_norm_sq(field: &Field, grid: &Grid) -> Result<f64> {
    grid.check_len(field.i.len())?;
    grid.check_len(field.v.len())?;
    let n = grid.n_cells();
    let ends = field.i[0].powi(2) + field.v[0].powi(2) + field.i[n].powi(2) + field.v[n].powi(2);
    let dz = grid.dz();
    Ok(ends + inner(&field.i, &field.i, dz) + inner(&field.v, &field.v, dz))
}

/// Squared `H_1` norm: the `H_0` terms plus `int |du/dz|^2 dz`.
pub fn h1_norm_sq(field: &Field, op: &DiscreteOp) -> Result<f64> {
    let grid = op.grid();
    let h0 = h0_norm_sq(field, grid)?;
    let di = op.apply(&field.i)?;
    let dv = op.apply(&field.v)?;
    let dz = grid.dz();
    Ok(h0 + inner(&di, &di, dz) + inner(&dv, &dv, dz))
}

pub fn h0_norm(field: &Field, grid: &Grid) -> Result<f64> {
    h0_norm_sq(field, grid).map(f64::sqrt)
}

pub fn h1_norm(field: &Field, op: &DiscreteOp) -> Result<f64> {
    h1_norm_sq(field, op).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_rejects_single_cell() {
        assert_eq!(Grid::new(1), Err(Error::GridTooSmall(1)));
        let g = Grid::new(7).unwrap();
        assert!((g.dz() * 7.0 - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn trapezoid_examples() {
        for n in [2, 3, 10, 101] {
            let g = Grid::new(n).unwrap();
            assert_abs_diff_eq!(integrate(&g.sample(|_| 1.0), &g).unwrap(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(integrate(&g.sample(|z| z), &g).unwrap(), 0.5, epsilon = 1e-14);
            let affine = integrate(&g.sample(|z| 3.0 - 7.0 * z), &g).unwrap();
            assert!((affine - -0.5).abs() <= 1e-14 * 0.5);
        }
        let g = Grid::new(2).unwrap();
        assert_abs_diff_eq!(integrate(&g.sample(|z| z * z), &g).unwrap(), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn length_mismatch_names_both_lengths() {
        let g = Grid::new(4).unwrap();
        let err = integrate(&[1.0; 3], &g).unwrap_err();
        assert_eq!(err, Error::LengthMismatch { expected: 5, actual: 3 });
        assert!(err.to_string().contains('5') && err.to_string().contains('3'));
        assert!(DiscreteOp::sbp(g).apply(&[0.0; 6]).is_err());
    }

    #[test]
    fn derivative_of_constant_and_affine() {
        for closure in [Closure::SummationByParts, Closure::SecondOrder] {
            for n in [2, 5, 64] {
                let g = Grid::new(n).unwrap();
                let d = DiscreteOp::new(g, closure);
                for x in d.apply(&g.sample(|_| 3.5)).unwrap() {
                    assert!(x.abs() <= 1e-13);
                }
                for x in d.apply(&g.nodes()).unwrap() {
                    assert!((x - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    fn max_err(n: usize) -> f64 {
        let g = Grid::new(n).unwrap();
        let d = DiscreteOp::new(g, Closure::SecondOrder);
        let df = d.apply(&g.sample(|z| (PI * z).sin())).unwrap();
        df.iter()
            .zip(g.nodes())
            .map(|(a, z)| (a - PI * (PI * z).cos()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_closure_refinement() {
        let e: Vec<f64> = [20, 40, 80, 160].iter().map(|&n| max_err(n)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5, "ratio {ratio}");
        }
        let order = (e[1] / e[3]).log2() / 2.0;
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn sbp_identity_is_exact() {
        let g = Grid::new(37).unwrap();
        let d = DiscreteOp::sbp(g);
        let f = g.sample(|z| (2.0 * z).exp() - z);
        let h = g.sample(|z| (3.0 * z).cos());
        let lhs = inner(&f, &d.apply(&h).unwrap(), g.dz()) + inner(&h, &d.apply(&f).unwrap(), g.dz());
        let rhs = f[37] * h[37] - f[0] * h[0];
        assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn second_order_sbp_residual_is_quadratic() {
        // Fitted once on this pair: residual / dz^2 settles near 8.3.
        const C_FIT: f64 = 9.0;
        for n in [10, 20, 40, 80] {
            let g = Grid::new(n).unwrap();
            let d = DiscreteOp::new(g, Closure::SecondOrder);
            let f = g.sample(|z| (2.0 * z).exp() - z);
            let h = g.sample(|z| (3.0 * z).cos());
            let lhs = inner(&f, &d.apply(&h).unwrap(), g.dz()) + inner(&h, &d.apply(&f).unwrap(), g.dz());
            let rhs = f[n] * h[n] - f[0] * h[0];
            assert!((lhs - rhs).abs() <= C_FIT * g.dz().powi(2), "n={n} res={}", (lhs - rhs).abs());
        }
    }

    #[test]
    fn norm_homogeneity_and_growth() {
        let g = Grid::new(16).unwrap();
        let d = DiscreteOp::sbp(g);
        let a = d.norm(PowerIteration::default()).unwrap();
        let b = d.scaled(2.0).norm(PowerIteration::default()).unwrap();
        assert!((b / a - 2.0).abs() <= 1e-6 * 2.0);
        let a32 = DiscreteOp::sbp(Grid::new(32).unwrap())
            .norm(PowerIteration::default())
            .unwrap();
        let ratio = a32 / a;
        assert!(ratio > 1.8 && ratio < 2.2, "ratio {ratio}");
    }

    #[test]
    fn norm_reports_non_convergence() {
        let d = DiscreteOp::sbp(Grid::new(50).unwrap());
        let cfg = PowerIteration {
            max_iter: 3,
            ..Default::default()
        };
        match d.norm(cfg) {
            Err(Error::NoConvergence { iterations: 3, last_estimate }) => assert!(last_estimate > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn norms_of_simple_states() {
        let g = Grid::new(8).unwrap();
        let d = DiscreteOp::sbp(g);
        let zero = Field::zeros(&g);
        assert_eq!(h0_norm(&zero, &g).unwrap(), 0.0);
        assert_eq!(h1_norm(&zero, &d).unwrap(), 0.0);
        let ones = Field::from_fns(&g, |_| 1.0, |_| 0.0).unwrap();
        assert_abs_diff_eq!(h0_norm_sq(&ones, &g).unwrap(), 3.0, epsilon = 1e-14);
        let wavy = Field::from_fns(&g, |z| z.sin(), |z| z * z - 0.3).unwrap();
        assert!(h1_norm(&wavy, &d).unwrap() >= h0_norm(&wavy, &g).unwrap());
    }

    #[test]
    fn field_rejects_nan() {
        let g = Grid::new(2).unwrap();
        assert_eq!(
            Field::new(&g, vec![0.0, f64::NAN, 0.0], vec![0.0; 3]),
            Err(Error::NonFinite("field"))
        );
    }
}
