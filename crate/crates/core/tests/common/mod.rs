#![allow(dead_code)]

use powershape::{Field, Grid, Line, LineParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Fourier series with `modes` terms and unit-ish amplitude.
pub fn smooth_profile(rng: &mut ChaCha8Rng, grid: &Grid, modes: usize) -> Vec<f64> {
    let terms: Vec<(f64, f64, f64)> = (0..modes)
        .map(|m| {
            let amp = rng.gen_range(-1.0..1.0) / (1.0 + m as f64);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (amp, std::f64::consts::PI * m as f64, phase)
        })
        .collect();
    grid.sample(|z| terms.iter().map(|(a, w, ph)| a * (w * z + ph).cos()).sum())
}

pub fn smooth_field(rng: &mut ChaCha8Rng, grid: &Grid, modes: usize) -> Field {
    let i = smooth_profile(rng, grid, modes);
    let v = smooth_profile(rng, grid, modes);
    Field::new(grid, i, v).unwrap()
}

/// Independent draws at every node.
pub fn rough_field(rng: &mut ChaCha8Rng, grid: &Grid) -> Field {
    let n = grid.n_nodes();
    let i = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::new(grid, i, v).unwrap()
}

pub fn line(n: usize, p: LineParams) -> Line {
    Line::new(Grid::new(n).unwrap(), p).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.i.iter()
        .zip(&b.i)
        .chain(a.v.iter().zip(&b.v))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
