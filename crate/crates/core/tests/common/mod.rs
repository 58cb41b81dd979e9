//! Shared helpers and independent reference implementations.
#![allow(dead_code)]

use pfan_core::nn::ParamStore;
use pfan_core::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_vec(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

pub fn random_tensor(shape: &[usize], seed: u64, scale: f64) -> Tensor<f64> {
    Tensor::from_vec(random_vec(shape.iter().product(), seed, scale), shape).unwrap()
}

/// Same names and shapes with values drawn uniformly from `[-scale, scale]`.
pub fn randomize(store: &ParamStore<f64>, seed: u64, scale: f64) -> ParamStore<f64> {
    let tensors = store
        .iter()
        .enumerate()
        .map(|(i, (_, t))| random_tensor(t.shape(), seed.wrapping_mul(1000).wrapping_add(i as u64), scale))
        .collect();
    store.with_tensors(tensors)
}

/// `x · W` for one token with `W` stored `[in, out]`.
fn project(x: &[f64], w: &[f64], cout: usize) -> Vec<f64> {
    (0..cout)
        .map(|o| x.iter().enumerate().map(|(m, &xm)| xm * w[m * cout + o]).sum())
        .collect()
}

fn softmax_weighted(scores: &[f64], values: &[Vec<f64>], cv: usize) -> Vec<f64> {
    let z: f64 = scores.iter().map(|s| s.exp()).sum();
    (0..cv)
        .map(|c| scores.iter().zip(values).map(|(s, v)| s.exp() / z * v[c]).sum())
        .collect()
}

/// Axial attention evaluated position by position.
///
/// Output at `(i, j)` is `W_o` applied to the softmax over row means
/// (query = mean of row `i`, keys/values = means of every row) plus the
/// softmax over column means (query = mean of column `j`). Every mean is
/// recomputed from the raw tokens at each position.
#[allow(clippy::too_many_arguments)]
pub fn literal_sea(
    x: &[f64],
    h: usize,
    w: usize,
    c: usize,
    wq: &[f64],
    wk: &[f64],
    wv: &[f64],
    wo: &[f64],
    cqk: usize,
    cv: usize,
) -> Vec<f64> {
    let token = |y: usize, xx: usize| &x[(y * w + xx) * c..(y * w + xx + 1) * c];
    let mean = |cells: Vec<(usize, usize)>, wt: &[f64], cout: usize| -> Vec<f64> {
        let n = cells.len() as f64;
        let mut acc = vec![0.0; cout];
        for (y, xx) in cells {
            for (a, p) in acc.iter_mut().zip(project(token(y, xx), wt, cout)) {
                *a += p;
            }
        }
        acc.iter().map(|a| a / n).collect()
    };
    let row = |i: usize| (0..w).map(|xx| (i, xx)).collect::<Vec<_>>();
    let col = |j: usize| (0..h).map(|y| (y, j)).collect::<Vec<_>>();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut out = vec![0.0; h * w * c];
    for i in 0..h {
        for j in 0..w {
            let q_row = mean(row(i), wq, cqk);
            let row_scores: Vec<f64> = (0..h).map(|p| dot(&q_row, &mean(row(p), wk, cqk))).collect();
            let row_values: Vec<Vec<f64>> = (0..h).map(|p| mean(row(p), wv, cv)).collect();
            let q_col = mean(col(j), wq, cqk);
            let col_scores: Vec<f64> = (0..w).map(|p| dot(&q_col, &mean(col(p), wk, cqk))).collect();
            let col_values: Vec<Vec<f64>> = (0..w).map(|p| mean(col(p), wv, cv)).collect();
            let a = softmax_weighted(&row_scores, &row_values, cv);
            let b = softmax_weighted(&col_scores, &col_values, cv);
            let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
            out[(i * w + j) * c..(i * w + j + 1) * c].copy_from_slice(&project(&y, wo, c));
        }
    }
    out
}

/// Published CIEDE2000 test pairs: `(lab1, lab2, delta_e)`.
pub fn ciede2000_pairs() -> Vec<([f64; 3], [f64; 3], f64)> {
    let text = include_str!("../data/ciede2000_pairs.txt");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|s| s.parse().unwrap()).collect();
            assert_eq!(v.len(), 7, "{l}");
            ([v[0], v[1], v[2]], [v[3], v[4], v[5]], v[6])
        })
        .collect()
}
