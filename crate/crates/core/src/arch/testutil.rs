//! Reference loops shared by the block tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::ParamStore;
use crate::tensor::Tensor;

pub fn random_vec(n: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_tensor(shape: &[usize], seed: u64, scale: f64) -> Tensor<f64> {
    Tensor::from_vec(random_vec(shape.iter().product(), seed, scale), shape).unwrap()
}

/// Every parameter drawn uniformly from `[-scale, scale)`.
pub fn randomize(store: &ParamStore<f64>, seed: u64, scale: f64) -> ParamStore<f64> {
    let tensors = store
        .iter()
        .enumerate()
        .map(|(i, (_, t))| Tensor::param(random_vec(t.numel(), seed ^ (i as u64 * 7919), scale), t.shape()).unwrap())
        .collect();
    store.with_tensors(tensors)
}

/// Same-padded, stride-1 grouped cross-correlation on `[C, H, W]`.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    k: usize,
    groups: usize,
) -> Vec<f64> {
    let (cig, cog, p) = (cin / groups, cout / groups, (k / 2) as isize);
    let mut out = vec![0.0; cout * h * w];
    for o in 0..cout {
        let g = o / cog;
        for y in 0..h {
            for xx in 0..w {
                let mut acc = bias[o];
                for ci in 0..cig {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = y as isize + ky as isize - p;
                            let ix = xx as isize + kx as isize - p;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let c = g * cig + ci;
                            acc +=
                                weight[((o * cig + ci) * k + ky) * k + kx] * x[(c * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(o * h + y) * w + xx] = acc;
            }
        }
    }
    out
}

pub fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.2 * v
    }
}

/// `x · W + b` over rows of `x` (`[n, cin]`), `W` as `[cin, cout]`.
pub fn naive_linear(x: &[f64], cin: usize, weight: &[f64], bias: Option<&[f64]>, cout: usize) -> Vec<f64> {
    let n = x.len() / cin;
    let mut out = vec![0.0; n * cout];
    for r in 0..n {
        for o in 0..cout {
            let mut acc = bias.map_or(0.0, |b| b[o]);
            for i in 0..cin {
                acc += x[r * cin + i] * weight[i * cout + o];
            }
            out[r * cout + o] = acc;
        }
    }
    out
}
