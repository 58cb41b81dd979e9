use super::BuildResult;
use crate::nn::{Activation, LayerSpec, Linear, ParamStore};
use crate::tensor::{Result, Scalar, Tensor, TensorError};

/// Squeeze-enhanced axial attention over one `h × w` token grid.
///
/// Projections have no bias. `W_o` maps the value width back to `C`.
#[derive(Debug, Clone)]
pub struct Sea {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
}

impl Sea {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        c_qk: usize,
        c_v: usize,
        seed: u64,
    ) -> BuildResult<Self> {
        let mut proj = |suffix: &str, cin, cout| {
            Linear::no_bias(
                store,
                &format!("{name}.{suffix}"),
                LayerSpec::linear(cin, cout, Activation::Identity),
                seed,
            )
        };
        Ok(Self {
            wq: proj("wq", channels, c_qk)?,
            wk: proj("wk", channels, c_qk)?,
            wv: proj("wv", channels, c_v)?,
            wo: proj("wo", c_v, channels)?,
        })
    }

    pub fn project<T: Scalar>(&self, store: &ParamStore<T>, tokens: &Tensor<T>) -> Result<[Tensor<T>; 3]> {
        Ok([
            self.wq.forward(store, tokens)?,
            self.wk.forward(store, tokens)?,
            self.wv.forward(store, tokens)?,
        ])
    }

    /// `[B, h*w, C] -> [B, h*w, C]`, tokens in row-major grid order.
    pub fn forward<T: Scalar>(
        &self,
        store: &ParamStore<T>,
        tokens: &Tensor<T>,
        h: usize,
        w: usize,
    ) -> Result<Tensor<T>> {
        let [q, k, v] = self.project(store, tokens)?;
        self.wo.forward(store, &axial_attention(&q, &k, &v, h, w)?)
    }

    /// Global self-attention over all tokens with the same weights.
    pub fn forward_full<T: Scalar>(&self, store: &ParamStore<T>, tokens: &Tensor<T>) -> Result<Tensor<T>> {
        let [q, k, v] = self.project(store, tokens)?;
        self.wo.forward(store, &global_attention(&q, &k, &v)?)
    }

    /// `[C, H, W]` feature map in and out.
    pub fn forward_map<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, h, w) = map_dims(x)?;
        tokens_to_map(&self.forward(store, &map_to_tokens(x)?, h, w)?, c, h, w)
    }

    pub fn forward_full_map<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (c, h, w) = map_dims(x)?;
        tokens_to_map(&self.forward_full(store, &map_to_tokens(x)?)?, c, h, w)
    }
}

fn map_dims<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(TensorError::Invalid {
            op: "attention",
            msg: format!("expected [C, H, W], got {:?}", x.shape()),
        }),
    }
}

/// `[C, H, W] -> [1, H*W, C]`.
pub fn map_to_tokens<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (c, h, w) = map_dims(x)?;
    x.reshape(&[c, h * w])?.permute(&[1, 0])?.reshape(&[1, h * w, c])
}

/// `[1, H*W, C] -> [C, H, W]`.
pub fn tokens_to_map<T: Scalar>(t: &Tensor<T>, c: usize, h: usize, w: usize) -> Result<Tensor<T>> {
    t.reshape(&[h * w, c])?.permute(&[1, 0])?.reshape(&[c, h, w])
}

fn attend<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    q.matmul(&k.permute(&[0, 2, 1])?)?.softmax(2)?.matmul(v)
}

/// Axial attention on squeezed sequences, before the output projection.
///
/// `q`, `k` are `[B, h*w, C_qk]`, `v` is `[B, h*w, C_v]`. Rows are squeezed
/// by averaging over `w` and columns by averaging over `h`; position
/// `(i, j)` receives row result `i` plus column result `j`. No `1/√d`
/// scaling is applied.
pub fn axial_attention<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    h: usize,
    w: usize,
) -> Result<Tensor<T>> {
    let b = q.shape()[0];
    let grid = |t: &Tensor<T>| t.reshape(&[b, h, w, t.shape()[2]]);
    let (q, k, v) = (grid(q)?, grid(k)?, grid(v)?);
    let cv = v.shape()[3];
    let rows = attend(&q.mean_axis(2)?, &k.mean_axis(2)?, &v.mean_axis(2)?)?;
    let cols = attend(&q.mean_axis(1)?, &k.mean_axis(1)?, &v.mean_axis(1)?)?;
    let y = rows.reshape(&[b, h, 1, cv])?.add(&cols.reshape(&[b, 1, w, cv])?)?;
    y.reshape(&[b, h * w, cv])
}

/// Softmax-weighted sum over all token pairs, before the output projection.
pub fn global_attention<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    attend(q, k, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::testutil::{random_tensor, random_vec};

    /// Recomputes both squeezes and both softmax sums at every position.
    fn literal_axial(q: &[f64], k: &[f64], v: &[f64], h: usize, w: usize, cqk: usize, cv: usize) -> Vec<f64> {
        let at = |t: &[f64], c: usize, y: usize, x: usize, ch: usize| t[(y * w + x) * c + ch];
        let row = |t: &[f64], c: usize, i: usize, ch: usize| (0..w).map(|x| at(t, c, i, x, ch)).sum::<f64>() / w as f64;
        let col = |t: &[f64], c: usize, j: usize, ch: usize| (0..h).map(|y| at(t, c, y, j, ch)).sum::<f64>() / h as f64;
        let mut out = vec![0.0; h * w * cv];
        for i in 0..h {
            for j in 0..w {
                let sh: Vec<f64> = (0..h)
                    .map(|p| (0..cqk).map(|c| row(q, cqk, i, c) * row(k, cqk, p, c)).sum())
                    .collect();
                let sv: Vec<f64> = (0..w)
                    .map(|p| (0..cqk).map(|c| col(q, cqk, j, c) * col(k, cqk, p, c)).sum())
                    .collect();
                let zh: f64 = sh.iter().map(|s| s.exp()).sum();
                let zv: f64 = sv.iter().map(|s| s.exp()).sum();
                for c in 0..cv {
                    let a: f64 = (0..h).map(|p| sh[p].exp() / zh * row(v, cv, p, c)).sum();
                    let b: f64 = (0..w).map(|p| sv[p].exp() / zv * col(v, cv, p, c)).sum();
                    out[(i * w + j) * cv + c] = a + b;
                }
            }
        }
        out
    }

    #[test]
    fn axial_matches_literal_evaluation() {
        for (seed, (h, w, cqk, cv)) in [(6, 5, 4, 4), (3, 7, 2, 5), (1, 4, 3, 3)].into_iter().enumerate() {
            let s = seed as u64 * 3;
            let q = random_tensor(&[1, h * w, cqk], s, 2.0);
            let k = random_tensor(&[1, h * w, cqk], s + 1, 2.0);
            let v = random_tensor(&[1, h * w, cv], s + 2, 2.0);
            let got = axial_attention(&q, &k, &v, h, w).unwrap();
            let want = literal_axial(q.data(), k.data(), v.data(), h, w, cqk, cv);
            for (a, b) in got.data().iter().zip(&want) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn single_position_doubles_value() {
        let v = Tensor::from_vec(random_vec(3, 1, 1.0), &[1, 1, 3]).unwrap();
        let q = random_tensor(&[1, 1, 2], 2, 1.0);
        let y = axial_attention(&q, &q, &v, 1, 1).unwrap();
        for (a, b) in y.data().iter().zip(v.data()) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        let full = global_attention(&q, &q, &v).unwrap();
        assert_eq!(full.data(), v.data());
    }

    #[test]
    fn uniform_scores_average_values() {
        let q = Tensor::<f64>::zeros(&[1, 16, 2]);
        let v = random_tensor(&[1, 16, 3], 4, 1.0);
        let y = global_attention(&q, &q, &v).unwrap();
        for c in 0..3 {
            let mean: f64 = (0..16).map(|t| v.data()[t * 3 + c]).sum::<f64>() / 16.0;
            for t in 0..16 {
                assert!((y.data()[t * 3 + c] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_matches_token_pair_loop() {
        let n = 16;
        let q = random_tensor(&[1, n, 3], 7, 1.0);
        let k = random_tensor(&[1, n, 3], 8, 1.0);
        let v = random_tensor(&[1, n, 2], 9, 1.0);
        let y = global_attention(&q, &k, &v).unwrap();
        for a in 0..n {
            let s: Vec<f64> = (0..n)
                .map(|b| (0..3).map(|c| q.data()[a * 3 + c] * k.data()[b * 3 + c]).sum::<f64>())
                .collect();
            let z: f64 = s.iter().map(|x| x.exp()).sum();
            for c in 0..2 {
                let want: f64 = (0..n).map(|b| s[b].exp() / z * v.data()[b * 2 + c]).sum();
                assert!((y.data()[a * 2 + c] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_value_projection_gives_zero() {
        let mut store = ParamStore::<f64>::new();
        let sea = Sea::new(&mut store, "sea", 6, 3, 3, 1).unwrap();
        store.set(sea.wv.weight, vec![0.0; 18]);
        let y = sea.forward_map(&store, &random_tensor(&[6, 5, 4], 2, 3.0)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(y.shape(), &[6, 5, 4]);
    }

    #[test]
    fn token_layout_round_trip() {
        let x = random_tensor(&[3, 4, 5], 3, 1.0);
        let t = map_to_tokens(&x).unwrap();
        assert_eq!(t.data()[(2 * 5 + 1) * 3 + 2], x.data()[(2 * 4 + 2) * 5 + 1]);
        assert_eq!(tokens_to_map(&t, 3, 4, 5).unwrap().data(), x.data());
    }
}
