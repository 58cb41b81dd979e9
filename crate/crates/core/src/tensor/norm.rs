use super::{Result, Scalar, Tensor, TensorError};

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl<T: Scalar> Tensor<T> {
    /// Layer normalization over the last axis with affine `gamma`, `beta`
    /// (both shaped `[C]`). Population variance; a token whose entries are
    /// all equal normalizes to exactly zero, so the output there is `beta`.
    pub fn layer_norm(&self, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
        let c = *self.shape().last().ok_or(TensorError::Invalid {
            op: "layer_norm",
            msg: "rank-0 input".into(),
        })?;
        for p in [gamma, beta] {
            if p.shape() != [c] {
                return Err(TensorError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: self.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let tokens = self.numel() / c;
        let x = self.data();
        let (gd, bd) = (gamma.data(), beta.data());
        let eps = T::lit(eps);
        let inv_c = T::one() / T::lit(c as f64);
        let mut xhat = vec![T::zero(); x.len()];
        let mut rstd = vec![T::zero(); tokens];
        let mut out = vec![T::zero(); x.len()];
        for t in 0..tokens {
            let row = &x[t * c..(t + 1) * c];
            let mean = row.iter().copied().sum::<T>() * inv_c;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
            let r = T::one() / (var + eps).sqrt();
            rstd[t] = r;
            let constant = row.iter().all(|&v| v == row[0]);
            for i in 0..c {
                let xh = if constant { T::zero() } else { (row[i] - mean) * r };
                xhat[t * c + i] = xh;
                out[t * c + i] = xh * gd[i] + bd[i];
            }
        }
        let (g, b) = (gamma.clone(), beta.clone());
        let need_x = self.requires_grad();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            "layer_norm",
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |gout| {
                let gd = g.data();
                let gx = need_x.then(|| {
                    let mut gx = vec![T::zero(); gout.len()];
                    for t in 0..tokens {
                        let go = &gout[t * c..(t + 1) * c];
                        let xh = &xhat[t * c..(t + 1) * c];
                        // dxhat = g * gamma
                        let mut sum_d = T::zero();
                        let mut sum_dx = T::zero();
                        for i in 0..c {
                            let d = go[i] * gd[i];
                            sum_d += d;
                            sum_dx += d * xh[i];
                        }
                        let r = rstd[t];
                        for i in 0..c {
                            let d = go[i] * gd[i];
                            gx[t * c + i] = r * (d - sum_d * inv_c - xh[i] * sum_dx * inv_c);
                        }
                    }
                    gx
                });
                let gg = g.requires_grad().then(|| {
                    let mut gg = vec![T::zero(); c];
                    for t in 0..tokens {
                        for i in 0..c {
                            gg[i] += gout[t * c + i] * xhat[t * c + i];
                        }
                    }
                    gg
                });
                let gb = b.requires_grad().then(|| {
                    let mut gb = vec![T::zero(); c];
                    for t in 0..tokens {
                        for i in 0..c {
                            gb[i] += gout[t * c + i];
                        }
                    }
                    gb
                });
                vec![gx, gg, gb]
            },
        ))
    }
}
