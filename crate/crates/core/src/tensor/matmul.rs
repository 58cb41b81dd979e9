use super::{Result, Scalar, Tensor, TensorError};

/// `out[m×n] += a[m×k] · b[k×n]`
fn gemm_acc<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×k] += g[m×n] · bᵀ` where `b` is `k×n`.
fn gemm_nt_acc<T: Scalar>(g: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = T::zero();
            for (&gv, &bv) in grow.iter().zip(brow) {
                s += gv * bv;
            }
            out[i * k + p] += s;
        }
    }
}

/// `out[k×n] += aᵀ · g` where `a` is `m×k` and `g` is `m×n`.
fn gemm_tn_acc<T: Scalar>(a: &[T], g: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

impl<T: Scalar> Tensor<T> {
    /// Matrix product over the last two axes.
    ///
    /// `self` is `[m, k]` or `[B, m, k]`; `rhs` is `[k, n]` (shared across
    /// the batch) or `[B, k, n]`.
    pub fn matmul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            lhs: self.shape().to_vec(),
            rhs: rhs.shape().to_vec(),
        };
        let (batch, m, k) = match *self.shape() {
            [m, k] => (None, m, k),
            [b, m, k] => (Some(b), m, k),
            _ => return Err(mismatch()),
        };
        let (rhs_batched, k2, n) = match *rhs.shape() {
            [k2, n] => (false, k2, n),
            [b2, k2, n] if Some(b2) == batch => (true, k2, n),
            _ => return Err(mismatch()),
        };
        if k != k2 {
            return Err(mismatch());
        }
        let nb = batch.unwrap_or(1);
        let mut out = vec![T::zero(); nb * m * n];
        let (ad, bd) = (self.data(), rhs.data());
        for bi in 0..nb {
            let b_off = if rhs_batched { bi * k * n } else { 0 };
            gemm_acc(
                &ad[bi * m * k..(bi + 1) * m * k],
                &bd[b_off..b_off + k * n],
                &mut out[bi * m * n..(bi + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let shape = match batch {
            Some(b) => vec![b, m, n],
            None => vec![m, n],
        };
        let (a, b) = (self.clone(), rhs.clone());
        Ok(Tensor::from_op(
            shape,
            out,
            "matmul",
            vec![self.clone(), rhs.clone()],
            move |g| {
                let (ad, bd) = (a.data(), b.data());
                let ga = a.requires_grad().then(|| {
                    let mut ga = vec![T::zero(); ad.len()];
                    for bi in 0..nb {
                        let b_off = if rhs_batched { bi * k * n } else { 0 };
                        gemm_nt_acc(
                            &g[bi * m * n..(bi + 1) * m * n],
                            &bd[b_off..b_off + k * n],
                            &mut ga[bi * m * k..(bi + 1) * m * k],
                            m,
                            k,
                            n,
                        );
                    }
                    ga
                });
                let gb = b.requires_grad().then(|| {
                    let mut gb = vec![T::zero(); bd.len()];
                    for bi in 0..nb {
                        let b_off = if rhs_batched { bi * k * n } else { 0 };
                        gemm_tn_acc(
                            &ad[bi * m * k..(bi + 1) * m * k],
                            &g[bi * m * n..(bi + 1) * m * n],
                            &mut gb[b_off..b_off + k * n],
                            m,
                            k,
                            n,
                        );
                    }
                    gb
                });
                vec![ga, gb]
            },
        ))
    }
}
