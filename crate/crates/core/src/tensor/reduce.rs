use super::{Result, Scalar, Tensor, TensorError};

/// (outer, extent, inner) split of a shape around `axis`.
fn split_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(TensorError::Axis {
            op,
            axis,
            rank: shape.len(),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

impl<T: Scalar> Tensor<T> {
    /// Sum of all elements, shape `[1]`.
    pub fn sum(&self) -> Tensor<T> {
        let s = self.data().iter().copied().sum::<T>();
        let n = self.numel();
        Tensor::from_op(vec![1], vec![s], "sum", vec![self.clone()], move |g| {
            vec![Some(vec![g[0]; n])]
        })
    }

    /// Mean of all elements, shape `[1]`.
    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel();
        let inv = T::one() / T::lit(n as f64);
        let s = self.data().iter().copied().sum::<T>() * inv;
        Tensor::from_op(vec![1], vec![s], "mean", vec![self.clone()], move |g| {
            vec![Some(vec![g[0] * inv; n])]
        })
    }

    /// Mean along `axis`; that axis is removed from the shape.
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor<T>> {
        let (outer, n, inner) = split_axis("mean_axis", self.shape(), axis)?;
        let inv = T::one() / T::lit(n as f64);
        let x = self.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for j in 0..n {
                let src = &x[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (d, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        let mut shape = self.shape().to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Ok(Tensor::from_op(shape, out, "mean_axis", vec![self.clone()], move |g| {
            let mut gx = vec![T::zero(); outer * n * inner];
            for o in 0..outer {
                for j in 0..n {
                    let dst = &mut gx[(o * n + j) * inner..(o * n + j + 1) * inner];
                    for (d, &gv) in dst.iter_mut().zip(&g[o * inner..(o + 1) * inner]) {
                        *d = gv * inv;
                    }
                }
            }
            vec![Some(gx)]
        }))
    }

    /// Softmax along `axis`, stabilized by subtracting the running maximum.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        let (outer, n, inner) = split_axis("softmax", self.shape(), axis)?;
        let x = self.data();
        let mut y = vec![T::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * n + j) * inner + i;
                let mut m = T::neg_infinity();
                for j in 0..n {
                    m = m.max(x[idx(j)]);
                }
                let mut s = T::zero();
                for j in 0..n {
                    let e = (x[idx(j)] - m).exp();
                    y[idx(j)] = e;
                    s += e;
                }
                for j in 0..n {
                    y[idx(j)] /= s;
                }
            }
        }
        let yc = y.clone();
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            y,
            "softmax",
            vec![self.clone()],
            move |g| {
                let mut gx = vec![T::zero(); g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |j: usize| (o * n + j) * inner + i;
                        let dot: T = (0..n).map(|j| g[idx(j)] * yc[idx(j)]).sum();
                        for j in 0..n {
                            gx[idx(j)] = yc[idx(j)] * (g[idx(j)] - dot);
                        }
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    fn spatial_split(&self, op: &'static str) -> Result<(Vec<usize>, usize, usize)> {
        let r = self.rank();
        if r < 3 {
            return Err(TensorError::Invalid {
                op,
                msg: format!("expected [.., C, H, W], got {:?}", self.shape()),
            });
        }
        let lead = self.shape()[..r - 2].to_vec();
        let planes = lead.iter().product();
        Ok((lead, planes, self.shape()[r - 2] * self.shape()[r - 1]))
    }

    /// Global average over the last two (spatial) axes: `[C, H, W] -> [C]`.
    pub fn avg_pool_spatial(&self) -> Result<Tensor<T>> {
        let (shape, planes, hw) = self.spatial_split("avg_pool_spatial")?;
        let inv = T::one() / T::lit(hw as f64);
        let x = self.data();
        let out: Vec<T> = (0..planes)
            .map(|p| x[p * hw..(p + 1) * hw].iter().copied().sum::<T>() * inv)
            .collect();
        Ok(Tensor::from_op(
            shape,
            out,
            "avg_pool_spatial",
            vec![self.clone()],
            move |g| {
                let gx = (0..planes * hw).map(|i| g[i / hw] * inv).collect();
                vec![Some(gx)]
            },
        ))
    }

    /// Global maximum over the last two axes. The gradient goes to the first
    /// maximum in row-major scan order.
    pub fn max_pool_spatial(&self) -> Result<Tensor<T>> {
        let (shape, planes, hw) = self.spatial_split("max_pool_spatial")?;
        let x = self.data();
        let mut arg = Vec::with_capacity(planes);
        let mut out = Vec::with_capacity(planes);
        for p in 0..planes {
            let plane = &x[p * hw..(p + 1) * hw];
            let mut best = 0;
            for (i, &v) in plane.iter().enumerate() {
                if v > plane[best] {
                    best = i;
                }
            }
            arg.push(p * hw + best);
            out.push(plane[best]);
        }
        Ok(Tensor::from_op(
            shape,
            out,
            "max_pool_spatial",
            vec![self.clone()],
            move |g| {
                let mut gx = vec![T::zero(); planes * hw];
                for (p, &a) in arg.iter().enumerate() {
                    gx[a] = g[p];
                }
                vec![Some(gx)]
            },
        ))
    }
}
