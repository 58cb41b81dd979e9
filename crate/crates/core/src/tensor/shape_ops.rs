use std::sync::Arc;

use super::{numel, Result, Scalar, Tensor, TensorError};

/// Reflect index `i` (possibly beyond `n`) back into `0..n` without
/// repeating the edge sample; periodic for offsets larger than `n - 1`.
pub(crate) fn mirror_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let r = i % period;
    if r < n {
        r
    } else {
        period - r
    }
}

impl<T: Scalar> Tensor<T> {
    /// Reinterprets the row-major buffer with a new shape.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.numel() || shape.contains(&0) {
            return Err(TensorError::ElementCount {
                op: "reshape",
                from: self.numel(),
                to: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            "reshape",
            vec![self.clone()],
            |g| vec![Some(g.to_vec())],
        ))
    }

    /// Output element `i` is input element `index[i]`. Gradients scatter-add.
    pub(crate) fn gather(&self, op: &'static str, shape: Vec<usize>, index: Vec<usize>) -> Tensor<T> {
        debug_assert_eq!(numel(&shape), index.len());
        let x = self.data();
        let data = index.iter().map(|&i| x[i]).collect();
        let n = self.numel();
        let index = Arc::new(index);
        Tensor::from_op(shape, data, op, vec![self.clone()], move |g| {
            let mut gx = vec![T::zero(); n];
            for (&i, &gv) in index.iter().zip(g) {
                gx[i] += gv;
            }
            vec![Some(gx)]
        })
    }

    /// Reorders axes: output axis `d` is input axis `axes[d]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor<T>> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(TensorError::Invalid {
                op: "permute",
                msg: format!("{axes:?} is not a permutation of rank {rank}"),
            });
        }
        let in_shape = self.shape();
        let mut in_strides = vec![1usize; rank];
        for d in (0..rank.saturating_sub(1)).rev() {
            in_strides[d] = in_strides[d + 1] * in_shape[d + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let total = self.numel();
        let mut index = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        let mut off = 0usize;
        for _ in 0..total {
            index.push(off);
            for d in (0..rank).rev() {
                idx[d] += 1;
                off += strides[d];
                if idx[d] < out_shape[d] {
                    break;
                }
                off -= strides[d] * idx[d];
                idx[d] = 0;
            }
        }
        Ok(self.gather("permute", out_shape, index))
    }

    /// Concatenation along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        let first = parts.first().ok_or(TensorError::Invalid {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let rank = first.rank();
        if axis >= rank {
            return Err(TensorError::Axis {
                op: "concat",
                axis,
                rank,
            });
        }
        for p in parts {
            let ok = p.rank() == rank && (0..rank).all(|d| d == axis || p.shape()[d] == first.shape()[d]);
            if !ok {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let outer: usize = first.shape()[..axis].iter().product();
        let inner: usize = first.shape()[axis + 1..].iter().product();
        let extents: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total_axis: usize = extents.iter().sum();
        let mut data = Vec::with_capacity(outer * total_axis * inner);
        for o in 0..outer {
            for (p, &e) in parts.iter().zip(&extents) {
                data.extend_from_slice(&p.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total_axis;
        let sizes: Vec<usize> = parts.iter().map(|p| p.numel()).collect();
        Ok(Tensor::from_op(shape, data, "concat", parts.to_vec(), move |g| {
            let mut grads: Vec<Vec<T>> = sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
            let mut cursor = 0;
            for _ in 0..outer {
                for (gp, &e) in grads.iter_mut().zip(&extents) {
                    gp.extend_from_slice(&g[cursor..cursor + e * inner]);
                    cursor += e * inner;
                }
            }
            grads.into_iter().map(Some).collect()
        }))
    }

    /// Reflection-pads the last two axes at the bottom and right edges.
    pub fn pad_reflect(&self, pad_bottom: usize, pad_right: usize) -> Result<Tensor<T>> {
        if pad_bottom == 0 && pad_right == 0 {
            return Ok(self.clone());
        }
        let (lead, h, w) = self.plane_dims("pad_reflect")?;
        let (oh, ow) = (h + pad_bottom, w + pad_right);
        let mut index = Vec::with_capacity(lead * oh * ow);
        for p in 0..lead {
            for y in 0..oh {
                let sy = mirror_index(y, h);
                for x in 0..ow {
                    index.push((p * h + sy) * w + mirror_index(x, w));
                }
            }
        }
        let mut shape = self.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = oh;
        shape[r - 1] = ow;
        Ok(self.gather("pad_reflect", shape, index))
    }

    /// Keeps the top-left `h × w` region of the last two axes.
    pub fn crop(&self, h: usize, w: usize) -> Result<Tensor<T>> {
        self.crop_at(0, 0, h, w)
    }

    /// Keeps the `h × w` region starting at `(top, left)` of the last two axes.
    pub fn crop_at(&self, top: usize, left: usize, h: usize, w: usize) -> Result<Tensor<T>> {
        let (lead, ih, iw) = self.plane_dims("crop")?;
        if top + h > ih || left + w > iw || h == 0 || w == 0 {
            return Err(TensorError::Invalid {
                op: "crop",
                msg: format!("region {h}x{w} at ({top},{left}) outside {ih}x{iw}"),
            });
        }
        if (top, left, h, w) == (0, 0, ih, iw) {
            return Ok(self.clone());
        }
        let mut index = Vec::with_capacity(lead * h * w);
        for p in 0..lead {
            for y in 0..h {
                for x in 0..w {
                    index.push((p * ih + top + y) * iw + left + x);
                }
            }
        }
        let mut shape = self.shape().to_vec();
        let r = shape.len();
        shape[r - 2] = h;
        shape[r - 1] = w;
        Ok(self.gather("crop", shape, index))
    }

    fn plane_dims(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        let r = self.rank();
        if r < 2 {
            return Err(TensorError::Invalid {
                op,
                msg: format!("needs rank >= 2, got {:?}", self.shape()),
            });
        }
        let lead = self.shape()[..r - 2].iter().product();
        Ok((lead, self.shape()[r - 2], self.shape()[r - 1]))
    }
}
