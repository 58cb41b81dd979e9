use super::{Result, Scalar, Tensor, TensorError};

/// Stride, zero padding and group count of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl Conv2dOptions {
    /// Stride 1 with `(k - 1) / 2` padding, which preserves spatial extents.
    pub fn same(kernel: usize, groups: usize) -> Self {
        Self {
            stride: 1,
            padding: (kernel - 1) / 2,
            groups,
        }
    }
}

#[derive(Clone, Copy)]
struct Geometry {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
    groups: usize,
}

impl Geometry {
    fn cin_g(&self) -> usize {
        self.c_in / self.groups
    }
    fn cout_g(&self) -> usize {
        self.c_out / self.groups
    }
    /// Output columns `ox` for which input column `ox*stride + kx - pad` is
    /// in range, as a half-open interval.
    fn valid_range(&self, kx: usize, extent: usize, out_extent: usize) -> (usize, usize) {
        // need 0 <= o*s + kx - pad < extent
        let s = self.stride;
        let lo = if kx >= self.pad { 0 } else { (self.pad - kx).div_ceil(s) };
        let hi_num = extent + self.pad;
        let hi = if hi_num > kx { (hi_num - kx).div_ceil(s) } else { 0 };
        (lo.min(out_extent), hi.min(out_extent))
    }
}

fn forward<T: Scalar>(g: &Geometry, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let (cin_g, cout_g, k) = (g.cin_g(), g.cout_g(), g.k);
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut out = vec![T::zero(); g.batch * g.c_out * plane_out];
    for b in 0..g.batch {
        for oc in 0..g.c_out {
            let grp = oc / cout_g;
            let o_plane = &mut out[(b * g.c_out + oc) * plane_out..(b * g.c_out + oc + 1) * plane_out];
            if let Some(bias) = bias {
                o_plane.iter_mut().for_each(|v| *v = bias[oc]);
            }
            for icg in 0..cin_g {
                let ic = grp * cin_g + icg;
                let x_plane = &x[(b * g.c_in + ic) * plane_in..(b * g.c_in + ic + 1) * plane_in];
                let w_base = (oc * cin_g + icg) * k * k;
                for ky in 0..k {
                    let (oy0, oy1) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..k {
                        let wv = w[w_base + ky * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let (ox0, ox1) = g.valid_range(kx, g.w, g.ow);
                        if ox0 >= ox1 {
                            continue;
                        }
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let xrow = &x_plane[iy * g.w..(iy + 1) * g.w];
                            let orow = &mut o_plane[oy * g.ow..(oy + 1) * g.ow];
                            if g.stride == 1 {
                                let ix0 = ox0 + kx - g.pad;
                                for (o, &xv) in orow[ox0..ox1].iter_mut().zip(&xrow[ix0..ix0 + (ox1 - ox0)]) {
                                    *o += wv * xv;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    orow[ox] += wv * xrow[ox * g.stride + kx - g.pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn backward_input<T: Scalar>(g: &Geometry, gout: &[T], w: &[T]) -> Vec<T> {
    let (cin_g, cout_g, k) = (g.cin_g(), g.cout_g(), g.k);
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut gx = vec![T::zero(); g.batch * g.c_in * plane_in];
    for b in 0..g.batch {
        for oc in 0..g.c_out {
            let grp = oc / cout_g;
            let g_plane = &gout[(b * g.c_out + oc) * plane_out..(b * g.c_out + oc + 1) * plane_out];
            for icg in 0..cin_g {
                let ic = grp * cin_g + icg;
                let gx_plane = &mut gx[(b * g.c_in + ic) * plane_in..(b * g.c_in + ic + 1) * plane_in];
                let w_base = (oc * cin_g + icg) * k * k;
                for ky in 0..k {
                    let (oy0, oy1) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..k {
                        let wv = w[w_base + ky * k + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let (ox0, ox1) = g.valid_range(kx, g.w, g.ow);
                        if ox0 >= ox1 {
                            continue;
                        }
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let grow = &g_plane[oy * g.ow..(oy + 1) * g.ow];
                            let xrow = &mut gx_plane[iy * g.w..(iy + 1) * g.w];
                            if g.stride == 1 {
                                let ix0 = ox0 + kx - g.pad;
                                for (xv, &gv) in xrow[ix0..ix0 + (ox1 - ox0)].iter_mut().zip(&grow[ox0..ox1]) {
                                    *xv += wv * gv;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    xrow[ox * g.stride + kx - g.pad] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    gx
}

fn backward_weight<T: Scalar>(g: &Geometry, gout: &[T], x: &[T]) -> Vec<T> {
    let (cin_g, cout_g, k) = (g.cin_g(), g.cout_g(), g.k);
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut gw = vec![T::zero(); g.c_out * cin_g * k * k];
    for b in 0..g.batch {
        for oc in 0..g.c_out {
            let grp = oc / cout_g;
            let g_plane = &gout[(b * g.c_out + oc) * plane_out..(b * g.c_out + oc + 1) * plane_out];
            for icg in 0..cin_g {
                let ic = grp * cin_g + icg;
                let x_plane = &x[(b * g.c_in + ic) * plane_in..(b * g.c_in + ic + 1) * plane_in];
                let w_base = (oc * cin_g + icg) * k * k;
                for ky in 0..k {
                    let (oy0, oy1) = g.valid_range(ky, g.h, g.oh);
                    for kx in 0..k {
                        let (ox0, ox1) = g.valid_range(kx, g.w, g.ow);
                        if ox0 >= ox1 {
                            continue;
                        }
                        let mut s = T::zero();
                        for oy in oy0..oy1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let grow = &g_plane[oy * g.ow..(oy + 1) * g.ow];
                            let xrow = &x_plane[iy * g.w..(iy + 1) * g.w];
                            if g.stride == 1 {
                                let ix0 = ox0 + kx - g.pad;
                                for (&gv, &xv) in grow[ox0..ox1].iter().zip(&xrow[ix0..ix0 + (ox1 - ox0)]) {
                                    s += gv * xv;
                                }
                            } else {
                                for ox in ox0..ox1 {
                                    s += grow[ox] * xrow[ox * g.stride + kx - g.pad];
                                }
                            }
                        }
                        gw[w_base + ky * k + kx] += s;
                    }
                }
            }
        }
    }
    gw
}

impl<T: Scalar> Tensor<T> {
    /// Grouped 2-D cross-correlation.
    ///
    /// `self` is `[C_in, H, W]` or `[B, C_in, H, W]`; `weight` is
    /// `[C_out, C_in / groups, k, k]` with odd `k`; `bias` is `[C_out]`.
    /// Output extent per axis is `(H + 2*padding - k) / stride + 1`.
    pub fn conv2d(&self, weight: &Tensor<T>, bias: Option<&Tensor<T>>, opts: Conv2dOptions) -> Result<Tensor<T>> {
        let invalid = |msg: String| TensorError::Invalid { op: "conv2d", msg };
        let (batch, c_in, h, w, batched) = match *self.shape() {
            [c, h, w] => (1, c, h, w, false),
            [b, c, h, w] => (b, c, h, w, true),
            _ => return Err(invalid(format!("input must be rank 3 or 4, got {:?}", self.shape()))),
        };
        let [c_out, cin_g, k, k2] = *weight.shape() else {
            return Err(invalid(format!("weight must be rank 4, got {:?}", weight.shape())));
        };
        let groups = opts.groups;
        if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
            return Err(invalid(format!(
                "groups {groups} must divide C_in {c_in} and C_out {c_out}"
            )));
        }
        if cin_g != c_in / groups {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: self.shape().to_vec(),
                rhs: weight.shape().to_vec(),
            });
        }
        if k != k2 || k % 2 == 0 {
            return Err(invalid(format!("kernel must be square with odd size, got {k}x{k2}")));
        }
        if opts.stride == 0 {
            return Err(invalid("stride must be positive".into()));
        }
        if k > h + 2 * opts.padding || k > w + 2 * opts.padding {
            return Err(invalid(format!(
                "kernel {k} larger than padded input {}x{}",
                h + 2 * opts.padding,
                w + 2 * opts.padding
            )));
        }
        if let Some(b) = bias {
            if b.shape() != [c_out] {
                return Err(TensorError::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: vec![c_out],
                    rhs: b.shape().to_vec(),
                });
            }
        }
        let oh = (h + 2 * opts.padding - k) / opts.stride + 1;
        let ow = (w + 2 * opts.padding - k) / opts.stride + 1;
        let geo = Geometry {
            batch,
            c_in,
            h,
            w,
            c_out,
            k,
            oh,
            ow,
            stride: opts.stride,
            pad: opts.padding,
            groups,
        };
        let data = forward(&geo, self.data(), weight.data(), bias.map(|b| b.data()));
        let shape = if batched {
            vec![batch, c_out, oh, ow]
        } else {
            vec![c_out, oh, ow]
        };
        let mut parents = vec![self.clone(), weight.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let (x, wt) = (self.clone(), weight.clone());
        let has_bias = bias.is_some();
        let bias_grad = bias.map(|b| b.requires_grad()).unwrap_or(false);
        Ok(Tensor::from_op(shape, data, "conv2d", parents, move |gout| {
            let gx = x.requires_grad().then(|| backward_input(&geo, gout, wt.data()));
            let gw = wt.requires_grad().then(|| backward_weight(&geo, gout, x.data()));
            let mut grads = vec![gx, gw];
            if has_bias {
                grads.push(bias_grad.then(|| {
                    let plane = geo.oh * geo.ow;
                    let mut gb = vec![T::zero(); geo.c_out];
                    for b in 0..geo.batch {
                        for (oc, acc) in gb.iter_mut().enumerate() {
                            let off = (b * geo.c_out + oc) * plane;
                            *acc += gout[off..off + plane].iter().copied().sum::<T>();
                        }
                    }
                    gb
                }));
            }
            grads
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Six nested loops over (oc, oy, ox, ic, ky, kx) with explicit bounds tests.
    #[allow(clippy::too_many_arguments)]
    fn naive_conv(
        x: &[f64],
        (c_in, h, w): (usize, usize, usize),
        wt: &[f64],
        (c_out, k): (usize, usize),
        bias: &[f64],
        stride: usize,
        pad: usize,
        groups: usize,
    ) -> Vec<f64> {
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        let cin_g = c_in / groups;
        let cout_g = c_out / groups;
        let mut out = vec![0.0; c_out * oh * ow];
        for oc in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = bias[oc];
                    for icg in 0..cin_g {
                        let ic = (oc / cout_g) * cin_g + icg;
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                s += wt[((oc * cin_g + icg) * k + ky) * k + kx]
                                    * x[(ic * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(oc * oh + oy) * ow + ox] = s;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_is_noop() {
        let x = Tensor::<f64>::from_vec((0..9).map(|v| v as f64).collect(), &[1, 3, 3]).unwrap();
        let w = Tensor::from_vec(vec![1.0], &[1, 1, 1, 1]).unwrap();
        let y = x.conv2d(&w, None, Conv2dOptions::default()).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = rand_vec(&mut rng, 2 * 5 * 5);
        let w = rand_vec(&mut rng, 3 * 2 * 9);
        let b = rand_vec(&mut rng, 3);
        let y = Tensor::from_vec(x.clone(), &[2, 5, 5])
            .unwrap()
            .conv2d(
                &Tensor::from_vec(w.clone(), &[3, 2, 3, 3]).unwrap(),
                Some(&Tensor::from_vec(b.clone(), &[3]).unwrap()),
                Conv2dOptions::same(3, 1),
            )
            .unwrap();
        let want = naive_conv(&x, (2, 5, 5), &w, (3, 3), &b, 1, 1, 1);
        for (a, e) in y.data().iter().zip(&want) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn grouped_strided_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (c_in, c_out, k, g) = (4, 6, 5, 2);
        let x = rand_vec(&mut rng, c_in * 7 * 6);
        let w = rand_vec(&mut rng, c_out * (c_in / g) * k * k);
        let b = rand_vec(&mut rng, c_out);
        let opts = Conv2dOptions {
            stride: 2,
            padding: 2,
            groups: g,
        };
        let y = Tensor::from_vec(x.clone(), &[c_in, 7, 6])
            .unwrap()
            .conv2d(
                &Tensor::from_vec(w.clone(), &[c_out, c_in / g, k, k]).unwrap(),
                Some(&Tensor::from_vec(b.clone(), &[c_out]).unwrap()),
                opts,
            )
            .unwrap();
        assert_eq!(y.shape(), &[6, 4, 3]);
        let want = naive_conv(&x, (c_in, 7, 6), &w, (c_out, k), &b, 2, 2, g);
        for (a, e) in y.data().iter().zip(&want) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn depthwise_weight_count_is_one_over_groups() {
        let standard = Tensor::<f32>::zeros(&[64, 64, 3, 3]);
        let depthwise = Tensor::<f32>::zeros(&[64, 64 / 64, 3, 3]);
        assert_eq!(standard.numel(), 36_864);
        assert_eq!(depthwise.numel(), 576);
        assert_eq!(standard.numel(), 64 * depthwise.numel());
    }

    #[test]
    fn rejects_bad_groups_and_even_kernels() {
        let x = Tensor::<f64>::zeros(&[3, 4, 4]);
        let w = Tensor::<f64>::zeros(&[4, 1, 3, 3]);
        let opts = Conv2dOptions {
            groups: 2,
            ..Conv2dOptions::same(3, 2)
        };
        assert!(matches!(x.conv2d(&w, None, opts), Err(TensorError::Invalid { .. })));
        let x = Tensor::<f64>::zeros(&[1, 4, 4]);
        let w = Tensor::<f64>::zeros(&[1, 1, 2, 2]);
        assert!(x.conv2d(&w, None, Conv2dOptions::default()).is_err());
    }

    #[test]
    fn rejects_kernel_larger_than_padded_input() {
        let x = Tensor::<f64>::zeros(&[1, 2, 2]);
        let w = Tensor::<f64>::zeros(&[1, 1, 5, 5]);
        assert!(x.conv2d(&w, None, Conv2dOptions::default()).is_err());
        assert!(x.conv2d(&w, None, Conv2dOptions::same(5, 1)).is_ok());
    }
}
