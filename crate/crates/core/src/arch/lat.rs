use super::{BuildResult, Leff, Sea};
use crate::nn::{LayerNorm, ParamStore};
use crate::tensor::{Result, Scalar, Tensor, TensorError};

/// Pre-norm transformer block over non-overlapping square windows:
/// `x + SEA(LN(x))`, then `y + LEFF(LN(y))`.
#[derive(Debug, Clone)]
pub struct LatBlock {
    pub norm1: LayerNorm,
    pub sea: Sea,
    pub norm2: LayerNorm,
    pub leff: Leff,
}

impl LatBlock {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        attn_channels: usize,
        leff_ratio: usize,
        seed: u64,
    ) -> BuildResult<Self> {
        Ok(Self {
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), channels)?,
            sea: Sea::new(
                store,
                &format!("{name}.sea"),
                channels,
                attn_channels,
                attn_channels,
                seed,
            )?,
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), channels)?,
            leff: Leff::new(store, &format!("{name}.leff"), channels, leff_ratio, seed)?,
        })
    }

    /// Windowed tokens `[n_windows, window², C]` in and out.
    pub fn forward_tokens<T: Scalar>(&self, store: &ParamStore<T>, t: &Tensor<T>, window: usize) -> Result<Tensor<T>> {
        let sea = self
            .sea
            .forward(store, &self.norm1.forward(store, t)?, window, window)?;
        let x_sea = sea.add(t)?;
        let ff = self
            .leff
            .forward(store, &self.norm2.forward(store, &x_sea)?, window, window)?;
        ff.add(&x_sea)
    }

    /// `[C, H, W]` map of any extent.
    pub fn forward<T: Scalar>(&self, store: &ParamStore<T>, x: &Tensor<T>, window: usize) -> Result<Tensor<T>> {
        run_windowed(x, window, |t| self.forward_tokens(store, t, window))
    }
}

/// Reflection-pads `x` to a multiple of `window`, applies `f` to the
/// window tokens and crops the result back to the input extent.
pub fn run_windowed<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    f: impl FnOnce(&Tensor<T>) -> Result<Tensor<T>>,
) -> Result<Tensor<T>> {
    let (c, h, w) = match *x.shape() {
        [c, h, w] => (c, h, w),
        _ => {
            return Err(TensorError::Invalid {
                op: "lat",
                msg: format!("expected [C, H, W], got {:?}", x.shape()),
            })
        }
    };
    let (hp, wp) = (h.div_ceil(window) * window, w.div_ceil(window) * window);
    let padded = x.pad_reflect(hp - h, wp - w)?;
    let tokens = partition_windows(&padded, window)?;
    let out = f(&tokens)?;
    if out.shape() != tokens.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "lat",
            lhs: tokens.shape().to_vec(),
            rhs: out.shape().to_vec(),
        });
    }
    merge_windows(&out, c, hp, wp, window)?.crop(h, w)
}

/// `[C, H, W] -> [(H/ws)·(W/ws), ws², C]`, windows in row-major order.
pub fn partition_windows<T: Scalar>(x: &Tensor<T>, ws: usize) -> Result<Tensor<T>> {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (nh, nw) = (h / ws, w / ws);
    x.reshape(&[c, nh, ws, nw, ws])?
        .permute(&[1, 3, 2, 4, 0])?
        .reshape(&[nh * nw, ws * ws, c])
}

/// Inverse of [`partition_windows`].
pub fn merge_windows<T: Scalar>(t: &Tensor<T>, c: usize, h: usize, w: usize, ws: usize) -> Result<Tensor<T>> {
    let (nh, nw) = (h / ws, w / ws);
    t.reshape(&[nh, nw, ws, ws, c])?
        .permute(&[4, 0, 2, 1, 3])?
        .reshape(&[c, h, w])
}
