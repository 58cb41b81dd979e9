//! Closed-form operation counts for the attention kernels.
//!
//! Counted unit: one scalar multiply or divide, plus one add for each
//! element of the row/column assembly in axial attention. Accumulation adds
//! inside dot products and sums, `exp`, and the `q/k/v/o` projections are not
//! counted; the projections cost the same for both kernels.
//!
//! Axial (`H × W` grid):
//! ```text
//!   squeeze   (H + W)(2 C_qk + C_v)        one divide per averaged element
//!   scores    (H² + W²) C_qk
//!   softmax   (H² + W²)                    one divide per weight
//!   weighting (H² + W²) C_v
//!   assembly  H W C_v                      row result + column result
//! ```
//! Global (`N = H W` tokens): `N² C_qk + N² + N² C_v`.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttnKind {
    Sea,
    Full,
}

impl AttnKind {
    pub fn name(self) -> &'static str {
        match self {
            AttnKind::Sea => "sea",
            AttnKind::Full => "full",
        }
    }
}

/// Operation count for one attention map. `c` is accepted for symmetry with
/// the kernels but does not enter: projections are excluded.
pub fn flop_count(kind: AttnKind, _c: usize, c_qk: usize, c_v: usize, h: usize, w: usize) -> u128 {
    let (c_qk, c_v, h, w) = (c_qk as u128, c_v as u128, h as u128, w as u128);
    match kind {
        AttnKind::Sea => (h + w) * (2 * c_qk + c_v) + (h * h + w * w) * (c_qk + c_v + 1) + h * w * c_v,
        AttnKind::Full => {
            let n = h * w;
            n * n * (c_qk + c_v + 1)
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
