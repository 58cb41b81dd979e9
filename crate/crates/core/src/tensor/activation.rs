use super::{Scalar, Tensor};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2*pi)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Tensor<T> {
    /// Exact GELU, `x * Phi(x)` with the Gaussian CDF written through `erf`.
    pub fn gelu(&self) -> Tensor<T> {
        let half = T::lit(0.5);
        let r2 = T::lit(FRAC_1_SQRT_2);
        let c = T::lit(INV_SQRT_2PI);
        self.map_unary(
            "gelu",
            move |x| x * half * (T::one() + (x * r2).erf()),
            move |x, _| {
                let cdf = half * (T::one() + (x * r2).erf());
                let pdf = c * (-(x * x) * half).exp();
                cdf + x * pdf
            },
        )
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor<T> {
        let s = T::lit(slope);
        self.map_unary(
            "leaky_relu",
            move |x| if x > T::zero() { x } else { x * s },
            move |x, _| if x > T::zero() { T::one() } else { s },
        )
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.map_unary("sigmoid", sigmoid_scalar, |_, y| y * (T::one() - y))
    }

    /// `ln(1 + e^x)` without overflow for large `|x|`.
    pub fn softplus(&self) -> Tensor<T> {
        self.map_unary(
            "softplus",
            |x| x.max(T::zero()) + (-x.abs()).exp().ln_1p(),
            |x, _| sigmoid_scalar(x),
        )
    }
}
