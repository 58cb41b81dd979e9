use std::str::FromStr;

use crate::tensor::{Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvLoss {
    LeastSquares,
    CrossEntropy,
}

impl FromStr for AdvLoss {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "least-squares" | "lsgan" => Ok(AdvLoss::LeastSquares),
            "cross-entropy" | "bce" => Ok(AdvLoss::CrossEntropy),
            _ => Err(format!("unknown adversarial loss `{s}` (least-squares|cross-entropy)")),
        }
    }
}

impl std::fmt::Display for AdvLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdvLoss::LeastSquares => "least-squares",
            AdvLoss::CrossEntropy => "cross-entropy",
        })
    }
}

impl AdvLoss {
    /// Discriminator loss on real and fake patch logits.
    pub fn discriminator<T: Scalar>(self, d_real: &Tensor<T>, d_fake: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            AdvLoss::LeastSquares => Ok(d_real
                .add_scalar(-1.0)
                .square()
                .mean()
                .add(&d_fake.square().mean())?
                .scale(0.5)),
            AdvLoss::CrossEntropy => d_real.neg().softplus().mean().add(&d_fake.softplus().mean()),
        }
    }

    /// Generator's adversarial term on fake patch logits.
    pub fn generator<T: Scalar>(self, d_fake: &Tensor<T>) -> Tensor<T> {
        match self {
            AdvLoss::LeastSquares => d_fake.add_scalar(-1.0).square().mean(),
            AdvLoss::CrossEntropy => d_fake.neg().softplus().mean(),
        }
    }
}

pub fn l1<T: Scalar>(output: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(output.sub(target)?.abs().mean())
}

/// `(loss_D, loss_G, l1)` as produced for one image.
pub fn gan_losses<T: Scalar>(
    kind: AdvLoss,
    d_real: &Tensor<T>,
    d_fake: &Tensor<T>,
    g_out: &Tensor<T>,
    target: &Tensor<T>,
    lambda_l1: f64,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = kind.discriminator(d_real, d_fake)?;
    let rec = l1(g_out, target)?;
    let g = kind.generator(d_fake).add(&rec.scale(lambda_l1))?;
    Ok((d, g, rec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(v.to_vec(), &[1, 1, v.len()]).unwrap()
    }

    #[test]
    fn perfect_discriminator_has_zero_loss() {
        let (d, _, _) = gan_losses(
            AdvLoss::LeastSquares,
            &t(&[1.0; 4]),
            &t(&[0.0; 4]),
            &t(&[0.3]),
            &t(&[0.3]),
            100.0,
        )
        .unwrap();
        assert_eq!(d.item(), 0.0);
    }

    #[test]
    fn l1_vanishes_on_target() {
        let x = t(&[0.1, 0.9, 0.4]);
        let (_, g, rec) = gan_losses(AdvLoss::LeastSquares, &t(&[0.5]), &t(&[0.2]), &x, &x, 100.0).unwrap();
        assert_eq!(rec.item(), 0.0);
        assert_eq!(g.item(), (0.2f64 - 1.0).powi(2));
    }

    #[test]
    fn lambda_zero_is_pure_adversarial() {
        let fake = t(&[0.2, -0.4]);
        let (_, g, _) = gan_losses(AdvLoss::LeastSquares, &t(&[1.0]), &fake, &t(&[0.0]), &t(&[1.0]), 0.0).unwrap();
        assert_eq!(g.item(), AdvLoss::LeastSquares.generator(&fake).item());
        assert!((g.item() - (0.64 + 1.96) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_values() {
        let d = AdvLoss::CrossEntropy.discriminator(&t(&[0.0]), &t(&[0.0])).unwrap();
        assert!((d.item() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(
            AdvLoss::CrossEntropy
                .discriminator(&t(&[30.0]), &t(&[-30.0]))
                .unwrap()
                .item()
                < 1e-12
        );
    }
}
