//! Elementwise arithmetic with trailing-dimension broadcasting.

use super::{numel, Result, Scalar, Tensor, TensorError};

/// Output shape of broadcasting `a` against `b`: shapes are aligned at their
/// trailing dimensions and each aligned pair must match or contain a 1.
pub(crate) fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(TensorError::ShapeMismatch {
                    op,
                    lhs: a.to_vec(),
                    rhs: b.to_vec(),
                })
            }
        };
    }
    Ok(out)
}

/// Flat source offsets into an operand of shape `src` for every element of
/// the broadcast output `out`.
fn broadcast_offsets(src: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let lead = rank - src.len();
    let mut strides = vec![0usize; rank];
    let mut s = 1;
    for i in (0..src.len()).rev() {
        strides[lead + i] = if src[i] == 1 { 0 } else { s };
        s *= src[i];
    }
    let total = numel(out);
    let mut offsets = Vec::with_capacity(total);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..total {
        offsets.push(off);
        for d in (0..rank).rev() {
            idx[d] += 1;
            off += strides[d];
            if idx[d] < out[d] {
                break;
            }
            off -= strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    offsets
}

#[derive(Clone, Copy)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        }
    }

    #[inline]
    fn apply<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => x / y,
        }
    }
}

fn reduce_into<T: Scalar>(g: &[T], offsets: Option<&[usize]>, len: usize, f: impl Fn(usize, T) -> T) -> Vec<T> {
    let mut acc = vec![T::zero(); len];
    match offsets {
        None => {
            for (i, (a, &gv)) in acc.iter_mut().zip(g).enumerate() {
                *a = f(i, gv);
            }
        }
        Some(offs) => {
            for (i, &gv) in g.iter().enumerate() {
                acc[offs[i]] += f(i, gv);
            }
        }
    }
    acc
}

fn binary<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, op: BinOp) -> Result<Tensor<T>> {
    let name = op.name();
    let same = a.shape() == b.shape();
    let out_shape = if same {
        a.shape().to_vec()
    } else {
        broadcast_shape(name, a.shape(), b.shape())?
    };
    let (oa, ob) = if same {
        (None, None)
    } else {
        let oa = (a.shape() != out_shape.as_slice()).then(|| broadcast_offsets(a.shape(), &out_shape));
        let ob = (b.shape() != out_shape.as_slice()).then(|| broadcast_offsets(b.shape(), &out_shape));
        (oa, ob)
    };
    let ad = a.data();
    let bd = b.data();
    let n = numel(&out_shape);
    let at = |i: usize| oa.as_ref().map_or(i, |o| o[i]);
    let bt = |i: usize| ob.as_ref().map_or(i, |o| o[i]);
    let data: Vec<T> = if same {
        ad.iter().zip(bd).map(|(&x, &y)| op.apply(x, y)).collect()
    } else {
        (0..n).map(|i| op.apply(ad[at(i)], bd[bt(i)])).collect()
    };

    let (ac, bc) = (a.clone(), b.clone());
    let need_a = a.requires_grad();
    let need_b = b.requires_grad();
    Ok(Tensor::from_op(
        out_shape,
        data,
        name,
        vec![a.clone(), b.clone()],
        move |g| {
            let ad = ac.data();
            let bd = bc.data();
            let ai = |i: usize| oa.as_ref().map_or(i, |o| o[i]);
            let bi = |i: usize| ob.as_ref().map_or(i, |o| o[i]);
            let ga = need_a.then(|| {
                reduce_into(g, oa.as_deref(), ad.len(), |i, gv| match op {
                    BinOp::Add | BinOp::Sub => gv,
                    BinOp::Mul => gv * bd[bi(i)],
                    BinOp::Div => gv / bd[bi(i)],
                })
            });
            let gb = need_b.then(|| {
                reduce_into(g, ob.as_deref(), bd.len(), |i, gv| match op {
                    BinOp::Add => gv,
                    BinOp::Sub => -gv,
                    BinOp::Mul => gv * ad[ai(i)],
                    BinOp::Div => {
                        let y = bd[bi(i)];
                        -gv * ad[ai(i)] / (y * y)
                    }
                })
            });
            vec![ga, gb]
        },
    ))
}

impl<T: Scalar> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        binary(self, other, BinOp::Add)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        binary(self, other, BinOp::Sub)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        binary(self, other, BinOp::Mul)
    }

    pub fn div(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        binary(self, other, BinOp::Div)
    }

    /// Elementwise map with a known derivative `df(x, y)`.
    pub(crate) fn map_unary(
        &self,
        op: &'static str,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + Send + Sync + 'static,
    ) -> Tensor<T> {
        let data: Vec<T> = self.data().iter().map(|&x| f(x)).collect();
        let x = self.clone();
        let y = data.clone();
        Tensor::from_op(self.shape().to_vec(), data, op, vec![self.clone()], move |g| {
            let gx = x
                .data()
                .iter()
                .zip(&y)
                .zip(g)
                .map(|((&xv, &yv), &gv)| gv * df(xv, yv))
                .collect();
            vec![Some(gx)]
        })
    }

    pub fn scale(&self, c: f64) -> Tensor<T> {
        let c = T::lit(c);
        self.map_unary("scale", move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<T> {
        let c = T::lit(c);
        self.map_unary("add_scalar", move |x| x + c, |_, _| T::one())
    }

    pub fn neg(&self) -> Tensor<T> {
        self.map_unary("neg", |x| -x, |_, _| -T::one())
    }

    pub fn square(&self) -> Tensor<T> {
        self.map_unary("square", |x| x * x, |x, _| x + x)
    }

    /// `|x|`; the derivative at 0 is taken as 0.
    pub fn abs(&self) -> Tensor<T> {
        self.map_unary(
            "abs",
            |x| x.abs(),
            |x, _| {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn exp(&self) -> Tensor<T> {
        self.map_unary("exp", |x| x.exp(), |_, y| y)
    }

    /// Clamps into `[lo, hi]`; gradient passes only strictly inside.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor<T> {
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        self.map_unary(
            "clamp",
            move |x| x.max(lo).min(hi),
            move |x, _| if x > lo && x < hi { T::one() } else { T::zero() },
        )
    }
}
