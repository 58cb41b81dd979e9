//! Attention kernels on token-major `[N, C]` slices that count their own
//! operations with the conventions of [`crate::arch::flops`].

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter(pub u128);

impl OpCounter {
    #[inline]
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        self.0 += 1;
        a * b
    }

    #[inline]
    fn div(&mut self, a: f64, b: f64) -> f64 {
        self.0 += 1;
        a / b
    }

    #[inline]
    fn add(&mut self, a: f64, b: f64) -> f64 {
        self.0 += 1;
        a + b
    }
}

/// Softmax attention of each query row over all key rows; writes `[nq, cv]`.
fn attend(ops: &mut OpCounter, q: &[f64], k: &[f64], v: &[f64], cqk: usize, cv: usize, out: &mut [f64]) {
    let nk = k.len() / cqk;
    let mut weights = vec![0.0; nk];
    for (qi, o) in q.chunks_exact(cqk).zip(out.chunks_exact_mut(cv)) {
        for (wj, kj) in weights.iter_mut().zip(k.chunks_exact(cqk)) {
            *wj = qi.iter().zip(kj).map(|(&a, &b)| ops.mul(a, b)).sum();
        }
        let m = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for wj in weights.iter_mut() {
            *wj = (*wj - m).exp();
            z += *wj;
        }
        for wj in weights.iter_mut() {
            *wj = ops.div(*wj, z);
        }
        o.fill(0.0);
        for (&wj, vj) in weights.iter().zip(v.chunks_exact(cv)) {
            for (oc, &vc) in o.iter_mut().zip(vj) {
                *oc += ops.mul(wj, vc);
            }
        }
    }
}

/// Averages a `[h, w, c]` grid over axis 1 (`rows`) or axis 0 (columns).
fn squeeze(ops: &mut OpCounter, t: &[f64], h: usize, w: usize, c: usize, rows: bool) -> Vec<f64> {
    let (n, len) = if rows { (h, w) } else { (w, h) };
    let mut out = vec![0.0; n * c];
    for i in 0..n {
        for j in 0..len {
            let (y, x) = if rows { (i, j) } else { (j, i) };
            let src = &t[(y * w + x) * c..(y * w + x + 1) * c];
            out[i * c..(i + 1) * c].iter_mut().zip(src).for_each(|(o, &s)| *o += s);
        }
    }
    out.iter_mut().for_each(|v| *v = ops.div(*v, len as f64));
    out
}

/// Axial attention on an `h × w` grid of tokens.
#[allow(clippy::too_many_arguments)]
pub fn counted_axial(
    ops: &mut OpCounter,
    q: &[f64],
    k: &[f64],
    v: &[f64],
    h: usize,
    w: usize,
    cqk: usize,
    cv: usize,
) -> Vec<f64> {
    let mut rows = vec![0.0; h * cv];
    let (qr, kr, vr) = (
        squeeze(ops, q, h, w, cqk, true),
        squeeze(ops, k, h, w, cqk, true),
        squeeze(ops, v, h, w, cv, true),
    );
    attend(ops, &qr, &kr, &vr, cqk, cv, &mut rows);
    let mut cols = vec![0.0; w * cv];
    let (qc, kc, vc) = (
        squeeze(ops, q, h, w, cqk, false),
        squeeze(ops, k, h, w, cqk, false),
        squeeze(ops, v, h, w, cv, false),
    );
    attend(ops, &qc, &kc, &vc, cqk, cv, &mut cols);
    let mut out = vec![0.0; h * w * cv];
    for y in 0..h {
        for x in 0..w {
            for c in 0..cv {
                out[(y * w + x) * cv + c] = ops.add(rows[y * cv + c], cols[x * cv + c]);
            }
        }
    }
    out
}

/// Attention of every token over all tokens.
pub fn counted_global(ops: &mut OpCounter, q: &[f64], k: &[f64], v: &[f64], cqk: usize, cv: usize) -> Vec<f64> {
    let mut out = vec![0.0; q.len() / cqk * cv];
    attend(ops, q, k, v, cqk, cv, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::testutil::random_vec;
    use crate::arch::{axial_attention, flop_count, global_attention, AttnKind};
    use crate::tensor::Tensor;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs().max(1.0))
    }

    #[test]
    fn matches_tensor_kernels_and_formula() {
        for (i, (h, w, cqk, cv)) in [(4, 4, 2, 2), (3, 6, 4, 3), (5, 2, 1, 4)].into_iter().enumerate() {
            let n = h * w;
            let s = 10 * i as u64;
            let (q, k, v) = (
                random_vec(n * cqk, s, 1.5),
                random_vec(n * cqk, s + 1, 1.5),
                random_vec(n * cv, s + 2, 1.5),
            );
            let t = |d: &[f64], c| Tensor::from_vec(d.to_vec(), &[1, n, c]).unwrap();

            let mut ops = OpCounter::default();
            let got = counted_axial(&mut ops, &q, &k, &v, h, w, cqk, cv);
            let want = axial_attention(&t(&q, cqk), &t(&k, cqk), &t(&v, cv), h, w).unwrap();
            assert!(close(&got, want.data()));
            assert_eq!(ops.0, flop_count(AttnKind::Sea, 2 * cqk, cqk, cv, h, w));

            let mut ops = OpCounter::default();
            let got = counted_global(&mut ops, &q, &k, &v, cqk, cv);
            let want = global_attention(&t(&q, cqk), &t(&k, cqk), &t(&v, cv)).unwrap();
            assert!(close(&got, want.data()));
            assert_eq!(ops.0, flop_count(AttnKind::Full, 2 * cqk, cqk, cv, h, w));
        }
    }
}
