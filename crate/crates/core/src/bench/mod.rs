//! Timing and operation-count scaling of axial versus global attention.

mod kernels;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use kernels::{counted_axial, counted_global, OpCounter};

use crate::arch::{flop_count, AttnKind};
use crate::error::{Error, Result};

/// Global attention is skipped on maps with more tokens than this; its cost
/// grows with the square of the token count.
pub const FULL_ATTENTION_TOKEN_CAP: usize = 4096;
pub const MIN_REPS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub kind: &'static str,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub analytic_flops: u128,
    pub measured_flops: u128,
}

impl BenchRecord {
    pub fn counts_agree(&self) -> bool {
        self.analytic_flops == self.measured_flops
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Outcome of a bench run: measured records and sizes skipped by the cap.
#[derive(Debug, Clone, Default)]
pub struct BenchRun {
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<(AttnKind, usize, usize)>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs both kernels `reps` times per `(h, w)` on identical random inputs
/// with `c / 2` query/key and value channels. Kernels run one at a time on
/// the calling thread.
pub fn run_attention_bench(sizes: &[(usize, usize)], c: usize, reps: usize, seed: u64) -> Result<BenchRun> {
    if sizes.is_empty() {
        return Err(Error::Data("no benchmark sizes given".into()));
    }
    if reps < MIN_REPS {
        return Err(Error::Data(format!(
            "at least {MIN_REPS} repetitions are required, got {reps}"
        )));
    }
    if c < 2 || !c.is_multiple_of(2) {
        return Err(Error::Data(format!("channel count {c} must be even and positive")));
    }
    if let Some((h, w)) = sizes.iter().find(|(h, w)| *h == 0 || *w == 0) {
        return Err(Error::Data(format!("empty map {h}x{w}")));
    }
    let (cqk, cv) = (c / 2, c / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = BenchRun::default();
    for &(h, w) in sizes {
        let n = h * w;
        let mut draw = |len| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (q, k, v) = (draw(n * cqk), draw(n * cqk), draw(n * cv));
        for kind in [AttnKind::Sea, AttnKind::Full] {
            if kind == AttnKind::Full && n > FULL_ATTENTION_TOKEN_CAP {
                run.skipped.push((kind, h, w));
                continue;
            }
            let mut times = Vec::with_capacity(reps);
            let mut measured = 0;
            for _ in 0..reps {
                let mut ops = OpCounter::default();
                let start = Instant::now();
                let out = match kind {
                    AttnKind::Sea => counted_axial(&mut ops, &q, &k, &v, h, w, cqk, cv),
                    AttnKind::Full => counted_global(&mut ops, &q, &k, &v, cqk, cv),
                };
                times.push(start.elapsed().as_secs_f64() * 1e3);
                if !out.iter().all(|x| x.is_finite()) {
                    return Err(Error::Data(format!(
                        "{} attention produced non-finite output at {h}x{w}",
                        kind.name()
                    )));
                }
                measured = ops.0;
            }
            times.sort_by(f64::total_cmp);
            run.records.push(BenchRecord {
                kind: kind.name(),
                h,
                w,
                c,
                reps,
                median_ms: median(&times),
                min_ms: times[0],
                max_ms: times[reps - 1],
                analytic_flops: flop_count(kind, c, cqk, cv, h, w),
                measured_flops: measured,
            });
        }
    }
    Ok(run)
}

impl BenchRun {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<5} {:>5} {:>5} {:>4} {:>12} {:>16} {:>16} {:>6}\n",
            "kind", "H", "W", "C", "median_ms", "analytic_flops", "measured_flops", "match"
        );
        for r in &self.records {
            s += &format!(
                "{:<5} {:>5} {:>5} {:>4} {:>12.3} {:>16} {:>16} {:>6}\n",
                r.kind,
                r.h,
                r.w,
                r.c,
                r.median_ms,
                r.analytic_flops,
                r.measured_flops,
                if r.counts_agree() { "yes" } else { "NO" }
            );
        }
        for (kind, h, w) in &self.skipped {
            s += &format!(
                "{:<5} {h:>5} {w:>5}  skipped: more than {FULL_ATTENTION_TOKEN_CAP} tokens\n",
                kind.name()
            );
        }
        s
    }

    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| r.to_json() + "\n").collect()
    }

    /// Analytic flop count of `kind` at each square size present.
    pub fn square_series(&self, kind: AttnKind) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter(|r| r.kind == kind.name() && r.h == r.w)
            .map(|r| (r.h as f64, r.analytic_flops as f64))
            .collect()
    }
}
