//! Seeded fractal value noise.

/// Lattice value in `[0, 1)` for integer cell `(x, y)` of one octave.
fn lattice(seed: u64, octave: u32, x: i64, y: i64) -> f64 {
    let mut h = seed ^ (octave as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h ^= (x as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = h.rotate_left(31) ^ (y as u64).wrapping_mul(0x94d0_49bb_1331_11eb);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear blend of lattice values with smoothstep weights.
pub fn value_noise(seed: u64, octave: u32, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (tx, ty) = (smoothstep(x - x0), smoothstep(y - y0));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, octave, ix, iy);
    let b = lattice(seed, octave, ix + 1, iy);
    let c = lattice(seed, octave, ix, iy + 1);
    let d = lattice(seed, octave, ix + 1, iy + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

#[derive(Debug, Clone, Copy)]
pub struct Fbm {
    pub octaves: u32,
    pub lacunarity: f64,
    pub persistence: f64,
    pub base_frequency: f64,
}

impl Default for Fbm {
    fn default() -> Self {
        Self {
            octaves: 4,
            lacunarity: 2.0,
            persistence: 0.5,
            base_frequency: 4.0,
        }
    }
}

impl Fbm {
    /// Normalized octave sum in `[0, 1]`.
    pub fn sample(&self, seed: u64, x: f64, y: f64) -> f64 {
        let (mut freq, mut amp, mut total, mut norm) = (self.base_frequency, 1.0, 0.0, 0.0);
        for o in 0..self.octaves {
            total += amp * value_noise(seed, o, x * freq, y * freq);
            norm += amp;
            freq *= self.lacunarity;
            amp *= self.persistence;
        }
        total / norm
    }
}
