use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{composite, render_smoke_frame, SmokeLayer, SmokeParams};
use crate::error::{Error, Result};
use crate::image::{save_png_raw, Image};

pub const MANIFEST_FILE: &str = "manifest.tsv";
/// Frames are drawn from `0..=MAX_FRAME`.
pub const MAX_FRAME: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown split `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityTier {
    Light,
    Medium,
    Heavy,
    Random,
}

impl DensityTier {
    pub fn density_range(self) -> (f64, f64) {
        match self {
            DensityTier::Light => (0.15, 0.35),
            DensityTier::Medium => (0.4, 0.6),
            DensityTier::Heavy => (0.65, 0.9),
            DensityTier::Random => (0.15, 0.9),
        }
    }

    /// Draws parameters for one pair. Banded tiers fix the source position
    /// and temperature; `Random` draws them too.
    pub fn sample(self, rng: &mut impl Rng) -> SmokeParams {
        let (lo, hi) = self.density_range();
        let defaults = SmokeParams::default();
        let (source, temperature) = match self {
            DensityTier::Random => (
                (rng.random_range(0.2..=0.8), rng.random_range(0.2..=0.8)),
                rng.random_range(0.0..=1.0),
            ),
            _ => (defaults.source, defaults.temperature),
        };
        SmokeParams {
            density: rng.random_range(lo..=hi),
            intensity: rng.random_range(0.6..=1.0),
            temperature,
            source,
            light: (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)),
            light_intensity: rng.random_range(0.0..=0.5),
            seed: rng.random(),
            frame: rng.random_range(0..=MAX_FRAME),
        }
    }
}

impl FromStr for DensityTier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "light" => Ok(DensityTier::Light),
            "medium" => Ok(DensityTier::Medium),
            "heavy" => Ok(DensityTier::Heavy),
            "random" => Ok(DensityTier::Random),
            _ => Err(format!("unknown density tier `{s}` (light|medium|heavy|random)")),
        }
    }
}

/// `(train, val, test)` source counts for an 8:1:2 split.
///
/// With fewer than 3 sources everything is training data. Otherwise
/// `val = max(1, floor(n / 11))`, `test = max(1, round(2n / 11))` and
/// training takes the rest.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    if n < 3 {
        return (n, 0, 0);
    }
    let val = (n / 11).max(1);
    let test = ((2 * n + 5) / 11).max(1);
    (n - val - test, val, test)
}

/// Split of each source after a seeded shuffle.
pub fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let (train, val, _) = split_counts(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x53_504c_4954);
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut out = vec![Split::Train; n];
    for (rank, &src) in order.iter().enumerate() {
        out[src] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    out
}

/// One synthesized pair. Paths are relative to the dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub index: usize,
    pub split: Split,
    pub source: String,
    pub clean: String,
    pub smoke: String,
    pub syn: String,
    pub params: SmokeParams,
}

pub const MANIFEST_HEADER: &str = "index\tsplit\tsource\tclean\tsmoke\tsyn\tdensity\tintensity\ttemperature\tsource_x\tsource_y\tlight_x\tlight_y\tlight_intensity\tseed\tframe";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            let p = &r.params;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.index,
                r.split,
                r.source,
                r.clean,
                r.smoke,
                r.syn,
                p.density,
                p.intensity,
                p.temperature,
                p.source.0,
                p.source.1,
                p.light.0,
                p.light.1,
                p.light_intensity,
                p.seed,
                p.frame
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(MANIFEST_HEADER) {
            return Err(Error::Data("manifest header does not match the expected schema".into()));
        }
        let rows = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| parse_row(l).map_err(|e| Error::Data(format!("manifest line {}: {e}", i + 2))))
            .collect::<Result<_>>()?;
        Ok(Manifest { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        Manifest::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn parse_row(line: &str) -> std::result::Result<ManifestRow, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 16 {
        return Err(format!("expected 16 fields, found {}", f.len()));
    }
    fn num<V: FromStr>(name: &str, s: &str) -> std::result::Result<V, String> {
        s.parse().map_err(|_| format!("bad {name} `{s}`"))
    }
    Ok(ManifestRow {
        index: num("index", f[0])?,
        split: f[1].parse()?,
        source: f[2].to_string(),
        clean: f[3].to_string(),
        smoke: f[4].to_string(),
        syn: f[5].to_string(),
        params: SmokeParams {
            density: num("density", f[6])?,
            intensity: num("intensity", f[7])?,
            temperature: num("temperature", f[8])?,
            source: (num("source_x", f[9])?, num("source_y", f[10])?),
            light: (num("light_x", f[11])?, num("light_y", f[12])?),
            light_intensity: num("light_intensity", f[13])?,
            seed: num("seed", f[14])?,
            frame: num("frame", f[15])?,
        },
    })
}

/// A named clean image feeding the generator.
#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub image: Image,
}

/// Decodable PNG files in `dir`, sorted by file name.
pub fn load_sources(dir: impl AsRef<Path>) -> Result<Vec<Source>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let sources: Vec<Source> = paths
        .iter()
        .map(|p| {
            Ok(Source {
                name: p.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                image: Image::load_png(p)?,
            })
        })
        .collect::<Result<_>>()?;
    if sources.is_empty() {
        return Err(Error::Data(format!("no PNG images in {}", dir.display())));
    }
    Ok(sources)
}

/// Synthesizes `n_pairs` pairs from `sources` and writes images plus
/// `manifest.tsv` under `out_dir`. Pair `k` uses source `k mod n`; sources,
/// not pairs, are split, so no clean image appears in two splits.
pub fn generate_dataset(
    sources: &[Source],
    out_dir: impl AsRef<Path>,
    n_pairs: usize,
    seed: u64,
    tier: DensityTier,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    if sources.is_empty() {
        return Err(Error::Data("no source images".into()));
    }
    if let Some(s) = sources.iter().find(|s| s.image.width() < 8 || s.image.height() < 8) {
        return Err(Error::Data(format!("source {} is smaller than 8x8", s.name)));
    }
    let splits = assign_splits(sources.len(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<ManifestRow> = (0..n_pairs)
        .map(|k| {
            let src = k % sources.len();
            let split = splits[src];
            let file = |kind: &str| format!("{split}/{kind}/{k:05}.png");
            ManifestRow {
                index: k,
                split,
                source: sources[src].name.clone(),
                clean: file("clean"),
                smoke: file("smoke"),
                syn: file("syn"),
                params: tier.sample(&mut rng),
            }
        })
        .collect();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    rows.par_iter().try_for_each(|row| -> Result<()> {
        let clean = sources[row.index % sources.len()].image.quantized();
        let (layer, syn) = render_pair(&clean, &row.params)?;
        clean.save_png(out_dir.join(&row.clean))?;
        save_png_raw(
            &out_dir.join(&row.smoke),
            layer.width,
            layer.height,
            &layer.to_gray8(),
            image::ColorType::L8,
        )?;
        syn.save_png(out_dir.join(&row.syn))
    })?;
    let manifest = Manifest { rows };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_tsv()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn render_pair(clean: &Image, p: &SmokeParams) -> Result<(SmokeLayer, Image)> {
    let layer = render_smoke_frame(p, clean.width(), clean.height())?;
    let syn = composite(clean, &layer)?;
    Ok((layer, syn))
}

/// Re-renders every row from its clean image and parameters and compares
/// the 8-bit result with the stored smoky image. Returns mismatching indices.
pub fn verify_dataset(root: impl AsRef<Path>, manifest: &Manifest) -> Result<Vec<usize>> {
    let root = root.as_ref();
    let bad = manifest
        .rows
        .par_iter()
        .map(|row| -> Result<Option<usize>> {
            let clean = Image::load_png(root.join(&row.clean))?;
            let stored = Image::load_png(root.join(&row.syn))?;
            let (_, syn) = render_pair(&clean, &row.params)?;
            Ok((syn.to_rgb8() != stored.to_rgb8()).then_some(row.index))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(bad.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::procedural_tissue;
    use proptest::prelude::*;

    fn sources(n: usize) -> Vec<Source> {
        (0..n)
            .map(|i| Source {
                name: format!("img{i:02}.png"),
                image: procedural_tissue(i as u64, 16, 12),
            })
            .collect()
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_counts(11), (8, 1, 2));
        assert_eq!(split_counts(660), (480, 60, 120));
        assert_eq!(split_counts(10), (7, 1, 2));
        assert_eq!(split_counts(3), (1, 1, 1));
        assert_eq!(split_counts(2), (2, 0, 0));
    }

    proptest! {
        #[test]
        fn splits_partition_sources(n in 3usize..400, seed in any::<u64>()) {
            let (tr, va, te) = split_counts(n);
            prop_assert!(tr >= 1 && va >= 1 && te >= 1);
            prop_assert_eq!(tr + va + te, n);
            let s = assign_splits(n, seed);
            prop_assert_eq!(s.iter().filter(|&&x| x == Split::Train).count(), tr);
            prop_assert_eq!(s.iter().filter(|&&x| x == Split::Val).count(), va);
        }
    }

    #[test]
    fn manifest_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let src = sources(5);
        let a = generate_dataset(&src, dir.path().join("a"), 9, 3, DensityTier::Random).unwrap();
        let b = generate_dataset(&src, dir.path().join("b"), 9, 3, DensityTier::Random).unwrap();
        assert_eq!(a, b);
        let text = fs::read_to_string(dir.path().join("a").join(MANIFEST_FILE)).unwrap();
        assert_eq!(text, a.to_tsv());
        assert_eq!(Manifest::parse(&text).unwrap(), a);
        assert!(verify_dataset(dir.path().join("a"), &a).unwrap().is_empty());
        for r in &a.rows {
            assert_eq!(r.source, src[r.index % 5].name);
            assert!(dir.path().join("a").join(&r.smoke).exists());
        }
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&sources(3), dir.path(), 3, 1, DensityTier::Heavy).unwrap();
        Image::filled(16, 12, [0.0; 3])
            .save_png(dir.path().join(&m.rows[1].syn))
            .unwrap();
        assert_eq!(verify_dataset(dir.path(), &m).unwrap(), vec![1]);
    }

    #[test]
    fn tiers_respect_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for tier in [DensityTier::Light, DensityTier::Medium, DensityTier::Heavy] {
            let (lo, hi) = tier.density_range();
            for _ in 0..50 {
                let p = tier.sample(&mut rng);
                assert!(p.density >= lo && p.density <= hi);
                assert_eq!(p.source, SmokeParams::default().source);
                assert_eq!(p.temperature, SmokeParams::default().temperature);
                assert!(p.frame <= MAX_FRAME);
                p.validate().unwrap();
            }
        }
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_sources(dir.path()), Err(Error::Data(_))));
    }
}
