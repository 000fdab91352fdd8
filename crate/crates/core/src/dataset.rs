//! Patch extraction, overlap reconstruction, k-fold splitting and the
//! patch/manifest export consumed by the translation trainer.
//!
//! A 436 x 1000 image tiles exactly with 256 x 256 patches at strides of
//! 180 columns and 248 rows: origins `{0, 180} x {0, 248, 496, 744}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{read_pgm, write_pgm, BModeImage, ImageMeta, ImagePair, DATASET_COLUMNS, DATASET_ROWS};

pub const MANIFEST_FORMAT: &str = "eustwin-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Fold shuffle seed used when none is given.
pub const DEFAULT_FOLD_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchGrid {
    pub patch_size: usize,
    pub stride_w: usize,
    pub stride_h: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for PatchGrid {
    fn default() -> Self {
        PatchGrid {
            patch_size: 256,
            stride_w: 180,
            stride_h: 248,
            width: DATASET_COLUMNS,
            height: DATASET_ROWS,
        }
    }
}

/// Origins along one axis. A trailing strip the strides miss gets one extra
/// origin clamped to the edge.
pub fn axis_origins(dim: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|o| o + size <= dim).collect();
    if let Some(&last) = out.last() {
        if last + size < dim {
            out.push(dim - size);
        }
    }
    out
}

impl PatchGrid {
    /// Default patch size and strides over an arbitrary image.
    pub fn for_image(width: usize, height: usize) -> Self {
        PatchGrid {
            width,
            height,
            ..PatchGrid::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride_w == 0 || self.stride_h == 0 {
            return Err(Error::invalid("grid", "patch size and strides must be positive"));
        }
        if self.width < self.patch_size || self.height < self.patch_size {
            return Err(Error::invalid("grid", "image smaller than one patch"));
        }
        Ok(())
    }

    pub fn column_origins(&self) -> Vec<usize> {
        axis_origins(self.width, self.patch_size, self.stride_w)
    }

    pub fn row_origins(&self) -> Vec<usize> {
        axis_origins(self.height, self.patch_size, self.stride_h)
    }

    /// `(col, row)` origins, row-major.
    pub fn origins(&self) -> Vec<(usize, usize)> {
        let cols = self.column_origins();
        self.row_origins()
            .into_iter()
            .flat_map(|r| cols.iter().map(move |&c| (c, r)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyTag {
    Low,
    High,
    /// Trainer output standing in for `High`.
    Generated,
}

impl FrequencyTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FrequencyTag::Low => "low",
            FrequencyTag::High => "high",
            FrequencyTag::Generated => "gen",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub pixels: Vec<f64>,
    pub size: usize,
    pub origin: (usize, usize),
    pub source_id: String,
    pub frequency: FrequencyTag,
}

impl Patch {
    /// `{source_id}_{col:04}x{row:04}_{freq}.pgm`
    pub fn file_name(&self) -> String {
        patch_file_name(&self.source_id, self.origin, self.frequency)
    }

    /// Writes the patch as an 8-bit PGM named by [`Patch::file_name`].
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_pgm(&dir.join(self.file_name()), self.size, self.size, &to_u8(&self.pixels))
    }
}

pub fn patch_file_name(source_id: &str, origin: (usize, usize), frequency: FrequencyTag) -> String {
    format!(
        "{}_{:04}x{:04}_{}.pgm",
        source_id,
        origin.0,
        origin.1,
        frequency.as_str()
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub source_id: String,
    pub grid: PatchGrid,
    pub low: Vec<Patch>,
    pub high: Vec<Patch>,
}

pub fn extract_patches(
    image: &BModeImage,
    grid: &PatchGrid,
    source_id: &str,
    frequency: FrequencyTag,
) -> Result<Vec<Patch>> {
    grid.validate()?;
    if image.dims() != (grid.width, grid.height) {
        return Err(Error::DimensionMismatch {
            expected: (grid.width, grid.height),
            actual: image.dims(),
        });
    }
    let size = grid.patch_size;
    Ok(grid
        .origins()
        .into_iter()
        .map(|(c, r)| {
            let mut pixels = Vec::with_capacity(size * size);
            for row in r..r + size {
                let start = row * image.width + c;
                pixels.extend_from_slice(&image.pixels[start..start + size]);
            }
            Patch {
                pixels,
                size,
                origin: (c, r),
                source_id: source_id.to_string(),
                frequency,
            }
        })
        .collect())
}

/// Low and high patches at matching origins, row-major by origin.
pub fn patchify(pair: &ImagePair, grid: &PatchGrid, source_id: &str) -> Result<PatchSet> {
    Ok(PatchSet {
        source_id: source_id.to_string(),
        grid: *grid,
        low: extract_patches(&pair.low, grid, source_id, FrequencyTag::Low)?,
        high: extract_patches(&pair.high, grid, source_id, FrequencyTag::High)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blend {
    /// Unweighted mean of overlapping patches.
    #[default]
    Mean,
    /// Weights fall off linearly towards each patch edge.
    Feather,
}

fn feather_weight(i: usize, size: usize) -> f64 {
    (i + 1).min(size - i) as f64
}

/// Reassembles one image from a complete set of patches. With
/// [`Blend::Mean`], pixels where all overlapping patches agree are
/// reproduced bit-exactly.
pub fn reconstruct(patches: &[Patch], grid: &PatchGrid, blend: Blend) -> Result<BModeImage> {
    grid.validate()?;
    let size = grid.patch_size;
    let by_origin: BTreeMap<(usize, usize), &Patch> = patches.iter().map(|p| (p.origin, p)).collect();
    let n = grid.width * grid.height;
    let mut first = vec![f64::NAN; n];
    let mut deviation = vec![0.0; n];
    let mut weight = vec![0.0; n];
    let mut weighted = vec![0.0; n];
    for origin in grid.origins() {
        let patch = by_origin.get(&origin).ok_or(Error::IncompletePatchSet { origin })?;
        if patch.size != size || patch.pixels.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: (size, size),
                actual: (patch.size, patch.pixels.len() / patch.size.max(1)),
            });
        }
        let (c0, r0) = origin;
        for i in 0..size {
            for j in 0..size {
                let v = patch.pixels[i * size + j];
                let idx = (r0 + i) * grid.width + c0 + j;
                match blend {
                    Blend::Mean => {
                        if first[idx].is_nan() {
                            first[idx] = v;
                        } else {
                            deviation[idx] += v - first[idx];
                        }
                        weight[idx] += 1.0;
                    }
                    Blend::Feather => {
                        let w = feather_weight(i, size) * feather_weight(j, size);
                        weighted[idx] += w * v;
                        weight[idx] += w;
                    }
                }
            }
        }
    }
    let pixels = match blend {
        Blend::Mean => (0..n).map(|i| first[i] + deviation[i] / weight[i]).collect(),
        Blend::Feather => (0..n).map(|i| weighted[i] / weight[i]).collect(),
    };
    let tag = patches.first().map(|p| p.frequency.as_str()).unwrap_or("");
    Ok(BModeImage {
        width: grid.width,
        height: grid.height,
        pixels,
        meta: ImageMeta {
            transducer_id: tag.to_string(),
            dynamic_range_db: crate::imaging::DEFAULT_DYNAMIC_RANGE_DB,
            ceiling: crate::imaging::DEFAULT_CEILING,
            depth_m: 0.02,
            window_start_m: 2e-3,
            roi_span_deg: 106.0,
            seed: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: Option<u64>,
    /// Fold of each item, by item index.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn from_ids(k: usize, fold_of: Vec<usize>) -> Result<Self> {
        if k == 0 || fold_of.iter().any(|&f| f >= k) {
            return Err(Error::invalid("folds", "fold id out of range"));
        }
        Ok(FoldAssignment { k, seed: None, fold_of })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    /// Items outside and inside `fold`.
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != fold)
    }
}

/// Fold sizes: every fold gets `floor(n / k)` and the first fold also takes
/// the remainder, so 442 items split as (90, 88, 88, 88, 88).
pub fn fold_sizes(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || n < k {
        return Err(Error::TooFewItems { n, k });
    }
    let mut sizes = vec![n / k; k];
    sizes[0] += n % k;
    Ok(sizes)
}

/// Random permutation of `0..n` cut into [`fold_sizes`] blocks.
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    let sizes = fold_sizes(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    let mut cursor = 0;
    for (fold, &size) in sizes.iter().enumerate() {
        for &item in &order[cursor..cursor + size] {
            fold_of[item] = fold;
        }
        cursor += size;
    }
    Ok(FoldAssignment {
        k,
        seed: Some(seed),
        fold_of,
    })
}

/// Stratified variant: items of each group are shuffled and dealt round
/// robin, continuing across groups, so every fold sees every group.
pub fn split_folds_stratified<G: Ord + Clone>(groups: &[G], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 || groups.len() < k {
        return Err(Error::TooFewItems { n: groups.len(), k });
    }
    let mut by_group: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; groups.len()];
    let mut next = 0;
    for members in by_group.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        k,
        seed: Some(seed),
        fold_of,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPatch {
    pub origin: (usize, usize),
    pub low: String,
    pub high: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub source_id: String,
    pub fold: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub patches: Vec<ManifestPatch>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub grid: PatchGrid,
    pub k: usize,
    pub fold_seed: Option<u64>,
    pub root_seed: Option<u64>,
    pub pairs: Vec<ManifestPair>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(Error::Format {
                what: "manifest",
                reason: format!("unsupported format {} v{}", m.format, m.version),
            });
        }
        if m.pairs.iter().any(|p| p.fold >= m.k) {
            return Err(Error::Format {
                what: "manifest",
                reason: "fold id out of range".into(),
            });
        }
        Ok(m)
    }
}

/// One image pair entering the export, with its provenance seed.
#[derive(Debug, Clone)]
pub struct ExportItem {
    pub source_id: String,
    pub pair: ImagePair,
    pub seed: Option<u64>,
}

fn to_u8(pixels: &[f64]) -> Vec<u8> {
    pixels.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
}

/// Writes every low/high patch as 8-bit PGM plus `manifest.json`. The
/// manifest is written last, through a temporary file and a rename.
pub fn export_for_training(
    items: &[ExportItem],
    folds: &FoldAssignment,
    grid: &PatchGrid,
    out_dir: &Path,
    root_seed: Option<u64>,
) -> Result<Manifest> {
    if folds.fold_of.len() != items.len() {
        return Err(Error::invalid(
            "folds",
            format!("{} fold ids for {} pairs", folds.fold_of.len(), items.len()),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut pairs = Vec::with_capacity(items.len());
    for (item, &fold) in items.iter().zip(&folds.fold_of) {
        let pair = ImagePair::new(item.pair.low.clone(), item.pair.high.clone())
            .map_err(|_| Error::MisalignedPair(item.source_id.clone()))?;
        let set = patchify(&pair, grid, &item.source_id)?;
        let mut entries = Vec::with_capacity(set.low.len());
        for (lo, hi) in set.low.iter().zip(&set.high) {
            lo.write(out_dir)?;
            hi.write(out_dir)?;
            entries.push(ManifestPatch {
                origin: lo.origin,
                low: lo.file_name(),
                high: hi.file_name(),
            });
        }
        pairs.push(ManifestPair {
            source_id: item.source_id.clone(),
            fold,
            seed: item.seed,
            patches: entries,
        });
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        version: MANIFEST_VERSION,
        grid: *grid,
        k: folds.k,
        fold_seed: folds.seed,
        root_seed,
        pairs,
    };
    let tmp = out_dir.join(format!("{MANIFEST_FILE}.tmp"));
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    let dest = out_dir.join(MANIFEST_FILE);
    fs::rename(&tmp, &dest).map_err(|e| Error::io(&dest, e))?;
    Ok(manifest)
}

/// Patches of one exported pair, loaded back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedPair {
    pub source_id: String,
    pub fold: usize,
    pub low: Vec<Patch>,
    pub high: Vec<Patch>,
}

pub fn load_patch(
    path: &Path,
    source_id: &str,
    origin: (usize, usize),
    frequency: FrequencyTag,
    size: usize,
) -> Result<Patch> {
    let (w, h, data) = read_pgm(path)?;
    if (w, h) != (size, size) {
        return Err(Error::DimensionMismatch {
            expected: (size, size),
            actual: (w, h),
        });
    }
    Ok(Patch {
        pixels: data.into_iter().map(f64::from).collect(),
        size,
        origin,
        source_id: source_id.to_string(),
        frequency,
    })
}

/// Reads a manifest and every patch it lists.
pub fn import_training_set(dir: &Path) -> Result<(Manifest, Vec<ImportedPair>)> {
    let manifest = Manifest::read(dir)?;
    let size = manifest.grid.patch_size;
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for p in &manifest.pairs {
        let mut low = Vec::new();
        let mut high = Vec::new();
        for e in &p.patches {
            low.push(load_patch(
                &dir.join(&e.low),
                &p.source_id,
                e.origin,
                FrequencyTag::Low,
                size,
            )?);
            high.push(load_patch(
                &dir.join(&e.high),
                &p.source_id,
                e.origin,
                FrequencyTag::High,
                size,
            )?);
        }
        pairs.push(ImportedPair {
            source_id: p.source_id.clone(),
            fold: p.fold,
            low,
            high,
        });
    }
    Ok((manifest, pairs))
}

/// Loads the patches of `source_id` with tag `frequency` from `dir`, one per
/// grid origin, named by [`patch_file_name`].
pub fn load_patch_set(dir: &Path, source_id: &str, frequency: FrequencyTag, grid: &PatchGrid) -> Result<Vec<Patch>> {
    grid.origins()
        .into_iter()
        .map(|origin| {
            let path: PathBuf = dir.join(patch_file_name(source_id, origin, frequency));
            if !path.exists() {
                return Err(Error::IncompletePatchSet { origin });
            }
            load_patch(&path, source_id, origin, frequency, grid.patch_size)
        })
        .collect()
}
