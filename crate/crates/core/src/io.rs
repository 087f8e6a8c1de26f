//! Map files on disk: decoding, depth normalisation and stem pairing.
//!
//! Only lossless 8-bit formats are accepted: PNG and binary or ASCII PGM/PPM.
//! Colour inputs are reduced to luma.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::kernels::{DepthMap, KernelError};
use crate::metrics::{quantize, EvalPair, GroundTruthMask, MetricError, SaliencyMap};
use crate::tensor::{Tensor, TensorError};

/// File extensions picked up when listing a directory.
pub const MAP_EXTENSIONS: [&str; 2] = ["png", "pgm"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: cannot decode: {detail}")]
    Decode { path: PathBuf, detail: String },
    #[error("{path}: unsupported format; expected 8-bit PNG or PGM")]
    UnsupportedFormat { path: PathBuf },
    #[error("{path}: unsupported bit depth ({detail}); expected 8 bits per sample")]
    UnsupportedDepth { path: PathBuf, detail: String },
    #[error("{path}: cannot encode: {detail}")]
    Encode { path: PathBuf, detail: String },
    #[error("{path}: expected a {expected:?} map, got {actual:?}")]
    Kind {
        path: PathBuf,
        expected: MapKind,
        actual: MapKind,
    },
    #[error("stem `{stem}` appears more than once in {dir}")]
    DuplicateStem { dir: PathBuf, stem: String },
    #[error("no stems shared between {pred} and {gt}")]
    EmptyIntersection { pred: PathBuf, gt: PathBuf },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Prediction,
    GroundTruth,
    Depth,
}

/// A decoded single-channel map, values `v / 255` in a `(1, H, W)` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MapRecord {
    pub stem: String,
    pub kind: MapKind,
    pub path: PathBuf,
    pub image: Tensor,
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Decodes an 8-bit grey or colour raster into a `[0, 1]` map.
pub fn load_gray_map(path: impl AsRef<Path>, kind: MapKind) -> Result<MapRecord> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|source| IoError::Read { path: path.into(), source })?
        .with_guessed_format()
        .map_err(|source| IoError::Read { path: path.into(), source })?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        _ => return Err(IoError::UnsupportedFormat { path: path.into() }),
    }
    let img = reader.decode().map_err(|e| IoError::Decode {
        path: path.into(),
        detail: e.to_string(),
    })?;
    let luma = match img {
        DynamicImage::ImageLuma8(l) => l,
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => img.to_luma8(),
        other => {
            return Err(IoError::UnsupportedDepth {
                path: path.into(),
                detail: format!("{:?}", other.color()),
            })
        }
    };
    let (w, h) = luma.dimensions();
    let data = luma.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(MapRecord {
        stem: stem_of(path),
        kind,
        path: path.into(),
        image: Tensor::new([1, h as usize, w as usize], data)?,
    })
}

/// Writes a `(1, H, W)` map in `[0, 1]` as an 8-bit PNG, or as a binary PGM
/// when the extension is `pgm`.
pub fn save_gray_map(path: impl AsRef<Path>, map: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let (_, h, w) = map.dims3("save_gray_map")?;
    let bytes: Vec<u8> = map.data().iter().map(|&v| quantize(v.clamp(0.0, 1.0))).collect();
    let file = fs::File::create(path).map_err(|source| IoError::Read { path: path.into(), source })?;
    let out = BufWriter::new(file);
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let res = if is_pgm {
        PnmEncoder::new(out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&bytes, w as u32, h as u32, ExtendedColorType::L8)
    } else {
        PngEncoder::new(out).write_image(&bytes, w as u32, h as u32, ExtendedColorType::L8)
    };
    res.map_err(|e| IoError::Encode {
        path: path.into(),
        detail: e.to_string(),
    })
}

/// Min-max normalises a depth map to `[0, 1]`; a constant map becomes zeros.
pub fn normalize_depth(d: &MapRecord) -> Result<DepthMap> {
    if d.kind != MapKind::Depth {
        return Err(IoError::Kind {
            path: d.path.clone(),
            expected: MapKind::Depth,
            actual: d.kind,
        });
    }
    let (lo, hi) = (d.image.min(), d.image.max());
    let t = if hi > lo {
        d.image.map(|v| (v - lo) / (hi - lo))
    } else {
        d.image.map(|_| 0.0)
    };
    Ok(DepthMap::new(t)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairEntry {
    pub stem: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub depth: Option<PathBuf>,
}

impl PairEntry {
    /// Decodes the prediction and binarises the ground truth.
    pub fn load(&self) -> Result<EvalPair> {
        let pred = load_gray_map(&self.pred, MapKind::Prediction)?;
        let gt = load_gray_map(&self.gt, MapKind::GroundTruth)?;
        Ok(EvalPair {
            stem: self.stem.clone(),
            pred: SaliencyMap::new(pred.image)?,
            gt: GroundTruthMask::from_gray(&gt.image)?,
        })
    }

    pub fn load_depth(&self) -> Result<Option<DepthMap>> {
        self.depth
            .as_ref()
            .map(|p| normalize_depth(&load_gray_map(p, MapKind::Depth)?))
            .transpose()
    }
}

/// Stems present on one side only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Unmatched {
    pub pred_only: Vec<String>,
    pub gt_only: Vec<String>,
    /// Paired stems with no depth map, when a depth directory was given.
    pub depth_missing: Vec<String>,
    pub depth_only: Vec<String>,
}

impl Unmatched {
    pub fn is_empty(&self) -> bool {
        self.pred_only.is_empty() && self.gt_only.is_empty() && self.depth_missing.is_empty() && self.depth_only.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairSet {
    /// Sorted by stem.
    pub entries: Vec<PairEntry>,
    pub unmatched: Unmatched,
    /// Files skipped because their extension is not a map format.
    pub ignored: Vec<PathBuf>,
}

/// Map files in `dir` keyed by stem, plus files with other extensions.
pub fn list_maps(dir: impl AsRef<Path>) -> Result<(BTreeMap<String, PathBuf>, Vec<PathBuf>)> {
    let dir = dir.as_ref();
    let read_err = |source| IoError::Read { path: dir.into(), source };
    let mut maps = BTreeMap::new();
    let mut ignored = Vec::new();
    for entry in fs::read_dir(dir).map_err(read_err)? {
        let path = entry.map_err(read_err)?.path();
        if !path.is_file() {
            continue;
        }
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if !ext.is_some_and(|e| MAP_EXTENSIONS.contains(&e.as_str())) {
            ignored.push(path);
            continue;
        }
        let stem = stem_of(&path);
        if maps.insert(stem.clone(), path).is_some() {
            return Err(IoError::DuplicateStem { dir: dir.into(), stem });
        }
    }
    ignored.sort();
    Ok((maps, ignored))
}

/// Matches prediction, ground-truth and optional depth files by stem.
pub fn pair_files(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>, depth_dir: Option<&Path>) -> Result<PairSet> {
    let (pred, mut ignored) = list_maps(&pred_dir)?;
    let (gt, ig) = list_maps(&gt_dir)?;
    ignored.extend(ig);
    let depth = match depth_dir {
        Some(d) => {
            let (m, ig) = list_maps(d)?;
            ignored.extend(ig);
            Some(m)
        }
        None => None,
    };
    let set = pair_maps(&pred, &gt, depth.as_ref(), ignored);
    if set.entries.is_empty() {
        return Err(IoError::EmptyIntersection {
            pred: pred_dir.as_ref().into(),
            gt: gt_dir.as_ref().into(),
        });
    }
    Ok(set)
}

/// Pairing over already-listed maps.
pub fn pair_maps(
    pred: &BTreeMap<String, PathBuf>,
    gt: &BTreeMap<String, PathBuf>,
    depth: Option<&BTreeMap<String, PathBuf>>,
    mut ignored: Vec<PathBuf>,
) -> PairSet {
    let p: BTreeSet<&String> = pred.keys().collect();
    let g: BTreeSet<&String> = gt.keys().collect();
    let mut unmatched = Unmatched {
        pred_only: p.difference(&g).map(|s| s.to_string()).collect(),
        gt_only: g.difference(&p).map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let entries: Vec<PairEntry> = p
        .intersection(&g)
        .map(|&stem| {
            let d = depth.and_then(|d| d.get(stem).cloned());
            if depth.is_some() && d.is_none() {
                unmatched.depth_missing.push(stem.clone());
            }
            PairEntry {
                stem: stem.clone(),
                pred: pred[stem].clone(),
                gt: gt[stem].clone(),
                depth: d,
            }
        })
        .collect();
    if let Some(d) = depth {
        unmatched.depth_only = d.keys().filter(|s| !(p.contains(s) && g.contains(s))).cloned().collect();
    }
    ignored.sort();
    PairSet { entries, unmatched, ignored }
}

/// Writes `count` synthetic triples under `root/{pred,gt,depth}` as PNG and
/// returns their stems. Each mask is a random ellipse; the prediction is a
/// noisy, softened copy; depth is a ramp plus the object.
pub fn write_synthetic_dataset(root: impl AsRef<Path>, count: usize, h: usize, w: usize, seed: u64) -> Result<Vec<String>> {
    let root = root.as_ref();
    for sub in ["pred", "gt", "depth"] {
        let dir = root.join(sub);
        fs::create_dir_all(&dir).map_err(|source| IoError::Read { path: dir, source })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stems = Vec::with_capacity(count);
    for i in 0..count {
        let stem = format!("img_{i:04}");
        let (cy, cx) = (rng.random_range(0.3..0.7) * h as f64, rng.random_range(0.3..0.7) * w as f64);
        let (ry, rx) = (rng.random_range(0.1..0.3) * h as f64, rng.random_range(0.1..0.3) * w as f64);
        let quality: f64 = rng.random_range(0.4..0.9);
        let mut gt = Vec::with_capacity(h * w);
        let mut pred = Vec::with_capacity(h * w);
        let mut depth = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let r = ((y as f64 - cy) / ry).powi(2) + ((x as f64 - cx) / rx).powi(2);
                let inside = r <= 1.0;
                gt.push(if inside { 1.0 } else { 0.0 });
                let soft = 1.0 / (1.0 + (4.0 * (r - 1.0)).exp());
                let noise: f64 = rng.random();
                pred.push((quality * soft + (1.0 - quality) * noise).clamp(0.0, 1.0));
                depth.push(0.5 * y as f64 / h.max(1) as f64 + if inside { 0.5 } else { 0.0 });
            }
        }
        for (sub, data) in [("gt", gt), ("pred", pred), ("depth", depth)] {
            let t = Tensor::new([1, h, w], data)?;
            save_gray_map(root.join(sub).join(format!("{stem}.png")), &t)?;
        }
        stems.push(stem);
    }
    Ok(stems)
}
