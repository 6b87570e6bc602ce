//! Evaluation protocol over image sequences with ground-truth homographies
//! (`img1..img6` plus `H1to2p..H1to6p` per directory): M and CM per
//! matching mode, and the mean cost of one pairwise decision.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use log::warn;
use thiserror::Error;

use crate::features::{extract, make_pattern, BinaryDescriptor, Keypoint, DEFAULT_PATTERN_SEED};
use crate::fuzzy::FuzzyMatcherConfig;
use crate::geometry::{
    count_correct, load_homography, ransac_homography, GeometryError, Homography, RansacParams,
    DEFAULT_EPS, DEFAULT_RANSAC_ITERS,
};
use crate::imageio::{load_image, GrayImage, ImageError};
use crate::matcher::{match_sets, MatchCandidate, Rule};

pub const DEFAULT_FAST_THRESHOLD: u8 = 20;
pub const DEFAULT_MAX_KEYPOINTS: usize = 2000;
const IMAGE_EXTENSIONS: [&str; 3] = ["ppm", "pgm", "pnm"];
const MAX_TARGET_INDEX: usize = 6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("failed to load image {path}: {source}")]
    Image { path: PathBuf, source: ImageError },
    #[error("failed to load homography {path}: {source}")]
    Homography {
        path: PathBuf,
        source: GeometryError,
    },
    #[error("no image pairs found under {0}")]
    NoPairs(PathBuf),
    #[error("at least one matching mode is required")]
    NoModes,
    #[error("invalid mode {0:?} (expected tN or fuzzy)")]
    InvalidMode(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Matching rule selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Constant threshold `distance < t`.
    Threshold(u32),
    Fuzzy,
}

impl Mode {
    pub const TABLE: [Mode; 4] = [
        Mode::Threshold(5),
        Mode::Threshold(10),
        Mode::Threshold(15),
        Mode::Fuzzy,
    ];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Threshold(t) => write!(f, "t{t}"),
            Mode::Fuzzy => write!(f, "fuzzy"),
        }
    }
}

impl FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "fuzzy" {
            return Ok(Mode::Fuzzy);
        }
        s.strip_prefix('t')
            .filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|n| n.parse().ok())
            .map(Mode::Threshold)
            .ok_or_else(|| HarnessError::InvalidMode(s.to_owned()))
    }
}

/// Parses a comma-separated mode list such as `t5,t10,t15,fuzzy`.
pub fn parse_modes(s: &str) -> Result<Vec<Mode>, HarnessError> {
    let modes = s
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>, _>>()?;
    if modes.is_empty() {
        return Err(HarnessError::NoModes);
    }
    Ok(modes)
}

#[derive(Debug, Clone)]
pub struct DatasetPair {
    pub name: String,
    pub ref_index: usize,
    pub target_index: usize,
    pub ref_image: Arc<GrayImage>,
    pub target_image: Arc<GrayImage>,
    pub h_gt: Homography,
}

impl DatasetPair {
    pub fn label(&self) -> String {
        format!("{}-{}", self.ref_index, self.target_index)
    }
}

fn find_image(dir: &Path, index: usize) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("img{index}.{ext}")))
        .find(|p| p.is_file())
}

fn read_image(path: &Path) -> Result<GrayImage, HarnessError> {
    load_image(path).map_err(|source| HarnessError::Image {
        path: path.to_owned(),
        source,
    })
}

/// Loads the pairs `1-2 .. 1-6` of one sequence directory.
///
/// `img1` is required. Targets are taken in order and the sequence ends at
/// the first index where neither `imgN` nor `H1toNp` exists; having only one
/// of the two is an error naming the missing file.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<DatasetPair>, HarnessError> {
    let dir = dir.as_ref();
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let ref_path =
        find_image(dir, 1).ok_or_else(|| HarnessError::MissingFile(dir.join("img1.ppm")))?;
    let ref_image = Arc::new(read_image(&ref_path)?);

    let mut pairs = Vec::new();
    for n in 2..=MAX_TARGET_INDEX {
        let img_path = find_image(dir, n);
        let h_path = dir.join(format!("H1to{n}p"));
        let h_exists = h_path.is_file();
        let img_path = match (img_path, h_exists) {
            (None, false) => break,
            (None, true) => return Err(HarnessError::MissingFile(dir.join(format!("img{n}.ppm")))),
            (Some(_), false) => return Err(HarnessError::MissingFile(h_path)),
            (Some(p), true) => p,
        };
        let h_gt = load_homography(&h_path).map_err(|source| HarnessError::Homography {
            path: h_path.clone(),
            source,
        })?;
        pairs.push(DatasetPair {
            name: name.clone(),
            ref_index: 1,
            target_index: n,
            ref_image: Arc::clone(&ref_image),
            target_image: Arc::new(read_image(&img_path)?),
            h_gt,
        });
    }
    if pairs.is_empty() {
        return Err(HarnessError::NoPairs(dir.to_owned()));
    }
    Ok(pairs)
}

/// `dir` itself if it holds a sequence, otherwise its immediate
/// subdirectories that do, sorted by name.
pub fn discover_datasets(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = dir.as_ref();
    if find_image(dir, 1).is_some() {
        return Ok(vec![dir.to_owned()]);
    }
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() && find_image(&p, 1).is_some() {
            found.push(p);
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(HarnessError::NoPairs(dir.to_owned()));
    }
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractionParams {
    pub fast_threshold: u8,
    pub max_keypoints: usize,
    pub pattern_seed: u64,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            fast_threshold: DEFAULT_FAST_THRESHOLD,
            max_keypoints: DEFAULT_MAX_KEYPOINTS,
            pattern_seed: DEFAULT_PATTERN_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub extraction: ExtractionParams,
    pub modes: Vec<Mode>,
    pub fuzzy: FuzzyMatcherConfig,
    /// Ground-truth tolerance in pixels.
    pub eps: f64,
    /// RANSAC estimate reported alongside CM; `None` skips it.
    pub ransac: Option<RansacParams>,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            extraction: ExtractionParams::default(),
            modes: Mode::TABLE.to_vec(),
            fuzzy: FuzzyMatcherConfig::default(),
            eps: DEFAULT_EPS,
            ransac: Some(RansacParams {
                iters: DEFAULT_RANSAC_ITERS,
                inlier_eps: DEFAULT_EPS,
                seed: DEFAULT_PATTERN_SEED,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub dataset: String,
    pub pair: String,
    pub mode: Mode,
    pub m: usize,
    pub cm: usize,
    /// Decision-stage wall time over `|A|·|B|` comparisons; 0 if none ran.
    pub ns_per_decision: f64,
    /// Consensus size of the RANSAC estimate, when one was found.
    pub ransac_inliers: Option<usize>,
}

impl EvaluationRecord {
    fn sort_key(&self) -> (&str, usize, Mode) {
        let target = self
            .pair
            .rsplit('-')
            .next()
            .and_then(|n| n.parse().ok())
            .unwrap_or(usize::MAX);
        (&self.dataset, target, self.mode)
    }
}

/// Sorts records by dataset, pair, then mode (thresholds ascending, fuzzy
/// last).
pub fn sort_records(records: &mut [EvaluationRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

struct Extracted {
    keypoints: Vec<Keypoint>,
    descriptors: Vec<BinaryDescriptor>,
}

/// Runs every requested mode on one pair. Features are extracted once;
/// matching is timed single-threaded.
pub fn run_pair(
    pair: &DatasetPair,
    params: &EvalParams,
) -> Result<Vec<EvaluationRecord>, crate::Error> {
    if params.modes.is_empty() {
        return Err(HarnessError::NoModes.into());
    }
    let pattern = make_pattern(params.extraction.pattern_seed)?;
    let ex = |img: &GrayImage| -> Result<Extracted, crate::Error> {
        let (keypoints, descriptors) = extract(
            img,
            params.extraction.fast_threshold,
            params.extraction.max_keypoints,
            &pattern,
        )?;
        Ok(Extracted {
            keypoints,
            descriptors,
        })
    };
    let a = ex(&pair.ref_image)?;
    let b = ex(&pair.target_image)?;

    let mut modes = params.modes.clone();
    modes.sort();
    modes.dedup();

    if a.keypoints.is_empty() || b.keypoints.is_empty() {
        warn!(
            "{} {}: no keypoints ({} in reference, {} in target)",
            pair.name,
            pair.label(),
            a.keypoints.len(),
            b.keypoints.len()
        );
        return Ok(modes
            .into_iter()
            .map(|mode| EvaluationRecord {
                dataset: pair.name.clone(),
                pair: pair.label(),
                mode,
                m: 0,
                cm: 0,
                ns_per_decision: 0.0,
                ransac_inliers: None,
            })
            .collect());
    }

    let comparisons = (a.descriptors.len() * b.descriptors.len()) as f64;
    let mut records = Vec::with_capacity(modes.len());
    for mode in modes {
        let rule = match mode {
            Mode::Threshold(t) => Rule::Constant(t),
            Mode::Fuzzy => Rule::Fuzzy(&params.fuzzy),
        };
        let start = Instant::now();
        let matches: Vec<MatchCandidate> =
            match_sets(&a.descriptors, &b.descriptors, rule, false)?;
        let elapsed = start.elapsed().as_nanos().max(1) as f64;

        let cm = count_correct(&matches, &a.keypoints, &b.keypoints, &pair.h_gt, params.eps);
        let ransac_inliers = params.ransac.as_ref().and_then(|rp| {
            ransac_homography(&matches, &a.keypoints, &b.keypoints, rp)
                .ok()
                .map(|r| r.inlier_count())
        });
        records.push(EvaluationRecord {
            dataset: pair.name.clone(),
            pair: pair.label(),
            mode,
            m: matches.len(),
            cm,
            ns_per_decision: elapsed / comparisons,
            ransac_inliers,
        });
    }
    Ok(records)
}

/// Evaluates every pair of every sequence found under `dir`.
pub fn evaluate(
    dir: impl AsRef<Path>,
    params: &EvalParams,
) -> Result<Vec<EvaluationRecord>, crate::Error> {
    let mut records = Vec::new();
    for ds in discover_datasets(dir)? {
        for pair in load_dataset(&ds)? {
            records.extend(run_pair(&pair, params)?);
        }
    }
    sort_records(&mut records);
    Ok(records)
}

pub const CSV_HEADER: [&str; 6] = ["dataset", "pair", "mode", "M", "CM", "ns_per_decision"];

pub fn write_csv<W: std::io::Write>(
    records: &[EvaluationRecord],
    out: W,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.pair.clone(),
            r.mode.to_string(),
            r.m.to_string(),
            r.cm.to_string(),
            format!("{:.3}", r.ns_per_decision),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes records in sorted order to `path`.
pub fn emit_csv(records: &[EvaluationRecord], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let file = std::fs::File::create(path)?;
    write_csv(&sorted, std::io::BufWriter::new(file))
}
