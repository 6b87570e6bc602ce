//! Keypoint detection (FAST-9), 256-bit BRIEF-style descriptors, and the
//! bitwise distance quantities used by the matchers.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::imageio::GrayImage;
use crate::rng::XorShift64;

/// Descriptor length in bits.
pub const DESCRIPTOR_BITS: usize = 256;
/// Descriptor length in bytes.
pub const DESCRIPTOR_BYTES: usize = DESCRIPTOR_BITS / 8;
/// Minimum distance from a keypoint to the image border.
pub const BORDER_MARGIN: usize = 16;
/// Largest absolute sampling offset.
pub const PATTERN_RADIUS: i32 = 13;
/// Seed of the default sampling pattern.
pub const DEFAULT_PATTERN_SEED: u64 = 88_172_645_463_325_252;

const FAST_ARC: usize = 9;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("image {width}x{height} is too small for detection (need at least {min}x{min})")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("detection threshold must be at least 1")]
    ZeroThreshold,
    #[error("pattern seed must be non-zero")]
    ZeroSeed,
    #[error("keypoint ({x}, {y}) violates the {BORDER_MARGIN}px border margin of a {width}x{height} image")]
    KeypointOutOfBounds {
        x: i32,
        y: i32,
        width: usize,
        height: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed descriptor file header")]
    MalformedHeader,
    #[error("count mismatch: {keypoints} keypoints vs {descriptors} descriptors")]
    LengthMismatch { keypoints: usize, descriptors: usize },
    #[error("descriptor file truncated: header declares {declared} records, found {found}")]
    Truncated { declared: usize, found: usize },
    #[error("descriptor file has {0} trailing bytes after the declared records")]
    TrailingData(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Keypoint {
    pub x: i32,
    pub y: i32,
    pub score: u32,
}

impl Keypoint {
    pub fn new(x: i32, y: i32, score: u32) -> Self {
        Self { x, y, score }
    }

    pub fn within_margin(&self, width: usize, height: usize) -> bool {
        let m = BORDER_MARGIN as i64;
        let (x, y) = (self.x as i64, self.y as i64);
        x >= m && y >= m && x < width as i64 - m && y < height as i64 - m
    }
}

/// 256-bit binary string. Bit `n` is test `n`; in byte form bit `i` of byte
/// `j` is test `8j + i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BinaryDescriptor([u64; 4]);

impl std::fmt::Debug for BinaryDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryDescriptor(")?;
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

impl BinaryDescriptor {
    pub const ZERO: Self = Self([0; 4]);

    pub fn from_words(words: [u64; 4]) -> Self {
        Self(words)
    }

    pub fn words(&self) -> [u64; 4] {
        self.0
    }

    pub fn from_bytes(bytes: [u8; DESCRIPTOR_BYTES]) -> Self {
        let mut words = [0u64; 4];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Self(words)
    }

    pub fn to_bytes(&self) -> [u8; DESCRIPTOR_BYTES] {
        let mut out = [0u8; DESCRIPTOR_BYTES];
        for (chunk, w) in out.chunks_exact_mut(8).zip(self.0) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    #[inline]
    pub fn bit(&self, n: usize) -> bool {
        (self.0[n / 64] >> (n % 64)) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, n: usize, value: bool) {
        let mask = 1u64 << (n % 64);
        if value {
            self.0[n / 64] |= mask;
        } else {
            self.0[n / 64] &= !mask;
        }
    }

    pub fn flip_bit(&mut self, n: usize) {
        self.0[n / 64] ^= 1u64 << (n % 64);
    }

    pub fn complement(&self) -> Self {
        Self(self.0.map(|w| !w))
    }
}

/// Per-position agreement counts between two descriptors.
///
/// `f01` counts positions where the first descriptor has 0 and the second 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitCounts {
    pub f00: u32,
    pub f01: u32,
    pub f10: u32,
    pub f11: u32,
}

pub fn bit_counts(a: &BinaryDescriptor, b: &BinaryDescriptor) -> BitCounts {
    let mut c = BitCounts {
        f00: 0,
        f01: 0,
        f10: 0,
        f11: 0,
    };
    for (x, y) in a.0.iter().zip(b.0.iter()) {
        c.f00 += (!x & !y).count_ones();
        c.f01 += (!x & y).count_ones();
        c.f10 += (x & !y).count_ones();
        c.f11 += (x & y).count_ones();
    }
    c
}

/// Number of differing bits (`f01 + f10`).
#[inline]
pub fn hamming_bits(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
    (a.0[0] ^ b.0[0]).count_ones()
        + (a.0[1] ^ b.0[1]).count_ones()
        + (a.0[2] ^ b.0[2]).count_ones()
        + (a.0[3] ^ b.0[3]).count_ones()
}

/// Fraction of agreeing positions, `(f11 + f00) / 256`.
pub fn agreement_ratio(a: &BinaryDescriptor, b: &BinaryDescriptor) -> f64 {
    let c = bit_counts(a, b);
    (c.f11 + c.f00) as f64 / DESCRIPTOR_BITS as f64
}

/// One intensity comparison `I(p + a) < I(p + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointPair {
    pub ax: i8,
    pub ay: i8,
    pub bx: i8,
    pub by: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPattern {
    pairs: Vec<PointPair>,
}

impl SamplingPattern {
    pub fn pairs(&self) -> &[PointPair] {
        &self.pairs
    }
}

impl Default for SamplingPattern {
    fn default() -> Self {
        make_pattern(DEFAULT_PATTERN_SEED).expect("default seed is non-zero")
    }
}

/// Draws the 256 test pairs from xorshift64; each coordinate is
/// `(next() mod 27) - 13`, in the order ax, ay, bx, by.
pub fn make_pattern(seed: u64) -> Result<SamplingPattern, FeatureError> {
    let mut rng = XorShift64::new(seed).ok_or(FeatureError::ZeroSeed)?;
    let span = (2 * PATTERN_RADIUS + 1) as u64;
    let mut coord = || (rng.below(span) as i32 - PATTERN_RADIUS) as i8;
    let pairs = (0..DESCRIPTOR_BITS)
        .map(|_| PointPair {
            ax: coord(),
            ay: coord(),
            bx: coord(),
            by: coord(),
        })
        .collect();
    Ok(SamplingPattern { pairs })
}

/// Evaluates the pattern around `kp` on an already smoothed image.
pub fn describe(
    img: &GrayImage,
    kp: &Keypoint,
    pattern: &SamplingPattern,
) -> Result<BinaryDescriptor, FeatureError> {
    if !kp.within_margin(img.width(), img.height()) {
        return Err(FeatureError::KeypointOutOfBounds {
            x: kp.x,
            y: kp.y,
            width: img.width(),
            height: img.height(),
        });
    }
    let px = |dx: i8, dy: i8| img.get((kp.x + dx as i32) as usize, (kp.y + dy as i32) as usize);
    let mut d = BinaryDescriptor::ZERO;
    for (i, t) in pattern.pairs.iter().enumerate() {
        d.set_bit(i, px(t.ax, t.ay) < px(t.bx, t.by));
    }
    Ok(d)
}

/// Segment-test score of one pixel: the summed absolute contrast over the
/// longest contiguous bright or dark arc, or 0 when no arc reaches 9 pixels.
fn fast_score(img: &GrayImage, x: usize, y: usize, threshold: i32) -> u32 {
    let p = img.get(x, y) as i32;
    let mut ring = [0i32; 16];
    for (v, (dx, dy)) in ring.iter_mut().zip(CIRCLE) {
        *v = img.get((x as i32 + dx) as usize, (y as i32 + dy) as usize) as i32;
    }
    let bright = |v: i32| v > p + threshold;
    let dark = |v: i32| v < p - threshold;
    arc_score(&ring, p, bright).max(arc_score(&ring, p, dark))
}

fn arc_score(ring: &[i32; 16], center: i32, pred: impl Fn(i32) -> bool) -> u32 {
    let flags: [bool; 16] = ring.map(&pred);
    if flags.iter().all(|&f| f) {
        return ring.iter().map(|v| v.abs_diff(center)).sum();
    }
    let Some(start) = flags.iter().position(|&f| !f) else {
        unreachable!()
    };
    // walk once around starting just after a failing pixel so runs never wrap
    let mut best_len = 0;
    let mut best_sum = 0u32;
    let mut len = 0;
    let mut sum = 0u32;
    for k in 1..=16 {
        let i = (start + k) % 16;
        if flags[i] {
            len += 1;
            sum += ring[i].abs_diff(center);
            if len > best_len {
                best_len = len;
                best_sum = sum;
            }
        } else {
            len = 0;
            sum = 0;
        }
    }
    if best_len >= FAST_ARC {
        best_sum
    } else {
        0
    }
}

/// FAST-9 on the 16-pixel circle with 3×3 non-maximum suppression.
///
/// Output is sorted by descending score (ties by row, then column), limited
/// to `max_keypoints`, and restricted to the border margin.
pub fn detect_fast(
    img: &GrayImage,
    threshold: u8,
    max_keypoints: usize,
) -> Result<Vec<Keypoint>, FeatureError> {
    let (w, h) = (img.width(), img.height());
    let min = 2 * BORDER_MARGIN + 1;
    if w < min || h < min {
        return Err(FeatureError::ImageTooSmall {
            width: w,
            height: h,
            min,
        });
    }
    if threshold == 0 {
        return Err(FeatureError::ZeroThreshold);
    }
    let t = threshold as i32;
    let mut scores = vec![0u32; w * h];
    scores
        .par_chunks_mut(w)
        .enumerate()
        .filter(|(y, _)| *y >= 3 && *y < h - 3)
        .for_each(|(y, row)| {
            for (x, s) in row.iter_mut().enumerate().take(w - 3).skip(3) {
                *s = fast_score(img, x, y, t);
            }
        });

    let score_at = |x: usize, y: usize| scores[y * w + x];
    let m = BORDER_MARGIN;
    let mut out = Vec::new();
    for y in m..h - m {
        for x in m..w - m {
            let s = score_at(x, y);
            if s == 0 {
                continue;
            }
            let mut is_max = true;
            'nbr: for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if (nx, ny) == (x, y) {
                        continue;
                    }
                    let ns = score_at(nx, ny);
                    // equal scores: the earlier pixel in (row, column) order wins
                    if ns > s || (ns == s && (ny, nx) < (y, x)) {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                out.push(Keypoint::new(x as i32, y as i32, s));
            }
        }
    }
    out.sort_by(|a, b| b.score.cmp(&a.score).then((a.y, a.x).cmp(&(b.y, b.x))));
    out.truncate(max_keypoints);
    Ok(out)
}

const MAGIC: &[u8; 4] = b"BD01";
const RECORD_BYTES: usize = 4 + 4 + 4 + DESCRIPTOR_BYTES;

/// Serializes keypoints and descriptors into the `BD01` binary format.
pub fn encode_descriptors(
    keypoints: &[Keypoint],
    descriptors: &[BinaryDescriptor],
) -> Result<Vec<u8>, FeatureError> {
    if keypoints.len() != descriptors.len() || u32::try_from(keypoints.len()).is_err() {
        return Err(FeatureError::LengthMismatch {
            keypoints: keypoints.len(),
            descriptors: descriptors.len(),
        });
    }
    let mut out = Vec::with_capacity(8 + keypoints.len() * RECORD_BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(keypoints.len() as u32).to_le_bytes());
    for (kp, d) in keypoints.iter().zip(descriptors) {
        out.extend_from_slice(&kp.x.to_le_bytes());
        out.extend_from_slice(&kp.y.to_le_bytes());
        out.extend_from_slice(&kp.score.to_le_bytes());
        out.extend_from_slice(&d.to_bytes());
    }
    Ok(out)
}

pub fn decode_descriptors(
    bytes: &[u8],
) -> Result<(Vec<Keypoint>, Vec<BinaryDescriptor>), FeatureError> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(FeatureError::MalformedHeader);
    }
    let declared = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    let found = body.len() / RECORD_BYTES;
    if found < declared {
        return Err(FeatureError::Truncated { declared, found });
    }
    let trailing = body.len() - declared * RECORD_BYTES;
    if trailing != 0 {
        return Err(FeatureError::TrailingData(trailing));
    }
    let u32_at = |r: &[u8], o: usize| u32::from_le_bytes(r[o..o + 4].try_into().unwrap());
    let mut kps = Vec::with_capacity(declared);
    let mut descs = Vec::with_capacity(declared);
    for r in body.chunks_exact(RECORD_BYTES) {
        kps.push(Keypoint::new(
            u32_at(r, 0) as i32,
            u32_at(r, 4) as i32,
            u32_at(r, 8),
        ));
        descs.push(BinaryDescriptor::from_bytes(r[12..].try_into().unwrap()));
    }
    Ok((kps, descs))
}

pub fn write_descriptors(
    path: impl AsRef<Path>,
    keypoints: &[Keypoint],
    descriptors: &[BinaryDescriptor],
) -> Result<(), FeatureError> {
    let bytes = encode_descriptors(keypoints, descriptors)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_descriptors(
    path: impl AsRef<Path>,
) -> Result<(Vec<Keypoint>, Vec<BinaryDescriptor>), FeatureError> {
    decode_descriptors(&std::fs::read(path)?)
}

/// Detect on the raw image, describe on its 5×5 box-smoothed version.
pub fn extract(
    img: &GrayImage,
    threshold: u8,
    max_keypoints: usize,
    pattern: &SamplingPattern,
) -> Result<(Vec<Keypoint>, Vec<BinaryDescriptor>), crate::Error> {
    let kps = detect_fast(img, threshold, max_keypoints)?;
    let smooth = crate::imageio::box_smooth(img)?;
    let descs = kps
        .iter()
        .map(|kp| describe(&smooth, kp, pattern))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((kps, descs))
}
