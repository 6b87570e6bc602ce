//! Netpbm decoding into an 8-bit grayscale raster, plus the 5×5 box filter
//! applied before descriptor extraction.
//!
//! Supported inputs are P2/P5 (gray) and P3/P6 (color, converted with an
//! integer luma). Only `maxval <= 255` is accepted.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown magic number {0:?}")]
    UnknownMagic(String),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("invalid header token {0:?}")]
    InvalidToken(String),
    #[error("truncated payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported maxval {0} (only maxval <= 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("sample value {value} exceeds maxval {maxval}")]
    SampleOutOfRange { value: u32, maxval: u32 },
    #[error("zero image dimension ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },
    #[error("image too large ({width}x{height})")]
    TooLarge { width: usize, height: usize },
    #[error("pixel buffer length {len} does not match {width}x{height}")]
    BufferSize { width: usize, height: usize, len: usize },
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    TooSmall { width: usize, height: usize, min: usize },
}

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension { width, height });
        }
        match width.checked_mul(height) {
            Some(n) if n == data.len() => Ok(Self {
                width,
                height,
                data,
            }),
            _ => Err(ImageError::BufferSize {
                width,
                height,
                len: data.len(),
            }),
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Intensity inversion `255 - v`.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 255 - v).collect(),
        }
    }
}

/// Integer luma, weights sum to 256.
#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((77 * r as u32 + 150 * g as u32 + 29 * b as u32) >> 8) as u8
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let bytes = std::fs::read(path)?;
    decode_netpbm(&bytes)
}

/// Writes a binary PGM (P5). Used for debugging dumps.
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&encode_pgm(img))?;
    w.flush()?;
    Ok(())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Gray,
    Color,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments.
    fn skip_ws(&mut self) {
        while let Some(&c) = self.buf.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.buf.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next unsigned decimal token, or `None` at end of input.
    fn number(&mut self) -> Result<Option<u32>, ImageError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .buf
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        let tok = &self.buf[start..self.pos];
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse::<u32>().ok())
            .map(Some)
            .ok_or_else(|| ImageError::InvalidToken(String::from_utf8_lossy(tok).into_owned()))
    }

    fn header_number(&mut self) -> Result<u32, ImageError> {
        self.number()?.ok_or(ImageError::TruncatedHeader)
    }
}

/// Decodes a P2/P3/P5/P6 byte buffer.
pub fn decode_netpbm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::UnknownMagic(
            String::from_utf8_lossy(bytes).into_owned(),
        ));
    }
    let (kind, binary) = match &bytes[..2] {
        b"P2" => (Kind::Gray, false),
        b"P5" => (Kind::Gray, true),
        b"P3" => (Kind::Color, false),
        b"P6" => (Kind::Color, true),
        m => return Err(ImageError::UnknownMagic(String::from_utf8_lossy(m).into_owned())),
    };
    let mut cur = Cursor { buf: bytes, pos: 2 };
    let width = cur.header_number()? as usize;
    let height = cur.header_number()? as usize;
    let maxval = cur.header_number()?;
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroDimension { width, height });
    }
    if maxval == 0 || maxval > 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    let channels = if kind == Kind::Color { 3 } else { 1 };
    let pixels = width
        .checked_mul(height)
        .filter(|n| n.checked_mul(channels).is_some())
        .ok_or(ImageError::TooLarge { width, height })?;
    let samples = pixels * channels;

    let raw: Vec<u8> = if binary {
        // exactly one whitespace byte separates maxval from the payload
        match bytes.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            _ => {
                return Err(ImageError::TruncatedPayload {
                    expected: samples,
                    found: 0,
                })
            }
        }
        let payload = &bytes[cur.pos..];
        if payload.len() < samples {
            return Err(ImageError::TruncatedPayload {
                expected: samples,
                found: payload.len(),
            });
        }
        payload[..samples].to_vec()
    } else {
        let mut out = Vec::with_capacity(samples.min(bytes.len()));
        while out.len() < samples {
            match cur.number()? {
                Some(v) => {
                    if v > maxval {
                        return Err(ImageError::SampleOutOfRange { value: v, maxval });
                    }
                    out.push(v as u8);
                }
                None => {
                    return Err(ImageError::TruncatedPayload {
                        expected: samples,
                        found: out.len(),
                    })
                }
            }
        }
        out
    };

    if binary {
        if let Some(&v) = raw.iter().find(|&&v| v as u32 > maxval) {
            return Err(ImageError::SampleOutOfRange {
                value: v as u32,
                maxval,
            });
        }
    }

    let data = match kind {
        Kind::Gray => raw,
        Kind::Color => raw.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
    };
    GrayImage::new(width, height, data)
}

/// Side of the smoothing window.
pub const SMOOTH_WINDOW: usize = 5;

/// 5×5 box mean with clamp-to-edge borders, truncating division by 25.
///
/// Computed from an integral image over the edge-padded raster.
pub fn box_smooth(img: &GrayImage) -> Result<GrayImage, ImageError> {
    const R: usize = SMOOTH_WINDOW / 2;
    let (w, h) = (img.width, img.height);
    if w < SMOOTH_WINDOW || h < SMOOTH_WINDOW {
        return Err(ImageError::TooSmall {
            width: w,
            height: h,
            min: SMOOTH_WINDOW,
        });
    }
    let pw = w + 2 * R;
    let ph = h + 2 * R;
    // integral[(y)*(pw+1) + x] = sum of padded[0..y, 0..x]
    let stride = pw + 1;
    let mut integral = vec![0u64; stride * (ph + 1)];
    for py in 0..ph {
        let sy = py.saturating_sub(R).min(h - 1);
        let mut row_sum = 0u64;
        for px in 0..pw {
            let sx = px.saturating_sub(R).min(w - 1);
            row_sum += img.get(sx, sy) as u64;
            integral[(py + 1) * stride + px + 1] = integral[py * stride + px + 1] + row_sum;
        }
    }
    let area = (SMOOTH_WINDOW * SMOOTH_WINDOW) as u64;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            // padded window [x, x+5) x [y, y+5)
            let (x0, y0, x1, y1) = (x, y, x + SMOOTH_WINDOW, y + SMOOTH_WINDOW);
            let s = integral[y1 * stride + x1] + integral[y0 * stride + x0]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0];
            data.push((s / area) as u8);
        }
    }
    GrayImage::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_smooth(img: &GrayImage) -> Vec<u8> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = vec![];
        for y in 0..h {
            for x in 0..w {
                let mut s = 0u32;
                for dy in -2..=2i64 {
                    for dx in -2..=2i64 {
                        let sx = (x + dx).clamp(0, w - 1) as usize;
                        let sy = (y + dy).clamp(0, h - 1) as usize;
                        s += img.get(sx, sy) as u32;
                    }
                }
                out.push((s / 25) as u8);
            }
        }
        out
    }

    #[test]
    fn ascii_gray() {
        let img = decode_netpbm(b"P2\n2 2\n255\n0 10\n20 30\n").unwrap();
        assert_eq!(img, GrayImage::new(2, 2, vec![0, 10, 20, 30]).unwrap());
    }

    #[test]
    fn comments_in_header() {
        let img = decode_netpbm(b"P2 # made by hand\n# another\n2 # w\n1\n255\n7 8").unwrap();
        assert_eq!(img.data(), &[7, 8]);
    }

    #[test]
    fn binary_color_luma() {
        let mut f = b"P6\n3 1\n255\n".to_vec();
        f.extend_from_slice(&[255, 255, 255, 255, 0, 0, 10, 200, 30]);
        let img = decode_netpbm(&f).unwrap();
        assert_eq!(img.data(), &[255, 76, 123]);
    }

    #[test]
    fn ascii_color() {
        let img = decode_netpbm(b"P3 1 1 255 255 0 0").unwrap();
        assert_eq!(img.data(), &[76]);
    }

    #[test]
    fn binary_gray_bytes_verbatim() {
        let mut f = b"P5 2 2 255\n".to_vec();
        f.extend_from_slice(&[b'#', b' ', 0, 255]);
        let img = decode_netpbm(&f).unwrap();
        assert_eq!(img.data(), &[b'#', b' ', 0, 255]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            decode_netpbm(b"P7\n1 1\n255\n0"),
            Err(ImageError::UnknownMagic(_))
        ));
        assert!(matches!(
            decode_netpbm(b"P2\n2 2\n"),
            Err(ImageError::TruncatedHeader)
        ));
        assert!(matches!(
            decode_netpbm(b"P2\n2 2\n255\n1 2 3"),
            Err(ImageError::TruncatedPayload { expected: 4, found: 3 })
        ));
        assert!(matches!(
            decode_netpbm(b"P5\n2 2\n255\n\x01\x02"),
            Err(ImageError::TruncatedPayload { .. })
        ));
        assert!(matches!(
            decode_netpbm(b"P2\n1 1\n65535\n0"),
            Err(ImageError::UnsupportedMaxval(65535))
        ));
        assert!(matches!(
            decode_netpbm(b"P2\n0 1\n255\n"),
            Err(ImageError::ZeroDimension { .. })
        ));
        assert!(matches!(
            decode_netpbm(b"P2\n1 1\n15\n16"),
            Err(ImageError::SampleOutOfRange { value: 16, maxval: 15 })
        ));
        assert!(matches!(
            decode_netpbm(b"P2\n1 x\n255\n0"),
            Err(ImageError::InvalidToken(_))
        ));
    }

    #[test]
    fn smooth_constant() {
        let img = GrayImage::new(7, 6, vec![100; 42]).unwrap();
        assert_eq!(box_smooth(&img).unwrap(), img);
    }

    #[test]
    fn smooth_single_spike() {
        let img = GrayImage::from_fn(9, 9, |x, y| if (x, y) == (4, 4) { 255 } else { 0 }).unwrap();
        let s = box_smooth(&img).unwrap();
        assert_eq!(s.get(4, 4), 10);
        assert_eq!(s.get(0, 0), 0);
    }

    #[test]
    fn smooth_5x5_corners() {
        let img = GrayImage::from_fn(5, 5, |x, y| (5 * y + x) as u8).unwrap();
        let s = box_smooth(&img).unwrap();
        // 25-term clamped sums: (0,0) -> 90/25, (4,4) -> 510/25, (2,2) -> 300/25
        assert_eq!(s.get(0, 0), 3);
        assert_eq!(s.get(4, 4), 20);
        assert_eq!(s.get(2, 2), 12);
        assert_eq!(s.data(), naive_smooth(&img).as_slice());
    }

    #[test]
    fn smooth_too_small() {
        let img = GrayImage::new(4, 9, vec![0; 36]).unwrap();
        assert!(matches!(box_smooth(&img), Err(ImageError::TooSmall { .. })));
    }

    fn arb_image() -> impl Strategy<Value = GrayImage> {
        (5usize..24, 5usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |d| GrayImage::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn smooth_matches_naive_and_stays_in_range(img in arb_image()) {
            let s = box_smooth(&img).unwrap();
            let expect = naive_smooth(&img);
            prop_assert_eq!(s.data(), expect.as_slice());
            let lo = *img.data().iter().min().unwrap();
            let hi = *img.data().iter().max().unwrap();
            prop_assert!(s.data().iter().all(|&v| v >= lo && v <= hi));
        }

        #[test]
        fn pgm_round_trip(img in arb_image()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.pgm");
            save_pgm(&img, &p).unwrap();
            prop_assert_eq!(load_image(&p).unwrap(), img);
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = decode_netpbm(&bytes);
        }
    }
}
