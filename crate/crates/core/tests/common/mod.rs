#![allow(dead_code)]

use std::path::Path;

use binmatch::geometry::{Homography, Point};
use binmatch::imageio::{save_pgm, GrayImage};
use binmatch::BinaryDescriptor;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_descriptor(rng: &mut impl Rng) -> BinaryDescriptor {
    BinaryDescriptor::from_words(rng.random())
}

pub fn flip_k(d: &BinaryDescriptor, k: usize, rng: &mut impl Rng) -> BinaryDescriptor {
    let mut out = *d;
    for i in sample(rng, 256, k) {
        out.flip_bit(i);
    }
    out
}

/// A set A and a set B where most of A has a perturbed copy in B at
/// 0..=30 flipped bits, plus unrelated distractors on both sides.
pub fn synthetic_sets(seed: u64, n: usize) -> (Vec<BinaryDescriptor>, Vec<BinaryDescriptor>) {
    let mut r = rng(seed);
    let a: Vec<_> = (0..n).map(|_| random_descriptor(&mut r)).collect();
    let mut b = Vec::with_capacity(n);
    for d in &a {
        if r.random_bool(0.8) {
            let k = r.random_range(0..=30);
            b.push(flip_k(d, k, &mut r));
        } else {
            b.push(random_descriptor(&mut r));
        }
    }
    // shuffle B deterministically
    for i in (1..b.len()).rev() {
        let j = r.random_range(0..=i);
        b.swap(i, j);
    }
    (a, b)
}

/// Mild random perspective warp around an image of the given size.
pub fn random_homography(rng: &mut impl Rng) -> Homography {
    Homography::from_row_slice(&[
        rng.random_range(0.8..1.2),
        rng.random_range(-0.2..0.2),
        rng.random_range(-40.0..40.0),
        rng.random_range(-0.2..0.2),
        rng.random_range(0.8..1.2),
        rng.random_range(-40.0..40.0),
        rng.random_range(-3e-4..3e-4),
        rng.random_range(-3e-4..3e-4),
        1.0,
    ])
    .unwrap()
}

/// Piecewise-constant random texture; block corners give FAST responses.
pub fn textured_image(seed: u64, width: usize, height: usize, block: usize) -> GrayImage {
    let mut r = rng(seed);
    let bw = width.div_ceil(block);
    let bh = height.div_ceil(block);
    let blocks: Vec<u8> = (0..bw * bh).map(|_| r.random()).collect();
    GrayImage::from_fn(width, height, |x, y| blocks[(y / block) * bw + x / block]).unwrap()
}

/// Nearest-neighbour inverse warp: `out(p) = src(H⁻¹ p)`, 0 outside.
pub fn warp(src: &GrayImage, h: &Homography) -> GrayImage {
    let inv = h.inverse().unwrap();
    GrayImage::from_fn(src.width(), src.height(), |x, y| {
        match inv.apply(&Point::new(x as f64, y as f64)) {
            Ok(p) => {
                let (sx, sy) = (p.x.round(), p.y.round());
                if sx >= 0.0 && sy >= 0.0 && (sx as usize) < src.width() && (sy as usize) < src.height()
                {
                    src.get(sx as usize, sy as usize)
                } else {
                    0
                }
            }
            Err(_) => 0,
        }
    })
    .unwrap()
}

pub fn write_h(path: &Path, h: &Homography) {
    let m = h.matrix();
    let mut s = String::new();
    for r in 0..3 {
        for c in 0..3 {
            s.push_str(&format!("{:.12e} ", m[(r, c)]));
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Writes `img1` and `img2..=img{n}` warped by seeded homographies, with
/// matching `H1toNp` files. Returns the homographies.
pub fn write_sequence(dir: &Path, seed: u64, n: usize) -> Vec<Homography> {
    std::fs::create_dir_all(dir).unwrap();
    let base = textured_image(seed, 200, 160, 6);
    save_pgm(&base, dir.join("img1.pgm")).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let mut hs = Vec::new();
    for k in 2..=n {
        let h = random_homography(&mut r);
        save_pgm(&warp(&base, &h), dir.join(format!("img{k}.pgm"))).unwrap();
        write_h(&dir.join(format!("H1to{k}p")), &h);
        hs.push(h);
    }
    hs
}
