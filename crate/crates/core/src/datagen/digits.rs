//! Synthetic stand-in for the MNIST files.
//!
//! Ten glyph classes rendered as 28×28 grayscale with random shifts, pixel
//! dropout, and intensity jitter. Useful for exercising the Colored-MNIST
//! pipeline end to end when the real IDX files are not on disk; the glyph
//! shape plays the role of the core feature.

use super::cmnist::MnistData;
use super::idx::IdxImages;
use crate::rng::stream;
use rand::Rng;

const SIDE: usize = 28;
const CELL: usize = 4; // 7×7 glyph grid upscaled 4×

#[rustfmt::skip]
const BASE_GLYPHS: [[&str; 7]; 5] = [
    [" ##### ",
     "#     #",
     "#     #",
     "#     #",
     "#     #",
     "#     #",
     " ##### "],
    ["  ##   ",
     " ###   ",
     "####   ",
     "  ##   ",
     "  ##   ",
     "  ##   ",
     " ######"],
    [" ##### ",
     "#     #",
     "      #",
     "  #### ",
     " #     ",
     "#      ",
     "#######"],
    ["##  ## ",
     "##  ## ",
     "##  ## ",
     "#######",
     "    ## ",
     "    ## ",
     "    ## "],
    [" ##### ",
     "#      ",
     "#      ",
     "###### ",
     "#     #",
     "#     #",
     " ##### "],
];

/// Both digits of a pair share one glyph: the per-image jitter supplies a
/// continuous style variation the way handwriting does, without a separable
/// sub-template inside a class.
fn glyph_rows(digit: u8) -> Vec<Vec<u8>> {
    BASE_GLYPHS[(digit / 2) as usize].iter().map(|r| r.bytes().collect()).collect()
}

fn render(digit: u8, seed: u64, id: u64, tag: &str) -> Vec<u8> {
    let mut rng = stream(seed, tag, id);
    let glyph = glyph_rows(digit);
    // handwriting-like variation: global shift, per-stroke-cell jitter,
    // pixel dropout, uneven ink, and a few background specks
    // glyphs are center-normalized the way MNIST digits are; style comes
    // from stroke wobble, dropout, and uneven ink
    let dx: i32 = 0;
    let dy: i32 = 0;
    let base_intensity = 100 + rng.random_range(0..=90) as i32;
    let mut img = vec![0u8; SIDE * SIDE];
    for (gr, row) in glyph.iter().enumerate() {
        for (gc, &ch) in row.iter().enumerate() {
            if ch != b'#' {
                continue;
            }
            // occasional one-pixel stroke wobble
            let jx: i32 = if rng.random::<f64>() < 0.06 { rng.random_range(-1..=1) } else { 0 };
            let jy: i32 = if rng.random::<f64>() < 0.06 { rng.random_range(-1..=1) } else { 0 };
            for sr in 0..CELL {
                for sc in 0..CELL {
                    if rng.random::<f64>() < 0.03 {
                        continue;
                    }
                    let r = gr as i32 * CELL as i32 + sr as i32 + dy + jy;
                    let c = gc as i32 * CELL as i32 + sc as i32 + dx + jx;
                    if (0..SIDE as i32).contains(&r) && (0..SIDE as i32).contains(&c) {
                        let intensity = base_intensity + rng.random_range(0..=75) as i32;
                        img[(r as usize) * SIDE + c as usize] = intensity.min(255) as u8;
                    }
                }
            }
        }
    }
    // sparse specks so the background is not perfectly clean
    let specks = rng.random_range(1..=4);
    for _ in 0..specks {
        let p = rng.random_range(0..SIDE * SIDE);
        img[p] = img[p].max(30 + rng.random_range(0..=60));
    }
    // normalize total ink so stroke dropout and uneven intensity change the
    // pattern, not the amount of ink
    let ink: u64 = img.iter().map(|&v| u64::from(v)).sum();
    if ink > 0 {
        let target = 24_000.0;
        let factor = target / ink as f64;
        for v in img.iter_mut() {
            *v = ((f64::from(*v) * factor).round().min(255.0)) as u8;
        }
    }
    img
}

/// Generate `(n_train, n_test)` synthetic digit images with balanced labels.
pub fn synthetic_mnist(n_train: usize, n_test: usize, seed: u64) -> MnistData {
    let make = |n: usize, tag: &str, label_tag: &str| {
        let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut lrng = stream(seed, label_tag, i as u64);
            let digit = lrng.random_range(0..10u8);
            labels.push(digit);
            pixels.extend_from_slice(&render(digit, seed, i as u64, tag));
        }
        (IdxImages { count: n, rows: SIDE, cols: SIDE, pixels }, labels)
    };
    let (train_images, train_labels) = make(n_train, "digit-train", "digit-train-label");
    let (test_images, test_labels) = make(n_test, "digit-test", "digit-test-label");
    MnistData {
        train_images,
        train_labels,
        test_images: Some(test_images),
        test_labels: Some(test_labels),
    }
}
