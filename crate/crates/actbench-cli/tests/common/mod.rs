//! Helpers shared by the binary tests: run the built CLI, lay down
//! synthetic digit datasets in the IDX format, and locate the shipped
//! fixture files.

#![allow(dead_code)]

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use actbench_core::mnist::LabeledDataset;
use actbench_core::Matrix;

pub const PIXELS: usize = 784;
pub const CLASSES: usize = 10;

pub fn actbench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_actbench"))
}

pub fn fixture_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Ten sharply separated prototype classes with pixel noise, cycling
/// through the classes in order; a stand-in with the same shape and format
/// as the real digit files.
pub fn synthetic_pixels(count: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(count * PIXELS);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = (i % CLASSES) as u8;
        for p in 0..PIXELS {
            let base: i16 = if p % CLASSES == class as usize { 220 } else { 20 };
            let noise: i16 = rng.gen_range(-15..=15);
            pixels.push((base + noise).clamp(0, 255) as u8);
        }
        labels.push(class);
    }
    (pixels, labels)
}

pub fn synthetic_dataset(count: usize, seed: u64) -> LabeledDataset {
    let (pixels, labels) = synthetic_pixels(count, seed);
    let images = Matrix::from_fn(count, PIXELS, |i, j| pixels[i * PIXELS + j] as f64 / 255.0);
    LabeledDataset::new(images, labels).expect("synthetic data is well formed")
}

fn idx_image_bytes(pixels: &[u8], count: usize) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    b.extend_from_slice(&(count as u32).to_be_bytes());
    b.extend_from_slice(&28u32.to_be_bytes());
    b.extend_from_slice(&28u32.to_be_bytes());
    b.extend_from_slice(pixels);
    b
}

fn idx_label_bytes(labels: &[u8]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    b.extend_from_slice(labels);
    b
}

/// Write `train-images-idx3-ubyte` and `train-labels-idx1-ubyte` (gzipped
/// with a `.gz` suffix when asked) under `dir`.
pub fn write_idx_dir(dir: &Path, count: usize, seed: u64, gzip: bool) {
    let (pixels, labels) = synthetic_pixels(count, seed);
    let files = [
        ("train-images-idx3-ubyte", idx_image_bytes(&pixels, count)),
        ("train-labels-idx1-ubyte", idx_label_bytes(&labels)),
    ];
    for (name, bytes) in files {
        if gzip {
            let file = std::fs::File::create(dir.join(format!("{name}.gz"))).unwrap();
            let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::fast());
            enc.write_all(&bytes).unwrap();
            enc.finish().unwrap();
        } else {
            std::fs::write(dir.join(name), bytes).unwrap();
        }
    }
}
