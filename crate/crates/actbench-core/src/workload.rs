//! Deterministic generation of inference workloads.
//!
//! A workload is a `[10^n x input_dim]` matrix of uniform(-1, 1) values,
//! reproducible from its seed. Everything here runs before the clock
//! starts; the harness times forward passes, never data generation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub const MAX_EXPONENT: u32 = 8;
/// Generation refuses allocations past this unless told otherwise.
pub const DEFAULT_MEMORY_CAP_BYTES: u64 = 8 * 1024 * 1024 * 1024;

const FILE_MAGIC: &[u8; 4] = b"ABWL";
const FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("size exponent {0} is outside 0..={MAX_EXPONENT}")]
    ExponentOutOfRange(u32),
    #[error("input_dim must be positive")]
    ZeroDim,
    #[error("workload needs {needed} bytes, over the {cap}-byte memory cap")]
    BudgetExceeded { needed: u128, cap: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad workload file: {0}")]
    BadFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Workload {
    pub size_exponent: u32,
    pub input_dim: usize,
    pub seed: u64,
}

impl Workload {
    pub fn new(size_exponent: u32, input_dim: usize, seed: u64) -> Result<Self, WorkloadError> {
        if size_exponent > MAX_EXPONENT {
            return Err(WorkloadError::ExponentOutOfRange(size_exponent));
        }
        if input_dim == 0 {
            return Err(WorkloadError::ZeroDim);
        }
        Ok(Workload {
            size_exponent,
            input_dim,
            seed,
        })
    }

    pub fn instances(&self) -> usize {
        10usize.pow(self.size_exponent)
    }

    /// In-memory footprint of the generated matrix.
    pub fn estimated_bytes(&self) -> u128 {
        self.instances() as u128 * self.input_dim as u128 * std::mem::size_of::<f64>() as u128
    }
}

fn rng_for(w: &Workload) -> ChaCha8Rng {
    // fold the shape into the stream so (n, dim) pairs never alias
    ChaCha8Rng::seed_from_u64(
        w.seed ^ ((w.size_exponent as u64) << 32) ^ (w.input_dim as u64),
    )
}

fn draw_open(rng: &mut ChaCha8Rng) -> f64 {
    // gen_range(-1.0..1.0) is half-open and can land on -1.0 exactly
    loop {
        let v = rng.gen_range(-1.0..1.0);
        if v != -1.0 {
            return v;
        }
    }
}

pub fn generate(w: &Workload) -> Result<Matrix, WorkloadError> {
    generate_with_cap(w, DEFAULT_MEMORY_CAP_BYTES)
}

/// Fill the workload matrix in fixed-size chunks. The chunking keeps the
/// inner loop cache-friendly at n >= 7 scales without changing the stream.
pub fn generate_with_cap(w: &Workload, cap_bytes: u64) -> Result<Matrix, WorkloadError> {
    let needed = w.estimated_bytes();
    if needed > cap_bytes as u128 {
        return Err(WorkloadError::BudgetExceeded {
            needed,
            cap: cap_bytes,
        });
    }
    let mut rng = rng_for(w);
    let total = w.instances() * w.input_dim;
    let mut data = vec![0.0f64; total];
    const CHUNK: usize = 1 << 16;
    for chunk in data.chunks_mut(CHUNK) {
        for v in chunk.iter_mut() {
            *v = draw_open(&mut rng);
        }
    }
    Ok(Matrix::from_vec(w.instances(), w.input_dim, data))
}

/// Persist as little-endian f32 behind a 16-byte header, for reuse across
/// runs or tools. f64 -> f32 narrowing is deliberate; workload values only
/// need their distribution, not full precision.
pub fn save_workload(w: &Workload, matrix: &Matrix, path: &Path) -> Result<(), WorkloadError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FILE_MAGIC)?;
    out.write_all(&FILE_VERSION.to_le_bytes())?;
    out.write_all(&w.size_exponent.to_le_bytes())?;
    out.write_all(&(w.input_dim as u32).to_le_bytes())?;
    for &v in matrix.data() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_workload(path: &Path) -> Result<(Workload, Matrix), WorkloadError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| WorkloadError::BadFile("shorter than the 16-byte header".into()))?;
    if &header[0..4] != FILE_MAGIC {
        return Err(WorkloadError::BadFile(format!(
            "magic {:02x?}, expected {:02x?}",
            &header[0..4],
            FILE_MAGIC
        )));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FILE_VERSION {
        return Err(WorkloadError::BadFile(format!(
            "version {version}, this build reads version {FILE_VERSION}"
        )));
    }
    let size_exponent = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let input_dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let w = Workload::new(size_exponent, input_dim, 0)
        .map_err(|e| WorkloadError::BadFile(e.to_string()))?;

    let total = w.instances() * w.input_dim;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != total * 4 {
        return Err(WorkloadError::BadFile(format!(
            "expected {} data bytes, found {}",
            total * 4,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((w, Matrix::from_vec(w.instances(), w.input_dim, data)))
}
