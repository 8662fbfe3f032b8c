//! IDX dataset ingestion and the train-to-threshold experiment: vary the
//! hidden activation, train with SGD until validation accuracy clears a
//! threshold or an epoch cap, and accumulate training-only wall time.
//!
//! The clock discipline mirrors the inference harness: each epoch makes
//! exactly four reads, a (start, stop) pair around the training pass and
//! another around the validation pass. Only the first pair accumulates
//! into `train_seconds`, which is how an injected counting clock can prove
//! validation is never billed as training.

use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activations::{ActivationKind, EvalMode};
use crate::clock::{Clock, SystemClock};
use crate::harness::lock_measurement;
use crate::matrix::Matrix;
use crate::nncore::{
    self, DenseNetwork, Loss, NetworkConfig, OptimizerState, SGD_DEFAULT_LR,
};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const IMAGE_SIDE: usize = 28;
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const CLASSES: usize = 10;

pub const DEFAULT_THRESHOLD: f64 = 0.90;
pub const DEFAULT_MAX_EPOCHS: usize = 100;
pub const DEFAULT_RUNS: u32 = 3;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_VALIDATION_SIZE: usize = 10_000;

#[derive(Debug, Error)]
pub enum MnistError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: expected {expected} bytes of {what}, found {found}")]
    Truncated {
        path: PathBuf,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{path}: images are {rows}x{cols}, this loader reads 28x28")]
    BadDims {
        path: PathBuf,
        rows: u32,
        cols: u32,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is outside 0..{CLASSES}")]
    BadLabel { index: usize, label: u8 },
    #[error("invalid training setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Net(#[from] nncore::NetError),
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    /// `[m x 784]`, pixels scaled to [0, 1].
    pub images: Matrix,
    pub labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(images: Matrix, labels: Vec<u8>) -> Result<Self, MnistError> {
        if images.rows() != labels.len() {
            return Err(MnistError::CountMismatch {
                images: images.rows(),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= CLASSES)
        {
            return Err(MnistError::BadLabel { index, label });
        }
        Ok(LabeledDataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn read_file_auto(path: &Path) -> Result<Vec<u8>, MnistError> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Parse an IDX image/label file pair (gzip accepted, sniffed from the
/// 0x1f8b prefix) into a dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset, MnistError> {
    let image_bytes = read_file_auto(images_path)?;
    if image_bytes.len() < 16 {
        return Err(MnistError::Truncated {
            path: images_path.to_owned(),
            what: "image header",
            expected: 16,
            found: image_bytes.len(),
        });
    }
    let magic = be_u32(&image_bytes, 0);
    if magic != IMAGE_MAGIC {
        return Err(MnistError::BadMagic {
            path: images_path.to_owned(),
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(&image_bytes, 4) as usize;
    let rows = be_u32(&image_bytes, 8);
    let cols = be_u32(&image_bytes, 12);
    if (rows as usize, cols as usize) != (IMAGE_SIDE, IMAGE_SIDE) {
        return Err(MnistError::BadDims {
            path: images_path.to_owned(),
            rows,
            cols,
        });
    }
    let expected = 16 + count * PIXELS;
    if image_bytes.len() != expected {
        return Err(MnistError::Truncated {
            path: images_path.to_owned(),
            what: "pixel data",
            expected,
            found: image_bytes.len(),
        });
    }

    let label_bytes = read_file_auto(labels_path)?;
    if label_bytes.len() < 8 {
        return Err(MnistError::Truncated {
            path: labels_path.to_owned(),
            what: "label header",
            expected: 8,
            found: label_bytes.len(),
        });
    }
    let magic = be_u32(&label_bytes, 0);
    if magic != LABEL_MAGIC {
        return Err(MnistError::BadMagic {
            path: labels_path.to_owned(),
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let label_count = be_u32(&label_bytes, 4) as usize;
    let expected = 8 + label_count;
    if label_bytes.len() != expected {
        return Err(MnistError::Truncated {
            path: labels_path.to_owned(),
            what: "label data",
            expected,
            found: label_bytes.len(),
        });
    }
    if label_count != count {
        return Err(MnistError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let data: Vec<f64> = image_bytes[16..].iter().map(|&p| p as f64 / 255.0).collect();
    let images = Matrix::from_vec(count, PIXELS, data);
    LabeledDataset::new(images, label_bytes[8..].to_vec())
}

// ───────────────────────── evaluation ─────────────────────────

/// Fraction of rows whose largest output lands on the label; ties go to
/// the lowest index. Runs in eval mode, in bounded-size chunks.
pub fn accuracy(net: &DenseNetwork, data: &LabeledDataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let chunk = 512;
    let mut correct = 0usize;
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let mut batch = Matrix::zeros(end - start, data.images.cols());
        for (i, row) in (start..end).enumerate() {
            batch.row_mut(i).copy_from_slice(data.images.row(row));
        }
        let out = nncore::forward(net, &batch, EvalMode::Eval, &mut rng)
            .expect("dataset width matches the network");
        for (i, row) in (start..end).enumerate() {
            let outputs = out.row(i);
            let mut best = 0usize;
            for (j, &v) in outputs.iter().enumerate() {
                if v > outputs[best] {
                    best = j;
                }
            }
            if best == data.labels[row] as usize {
                correct += 1;
            }
        }
        start = end;
    }
    correct as f64 / data.len() as f64
}

fn one_hot(labels: &[u8]) -> Matrix {
    let mut t = Matrix::zeros(labels.len(), CLASSES);
    for (i, &l) in labels.iter().enumerate() {
        t.set(i, l as usize, 1.0);
    }
    t
}

// ───────────────────────── the experiment ─────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainOptions {
    /// Stop as soon as validation accuracy exceeds this.
    pub threshold: f64,
    pub max_epochs: usize,
    pub runs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Held out from the end of the seeded shuffle before training.
    pub validation_size: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            threshold: DEFAULT_THRESHOLD,
            max_epochs: DEFAULT_MAX_EPOCHS,
            runs: DEFAULT_RUNS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: SGD_DEFAULT_LR,
            validation_size: DEFAULT_VALIDATION_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub epochs_used: usize,
    pub reached_target: bool,
    /// Forward + backward + update time only.
    pub train_seconds: f64,
    /// Accuracy passes, kept separate and never billed as training.
    pub validation_seconds: f64,
    pub final_accuracy: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub function: ActivationKind,
    pub runs: Vec<RunOutcome>,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
    /// True iff some run never reached the target.
    pub any_run_failed: bool,
}

pub fn train_to_threshold(
    config: &NetworkConfig,
    data: &LabeledDataset,
    opts: &TrainOptions,
) -> Result<TrainResult, MnistError> {
    let mut clock = SystemClock::new();
    train_to_threshold_with_clock(config, data, opts, &mut clock)
}

pub fn train_to_threshold_with_clock(
    config: &NetworkConfig,
    data: &LabeledDataset,
    opts: &TrainOptions,
    clock: &mut dyn Clock,
) -> Result<TrainResult, MnistError> {
    if config.input_dim != PIXELS || config.output_dim != CLASSES {
        return Err(MnistError::InvalidSetup(format!(
            "network is {}->{}, the experiment needs {PIXELS}->{CLASSES}",
            config.input_dim, config.output_dim
        )));
    }
    if opts.runs < 1 {
        return Err(MnistError::InvalidSetup("runs must be at least 1".into()));
    }
    if opts.batch_size == 0 {
        return Err(MnistError::InvalidSetup("batch size must be positive".into()));
    }
    if opts.validation_size == 0 || opts.validation_size >= data.len() {
        return Err(MnistError::InvalidSetup(format!(
            "validation size {} must leave a nonempty training split of the {} examples",
            opts.validation_size,
            data.len()
        )));
    }

    let _exclusive = lock_measurement();

    // seeded shuffle, then the tail becomes the validation split; this
    // happens once, before any clock reads
    let mut split_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut split_rng);
    let (train_idx, val_idx) = order.split_at(data.len() - opts.validation_size);

    let gather = |idx: &[usize]| -> LabeledDataset {
        let mut images = Matrix::zeros(idx.len(), PIXELS);
        let mut labels = Vec::with_capacity(idx.len());
        for (i, &src) in idx.iter().enumerate() {
            images.row_mut(i).copy_from_slice(data.images.row(src));
            labels.push(data.labels[src]);
        }
        LabeledDataset { images, labels }
    };
    let train = gather(train_idx);
    let val = gather(val_idx);
    let train_targets = one_hot(&train.labels);

    let mut outcomes = Vec::with_capacity(opts.runs as usize);
    for run in 0..opts.runs {
        let mut net_config = config.clone();
        net_config.seed = config.seed.wrapping_add(run as u64);
        let mut net = nncore::init_network(&net_config)?;
        let mut opt = OptimizerState::sgd(opts.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(run as u64) ^ 0x5DEECE66D);

        let mut outcome = RunOutcome {
            epochs_used: 0,
            reached_target: false,
            train_seconds: 0.0,
            validation_seconds: 0.0,
            final_accuracy: 0.0,
            failure: None,
        };
        let mut batch_order: Vec<usize> = (0..train.len()).collect();

        'epochs: for epoch in 1..=opts.max_epochs {
            let t0 = clock.now();
            batch_order.shuffle(&mut rng);
            for chunk in batch_order.chunks(opts.batch_size) {
                let mut batch = Matrix::zeros(chunk.len(), PIXELS);
                let mut targets = Matrix::zeros(chunk.len(), CLASSES);
                for (i, &src) in chunk.iter().enumerate() {
                    batch.row_mut(i).copy_from_slice(train.images.row(src));
                    targets.row_mut(i).copy_from_slice(train_targets.row(src));
                }
                let step = nncore::backward(
                    &net,
                    &batch,
                    &targets,
                    Loss::PerNodeBce,
                    EvalMode::Train,
                    &mut rng,
                )
                .and_then(|(grads, loss)| {
                    if !loss.is_finite() {
                        return Err(nncore::NetError::Diverged(format!(
                            "non-finite loss at epoch {epoch}"
                        )));
                    }
                    nncore::optimizer_step(&mut opt, &mut net, &grads)
                });
                if let Err(e) = step {
                    let t1 = clock.now();
                    outcome.train_seconds += t1 - t0;
                    outcome.epochs_used = epoch;
                    outcome.failure = Some(e.to_string());
                    break 'epochs;
                }
            }
            let t1 = clock.now();
            outcome.train_seconds += t1 - t0;
            outcome.epochs_used = epoch;

            // validation runs between its own clock reads and its time is
            // accounted separately
            let v0 = clock.now();
            let acc = accuracy(&net, &val);
            let v1 = clock.now();
            outcome.validation_seconds += v1 - v0;
            outcome.final_accuracy = acc;

            if acc > opts.threshold {
                outcome.reached_target = true;
                break;
            }
        }
        outcomes.push(outcome);
    }

    let seconds: Vec<f64> = outcomes.iter().map(|o| o.train_seconds).collect();
    let s0 = seconds[0];
    let mean = s0 + seconds.iter().map(|s| s - s0).sum::<f64>() / seconds.len() as f64;
    let sd = if seconds.len() < 2 {
        0.0
    } else {
        let ss: f64 = seconds.iter().map(|s| (s - mean) * (s - mean)).sum();
        (ss / (seconds.len() - 1) as f64).sqrt()
    };
    let any_run_failed = outcomes.iter().any(|o| !o.reached_target);

    Ok(TrainResult {
        function: config.hidden_activation,
        runs: outcomes,
        mean_seconds: mean,
        sd_seconds: sd,
        any_run_failed,
    })
}

// ───────────────────────── emission ─────────────────────────

/// Per-run rows: `function,run,epochs,reached,seconds`.
pub fn write_train_csv<W: std::io::Write>(
    results: &[TrainResult],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["function", "run", "epochs", "reached", "seconds"])?;
    for r in results {
        for (i, run) in r.runs.iter().enumerate() {
            w.write_record([
                r.function.name(),
                &i.to_string(),
                &run.epochs_used.to_string(),
                &run.reached_target.to_string(),
                &format!("{}", run.train_seconds),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-function summary rows: `function,mean_seconds,sd_seconds,failed`.
pub fn write_train_summary_csv<W: std::io::Write>(
    results: &[TrainResult],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["function", "mean_seconds", "sd_seconds", "failed"])?;
    for r in results {
        w.write_record([
            r.function.name(),
            &format!("{}", r.mean_seconds),
            &format!("{}", r.sd_seconds),
            &r.any_run_failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::CountingClock;
    use crate::nncore::DenseLayer;
    use rand::Rng;
    use std::io::Write;
    use tempfile::tempdir;

    fn idx_image_bytes(images: &[[u8; PIXELS]]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        b.extend_from_slice(&(images.len() as u32).to_be_bytes());
        b.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
        b.extend_from_slice(&(IMAGE_SIDE as u32).to_be_bytes());
        for img in images {
            b.extend_from_slice(img);
        }
        b
    }

    fn idx_label_bytes(labels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    fn write_pair(dir: &Path, images: &[[u8; PIXELS]], labels: &[u8]) -> (PathBuf, PathBuf) {
        let ip = dir.join("images.idx");
        let lp = dir.join("labels.idx");
        std::fs::write(&ip, idx_image_bytes(images)).unwrap();
        std::fs::write(&lp, idx_label_bytes(labels)).unwrap();
        (ip, lp)
    }

    /// Ten sharply separated prototype classes with a little noise; a
    /// stand-in with the same shape and format as the real digits.
    fn synthetic_examples(count: usize, seed: u64) -> (Vec<[u8; PIXELS]>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let class = (i % CLASSES) as u8;
            let mut img = [20u8; PIXELS];
            for (p, v) in img.iter_mut().enumerate() {
                let lit = p % CLASSES == class as usize;
                let base: i16 = if lit { 220 } else { 20 };
                let noise: i16 = rng.gen_range(-15..=15);
                *v = (base + noise).clamp(0, 255) as u8;
            }
            images.push(img);
            labels.push(class);
        }
        (images, labels)
    }

    fn small_config(kind: ActivationKind) -> NetworkConfig {
        NetworkConfig {
            input_dim: PIXELS,
            hidden_layers: 1,
            hidden_width: 16,
            output_dim: CLASSES,
            hidden_activation: kind,
            output_activation: Some(ActivationKind::Sigmoid),
            seed: 0,
        }
    }

    #[test]
    fn idx_pair_loads_with_scaled_pixels() {
        let dir = tempdir().unwrap();
        let mut first = [0u8; PIXELS];
        first[0] = 255;
        first[1] = 51;
        let (ip, lp) = write_pair(dir.path(), &[first, [128; PIXELS]], &[5, 0]);
        let data = load_idx(&ip, &lp).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.images.get(0, 0), 1.0);
        assert_eq!(data.images.get(0, 1), 0.2);
        assert_eq!(data.images.get(0, 2), 0.0);
        assert_eq!(data.labels, vec![5, 0]);
        for &v in data.images.data() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn gzipped_files_load_identically() {
        let dir = tempdir().unwrap();
        let (images, labels) = synthetic_examples(4, 1);
        let (ip, lp) = write_pair(dir.path(), &images, &labels);
        let plain = load_idx(&ip, &lp).unwrap();

        let gz = |src: &Path, dst: &Path| {
            let bytes = std::fs::read(src).unwrap();
            let f = std::fs::File::create(dst).unwrap();
            let mut enc = flate2::write::GzEncoder::new(f, flate2::Compression::default());
            enc.write_all(&bytes).unwrap();
            enc.finish().unwrap();
        };
        let ipz = dir.path().join("images.idx.gz");
        let lpz = dir.path().join("labels.idx.gz");
        gz(&ip, &ipz);
        gz(&lp, &lpz);
        let zipped = load_idx(&ipz, &lpz).unwrap();
        assert_eq!(plain.images, zipped.images);
        assert_eq!(plain.labels, zipped.labels);
    }

    #[test]
    fn swapped_files_fail_on_magic() {
        let dir = tempdir().unwrap();
        // enough labels that the label file clears the image header size
        // and the failure is really about the magic
        let (images, labels) = synthetic_examples(8, 2);
        let (ip, lp) = write_pair(dir.path(), &images, &labels);
        match load_idx(&lp, &ip).unwrap_err() {
            MnistError::BadMagic {
                expected, found, ..
            } => {
                assert_eq!(expected, IMAGE_MAGIC);
                assert_eq!(found, LABEL_MAGIC);
            }
            other => panic!("unexpected {other:?}"),
        }
        // and an image file offered as labels fails the same way around
        match load_idx(&ip, &ip).unwrap_err() {
            MnistError::BadMagic {
                expected, found, ..
            } => {
                assert_eq!(expected, LABEL_MAGIC);
                assert_eq!(found, IMAGE_MAGIC);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempdir().unwrap();
        let (images, _) = synthetic_examples(3, 3);
        let ip = dir.path().join("images.idx");
        let lp = dir.path().join("labels.idx");
        std::fs::write(&ip, idx_image_bytes(&images)).unwrap();
        std::fs::write(&lp, idx_label_bytes(&[1, 2])).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(MnistError::CountMismatch {
                images: 3,
                labels: 2
            })
        ));
    }

    #[test]
    fn truncated_pixels_are_reported_with_lengths() {
        let dir = tempdir().unwrap();
        let (images, labels) = synthetic_examples(2, 4);
        let (ip, lp) = write_pair(dir.path(), &images, &labels);
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes.truncate(bytes.len() - 10);
        std::fs::write(&ip, bytes).unwrap();
        match load_idx(&ip, &lp).unwrap_err() {
            MnistError::Truncated {
                what, expected, found, ..
            } => {
                assert_eq!(what, "pixel data");
                assert_eq!(expected, 16 + 2 * PIXELS);
                assert_eq!(found, 16 + 2 * PIXELS - 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_wellformed_files_give_an_empty_dataset() {
        let dir = tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &[], &[]);
        let data = load_idx(&ip, &lp).unwrap();
        assert!(data.is_empty());
    }

    #[test]
    fn wrong_image_side_is_rejected() {
        let dir = tempdir().unwrap();
        let ip = dir.path().join("images.idx");
        let lp = dir.path().join("labels.idx");
        let mut b = Vec::new();
        b.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        b.extend_from_slice(&1u32.to_be_bytes());
        b.extend_from_slice(&32u32.to_be_bytes());
        b.extend_from_slice(&32u32.to_be_bytes());
        b.extend_from_slice(&[0u8; 32 * 32]);
        std::fs::write(&ip, b).unwrap();
        std::fs::write(&lp, idx_label_bytes(&[0])).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(MnistError::BadDims { rows: 32, cols: 32, .. })
        ));
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        let dir = tempdir().unwrap();
        let (images, _) = synthetic_examples(1, 5);
        let (ip, lp) = write_pair(dir.path(), &images, &[10]);
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(MnistError::BadLabel { index: 0, label: 10 })
        ));
    }

    #[test]
    fn accuracy_is_perfect_when_outputs_echo_the_label() {
        // weights route pixel c straight to output c, so an image with
        // pixel c lit is classified c
        let mut weights = Matrix::zeros(PIXELS, CLASSES);
        for c in 0..CLASSES {
            weights.set(c, c, 1.0);
        }
        let net = DenseNetwork::from_layers(vec![DenseLayer {
            weights,
            bias: vec![0.0; CLASSES],
            activation: None,
        }]);
        let mut images = Matrix::zeros(30, PIXELS);
        let mut labels = Vec::new();
        for i in 0..30 {
            let c = i % CLASSES;
            images.set(i, c, 1.0);
            labels.push(c as u8);
        }
        let data = LabeledDataset::new(images, labels).unwrap();
        assert_eq!(accuracy(&net, &data), 1.0);
    }

    #[test]
    fn constant_outputs_break_ties_toward_class_zero() {
        let net = DenseNetwork::from_layers(vec![DenseLayer {
            weights: Matrix::zeros(PIXELS, CLASSES),
            bias: vec![0.5; CLASSES],
            activation: None,
        }]);
        let mut images = Matrix::zeros(10, PIXELS);
        for i in 0..10 {
            images.set(i, i, 1.0);
        }
        let labels: Vec<u8> = (0..10).map(|i| i as u8).collect();
        let data = LabeledDataset::new(images, labels).unwrap();
        // all outputs equal, argmax picks index 0, only label 0 matches
        assert_eq!(accuracy(&net, &data), 0.1);
    }

    #[test]
    fn random_net_on_random_labels_sits_near_chance() {
        let config = NetworkConfig {
            hidden_width: 8,
            ..small_config(ActivationKind::Tanh)
        };
        let net = nncore::init_network(&config).unwrap();
        let m = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let images = Matrix::from_fn(m, PIXELS, |_, _| rng.gen_range(0.0..1.0));
        let labels: Vec<u8> = (0..m).map(|_| rng.gen_range(0..CLASSES as u8)).collect();
        let data = LabeledDataset::new(images, labels).unwrap();
        let acc = accuracy(&net, &data);
        assert!((acc - 0.1).abs() < 0.03, "accuracy {acc}");
    }

    fn synthetic_dataset(count: usize, seed: u64) -> LabeledDataset {
        let (images, labels) = synthetic_examples(count, seed);
        let data: Vec<f64> = images
            .iter()
            .flat_map(|img| img.iter().map(|&p| p as f64 / 255.0))
            .collect();
        LabeledDataset::new(Matrix::from_vec(count, PIXELS, data), labels).unwrap()
    }

    #[test]
    fn threshold_zero_stops_after_the_first_epoch() {
        // the validation split is sized so one epoch of drift cannot
        // leave accuracy at exactly zero
        let data = synthetic_dataset(400, 6);
        let opts = TrainOptions {
            threshold: 0.0,
            runs: 2,
            validation_size: 100,
            ..TrainOptions::default()
        };
        let result =
            train_to_threshold(&small_config(ActivationKind::ReLU), &data, &opts).unwrap();
        for run in &result.runs {
            assert_eq!(run.epochs_used, 1);
            assert!(run.reached_target);
            assert!(run.final_accuracy > 0.0);
        }
        assert!(!result.any_run_failed);
    }

    #[test]
    fn zero_epoch_cap_trains_nothing_and_fails_every_run() {
        let data = synthetic_dataset(60, 7);
        let opts = TrainOptions {
            max_epochs: 0,
            runs: 2,
            validation_size: 10,
            ..TrainOptions::default()
        };
        let result =
            train_to_threshold(&small_config(ActivationKind::Tanh), &data, &opts).unwrap();
        for run in &result.runs {
            assert_eq!(run.epochs_used, 0);
            assert!(!run.reached_target);
            assert_eq!(run.train_seconds, 0.0);
        }
        assert!(result.any_run_failed);
        assert_eq!(result.mean_seconds, 0.0);
        assert_eq!(result.sd_seconds, 0.0);
    }

    #[test]
    fn counting_clock_shows_validation_is_never_billed() {
        let data = synthetic_dataset(100, 8);
        let opts = TrainOptions {
            threshold: 2.0, // unreachable, runs the full epoch budget
            max_epochs: 4,
            runs: 2,
            validation_size: 20,
            ..TrainOptions::default()
        };
        let mut clock = CountingClock::new(1.0);
        let result = train_to_threshold_with_clock(
            &small_config(ActivationKind::ReLU),
            &data,
            &opts,
            &mut clock,
        )
        .unwrap();
        // four reads per epoch: train pair then validation pair; with a
        // 1s step each pair spans exactly 1s
        for run in &result.runs {
            assert_eq!(run.epochs_used, 4);
            assert_eq!(run.train_seconds, 4.0);
            assert_eq!(run.validation_seconds, 4.0);
            assert!(!run.reached_target);
        }
        assert_eq!(clock.reads(), 2 * 4 * 4);
        // were validation wrongly inside the train pair, each epoch would
        // bill 3 steps instead of 1
        assert_eq!(result.mean_seconds, 4.0);
    }

    #[test]
    fn absurd_learning_rate_records_a_failed_run_with_a_reason() {
        let data = synthetic_dataset(80, 9);
        let opts = TrainOptions {
            learning_rate: 1e308,
            max_epochs: 3,
            runs: 1,
            validation_size: 16,
            ..TrainOptions::default()
        };
        let result =
            train_to_threshold(&small_config(ActivationKind::Identity), &data, &opts).unwrap();
        let run = &result.runs[0];
        assert!(!run.reached_target);
        assert!(run.failure.is_some(), "expected a recorded failure");
        assert!(result.any_run_failed);
    }

    #[test]
    fn identity_hidden_layers_still_learn_past_chance() {
        let data = synthetic_dataset(400, 10);
        let opts = TrainOptions {
            threshold: 1.5, // never met; we only want the accuracy after training
            max_epochs: 12,
            runs: 1,
            validation_size: 100,
            learning_rate: 0.2,
            ..TrainOptions::default()
        };
        let result =
            train_to_threshold(&small_config(ActivationKind::Identity), &data, &opts).unwrap();
        assert!(
            result.runs[0].final_accuracy > 0.3,
            "accuracy {}",
            result.runs[0].final_accuracy
        );
    }

    #[test]
    fn training_is_deterministic_apart_from_the_clock() {
        let data = synthetic_dataset(100, 11);
        let opts = TrainOptions {
            max_epochs: 3,
            runs: 2,
            validation_size: 20,
            threshold: 0.95,
            ..TrainOptions::default()
        };
        let a = train_to_threshold(&small_config(ActivationKind::Softsign), &data, &opts).unwrap();
        let b = train_to_threshold(&small_config(ActivationKind::Softsign), &data, &opts).unwrap();
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(ra.epochs_used, rb.epochs_used);
            assert_eq!(ra.final_accuracy, rb.final_accuracy);
            assert_eq!(ra.reached_target, rb.reached_target);
        }
    }

    #[test]
    fn oversized_validation_split_is_rejected() {
        let data = synthetic_dataset(50, 12);
        let opts = TrainOptions {
            validation_size: 50,
            ..TrainOptions::default()
        };
        assert!(matches!(
            train_to_threshold(&small_config(ActivationKind::ReLU), &data, &opts),
            Err(MnistError::InvalidSetup(_))
        ));
    }

    #[test]
    fn csv_emissions_have_the_documented_shapes() {
        let data = synthetic_dataset(400, 13);
        let opts = TrainOptions {
            threshold: 0.0,
            runs: 2,
            validation_size: 100,
            ..TrainOptions::default()
        };
        let result =
            train_to_threshold(&small_config(ActivationKind::GELU), &data, &opts).unwrap();
        let mut per_run = Vec::new();
        write_train_csv(std::slice::from_ref(&result), &mut per_run).unwrap();
        let text = String::from_utf8(per_run).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "function,run,epochs,reached,seconds");
        assert!(lines.next().unwrap().starts_with("GELU,0,1,true,"));
        assert!(lines.next().unwrap().starts_with("GELU,1,1,true,"));

        let mut summary = Vec::new();
        write_train_summary_csv(std::slice::from_ref(&result), &mut summary).unwrap();
        let text = String::from_utf8(summary).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "function,mean_seconds,sd_seconds,failed");
        assert!(lines.next().unwrap().ends_with(",false"));
    }
}
