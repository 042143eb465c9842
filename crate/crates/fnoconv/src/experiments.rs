//! Dataset ingestion, the training loop, and the two sweep experiments:
//! accuracy versus evaluation resolution and accuracy versus kernel size /
//! spectral mode count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::convert::{cnn_to_fno_at, fno_to_cnn, truncate_modes};
use crate::error::{Error, Result};
use crate::grids::RealGrid;
use crate::nn::{
    cross_entropy, init_model, Activation, Kernel, LayerSpec, Model, ModelGrads, Sgd,
};
use crate::resample::{bilinear_resample, trig_resample};

fn trig_resample_or_id(v: &RealGrid, n: usize) -> RealGrid {
    if v.n() == n {
        v.clone()
    } else {
        trig_resample(v, n)
    }
}

// Desk-scale defaults.
pub const DEFAULT_TRAIN_SUBSET: usize = 6000;
pub const DEFAULT_TEST_SUBSET: usize = 1000;
pub const DEFAULT_EPOCHS: usize = 5;
pub const DEFAULT_BATCH: usize = 64;
pub const DEFAULT_LR: f64 = 0.05;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_POOL: usize = 4;
// At desk scale the locality distortion that degrades off-resolution CNN
// accuracy needs a moderately large kernel to show clearly; accuracy itself
// is flat across kernel sizes 3..9 on this data.
pub const DEFAULT_KERNEL_SIZE: usize = 7;
pub const DEFAULT_RESOLUTIONS: [usize; 5] = [14, 20, 28, 40, 56];

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<RealGrid>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub native_n: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Seeded random subset without replacement.
    pub fn subset(&self, count: usize, seed: u64) -> Dataset {
        let count = count.min(self.len());
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        idx.truncate(count);
        Dataset {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            native_n: self.native_n,
        }
    }
}

fn read_be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let b: [u8; 4] = bytes
        .get(at..at + 4)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| Error::Format("truncated IDX header".into()))?;
    Ok(u32::from_be_bytes(b))
}

/// FashionMNIST channel statistics; inputs are normalized to roughly zero
/// mean and unit variance, which the fixed learning rate relies on.
pub const FMNIST_MEAN: f64 = 0.2860;
pub const FMNIST_STD: f64 = 0.3530;

/// Parse a big-endian IDX image/label file pair into a dataset with pixel
/// values mapped to [0, 1] and then mean/std normalized.
pub fn load_idx(images_path: &std::path::Path, labels_path: &std::path::Path) -> Result<Dataset> {
    let img = std::fs::read(images_path)?;
    let lab = std::fs::read(labels_path)?;
    if read_be_u32(&img, 0)? != 0x0000_0803 {
        return Err(Error::Format(format!(
            "bad image magic in {}",
            images_path.display()
        )));
    }
    if read_be_u32(&lab, 0)? != 0x0000_0801 {
        return Err(Error::Format(format!(
            "bad label magic in {}",
            labels_path.display()
        )));
    }
    let count = read_be_u32(&img, 4)? as usize;
    let rows = read_be_u32(&img, 8)? as usize;
    let cols = read_be_u32(&img, 12)? as usize;
    if rows != cols {
        return Err(Error::Format(format!(
            "non-square images {rows}x{cols} are not supported"
        )));
    }
    let lab_count = read_be_u32(&lab, 4)? as usize;
    if lab_count != count {
        return Err(Error::Format(format!(
            "image count {count} does not match label count {lab_count}"
        )));
    }
    let pixels = &img[16..];
    if pixels.len() < count * rows * cols {
        return Err(Error::Format("truncated IDX image payload".into()));
    }
    let labels_raw = &lab[8..];
    if labels_raw.len() < count {
        return Err(Error::Format("truncated IDX label payload".into()));
    }
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut n_classes = 0usize;
    for i in 0..count {
        let data: Vec<f64> = pixels[i * rows * cols..(i + 1) * rows * cols]
            .iter()
            .map(|&b| (b as f64 / 255.0 - FMNIST_MEAN) / FMNIST_STD)
            .collect();
        images.push(RealGrid::from_vec(rows, 1, data)?);
        let l = labels_raw[i] as usize;
        n_classes = n_classes.max(l + 1);
        labels.push(l);
    }
    Ok(Dataset {
        images,
        labels,
        n_classes,
        native_n: rows,
    })
}

// ---------------------------------------------------------------------------
// Model construction and conversion

/// The default desk-scale feature extractor: two conv layers (8 then 16
/// channels) with GELU, adaptive pooling, linear classifier.
pub fn default_specs(kernel_size: usize, spectral: bool) -> Vec<LayerSpec> {
    vec![
        LayerSpec {
            m: kernel_size,
            c_out: 8,
            spectral,
            activation: Activation::Gelu,
        },
        LayerSpec {
            m: kernel_size,
            c_out: 16,
            spectral,
            activation: Activation::Gelu,
        },
    ]
}

pub fn default_model(seed: u64, kernel_size: usize, spectral: bool, n_classes: usize) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_model(
        &mut rng,
        1,
        &default_specs(kernel_size, spectral),
        DEFAULT_POOL,
        n_classes,
        vec![],
    )
}

/// Convert every spatial layer to its exactly equivalent spectral form at
/// evaluation dimension `n_eval`, optionally truncating to `modes` (odd).
pub fn convert_model_to_fno(m: &Model, n_eval: usize, modes: Option<usize>) -> Result<Model> {
    let mut out = m.clone();
    for p in &mut out.layers {
        if let Kernel::Spatial(k) = &p.kernel {
            let mut khat = cnn_to_fno_at(k, n_eval)?;
            if let Some(t) = modes {
                khat = truncate_modes(&khat, t)?;
            }
            p.kernel = Kernel::Spectral(khat);
        }
    }
    Ok(out)
}

/// Convert every spectral layer back to a spatial kernel on `J_n` (odd `n`).
pub fn convert_model_to_cnn(m: &Model, n: usize) -> Result<Model> {
    let mut out = m.clone();
    for p in &mut out.layers {
        if let Kernel::Spectral(k) = &p.kernel {
            p.kernel = Kernel::Spatial(fno_to_cnn(k, n)?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            lr: DEFAULT_LR,
            momentum: DEFAULT_MOMENTUM,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Minibatch SGD over the dataset; deterministic for a given seed.
pub fn train(model: &mut Model, d: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochMetrics>> {
    model.validate()?;
    let mut opt = Sgd::new(model, cfg.lr, cfg.momentum);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut step = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = ModelGrads::zeros_like(model);
            for &i in batch {
                let (logits, cache) = model.forward_cached(&d.images[i])?;
                let (loss, dlogits) = cross_entropy(&logits, d.labels[i]);
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, step });
                }
                loss_sum += loss;
                if argmax(&logits) == d.labels[i] {
                    correct += 1;
                }
                acc.add_assign(&model.backward(&cache, &dlogits)?);
            }
            acc.scale(1.0 / batch.len() as f64);
            opt.step(model, &acc);
            step += 1;
        }
        let m = EpochMetrics {
            epoch,
            mean_loss: loss_sum / d.len().max(1) as f64,
            accuracy: correct as f64 / d.len().max(1) as f64,
        };
        log::info!(
            "epoch {} mean_loss {:.4} accuracy {:.4}",
            m.epoch,
            m.mean_loss,
            m.accuracy
        );
        metrics.push(m);
    }
    Ok(metrics)
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resize {
    Trig,
    Bilinear,
    None,
}

impl Resize {
    pub fn name(self) -> &'static str {
        match self {
            Resize::Trig => "trig",
            Resize::Bilinear => "bilinear",
            Resize::None => "none",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "trig" => Ok(Resize::Trig),
            "bilinear" => Ok(Resize::Bilinear),
            "none" => Ok(Resize::None),
            other => Err(Error::Config(format!("unknown resize method {other:?}"))),
        }
    }

    pub fn apply(self, v: &RealGrid, n: usize) -> RealGrid {
        match self {
            Resize::Trig => trig_resample_or_id(v, n),
            Resize::Bilinear => {
                if n == v.n() {
                    v.clone()
                } else {
                    bilinear_resample(v, n)
                }
            }
            Resize::None => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplTag {
    Cnn,
    Fno,
    TrigFirst,
}

impl ImplTag {
    pub fn name(self) -> &'static str {
        match self {
            ImplTag::Cnn => "cnn",
            ImplTag::Fno => "fno",
            ImplTag::TrigFirst => "trig-first",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(ImplTag::Cnn),
            "fno" => Ok(ImplTag::Fno),
            "trig-first" => Ok(ImplTag::TrigFirst),
            other => Err(Error::Config(format!("unknown impl tag {other:?}"))),
        }
    }
}

/// Mean loss and accuracy of `model` over `d` with test images brought to
/// `resolution` by `resize`. `ImplTag::TrigFirst` additionally resamples the
/// model input back to `n_train` before the forward pass.
pub fn evaluate(
    model: &Model,
    d: &Dataset,
    resolution: usize,
    resize: Resize,
    imp: ImplTag,
    n_train: usize,
) -> Result<(f64, f64)> {
    model.validate()?;
    let results = par_map_images(d, |img, label| {
        let mut v = resize.apply(img, resolution);
        if imp == ImplTag::TrigFirst {
            v = trig_resample_or_id(&v, n_train);
        }
        let logits = model.forward(&v)?;
        let (loss, _) = cross_entropy(&logits, label);
        Ok((loss, argmax(&logits) == label))
    })?;
    let loss_sum: f64 = results.iter().map(|(l, _)| l).sum();
    let correct = results.iter().filter(|(_, c)| *c).count();
    let n = d.len().max(1) as f64;
    Ok((correct as f64 / n, loss_sum / n))
}

/// Deterministic parallel map over the dataset: results are collected by
/// image index, so the reduction order never depends on thread scheduling.
fn par_map_images<F>(d: &Dataset, f: F) -> Result<Vec<(f64, bool)>>
where
    F: Fn(&RealGrid, usize) -> Result<(f64, bool)> + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(d.len().max(1));
    let mut results: Vec<Option<(f64, bool)>> = vec![None; d.len()];
    let chunk = d.len().div_ceil(threads.max(1)).max(1);
    std::thread::scope(|s| -> Result<()> {
        let mut handles = Vec::new();
        for (t, out_chunk) in results.chunks_mut(chunk).enumerate() {
            let start = t * chunk;
            let f = &f;
            handles.push(s.spawn(move || -> Result<()> {
                for (j, slot) in out_chunk.iter_mut().enumerate() {
                    let i = start + j;
                    *slot = Some(f(&d.images[i], d.labels[i])?);
                }
                Ok(())
            }));
        }
        for h in handles {
            h.join().expect("eval thread panicked")?;
        }
        Ok(())
    })?;
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub experiment: String,
    pub method: String,
    pub resize: String,
    pub kernel_size: usize,
    /// 0 means not applicable / full support.
    pub modes: usize,
    pub resolution: usize,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<EvalRow>,
}

impl SweepResult {
    /// CSV with the fixed schema; `comments` are echoed as `#` lines first.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("experiment,method,resize,kernel_size,modes,resolution,accuracy,mean_loss,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.experiment,
                r.method,
                r.resize,
                r.kernel_size,
                r.modes,
                r.resolution,
                r.accuracy,
                r.mean_loss,
                r.seed
            ));
        }
        out
    }
}

/// Accuracy versus evaluation resolution for the cnn / fno / trig-first
/// implementations of a trained spatial model.
pub fn sweep_resolution(
    model: &Model,
    d: &Dataset,
    resolutions: &[usize],
    resizes: &[Resize],
    n_train: usize,
    kernel_size: usize,
    seed: u64,
) -> Result<SweepResult> {
    let fno = convert_model_to_fno(model, n_train, None)?;
    let mut rows = Vec::new();
    for &resize in resizes {
        for &res in resolutions {
            for imp in [ImplTag::Cnn, ImplTag::Fno, ImplTag::TrigFirst] {
                let m = match imp {
                    ImplTag::Fno => &fno,
                    _ => model,
                };
                let (accuracy, mean_loss) = evaluate(m, d, res, resize, imp, n_train)?;
                rows.push(EvalRow {
                    experiment: "resolution".into(),
                    method: imp.name().into(),
                    resize: resize.name().into(),
                    kernel_size,
                    modes: 0,
                    resolution: res,
                    accuracy,
                    mean_loss,
                    seed,
                });
                log::info!(
                    "resolution sweep: {} resize={} res={} acc={:.4}",
                    imp.name(),
                    resize.name(),
                    res,
                    accuracy
                );
            }
        }
    }
    Ok(SweepResult { rows })
}

/// Accuracy versus kernel size and spectral mode count: trains one CNN per
/// kernel size, converts it with each truncation, and optionally trains an
/// FNO of the same mode count directly.
pub fn sweep_kernel_size(
    train_set: &Dataset,
    test_set: &Dataset,
    kernel_sizes: &[usize],
    mode_counts: &[usize],
    train_fno: bool,
    cfg: &TrainConfig,
) -> Result<SweepResult> {
    let n_train = train_set.native_n;
    let mut rows = Vec::new();
    let mut push = |method: &str, k: usize, modes: usize, acc: f64, loss: f64| {
        rows.push(EvalRow {
            experiment: "kernel".into(),
            method: method.into(),
            resize: "none".into(),
            kernel_size: k,
            modes,
            resolution: n_train,
            accuracy: acc,
            mean_loss: loss,
            seed: cfg.seed,
        });
    };
    for &k in kernel_sizes {
        let mut cnn = default_model(cfg.seed, k, false, train_set.n_classes);
        train(&mut cnn, train_set, cfg)?;
        let (acc, loss) = evaluate(&cnn, test_set, n_train, Resize::None, ImplTag::Cnn, n_train)?;
        push("cnn", k, 0, acc, loss);
        log::info!("kernel sweep: cnn k={k} acc={acc:.4}");
        for &modes in mode_counts {
            let fno = convert_model_to_fno(&cnn, n_train, Some(modes))?;
            let (acc, loss) =
                evaluate(&fno, test_set, n_train, Resize::None, ImplTag::Fno, n_train)?;
            push("converted-fno", k, modes, acc, loss);
            log::info!("kernel sweep: converted-fno k={k} modes={modes} acc={acc:.4}");
            if train_fno {
                let mut direct = default_model(cfg.seed, modes, true, train_set.n_classes);
                train(&mut direct, train_set, cfg)?;
                let (acc, loss) =
                    evaluate(&direct, test_set, n_train, Resize::None, ImplTag::Fno, n_train)?;
                push("trained-fno", k, modes, acc, loss);
                log::info!("kernel sweep: trained-fno modes={modes} acc={acc:.4}");
            }
        }
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::testutil::random_grid;

    fn write_fixture(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let img_path = dir.join("img-idx3");
        let lab_path = dir.join("lab-idx1");
        let mut img: Vec<u8> = Vec::new();
        img.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&2u32.to_be_bytes());
        img.extend_from_slice(&[0, 51, 102, 255, 10, 20, 30, 40]);
        let mut lab: Vec<u8> = Vec::new();
        lab.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&[9, 0]);
        std::fs::write(&img_path, &img).unwrap();
        std::fs::write(&lab_path, &lab).unwrap();
        (img_path, lab_path)
    }

    fn synthetic_dataset(rng: &mut ChaCha8Rng, count: usize, n: usize, classes: usize) -> Dataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..count {
            images.push(random_grid(rng, n, 1));
            labels.push(i % classes);
        }
        Dataset {
            images,
            labels,
            n_classes: classes,
            native_n: n,
        }
    }

    fn tiny_model(seed: u64, spectral: bool, classes: usize) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = [
            LayerSpec {
                m: 3,
                c_out: 2,
                spectral,
                activation: Activation::Gelu,
            },
            LayerSpec {
                m: 3,
                c_out: 4,
                spectral,
                activation: Activation::Gelu,
            },
        ];
        init_model(&mut rng, 1, &specs, 2, classes, vec![])
    }

    #[test]
    fn load_idx_fixture() {
        let dir = std::env::temp_dir().join("fnoconv-idx-test");
        std::fs::create_dir_all(&dir).unwrap();
        let (img, lab) = write_fixture(&dir);
        let d = load_idx(&img, &lab).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.native_n, 2);
        assert_eq!(d.labels, vec![9, 0]);
        assert_eq!(d.n_classes, 10);
        assert_eq!(d.images[0].get(0, 0, 1), (51.0 / 255.0 - FMNIST_MEAN) / FMNIST_STD);
        assert_eq!(d.images[0].get(0, 1, 1), (1.0 - FMNIST_MEAN) / FMNIST_STD);
        assert_eq!(d.images[1].get(0, 0, 0), (10.0 / 255.0 - FMNIST_MEAN) / FMNIST_STD);

        // Wrong magic.
        let mut broken = std::fs::read(&img).unwrap();
        broken[3] = 0x01;
        let bad = dir.join("bad");
        std::fs::write(&bad, &broken).unwrap();
        assert!(load_idx(&bad, &lab).is_err());

        // Truncated payload.
        let data = std::fs::read(&img).unwrap();
        std::fs::write(&bad, &data[..data.len() - 2]).unwrap();
        assert!(load_idx(&bad, &lab).is_err());

        // Count mismatch.
        let mut lab3 = std::fs::read(&lab).unwrap();
        lab3[7] = 3;
        lab3.push(1);
        std::fs::write(&bad, &lab3).unwrap();
        assert!(load_idx(&img, &bad).is_err());
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let d = synthetic_dataset(&mut rng, 4, 8, 3);
        let mut m = tiny_model(1, false, 3);
        let orig = m.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let metrics = train(&mut m, &d, &cfg).unwrap();
        assert!(metrics.is_empty());
        assert_eq!(m, orig);
    }

    #[test]
    fn single_sample_overfit() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let d = synthetic_dataset(&mut rng, 1, 8, 3);
        for spectral in [false, true] {
            let mut m = tiny_model(2, spectral, 3);
            let cfg = TrainConfig {
                epochs: 200,
                batch_size: 1,
                lr: 0.05,
                momentum: 0.9,
                seed: 7,
            };
            train(&mut m, &d, &cfg).unwrap();
            let logits = m.forward(&d.images[0]).unwrap();
            let (loss, _) = cross_entropy(&logits, d.labels[0]);
            assert!(loss < 0.01, "spectral={spectral} loss={loss}");
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let d = synthetic_dataset(&mut rng, 12, 8, 3);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let mut a = tiny_model(3, false, 3);
        let mut b = tiny_model(3, false, 3);
        train(&mut a, &d, &cfg).unwrap();
        train(&mut b, &d, &cfg).unwrap();
        assert_eq!(
            crate::nn::checkpoint_string(&a),
            crate::nn::checkpoint_string(&b)
        );
    }

    #[test]
    fn bias_only_model_accuracy_is_label_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let d = synthetic_dataset(&mut rng, 9, 8, 3);
        let mut m = tiny_model(4, false, 3);
        for p in &mut m.layers {
            if let Kernel::Spatial(k) = &mut p.kernel {
                k.weights_mut().iter_mut().for_each(|x| *x = 0.0);
            }
            p.w_mix.iter_mut().for_each(|x| *x = 0.0);
            p.bias.iter_mut().for_each(|x| *x = 0.0);
        }
        m.classifier_w.iter_mut().for_each(|x| *x = 0.0);
        m.classifier_b = vec![0.0, 0.0, 5.0];
        let (acc, _) = evaluate(&m, &d, 8, Resize::None, ImplTag::Cnn, 8).unwrap();
        let freq = d.labels.iter().filter(|&&l| l == 2).count() as f64 / d.len() as f64;
        assert_eq!(acc, freq);
    }

    #[test]
    fn resize_none_at_native_matches_plain_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(84);
        let d = synthetic_dataset(&mut rng, 3, 8, 3);
        let m = tiny_model(5, false, 3);
        let (acc, loss) = evaluate(&m, &d, 8, Resize::None, ImplTag::Cnn, 8).unwrap();
        let mut loss2 = 0.0;
        let mut correct = 0;
        for i in 0..d.len() {
            let logits = m.forward(&d.images[i]).unwrap();
            let (l, _) = cross_entropy(&logits, d.labels[i]);
            loss2 += l;
            if argmax(&logits) == d.labels[i] {
                correct += 1;
            }
        }
        assert_eq!(loss, loss2 / d.len() as f64);
        assert_eq!(acc, correct as f64 / d.len() as f64);
    }

    #[test]
    fn converted_model_matches_cnn_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(85);
        let d = synthetic_dataset(&mut rng, 6, 8, 3);
        let mut m = tiny_model(6, false, 3);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            ..TrainConfig::default()
        };
        train(&mut m, &d, &cfg).unwrap();
        let fno = convert_model_to_fno(&m, 8, None).unwrap();
        for img in &d.images {
            let a = m.forward(img).unwrap();
            let b = fno.forward(img).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn trig_first_on_trig_upsampled_input_recovers_native_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(86);
        let native = synthetic_dataset(&mut rng, 4, 8, 3);
        let m = tiny_model(7, false, 3);
        let (acc_native, loss_native) =
            evaluate(&m, &native, 8, Resize::None, ImplTag::Cnn, 8).unwrap();
        let (acc_tf, loss_tf) =
            evaluate(&m, &native, 12, Resize::Trig, ImplTag::TrigFirst, 8).unwrap();
        assert_eq!(acc_native, acc_tf);
        assert!((loss_native - loss_tf).abs() <= 1e-9);
    }

    #[test]
    fn sweep_rows_match_individual_evaluate_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(87);
        let d = synthetic_dataset(&mut rng, 4, 8, 3);
        let m = tiny_model(8, false, 3);
        let sweep =
            sweep_resolution(&m, &d, &[8, 12], &[Resize::Trig], 8, 3, 42).unwrap();
        assert_eq!(sweep.rows.len(), 6);
        for row in &sweep.rows {
            let imp = ImplTag::from_name(&row.method).unwrap();
            let model = if imp == ImplTag::Fno {
                convert_model_to_fno(&m, 8, None).unwrap()
            } else {
                m.clone()
            };
            let (acc, loss) =
                evaluate(&model, &d, row.resolution, Resize::Trig, imp, 8).unwrap();
            assert_eq!(row.accuracy, acc);
            assert_eq!(row.mean_loss, loss);
        }
        let csv = sweep.to_csv(&["seed=42".into()]);
        assert!(csv.starts_with("# seed=42\nexperiment,method,"));
        assert_eq!(csv.lines().count(), 2 + 6);
    }
}
