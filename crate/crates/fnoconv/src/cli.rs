//! Command-line interface: training, evaluation, conversion, the two sweep
//! experiments, PGM resizing, and a selftest runner. Flags override `--config`
//! key=value files and every resolved setting is echoed as `#` comment lines
//! into the output CSVs.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::convert::{fno_to_cnn, truncate_modes};
use crate::error::{Error, Result};
use crate::experiments::{
    convert_model_to_fno, default_model, evaluate, load_idx, sweep_kernel_size, sweep_resolution,
    train, Dataset, ImplTag, Resize, SweepResult, TrainConfig, DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_KERNEL_SIZE,
    DEFAULT_LR, DEFAULT_MOMENTUM, DEFAULT_RESOLUTIONS, DEFAULT_SEED, DEFAULT_TEST_SUBSET,
    DEFAULT_TRAIN_SUBSET,
};
use crate::grids::RealGrid;
use crate::nn::{load_checkpoint, save_checkpoint, Kernel};
use crate::resample::{bilinear_resample, trig_resample};

#[derive(Parser)]
#[command(name = "fnoconv", about = "Spatial and spectral periodic convolution models")]
pub struct Cli {
    /// key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train a model and write a checkpoint plus per-epoch metrics.
    Train {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        train_subset: Option<usize>,
        #[arg(long)]
        kernel_size: Option<usize>,
        /// cnn trains spatial kernels, fno trains spectral ones.
        #[arg(long, value_name = "cnn|fno")]
        r#impl: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on resized test data.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        test_subset: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, value_name = "trig|bilinear|none")]
        resize: Option<String>,
        #[arg(long, value_name = "cnn|fno|trig-first")]
        r#impl: Option<String>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a checkpoint between parametrizations.
    Convert {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_name = "fno|cnn")]
        to: String,
        /// Spectral mode truncation (odd); omit for full support.
        #[arg(long)]
        modes: Option<usize>,
        /// Grid dimension the conversion targets.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Accuracy versus evaluation resolution for cnn / fno / trig-first.
    SweepResolution {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        test_subset: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated list.
        #[arg(long)]
        resolutions: Option<String>,
        #[arg(long, value_name = "trig|bilinear")]
        resize: Option<String>,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Accuracy versus kernel size and spectral mode count.
    SweepKernel {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        #[arg(long)]
        train_subset: Option<usize>,
        #[arg(long)]
        test_subset: Option<usize>,
        /// Comma-separated list.
        #[arg(long)]
        kernel_sizes: Option<String>,
        /// Comma-separated list of odd mode counts.
        #[arg(long)]
        mode_counts: Option<String>,
        /// Also train an FNO directly per mode count.
        #[arg(long)]
        train_fno: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Resample a PGM image.
    Resize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        to: usize,
        #[arg(long, value_name = "trig|bilinear")]
        method: Option<String>,
    },
    /// Run the quick invariant suites.
    Selftest,
}

// ---------------------------------------------------------------------------
// Config resolution

const ALLOWED_KEYS: &[&str] = &[
    "data-dir",
    "seed",
    "epochs",
    "batch",
    "lr",
    "momentum",
    "train-subset",
    "test-subset",
    "kernel-size",
    "kernel-sizes",
    "mode-counts",
    "modes",
    "impl",
    "resize",
    "resolution",
    "resolutions",
    "n-train",
    "n",
    "method",
    "out",
    "metrics",
    "plot",
    "train-fno",
];

/// Merges a key=value config file under command-line flags and records the
/// fully resolved settings for echoing into outputs.
pub struct Resolver {
    file: HashMap<String, String>,
    resolved: Vec<String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let mut file = HashMap::new();
        if let Some(path) = config {
            for (lineno, line) in std::fs::read_to_string(path)?.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!("config line {} is not key=value", lineno + 1))
                })?;
                let k = k.trim();
                if !ALLOWED_KEYS.contains(&k) {
                    return Err(Error::Config(format!("unknown config key {k:?}")));
                }
                file.insert(k.to_string(), v.trim().to_string());
            }
        }
        Ok(Self {
            file,
            resolved: Vec::new(),
        })
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push(format!("{key}={value}"));
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display + Clone,
    {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<T>()
                    .map_err(|_| Error::Config(format!("bad value {raw:?} for {key}")))?,
                None => default,
            },
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(
                    raw.parse::<T>()
                        .map_err(|_| Error::Config(format!("bad value {raw:?} for {key}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn get_path(&mut self, key: &str, flag: Option<PathBuf>, default: PathBuf) -> Result<PathBuf> {
        let v = flag
            .or_else(|| self.file.get(key).map(PathBuf::from))
            .unwrap_or(default);
        self.record(key, v.display());
        Ok(v)
    }

    pub fn get_path_opt(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(v) = &v {
            self.record(key, v.display());
        }
        Ok(v)
    }

    pub fn get_list(&mut self, key: &str, flag: Option<String>, default: &[usize]) -> Result<Vec<usize>> {
        let raw = match flag {
            Some(s) => s,
            None => match self.file.get(key) {
                Some(s) => s.clone(),
                None => default
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            },
        };
        let list: Vec<usize> = raw
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad list entry {t:?} for {key}")))
            })
            .collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(Error::Config(format!("empty list for {key}")));
        }
        self.record(key, raw);
        Ok(list)
    }

    pub fn comments(&self) -> Vec<String> {
        self.resolved.clone()
    }
}

// ---------------------------------------------------------------------------
// PGM I/O

/// Read a binary PGM (P5, maxval 255) into a single-channel grid with raw
/// 0..=255 values.
pub fn read_pgm(path: &Path) -> Result<RealGrid> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0usize;
    let mut fields = Vec::new();
    while fields.len() < 4 {
        if pos >= bytes.len() {
            return Err(Error::Format("truncated PGM header".into()));
        }
        match bytes[pos] {
            b'#' => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => pos += 1,
            _ => {
                let start = pos;
                while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                fields.push(
                    std::str::from_utf8(&bytes[start..pos])
                        .map_err(|_| Error::Format("non-ASCII PGM header".into()))?
                        .to_string(),
                );
            }
        }
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("not a binary PGM: magic {:?}", fields[0])));
    }
    let width: usize = fields[1]
        .parse()
        .map_err(|_| Error::Format("bad PGM width".into()))?;
    let height: usize = fields[2]
        .parse()
        .map_err(|_| Error::Format("bad PGM height".into()))?;
    let maxval: usize = fields[3]
        .parse()
        .map_err(|_| Error::Format("bad PGM maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    if width != height {
        return Err(Error::Format(format!(
            "only square images are supported, got {width}x{height}"
        )));
    }
    pos += 1; // single whitespace after maxval
    let need = width * height;
    let data = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::Format("truncated PGM payload".into()))?;
    RealGrid::from_vec(width, 1, data.iter().map(|&b| b as f64).collect())
}

/// Write a grid of raw grayscale values as binary PGM, clamping and rounding
/// to 0..=255.
pub fn write_pgm(path: &Path, v: &RealGrid) -> Result<()> {
    if v.channels() != 1 {
        return Err(Error::InvalidDimension("PGM output requires 1 channel".into()));
    }
    let n = v.n();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(v.data().iter().map(|&x| x.round().clamp(0.0, 255.0) as u8));
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG plotting

/// Minimal multi-series line chart; returns a standalone SVG document.
pub fn svg_line_chart(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 60.0;
    const MR: f64 = 150.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;
    const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    let (mut y0, mut y1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1), b.max(p.1))
        });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        title
    ));
    // Axes.
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    s.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n<text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\" font-size=\"11\">{4:.3}</text>\n",
            sx(fx),
            H - MB,
            H - MB + 5.0,
            H - MB + 18.0,
            fx
        ));
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n<text x=\"{3}\" y=\"{4}\" text-anchor=\"end\" font-size=\"11\">{5:.3}</text>\n",
            ML - 5.0,
            sy(fy),
            ML,
            ML - 8.0,
            sy(fy) + 4.0,
            fy
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 10.0,
        xlabel
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        ylabel
    ));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            path.join(" "),
            color
        ));
        for &(x, y) in pts {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                sx(x),
                sy(y),
                color
            ));
        }
        let ly = MT + 16.0 * i as f64;
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{2}\" stroke-width=\"2\"/>\n<text x=\"{3}\" y=\"{4}\" font-size=\"12\">{5}</text>\n",
            W - MR + 10.0,
            W - MR + 34.0,
            color,
            W - MR + 40.0,
            ly + 4.0,
            name
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn sweep_plot(result: &SweepResult, x_from_modes: bool) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in &result.rows {
        let name = if x_from_modes && row.method != "cnn" {
            format!("{} k={}", row.method, row.kernel_size)
        } else {
            format!("{} ({})", row.method, row.resize)
        };
        let x = if x_from_modes {
            row.modes as f64
        } else {
            row.resolution as f64
        };
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, pts)) => pts.push((x, row.accuracy)),
            None => series.push((name, vec![(x, row.accuracy)])),
        }
    }
    for (_, pts) in &mut series {
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    let (title, xlabel) = if x_from_modes {
        ("accuracy vs modes", "modes")
    } else {
        ("accuracy vs resolution", "resolution")
    };
    svg_line_chart(title, xlabel, "accuracy", &series)
}

// ---------------------------------------------------------------------------
// Command implementations

fn load_train_set(dir: &Path, subset: usize, seed: u64) -> Result<Dataset> {
    let d = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    Ok(d.subset(subset, seed))
}

fn load_test_set(dir: &Path, subset: usize, seed: u64) -> Result<Dataset> {
    let d = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok(d.subset(subset, seed))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut r = Resolver::new(cli.config.as_deref())?;
    match cli.command {
        Command::Train {
            data_dir,
            seed,
            epochs,
            batch,
            lr,
            momentum,
            train_subset,
            kernel_size,
            r#impl,
            out,
            metrics,
        } => {
            let data_dir = r.get_path("data-dir", data_dir, PathBuf::from("data"))?;
            let seed = r.get("seed", seed, DEFAULT_SEED)?;
            let cfg = TrainConfig {
                epochs: r.get("epochs", epochs, DEFAULT_EPOCHS)?,
                batch_size: r.get("batch", batch, DEFAULT_BATCH)?,
                lr: r.get("lr", lr, DEFAULT_LR)?,
                momentum: r.get("momentum", momentum, DEFAULT_MOMENTUM)?,
                seed,
            };
            let subset = r.get("train-subset", train_subset, DEFAULT_TRAIN_SUBSET)?;
            let kernel_size = r.get("kernel-size", kernel_size, DEFAULT_KERNEL_SIZE)?;
            let imp = r.get("impl", r#impl, "cnn".to_string())?;
            let spectral = match imp.as_str() {
                "cnn" => false,
                "fno" => true,
                other => return Err(Error::Config(format!("impl must be cnn or fno, got {other:?}"))),
            };
            let out = r.get_path("out", out, PathBuf::from("model.ckpt"))?;
            let metrics_path = r.get_path_opt("metrics", metrics)?;
            log::info!("resolved config: {}", r.comments().join(" "));
            let train_set = load_train_set(&data_dir, subset, seed)?;
            let mut model = default_model(seed, kernel_size, spectral, train_set.n_classes);
            let history = train(&mut model, &train_set, &cfg)?;
            save_checkpoint(&model, &out)?;
            if let Some(path) = metrics_path {
                let mut csv = String::new();
                for c in r.comments() {
                    csv.push_str(&format!("# {c}\n"));
                }
                csv.push_str("epoch,mean_loss,accuracy\n");
                for m in &history {
                    csv.push_str(&format!("{},{},{}\n", m.epoch, m.mean_loss, m.accuracy));
                }
                write_text(&path, &csv)?;
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Eval {
            ckpt,
            data_dir,
            test_subset,
            seed,
            resolution,
            resize,
            r#impl,
            n_train,
            out,
        } => {
            let data_dir = r.get_path("data-dir", data_dir, PathBuf::from("data"))?;
            let seed = r.get("seed", seed, DEFAULT_SEED)?;
            let subset = r.get("test-subset", test_subset, DEFAULT_TEST_SUBSET)?;
            let model = load_checkpoint(&ckpt)?;
            let test_set = load_test_set(&data_dir, subset, seed)?;
            let resolution = r.get("resolution", resolution, test_set.native_n)?;
            let resize = Resize::from_name(&r.get("resize", resize, "none".to_string())?)?;
            let imp = ImplTag::from_name(&r.get("impl", r#impl, "cnn".to_string())?)?;
            let n_train = r.get("n-train", n_train, test_set.native_n)?;
            let out_path = r.get_path_opt("out", out)?;
            log::info!("resolved config: {}", r.comments().join(" "));
            let eval_model = if imp == ImplTag::Fno
                && model.layers.iter().any(|p| matches!(p.kernel, Kernel::Spatial(_)))
            {
                convert_model_to_fno(&model, n_train, None)?
            } else {
                model
            };
            let (accuracy, mean_loss) =
                evaluate(&eval_model, &test_set, resolution, resize, imp, n_train)?;
            println!("accuracy {accuracy} mean_loss {mean_loss}");
            if let Some(path) = out_path {
                let result = SweepResult {
                    rows: vec![crate::experiments::EvalRow {
                        experiment: "eval".into(),
                        method: imp.name().into(),
                        resize: resize.name().into(),
                        kernel_size: 0,
                        modes: 0,
                        resolution,
                        accuracy,
                        mean_loss,
                        seed,
                    }],
                };
                write_text(&path, &result.to_csv(&r.comments()))?;
            }
            Ok(())
        }
        Command::Convert {
            ckpt,
            out,
            to,
            modes,
            n,
        } => {
            let model = load_checkpoint(&ckpt)?;
            let converted = match to.as_str() {
                "fno" => {
                    let n = r.get("n", n, 28usize)?;
                    let modes = r.get_opt("modes", modes)?;
                    let mut m = convert_model_to_fno(&model, n, modes)?;
                    // Spectral sources are truncated in place.
                    if let Some(t) = modes {
                        for p in &mut m.layers {
                            if let Kernel::Spectral(k) = &p.kernel {
                                if k.m() != t {
                                    p.kernel = Kernel::Spectral(truncate_modes(k, t)?);
                                }
                            }
                        }
                    }
                    m
                }
                "cnn" => {
                    let n = r.get("n", n, 29usize)?;
                    if n % 2 == 0 {
                        return Err(Error::Config(format!(
                            "fno->cnn target dimension {n} is even; use {} instead",
                            n + 1
                        )));
                    }
                    let mut m = model.clone();
                    for p in &mut m.layers {
                        if let Kernel::Spectral(k) = &p.kernel {
                            p.kernel = Kernel::Spatial(fno_to_cnn(k, n)?);
                        }
                    }
                    m
                }
                other => {
                    return Err(Error::Config(format!("--to must be fno or cnn, got {other:?}")))
                }
            };
            save_checkpoint(&converted, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::SweepResolution {
            ckpt,
            data_dir,
            test_subset,
            seed,
            resolutions,
            resize,
            n_train,
            out,
            plot,
        } => {
            let data_dir = r.get_path("data-dir", data_dir, PathBuf::from("data"))?;
            let seed = r.get("seed", seed, DEFAULT_SEED)?;
            let subset = r.get("test-subset", test_subset, DEFAULT_TEST_SUBSET)?;
            let resolutions = r.get_list("resolutions", resolutions, &DEFAULT_RESOLUTIONS)?;
            let resize = Resize::from_name(&r.get("resize", resize, "trig".to_string())?)?;
            let model = load_checkpoint(&ckpt)?;
            let test_set = load_test_set(&data_dir, subset, seed)?;
            let n_train = r.get("n-train", n_train, test_set.native_n)?;
            let out_path = r.get_path("out", out, PathBuf::from("sweep_resolution.csv"))?;
            let plot_path = r.get_path_opt("plot", plot)?;
            log::info!("resolved config: {}", r.comments().join(" "));
            let kernel_size = model.layers.iter().map(|p| p.kernel.m()).max().unwrap_or(0);
            let result = sweep_resolution(
                &model,
                &test_set,
                &resolutions,
                &[resize],
                n_train,
                kernel_size,
                seed,
            )?;
            write_text(&out_path, &result.to_csv(&r.comments()))?;
            if let Some(p) = plot_path {
                write_text(&p, &sweep_plot(&result, false))?;
            }
            println!("wrote {}", out_path.display());
            Ok(())
        }
        Command::SweepKernel {
            data_dir,
            seed,
            epochs,
            batch,
            lr,
            momentum,
            train_subset,
            test_subset,
            kernel_sizes,
            mode_counts,
            train_fno,
            out,
            plot,
        } => {
            let data_dir = r.get_path("data-dir", data_dir, PathBuf::from("data"))?;
            let seed = r.get("seed", seed, DEFAULT_SEED)?;
            let cfg = TrainConfig {
                epochs: r.get("epochs", epochs, DEFAULT_EPOCHS)?,
                batch_size: r.get("batch", batch, DEFAULT_BATCH)?,
                lr: r.get("lr", lr, DEFAULT_LR)?,
                momentum: r.get("momentum", momentum, DEFAULT_MOMENTUM)?,
                seed,
            };
            let train_sub = r.get("train-subset", train_subset, DEFAULT_TRAIN_SUBSET)?;
            let test_sub = r.get("test-subset", test_subset, DEFAULT_TEST_SUBSET)?;
            let kernel_sizes = r.get_list("kernel-sizes", kernel_sizes, &[3, 5, 7, 9])?;
            let mode_counts = r.get_list("mode-counts", mode_counts, &[1, 3, 9, 29])?;
            let train_fno = r.get("train-fno", Some(train_fno), false)?;
            let out_path = r.get_path("out", out, PathBuf::from("sweep_kernel.csv"))?;
            let plot_path = r.get_path_opt("plot", plot)?;
            log::info!("resolved config: {}", r.comments().join(" "));
            let train_set = load_train_set(&data_dir, train_sub, seed)?;
            let test_set = load_test_set(&data_dir, test_sub, seed)?;
            let result = sweep_kernel_size(
                &train_set,
                &test_set,
                &kernel_sizes,
                &mode_counts,
                train_fno,
                &cfg,
            )?;
            write_text(&out_path, &result.to_csv(&r.comments()))?;
            if let Some(p) = plot_path {
                write_text(&p, &sweep_plot(&result, true))?;
            }
            println!("wrote {}", out_path.display());
            Ok(())
        }
        Command::Resize {
            input,
            out,
            to,
            method,
        } => {
            let method = r.get("method", method, "trig".to_string())?;
            let img = read_pgm(&input)?;
            let resized = match method.as_str() {
                "trig" => trig_resample(&img, to),
                "bilinear" => bilinear_resample(&img, to),
                other => {
                    return Err(Error::Config(format!(
                        "method must be trig or bilinear, got {other:?}"
                    )))
                }
            };
            write_pgm(&out, &resized)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Selftest => selftest(),
    }
}

/// Quick invariant suites; prints one line per check.
pub fn selftest() -> Result<()> {
    use crate::conv::{conv_spatial, conv_spectral, pad_kernel_spatial, SpatialKernel};
    use crate::convert::{cnn_to_fno, grad_convert_check};
    use crate::grids::{dft, idft, Lambda};
    use crate::resample::{nyquist_merge, nyquist_split};
    use rand::Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let random_grid = |rng: &mut ChaCha8Rng, n: usize| {
        RealGrid::from_fn(n, 1, |_, _, _| rng.gen_range(-1.0..1.0))
    };

    let check = |name: &str, dev: f64, tol: f64| -> Result<()> {
        let ok = dev <= tol;
        println!("{} {} (deviation {:.2e}, tolerance {:.0e})", if ok { "ok " } else { "FAIL" }, name, dev, tol);
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!("selftest {name} failed: {dev:e} > {tol:e}")))
        }
    };

    // DFT round trips.
    let mut dev: f64 = 0.0;
    for n in 1..=12 {
        for lambda in [Lambda::Unit, Lambda::Sqrt, Lambda::Full] {
            let v = random_grid(&mut rng, n);
            let back = idft(&dft(&v, lambda), lambda)?;
            dev = dev.max(v.max_abs_diff(&back));
        }
    }
    check("dft round trip", dev, 1e-10)?;

    // Lemma 3.
    let mut dev: f64 = 0.0;
    for _ in 0..10 {
        let m = 2 * rng.gen_range(0..2usize) + 1;
        let n = m + 2 * rng.gen_range(0..3usize);
        let w = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let theta = SpatialKernel::from_weights(m, 1, 1, w).unwrap();
        let v = random_grid(&mut rng, n);
        let a = conv_spatial(&theta, &v)?;
        let b = conv_spectral(&cnn_to_fno(&pad_kernel_spatial(&theta, n)?), &v)?;
        dev = dev.max(a.max_abs_diff(&b));
    }
    check("lemma 3 conversion", dev, 1e-9)?;

    // Lemma 4.
    let mut dev: f64 = 0.0;
    for n in [1usize, 3, 5] {
        let w = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let theta = SpatialKernel::from_weights(n, 1, 1, w).unwrap();
        let v = random_grid(&mut rng, n);
        dev = dev.max(grad_convert_check(&theta, &v)?);
    }
    check("lemma 4 gradient scaling", dev, 1e-9)?;

    // Nyquist split and merge.
    let mut dev: f64 = 0.0;
    for n in [2usize, 4, 8] {
        let s = dft(&random_grid(&mut rng, n), Lambda::Full);
        let back = nyquist_merge(&nyquist_split(&s)?)?;
        dev = dev.max(
            s.data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max),
        );
    }
    check("nyquist merge after split", dev, 1e-12)?;

    // Trigonometric round trips.
    let mut dev: f64 = 0.0;
    for m in 2..=8 {
        for up in [m + 1, m + 2, 2 * m] {
            let v = random_grid(&mut rng, m);
            let back = trig_resample(&trig_resample(&v, up), m);
            dev = dev.max(v.max_abs_diff(&back));
        }
    }
    check("trig resample round trip", dev, 1e-10)?;

    println!("selftest passed");
    Ok(())
}
