//! Run configuration: a line-oriented `key = value` file with `[section]`
//! headers and `#` comments. Later assignments override earlier ones, and
//! `section.key=value` overrides are applied last.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::crd::{CrdConfig, CrdMode};
use crate::data::{load_csv, load_ucr_tsv, synth_generate_split, LabeledDataset, Split, SynthSpec};
use crate::error::{GtdaError, Result};
use crate::eval::AblationConfig;
use crate::nn::{LossKind, ModelConfig, TrainConfig};
use crate::s2i::{AxisMode, CurveType, Normalization, S2IParams};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth {
        train: SynthSpec,
        test_majority: usize,
        test_minority: usize,
    },
    Ucr {
        train: PathBuf,
        test: PathBuf,
        positive_label: Option<i64>,
    },
    Csv {
        train: PathBuf,
        test: PathBuf,
        label_column: String,
        id_column: Option<String>,
        positive_label: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub s2i: S2IParams,
    pub crd_enabled: bool,
    pub crd: CrdConfig,
    pub loss: LossKind,
    pub channels: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    /// Seed for single runs (init, shuffling, clustering).
    pub seed: u64,
    /// Seeds of the ablation grid.
    pub seeds: Vec<u64>,
    pub s2i_grid: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            data: DataSource::Synth {
                train: SynthSpec {
                    n_majority: 360,
                    n_minority: 40,
                    length: 256,
                    anomaly_magnitude: 3.0,
                    noise_sigma: 0.3,
                    seed: 0,
                },
                test_majority: 180,
                test_minority: 20,
            },
            s2i: S2IParams::default(),
            crd_enabled: true,
            crd: CrdConfig::default(),
            loss: LossKind::Vbl,
            channels: ModelConfig::default().channels,
            lr: train.lr,
            epochs: train.epochs,
            batch_size: train.batch_size,
            momentum: train.momentum,
            seed: 0,
            seeds: vec![1, 2, 3, 4, 5],
            s2i_grid: false,
            out: PathBuf::from("out"),
        }
    }
}

/// `section.key` → (value, line) after applying overrides in order.
type Entries = BTreeMap<String, (String, usize)>;

fn parse_entries(text: &str, origin: &Path, entries: &mut Entries) -> Result<()> {
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |column: usize, message: String| GtdaError::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            column,
            message,
        };
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line.len(), "section header is missing ']'".into()))?
                .trim();
            if name.is_empty() {
                return Err(err(2, "empty section name".into()));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(1, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(err(1, "empty key".into()));
        }
        let full = if section.is_empty() || key.contains('.') {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        entries.insert(full, (value.trim().to_string(), line_no));
    }
    Ok(())
}

struct Reader {
    entries: Entries,
    origin: PathBuf,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn bad(&self, key: &str, line: usize, value: &str, expected: &str) -> GtdaError {
        GtdaError::Config(format!(
            "{} line {line}: {key} = {value:?} is not {expected}",
            self.origin.display()
        ))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T, expected: &str) -> Result<()> {
        if let Some((v, line)) = self.take(key) {
            *slot = v.parse().map_err(|_| self.bad(key, line, &v, expected))?;
        }
        Ok(())
    }

    fn with<T>(&mut self, key: &str, slot: &mut T, expected: &str, f: impl Fn(&str) -> Option<T>) -> Result<()> {
        if let Some((v, line)) = self.take(key) {
            *slot = f(&v).ok_or_else(|| self.bad(key, line, &v, expected))?;
        }
        Ok(())
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(v, _)| v).filter(|v| !v.is_empty())
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses config text. `origin` only labels error messages.
    pub fn parse(text: &str, origin: &Path, overrides: &[String]) -> Result<Self> {
        let mut entries = Entries::new();
        parse_entries(text, origin, &mut entries)?;
        for (i, o) in overrides.iter().enumerate() {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| GtdaError::Config(format!("override {o:?} is not `section.key=value`")))?;
            let k = k.trim();
            if !k.contains('.') {
                return Err(GtdaError::Config(format!("override key {k:?} needs a section, e.g. train.lr")));
            }
            entries.insert(k.to_string(), (v.trim().to_string(), i + 1));
        }
        Self::from_entries(Reader {
            entries,
            origin: origin.to_path_buf(),
        })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GtdaError::io(path, e))?;
        Self::parse(&text, path, overrides)
    }

    fn from_entries(mut r: Reader) -> Result<Self> {
        let mut c = RunConfig::default();
        let source = r.string("data.source").unwrap_or_else(|| "synth".into());
        c.data = match source.as_str() {
            "synth" => {
                let mut spec = match &c.data {
                    DataSource::Synth { train, .. } => train.clone(),
                    _ => unreachable!(),
                };
                let (mut tmaj, mut tmin) = (180usize, 20usize);
                r.parse("data.n_majority", &mut spec.n_majority, "a count")?;
                r.parse("data.n_minority", &mut spec.n_minority, "a count")?;
                r.parse("data.test_majority", &mut tmaj, "a count")?;
                r.parse("data.test_minority", &mut tmin, "a count")?;
                r.parse("data.length", &mut spec.length, "a count")?;
                r.parse("data.anomaly_magnitude", &mut spec.anomaly_magnitude, "a number")?;
                r.parse("data.noise_sigma", &mut spec.noise_sigma, "a number")?;
                r.parse("data.seed", &mut spec.seed, "an unsigned integer")?;
                DataSource::Synth {
                    train: spec,
                    test_majority: tmaj,
                    test_minority: tmin,
                }
            }
            "ucr" | "csv" => {
                let train = r
                    .string("data.train")
                    .ok_or_else(|| GtdaError::Config(format!("data.source = {source} needs data.train")))?;
                let test = r
                    .string("data.test")
                    .ok_or_else(|| GtdaError::Config(format!("data.source = {source} needs data.test")))?;
                let positive = r.take("data.positive_label").filter(|(v, _)| !v.is_empty());
                if source == "ucr" {
                    let positive_label = match positive {
                        Some((v, line)) => Some(v.parse().map_err(|_| r.bad("data.positive_label", line, &v, "an integer"))?),
                        None => None,
                    };
                    DataSource::Ucr {
                        train: train.into(),
                        test: test.into(),
                        positive_label,
                    }
                } else {
                    DataSource::Csv {
                        train: train.into(),
                        test: test.into(),
                        label_column: r.string("data.label_column").unwrap_or_else(|| "label".into()),
                        id_column: r.string("data.id_column"),
                        positive_label: positive.map(|(v, _)| v),
                    }
                }
            }
            other => return Err(GtdaError::Config(format!("unknown data.source {other:?} (synth, ucr, csv)"))),
        };

        r.parse("s2i.scale", &mut c.s2i.scale, "a number")?;
        r.with("s2i.curve", &mut c.s2i.curve_type, "line or point", CurveType::parse)?;
        r.with("s2i.normalize", &mut c.s2i.normalize, "normal or non_normal", Normalization::parse)?;
        r.parse("s2i.width", &mut c.s2i.width_px, "a pixel count")?;
        r.parse("s2i.height", &mut c.s2i.height_px, "a pixel count")?;
        r.parse("s2i.margin", &mut c.s2i.margin_px, "a pixel count")?;

        r.with("crd.enabled", &mut c.crd_enabled, "a boolean", parse_bool)?;
        r.parse("crd.m", &mut c.crd.m, "a number")?;
        r.parse("crd.k", &mut c.crd.k, "a count")?;
        r.with("crd.mode", &mut c.crd.mode, "weighted or literal", CrdMode::parse)?;
        r.parse("crd.feature_len", &mut c.crd.feature_len, "a count")?;
        r.parse("crd.max_iter", &mut c.crd.max_iter, "a count")?;
        r.parse("crd.tol", &mut c.crd.tol, "a number")?;

        r.with("model.channels", &mut c.channels, "a comma-separated list of counts", parse_list)?;

        r.with("train.loss", &mut c.loss, "ce or vbl", LossKind::parse)?;
        r.parse("train.lr", &mut c.lr, "a number")?;
        r.parse("train.epochs", &mut c.epochs, "a count")?;
        r.parse("train.batch_size", &mut c.batch_size, "a count")?;
        r.parse("train.momentum", &mut c.momentum, "a number")?;

        r.parse("run.seed", &mut c.seed, "an unsigned integer")?;
        r.with("run.seeds", &mut c.seeds, "a comma-separated list of seeds", parse_list)?;
        r.with("run.s2i_grid", &mut c.s2i_grid, "a boolean", parse_bool)?;
        if let Some(out) = r.string("run.out") {
            c.out = out.into();
        }

        if let Some((key, (_, line))) = r.entries.iter().next() {
            return Err(GtdaError::Config(format!(
                "{} line {line}: unknown key {key:?}",
                r.origin.display()
            )));
        }
        c.check()?;
        Ok(c)
    }

    /// Checks ranges that do not depend on the filesystem.
    fn check(&self) -> Result<()> {
        let cfg = |e: GtdaError| match e {
            GtdaError::InvalidInput(m) => GtdaError::Config(m),
            other => other,
        };
        self.s2i.validate().map_err(cfg)?;
        if self.s2i.width_px != self.s2i.height_px {
            return Err(GtdaError::Config("s2i.width and s2i.height must be equal".into()));
        }
        self.model_config().validate().map_err(cfg)?;
        self.train_config().validate().map_err(cfg)?;
        if self.crd.k == 0 || !(self.crd.m.is_finite() && self.crd.m > 0.0) {
            return Err(GtdaError::Config("crd.k must be >= 1 and crd.m > 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(GtdaError::Config("run.seeds is empty".into()));
        }
        Ok(())
    }

    /// Full validation, including that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.check()?;
        match &self.data {
            DataSource::Ucr { train, test, .. } | DataSource::Csv { train, test, .. } => {
                for p in [train, test] {
                    if !p.is_file() {
                        return Err(GtdaError::Config(format!("data file {} does not exist", p.display())));
                    }
                }
            }
            DataSource::Synth { .. } => {}
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_size: self.s2i.width_px,
            channels: self.channels.clone(),
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            momentum: self.momentum,
            loss: self.loss,
            shuffle_seed: self.seed,
        }
    }

    pub fn load_split(&self, split: Split) -> Result<LabeledDataset> {
        match &self.data {
            DataSource::Synth {
                train,
                test_majority,
                test_minority,
            } => {
                let spec = match split {
                    Split::Train => train.clone(),
                    Split::Test => SynthSpec {
                        n_majority: *test_majority,
                        n_minority: *test_minority,
                        ..train.clone()
                    },
                };
                synth_generate_split(&spec, split)
            }
            DataSource::Ucr {
                train,
                test,
                positive_label,
            } => load_ucr_tsv(if split == Split::Train { train } else { test }, split, *positive_label),
            DataSource::Csv {
                train,
                test,
                label_column,
                id_column,
                positive_label,
            } => load_csv(
                if split == Split::Train { train } else { test },
                split,
                label_column,
                id_column.as_deref(),
                positive_label.as_deref(),
            ),
        }
    }

    pub fn ablation_config(&self) -> Result<AblationConfig> {
        Ok(AblationConfig {
            train: self.load_split(Split::Train)?,
            test: self.load_split(Split::Test)?,
            s2i: S2IParams {
                axis: AxisMode::PerSample,
                ..self.s2i.clone()
            },
            crd: self.crd.clone(),
            model: self.model_config(),
            train_config: self.train_config(),
            seeds: self.seeds.clone(),
            s2i_grid: self.s2i_grid,
        })
    }

    /// Every setting, defaults expanded, in a form [`RunConfig::parse`] reads
    /// back to an equal value.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        put("[data]".into());
        match &self.data {
            DataSource::Synth {
                train,
                test_majority,
                test_minority,
            } => {
                put("source = synth".into());
                put(format!("n_majority = {}", train.n_majority));
                put(format!("n_minority = {}", train.n_minority));
                put(format!("test_majority = {test_majority}"));
                put(format!("test_minority = {test_minority}"));
                put(format!("length = {}", train.length));
                put(format!("anomaly_magnitude = {}", train.anomaly_magnitude));
                put(format!("noise_sigma = {}", train.noise_sigma));
                put(format!("seed = {}", train.seed));
            }
            DataSource::Ucr {
                train,
                test,
                positive_label,
            } => {
                put("source = ucr".into());
                put(format!("train = {}", train.display()));
                put(format!("test = {}", test.display()));
                put(format!("positive_label = {}", positive_label.map(|p| p.to_string()).unwrap_or_default()));
            }
            DataSource::Csv {
                train,
                test,
                label_column,
                id_column,
                positive_label,
            } => {
                put("source = csv".into());
                put(format!("train = {}", train.display()));
                put(format!("test = {}", test.display()));
                put(format!("label_column = {label_column}"));
                put(format!("id_column = {}", id_column.as_deref().unwrap_or("")));
                put(format!("positive_label = {}", positive_label.as_deref().unwrap_or("")));
            }
        }
        put(String::new());
        put("[s2i]".into());
        put(format!("scale = {}", self.s2i.scale));
        put(format!("curve = {}", self.s2i.curve_type.as_str()));
        put(format!("normalize = {}", self.s2i.normalize.as_str()));
        put(format!("width = {}", self.s2i.width_px));
        put(format!("height = {}", self.s2i.height_px));
        put(format!("margin = {}", self.s2i.margin_px));
        put(String::new());
        put("[crd]".into());
        put(format!("enabled = {}", self.crd_enabled));
        put(format!("m = {}", self.crd.m));
        put(format!("k = {}", self.crd.k));
        put(format!("mode = {}", self.crd.mode.as_str()));
        put(format!("feature_len = {}", self.crd.feature_len));
        put(format!("max_iter = {}", self.crd.max_iter));
        put(format!("tol = {:e}", self.crd.tol));
        put(String::new());
        put("[model]".into());
        put(format!("channels = {}", join(&self.channels)));
        put(String::new());
        put("[train]".into());
        put(format!("loss = {}", self.loss));
        put(format!("lr = {}", self.lr));
        put(format!("epochs = {}", self.epochs));
        put(format!("batch_size = {}", self.batch_size));
        put(format!("momentum = {}", self.momentum));
        put(String::new());
        put("[run]".into());
        put(format!("seed = {}", self.seed));
        put(format!("seeds = {}", join(&self.seeds)));
        put(format!("s2i_grid = {}", self.s2i_grid));
        put(format!("out = {}", self.out.display()));
        s
    }

    /// Writes `resolved_config.ini` into `dir`.
    pub fn write_snapshot(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| GtdaError::io(dir, e))?;
        let path = dir.join("resolved_config.ini");
        std::fs::write(&path, self.to_config_text()).map_err(|e| GtdaError::io(&path, e))?;
        Ok(path)
    }
}
