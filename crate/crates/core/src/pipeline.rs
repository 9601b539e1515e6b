//! Stage commands over on-disk artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! resolved_config.ini
//! images/manifest.csv           id,split,label,path
//! images/{train,test}/<id>.pgm
//! resample/manifest.csv         training rows after CRD (replica ids marked)
//! resample/crd_plan.txt
//! train/model.gtda
//! train/history.csv
//! train/vbl_log.csv             VBL runs only
//! evaluate/metrics.csv
//! evaluate/predictions.csv
//! experiment/ablation*.{csv,txt}
//! ```
//!
//! Training reads only manifests and images. Missing upstream manifests are
//! produced on demand; a missing checkpoint is an error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::crd::{crd_resample, origin_id};
use crate::data::{Label, LabeledDataset, Split};
use crate::error::{GtdaError, Result};
use crate::eval::{confusion, metrics, run_ablation, AblationReport, ConfusionMatrix, Metrics};
use crate::nn::{self, init_model, read_checkpoint, write_checkpoint, EpochRecord, ImageSet, LossKind};
use crate::s2i::{rasterize, read_pgm, write_pgm};
use crate::vbl::VblState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub id: String,
    pub split: Split,
    pub label: Label,
    /// Image path relative to the output directory.
    pub path: String,
}

pub const IMAGE_MANIFEST: &str = "images/manifest.csv";
pub const RESAMPLED_MANIFEST: &str = "resample/manifest.csv";
pub const CHECKPOINT: &str = "train/model.gtda";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GtdaError::io(dir, e))
}

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, body).map_err(|e| GtdaError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> GtdaError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    GtdaError::Parse {
        path: path.to_path_buf(),
        line,
        column: 0,
        message: e.to_string(),
    }
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e| csv_error(path, e);
    w.write_record(["id", "split", "label", "path"]).map_err(err)?;
    for r in rows {
        w.write_record([r.id.as_str(), r.split.as_str(), r.label.as_str(), r.path.as_str()])
            .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| GtdaError::Data(e.to_string()))?;
    write_file(path, bytes)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    if !path.is_file() {
        return Err(GtdaError::Data(format!("missing artifact {}", path.display())));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "split", "label", "path"] {
        return Err(GtdaError::Data(format!("{}: expected header id,split,label,path", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = |column: usize, message: String| GtdaError::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            column,
            message,
        };
        let split = match &rec[1] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(bad(2, format!("unknown split {other:?}"))),
        };
        let label = Label::parse(&rec[2]).ok_or_else(|| bad(3, format!("unknown label {:?}", &rec[2])))?;
        rows.push(ManifestRow {
            id: rec[0].to_string(),
            split,
            label,
            path: rec[3].to_string(),
        });
    }
    Ok(rows)
}

/// Loads the images a manifest points at, scaled to `[0, 1]`.
pub fn load_images(out: &Path, rows: &[ManifestRow]) -> Result<ImageSet> {
    let mut items = Vec::with_capacity(rows.len());
    let mut decoded: HashMap<&str, crate::s2i::RasterImage> = HashMap::new();
    for r in rows {
        let img = match decoded.get(r.path.as_str()) {
            Some(img) => img.clone(),
            None => {
                let img = read_pgm(&out.join(&r.path))?;
                decoded.insert(&r.path, img.clone());
                img
            }
        };
        items.push((r.id.clone(), img, r.label));
    }
    if items.is_empty() {
        return Err(GtdaError::Data("manifest selects no images".into()));
    }
    ImageSet::from_images(items)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterizeSummary {
    pub rows: Vec<ManifestRow>,
    pub manifest: PathBuf,
}

/// Renders both splits to `images/<split>/<id>.pgm` and writes the manifest.
pub fn cmd_rasterize(config: &RunConfig, out: &Path) -> Result<RasterizeSummary> {
    config.validate()?;
    config.write_snapshot(out)?;
    let mut rows = Vec::new();
    for split in [Split::Train, Split::Test] {
        let ds = config.load_split(split)?;
        let dir = out.join("images").join(split.as_str());
        create_dir(&dir)?;
        for s in ds.samples() {
            if s.id().contains(['/', '\\']) || s.id().starts_with('.') {
                return Err(GtdaError::Data(format!("sample id {:?} is not usable as a file name", s.id())));
            }
            let rel = format!("images/{}/{}.pgm", split.as_str(), s.id());
            write_pgm(&rasterize(&s.series, &config.s2i)?, &out.join(&rel))?;
            rows.push(ManifestRow {
                id: s.id().to_string(),
                split,
                label: s.label,
                path: rel,
            });
        }
    }
    let manifest = out.join(IMAGE_MANIFEST);
    write_manifest(&manifest, &rows)?;
    log::info!("rasterized {} samples to {}", rows.len(), out.join("images").display());
    Ok(RasterizeSummary { rows, manifest })
}

fn image_manifest(config: &RunConfig, out: &Path) -> Result<Vec<ManifestRow>> {
    let path = out.join(IMAGE_MANIFEST);
    if path.is_file() {
        read_manifest(&path)
    } else {
        log::info!("{} not found, rasterizing first", path.display());
        Ok(cmd_rasterize(config, out)?.rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleSummary {
    pub rows: Vec<ManifestRow>,
    /// Per-cluster audit text; `None` when CRD is disabled.
    pub report: Option<String>,
}

/// Writes the training manifest after CRD. Replicas point at their origin's
/// image. With CRD disabled the training rows pass through unchanged.
pub fn cmd_resample(config: &RunConfig, out: &Path) -> Result<ResampleSummary> {
    config.validate()?;
    config.write_snapshot(out)?;
    let images = image_manifest(config, out)?;
    let train_rows: Vec<ManifestRow> = images.into_iter().filter(|r| r.split == Split::Train).collect();
    if train_rows.is_empty() {
        return Err(GtdaError::Data("image manifest has no training rows".into()));
    }
    let (rows, report) = if config.crd_enabled {
        let train = config.load_split(Split::Train)?;
        let by_id: HashMap<&str, &ManifestRow> = train_rows.iter().map(|r| (r.id.as_str(), r)).collect();
        let outcome = crd_resample(&train, &config.crd, config.seed)?;
        let rows = manifest_for(&outcome.dataset, &by_id)?;
        (rows, Some(outcome.plan.to_report()))
    } else {
        (train_rows, None)
    };
    write_manifest(&out.join(RESAMPLED_MANIFEST), &rows)?;
    let plan_path = out.join("resample/crd_plan.txt");
    match &report {
        Some(text) => write_file(&plan_path, text)?,
        None => write_file(&plan_path, "# crd disabled\n")?,
    }
    Ok(ResampleSummary { rows, report })
}

fn manifest_for(ds: &LabeledDataset, by_id: &HashMap<&str, &ManifestRow>) -> Result<Vec<ManifestRow>> {
    ds.samples()
        .iter()
        .map(|s| {
            let origin = by_id
                .get(origin_id(s.id()))
                .ok_or_else(|| GtdaError::Data(format!("no image for training sample {:?}", s.id())))?;
            Ok(ManifestRow {
                id: s.id().to_string(),
                split: Split::Train,
                label: s.label,
                path: origin.path.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub history: Vec<EpochRecord>,
    pub final_vbl: Option<VblState>,
}

/// Trains on the resampled manifest and evaluates on the test rows each
/// epoch. Writes the checkpoint, `history.csv` and, for VBL, the per-batch
/// weighting log.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<TrainSummary> {
    config.validate()?;
    config.write_snapshot(out)?;
    let train_path = out.join(RESAMPLED_MANIFEST);
    let train_rows = if train_path.is_file() {
        read_manifest(&train_path)?
    } else {
        log::info!("{} not found, resampling first", train_path.display());
        cmd_resample(config, out)?.rows
    };
    let test_rows: Vec<ManifestRow> = image_manifest(config, out)?
        .into_iter()
        .filter(|r| r.split == Split::Test)
        .collect();
    let train_set = load_images(out, &train_rows)?;
    let holdout = if test_rows.is_empty() { None } else { Some(load_images(out, &test_rows)?) };
    if train_set.side != config.s2i.width_px {
        return Err(GtdaError::Config(format!(
            "images are {}px but s2i.width is {}; re-run rasterize",
            train_set.side, config.s2i.width_px
        )));
    }

    let mut model = init_model(&config.model_config())?;
    let outcome = nn::train(&mut model, &train_set, holdout.as_ref(), &config.train_config(), None)?;

    write_checkpoint_to(&model, &out.join(CHECKPOINT))?;
    let mut history = String::from(EpochRecord::csv_header());
    history.push('\n');
    for h in &outcome.history {
        history.push_str(&h.csv_row());
        history.push('\n');
    }
    write_file(&out.join("train/history.csv"), history)?;
    if config.loss == LossKind::Vbl {
        let mut log = String::from(VblState::csv_header());
        log.push('\n');
        for row in &outcome.vbl_log {
            log.push_str(row);
            log.push('\n');
        }
        write_file(&out.join("train/vbl_log.csv"), log)?;
    }
    Ok(TrainSummary {
        history: outcome.history,
        final_vbl: outcome.vbl,
    })
}

fn write_checkpoint_to(model: &nn::Cnn, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    write_checkpoint(model, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Scores the saved checkpoint on the test rows of the image manifest.
pub fn cmd_evaluate(config: &RunConfig, out: &Path) -> Result<EvalSummary> {
    config.validate()?;
    config.write_snapshot(out)?;
    let ckpt = out.join(CHECKPOINT);
    if !ckpt.is_file() {
        return Err(GtdaError::Data(format!(
            "missing artifact {} (run `train` first)",
            ckpt.display()
        )));
    }
    let model = read_checkpoint(&ckpt)?;
    let test_rows: Vec<ManifestRow> = read_manifest(&out.join(IMAGE_MANIFEST))?
        .into_iter()
        .filter(|r| r.split == Split::Test)
        .collect();
    let set = load_images(out, &test_rows)?;
    let preds = nn::predict(&model, &set)?;
    let predicted: Vec<(&str, Label)> = preds.iter().map(|p| (p.id.as_str(), p.label)).collect();
    let actual: Vec<(&str, Label)> = test_rows.iter().map(|r| (r.id.as_str(), r.label)).collect();
    let cm = confusion(&predicted, &actual)?;
    let m = metrics(&cm);

    let mut body = String::from("acc,precision,recall,f1,tp,fn,fp,tn,precision_undefined,recall_undefined\n");
    body.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        m.accuracy, m.precision, m.recall, m.f1, cm.tp, cm.fn_, cm.fp, cm.tn, m.precision_undefined, m.recall_undefined
    ));
    write_file(&out.join("evaluate/metrics.csv"), body)?;
    let mut p = String::from("id,label,predicted,prob_positive\n");
    for (pred, row) in preds.iter().zip(&test_rows) {
        p.push_str(&format!("{},{},{},{}\n", pred.id, row.label, pred.label, pred.prob_positive));
    }
    write_file(&out.join("evaluate/predictions.csv"), p)?;
    Ok(EvalSummary { confusion: cm, metrics: m })
}

/// Runs the ablation grid from the raw datasets and writes its report.
pub fn cmd_experiment(config: &RunConfig, out: &Path) -> Result<AblationReport> {
    config.validate()?;
    config.write_snapshot(out)?;
    let report = run_ablation(&config.ablation_config()?)?;
    report.write_to(&out.join("experiment"))?;
    Ok(report)
}
