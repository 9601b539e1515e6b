//! The CRD × loss grid and the optional S2I parameter grid, run per seed.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use super::Metrics;
use crate::crd::{crd_resample, origin_id, CrdConfig};
use crate::data::LabeledDataset;
use crate::error::{GtdaError, Result};
use crate::nn::{self, init_model, ImageSet, LossKind, ModelConfig, TrainConfig};
use crate::s2i::{param_grid, rasterize, S2IParams};

#[derive(Debug, Clone)]
pub struct AblationConfig {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub s2i: S2IParams,
    pub crd: CrdConfig,
    /// `input_size` is taken from the S2I width.
    pub model: ModelConfig,
    /// `loss` and `shuffle_seed` are set per cell.
    pub train_config: TrainConfig,
    pub seeds: Vec<u64>,
    /// Adds the 20 S2I settings, each run with CRD and VBL enabled.
    pub s2i_grid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub name: String,
    pub crd: bool,
    pub loss: LossKind,
    pub s2i: S2IParams,
}

impl CellSpec {
    /// The four CRD × loss cells in table order.
    pub fn core_grid(s2i: &S2IParams) -> Vec<CellSpec> {
        [
            ("baseline", false, LossKind::CrossEntropy),
            ("CRD", true, LossKind::CrossEntropy),
            ("VBL", false, LossKind::Vbl),
            ("CRD+VBL", true, LossKind::Vbl),
        ]
        .into_iter()
        .map(|(name, crd, loss)| CellSpec {
            name: name.to_string(),
            crd,
            loss,
            s2i: s2i.clone(),
        })
        .collect()
    }

    pub fn s2i_grid(base: &S2IParams) -> Vec<CellSpec> {
        param_grid(base)
            .into_iter()
            .map(|p| CellSpec {
                name: format!("s2i:{}", p.tag()),
                crd: true,
                loss: LossKind::Vbl,
                s2i: p,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Completed(Metrics),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: String,
    pub seed: u64,
    pub status: CellStatus,
}

impl CellResult {
    pub fn metrics(&self) -> Option<&Metrics> {
        match &self.status {
            CellStatus::Completed(m) => Some(m),
            CellStatus::Failed(_) => None,
        }
    }
}

/// Mean and sample standard deviation over completed seeds, in the order
/// accuracy, precision, recall, F1.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: String,
    pub completed: usize,
    pub failed: usize,
    pub mean: [f64; 4],
    pub sd: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub cells: Vec<CellSpec>,
    pub rows: Vec<CellResult>,
}

fn metric_array(m: &Metrics) -> [f64; 4] {
    [m.accuracy, m.precision, m.recall, m.f1]
}

impl AblationReport {
    pub fn summary(&self, cell: &str) -> Option<CellSummary> {
        let rows: Vec<&CellResult> = self.rows.iter().filter(|r| r.cell == cell).collect();
        if rows.is_empty() {
            return None;
        }
        let values: Vec<[f64; 4]> = rows.iter().filter_map(|r| r.metrics()).map(metric_array).collect();
        let n = values.len();
        let mut mean = [f64::NAN; 4];
        let mut sd = [f64::NAN; 4];
        if n > 0 {
            for j in 0..4 {
                mean[j] = values.iter().map(|v| v[j]).sum::<f64>() / n as f64;
                sd[j] = if n > 1 {
                    (values.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
            }
        }
        Some(CellSummary {
            cell: cell.to_string(),
            completed: n,
            failed: rows.len() - n,
            mean,
            sd,
        })
    }

    pub fn summaries(&self) -> Vec<CellSummary> {
        self.cells.iter().filter_map(|c| self.summary(&c.name)).collect()
    }

    /// `cell,seed,acc,precision,recall,f1`; failed cells carry `FAILED` in
    /// every metric column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,seed,acc,precision,recall,f1\n");
        for r in &self.rows {
            match r.metrics() {
                Some(m) => {
                    let _ = writeln!(out, "{},{},{},{},{},{}", r.cell, r.seed, m.accuracy, m.precision, m.recall, m.f1);
                }
                None => {
                    let _ = writeln!(out, "{},{},FAILED,FAILED,FAILED,FAILED", r.cell, r.seed);
                }
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "cell,completed,failed,acc_mean,acc_sd,precision_mean,precision_sd,recall_mean,recall_sd,f1_mean,f1_sd\n",
        );
        for s in self.summaries() {
            let _ = write!(out, "{},{},{}", s.cell, s.completed, s.failed);
            for j in 0..4 {
                let _ = write!(out, ",{},{}", s.mean[j], s.sd[j]);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `ablation.csv`, `ablation_summary.csv` and `ablation.txt`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| GtdaError::io(dir, e))?;
        for (name, body) in [
            ("ablation.csv", self.to_csv()),
            ("ablation_summary.csv", self.summary_csv()),
            ("ablation.txt", self.to_string()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| GtdaError::io(&path, e))?;
        }
        Ok(())
    }
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.cells.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        writeln!(
            f,
            "{:<width$}  {:>5}  {:>15}  {:>15}  {:>15}  {:>15}",
            "cell", "runs", "accuracy", "precision", "recall", "f1"
        )?;
        for s in self.summaries() {
            write!(f, "{:<width$}  {:>5}", s.cell, s.completed)?;
            for j in 0..4 {
                if s.completed == 0 {
                    write!(f, "  {:>15}", "FAILED")?;
                } else {
                    write!(f, "  {:>15}", format!("{:.3} ± {:.3}", s.mean[j], s.sd[j]))?;
                }
            }
            if s.failed > 0 {
                write!(f, "  ({} failed)", s.failed)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

type ImageCache = HashMap<String, Vec<f64>>;

fn render_all(ds: &LabeledDataset, params: &S2IParams) -> Result<ImageCache> {
    ds.samples()
        .iter()
        .map(|s| Ok((s.id().to_string(), rasterize(&s.series, params)?.to_unit())))
        .collect()
}

fn image_set(ds: &LabeledDataset, cache: &ImageCache, side: usize) -> Result<ImageSet> {
    let mut set = ImageSet {
        side,
        ids: Vec::with_capacity(ds.len()),
        labels: Vec::with_capacity(ds.len()),
        pixels: Vec::with_capacity(ds.len()),
    };
    for s in ds.samples() {
        let pixels = cache
            .get(origin_id(s.id()))
            .ok_or_else(|| GtdaError::Data(format!("no image for sample {:?}", s.id())))?;
        set.ids.push(s.id().to_string());
        set.labels.push(s.label);
        set.pixels.push(pixels.clone());
    }
    Ok(set)
}

/// Runs every cell for every seed.
///
/// Cells sharing an S2I setting reuse one set of rendered images, and the
/// CRD resampling for a seed is shared by every CRD cell. A seed fixes the
/// clustering, weight initialization and batch order, so cells are paired
/// across the grid. A cell that errors is recorded as failed and the run
/// continues.
pub fn run_ablation(config: &AblationConfig) -> Result<AblationReport> {
    if config.seeds.is_empty() {
        return Err(GtdaError::Config("ablation needs at least one seed".into()));
    }
    config.s2i.validate()?;
    config.train_config.validate()?;
    config.train.require_both_classes()?;
    if config.s2i.width_px != config.s2i.height_px {
        return Err(GtdaError::Config("the classifier needs square images".into()));
    }
    let mut cells = CellSpec::core_grid(&config.s2i);
    if config.s2i_grid {
        cells.extend(CellSpec::s2i_grid(&config.s2i));
    }

    let mut resampled: HashMap<u64, std::result::Result<LabeledDataset, String>> = HashMap::new();
    let mut results: HashMap<(usize, u64), CellStatus> = HashMap::new();
    let mut done = vec![false; cells.len()];

    for i in 0..cells.len() {
        if done[i] {
            continue;
        }
        let params = cells[i].s2i.clone();
        log::info!("rendering images for {}", params.tag());
        let rendered = render_all(&config.train, &params).and_then(|tr| Ok((tr, render_all(&config.test, &params)?)));
        for j in i..cells.len() {
            if done[j] || cells[j].s2i != params {
                continue;
            }
            done[j] = true;
            for &seed in &config.seeds {
                let status = match &rendered {
                    Err(e) => CellStatus::Failed(e.to_string()),
                    Ok((train_cache, test_cache)) => {
                        let train_ds = if cells[j].crd {
                            resampled
                                .entry(seed)
                                .or_insert_with(|| {
                                    crd_resample(&config.train, &config.crd, seed)
                                        .map(|o| o.dataset)
                                        .map_err(|e| e.to_string())
                                })
                                .clone()
                        } else {
                            Ok(config.train.clone())
                        };
                        match train_ds {
                            Err(e) => CellStatus::Failed(e),
                            Ok(ds) => match run_cell(config, &cells[j], seed, &ds, train_cache, test_cache) {
                                Ok(m) => CellStatus::Completed(m),
                                Err(e) => CellStatus::Failed(e.to_string()),
                            },
                        }
                    }
                };
                match &status {
                    CellStatus::Completed(m) => log::info!("{} seed {seed}: {m}", cells[j].name),
                    CellStatus::Failed(e) => log::warn!("{} seed {seed} failed: {e}", cells[j].name),
                }
                results.insert((j, seed), status);
            }
        }
    }

    let mut rows = Vec::with_capacity(cells.len() * config.seeds.len());
    for (j, cell) in cells.iter().enumerate() {
        for &seed in &config.seeds {
            rows.push(CellResult {
                cell: cell.name.clone(),
                seed,
                status: results.remove(&(j, seed)).expect("every cell ran"),
            });
        }
    }
    Ok(AblationReport { cells, rows })
}

fn run_cell(
    config: &AblationConfig,
    cell: &CellSpec,
    seed: u64,
    train_ds: &LabeledDataset,
    train_cache: &ImageCache,
    test_cache: &ImageCache,
) -> Result<Metrics> {
    let side = cell.s2i.width_px;
    let train_set = image_set(train_ds, train_cache, side)?;
    let test_set = image_set(&config.test, test_cache, side)?;
    let model_config = ModelConfig {
        input_size: side,
        seed,
        ..config.model.clone()
    };
    let mut model = init_model(&model_config)?;
    let train_config = TrainConfig {
        loss: cell.loss,
        shuffle_seed: seed,
        ..config.train_config.clone()
    };
    nn::train(&mut model, &train_set, None, &train_config, None)?;
    nn::evaluate(&model, &test_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{metrics, ConfusionMatrix};

    fn report() -> AblationReport {
        let s2i = S2IParams::default();
        AblationReport {
            cells: CellSpec::core_grid(&s2i)[..2].to_vec(),
            rows: vec![
                CellResult {
                    cell: "baseline".into(),
                    seed: 1,
                    status: CellStatus::Completed(metrics(&ConfusionMatrix::new(1, 1, 1, 7))),
                },
                CellResult {
                    cell: "baseline".into(),
                    seed: 2,
                    status: CellStatus::Completed(metrics(&ConfusionMatrix::new(2, 0, 0, 8))),
                },
                CellResult {
                    cell: "CRD".into(),
                    seed: 1,
                    status: CellStatus::Failed("boom".into()),
                },
            ],
        }
    }

    #[test]
    fn summary_mean_and_sd() {
        let s = report().summary("baseline").unwrap();
        assert_eq!((s.completed, s.failed), (2, 0));
        assert!((s.mean[0] - 0.9).abs() < 1e-12);
        assert!((s.sd[0] - (0.02f64).sqrt()).abs() < 1e-12);
        let failed = report().summary("CRD").unwrap();
        assert_eq!((failed.completed, failed.failed), (0, 1));
    }

    #[test]
    fn csv_and_table_layout() {
        let r = report();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "cell,seed,acc,precision,recall,f1");
        assert_eq!(lines[1], "baseline,1,0.8,0.5,0.5,0.5");
        assert_eq!(lines[3], "CRD,1,FAILED,FAILED,FAILED,FAILED");
        let table = r.to_string();
        assert!(table.contains("0.900 ± 0.141"));
        assert!(table.lines().nth(2).unwrap().contains("FAILED"));
    }

    #[test]
    fn grids_have_expected_sizes() {
        let s2i = S2IParams::default();
        assert_eq!(CellSpec::core_grid(&s2i).len(), 4);
        let g = CellSpec::s2i_grid(&s2i);
        assert_eq!(g.len(), 20);
        assert!(g.iter().any(|c| c.s2i == s2i));
    }
}
