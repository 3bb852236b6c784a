//! One function per subcommand. Each writes its artifacts under the output
//! directory and returns the paths it wrote.

use crate::config::{Precision, RunConfig, SegmentMode};
use crate::report::{read_predictions, write_predictions, PredictionRow, ReportError, Writer};
use crate::svg::{self, EllipseShape};
use breslow_core::checkpoint::Checkpoint;
use breslow_core::data::{
    parse_feature_file, write_feature_string, BreslowStage, ClassCounts, Dataset, DepthClass, ThicknessMm,
};
use breslow_core::evaluation::metrics::{ConfusionCounts, Metrics, DEFAULT_THRESHOLD};
use breslow_core::evaluation::{ablate, crossval, CrossvalReport, TrainMode, Variant};
use breslow_core::projection::{
    fisher_axis_scores, fit_ellipse, fit_gaussian_1d, overlap_area, pca_fit, pls_fit, Ellipse, FisherScores,
    Gaussian1D, PcaBasis, ThicknessGroup,
};
use breslow_core::regression::{
    bin_index, bin_stats, polyfit, residual_orthogonality, segment_report, Bin, SegmentR2, ThicknessPrediction,
};
use breslow_core::seed::derive;
use breslow_core::synth::generate;
use breslow_core::training::{predict_dataset, train_single_phase, train_two_phase, TrainHistory};
use breslow_core::Scalar;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("`{0}` needs --input")]
    MissingInput(&'static str),
    #[error("{missing} of {total} predictions lack a thickness value; pass --skip-missing to drop them")]
    MissingThickness { missing: usize, total: usize },
    #[error("no predictions with a thickness value to analyze")]
    NoThickness,
}

fn input<'a>(cfg: &'a RunConfig, command: &'static str) -> Result<&'a Path, CommandError> {
    cfg.input.as_deref().ok_or(CommandError::MissingInput(command))
}

#[derive(Debug, Serialize)]
struct DatasetInfo {
    source: String,
    n: usize,
    dim: usize,
    counts: ClassCounts,
}

/// The input feature file, or a synthetic dataset when there is none.
fn load_dataset(cfg: &RunConfig) -> anyhow::Result<(Dataset, DatasetInfo)> {
    let (ds, source) = match &cfg.input {
        Some(p) => (parse_feature_file(p)?, p.display().to_string()),
        None => (generate(&cfg.synth())?, "synthetic".to_string()),
    };
    let info = DatasetInfo {
        source,
        n: ds.len(),
        dim: ds.dim(),
        counts: ds.class_counts(),
    };
    Ok((ds, info))
}

// ---- stage ----

#[derive(Debug, Serialize)]
struct StageRow {
    line: usize,
    thickness_mm: f64,
    stage: BreslowStage,
    class: DepthClass,
}

#[derive(Debug, Serialize)]
struct StageReport {
    rows: Vec<StageRow>,
    stage_counts: BTreeMap<BreslowStage, usize>,
    class_counts: ClassCounts,
}

/// One thickness per line; blank lines and `#` comments are skipped.
pub fn parse_thickness_list(text: &str, path: &str) -> Result<Vec<(usize, ThicknessMm)>, ReportError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ReportError::Parse {
            path: path.to_string(),
            line: i + 1,
            message,
        };
        let v: f64 = line.parse().map_err(|_| err(format!("not a number: `{line}`")))?;
        out.push((i + 1, ThicknessMm::new(v).map_err(|e| err(e.to_string()))?));
    }
    Ok(out)
}

pub fn stage(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let path = input(cfg, "stage")?;
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let values = parse_thickness_list(&text, &path.display().to_string())?;
    let mut report = StageReport {
        rows: Vec::with_capacity(values.len()),
        stage_counts: BreslowStage::ALL.iter().map(|s| (*s, 0)).collect(),
        class_counts: ClassCounts::default(),
    };
    for (line, t) in values {
        let row = StageRow {
            line,
            thickness_mm: t.value(),
            stage: t.stage(),
            class: t.depth_class(),
        };
        *report.stage_counts.entry(row.stage).or_default() += 1;
        match row.class {
            DepthClass::Low => report.class_counts.low += 1,
            DepthClass::High => report.class_counts.high += 1,
        }
        report.rows.push(row);
    }
    let mut w = Writer::new("stage", cfg)?;
    w.report("stage.json", &report)?;
    Ok(w.written)
}

// ---- synth ----

#[derive(Debug, Serialize)]
struct SynthReport {
    file: &'static str,
    dataset: DatasetInfo,
    /// Samples below 0.4 mm, in [0.4, 1.0) and from 1.0 mm.
    group_counts: BTreeMap<&'static str, usize>,
}

pub fn synth(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let sc = cfg.synth();
    let ds = generate(&sc)?;
    let mut w = Writer::new("synth", cfg)?;
    let settings = serde_json::to_string(&sc)?;
    let body = write_feature_string(&ds, &["synthetic dataset", &settings]);
    w.text("synth.tsv", &body)?;
    let mut group_counts: BTreeMap<&'static str, usize> = ThicknessGroup::ALL.iter().map(|g| (g.as_str(), 0)).collect();
    for s in ds.iter() {
        if let Some(t) = s.thickness() {
            *group_counts.entry(ThicknessGroup::of(t.value()).as_str()).or_default() += 1;
        }
    }
    let report = SynthReport {
        file: "synth.tsv",
        dataset: DatasetInfo {
            source: "synthetic".into(),
            n: ds.len(),
            dim: ds.dim(),
            counts: ds.class_counts(),
        },
        group_counts,
    };
    w.report("synth.json", &report)?;
    Ok(w.written)
}

// ---- crossval / ablate ----

#[derive(Debug, Serialize)]
struct FoldSummary {
    fold: usize,
    seed: u64,
    train_size: usize,
    test_size: usize,
    counts: ConfusionCounts,
    metrics: Metrics,
    final_train_loss: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CrossvalSummary {
    dataset: DatasetInfo,
    variant: Variant,
    mode: TrainMode,
    k: usize,
    threshold: f64,
    pooled_counts: ConfusionCounts,
    /// Metrics of the summed confusion counts.
    pooled: Metrics,
    /// Mean of the per-fold metrics.
    macro_avg: Metrics,
    folds: Vec<FoldSummary>,
    predictions_file: &'static str,
}

fn folds_of(r: &CrossvalReport) -> Vec<FoldSummary> {
    r.folds
        .iter()
        .map(|f| FoldSummary {
            fold: f.fold,
            seed: f.seed,
            train_size: f.train_size,
            test_size: f.predictions.len(),
            counts: f.counts,
            metrics: f.metrics,
            final_train_loss: f.final_train_loss,
        })
        .collect()
}

fn run_crossval<T: Scalar>(cfg: &RunConfig, ds: &Dataset, variant: Variant) -> anyhow::Result<CrossvalReport> {
    let (tc, mode) = variant.apply(&cfg.train::<T>());
    Ok(crossval(ds, &tc, mode, cfg.k, cfg.seed, cfg.jobs)?)
}

pub fn crossval_cmd(cfg: &mut RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let variant = cfg.single_variant()?;
    let cfg = &*cfg;
    let (ds, info) = load_dataset(cfg)?;
    let report = match cfg.precision {
        Precision::F64 => run_crossval::<f64>(cfg, &ds, variant)?,
        Precision::F32 => run_crossval::<f32>(cfg, &ds, variant)?,
    };
    let rows: Vec<PredictionRow> = report
        .oof_predictions(&ds)
        .into_iter()
        .map(|p| PredictionRow {
            id: p.id,
            thickness: p.thickness,
            label: p.label,
            p_high: p.p_high,
        })
        .collect();
    let mut w = Writer::new("crossval", cfg)?;
    w.text("oof.tsv", &write_predictions(&rows))?;
    let summary = CrossvalSummary {
        dataset: info,
        variant,
        mode: variant.apply(&cfg.train::<f64>()).1,
        k: report.k,
        threshold: DEFAULT_THRESHOLD,
        pooled_counts: report.pooled_counts,
        pooled: report.pooled,
        macro_avg: report.macro_avg,
        folds: folds_of(&report),
        predictions_file: "oof.tsv",
    };
    w.report("crossval.json", &summary)?;
    Ok(w.written)
}

#[derive(Debug, Serialize)]
struct AblationEntry {
    variant: Variant,
    pooled_counts: ConfusionCounts,
    pooled: Metrics,
    macro_avg: Metrics,
    folds: Vec<FoldSummary>,
}

#[derive(Debug, Serialize)]
struct AblationSummary {
    dataset: DatasetInfo,
    k: usize,
    threshold: f64,
    rows: Vec<AblationEntry>,
}

fn run_ablate<T: Scalar>(cfg: &RunConfig, ds: &Dataset, variants: &[Variant]) -> anyhow::Result<Vec<AblationEntry>> {
    let rows = ablate(ds, &cfg.train::<T>(), variants, cfg.k, cfg.seed, cfg.jobs)?;
    Ok(rows
        .into_iter()
        .map(|r| AblationEntry {
            variant: r.variant,
            pooled_counts: r.report.pooled_counts,
            pooled: r.report.pooled,
            macro_avg: r.report.macro_avg,
            folds: folds_of(&r.report),
        })
        .collect())
}

pub fn ablate_cmd(cfg: &mut RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let variants = cfg.variants_or(&Variant::ALL);
    let cfg = &*cfg;
    let (ds, info) = load_dataset(cfg)?;
    let rows = match cfg.precision {
        Precision::F64 => run_ablate::<f64>(cfg, &ds, &variants)?,
        Precision::F32 => run_ablate::<f32>(cfg, &ds, &variants)?,
    };
    let mut table = String::from("#variant\trecall\tprecision\taccuracy\tf1\n");
    for r in &rows {
        let m = r.pooled;
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}\t{}",
            r.variant, m.recall, m.precision, m.accuracy, m.f1
        );
    }
    let mut w = Writer::new("ablate", cfg)?;
    w.text("ablation.tsv", &table)?;
    w.report(
        "ablation.json",
        &AblationSummary {
            dataset: info,
            k: cfg.k,
            threshold: DEFAULT_THRESHOLD,
            rows,
        },
    )?;
    Ok(w.written)
}

// ---- train / predict ----

#[derive(Debug, Serialize)]
struct TrainSummary {
    dataset: DatasetInfo,
    variant: Variant,
    checkpoint: String,
    epochs_run: usize,
    phase_boundary: usize,
    train_loss: Vec<f64>,
    /// Metrics on the training data itself.
    train_counts: ConfusionCounts,
    train_metrics: Metrics,
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoint
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("checkpoint.json"))
}

fn run_train<T>(
    cfg: &RunConfig,
    ds: &Dataset,
    variant: Variant,
) -> anyhow::Result<(TrainHistory, ConfusionCounts, String)>
where
    T: Scalar + Serialize + DeserializeOwned,
{
    let (tc, mode) = variant.apply(&cfg.train::<T>());
    let val = Dataset::empty(ds.dim());
    let (params, history) = match mode {
        TrainMode::TwoPhase => train_two_phase(ds, &val, &tc)?,
        TrainMode::SinglePhase => train_single_phase(ds, &val, &tc)?,
    };
    let p = predict_dataset(&params, ds)?;
    let counts = ConfusionCounts::from_probabilities(&ds.labels(), &p, T::of(DEFAULT_THRESHOLD));
    let path = checkpoint_path(cfg);
    Checkpoint::new(tc, params).save(&path)?;
    Ok((history, counts, path.display().to_string()))
}

pub fn train_cmd(cfg: &mut RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let variant = cfg.single_variant()?;
    let cfg = &*cfg;
    let (ds, info) = load_dataset(cfg)?;
    let mut w = Writer::new("train", cfg)?;
    let (history, counts, checkpoint) = match cfg.precision {
        Precision::F64 => run_train::<f64>(cfg, &ds, variant)?,
        Precision::F32 => run_train::<f32>(cfg, &ds, variant)?,
    };
    w.written.push(PathBuf::from(&checkpoint));
    let summary = TrainSummary {
        dataset: info,
        variant,
        checkpoint,
        epochs_run: history.epochs.len(),
        phase_boundary: history.phase_boundary,
        train_loss: history.epochs.iter().map(|e| e.train_loss).collect(),
        train_counts: counts,
        train_metrics: counts.metrics(),
    };
    w.report("train.json", &summary)?;
    Ok(w.written)
}

#[derive(Debug, Serialize)]
struct PredictSummary {
    dataset: DatasetInfo,
    checkpoint: String,
    counts: ConfusionCounts,
    metrics: Metrics,
    predictions_file: &'static str,
}

fn run_predict<T>(path: &Path, ds: &Dataset) -> anyhow::Result<Vec<f64>>
where
    T: Scalar + Serialize + DeserializeOwned,
{
    let ck = Checkpoint::<T>::load(path)?;
    Ok(predict_dataset(&ck.params, ds)?
        .into_iter()
        .map(|p| p.to_f64_lossy())
        .collect())
}

pub fn predict_cmd(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    input(cfg, "predict")?;
    let (ds, info) = load_dataset(cfg)?;
    let path = checkpoint_path(cfg);
    let p = match cfg.precision {
        Precision::F64 => run_predict::<f64>(&path, &ds)?,
        Precision::F32 => run_predict::<f32>(&path, &ds)?,
    };
    let rows: Vec<PredictionRow> = ds
        .iter()
        .zip(&p)
        .map(|(s, &p_high)| PredictionRow {
            id: s.id().to_string(),
            thickness: s.thickness().map(|t| t.value()),
            label: s.label(),
            p_high,
        })
        .collect();
    let counts = ConfusionCounts::from_probabilities(&ds.labels(), &p, DEFAULT_THRESHOLD);
    let mut w = Writer::new("predict", cfg)?;
    w.text("predictions.tsv", &write_predictions(&rows))?;
    w.report(
        "predict.json",
        &PredictSummary {
            dataset: info,
            checkpoint: path.display().to_string(),
            counts,
            metrics: counts.metrics(),
            predictions_file: "predictions.tsv",
        },
    )?;
    Ok(w.written)
}

// ---- analyze-regression ----

#[derive(Debug, Serialize)]
struct FitSummary {
    degree: usize,
    coefficients: Option<Vec<f64>>,
    r2_overall: Option<f64>,
    residual_orthogonality: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct RegressionSummary {
    n_points: usize,
    n_skipped: usize,
    fits: Vec<FitSummary>,
    degree: usize,
    segment_mode: SegmentMode,
    /// R² per segment under `segment_mode`; `null` where undefined.
    segment_r2: [Option<f64>; 3],
    /// Whether the middle segment has the strictly smallest R².
    middle_lowest: Option<bool>,
    segments: Vec<SegmentR2<f64>>,
    bin_width: f64,
    bins: Vec<Bin<f64>>,
    plot_file: &'static str,
}

pub fn analyze_regression(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let path = input(cfg, "analyze-regression")?;
    let rows = read_predictions(path)?;
    let missing = rows.iter().filter(|r| r.thickness.is_none()).count();
    if missing > 0 && !cfg.skip_missing {
        return Err(CommandError::MissingThickness {
            missing,
            total: rows.len(),
        }
        .into());
    }
    let points: Vec<ThicknessPrediction<f64>> = rows
        .iter()
        .filter_map(|r| {
            r.thickness.map(|thickness| ThicknessPrediction {
                thickness,
                p_high: r.p_high,
            })
        })
        .collect();
    if points.is_empty() {
        return Err(CommandError::NoThickness.into());
    }
    let fits: Vec<FitSummary> = (1..=3)
        .map(|degree| match polyfit(&points, degree) {
            Ok(f) => FitSummary {
                degree,
                residual_orthogonality: Some(residual_orthogonality(&points, &f)),
                coefficients: Some(f.coefficients),
                r2_overall: Some(f.r2_overall),
                error: None,
            },
            Err(e) => FitSummary {
                degree,
                coefficients: None,
                r2_overall: None,
                residual_orthogonality: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let fit = polyfit(&points, cfg.degree)?;
    let segments = segment_report(&points, &fit, cfg.segments.0);
    let segment_r2: [Option<f64>; 3] = std::array::from_fn(|i| match cfg.segment_mode {
        SegmentMode::Refit => segments[i].refit,
        SegmentMode::Global => segments[i].global,
    });
    let middle_lowest = match segment_r2 {
        [Some(a), Some(b), Some(c)] => Some(b < a && b < c),
        _ => None,
    };
    let bins = bin_stats(&points, cfg.bin_width)?;

    let mut plot = String::from("#t\tp_high\tbin_id\n");
    for p in &points {
        let _ = writeln!(
            plot,
            "{}\t{}\t{}",
            p.thickness,
            p.p_high,
            bin_index(p.thickness, cfg.bin_width)
        );
    }
    let mut w = Writer::new("analyze-regression", cfg)?;
    w.text("regression_plot.tsv", &plot)?;
    if cfg.svg {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.thickness, p.p_high)).collect();
        let (lo, hi) = xy
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let curve: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / 200.0;
                (t, fit.eval(t))
            })
            .collect();
        let means: Vec<(f64, f64)> = bins.bins.iter().map(|b| (b.center, b.mean)).collect();
        let title = format!("degree {} fit, R² = {:.3}", cfg.degree, fit.r2_overall);
        w.text("regression.svg", &svg::regression_plot(&xy, &curve, &means, &title))?;
    }
    w.report(
        "regression.json",
        &RegressionSummary {
            n_points: points.len(),
            n_skipped: missing,
            fits,
            degree: cfg.degree,
            segment_mode: cfg.segment_mode,
            segment_r2,
            middle_lowest,
            segments,
            bin_width: cfg.bin_width,
            bins: bins.bins,
            plot_file: "regression_plot.tsv",
        },
    )?;
    Ok(w.written)
}

// ---- analyze-projection ----

#[derive(Debug, Serialize)]
struct GroupFit {
    group: ThicknessGroup,
    count: usize,
    ellipse: Option<Ellipse<f64>>,
    /// Along the first coordinate.
    gaussian: Option<Gaussian1D<f64>>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Overlap {
    a: ThicknessGroup,
    b: ThicknessGroup,
    area: f64,
    /// Share of the smaller ellipse covered by the overlap.
    fraction_of_smaller: f64,
}

#[derive(Debug, Serialize)]
struct Space {
    name: &'static str,
    coordinates_file: String,
    groups: Vec<GroupFit>,
    overlaps: Vec<Overlap>,
}

#[derive(Debug, Serialize)]
struct PcaSummary {
    standardize: bool,
    variances: Vec<f64>,
    explained_ratio: Vec<f64>,
    fisher_scores: Vec<f64>,
    top2: [usize; 2],
}

#[derive(Debug, Serialize)]
struct ProjectionSummary {
    dataset: DatasetInfo,
    coverage: f64,
    without_thickness: usize,
    pca: PcaSummary,
    spaces: Vec<Space>,
    basis_file: &'static str,
}

#[derive(Debug, Serialize)]
struct PlsAxes {
    x_mean: Vec<f64>,
    y_mean: f64,
    weights: Vec<Vec<f64>>,
    loadings: Vec<Vec<f64>>,
    rotations: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct BasisFile<'a> {
    pca: &'a PcaBasis<f64>,
    fisher: &'a FisherScores<f64>,
    pls: PlsAxes,
}

fn analyze_space(
    cfg: &RunConfig,
    name: &'static str,
    coords: &[[f64; 2]],
    groups: &[Option<ThicknessGroup>],
) -> (Space, Vec<(ThicknessGroup, Vec<[f64; 2]>)>) {
    let members: Vec<(ThicknessGroup, Vec<[f64; 2]>)> = ThicknessGroup::ALL
        .iter()
        .map(|&g| {
            (
                g,
                coords
                    .iter()
                    .zip(groups)
                    .filter(|(_, h)| **h == Some(g))
                    .map(|(c, _)| *c)
                    .collect(),
            )
        })
        .collect();
    let fits: Vec<GroupFit> = members
        .iter()
        .map(|(g, pts)| {
            let first: Vec<f64> = pts.iter().map(|p| p[0]).collect();
            let ellipse = fit_ellipse(pts, cfg.coverage);
            let gaussian = fit_gaussian_1d(&first);
            let error = ellipse
                .as_ref()
                .err()
                .or(gaussian.as_ref().err())
                .map(|e| e.to_string());
            GroupFit {
                group: *g,
                count: pts.len(),
                ellipse: ellipse.ok(),
                gaussian: gaussian.ok(),
                error,
            }
        })
        .collect();
    let pairs = [(1, 0), (1, 2), (0, 2)];
    let overlaps = pairs
        .iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (fits[i].ellipse.as_ref()?, fits[j].ellipse.as_ref()?);
            let seed = derive(
                cfg.seed,
                &format!("overlap/{name}/{}-{}", fits[i].group.as_str(), fits[j].group.as_str()),
            );
            let area = overlap_area(a, b, cfg.overlap_samples, seed);
            let smaller = a.area().min(b.area());
            Some(Overlap {
                a: fits[i].group,
                b: fits[j].group,
                area,
                fraction_of_smaller: if smaller > 0.0 { area / smaller } else { 0.0 },
            })
        })
        .collect();
    let space = Space {
        name,
        coordinates_file: format!("projection_{name}.tsv"),
        groups: fits,
        overlaps,
    };
    (space, members)
}

fn coordinates_tsv(ds: &Dataset, coords: &[[f64; 2]], groups: &[Option<ThicknessGroup>]) -> String {
    let mut out = String::from("#id\tgroup\tc1\tc2\n");
    for ((s, c), g) in ds.iter().zip(coords).zip(groups) {
        let g = g.map_or("NA", |g| g.as_str());
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.id(), g, c[0], c[1]);
    }
    out
}

fn space_svg(space: &Space, members: &[(ThicknessGroup, Vec<[f64; 2]>)], xlabel: &str, ylabel: &str) -> String {
    let groups: Vec<(&str, Vec<(f64, f64)>, Option<EllipseShape>)> = members
        .iter()
        .zip(&space.groups)
        .map(|((g, pts), fit)| {
            let shape = fit.ellipse.as_ref().map(|e| EllipseShape {
                center: (e.center[0], e.center[1]),
                semi: (e.semi_major, e.semi_minor),
                angle: e.angle,
                degenerate: e.degenerate,
            });
            (g.as_str(), pts.iter().map(|p| (p[0], p[1])).collect(), shape)
        })
        .collect();
    svg::scatter_with_ellipses(
        &groups,
        &format!("{} projection", space.name.to_uppercase()),
        xlabel,
        ylabel,
    )
}

pub fn analyze_projection(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let (ds, info) = load_dataset(cfg)?;
    let x = ds.feature_matrix();
    let labels = ds.labels();
    let pca = pca_fit(&x, cfg.standardize)?;
    let fisher = fisher_axis_scores(&pca, &x, &labels)?;
    let z = pca.project(&x, &fisher.top2)?;
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if *l == DepthClass::High { 1.0 } else { 0.0 })
        .collect();
    let pls = pls_fit(&x, &y, 2)?;

    let groups: Vec<Option<ThicknessGroup>> = ds
        .iter()
        .map(|s| s.thickness().map(|t| ThicknessGroup::of(t.value())))
        .collect();
    let pca_xy: Vec<[f64; 2]> = (0..ds.len()).map(|i| [z[(i, 0)], z[(i, 1)]]).collect();
    let pls_xy: Vec<[f64; 2]> = (0..ds.len())
        .map(|i| [pls.scores[(i, 0)], pls.scores[(i, 1)]])
        .collect();

    let mut w = Writer::new("analyze-projection", cfg)?;
    let mut spaces = Vec::new();
    let pca_labels = [format!("PC{}", fisher.top2[0] + 1), format!("PC{}", fisher.top2[1] + 1)];
    for (name, xy, axes) in [
        ("pca", &pca_xy, [pca_labels[0].as_str(), pca_labels[1].as_str()]),
        ("pls", &pls_xy, ["PLS1", "PLS2"]),
    ] {
        let (space, members) = analyze_space(cfg, name, xy, &groups);
        w.text(&space.coordinates_file.clone(), &coordinates_tsv(&ds, xy, &groups))?;
        if cfg.svg {
            w.text(
                &format!("projection_{name}.svg"),
                &space_svg(&space, &members, axes[0], axes[1]),
            )?;
        }
        spaces.push(space);
    }

    let total = pca.total_variance();
    w.json(
        "projection_basis.json",
        &BasisFile {
            pca: &pca,
            fisher: &fisher,
            pls: PlsAxes {
                x_mean: pls.x_mean.clone(),
                y_mean: pls.y_mean,
                weights: pls.weights.clone(),
                loadings: pls.loadings.clone(),
                rotations: pls.rotations.clone(),
            },
        },
    )?;
    w.report(
        "projection.json",
        &ProjectionSummary {
            dataset: info,
            coverage: cfg.coverage,
            without_thickness: groups.iter().filter(|g| g.is_none()).count(),
            pca: PcaSummary {
                standardize: cfg.standardize,
                explained_ratio: pca
                    .variances
                    .iter()
                    .map(|v| if total > 0.0 { v / total } else { 0.0 })
                    .collect(),
                variances: pca.variances.clone(),
                fisher_scores: fisher.scores.clone(),
                top2: fisher.top2,
            },
            spaces,
            basis_file: "projection_basis.json",
        },
    )?;
    Ok(w.written)
}
