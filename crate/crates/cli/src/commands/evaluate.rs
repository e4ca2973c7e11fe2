use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mvforge::annotate::{read_dots, read_manifest, read_points};
use mvforge::metrics::{
    counting_stats, evaluate_localization, macro_average, CountingStats, FrameEvaluation,
    LocalizationMetrics, LocalizationTotals, MatchMode, GROUND_THRESHOLD_M, IMAGE_THRESHOLD_PX,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::run::{manifest_path, user, CliError, RunDir};
use crate::OutArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// Per view, pixel coordinates `u v`.
    Image,
    /// Per frame, world meters `x y`.
    Ground,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset manifest, or the directory containing it.
    #[arg(long)]
    dataset: PathBuf,
    /// Prediction root: scene_<s>/frame_<f>/view_<c>.txt (image) or
    /// scene_<s>/frame_<f>/ground.txt (ground), one `x y [score]` per line.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value_t = Space::Ground)]
    space: Space,
    /// Match distance threshold; defaults to 3 px in image space, 0.5 m on the ground.
    #[arg(long)]
    threshold: Option<f64>,
    /// Matching: optimal or greedy.
    #[arg(long, default_value = "optimal")]
    mode: MatchMode,
    /// Drop predictions scoring below this; unscored points are kept.
    #[arg(long)]
    min_score: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Serialize)]
struct Resolved {
    dataset: PathBuf,
    pred: PathBuf,
    space: Space,
    threshold: f64,
    mode: MatchMode,
    min_score: Option<f64>,
}

struct Unit {
    scene: u32,
    frame: u32,
    camera: Option<u32>,
    gt: Vec<[f64; 2]>,
    pred_file: PathBuf,
}

#[derive(Serialize)]
struct FrameRecord<'a> {
    scene: u32,
    frame: u32,
    camera: Option<u32>,
    gt_count: usize,
    pred_count: usize,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    #[serde(flatten)]
    metrics: &'a LocalizationMetrics,
}

#[derive(Serialize)]
struct Summary<'a> {
    units: usize,
    totals: LocalizationTotals,
    micro: LocalizationMetrics,
    macro_average: LocalizationMetrics,
    counting: &'a CountingStats,
}

fn units(cfg: &Resolved) -> Result<Vec<Unit>, CliError> {
    let mpath = manifest_path(&cfg.dataset);
    let manifest = read_manifest(&mpath)?;
    let root = mpath.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut out = Vec::new();
    for (scene, frame) in manifest.frames() {
        let (s, f) = (scene.scene.id, frame.record.frame_id);
        let dir = cfg.pred.join(format!("scene_{s}/frame_{f}"));
        match cfg.space {
            Space::Ground => out.push(Unit {
                scene: s,
                frame: f,
                camera: None,
                gt: frame
                    .record
                    .persons
                    .iter()
                    .map(|p| [p.position.x, p.position.y])
                    .collect(),
                pred_file: dir.join("ground.txt"),
            }),
            Space::Image => {
                for view in &frame.views {
                    let ann = read_dots(&root.join(&view.file), view.camera_id)?;
                    out.push(Unit {
                        scene: s,
                        frame: f,
                        camera: Some(view.camera_id),
                        gt: ann
                            .entries
                            .iter()
                            .filter(|e| e.visible)
                            .map(|e| [e.u, e.v])
                            .collect(),
                        pred_file: dir.join(format!("view_{}.txt", view.camera_id)),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn run(args: EvaluateArgs) -> Result<(), CliError> {
    let threshold = args.threshold.unwrap_or(match args.space {
        Space::Image => IMAGE_THRESHOLD_PX,
        Space::Ground => GROUND_THRESHOLD_M,
    });
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(CliError::User(format!(
            "threshold {threshold} must be positive"
        )));
    }
    let cfg = Resolved {
        dataset: args.dataset,
        pred: args.pred,
        space: args.space,
        threshold,
        mode: args.mode,
        min_score: args.min_score,
    };
    let dir = RunDir::create(&args.out.out, "evaluate", &cfg)?;
    let result = (|| {
        let units = units(&cfg)?;
        let evals: Vec<FrameEvaluation> = units
            .par_iter()
            .map(|u| {
                let pred: Vec<[f64; 2]> = read_points(&u.pred_file)?
                    .into_iter()
                    .filter(|p| match (cfg.min_score, p.score) {
                        (Some(min), Some(s)) => s >= min,
                        _ => true,
                    })
                    .map(|p| [p.x, p.y])
                    .collect();
                Ok(evaluate_localization(&pred, &u.gt, cfg.threshold, cfg.mode))
            })
            .collect::<Result<_, CliError>>()?;

        let mut jsonl = String::new();
        for (u, e) in units.iter().zip(&evals) {
            let rec = FrameRecord {
                scene: u.scene,
                frame: u.frame,
                camera: u.camera,
                gt_count: e.gt_count,
                pred_count: e.pred_count,
                tp: e.report.tp,
                fp: e.report.fp,
                fn_: e.report.fn_,
                metrics: &e.metrics,
            };
            jsonl.push_str(
                &serde_json::to_string(&rec).map_err(|e| CliError::Internal(e.to_string()))?,
            );
            jsonl.push('\n');
        }
        dir.write("per_frame.jsonl", jsonl)?;

        let totals = evals
            .iter()
            .map(|e| LocalizationTotals::from_report(&e.report))
            .fold(LocalizationTotals::default(), LocalizationTotals::combine);
        let micro = totals.metrics();
        let per_frame: Vec<LocalizationMetrics> = evals.iter().map(|e| e.metrics).collect();
        let macro_avg = macro_average(&per_frame);
        let pred_counts: Vec<f64> = evals.iter().map(|e| e.pred_count as f64).collect();
        let gt_counts: Vec<f64> = evals.iter().map(|e| e.gt_count as f64).collect();
        let counting = counting_stats(&pred_counts, &gt_counts).map_err(user)?;

        let mut csv = String::from("aggregate,MODA,MODP,Precision,Recall,F1,MAE,NAE,MSE\n");
        for (name, m) in [("micro", &micro), ("macro", &macro_avg)] {
            let _ = writeln!(
                csv,
                "{name},{},{},{},{},{},{:.6},{},{:.6}",
                opt(m.moda),
                opt(m.modp),
                opt(m.precision),
                opt(m.recall),
                opt(m.f1),
                counting.mae,
                opt(counting.nae),
                counting.mse
            );
        }
        dir.write("summary.csv", csv)?;
        let mut buckets = String::from("bucket,frames,MAE,NAE,MSE\n");
        for b in &counting.buckets {
            let _ = writeln!(
                buckets,
                "{},{},{},{},{}",
                b.bucket.range_label(),
                b.n_frames,
                opt(b.mae),
                opt(b.nae),
                opt(b.mse)
            );
        }
        dir.write("counting_buckets.csv", buckets)?;
        let summary = Summary {
            units: evals.len(),
            totals,
            micro,
            macro_average: macro_avg,
            counting: &counting,
        };
        let text = serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        dir.write("summary.json", text + "\n")?;
        println!(
            "evaluated {} {}: MODA {}  MODP {}  P {}  R {}  F1 {}  MAE {:.3}  MSE {:.3}",
            evals.len(),
            if cfg.space == Space::Image {
                "views"
            } else {
                "frames"
            },
            opt(micro.moda),
            opt(micro.modp),
            opt(micro.precision),
            opt(micro.recall),
            opt(micro.f1),
            counting.mae,
            counting.mse
        );
        Ok(())
    })();
    dir.finish(result)
}
