use std::path::PathBuf;

use clap::Args;
use mvforge::annotate::{read_dots, read_map, MapSpace};
use mvforge::ot::{
    localization_loss, CostKind, OtSettings, DEFAULT_EPSILON, DEFAULT_MAX_ITERS, DEFAULT_TAU,
    DEFAULT_TOL,
};
use serde::Serialize;

use crate::run::{user, CliError, RunDir};
use crate::OutArgs;

#[derive(Debug, Args, Serialize)]
pub struct OtLossArgs {
    /// Predicted pixel density map.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth view annotation (.dots); visible heads are the targets.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Weight of both marginal penalties.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Ground cost: exp, l2 or l2sq.
    #[arg(long, default_value = "exp")]
    cost: CostKind,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

pub fn run(args: OtLossArgs) -> Result<(), CliError> {
    let dir = RunDir::create(&args.out.out, "ot-loss", &args)?;
    let result = (|| {
        let pred = read_map(&args.pred)?;
        if pred.kind.space() != MapSpace::Pixel {
            return Err(CliError::User(format!(
                "{}: expected a pixel-space map",
                args.pred.display()
            )));
        }
        // The camera id is not needed for the loss.
        let ann = read_dots(&args.gt, 0)?;
        let points: Vec<(f64, f64)> = ann
            .entries
            .iter()
            .filter(|e| e.visible)
            .map(|e| (e.v, e.u))
            .collect();
        let settings = OtSettings {
            epsilon: args.epsilon,
            tau: args.tau,
            cost: args.cost,
            max_iters: args.max_iters,
            tol: args.tol,
        };
        let report = localization_loss(&pred, &points, &settings).map_err(user)?;
        let line = serde_json::to_string(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        dir.write("loss.json", format!("{line}\n"))?;
        println!("{line}");
        if report.clamped_costs > 0 {
            eprintln!(
                "warning: {} costs clamped at distance 60",
                report.clamped_costs
            );
        }
        if !report.converged {
            eprintln!(
                "warning: solver stopped after {} iterations without converging",
                report.iterations
            );
        }
        Ok(())
    })();
    dir.finish(result)
}
