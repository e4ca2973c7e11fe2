use std::path::PathBuf;

use clap::Args;
use mvforge::annotate::read_manifest;
use mvforge::stats::{DatasetStats, DEFAULT_BIN_WIDTH};
use serde::Serialize;

use crate::run::{manifest_path, CliError, RunDir};
use crate::OutArgs;

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Dataset manifest, or the directory containing it.
    #[arg(long)]
    dataset: PathBuf,
    /// Histogram bin width in persons.
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: usize,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

pub fn run(args: StatsArgs) -> Result<(), CliError> {
    if args.bin_width == 0 {
        return Err(CliError::User("bin width must be positive".into()));
    }
    let dir = RunDir::create(&args.out.out, "stats", &args)?;
    let result = (|| {
        let manifest = read_manifest(&manifest_path(&args.dataset))?;
        let stats = DatasetStats::from_manifest(&manifest, args.bin_width);
        dir.write("count_histogram.csv", stats.histogram_csv())?;
        dir.write("environment.csv", stats.environment_csv())?;
        dir.write("dataset_card.csv", stats.card_csv())?;
        dir.write("count_histogram.svg", stats.histogram_svg())?;
        dir.write("weather.svg", stats.weather_svg())?;
        dir.write("time_of_day.svg", stats.time_svg())?;
        let text =
            serde_json::to_string_pretty(&stats).map_err(|e| CliError::Internal(e.to_string()))?;
        dir.write("stats.json", text + "\n")?;
        let c = &stats.card;
        println!(
            "{} scenes, {} frames, counts min {} / avg {:.1} / max {}",
            c.scenes, c.frames, c.min_count, c.avg_count, c.max_count
        );
        Ok(())
    })();
    dir.finish(result)
}
