use std::path::PathBuf;

use clap::Args;
use mvforge::annotate::{build_manifest, write_dataset, DatasetError};
use mvforge::config::{DatasetConfig, MapOutput};
use mvforge::scene_synth::{generate_dataset, Split, SynthError};

use crate::run::{user, CliError, RunDir};
use crate::OutArgs;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed. Overrides the config and the MVFORGE_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scenes.
    #[arg(long)]
    scenes: Option<usize>,
    /// Frames per scene.
    #[arg(long)]
    frames: Option<usize>,
    /// Camera views per scene.
    #[arg(long)]
    views: Option<usize>,
    /// Map files per frame: none, ground or all.
    #[arg(long)]
    maps: Option<MapOutput>,
    /// Hide heads covered by nearer heads in the per-view annotations.
    #[arg(long)]
    occlusion: bool,
    #[command(flatten)]
    out: OutArgs,
}

fn resolve(args: &GenerateArgs) -> Result<DatasetConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => DatasetConfig::load(p).map_err(user)?,
        None => DatasetConfig::default(),
    };
    cfg.apply_env().map_err(user)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.scenes {
        cfg.scenes = n;
    }
    if let Some(n) = args.frames {
        cfg.frames_per_scene = n;
    }
    if let Some(n) = args.views {
        cfg.views = n;
    }
    if let Some(m) = args.maps {
        cfg.maps = m;
    }
    if args.occlusion {
        cfg.occlusion = true;
    }
    cfg.validate().map_err(user)?;
    Ok(cfg)
}

fn synth_error(e: SynthError) -> CliError {
    let internal = match &e {
        SynthError::DuplicateId(_) => true,
        SynthError::Frame { source, .. } => matches!(**source, SynthError::DuplicateId(_)),
        _ => false,
    };
    if internal {
        CliError::Internal(e.to_string())
    } else {
        CliError::User(e.to_string())
    }
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let cfg = resolve(&args)?;
    let dir = RunDir::create(&args.out.out, "generate", &cfg)?;
    let result = (|| {
        let dataset = generate_dataset(&cfg, cfg.seed).map_err(synth_error)?;
        let manifest = build_manifest(&dataset);
        let path = write_dataset(&dir.root, &manifest).map_err(|e| match e {
            DatasetError::Io { .. } => user(e),
            other => CliError::Internal(other.to_string()),
        })?;
        let mut splits = [0usize; 3];
        for s in &dataset.scenes {
            splits[Split::ALL.iter().position(|x| *x == s.split).unwrap()] += 1;
        }
        println!("manifest: {}", path.display());
        println!(
            "scenes: {}  frames: {}  view annotations: {}  persons: {}",
            dataset.scenes.len(),
            dataset.frame_count(),
            dataset.view_annotation_count(),
            dataset.person_count()
        );
        println!(
            "split (scenes): train {}  val {}  test {}",
            splits[0], splits[1], splits[2]
        );
        Ok(())
    })();
    dir.finish(result)
}
