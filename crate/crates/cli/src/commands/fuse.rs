use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{ArgGroup, Args};
use mvforge::annotate::{read_manifest, read_map, write_map, GridMap};
use mvforge::fusion::{ground_pipeline, peak_cells, ViewMapStack};
use mvforge::geometry::{Camera, GroundGrid, HEAD_HEIGHT};
use serde::Serialize;

use crate::run::{manifest_path, user, CliError, RunDir};
use crate::OutArgs;

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("rig").required(true).args(["manifest", "cameras"])))]
pub struct FuseArgs {
    /// Take cameras and ground grid from this dataset manifest (needs --scene).
    #[arg(long, requires = "scene", conflicts_with_all = ["cameras", "grid"])]
    manifest: Option<PathBuf>,
    /// Scene id within --manifest.
    #[arg(long)]
    scene: Option<u32>,
    /// JSON array of cameras (needs --grid).
    #[arg(long, requires = "grid")]
    cameras: Option<PathBuf>,
    /// Ground grid as origin_x,origin_y,cell_size,rows,cols.
    #[arg(long)]
    grid: Option<String>,
    /// One pixel-space map per camera, in camera order.
    #[arg(long, num_args = 1.., required = true)]
    maps: Vec<PathBuf>,
    /// Optional per-view attention logits, same shapes as --maps.
    #[arg(long, num_args = 1..)]
    attention: Vec<PathBuf>,
    /// Height of the plane the maps are projected onto, meters.
    #[arg(long, default_value_t = HEAD_HEIGHT)]
    height: f64,
    /// Also write local maxima at least this large to peaks.txt as `x y value`.
    #[arg(long)]
    peaks_min: Option<f32>,
    #[command(flatten)]
    #[serde(skip)]
    out: OutArgs,
}

fn parse_grid(s: &str) -> Result<GroundGrid, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || {
        CliError::User(format!(
            "--grid '{s}': expected origin_x,origin_y,cell_size,rows,cols"
        ))
    };
    if parts.len() != 5 {
        return Err(bad());
    }
    let f = |k: usize| parts[k].parse::<f64>().map_err(|_| bad());
    let u = |k: usize| parts[k].parse::<usize>().map_err(|_| bad());
    GroundGrid::new(f(0)?, f(1)?, f(2)?, u(3)?, u(4)?).map_err(user)
}

fn rig(args: &FuseArgs) -> Result<(Vec<Camera>, GroundGrid), CliError> {
    if let Some(m) = &args.manifest {
        let manifest = read_manifest(&manifest_path(m))?;
        let id = args.scene.expect("clap enforces --scene");
        let scene = manifest
            .scenes
            .iter()
            .find(|s| s.scene.id == id)
            .ok_or_else(|| CliError::User(format!("scene {id} not in {}", m.display())))?;
        return Ok((scene.cameras.clone(), scene.ground_grid));
    }
    let path = args.cameras.as_ref().expect("clap enforces a rig source");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let cameras: Vec<Camera> = serde_json::from_str(&text)
        .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let grid = parse_grid(args.grid.as_deref().expect("clap enforces --grid"))?;
    Ok((cameras, grid))
}

fn load(paths: &[PathBuf]) -> Result<Vec<GridMap>, CliError> {
    paths
        .iter()
        .map(|p| read_map(p).map_err(CliError::from))
        .collect()
}

pub fn run(args: FuseArgs) -> Result<(), CliError> {
    if !args.height.is_finite() {
        return Err(CliError::User("--height must be finite".into()));
    }
    let dir = RunDir::create(&args.out.out, "fuse", &args)?;
    let result = (|| {
        let (cameras, grid) = rig(&args)?;
        if cameras.len() != args.maps.len() {
            return Err(CliError::User(format!(
                "{} maps for {} cameras",
                args.maps.len(),
                cameras.len()
            )));
        }
        if !args.attention.is_empty() && args.attention.len() != args.maps.len() {
            return Err(CliError::User(format!(
                "{} attention maps for {} views",
                args.attention.len(),
                args.maps.len()
            )));
        }
        let stack = ViewMapStack::new(load(&args.maps)?, cameras).map_err(user)?;
        let attention = load(&args.attention)?;
        let att = (!attention.is_empty()).then_some(attention.as_slice());
        let fused = ground_pipeline(&stack, att, &grid, args.height).map_err(user)?;
        write_map(&dir.path("fused.map"), &fused).map_err(user)?;
        if let Some(min) = args.peaks_min {
            let mut text = String::new();
            for (r, c) in peak_cells(&fused, min) {
                let (x, y) = grid.cell_center(r, c);
                let _ = writeln!(text, "{x} {y} {}", fused.get(r, c));
            }
            dir.write("peaks.txt", text)?;
        }
        match fused.argmax() {
            Some((r, c)) => println!(
                "fused {}x{} ground map; max {} at cell ({r}, {c})",
                fused.rows,
                fused.cols,
                fused.get(r, c)
            ),
            None => println!("fused empty ground map"),
        }
        Ok(())
    })();
    dir.finish(result)
}
