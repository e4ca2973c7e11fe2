use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvforge::annotate::{read_manifest, read_map, write_map, GridMap, MapKind, MANIFEST_FILE};

const SMALL: &str = "count_min = 20\ncount_max = 40\nimage_width = 320\nimage_height = 180\n";

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .env_remove("MVFORGE_SEED")
        .env_remove("MVFORGE_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

/// Two scenes, three frames, four views; `maps` selects the map files.
fn generate(dir: &Path, name: &str, maps: &str) -> PathBuf {
    let cfg = dir.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.join(name);
    let run = forge(&[
        "generate",
        "--config",
        s(&cfg),
        "--seed",
        "3",
        "--scenes",
        "2",
        "--frames",
        "3",
        "--views",
        "4",
        "--maps",
        maps,
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    out
}

#[test]
fn generate_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let a = generate(tmp.path(), "a", "ground");
    let b = generate(tmp.path(), "b", "ground");
    let fa = files_under(&a);
    assert_eq!(fa, files_under(&b));
    let dots = fa
        .keys()
        .filter(|p| p.extension().is_some_and(|e| e == "dots"))
        .count();
    assert_eq!(dots, 2 * 3 * 4);
    assert!(a.join("run_config.json").exists());
    assert!(!a.join("INCOMPLETE").exists());
}

#[test]
fn invalid_roi_exits_1_and_names_the_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        format!("{SMALL}\n[[scene]]\nid = 1\nroi = [[0, 0], [10, 10], [10, 0], [0, 10]]\n"),
    )
    .unwrap();
    let out = tmp.path().join("out");
    let run = forge(&[
        "generate",
        "--config",
        s(&cfg),
        "--scenes",
        "2",
        "--frames",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("scene 1"), "{}", stderr(&run));
    assert!(out.join("INCOMPLETE").exists());
}

/// Ground-plane predictions equal to the ground truth.
fn perfect_predictions(dataset: &Path, pred: &Path) {
    let manifest = read_manifest(&dataset.join(MANIFEST_FILE)).unwrap();
    for (scene, frame) in manifest.frames() {
        let dir = pred.join(format!(
            "scene_{}/frame_{}",
            scene.scene.id, frame.record.frame_id
        ));
        fs::create_dir_all(&dir).unwrap();
        let text: String = frame
            .record
            .persons
            .iter()
            .map(|p| format!("{} {}\n", p.position.x, p.position.y))
            .collect();
        fs::write(dir.join("ground.txt"), text).unwrap();
    }
}

#[test]
fn evaluate_ground_truth_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "data", "none");
    let pred = tmp.path().join("pred");
    perfect_predictions(&data, &pred);

    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("eval_{threads}"));
        let run = forge(&[
            "--threads",
            threads,
            "evaluate",
            "--dataset",
            s(&data),
            "--pred",
            s(&pred),
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        let summary: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
        for key in ["moda", "modp", "precision", "recall", "f1"] {
            assert_eq!(summary["micro"][key], 1.0, "{key}");
        }
        assert_eq!(summary["counting"]["mae"], 0.0);
        assert_eq!(
            fs::read(out.join("per_frame.jsonl"))
                .unwrap()
                .split(|b| *b == b'\n')
                .filter(|l| !l.is_empty())
                .count(),
            6
        );
        let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
        assert!(csv.starts_with("aggregate,MODA,MODP,Precision,Recall,F1,MAE,NAE,MSE\n"));
        outputs.push((
            fs::read(out.join("per_frame.jsonl")).unwrap(),
            fs::read(out.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn evaluate_missing_prediction_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "data", "none");
    let pred = tmp.path().join("pred");
    perfect_predictions(&data, &pred);
    fs::remove_file(pred.join("scene_1/frame_2/ground.txt")).unwrap();
    let out = tmp.path().join("eval");
    let run = forge(&[
        "evaluate",
        "--dataset",
        s(&data),
        "--pred",
        s(&pred),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("ground.txt"), "{}", stderr(&run));
    assert!(out.join("INCOMPLETE").exists());
}

#[test]
fn stats_writes_every_table_and_chart() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "data", "none");
    let out = tmp.path().join("stats");
    let run = forge(&[
        "stats",
        "--dataset",
        s(&data),
        "--bin-width",
        "10",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    for f in [
        "count_histogram.csv",
        "environment.csv",
        "dataset_card.csv",
        "count_histogram.svg",
        "weather.svg",
        "time_of_day.svg",
        "stats.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let card = fs::read_to_string(out.join("dataset_card.csv")).unwrap();
    assert!(card.contains("view_annotations,24\n"), "{card}");
}

#[test]
fn fuse_checks_counts_and_fuses_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "data", "none");
    let map_paths: Vec<PathBuf> = (0..4)
        .map(|k| {
            let p = tmp.path().join(format!("view_{k}.map"));
            write_map(&p, &GridMap::filled(180, 320, 2.0, MapKind::PixelFeature)).unwrap();
            p
        })
        .collect();
    let manifest = s(&data);

    let out = tmp.path().join("fuse_short");
    let run = forge(&[
        "fuse",
        "--manifest",
        manifest,
        "--scene",
        "0",
        "--maps",
        s(&map_paths[0]),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 1);
    assert!(out.join("INCOMPLETE").exists());

    let out = tmp.path().join("fuse");
    let mut args = vec![
        "fuse",
        "--manifest",
        manifest,
        "--scene",
        "0",
        "--height",
        "0",
        "--out",
        s(&out),
        "--maps",
    ];
    args.extend(map_paths.iter().map(|p| s(p)));
    let run = forge(&args);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let fused = read_map(&out.join("fused.map")).unwrap();
    // Uniform selection splits each view's value four ways.
    let level = 0.5f32;
    assert!(fused.values.iter().all(|v| *v <= level + 1e-6));
    let at_level = fused
        .values
        .iter()
        .filter(|v| (**v - level).abs() < 1e-6)
        .count();
    let nonzero = fused.values.iter().filter(|v| **v > 0.0).count();
    assert!(
        at_level > 0 && at_level * 10 >= nonzero * 9,
        "{at_level} of {nonzero}"
    );
}

#[test]
fn ot_loss_prints_json() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), "data", "all");
    let manifest = read_manifest(&data.join(MANIFEST_FILE)).unwrap();
    let (_, frame) = manifest.frames().next().unwrap();
    let map = frame.map(MapKind::PixelDensity, Some(0)).unwrap();
    let view = frame.views.iter().find(|v| v.camera_id == 0).unwrap();
    let out = tmp.path().join("loss");
    let run = forge(&[
        "ot-loss",
        "--pred",
        s(&data.join(&map.file)),
        "--gt",
        s(&data.join(&view.file)),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let line: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    let objective = line["objective"].as_f64().unwrap();
    assert!(objective.is_finite() && objective > 0.0);
    assert!(out.join("loss.json").exists());
}

#[test]
fn usage_errors_exit_1() {
    let run = forge(&["generate", "--no-such-flag"]);
    assert_eq!(code(&run), 1);
    let run = forge(&["frobnicate"]);
    assert_eq!(code(&run), 1);
    assert_eq!(code(&forge(&["--help"])), 0);
}
