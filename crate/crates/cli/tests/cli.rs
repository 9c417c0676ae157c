use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use linefield_core::data::{extrapolated_subset, load_srn, Split};
use linefield_core::geometry::Mat3;

const TOY: &[&str] = &[
    "synth.resolution=16",
    "synth.views=6",
    "gen.train=2",
    "gen.val=0",
    "gen.test=1",
    "model.layers=1",
    "model.hidden=12",
    "model.heads=2",
    "model.grid=2",
    "model.triplane_dim=4",
    "model.image_dim=8",
    "model.field_hidden=8",
    "train.steps=2",
    "train.warmup=1",
    "train.rays_per_view=16",
    "train.render.samples=8",
    "eval.sampling.samples=8",
];

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Runs the binary in the sandbox with the toy overrides plus `extra`.
    fn run(&self, args: &[&str], extra: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_linefield"));
        cmd.current_dir(self.dir.path())
            .env_remove("PLKRF_SEED")
            .arg("--workers")
            .arg("1")
            .args(args);
        for s in TOY.iter().chain(extra) {
            cmd.arg("--set").arg(s);
        }
        cmd.output().unwrap()
    }

    fn ok(&self, args: &[&str], extra: &[&str]) -> String {
        let out = self.run(args, extra);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), Vec::new());
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn gen_data_is_reproducible() {
    let (a, b) = (Sandbox::new(), Sandbox::new());
    for s in [&a, &b] {
        s.ok(&["gen-data"], &["gen.train=1", "gen.test=0", "gen.seed=7"]);
    }
    let (ta, tb) = (tree(&a.path("data")), tree(&b.path("data")));
    assert!(ta.keys().any(|p| p.ends_with("rgb/000005.png")));
    assert_eq!(ta, tb);
}

#[test]
fn zero_counts_create_empty_splits() {
    let s = Sandbox::new();
    s.ok(&["gen-data"], &["gen.train=0", "gen.test=0"]);
    for split in ["train", "val", "test"] {
        let dir = s.path("data").join(split);
        assert!(dir.is_dir());
        assert_eq!(fs::read_dir(dir).unwrap().count(), 0);
    }
}

#[test]
fn default_spec_scenes_load() {
    let s = Sandbox::new();
    let out = Command::new(env!("CARGO_BIN_EXE_linefield"))
        .current_dir(s.dir.path())
        .args(["gen-data", "--set", "gen.train=1", "--set", "gen.val=0", "--set", "gen.test=0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let scenes = load_srn(s.path("data"), Split::Train).unwrap();
    assert_eq!(scenes.len(), 1);
    assert_eq!(scenes[0].views.len(), 24);
    assert_eq!(scenes[0].views[0].image.width(), 64);
}

#[test]
fn zero_steps_writes_initial_checkpoint_and_empty_log() {
    let s = Sandbox::new();
    s.ok(&["gen-data"], &[]);
    s.ok(&["train"], &["train.steps=0"]);
    let ck = s.path("runs/checkpoints");
    assert!(ck.join("step_00000000.ckpt").is_file());
    let log = fs::read_to_string(ck.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1);
    assert!(log.starts_with("step,lr,loss,gamma_self_0,gamma_cross_0"));
}

#[test]
fn reference_mode_training_is_byte_identical() {
    let s = Sandbox::new();
    s.ok(&["gen-data"], &[]);
    s.ok(&["train"], &["model.bias_enabled=false"]);
    let first = fs::read(s.path("runs/checkpoints/latest.ckpt")).unwrap();
    let echo = fs::read_to_string(s.path("runs/checkpoints/config.json")).unwrap();
    assert!(echo.contains("\"bias_enabled\": false"));

    // rerun from the echoed run config alone
    let cfg = s.path("runs/output/run_config.json");
    let out = Command::new(env!("CARGO_BIN_EXE_linefield"))
        .current_dir(s.dir.path())
        .args(["--workers", "1", "train", "--config"])
        .arg(&cfg)
        .args(["--set", "paths.checkpoints=again"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(s.path("again/latest.ckpt")).unwrap(), first);
}

#[test]
fn nan_loss_exits_with_numeric_code() {
    let s = Sandbox::new();
    s.ok(&["gen-data"], &[]);
    let out = s.run(&["train"], &["train.lr=1e300", "train.warmup=0", "train.steps=4"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("at step 2"), "{err}");
}

#[test]
fn exit_codes() {
    let s = Sandbox::new();
    assert_eq!(s.run(&["train"], &["model.layerz=2"]).status.code(), Some(2));
    assert_eq!(s.run(&["train"], &["model.layers"]).status.code(), Some(2));
    // no dataset yet
    assert_eq!(s.run(&["train"], &[]).status.code(), Some(3));
    let out = Command::new(env!("CARGO_BIN_EXE_linefield"))
        .current_dir(s.dir.path())
        .env("PLKRF_SEED", "not a number")
        .arg("gen-data")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_env_changes_the_data() {
    let (a, b) = (Sandbox::new(), Sandbox::new());
    let gen = |s: &Sandbox, seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_linefield"))
            .current_dir(s.dir.path())
            .env("PLKRF_SEED", seed)
            .args([
                "gen-data",
                "--set",
                "gen.train=1",
                "--set",
                "gen.val=0",
                "--set",
                "gen.test=0",
                "--set",
                "synth.resolution=16",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
    };
    gen(&a, "5");
    gen(&b, "6");
    assert!(a.path("data/train/scene_00000005").is_dir());
    assert!(b.path("data/train/scene_00000006").is_dir());
}

#[test]
fn render_views_and_orbit() {
    let s = Sandbox::new();
    s.ok(&["gen-data"], &[]);
    s.ok(&["train"], &[]);
    let scene = "scene_00000002";
    s.ok(&["render", "--scene", scene, "--views", "0,1"], &[]);
    let dir = s.path("runs/output/render").join(scene);
    let png = fs::read(dir.join("view_001.png")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("view_001.json")).unwrap()).unwrap();
    assert!(meta["psnr"].as_f64().unwrap() > 0.0);
    assert!(meta["ssim"].is_number());

    s.ok(&["render", "--scene", scene, "--views", "1"], &[]);
    assert_eq!(fs::read(dir.join("view_001.png")).unwrap(), png);

    s.ok(&["render", "--scene", scene, "--orbit", "1"], &[]);
    let orbit: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("orbit_") && n.ends_with(".png"))
        .collect();
    assert_eq!(orbit, ["orbit_000.png"]);

    assert_eq!(s.run(&["render", "--scene", scene, "--views", "6"], &[]).status.code(), Some(2));
    assert_eq!(
        s.run(&["render", "--scene", "scene_99999999", "--views", "0"], &[]).status.code(),
        Some(3)
    );
}

fn read_csv(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn eval_tables_are_consistent() {
    let s = Sandbox::new();
    s.ok(&["gen-data"], &["synth.views=12", "gen.test=2"]);
    s.ok(&["train"], &["synth.views=12"]);
    let stdout = s.ok(&["eval", "--inputs", "0,3"], &[]);
    assert!(stdout.contains("extrapolated"));

    let rows = read_csv(&s.path("runs/output/eval_test.csv"));
    assert_eq!(rows.len(), 2 * 10);
    let scenes = load_srn(s.path("data"), Split::Test).unwrap();
    for scene in &scenes {
        let rots: Vec<Mat3> = scene.views.iter().map(|v| *v.camera.rotation()).collect();
        let subset = extrapolated_subset(&rots, &[0, 3]);
        assert!(!subset.is_empty());
        for r in rows.iter().filter(|r| r[0] == scene.id) {
            let v: usize = r[1].parse().unwrap();
            assert_eq!(r[4] == "true", subset.contains(&v));
        }
    }
    let summary = read_csv(&s.path("runs/output/eval_test_summary.csv"));
    let mean = |f: &dyn Fn(&Vec<String>) -> bool, col: usize| {
        let xs: Vec<f64> = rows.iter().filter(|r| f(r)).map(|r| r[col].parse().unwrap()).collect();
        (xs.len(), xs.iter().sum::<f64>() / xs.len() as f64)
    };
    for (row, filter) in summary
        .iter()
        .zip([&(|_: &Vec<String>| true) as &dyn Fn(&Vec<String>) -> bool, &|r| r[4] == "true"])
    {
        let (n, p) = mean(filter, 2);
        let (_, q) = mean(filter, 3);
        assert_eq!(row[1].parse::<usize>().unwrap(), n);
        assert_eq!(row[2].parse::<f64>().unwrap(), p);
        assert_eq!(row[3].parse::<f64>().unwrap(), q);
    }

    s.ok(&["eval", "--ground-truth", "--inputs", "0,3"], &[]);
    for r in read_csv(&s.path("runs/output/eval_test.csv")) {
        assert_eq!((r[2].as_str(), r[3].as_str()), ("inf", "1"));
    }
    assert_eq!(s.run(&["eval", "--inputs", "0,30"], &[]).status.code(), Some(3));
}

#[test]
fn selfcheck_quick_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_linefield"))
        .args(["selfcheck", "--quick"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("max gradient error"));
    assert!(!text.contains("FAIL"));
}
