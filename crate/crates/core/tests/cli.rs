use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use windfarm_sbo::farm_model::{
    velocity_deficit, FarmModel, Layout, Point, TurbineSpec, WakeParams, WindCondition,
};

const BIN: &str = env!("CARGO_BIN_EXE_windfarm-sbo");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("WFLO_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn smoke_config(dir: &Path) -> PathBuf {
    write(
        dir,
        "run.toml",
        "farm_width_d = 4.0\nfarm_height_d = 4.0\ngrid_nx = 5\ngrid_ny = 5\nn_turbines = 3\n\
         pce_samples = 20\npce_max_order = 4\nga_population = 20\nga_generations = 20\n\
         ga_stall_generations = 10\nsbo_max_evaluations = 200\nseed = 4\noutput_dir = \"out\"\n",
    )
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn power_below_cut_in_is_zero() {
    let dir = TempDir::new().unwrap();
    let layout = write(dir.path(), "l.csv", "x_m,y_m\n0,0\n504,0\n");
    let o = run(&[
        "power",
        "--layout",
        layout.to_str().unwrap(),
        "--direction",
        "270",
        "--speed",
        "2.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("total_power_w,0.000"), "{out}");
}

#[test]
fn tandem_raster_centreline_matches_single_wake_oracle() {
    let dir = TempDir::new().unwrap();
    let layout = write(dir.path(), "l.csv", "x_m,y_m\n0,504\n504,504\n");
    let raster = dir.path().join("field.csv");
    let o = run(&[
        "power",
        "--layout",
        layout.to_str().unwrap(),
        "--direction",
        "270",
        "--speed",
        "9",
        "--raster",
        raster.to_str().unwrap(),
        "--raster-step",
        "63",
        "--raster-margin",
        "126",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&raster).unwrap();
    assert!(text.starts_with("x_m,y_m,u_ms\n"));

    let spec = TurbineSpec::nrel_5mw();
    let wp = WakeParams::default();
    let model = FarmModel::new(spec.clone(), wp).unwrap();
    let cond = WindCondition::new(270.0, 9.0);
    let l = Layout::new(vec![Point::new(0.0, 504.0), Point::new(504.0, 504.0)]);
    let ct1 = spec.thrust_coefficient(9.0);
    let ct2 = spec.thrust_coefficient(model.effective_speed(&l, 1, &cond));

    let (xs, ys, us) = (
        csv_column(&text, "x_m"),
        csv_column(&text, "y_m"),
        csv_column(&text, "u_ms"),
    );
    let mut checked = 0;
    for ((&x, &y), &u) in xs.iter().zip(&ys).zip(&us) {
        if y != 504.0 {
            continue;
        }
        let mut deficit = 0.0;
        for (x0, ct) in [(0.0, ct1), (504.0, ct2)] {
            deficit += velocity_deficit(&spec, &wp, ct, x - x0, 0.0, 0.0)
                .unwrap()
                .fraction;
        }
        let expected = (9.0 * (1.0 - deficit)).max(0.0);
        assert!((u - expected).abs() <= 1e-10, "x = {x}: {u} vs {expected}");
        if x <= 0.0 {
            assert_eq!(u, 9.0);
        }
        checked += 1;
    }
    assert!(checked >= 20);
}

#[test]
fn malformed_layout_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let layout = write(dir.path(), "bad.csv", "x_m,y_m\n0,0\n504,east\n");
    let o = run(&["aep", "--layout", layout.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "n_turbines = 8\nturbines = 9\n");
    let layout = write(dir.path(), "l.csv", "x_m,y_m\n0,0\n");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "aep",
        "--layout",
        layout.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn infeasible_farm_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", "n_turbines = 40\n");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "optimize",
        "--output",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(
        stderr(&o).contains("cannot place 40 turbines"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn aep_call_counts() {
    let dir = TempDir::new().unwrap();
    let layout = write(
        dir.path(),
        "l.csv",
        "turbine_idx,x_m,y_m\n0,0,0\n1,1008,1008\n",
    );
    let o = run(&["aep", "--layout", layout.to_str().unwrap()]);
    assert!(
        stdout(&o).contains("farm_power_calls: 1584"),
        "{}",
        stdout(&o)
    );
    let o = run(&[
        "aep",
        "--layout",
        layout.to_str().unwrap(),
        "--method",
        "pce",
    ]);
    let out = stdout(&o);
    assert!(
        out.contains("farm_power_calls: 50") && out.contains("pce_order: "),
        "{out}"
    );
    let cfg = write(
        dir.path(),
        "c.toml",
        "speed_mode = \"constant\"\nconstant_speed = 8.0\n",
    );
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "aep",
        "--layout",
        layout.to_str().unwrap(),
    ]);
    assert!(
        stdout(&o).contains("farm_power_calls: 72"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn optimize_writes_a_replayable_bundle() {
    let dir = TempDir::new().unwrap();
    let cfg = smoke_config(dir.path());
    let o = run(&["--config", cfg.to_str().unwrap(), "optimize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in [
        "manifest.toml",
        "best_layout.csv",
        "history.csv",
        "archive.csv",
        "state.json",
        "function_calls.csv",
        "summary.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,phase,aep_wh,best_aep_wh,function_calls_cum\n"));
    assert!(
        history.contains(",msp,") && history.contains(",ei,"),
        "{history}"
    );
    let best = fs::read_to_string(out.join("best_layout.csv")).unwrap();
    assert_eq!(best.lines().count(), 4);

    let manifest = out.join("manifest.toml");
    let replay = dir.path().join("replay");
    let o = Command::new(BIN)
        .args(["--config", manifest.to_str().unwrap(), "optimize"])
        .env("WFLO_OUTPUT_DIR", &replay)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "history.csv",
        "archive.csv",
        "best_layout.csv",
        "summary.json",
        "function_calls.csv",
    ] {
        assert_eq!(
            fs::read(out.join(f)).unwrap(),
            fs::read(replay.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn evaluation_cap_gives_exit_code_two() {
    let dir = TempDir::new().unwrap();
    let cfg = smoke_config(dir.path());
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "optimize",
        "--output",
        dir.path().join("capped").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("sbo_max_evaluations = 200", "sbo_max_evaluations = 20");
    fs::write(&cfg, text).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "optimize"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn direct_mode_runs_on_traversal() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "d.toml",
        "farm_width_d = 4.0\nfarm_height_d = 4.0\ngrid_nx = 5\ngrid_ny = 5\nn_turbines = 2\n\
         ga_population = 10\nga_generations = 5\noptimize_mode = \"direct\"\n",
    );
    let out = dir.path().join("o");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "optimize",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let calls = fs::read_to_string(out.join("function_calls.csv")).unwrap();
    assert!(
        calls.lines().nth(1).unwrap().starts_with("direct,"),
        "{calls}"
    );
    assert!(calls.contains(",1584,"), "{calls}");
    assert!(!out.join("archive.csv").exists());
}
