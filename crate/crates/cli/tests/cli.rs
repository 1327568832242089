use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
clients = 2
size = 60
rounds = 2
local_epochs = 2
train_ig_steps = 4
eval_ig_steps = 4
explain_ig_steps = 16
probe_size = 16
";

fn xfdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xfdl")).args(args).output().unwrap()
}

fn setup(extra: &str) -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, format!("{TINY}{extra}")).unwrap();
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap().to_string(), out.to_str().unwrap().to_string());
    (dir, c, o)
}

fn ok(o: &Output) {
    assert!(o.status.success(), "status {:?}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stderr));
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn generate_writes_one_file_per_station_and_slice() {
    let (_d, cfg, out) = setup("");
    ok(&xfdl(&["generate", "--config", &cfg, "--out", &out]));
    let files = csv_files(&Path::new(&out).join("data"));
    assert_eq!(files.len(), 6);
    assert!(files.contains(&"uRLLC_bs2.csv".to_string()));
    let manifest = fs::read_to_string(Path::new(&out).join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 7);
    assert!(manifest.starts_with("path,slice,bs_id,rows,positives,seed"));

    let first = fs::read(Path::new(&out).join("data/eMBB_bs1.csv")).unwrap();
    ok(&xfdl(&["generate", "--config", &cfg, "--out", &out]));
    assert_eq!(fs::read(Path::new(&out).join("data/eMBB_bs1.csv")).unwrap(), first);

    ok(&xfdl(&["generate", "--config", &cfg, "--out", &out, "--seed", "5"]));
    assert_ne!(fs::read(Path::new(&out).join("data/eMBB_bs1.csv")).unwrap(), first);
}

#[test]
fn invalid_config_exits_2_naming_the_field() {
    let (_d, cfg, out) = setup("size = 0\n");
    let o = xfdl(&["generate", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`size`"));
    assert_eq!(xfdl(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(xfdl(&["generate", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
}

#[test]
fn train_without_datasets_exits_2() {
    let (_d, cfg, out) = setup("");
    let o = xfdl(&["train", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("generate"));
    assert_eq!(xfdl(&["train", "--config", &cfg, "--out", &out, "--mode", "sideways"]).status.code(), Some(2));
}

#[test]
fn train_both_modes_then_explain_and_report() {
    let (_d, cfg, out) = setup("");
    let root = Path::new(&out);
    ok(&xfdl(&["generate", "--config", &cfg, "--out", &out]));
    for mode in ["constrained", "vanilla"] {
        ok(&xfdl(&["train", "--config", &cfg, "--out", &out, "--mode", mode]));
        let rounds = fs::read_to_string(root.join(mode).join("rounds.csv")).unwrap();
        assert!(rounds.starts_with("round,slice,mode,train_loss,mean_recall,mean_log_odds,feasible_fraction\n"));
        for slice in ["eMBB", "uRLLC", "mMTC"] {
            assert_eq!(rounds.lines().filter(|l| l.split(',').nth(1) == Some(slice)).count(), 2);
            for t in 0..=2 {
                assert!(root.join(mode).join(format!("models/model_{slice}_{t}.xfsw")).exists());
            }
            assert!(root.join(mode).join(slice).join("correlation.csv").exists());
        }
        let trace = fs::read_to_string(root.join(mode).join("traces/mMTC_bs2.csv")).unwrap();
        let header = trace.lines().next().unwrap();
        if mode == "vanilla" {
            assert_eq!(header, "epoch,loss");
        } else {
            assert_eq!(header, "epoch,loss,recall,log_odds,g1,g2,lambda0,lambda1,lambda2");
        }
        let epochs: Vec<&str> = trace.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(epochs, vec!["0", "1", "2", "3"]);
    }

    let before = fs::read(root.join("constrained/rounds.csv")).unwrap();
    ok(&xfdl(&["train", "--config", &cfg, "--out", &out, "--mode", "constrained"]));
    assert_eq!(fs::read(root.join("constrained/rounds.csv")).unwrap(), before);

    let model = root.join("constrained/models/model_eMBB_2.xfsw");
    let explained = root.join("explained");
    ok(&xfdl(&[
        "explain",
        "--config",
        &cfg,
        "--out",
        explained.to_str().unwrap(),
        "--top-p",
        "66,0,100,33",
        model.to_str().unwrap(),
        root.join("data/eMBB_bs1.csv").to_str().unwrap(),
        root.join("data/eMBB_bs2.csv").to_str().unwrap(),
    ]));
    let curve = fs::read_to_string(explained.join("logodds_curve.csv")).unwrap();
    let rows: Vec<(f64, f64)> = curve
        .lines()
        .skip(1)
        .map(|l| {
            let (p, t) = l.split_once(',').unwrap();
            (p.parse().unwrap(), t.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0.0, 33.0, 66.0, 100.0]);
    assert_eq!(rows[0].1, 0.0);
    let attributions = fs::read_to_string(explained.join("attributions.csv")).unwrap();
    assert_eq!(attributions.lines().count(), 1 + 120);
    let corr = fs::read_to_string(explained.join("correlation.csv")).unwrap();
    let lines: Vec<&str> = corr.lines().collect();
    assert_eq!(lines.len(), 6);
    for (i, l) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[i + 1].parse::<f64>().unwrap(), 1.0);
    }

    ok(&xfdl(&["report", "--out", &out]));
    let summary = fs::read_to_string(root.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 6);
    let compare = fs::read_to_string(root.join("logodds_compare.csv")).unwrap();
    assert_eq!(compare.lines().count(), 1 + 2 * 3 * 4);
}

#[test]
fn explain_rejects_a_mismatched_architecture() {
    let (_d, cfg, out) = setup("");
    let root = Path::new(&out);
    ok(&xfdl(&["generate", "--config", &cfg, "--out", &out]));
    ok(&xfdl(&["train", "--config", &cfg, "--out", &out, "--mode", "vanilla"]));
    let wide = root.parent().unwrap().join("wide.cfg");
    fs::write(&wide, format!("{TINY}hidden = 4\n")).unwrap();
    let o = xfdl(&[
        "explain",
        "--config",
        wide.to_str().unwrap(),
        "--out",
        root.join("x").to_str().unwrap(),
        root.join("vanilla/models/model_uRLLC_1.xfsw").to_str().unwrap(),
        root.join("data/uRLLC_bs1.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = xfdl(&[
        "explain",
        "--out",
        root.join("x").to_str().unwrap(),
        "--top-p",
        "120",
        root.join("vanilla/models/model_uRLLC_1.xfsw").to_str().unwrap(),
        root.join("data/uRLLC_bs1.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergent_training_exits_3() {
    let (_d, cfg, out) = setup("lr = 1e200\n");
    ok(&xfdl(&["generate", "--config", &cfg, "--out", &out]));
    let o = xfdl(&["train", "--config", &cfg, "--out", &out, "--mode", "vanilla"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("round 0"));
}

#[test]
fn report_without_runs_exits_2() {
    let (_d, _cfg, out) = setup("");
    assert_eq!(xfdl(&["report", "--out", &out]).status.code(), Some(2));
}
