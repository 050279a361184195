use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn salprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salprop"))
        .args(args)
        .env_remove("SALPROP_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_toy(dir: &Path) -> PathBuf {
    let model = dir.join("toy.model");
    let toy = fixtures().join("toy");
    let out = salprop(&[
        "train",
        "--images",
        s(&toy.join("images")),
        "--masks",
        s(&toy.join("masks")),
        "--model-out",
        s(&model),
        "--max-passes",
        "50",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final duality gap:"));
    assert!(stdout.contains("training hamming accuracy:"));
    model
}

#[test]
fn detect_eval_curves_on_miniset() {
    let tmp = tempfile::tempdir().unwrap();
    let model = train_toy(tmp.path());
    let mini = fixtures().join("miniset");
    let props = tmp.path().join("props");
    let out = salprop(&[
        "detect",
        "--image",
        s(&mini.join("images")),
        "--model",
        s(&model),
        "--out",
        s(&props),
        "--max-n",
        "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs: Vec<_> = std::fs::read_dir(&props).unwrap().collect();
    assert_eq!(csvs.len(), 20);

    let body = std::fs::read_to_string(props.join("synth_single_00.csv")).unwrap();
    let mut lines = body.lines();
    assert!(lines.next().unwrap().starts_with("# salprop detect image="));
    let echo = lines.next().unwrap();
    assert!(echo.starts_with("# ") && echo.contains("max_n=10") && echo.contains("alpha=0.65"));
    assert_eq!(lines.next().unwrap(), "rank,x,y,w,h,score");
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty() && rows.len() <= 10);
    assert!(rows[0].starts_with("1,"));

    let report = tmp.path().join("report.csv");
    let out = salprop(&[
        "eval",
        "--proposals",
        s(&props),
        "--annotations",
        s(&mini.join("annotations")),
        "--iou",
        "0.5,0.7,0.9",
        "--max-n",
        "10",
        "--out",
        s(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let curve_rows = text.lines().filter(|l| !l.starts_with('#') && l.split(',').count() == 3 && !l.starts_with("iou")).count();
    assert_eq!(curve_rows, 30);

    let curves = tmp.path().join("curves.csv");
    let out = salprop(&["curves", "--report", s(&report), "--out", s(&curves)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&curves).unwrap();
    assert!(text.lines().any(|l| l == "series,iou,n,recall"));
    assert!(text.lines().any(|l| l.starts_with("iou_0.9,")));
}

#[test]
fn seed_environment_overrides_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let model = train_toy(tmp.path());
    let img = fixtures().join("miniset/images/synth_single_03.png");
    let out_csv = tmp.path().join("one.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_salprop"))
        .args(["detect", "--image", s(&img), "--model", s(&model), "--out", s(&out_csv), "--seed", "5"])
        .env("SALPROP_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&out_csv).unwrap();
    assert!(body.lines().nth(1).unwrap().contains("seed=77"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let img = fixtures().join("miniset/images/synth_single_00.png");

    // usage
    assert_eq!(salprop(&["detect"]).status.code(), Some(1));
    assert_eq!(salprop(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(salprop(&["--help"]).status.code(), Some(0));

    // missing model file is an I/O failure
    let out = salprop(&[
        "detect",
        "--image",
        s(&img),
        "--model",
        s(&tmp.path().join("absent.model")),
        "--out",
        s(&tmp.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    // empty training directory
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = salprop(&["train", "--images", s(&empty), "--masks", s(&empty), "--model-out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(3));

    // mask whose size does not match its image
    let imgs = tmp.path().join("imgs");
    let masks = tmp.path().join("masks");
    std::fs::create_dir(&imgs).unwrap();
    std::fs::create_dir(&masks).unwrap();
    std::fs::copy(&img, imgs.join("a.png")).unwrap();
    std::fs::copy(fixtures().join("miniset/images/photo_coins.png"), masks.join("a.png")).unwrap();
    let out = salprop(&["train", "--images", s(&imgs), "--masks", s(&masks), "--model-out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // malformed report
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "not,a,report\n1,2\n").unwrap();
    let out = salprop(&["curves", "--report", s(&bad), "--out", s(&tmp.path().join("c.csv"))]);
    assert_eq!(out.status.code(), Some(3));

    // out-of-range tunable
    let out = salprop(&[
        "detect",
        "--image",
        s(&img),
        "--model",
        s(&tmp.path().join("absent.model")),
        "--out",
        s(&tmp.path().join("x.csv")),
        "--alpha",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_and_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let model = train_toy(tmp.path());
    let img = fixtures().join("miniset/images/synth_single_01.png");
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "max_n = 3\nnms_theta = 0.5\n").unwrap();
    let out_csv = tmp.path().join("o.csv");
    let out = salprop(&["detect", "--image", s(&img), "--model", s(&model), "--out", s(&out_csv), "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&out_csv).unwrap();
    assert!(body.contains("max_n=3") && body.contains("nms_theta=0.5"));
    assert!(body.lines().filter(|l| !l.starts_with('#')).count() <= 4);

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = salprop(&["detect", "--image", s(&img), "--model", s(&model), "--out", s(&out_csv), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
}
