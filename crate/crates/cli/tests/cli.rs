use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ctprog(args: &[&str]) -> Output {
    ctprog_env(args, &[])
}

fn ctprog_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctprog"));
    cmd.args(args).env_remove("CTPROG_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run ctprog")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cohort(dir: &Path, n: usize, seed: u64) -> PathBuf {
    ok(ctprog(&["synth-cohort", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out-dir", s(dir)]));
    dir.join("manifest.csv")
}

fn write_mask(path: &Path, dims: [usize; 3], bits: &[u8]) {
    let header = format!(
        "{{\"format\":\"MVOL\",\"version\":1,\"dims\":[{},{},{}],\"spacing_mm\":[1.0,1.0,1.0],\"origin_mm\":[0.0,0.0,0.0],\"dtype\":\"uint8\",\"payload\":\"{}\"}}",
        dims[0],
        dims[1],
        dims[2],
        path.with_extension("raw").file_name().unwrap().to_str().unwrap()
    );
    fs::write(path, header).unwrap();
    fs::write(path.with_extension("raw"), bits).unwrap();
}

fn payload(path: &Path) -> Vec<u8> {
    fs::read(path.with_extension("raw")).unwrap()
}

#[test]
fn full_chain_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = cohort(&d.join("cohort"), 80, 5);
    let feats = d.join("features.csv");
    ok(ctprog(&["extract-features", "--manifest", s(&manifest), "--out", s(&feats)]));
    let again = d.join("features2.csv");
    ok(ctprog_env(
        &["extract-features", "--manifest", s(&manifest), "--out", s(&again)],
        &[("CTPROG_THREADS", "2")],
    ));
    assert!(fs::read(&feats).unwrap() == fs::read(&again).unwrap(), "extraction is not reproducible");
    let text = fs::read_to_string(&feats).unwrap();
    assert_eq!(text.lines().count(), 81);
    assert!(!text.contains('\r'));

    let sel = d.join("selection.json");
    ok(ctprog(&["select-features", "--features", s(&feats), "--out", s(&sel)]));
    let model = d.join("model.json");
    let screen = d.join("screen.csv");
    ok(ctprog(&[
        "train", "--features", s(&feats), "--selection", s(&sel), "--out", s(&model), "--screen-report", s(&screen),
    ]));
    // One row per method and metric.
    assert_eq!(fs::read_to_string(&screen).unwrap().lines().count(), 1 + 13 * 4);

    let preds = d.join("predictions.csv");
    ok(ctprog(&["predict", "--model", s(&model), "--features", s(&feats), "--out", s(&preds)]));
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 81);

    let report = d.join("report.csv");
    let confusion = d.join("confusion.csv");
    ok(ctprog(&[
        "evaluate", "--predictions", s(&preds), "--truth", s(&feats), "--out", s(&report), "--confusion", s(&confusion),
    ]));
    let report = fs::read_to_string(&report).unwrap();
    for task in ["stage1", "stage2", "three_class_hierarchical", "three_class_ovr"] {
        assert!(report.contains(task), "{report}");
    }

    // The model refuses a table without its columns.
    let selected: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sel).unwrap()).unwrap();
    let first = selected["selected"][0].as_str().unwrap().to_string();
    let header = text.lines().next().unwrap();
    let col = header.split(',').position(|c| c == first).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",") + "\n"
        })
        .collect();
    let bad = d.join("stripped.csv");
    fs::write(&bad, stripped).unwrap();
    let o = ctprog(&["predict", "--model", s(&model), "--features", s(&bad), "--out", s(&d.join("p2.csv"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains(&first));
}

#[test]
fn perfect_predictions_report_ones() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.csv");
    fs::write(&preds, "patient_id,outcome\na,0\nb,1\nc,2\nd,2\ne,0\n").unwrap();
    let truth = dir.path().join("t.csv");
    fs::write(&truth, "patient_id,outcome\na,0\nb,1\nc,2\nd,2\ne,0\n").unwrap();
    let out = dir.path().join("r.csv");
    ok(ctprog(&["evaluate", "--predictions", s(&preds), "--truth", s(&truth), "--out", s(&out)]));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mut rows = 0;
    for line in lines {
        for (h, v) in header.iter().zip(line.split(',')).skip(2) {
            assert_eq!(v.parse::<f64>().unwrap(), 1.0, "{h} in {line}");
        }
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn missing_disease_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cohort(&dir.path().join("c"), 50, 1);
    let text = fs::read_to_string(&manifest).unwrap();
    let first = text.lines().find(|l| !l.starts_with('#') && !l.starts_with("patient_id")).unwrap();
    let disease = first.split(',').nth(4).unwrap();
    fs::remove_file(dir.path().join("c").join(disease)).unwrap();
    let out = dir.path().join("f.csv");
    let o = ctprog(&["extract-features", "--manifest", s(&manifest), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let id = first.split(',').next().unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains(id));
    assert!(!out.exists());
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.csv");
    let out = dir.path().join("o.json");
    let o = ctprog(&["select-features", "--features", s(&absent), "--out", s(&out)]);
    assert_eq!(code(&o), 2);

    let feats = dir.path().join("f.csv");
    fs::write(&feats, "patient_id,outcome,a\np,0,1\n").unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\"no_such_field\": 1}").unwrap();
    let o = ctprog(&["select-features", "--features", s(&feats), "--out", s(&out), "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);

    let o = ctprog_env(&["select-features", "--features", s(&feats), "--out", s(&out)], &[("CTPROG_THREADS", "0")]);
    assert_eq!(code(&o), 2);
    let o = ctprog_env(&["select-features", "--features", s(&feats), "--out", s(&out)], &[("CTPROG_THREADS", "many")]);
    assert_eq!(code(&o), 2);
}

fn fuse(mode: &str, out: &Path, inputs: &[&Path]) -> Output {
    let mut args = vec!["fuse-masks", "--mode", mode, "--out", s(out), "--inputs"];
    args.extend(inputs.iter().map(|p| s(p)));
    ctprog(&args)
}

#[test]
fn vote_fusion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dims = [4, 2, 1];
    let a = [1, 1, 0, 0, 1, 0, 1, 0];
    let dissent = [0, 1, 1, 0, 0, 0, 1, 1];
    let [pa, pb, pc, small, out] = ["a", "b", "c", "small", "o"].map(|n| d.join(format!("{n}.mvol")));
    write_mask(&pa, dims, &a);
    write_mask(&pb, dims, &a);
    write_mask(&pc, dims, &dissent);
    write_mask(&small, [2, 2, 1], &[1, 0, 0, 1]);

    ok(fuse("vote", &out, &[&pa, &pa, &pa]));
    assert_eq!(payload(&out), a);
    ok(fuse("vote", &out, &[&pa, &pc, &pb]));
    assert_eq!(payload(&out), a);
    // Probability mode reads masks as 0/1 maps; a mean of 2/3 clears 0.5.
    ok(fuse("prob", &out, &[&pa, &pc, &pb]));
    assert_eq!(payload(&out), a);

    assert_eq!(code(&fuse("vote", &out, &[&pa, &small])), 2);
}

#[test]
fn segmentation_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let dims = [4, 2, 1];
    write_mask(&d.join("pred.mvol"), dims, &[1, 1, 0, 0, 0, 0, 0, 0]);
    write_mask(&d.join("b.mvol"), dims, &[1, 0, 0, 0, 0, 0, 0, 0]);
    write_mask(&d.join("lungs.mvol"), dims, &[1; 8]);
    let out = d.join("seg.csv");
    ok(ctprog(&[
        "evaluate-seg",
        "--pred", s(&d.join("pred.mvol")),
        "--ref-a", s(&d.join("pred.mvol")),
        "--ref-b", s(&d.join("b.mvol")),
        "--lungs", s(&d.join("lungs.mvol")),
        "--out", s(&out),
    ]));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "comparison,dice,hausdorff_mm,extent_first_pct,extent_second_pct");
    let first: Vec<f64> = lines[1].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert!(lines[1].starts_with("pred_vs_a,"));
    assert_eq!(first, [1.0, 0.0, 25.0, 25.0]);
    assert!(lines[2].starts_with("pred_vs_b,"));
    assert!(lines[3].starts_with("a_vs_b,"));
}
