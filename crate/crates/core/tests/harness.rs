mod common;

use std::process::Command;

use binmatch::harness::{
    emit_csv, evaluate, load_dataset, run_pair, EvalParams, HarnessError, Mode,
};
use binmatch::imageio::save_pgm;
use binmatch::Homography;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_binmatch"))
}

#[test]
fn complete_sequence_has_five_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let hs = common::write_sequence(dir.path(), 1, 6);
    let pairs = load_dataset(dir.path()).unwrap();
    assert_eq!(pairs.len(), 5);
    for (p, h) in pairs.iter().zip(&hs) {
        assert_eq!(p.ref_index, 1);
        assert!(p.h_gt.max_abs_diff(h) < 1e-9);
    }
    assert_eq!(pairs[4].label(), "1-6");
}

#[test]
fn missing_homography_is_named() {
    let dir = tempfile::tempdir().unwrap();
    common::write_sequence(dir.path(), 2, 6);
    std::fs::remove_file(dir.path().join("H1to4p")).unwrap();
    match load_dataset(dir.path()) {
        Err(HarnessError::MissingFile(p)) => assert!(p.ends_with("H1to4p")),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_homography_reports_file() {
    let dir = tempfile::tempdir().unwrap();
    common::write_sequence(dir.path(), 2, 3);
    std::fs::write(dir.path().join("H1to3p"), "1 0 0\n0 1 0\n").unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().contains("H1to3p"), "{err}");
}

#[test]
fn mini_dataset_identity() {
    let dir = tempfile::tempdir().unwrap();
    let img = common::textured_image(3, 120, 100, 5);
    save_pgm(&img, dir.path().join("img1.pgm")).unwrap();
    save_pgm(&img, dir.path().join("img2.pgm")).unwrap();
    std::fs::write(dir.path().join("H1to2p"), "1 0 0\n0 1 0\n0 0 1\n").unwrap();
    let pairs = load_dataset(dir.path()).unwrap();
    assert_eq!(pairs.len(), 1);
    assert_eq!(pairs[0].h_gt, Homography::identity());

    let params = EvalParams {
        modes: vec![Mode::Threshold(5)],
        ..EvalParams::default()
    };
    let recs = run_pair(&pairs[0], &params).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0].m > 0);
    assert_eq!(recs[0].cm, recs[0].m);
    assert!(recs[0].ns_per_decision > 0.0);
}

#[test]
fn featureless_pair_yields_zero_records() {
    let dir = tempfile::tempdir().unwrap();
    let flat = binmatch::GrayImage::new(64, 64, vec![40; 64 * 64]).unwrap();
    save_pgm(&flat, dir.path().join("img1.pgm")).unwrap();
    save_pgm(&flat, dir.path().join("img2.pgm")).unwrap();
    std::fs::write(dir.path().join("H1to2p"), "1 0 0 0 1 0 0 0 1").unwrap();
    let recs = evaluate(dir.path(), &EvalParams::default()).unwrap();
    assert_eq!(recs.len(), 4);
    assert!(recs.iter().all(|r| r.m == 0 && r.cm == 0));
}

#[test]
fn modes_ordered_and_sandwiched() {
    let dir = tempfile::tempdir().unwrap();
    common::write_sequence(dir.path(), 4, 4);
    let recs = evaluate(dir.path(), &EvalParams::default()).unwrap();
    assert_eq!(recs.len(), 3 * 4);
    for chunk in recs.chunks(4) {
        let modes: Vec<_> = chunk.iter().map(|r| r.mode).collect();
        assert_eq!(modes, Mode::TABLE);
        let m: Vec<_> = chunk.iter().map(|r| r.m).collect();
        assert!(m[0] <= m[1] && m[1] <= m[3] && m[3] <= m[2], "{m:?}");
        assert!(chunk.iter().all(|r| r.cm <= r.m));
    }
}

#[test]
fn csv_is_reproducible_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    common::write_sequence(&dir.path().join("seq"), 5, 3);
    let strip = |p: &std::path::Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_owned())
            .collect()
    };
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    emit_csv(&evaluate(dir.path(), &EvalParams::default()).unwrap(), &out1).unwrap();
    emit_csv(&evaluate(dir.path(), &EvalParams::default()).unwrap(), &out2).unwrap();
    let a = strip(&out1);
    assert_eq!(a, strip(&out2));
    assert_eq!(a[0], "dataset,pair,mode,M,CM");
    assert_eq!(a.len(), 1 + 2 * 4);
    assert!(a[1].starts_with("seq,1-2,t5,"));
}

#[test]
fn cli_detect_match_eval() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    common::write_sequence(&seq, 6, 2);
    let da = dir.path().join("a.bd");
    let db = dir.path().join("b.bd");
    for (img, out) in [("img1.pgm", &da), ("img2.pgm", &db)] {
        let st = bin()
            .args(["detect", "--image"])
            .arg(seq.join(img))
            .args(["--threshold", "20", "--max-kp", "500", "--seed", "42", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(st.success());
    }
    let (kps, _) = binmatch::features::read_descriptors(&da).unwrap();
    assert!(!kps.is_empty() && kps.len() <= 500);

    let mcsv = dir.path().join("m.csv");
    let st = bin()
        .args(["match", "--a"])
        .arg(&da)
        .arg("--b")
        .arg(&db)
        .args(["--fuzzy", "--low", "0,0,10,15", "--high", "10,15,256,256", "--cutoff", "0.5", "--out"])
        .arg(&mcsv)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(&mcsv).unwrap();
    assert!(text.starts_with("index_a,index_b,distance_bits,degree\n"));

    let st = bin()
        .args(["match", "--a"])
        .arg(&da)
        .arg("--b")
        .arg(&db)
        .args(["--t", "13", "--out"])
        .arg(dir.path().join("c.csv"))
        .status()
        .unwrap();
    assert!(st.success());
    let crisp = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    // same pairs as the fuzzy run, minus the degree column
    let key = |s: &str| -> Vec<String> {
        s.lines()
            .skip(1)
            .map(|l| l.rsplit_once(',').unwrap().0.to_owned())
            .collect()
    };
    assert_eq!(key(&text), key(&crisp));

    let ecsv = dir.path().join("e.csv");
    let out = bin()
        .args(["eval", "--dataset"])
        .arg(&seq)
        .args(["--modes", "t5,t10,t15,fuzzy", "--eps", "3", "--ransac-iters", "200", "--seed", "9", "--out"])
        .arg(&ecsv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(&ecsv).unwrap();
    assert_eq!(rows.lines().count(), 5);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(bin().status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["match", "--a", "x"]).status().unwrap().code(), Some(1));
    assert_eq!(
        bin()
            .args(["eval", "--dataset", "d", "--modes", "t5,bogus", "--out", "o"])
            .status()
            .unwrap()
            .code(),
        Some(1)
    );
    assert_eq!(
        bin()
            .args(["match", "--a", "a", "--b", "b", "--fuzzy", "--cutoff", "1.5", "--out", "o"])
            .status()
            .unwrap()
            .code(),
        Some(1)
    );
    assert_eq!(bin().arg("--help").status().unwrap().code(), Some(0));
    // data errors
    let missing = dir.path().join("nope.pgm");
    assert_eq!(
        bin()
            .args(["detect", "--image"])
            .arg(&missing)
            .arg("--out")
            .arg(dir.path().join("o.bd"))
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
    let junk = dir.path().join("junk.bd");
    std::fs::write(&junk, b"XXXX").unwrap();
    assert_eq!(
        bin()
            .args(["match", "--a"])
            .arg(&junk)
            .arg("--b")
            .arg(&junk)
            .args(["--t", "5", "--out"])
            .arg(dir.path().join("o.csv"))
            .status()
            .unwrap()
            .code(),
        Some(2)
    );
}
