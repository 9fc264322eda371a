mod common;

use std::fs;

use common::random_dataset;
use lae_core::covariance::{build_dataset, Dataset};
use lae_core::io::config::ExperimentConfig;
use lae_core::io::idx::load_idx_images;
use lae_core::io::tabular::{load_csv, load_matrix_csv, save_csv, save_matrix_csv};
use lae_core::linalg::{c, CMatrix};
use lae_core::LaeError;

#[test]
fn csv_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (k, hetero) in [(0, false), (1, true)] {
        let d = random_dataset(4, 7, false, hetero, 40 + k);
        let path = dir.path().join(format!("d{k}.csv"));
        save_csv(&path, &d).unwrap();
        assert_eq!(load_csv(&path).unwrap(), d);
    }
    let m = CMatrix::from_fn(3, 2, |i, j| c(i as f64 / 3.0, -(j as f64) * 1e-300));
    let path = dir.path().join("m.csv");
    save_matrix_csv(&path, &m).unwrap();
    assert_eq!(load_matrix_csv(&path).unwrap(), m);
}

#[test]
fn csv_real_file_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("real.csv");
    fs::write(&path, "x0_re,x0_im,x1_re,x1_im\n1.5,0,2,0\n-0.25,0,3e2,0\n").unwrap();
    let loaded = load_csv(&path).unwrap();
    let expected = build_dataset(&[vec![c(1.5, 0.0), c(2.0, 0.0)], vec![c(-0.25, 0.0), c(300.0, 0.0)]], None).unwrap();
    assert_eq!(loaded, expected);
    assert!(loaded.is_auto_associative());

    fs::write(&path, "x0_re,x0_im,y0_re,y0_im\n1,0,2,0\n3,1,4,0\n").unwrap();
    assert!(!load_csv(&path).unwrap().is_auto_associative());
}

#[test]
fn csv_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "x0_re,x1_re\n1,2\n").unwrap();
    assert!(matches!(load_csv(&path), Err(LaeError::Format(m)) if m.contains("malformed header")));

    fs::write(&path, "x0_re,x0_im\n1,0\n2\n").unwrap();
    assert!(matches!(load_csv(&path), Err(LaeError::Format(m)) if m.contains("row 3")));

    fs::write(&path, "x0_re,x0_im\n1,0\n2,abc\n").unwrap();
    let err = load_csv(&path).unwrap_err().to_string();
    assert!(err.contains("row 3") && err.contains("column 2"), "{err}");

    fs::write(&path, "x0_re,x0_im,x1_re,x1_im,y0_re,y0_im\n1,0,1,0,1,0\n").unwrap();
    assert!(load_csv(&path).is_err());
}

fn idx_header(magic: u32, dims: &[u32]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

#[test]
fn idx_two_image_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    let labels = dir.path().join("labels");
    // Two 2×3 images, row-major pixels.
    let mut bytes = idx_header(0x0000_0803, &[2, 2, 3]);
    bytes.extend_from_slice(&[0, 51, 102, 153, 204, 255]);
    bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
    fs::write(&images, &bytes).unwrap();
    let mut lab = idx_header(0x0000_0801, &[2]);
    lab.extend_from_slice(&[7, 3]);
    fs::write(&labels, &lab).unwrap();

    let all = load_idx_images(&images, Some(&labels), None, None).unwrap();
    assert_eq!((all.n(), all.m()), (6, 2));
    let first: Vec<f64> = all.inputs().column(0).iter().map(|z| z.re).collect();
    assert_eq!(first, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    assert!(all.inputs().iter().all(|z| z.im == 0.0));

    let sevens = load_idx_images(&images, Some(&labels), Some(7), Some(1000)).unwrap();
    assert_eq!(sevens.m(), 1);
    assert_eq!(sevens.inputs().column(0), all.inputs().column(0));
    assert_eq!(load_idx_images(&images, None, None, Some(1)).unwrap().m(), 1);

    let mut short = lab.clone();
    short[7] = 3;
    fs::write(&labels, &short).unwrap();
    assert!(load_idx_images(&images, Some(&labels), None, None).is_err());

    let mut wrong = bytes.clone();
    wrong[3] = 0x01;
    fs::write(&images, &wrong).unwrap();
    assert!(matches!(load_idx_images(&images, None, None, None), Err(LaeError::Format(m)) if m.contains("magic")));

    fs::write(&images, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(load_idx_images(&images, None, None, None), Err(LaeError::Format(m)) if m.contains("truncated")));
}

#[test]
fn config_sources_load() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let d: Dataset = random_dataset(3, 9, true, false, 1);
    save_csv(&csv, &d).unwrap();
    let cfg = ExperimentConfig::from_toml(&format!(
        "p = 1\ncenter = true\n[dataset]\ncsv = {:?}\n",
        csv.display().to_string()
    ))
    .unwrap();
    let loaded = cfg.load_dataset().unwrap();
    assert!(loaded.is_centered());
    assert_eq!(loaded.m(), 9);

    let cfg = ExperimentConfig::from_toml(&format!("p = 3\n[dataset]\ncsv = {:?}\n", csv.display().to_string())).unwrap();
    assert!(matches!(cfg.load_dataset(), Err(LaeError::Config(m)) if m.contains("p < n")));
}
