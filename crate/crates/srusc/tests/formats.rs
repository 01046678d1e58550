use std::fs;

use proptest::prelude::*;
use srusc::formats::{cube_paths, labels_from_csv, labels_to_csv, load_cube, load_labels, save_cube, save_labels};
use srusc::Error;
use srusc_core::{HsiCube, LabelRaster};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cube_round_trip_is_bit_exact(
        rows in 1usize..6,
        cols in 1usize..6,
        bands in 1usize..5,
        seed in any::<u64>(),
    ) {
        let n = rows * cols * bands;
        let data: Vec<f32> = (0..n as u64)
            .map(|i| f32::from_bits(((seed ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15)) as u32) & 0x7f7f_ffff))
            .map(|v| if v.is_finite() { v } else { 0.0 })
            .collect();
        let cube = HsiCube::new(rows, cols, bands, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("c");
        save_cube(&stem, &cube).unwrap();
        let back = load_cube(&stem).unwrap();
        prop_assert_eq!(back.rows(), rows);
        let same = cube.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn label_csv_round_trip(rows in 1usize..8, cols in 1usize..8, seed in any::<u32>()) {
        let labels: Vec<u32> = (0..(rows * cols) as u32).map(|i| (seed.wrapping_add(i * 7919)) % 13).collect();
        let l = LabelRaster::new(rows, cols, labels).unwrap();
        prop_assert_eq!(labels_from_csv(&labels_to_csv(&l)).unwrap(), l);
    }
}

#[test]
fn header_of_synthetic_size_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("fs");
    let cube = HsiCube::new(40, 50, 200, vec![0.5; 40 * 50 * 200]).unwrap();
    save_cube(&stem, &cube).unwrap();
    let (json, raw) = cube_paths(&stem);
    assert_eq!(fs::metadata(&raw).unwrap().len(), 40 * 50 * 200 * 4);
    let header: serde_json::Value = serde_json::from_slice(&fs::read(json).unwrap()).unwrap();
    assert_eq!(header["order"], "bip-rowmajor");
    assert_eq!(header["byte_order"], "little");
    assert_eq!(header["dtype"], "f32");
    assert_eq!(load_cube(&stem).unwrap(), cube);
}

#[test]
fn truncated_raw_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("t");
    save_cube(&stem, &HsiCube::new(2, 3, 4, vec![1.0; 24]).unwrap()).unwrap();
    let (_, raw) = cube_paths(&stem);
    let bytes = fs::read(&raw).unwrap();
    fs::write(&raw, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(load_cube(&stem), Err(Error::Format(_))));
}

#[test]
fn non_finite_values_are_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("nan");
    save_cube(&stem, &HsiCube::new(1, 2, 1, vec![1.0, 2.0]).unwrap()).unwrap();
    let (_, raw) = cube_paths(&stem);
    let mut bytes = fs::read(&raw).unwrap();
    bytes[4..8].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(&raw, bytes).unwrap();
    assert!(matches!(load_cube(&stem), Err(Error::Format(_))));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_cube(&dir.path().join("none")), Err(Error::Io { .. })));
    assert!(matches!(load_labels(&dir.path().join("none.csv")), Err(Error::Io { .. })));
}

#[test]
fn label_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gt.csv");
    let l = LabelRaster::new(3, 2, vec![1, 0, 2, 2, 0, 1]).unwrap();
    save_labels(&path, &l).unwrap();
    assert_eq!(fs::read_to_string(&path).unwrap(), "1,0\n2,2\n0,1\n");
    assert_eq!(load_labels(&path).unwrap(), l);
}
