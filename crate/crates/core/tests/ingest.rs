use std::fs;

use celltide_core::cdr::{ingest_dir, Channel, SLOT_MS};
use celltide_core::dataset::MILAN_T0_MS as T0;
use celltide_core::Error;

mod common;
use common::write_cdr_fixture as write_fixture;

#[test]
fn full_record_spans_8928_slots() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 62, 144);
    let s = ingest_dir(dir.path(), 1, Channel::Internet).unwrap();
    assert_eq!(s.len(), 8928);
    assert_eq!(s.t0_ms, T0);
}

#[test]
fn mass_is_conserved_and_reingestion_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mass = write_fixture(dir.path(), 3, 144);
    let a = ingest_dir(dir.path(), 1, Channel::Internet).unwrap();
    let total: f64 = a.values.iter().sum();
    assert!((total - mass).abs() <= 1e-9 * mass, "{total} vs {mass}");
    let b = ingest_dir(dir.path(), 1, Channel::Internet).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
}

#[test]
fn split_files_give_the_same_series() {
    let one = tempfile::tempdir().unwrap();
    let two = tempfile::tempdir().unwrap();
    write_fixture(one.path(), 2, 144);
    write_fixture(two.path(), 2, 144);
    // concatenate the two day files of `one` into a single file
    let mut names: Vec<_> = fs::read_dir(one.path()).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    let joined: String = names.iter().map(|p| fs::read_to_string(p).unwrap()).collect();
    for p in &names {
        fs::remove_file(p).unwrap();
    }
    fs::write(one.path().join("all.txt"), joined).unwrap();
    for ch in [Channel::Internet, Channel::SmsIn, Channel::CallOut] {
        assert_eq!(ingest_dir(one.path(), 1, ch).unwrap(), ingest_dir(two.path(), 1, ch).unwrap());
    }
}

#[test]
fn missing_slots_become_zero_and_span_covers_all_grids() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "2\t{}\t39\t\t\t\t\t1.0\n1\t{}\t39\t\t\t\t\t5.0\n2\t{}\t39\t\t\t\t\t1.0\n",
        T0,
        T0 + 2 * SLOT_MS,
        T0 + 4 * SLOT_MS + 123
    );
    fs::write(dir.path().join("d.txt"), text).unwrap();
    let s = ingest_dir(dir.path(), 1, Channel::Internet).unwrap();
    assert_eq!(s.values, vec![0.0, 0.0, 5.0, 0.0, 0.0]);
}

#[test]
fn single_record() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.txt"), format!("1\t{T0}\t39\t0.2\t0.1\t0.05\t0.07\t10.5\n")).unwrap();
    let s = ingest_dir(dir.path(), 1, Channel::Internet).unwrap();
    assert_eq!(s.values, vec![10.5]);
    assert_eq!(ingest_dir(dir.path(), 1, Channel::SmsOut).unwrap().values, vec![0.1]);
}

#[test]
fn errors_name_file_and_line() {
    let empty = tempfile::tempdir().unwrap();
    assert!(ingest_dir(empty.path(), 1, Channel::Internet).is_err());

    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), format!("1\t{T0}\t39\n\nabc\t{T0}\t39\n")).unwrap();
    match ingest_dir(dir.path(), 1, Channel::Internet) {
        Err(Error::FileParse { path, line, .. }) => {
            assert!(path.ends_with("a.txt"));
            assert_eq!(line, 3);
        }
        other => panic!("expected file parse error, got {other:?}"),
    }
}
