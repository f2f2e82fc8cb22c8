use super::*;
use crate::sim::Method;

fn fixture_path() -> String {
    format!("{}/../../data/wind/fixture.csv", env!("CARGO_MANIFEST_DIR"))
}

fn fixture_records() -> (Vec<WindRecord>, ParseSummary) {
    let file = std::fs::File::open(fixture_path()).unwrap();
    parse_isd(file, &IsdColumns::default()).unwrap()
}

#[test]
fn parses_fixture_with_skip_counts() {
    let (records, summary) = fixture_records();
    assert_eq!(records.len(), 50);
    assert_eq!(summary.kept, 50);
    assert_eq!(summary.calm, 1);
    assert_eq!(summary.missing, 1);
    assert_eq!(summary.subhourly_dropped, 1);
    assert_eq!(summary.malformed, 0);
    for r in &records {
        assert!((0.0..360.0).contains(&r.direction_deg));
    }
    let mut ts: Vec<i64> = records.iter().map(|r| r.timestamp).collect();
    ts.dedup();
    assert_eq!(ts.len(), 50, "timestamps unique after hourly dedup");
}

#[test]
fn direction_conversion_and_geodesic_error() {
    let records = vec![
        WindRecord { timestamp: 0, direction_deg: 350.0 },
        WindRecord { timestamp: 3600, direction_deg: 10.0 },
    ];
    let data = records_to_dataset(&records).unwrap();
    let ys: Vec<_> = data.observations().map(|(_, y)| y.clone()).collect();
    assert!((ys[0].coords()[0] - 350.0 * PI / 180.0).abs() < 1e-12);
    // Intrinsic error: 20 degrees, never 340.
    let d = ys[0].dist(&ys[1]).unwrap();
    assert!((d - 20.0 * PI / 180.0).abs() < 1e-12);
}

#[test]
fn parse_direction_variants() {
    let csv = "DATE,WND\n0,\"123,1,N,0046,1\"\n3600,\"999,9,9,0015,1\"\n\
               7200,\"000,1,C,0000,1\"\n10800,261\n14400,calm\n18000,xyz\n";
    let (records, summary) = parse_isd(csv.as_bytes(), &IsdColumns::default()).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].direction_deg, 123.0);
    assert_eq!(records[1].direction_deg, 261.0);
    assert_eq!(summary.missing, 1);
    assert_eq!(summary.calm, 2);
    assert_eq!(summary.malformed, 1);
}

#[test]
fn iso_timestamps_are_hour_spaced() {
    let csv = "DATE,WND\n2023-06-01T00:00:00,10\n2023-06-01T01:00:00,20\n2023-06-02T00:00:00,30\n";
    let (records, _) = parse_isd(csv.as_bytes(), &IsdColumns::default()).unwrap();
    assert_eq!(records[1].timestamp - records[0].timestamp, 3600);
    assert_eq!(records[2].timestamp - records[0].timestamp, 86400);
}

#[test]
fn block_split_shape() {
    let split = BlockSplit::new(50).unwrap();
    assert_eq!(split.block.len(), 50);
    let n_test = split.test.iter().filter(|t| **t).count();
    // Every fifth of twenty blocks is held out: about 20 percent.
    assert!((0.15..=0.25).contains(&(n_test as f64 / 50.0)));
    for (i, b) in split.block.iter().enumerate() {
        assert_eq!(split.test[i], (b + 1) % 5 == 0);
        if !split.test[i] {
            assert!(split.fold[i] < split.n_folds);
        }
    }
    // Determinism.
    let again = BlockSplit::new(50).unwrap();
    assert_eq!(split.block, again.block);
    assert_eq!(split.fold, again.fold);
}

#[test]
fn evaluate_wind_on_fixture() {
    let (records, _) = fixture_records();
    let split = BlockSplit::new(records.len()).unwrap();
    let metrics =
        evaluate_wind(&records, &[Method::Proposed, Method::Extrinsic], &split).unwrap();
    assert_eq!(metrics.len(), 2);
    for m in &metrics {
        assert!(m.msge.is_finite() && m.msge >= 0.0, "{m:?}");
        assert!(m.rmge_deg.is_finite());
        assert!(m.median_deg.is_finite());
    }
    let proposed = metrics.iter().find(|m| m.method == "proposed").unwrap();
    let extrinsic = metrics.iter().find(|m| m.method == "extrinsic").unwrap();
    assert!(
        proposed.msge <= extrinsic.msge,
        "proposed {} vs extrinsic {}",
        proposed.msge,
        extrinsic.msge
    );
}

#[test]
fn perfect_predictor_zero_msge() {
    // Constant-signal records: every method that can fit a constant gets
    // zero test error.
    let records: Vec<WindRecord> =
        (0..40).map(|h| WindRecord { timestamp: h * 3600, direction_deg: 123.0 }).collect();
    let split = BlockSplit::new(records.len()).unwrap();
    let metrics = evaluate_wind(&records, &[Method::Proposed, Method::FrechetRegression], &split)
        .unwrap();
    for m in &metrics {
        assert!(m.msge < 1e-12, "{m:?}");
    }
}
