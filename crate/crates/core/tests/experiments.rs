use liftlab::experiments::{
    run_experiment, ExperimentConfig, ExperimentName, Format, Report, SCHEMA_VERSION,
};
use liftlab::Error;
use serde_json::json;

fn small(name: ExperimentName) -> ExperimentConfig {
    let over = match name {
        ExperimentName::ReverseOsc => json!({"family_size": 4, "resolutions": [64, 128]}),
        ExperimentName::DfoldRatio => {
            json!({"resolutions": [256], "options": {"xi": [std::f64::consts::TAU, 2.0 * std::f64::consts::TAU]}})
        }
        ExperimentName::Bubble => {
            json!({"options": {"deltas": [0.5, 0.25], "cells_per_layer": 2.0}})
        }
        ExperimentName::Tower => json!({"options": {"generations": [2], "cells_per_layer": 2.0}}),
        ExperimentName::Monodromy => json!({"resolutions": [32], "options": {"grid_n": 16}}),
        ExperimentName::Patching => json!({"family_size": 3, "resolutions": [64, 128]}),
        ExperimentName::LiftingEstimate => {
            json!({"family_size": 3, "resolutions": [64, 128], "options": {"grid_family_size": 2, "grid_resolutions": [8, 16]}})
        }
    };
    ExperimentConfig::with_overrides(name, &over).unwrap()
}

#[test]
fn every_experiment_runs_and_reports_criteria() {
    for name in ExperimentName::ALL {
        let report = run_experiment(&small(name)).unwrap();
        assert_eq!(report.schema_version, SCHEMA_VERSION);
        assert!(!report.table.rows.is_empty(), "{name}");
        assert!(!report.criteria.is_empty(), "{name}");
        for row in &report.table.rows {
            assert_eq!(row.len(), report.table.columns.len(), "{name}");
        }
    }
}

#[test]
fn json_report_round_trips() {
    let report = run_experiment(&small(ExperimentName::Tower)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = report
        .write(&dir.path().join("tower.json"), Format::Json)
        .unwrap();
    assert_eq!(files.len(), 1);
    let back: Report = serde_json::from_str(&std::fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn csv_writes_extra_tables_beside_the_main_one() {
    let report = run_experiment(&small(ExperimentName::Tower)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = report
        .write(&dir.path().join("tower.csv"), Format::Csv)
        .unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        ["tower.csv", "tower_truncations.csv", "tower_totals.csv"]
    );
    let mut rdr = csv::Reader::from_path(&files[0]).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), report.table.columns.len());
    assert_eq!(rdr.records().count(), report.table.rows.len());
}

#[test]
fn unknown_override_fields_are_rejected() {
    let err = ExperimentConfig::with_overrides(
        ExperimentName::Bubble,
        &json!({"options": {"nonsense": 1}}),
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::Json(_)) && err.to_string().contains("nonsense"),
        "{err}"
    );
    let err =
        ExperimentConfig::with_overrides(ExperimentName::Bubble, &json!({"resolutions": [64, 32]}))
            .unwrap_err();
    assert!(matches!(err, Error::InvalidParams(_)), "{err}");
}

#[test]
fn names_parse_and_print() {
    for name in ExperimentName::ALL {
        assert_eq!(name.as_str().parse::<ExperimentName>().unwrap(), name);
    }
    assert!("bogus".parse::<ExperimentName>().is_err());
}

#[test]
fn dfold_ratio_approaches_d_pow_p_minus_sp() {
    let xi: Vec<f64> = (3..=6)
        .map(|k| std::f64::consts::PI * 2f64.powi(k))
        .collect();
    let c = ExperimentConfig::with_overrides(
        ExperimentName::DfoldRatio,
        &json!({"params": {"s": 0.5, "p": 3.0}, "resolutions": [4096], "options": {"xi": xi}}),
    )
    .unwrap();
    let r = run_experiment(&c).unwrap();
    let ratios: Vec<f64> = r
        .table
        .column("ratio")
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let limit = 2f64.powf(1.5);
    let last = *ratios.last().unwrap();
    assert!((last - limit).abs() / limit < 0.03, "{ratios:?}");
    assert!(ratios
        .windows(2)
        .all(|w| (w[1] - limit).abs() <= (w[0] - limit).abs()));
}
