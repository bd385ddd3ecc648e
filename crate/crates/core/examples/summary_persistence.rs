//! Normality test, summary persistence and forward compatible loading.
use freesum::clt_harness::{
    ks_normality, load_summary, persist_summary, run_experiment, standardize, ExperimentConfig, ExperimentSummary,
};
use freesum::Result;

fn main() -> Result<()> {
    let cfg = ExperimentConfig {
        n: 80,
        n_samples: 60,
        contour_points: 512,
        ..Default::default()
    };
    let summary = run_experiment(&cfg)?;
    let ks = ks_normality(&standardize(&summary.per_sample_statistics)?)?;
    println!("KS statistic {:.4}, p = {:.3}", ks.statistic, ks.p_value);

    let dir = std::env::temp_dir().join(format!("freesum-summary-{}", std::process::id()));
    let path = dir.join("summary.json");
    persist_summary(&summary, &path)?;
    let back = load_summary(&path)?;
    println!("round trip exact: {}", back == summary);

    let mut value: serde_json::Value = serde_json::from_str(&summary.to_json()?)?;
    value["operator_note"] = "rerun after calibration".into();
    let extended = ExperimentSummary::from_json(&value.to_string())?;
    println!("preserved extra field: {}", extended.extra["operator_note"]);

    value.as_object_mut().map(|m| m.remove("schema_version"));
    println!("without version: {}", ExperimentSummary::from_json(&value.to_string()).unwrap_err());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
