//! Tabular encodings of sweep results.
//!
//! Column sets and order are fixed. Floating-point cells use 17 significant
//! digits in scientific notation, so parsing a cell gives back the exact
//! `f64`. Undefined values are written as `NA`.

use crate::experiments::{PointAggregate, TrialRecord};
use crate::risk::McEstimate;
use crate::stats::Summary;

pub const NA: &str = "NA";

/// Columns of `records.csv`, in order.
pub const RECORD_COLUMNS: &[&str] = &[
    "point",
    "variant",
    "d",
    "n",
    "p",
    "gamma",
    "theta_sq",
    "trial",
    "status",
    "error",
    "r_a",
    "r_ba",
    "r_b_on_b",
    "r_null",
    "sigma2",
    "forgetting",
    "ratio",
    "proj_energy",
    "dual_path_diff",
    "ok_single",
    "ok_terminal",
    "ok_forgetting",
    "ok_ratio",
    "ok_projection",
    "emp_a",
    "emp_a_se",
    "emp_ba",
    "emp_ba_se",
    "emp_b_on_b",
    "emp_b_on_b_se",
];

const SUMMARY_METRICS: &[&str] = &["r_a", "r_ba", "r_b_on_b", "r_null", "forgetting", "ratio", "proj_energy"];
const SUMMARY_FIELDS: &[&str] = &["mean", "se", "median", "q10", "q90"];

/// Full-precision decimal.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), num)
}

fn flag(v: Option<bool>) -> String {
    match v {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => NA.into(),
    }
}

fn mc_cells(e: Option<McEstimate>) -> [String; 2] {
    [opt_num(e.map(|e| e.mean)), opt_num(e.map(|e| e.se))]
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory csv writer cannot fail")
}

/// One row per trial record, in record order.
pub fn records_csv(records: &[TrialRecord]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(RECORD_COLUMNS).expect("in-memory write");
    for r in records {
        let mut row: Vec<String> = vec![
            r.point.to_string(),
            r.variant.label().into(),
            r.d.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            num(r.gamma),
            num(r.theta_sq),
            r.trial.to_string(),
        ];
        match &r.outcome {
            Ok(m) => {
                row.push("ok".into());
                row.push(String::new());
                for v in [m.r_a, m.r_ba, m.r_b_on_b, m.r_null, m.sigma2, m.forgetting] {
                    row.push(num(v));
                }
                row.push(opt_num(m.ratio));
                row.push(num(m.proj_energy));
                row.push(num(m.dual_path_difference));
                row.extend(m.flags.iter().map(|(_, f)| flag(f)));
                for e in [m.emp_a, m.emp_ba, m.emp_b_on_b] {
                    row.extend(mc_cells(e));
                }
            }
            Err(msg) => {
                row.push("failed".into());
                row.push(msg.clone());
                row.resize(RECORD_COLUMNS.len(), NA.into());
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

/// Columns of `aggregate.csv`, in order.
pub fn aggregate_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "point", "variant", "d", "n", "p", "gamma", "theta_sq", "trials", "failed", "flagged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for m in SUMMARY_METRICS {
        cols.extend(SUMMARY_FIELDS.iter().map(|f| format!("{m}_{f}")));
    }
    cols.push("ratio_undefined".into());
    cols.extend(
        ["premise_ok", "b_single", "b_terminal", "b_forgetting", "b_ratio", "b_proj"].map(String::from),
    );
    for b in ["single", "terminal", "forgetting", "ratio", "projection"] {
        cols.push(format!("sat_{b}"));
        cols.push(format!("applicable_{b}"));
    }
    cols.extend(["mc_agree", "mc_pairs", "max_dual_path_diff"].map(String::from));
    cols
}

fn summary_cells(s: Option<&Summary>) -> Vec<String> {
    match s {
        Some(s) => [s.mean, s.se, s.median, s.q10, s.q90].into_iter().map(num).collect(),
        None => vec![NA.to_string(); SUMMARY_FIELDS.len()],
    }
}

/// One row per `(grid point, variant)`.
pub fn aggregate_csv(aggregates: &[PointAggregate]) -> Vec<u8> {
    let mut w = writer();
    w.write_record(aggregate_columns()).expect("in-memory write");
    for a in aggregates {
        let mut row: Vec<String> = vec![
            a.point.to_string(),
            a.variant.label().into(),
            a.d.to_string(),
            a.n.to_string(),
            a.p.to_string(),
            num(a.gamma),
            num(a.theta_sq),
            a.trials.to_string(),
            a.failed.to_string(),
            u8::from(a.flagged).to_string(),
        ];
        for s in [&a.r_a, &a.r_ba, &a.r_b_on_b, &a.r_null, &a.forgetting, &a.ratio, &a.proj_energy] {
            row.extend(summary_cells(s.as_ref()));
        }
        row.push(a.ratio_undefined.to_string());
        let sheet = &a.sheet;
        row.push(u8::from(sheet.premise_ok).to_string());
        row.extend([sheet.b_single, sheet.b_terminal, sheet.b_forgetting].map(num));
        row.push(opt_num(sheet.b_ratio));
        row.push(num(sheet.b_proj));
        for (_, f) in a.bounds.iter() {
            row.push(f.satisfied.to_string());
            row.push(f.applicable.to_string());
        }
        row.push(a.mc_agreement.satisfied.to_string());
        row.push(a.mc_agreement.applicable.to_string());
        row.push(num(a.max_dual_path_difference));
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{run_sweep, Execution, SweepSpec, VariantSelection};
    use crate::model::ModelConfig;
    use crate::risk::TestSampler;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, 6.02214076e23, -0.0, 5e-324] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(opt_num(None), "NA");
    }

    #[test]
    fn rows_match_header_width() {
        let spec = SweepSpec {
            grid: vec![ModelConfig::new(2, 10, 200, 1.0), ModelConfig::new(2, 10, 5, 1.0)],
            trials_per_point: 2,
            n_test: 1000,
            root_seed: 3,
            model_variant: VariantSelection::Latent,
            sampler: TestSampler::Projected,
        };
        // the second point is invalid; run it directly so the failure is recorded
        let mut records = run_sweep(&SweepSpec { grid: spec.grid[..1].to_vec(), ..spec.clone() }, Execution::Sequential)
            .unwrap()
            .records;
        records.push(crate::experiments::run_trial(
            &spec.grid[1],
            crate::experiments::ModelVariant::Latent,
            spec.stream(1, crate::experiments::ModelVariant::Latent, 0),
            0,
            Default::default(),
        ));
        let bytes = records_csv(&records);
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        assert_eq!(rdr.headers().unwrap().len(), RECORD_COLUMNS.len());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.len() == RECORD_COLUMNS.len()));
        assert_eq!(&rows[2][8], "failed");
        let r_a: f64 = rows[0][10].parse().unwrap();
        assert_eq!(r_a, records[0].outcome.as_ref().unwrap().r_a);

        let aggs = crate::experiments::aggregate(&records);
        let bytes = aggregate_csv(&aggs);
        let mut rdr = csv::Reader::from_reader(bytes.as_slice());
        let width = aggregate_columns().len();
        assert_eq!(rdr.headers().unwrap().len(), width);
        assert!(rdr.records().map(Result::unwrap).all(|r| r.len() == width));
    }
}
