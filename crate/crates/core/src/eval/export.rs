//! Human-readable tables and CSV export.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scoring::RetrievalMode;

use super::{AblationReport, EvalReport, FewShotReport};

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Aligned summary of one report.
pub fn report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mode={} K={} N={} instances={} templates={}",
        report.retrieval.mode,
        report.retrieval.k,
        report.retrieval.n,
        report.instances,
        report.templates.len()
    );
    let _ = writeln!(out, "{:>8}  {:>8}", "template", "accuracy");
    for (i, acc) in report.per_template_accuracy.iter().enumerate() {
        let _ = writeln!(out, "{i:>8}  {:>8}", pct(*acc));
    }
    let _ = writeln!(
        out,
        "mean_accuracy={:.4} std={:.4} min={:.4} max={:.4}",
        report.mean, report.std, report.min, report.max
    );
    out
}

/// One row per retrieval mode.
pub fn ablation_table(report: &AblationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>4} {:>4} {:>8} {:>8} {:>8} {:>8}",
        "mode", "K", "N", "mean", "std", "min", "max"
    );
    for mode in RetrievalMode::ALL {
        let r = report.get(mode);
        let (k, n) = match mode {
            RetrievalMode::None => (0, 0),
            _ => (r.retrieval.k, r.retrieval.n),
        };
        let _ = writeln!(
            out,
            "{:<14} {:>4} {:>4} {:>8} {:>8} {:>8} {:>8}",
            mode.as_str(),
            k,
            n,
            pct(r.mean),
            pct(r.std),
            pct(r.min),
            pct(r.max)
        );
    }
    out
}

/// One row per template followed by the spread.
pub fn sensitivity_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>5}  {:>8}  template", "index", "accuracy");
    for (i, (acc, t)) in report.per_template_accuracy.iter().zip(&report.templates).enumerate() {
        let _ = writeln!(out, "{i:>5}  {:>8}  {t}", pct(*acc));
    }
    let _ = writeln!(
        out,
        "mean_accuracy={:.4} std={:.4} min={:.4} max={:.4}",
        report.mean, report.std, report.min, report.max
    );
    out
}

pub fn fewshot_table(reports: &[FewShotReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>5} {:>5} {:>8} {:>8} {:>8} {:>8}",
        "method", "shots", "seeds", "mean", "std", "min", "max"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>5} {:>8} {:>8} {:>8} {:>8}",
            r.method.to_string(),
            r.shots,
            r.seeds.len(),
            pct(r.mean),
            pct(r.std),
            pct(r.min),
            pct(r.max)
        );
    }
    out
}

/// Writes `instance_id,template_index,total_0..total_{m-1},predicted,gold`.
pub fn write_predictions_csv<W: Write>(report: &EvalReport, writer: W) -> Result<()> {
    let rows = report.predictions.as_ref().ok_or_else(|| {
        Error::InvalidArgument("report was computed without per-instance detail".into())
    })?;
    let width = rows.iter().map(|r| r.totals.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["instance_id".to_string(), "template_index".to_string()];
    header.extend((0..width).map(|i| format!("total_{i}")));
    header.push("predicted".into());
    header.push("gold".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.instance_id.clone(), r.template_index.to_string()];
        rec.extend((0..width).map(|i| r.totals.get(i).map(|t| format!("{t:.10}")).unwrap_or_default()));
        rec.push(r.predicted.to_string());
        rec.push(r.gold.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv output>", std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::InstancePrediction;
    use crate::scoring::RetrievalConfig;

    fn report() -> EvalReport {
        EvalReport::new(
            RetrievalConfig::none(),
            2,
            vec!["It was {label}.".into()],
            vec![0.5],
            Some(vec![
                InstancePrediction {
                    instance_id: "a,1".into(),
                    template_index: 0,
                    totals: vec![0.25, 0.75],
                    predicted: 1,
                    gold: 1,
                    tie: false,
                },
                InstancePrediction {
                    instance_id: "b".into(),
                    template_index: 0,
                    totals: vec![0.5, 0.5],
                    predicted: 0,
                    gold: 1,
                    tie: true,
                },
            ]),
        )
    }

    #[test]
    fn csv_has_one_row_per_prediction() {
        let mut buf = Vec::new();
        write_predictions_csv(&report(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "instance_id,template_index,total_0,total_1,predicted,gold");
        assert_eq!(lines[1], "\"a,1\",0,0.2500000000,0.7500000000,1,1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn csv_requires_detail() {
        let mut r = report();
        r.predictions = None;
        assert!(write_predictions_csv(&r, Vec::new()).is_err());
    }

    #[test]
    fn summary_line_format() {
        assert!(report_table(&report()).contains("mean_accuracy=0.5000"));
        assert!(sensitivity_table(&report()).contains("It was {label}."));
    }
}
