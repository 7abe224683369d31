use serde_json::{json, Value};

use super::bench::BenchReport;
use super::manual::{manual_accuracy, ManualEvalRecord};

/// A report as a plain-text table plus its machine-readable form.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub table: String,
    pub json: Value,
}

pub fn percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain(std::iter::once(header[i].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-"),
    );
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// One row per generator with a pass@k column per k, ascending.
pub fn render_bench_report(report: &BenchReport) -> RenderedReport {
    let mut header = vec!["generator".to_string(), "problems".to_string(), "n".to_string()];
    header.extend(report.pass_at_k.iter().map(|(k, _)| format!("pass@{k}")));
    let mut row = vec![
        report.generator.clone(),
        report.results.len().to_string(),
        report.n.to_string(),
    ];
    row.extend(report.pass_at_k.iter().map(|(_, v)| percent(*v)));

    let json = json!({
        "generator": report.generator,
        "n": report.n,
        "k": report.pass_at_k.iter().map(|(k, _)| *k).collect::<Vec<_>>(),
        "pass_at_k": report.pass_at_k.iter().map(|(k, v)| json!({"k": k, "value": v})).collect::<Vec<_>>(),
        "problems": report.results.iter().map(|r| json!({
            "task_id": r.task_id(),
            "n": r.n(),
            "c": r.c(),
        })).collect::<Vec<_>>(),
    });
    RenderedReport {
        table: table(&header, &[row]),
        json,
    }
}

/// One row per description, followed by the overall accuracy when any
/// records exist.
pub fn render_manual_report(records: &[ManualEvalRecord]) -> RenderedReport {
    let header = ["description_id", "result", "adjustments"].map(String::from);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.description_id.clone(),
                if r.passed { "pass" } else { "fail" }.to_string(),
                r.adjustments.clone(),
            ]
        })
        .collect();
    let mut text = table(&header, &rows);
    let passes = records.iter().filter(|r| r.passed).count();
    let accuracy = manual_accuracy(passes, records.len()).ok();
    if let Some(accuracy) = accuracy {
        text.push_str(&format!(
            "accuracy: {:.1}% ({passes}/{})\n",
            accuracy,
            records.len()
        ));
    }
    RenderedReport {
        table: text,
        json: json!({
            "records": records,
            "passes": passes,
            "total": records.len(),
            "accuracy_percent": accuracy,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::bench::ProblemResult;

    fn report(pass_at_k: Vec<(usize, f64)>) -> BenchReport {
        BenchReport {
            generator: "pipeline:gpt-4".into(),
            n: 10,
            pass_at_k,
            results: vec![ProblemResult::new("t/0", vec![])],
        }
    }

    #[test]
    fn percentages_one_decimal() {
        let rendered = render_bench_report(&report(vec![(1, 0.89)]));
        assert!(rendered.table.contains("89.0%"), "{}", rendered.table);
        assert_eq!(rendered.json["pass_at_k"][0]["k"], 1);
    }

    #[test]
    fn columns_in_ascending_k() {
        let rendered = render_bench_report(&report(vec![(1, 0.5), (10, 0.75)]));
        let header = rendered.table.lines().next().unwrap();
        let p1 = header.find("pass@1 ").unwrap();
        let p10 = header.find("pass@10").unwrap();
        assert!(p1 < p10);
        assert!(rendered.table.contains("50.0%") && rendered.table.contains("75.0%"));
    }

    #[test]
    fn empty_manual_list_is_header_only() {
        let rendered = render_manual_report(&[]);
        assert_eq!(rendered.table.lines().count(), 2);
        assert!(rendered.table.starts_with("description_id"));
        assert!(rendered.json["accuracy_percent"].is_null());
    }

    #[test]
    fn manual_accuracy_line() {
        let records: Vec<_> = (0..20)
            .map(|i| ManualEvalRecord {
                description_id: format!("D{}", i + 1),
                passed: i < 17,
                adjustments: String::new(),
            })
            .collect();
        let rendered = render_manual_report(&records);
        assert!(rendered.table.contains("accuracy: 85.0% (17/20)"));
        assert_eq!(rendered.json["accuracy_percent"], 85.0);
    }
}
