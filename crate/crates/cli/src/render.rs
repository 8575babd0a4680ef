use std::fmt::Write;

use oppmodel::metrics::MetricReport;

const COLUMNS: [(&str, &str); 3] = [("EMA", "ema"), ("Top-1", "top1"), ("NDCG@3", "ndcg_scaled")];

fn cell(report: &MetricReport, key: &str, value: f64) -> String {
    match report.folds.as_ref().and_then(|f| f.get(key)) {
        Some(ms) => format!("{:.2} ({:.2})", ms.mean, ms.std),
        None => format!("{value:.2}"),
    }
}

/// One row per report: EMA, Top-1 and scaled NDCG@3 at k=5, then their
/// k-penalty versions. Cross-validated reports show mean (std) over folds.
pub fn render_table(reports: &[MetricReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.model.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(5);
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(reports.len());
    for r in reports {
        let mut row = vec![r.model.clone()];
        let at5 = r.at_k(5);
        for (_, key) in COLUMNS {
            let v = at5.map_or(f64::NAN, |m| match key {
                "ema" => m.ema,
                "top1" => m.top1,
                _ => m.ndcg_scaled,
            });
            row.push(cell(r, &format!("{key}@5"), v));
        }
        for (_, key) in COLUMNS {
            let v = match key {
                "ema" => r.k_penalty.ema,
                "top1" => r.k_penalty.top1,
                _ => r.k_penalty.ndcg_scaled,
            };
            row.push(cell(r, &format!("{key}_kp"), v));
        }
        rows.push(row);
    }
    let cw = rows
        .iter()
        .flat_map(|r| r[1..].iter().map(String::len))
        .chain(std::iter::once(6))
        .max()
        .unwrap_or(6);

    let mut out = String::new();
    let group = 3 * cw + 2;
    let _ = writeln!(
        out,
        "{:<width$} | {:<group$} | {:<group$}",
        "Model", "k=5", "k-penalty"
    );
    let names: Vec<String> = COLUMNS.iter().map(|(n, _)| format!("{n:<cw$}")).collect();
    let names = names.join(" ");
    let _ = writeln!(out, "{:<width$} | {names} | {names}", "");
    let _ = writeln!(out, "{}", "-".repeat(width + 2 * group + 6));
    for row in rows {
        let a: Vec<String> = row[1..4].iter().map(|c| format!("{c:<cw$}")).collect();
        let b: Vec<String> = row[4..].iter().map(|c| format!("{c:<cw$}")).collect();
        let _ = writeln!(
            out,
            "{:<width$} | {} | {}",
            row[0],
            a.join(" "),
            b.join(" ")
        );
    }
    out.lines()
        .map(|l| l.trim_end().to_string() + "\n")
        .collect()
}

/// Per-k curves. A `model` column is added when several reports are given.
pub fn curves_csv(reports: &[MetricReport]) -> String {
    let multi = reports.len() > 1;
    let mut out = String::from(if multi {
        "model,k,ema,top1,ndcg_raw,ndcg_scaled,n\n"
    } else {
        "k,ema,top1,ndcg_raw,ndcg_scaled,n\n"
    });
    for r in reports {
        for m in &r.per_k {
            if multi {
                out.push_str(&r.model);
                out.push(',');
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                m.k, m.ema, m.top1, m.ndcg_raw, m.ndcg_scaled, m.n
            );
        }
    }
    out
}
