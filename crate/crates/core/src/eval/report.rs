//! Aligned text and CSV renderings of metric tables.

use super::{ActionEvalResult, OnlineEvalResult, PlanEvalResult};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Table {
    /// A table with a single "no data" row, for empty inputs.
    fn no_data(title: &str, header: Vec<String>) -> Self {
        let mut row = vec!["no data".to_string()];
        row.resize(header.len(), String::new());
        Self { title: title.into(), header, rows: vec![row] }
    }

    pub fn to_text(&self) -> String {
        let cols = self.header.len();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let parts: Vec<String> = (0..cols)
                .map(|i| {
                    let c = cells.get(i).map_or("", String::as_str);
                    if i == 0 {
                        format!("{c:<w$}", w = widths[i])
                    } else {
                        format!("{c:>w$}", w = widths[i])
                    }
                })
                .collect();
            parts.join(" | ").trim_end().to_string() + "\n"
        };
        let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-") + "\n";
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&self.header));
        out.push_str(&rule);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// One row per model.
pub fn plan_table(results: &[(String, PlanEvalResult)]) -> Table {
    let header = ["Model", "TSR (%)", "Step Precision (%)", "Step Recall (%)"].map(String::from).to_vec();
    let title = "Plan evaluation";
    if results.is_empty() {
        return Table::no_data(title, header);
    }
    let rows =
        results.iter().map(|(m, r)| vec![m.clone(), pct(r.tsr), pct(r.step_precision), pct(r.step_recall)]).collect();
    Table { title: title.into(), header, rows }
}

/// One row per metric, one column per model.
pub fn action_table(results: &[(String, ActionEvalResult)]) -> Table {
    let mut header = vec!["Metric".to_string()];
    header.extend(results.iter().map(|(m, _)| m.clone()));
    let title = "Offline decision evaluation";
    if results.is_empty() {
        return Table::no_data(title, vec!["Metric".into(), "Value".into()]);
    }
    let metric = |name: &str, f: fn(&ActionEvalResult) -> f64| {
        std::iter::once(name.to_string()).chain(results.iter().map(|(_, r)| pct(f(r)))).collect()
    };
    let rows = vec![
        metric("Object Acc (%)", |r| r.object_acc),
        metric("Operation Acc (%)", |r| r.operation_acc),
        metric("Status Acc (%)", |r| r.status_acc),
        metric("Step Success Rate (SSR) (%)", |r| r.ssr),
        metric("Task Success Rate (TSR) (%)", |r| r.tsr),
    ];
    Table { title: title.into(), header, rows }
}

pub fn online_table(results: &[(String, OnlineEvalResult)]) -> Table {
    let mut header = vec!["Metric".to_string()];
    header.extend(results.iter().map(|(m, _)| m.clone()));
    let title = "Online evaluation";
    if results.is_empty() {
        return Table::no_data(title, vec!["Metric".into(), "Value".into()]);
    }
    let metric = |name: &str, f: &dyn Fn(&OnlineEvalResult) -> String| {
        std::iter::once(name.to_string()).chain(results.iter().map(|(_, r)| f(r))).collect()
    };
    let rows = vec![
        metric("Task Success Rate (%)", &|r| pct(r.tsr)),
        metric("Task Completion Time (s)", &|r| format!("{:.2}", r.mean_completion_seconds)),
        metric("Task Completion Steps", &|r| format!("{:.2}", r.mean_steps)),
        metric("Average Step Latency (s)", &|r| format!("{:.2}", r.mean_step_latency)),
    ];
    Table { title: title.into(), header, rows }
}
