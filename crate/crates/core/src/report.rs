use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spec::{ClusterReport, Side, SpecResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    spec_diff: f64,
    eigenvalues: Vec<f64>,
    clusters: &'a [ClusterReport],
    config: &'a serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a serde_json::Value>,
}

/// Renders a result. Output depends only on the result, so equal results
/// give byte-identical reports.
pub fn render_report(result: &SpecResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let report = JsonReport {
                spec_diff: result.spec_diff,
                eigenvalues: result.eigenvalues(),
                clusters: &result.clusters,
                config: &result.config,
                diagnostics: result.diagnostics.as_ref(),
            };
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(result),
    }
}

pub fn write_report<W: Write>(result: &SpecResult, format: ReportFormat, mut out: W) -> std::io::Result<()> {
    out.write_all(render_report(result, format).as_bytes())?;
    out.flush()
}

fn render_markdown(result: &SpecResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Embedding comparison\n");
    let _ = writeln!(s, "- spec_diff: {:e}", result.spec_diff);
    let _ = writeln!(s, "- retained eigenpairs: {}", result.eigenpairs.len());
    let _ = writeln!(s, "- clusters: {}\n", result.clusters.len());
    if result.clusters.is_empty() {
        let _ = writeln!(s, "No cluster differences found.");
    }
    for c in &result.clusters {
        let side = match c.side {
            Side::A => "A",
            Side::B => "B",
        };
        let _ = writeln!(s, "## {side}{} (eigenvalue {:.6e})\n", c.rank, c.eigenvalue);
        let _ = writeln!(s, "| # | sample | weight |");
        let _ = writeln!(s, "|---|--------|--------|");
        for (i, (id, w)) in c.sample_ids.iter().zip(&c.weights).enumerate() {
            let _ = writeln!(s, "| {} | {} | {:.6} |", i + 1, id, w);
        }
        s.push('\n');
    }
    if let Some(d) = &result.diagnostics {
        let _ = writeln!(s, "## Diagnostics\n\n```json\n{}\n```", serde_json::to_string_pretty(d).unwrap_or_default());
    }
    let _ = writeln!(
        s,
        "## Config\n\n```json\n{}\n```",
        serde_json::to_string_pretty(&result.config).unwrap_or_default()
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result() -> SpecResult {
        SpecResult {
            eigenpairs: vec![],
            clusters: vec![ClusterReport {
                rank: 1,
                eigenvalue: 0.25,
                side: Side::A,
                sample_ids: vec!["x".into(), "y".into()],
                weights: vec![0.8, 0.6],
                indices: vec![3, 1],
            }],
            spec_diff: 0.25,
            config: serde_json::json!({"seed": 1}),
            diagnostics: None,
        }
    }

    #[test]
    fn json_has_expected_keys() {
        let text = render_report(&result(), ReportFormat::Json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["spec_diff"], 0.25);
        assert_eq!(v["clusters"][0]["side"], "A");
        assert_eq!(v["clusters"][0]["sample_ids"][1], "y");
        assert!(v["clusters"][0].get("indices").is_none());
        assert!(v.get("diagnostics").is_none());
        assert_eq!(v["config"]["seed"], 1);
    }

    #[test]
    fn markdown_has_one_section_per_cluster() {
        let text = render_report(&result(), ReportFormat::Markdown);
        assert_eq!(text.matches("\n## A1 ").count(), 1);
        assert!(text.contains("| 2 | y | 0.600000 |"));
    }

    #[test]
    fn format_parses() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
