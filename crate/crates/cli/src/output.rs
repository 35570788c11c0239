//! Rendering of command results as JSON documents or CSV tables.

use serde::Serialize;
use serde_json::{json, Value};

use crate::Format;

/// Resolved run description written ahead of the data.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub seed: u64,
    pub seed_source: &'static str,
    pub threads: usize,
    pub generated_at: String,
}

/// Result of a command in both output shapes.
pub struct Artifact {
    pub config: Value,
    pub data: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Artifact {
    pub fn new(config: Value, data: Value, columns: &[&str]) -> Self {
        Self { config, data, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

/// Shortest round-trip decimal.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

pub fn render(header: &Header, artifact: &Artifact, format: Format) -> String {
    match format {
        Format::Json => {
            let doc = json!({ "header": header, "data": artifact.data });
            let mut text = serde_json::to_string_pretty(&doc).expect("values serialize");
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut out = String::new();
            let header_value = serde_json::to_value(header).expect("header serializes");
            if let Value::Object(map) = header_value {
                for (key, value) in map {
                    let shown = match value {
                        Value::String(s) => s,
                        other => other.to_string(),
                    };
                    out.push_str(&format!("# {key}: {shown}\n"));
                }
            }
            out.push_str(&artifact.columns.join(","));
            out.push('\n');
            for row in &artifact.rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
            out
        }
    }
}

/// The part of an output that must be reproducible: the `data` member of a
/// JSON document, or the non-comment lines of a CSV file.
pub fn data_body(text: &str) -> Option<String> {
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(text).ok()?;
        Some(doc.get("data")?.to_string())
    } else {
        Some(text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header {
            tool: "itoexp",
            version: "0",
            command: "x",
            config: json!({"k": 2}),
            seed: 1,
            seed_source: "default",
            threads: 1,
            generated_at: "now".into(),
        }
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678, -0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn bodies_ignore_headers() {
        let mut a = Artifact::new(json!({}), json!({"v": [1.5]}), &["v"]);
        a.row(vec![num(1.5)]);
        let mut h2 = header();
        h2.generated_at = "later".into();
        h2.threads = 8;
        for f in [Format::Json, Format::Csv] {
            let one = render(&header(), &a, f);
            let two = render(&h2, &a, f);
            assert_ne!(one, two);
            assert_eq!(data_body(&one), data_body(&two));
        }
        let csv = render(&header(), &a, Format::Csv);
        assert!(csv.contains("# seed_source: default\n") && csv.ends_with("\nv\n1.5\n"));
    }
}
