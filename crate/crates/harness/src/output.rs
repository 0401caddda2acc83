//! CSV files with JSON sidecar manifests and gnuplot scripts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;
use serde_json::{json, Value};

use crate::Result;

/// `git describe` of the source tree, or the package version outside a checkout.
pub fn version_string() -> String {
    let described = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{} ({d})", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Serialises records into CSV text with a header taken from the field names.
pub fn records_to_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `<stem>.csv` and its manifest `<stem>.json` into `dir`.
pub fn write_csv_with_manifest(
    dir: &Path,
    stem: &str,
    csv_text: &str,
    kind: &str,
    config: Value,
    extra: Value,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&csv_path, csv_text)?;
    let manifest = json!({
        "kind": kind,
        "file": format!("{stem}.csv"),
        "version": version_string(),
        "h2_norm": "sqrt(|u|^2 + |grad_h u|^2 + |Laplace_h u|^2), discrete L2 norms",
        "config": config,
        "details": extra,
    });
    fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((csv_path, json_path))
}

/// One curve of a plot: `using` expression over a CSV file.
pub struct Curve {
    pub file: String,
    pub using: String,
    pub title: String,
    /// gnuplot style, e.g. `linespoints`.
    pub style: &'static str,
}

pub fn gnuplot_script(
    output: &str,
    xlabel: &str,
    ylabel: &str,
    log_axes: &str,
    curves: &[Curve],
) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{output}'\n"));
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    if !log_axes.is_empty() {
        s.push_str(&format!("set logscale {log_axes}\n"));
    }
    let parts: Vec<String> = curves
        .iter()
        .map(|c| {
            format!(
                "'{}' using {} with {} title '{}'",
                c.file, c.using, c.style, c.title
            )
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        n: usize,
        value: f64,
    }

    #[test]
    fn csv_header_from_fields() {
        let text = records_to_csv(&[Row { n: 1, value: 0.5 }, Row { n: 2, value: 0.25 }]).unwrap();
        assert_eq!(text, "n,value\n1,0.5\n2,0.25\n");
    }

    #[test]
    fn plot_script_lists_curves() {
        let s = gnuplot_script(
            "e.png",
            "N",
            "error",
            "xy",
            &[Curve {
                file: "a.csv".into(),
                using: "1:2".into(),
                title: "a".into(),
                style: "linespoints",
            }],
        );
        assert!(s.contains("set logscale xy"));
        assert!(s.contains("plot 'a.csv' using 1:2 with linespoints title 'a'"));
    }
}
