use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::runner::{ExperimentOutput, ResultRow};
use crate::error::{GibbsError, Result};

pub const RESULTS_HEADER: [&str; 11] = [
    "n",
    "rep",
    "seed",
    "omega",
    "radius_q90",
    "div_point_est",
    "misclass_est",
    "misclass_truth",
    "accept_rate",
    "wall_ms",
    "error",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const LONG_FILE: &str = "radii_long.csv";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            opt(r.omega),
            opt(r.radius_q90),
            opt(r.div_point_est),
            opt(r.misclass_est),
            opt(r.misclass_truth),
            opt(r.accept_rate),
            opt(r.wall_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready `n,rep,seed,metric,value` rows for radii and point-estimate divergences.
pub fn write_long_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "rep", "seed", "metric", "value"])?;
    for r in rows {
        let metrics = [
            ("radius_q90", r.radius_q90),
            ("div_median", r.div_median),
            ("div_point_est", r.div_point_est),
            ("misclass_est", r.misclass_est),
            ("misclass_truth", r.misclass_truth),
        ];
        for (name, v) in metrics {
            if let Some(v) = v {
                w.write_record([r.n.to_string(), r.rep.to_string(), r.seed.to_string(), name.into(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes results, summary and long-format files into `dir`, creating it.
pub fn write_experiment(dir: &Path, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let results = dir.join(RESULTS_FILE);
    write_results_csv(&output.rows, std::fs::File::create(&results)?)?;
    let summary = dir.join(SUMMARY_FILE);
    let mut f = std::fs::File::create(&summary)?;
    serde_json::to_writer_pretty(&mut f, &output.summary)?;
    f.write_all(b"\n")?;
    let long = dir.join(LONG_FILE);
    write_long_csv(&output.rows, std::fs::File::create(&long)?)?;
    Ok(vec![results, summary, long])
}

/// `(n, radius)` pairs from a results CSV: column `n` and `radius_q90` (or
/// `radius`). Rows with an empty radius are skipped.
pub fn read_radius_pairs<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let n_col = col("n").ok_or_else(|| GibbsError::Config("results CSV has no `n` column".into()))?;
    let r_col = col("radius_q90")
        .or_else(|| col("radius"))
        .ok_or_else(|| GibbsError::Config("results CSV has no `radius_q90` or `radius` column".into()))?;
    let mut pairs = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        if field(r_col).is_empty() {
            continue;
        }
        let parse = |c: usize| {
            field(c)
                .parse::<f64>()
                .map_err(|_| GibbsError::Config(format!("row {}: cannot parse `{}`", line + 2, field(c))))
        };
        pairs.push((parse(n_col)?, parse(r_col)?));
    }
    Ok(pairs)
}
