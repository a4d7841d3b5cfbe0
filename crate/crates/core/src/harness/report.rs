//! CSV tables, slack histograms and run metadata.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentOutput;
use super::stats::{prob_superiority, SummaryStats};
use crate::affine::Slack;
use crate::error::{Error, Result};
use crate::problems::ProblemKind;

/// Share of the largest slack values left out of the histogram.
pub const TRIM_RIGHT: f64 = 0.05;
pub const HISTOGRAM_BINS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub cop: String,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mean: f64,
    #[serde(rename = "ciLo")]
    pub ci_lo: Option<f64>,
    #[serde(rename = "ciHi")]
    pub ci_hi: Option<f64>,
    pub min: f64,
    pub skew: Option<f64>,
    #[serde(rename = "skewCiLo")]
    pub skew_ci_lo: Option<f64>,
    #[serde(rename = "skewCiHi")]
    pub skew_ci_hi: Option<f64>,
    pub q95: f64,
    pub q50: f64,
    pub q25: f64,
}

/// χ summary of one experiment.
pub fn table1_row(out: &ExperimentOutput) -> Result<Table1Row> {
    let chis: Vec<f64> = out.scenarios.iter().map(|s| s.chi()).collect();
    let s = SummaryStats::of(&chis, out.spec.seed)?;
    Ok(Table1Row {
        cop: out.spec.kind.label().to_string(),
        d: out.spec.d,
        k: out.spec.k,
        mean: s.mean,
        ci_lo: s.mean_ci.map(|c| c.0),
        ci_hi: s.mean_ci.map(|c| c.1),
        min: s.min,
        skew: s.skew,
        skew_ci_lo: s.skew_ci.map(|c| c.0),
        skew_ci_hi: s.skew_ci.map(|c| c.1),
        q95: s.q95,
        q50: s.q50,
        q25: s.q25,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table2Row {
    pub cop: String,
    pub d: usize,
    #[serde(rename = "kLow")]
    pub k_low: usize,
    #[serde(rename = "kHigh")]
    pub k_high: usize,
    #[serde(rename = "nLow")]
    pub n_low: usize,
    #[serde(rename = "nHigh")]
    pub n_high: usize,
    /// `None` when either group is empty.
    pub ps: Option<f64>,
}

/// Relative optimality gaps of contractive runs whose decode was feasible.
pub fn contractive_gaps(out: &ExperimentOutput) -> Vec<f64> {
    out.contractive_runs().filter_map(|r| r.rel_opt_gap.map(|g| g.gap)).collect()
}

/// Probability that the higher embedding dimension has the smaller gap.
pub fn table2_row(low: &ExperimentOutput, high: &ExperimentOutput) -> Result<Table2Row> {
    if low.spec.kind != high.spec.kind || low.spec.d != high.spec.d {
        return Err(Error::InvalidInput("PS compares two dimensions of the same problem and size".into()));
    }
    let (xl, xh) = (contractive_gaps(low), contractive_gaps(high));
    let ps = if xl.is_empty() || xh.is_empty() { None } else { Some(prob_superiority(&xh, &xl)?) };
    Ok(Table2Row {
        cop: low.spec.kind.label().to_string(),
        d: low.spec.d,
        k_low: low.spec.k,
        k_high: high.spec.k,
        n_low: xl.len(),
        n_high: xh.len(),
        ps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    #[serde(rename = "scenarioId")]
    pub scenario_id: usize,
    #[serde(rename = "tripletId")]
    pub triplet_id: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub gamma: Option<f64>,
    pub contractive: bool,
    #[serde(rename = "tStar")]
    pub t_star: usize,
    /// Empty for non-contractive runs and for fully expressive schemes.
    pub slack: Option<f64>,
    #[serde(rename = "relOptGap")]
    pub rel_opt_gap: Option<f64>,
}

pub fn run_rows(out: &ExperimentOutput) -> Vec<RunRow> {
    out.runs
        .iter()
        .map(|r| RunRow {
            scenario_id: r.scenario_id,
            triplet_id: r.triplet_id,
            k: r.k,
            gamma: r.gamma,
            contractive: r.contractive,
            t_star: r.t_star,
            slack: r.slack.and_then(Slack::value),
            rel_opt_gap: r.rel_opt_gap.map(|g| g.gap),
        })
        .collect()
}

/// Header row plus one record per item.
pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

pub fn read_run_rows(path: &Path) -> Result<Vec<RunRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Slack values of contractive runs, sorted, with the largest
/// `⌊TRIM_RIGHT·n⌋` removed.
pub fn trimmed_slacks(slacks: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = slacks.into_iter().collect();
    v.sort_by(f64::total_cmp);
    let drop = (TRIM_RIGHT * v.len() as f64).floor() as usize;
    v.truncate(v.len() - drop);
    v
}

/// Equal-width bin counts over `[min, max]`.
pub fn histogram(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &x in values {
        let b = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
        counts[b] += 1;
    }
    (lo, hi, counts)
}

/// Static SVG histogram of already trimmed values; `None` for an empty set.
pub fn slack_histogram_svg(values: &[f64], title: &str) -> Option<String> {
    if values.is_empty() {
        return None;
    }
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let (lo, hi, counts) = histogram(values, HISTOGRAM_BINS);
    let top = *counts.iter().max().unwrap() as f64;
    let bar = (w - 2.0 * pad) / HISTOGRAM_BINS as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#, w / 2.0, escape(title));
    for (i, &c) in counts.iter().enumerate() {
        let bh = (h - 2.0 * pad) * c as f64 / top;
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0" stroke="white"/>"##,
            pad + i as f64 * bar,
            h - pad - bh,
            bar,
            bh
        );
    }
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, h - pad, w - pad);
    let _ = writeln!(svg, r#"<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{}" stroke="black"/>"#, h - pad);
    let label = |x: f64, anchor: &str, text: String| {
        format!(r#"<text x="{x:.2}" y="{:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="12">{text}</text>"#, h - pad + 18.0)
    };
    let _ = writeln!(svg, "{}", label(pad, "start", format!("{lo:.3e}")));
    let _ = writeln!(svg, "{}", label(w - pad, "end", format!("{hi:.3e}")));
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{}</text>"#,
        pad - 6.0,
        pad + 4.0,
        top
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">slack (n = {})</text>"#, w / 2.0, h - 12.0, values.len());
    svg.push_str("</svg>\n");
    Some(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the histogram, or logs a notice and returns `false` when there is
/// nothing to plot.
pub fn write_slack_histogram(path: &Path, slacks: impl IntoIterator<Item = f64>, title: &str) -> Result<bool> {
    let trimmed = trimmed_slacks(slacks);
    match slack_histogram_svg(&trimmed, title) {
        Some(svg) => {
            std::fs::write(path, svg)?;
            Ok(true)
        }
        None => {
            log::warn!("no contractive runs with a slack value; histogram {} skipped", path.display());
            Ok(false)
        }
    }
}

/// Echo of a command's inputs together with tool versions and wall time.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata<S: Serialize> {
    pub command: String,
    pub spec: S,
    pub version: &'static str,
    #[serde(rename = "wallSeconds")]
    pub wall_seconds: f64,
}

impl<S: Serialize> RunMetadata<S> {
    pub fn new(command: &str, spec: S, wall_seconds: f64) -> Self {
        RunMetadata { command: command.to_string(), spec, version: env!("CARGO_PKG_VERSION"), wall_seconds }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Label used in titles and file names, e.g. `ksp-10`.
pub fn tag(kind: ProblemKind, d: usize) -> String {
    format!("{}-{d}", kind.label().to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{run_contraction_experiment, ScenarioSpec};

    fn small(k: usize) -> ExperimentOutput {
        let spec = ScenarioSpec {
            instance_count: 2,
            sigma_per_instance: 2,
            triplets_per_scenario: 5,
            ..ScenarioSpec::desk(ProblemKind::Ksp, 6, k, 11)
        };
        run_contraction_experiment(&spec).unwrap()
    }

    #[test]
    fn table1_header_and_determinism() {
        let out = small(3);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&mut a, &[table1_row(&out).unwrap()]).unwrap();
        write_csv(&mut b, &[table1_row(&small(3)).unwrap()]).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("cop,d,K,mean,ciLo,ciHi,min,skew,skewCiLo,skewCiHi,q95,q50,q25\n"), "{text}");
    }

    #[test]
    fn runs_round_trip() {
        let rows = run_rows(&small(3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.csv");
        write_csv_file(&path, &rows).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("scenarioId,tripletId,K,gamma,contractive,tStar,slack,relOptGap\n"));
        assert_eq!(read_run_rows(&path).unwrap(), rows);
    }

    #[test]
    fn trimming_drops_the_right_tail() {
        let v: Vec<f64> = (0..100).rev().map(f64::from).collect();
        let t = trimmed_slacks(v);
        assert_eq!(t.len(), 95);
        assert_eq!(*t.last().unwrap(), 94.0);
        assert_eq!(trimmed_slacks((0..10).map(f64::from)).len(), 10);
    }

    #[test]
    fn empty_histogram_is_skipped() {
        assert!(slack_histogram_svg(&[], "x").is_none());
        let svg = slack_histogram_svg(&[0.0, 0.1, 0.1, 0.5], "ksp-10").unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("n = 4"));
        let (_, _, counts) = histogram(&[1.0, 1.0], 4);
        assert_eq!(counts, vec![2, 0, 0, 0]);
    }

    #[test]
    fn table2_counts_groups() {
        let row = table2_row(&small(3), &small(5)).unwrap();
        assert_eq!((row.k_low, row.k_high), (3, 5));
        if let Some(ps) = row.ps {
            assert!((0.0..=1.0).contains(&ps));
        }
    }
}
