//! Plot-data emission: mean/band curves from moment files, posterior
//! histograms with Gaussian overlays from chain dumps, per-time error
//! tables from convergence sweeps, and thresholded edge lists. Plotting
//! itself is left to external tooling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use fkuq_core::forward_mc::MomentSeries;
use fkuq_core::Connectome;

use crate::CliError;

#[derive(Args, Serialize, Deserialize, Debug, Clone)]
pub struct ReportArgs {
    /// Moment CSV: emits bands.csv with mean and mean +/- sd per time.
    #[arg(long)]
    #[serde(default)]
    pub moments: Option<PathBuf>,
    /// Chain CSV: emits hist.csv with per-component histograms and
    /// Gaussian overlays.
    #[arg(long)]
    #[serde(default)]
    pub chain: Option<PathBuf>,
    /// Samples discarded from the front of the chain before binning.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 30)]
    pub bins: usize,
    /// Convergence CSV: emits one error table per time instance.
    #[arg(long)]
    #[serde(default)]
    pub convergence: Option<PathBuf>,
    /// Graph JSON: emits connectogram.csv keeping edges at or above
    /// edge-fraction times the maximum weight.
    #[arg(long)]
    #[serde(default)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub edge_fraction: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn exec_report(a: &ReportArgs) -> Result<(), CliError> {
    if a.moments.is_none() && a.chain.is_none() && a.convergence.is_none() && a.graph.is_none() {
        return Err(CliError::Validation(
            "report needs at least one of --moments / --chain / --convergence / --graph".into(),
        ));
    }
    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Validation(format!("{}: {e}", a.out_dir.display())))?;

    if let Some(path) = &a.moments {
        let out = a.out_dir.join("bands.csv");
        emit_bands(path, &out)?;
        println!("wrote {}", out.display());
    }
    if let Some(path) = &a.chain {
        let out = a.out_dir.join("hist.csv");
        emit_histograms(path, a.burn_in, a.bins, &out)?;
        println!("wrote {}", out.display());
    }
    if let Some(path) = &a.convergence {
        for out in emit_per_time_tables(path, &a.out_dir)? {
            println!("wrote {}", out.display());
        }
    }
    if let Some(path) = &a.graph {
        let out = a.out_dir.join("connectogram.csv");
        emit_connectogram(path, a.edge_fraction, &out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// `time,mean_global,lo_global,hi_global,mean_region_j,lo_region_j,hi_region_j...`
/// with lo/hi = mean -/+ sd. Zero variance collapses the band onto the mean.
fn emit_bands(moments: &Path, out: &Path) -> Result<(), CliError> {
    let m = MomentSeries::load_csv(moments)?;
    let r = m.num_regions();
    let mut text = String::from("time,mean_global,lo_global,hi_global");
    for j in 1..=r {
        let _ = write!(text, ",mean_region_{j},lo_region_{j},hi_region_{j}");
    }
    text.push('\n');
    for (i, &t) in m.times.iter().enumerate() {
        let band = |mean: f64, var: f64| {
            let sd = var.max(0.0).sqrt();
            (mean, mean - sd, mean + sd)
        };
        let (mean, lo, hi) = band(m.mean_global[i], m.var_global[i]);
        let _ = write!(text, "{t},{mean},{lo},{hi}");
        for j in 0..r {
            let (mean, lo, hi) = band(m.mean_regional[i][j], m.var_regional[i][j]);
            let _ = write!(text, ",{mean},{lo},{hi}");
        }
        text.push('\n');
    }
    write_text(out, &text)
}

/// Chain dump layout `step,p_1..p_R,accepted`; returns one column per
/// component after burn-in.
fn read_chain(path: &Path, burn_in: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let bad = |m: String| CliError::Validation(format!("{}: {m}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"step") || cols.last() != Some(&"accepted") || cols.len() < 3 {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let r = cols.len() - 2;
    let mut components: Vec<Vec<f64>> = vec![Vec::new(); r];
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != r + 2 {
            return Err(bad(format!("row {}: {} fields, expected {}", i + 2, fields.len(), r + 2)));
        }
        if i < burn_in {
            continue;
        }
        for l in 0..r {
            let v: f64 = fields[l + 1]
                .parse()
                .map_err(|_| bad(format!("row {}: bad value {:?}", i + 2, fields[l + 1])))?;
            components[l].push(v);
        }
    }
    if components[0].is_empty() {
        return Err(bad("burn-in consumes the whole chain".into()));
    }
    Ok(components)
}

/// `component,bin_lo,bin_hi,count,density,gauss_density`. A zero-variance
/// component produces a single bin with empty density fields and a warning.
fn emit_histograms(chain: &Path, burn_in: usize, bins: usize, out: &Path) -> Result<(), CliError> {
    if bins == 0 {
        return Err(CliError::Validation("--bins must be at least 1".into()));
    }
    let components = read_chain(chain, burn_in)?;
    let mut text = String::from("component,bin_lo,bin_hi,count,density,gauss_density\n");
    for (l, xs) in components.iter().enumerate() {
        let n = xs.len();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            println!(
                "warning: component {} has zero variance; Gaussian overlay suppressed",
                l + 1
            );
            let _ = writeln!(text, "{},{min},{max},{n},,", l + 1);
            continue;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let width = (max - min) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in xs {
            let idx = (((x - min) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        for (k, &count) in counts.iter().enumerate() {
            let lo = min + k as f64 * width;
            let hi = if k + 1 == bins { max } else { min + (k + 1) as f64 * width };
            let density = count as f64 / (n as f64 * width);
            let center = 0.5 * (lo + hi);
            let gauss = (-(center - mean).powi(2) / (2.0 * var)).exp()
                / (sd * (2.0 * std::f64::consts::PI).sqrt());
            let _ = writeln!(text, "{},{lo},{hi},{count},{density},{gauss}", l + 1);
        }
    }
    write_text(out, &text)
}

/// Splits a convergence CSV into one file per time instance, preserving the
/// remaining columns and row order.
fn emit_per_time_tables(convergence: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let bad = |m: String| CliError::Validation(format!("{}: {m}", convergence.display()));
    let text = std::fs::read_to_string(convergence).map_err(|e| bad(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let time_idx = cols
        .iter()
        .position(|&c| c == "time")
        .ok_or_else(|| bad("no `time` column".into()))?;
    let kept_header: Vec<&str> =
        cols.iter().enumerate().filter(|&(i, _)| i != time_idx).map(|(_, &c)| c).collect();

    // Group rows by the literal time string so formatting never drifts.
    let mut order: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<String>> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(bad(format!("row {}: {} fields, expected {}", i + 2, fields.len(), cols.len())));
        }
        let t = fields[time_idx].to_string();
        let kept: Vec<&str> =
            fields.iter().enumerate().filter(|&(j, _)| j != time_idx).map(|(_, &f)| f).collect();
        match order.iter().position(|o| *o == t) {
            Some(g) => groups[g].push(kept.join(",")),
            None => {
                order.push(t);
                groups.push(vec![kept.join(",")]);
            }
        }
    }
    if order.is_empty() {
        return Err(bad("no data rows".into()));
    }

    let mut written = Vec::new();
    for (t, rows) in order.iter().zip(&groups) {
        let path = out_dir.join(format!("convergence_t{t}.csv"));
        let mut text = kept_header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// `i,j,weight` rows for edges at or above fraction * max weight.
fn emit_connectogram(graph: &Path, fraction: f64, out: &Path) -> Result<(), CliError> {
    let conn = Connectome::load(graph)?;
    let total = conn.edges.len();
    let kept = conn.threshold_connectogram(fraction)?;
    let mut text = String::from("i,j,weight\n");
    for e in &kept.edges {
        let _ = writeln!(text, "{},{},{}", e.i, e.j, e.weight);
    }
    write_text(out, &text)?;
    println!("kept {} of {total} edges at fraction {fraction}", kept.edges.len());
    Ok(())
}
