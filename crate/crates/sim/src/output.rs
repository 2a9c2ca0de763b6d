//! Result files: `results.csv` and a gnuplot script that draws it.
//!
//! Numbers are written with fixed Rust formatting (round-to-nearest doubles,
//! `.` decimal separator, LF line endings), so equal results give equal bytes.

use std::fmt::Write as _;

use coexsim_core::engine::{normalized_throughput, PerPoint};

pub const CSV_NAME: &str = "results.csv";
pub const PLOT_NAME: &str = "plot.gp";
pub const IMAGE_NAME: &str = "per.png";

pub const CSV_HEADER: &str = "rate_mbps,ebn0_db,erasures,sir_db,trials,errors,per,ci_lo,ci_hi,norm_throughput";

pub fn csv_row(p: &PerPoint) -> String {
    let pt = &p.point;
    format!(
        "{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6}",
        pt.mode.rate_mbps,
        pt.ebn0_db,
        pt.n_erasures,
        pt.sir_db,
        p.trials,
        p.packet_errors,
        p.per,
        p.ci95.0,
        p.ci95.1,
        normalized_throughput(p)
    )
}

pub fn csv(points: &[PerPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&csv_row(p));
        out.push('\n');
    }
    out
}

/// One console line per finished cell.
pub fn summary_line(p: &PerPoint) -> String {
    let pt = &p.point;
    format!(
        "{:>2} Mb/s  Eb/N0 {:>5} dB  E{:<2}  PER {:.3e} [{:.3e}, {:.3e}]  {}/{}",
        pt.mode.rate_mbps,
        pt.ebn0_db,
        pt.n_erasures,
        p.per,
        p.ci95.0,
        p.ci95.1,
        p.packet_errors,
        p.trials
    )
}

/// Gnuplot script with one log-scale PER panel per rate and one curve per
/// erasure count, laid out two panels to a row. Run it from the directory
/// holding `results.csv`.
pub fn plot_script(rates: &[u32], erasures: &[usize]) -> String {
    let cols = if rates.len() > 1 { 2 } else { 1 };
    let rows = rates.len().div_ceil(cols);
    let mut s = String::new();
    let _ = writeln!(s, "# PER versus Eb/N0 from {CSV_NAME}: one panel per rate, one curve per erasure count.");
    let _ = writeln!(s, "# Usage: gnuplot {PLOT_NAME}");
    let _ = writeln!(s, "set terminal pngcairo size {},{} font \",10\"", 600 * cols, 450 * rows);
    let _ = writeln!(s, "set output \"{IMAGE_NAME}\"");
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set format y \"10^{{%L}}\"");
    let _ = writeln!(s, "set yrange [*:1]");
    let _ = writeln!(s, "set xlabel \"E_b/N_0 (dB)\"");
    let _ = writeln!(s, "set ylabel \"PER\"");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set key bottom left");
    let _ = writeln!(s, "set multiplot layout {rows},{cols}");
    for (i, rate) in rates.iter().enumerate() {
        let label = char::from(b'a' + (i % 26) as u8);
        let _ = writeln!(s, "set title \"({label}) {rate} Mb/s\"");
        for (j, e) in erasures.iter().enumerate() {
            let lead = if j == 0 { "plot " } else { "     " };
            let tail = if j + 1 < erasures.len() { ", \\" } else { "" };
            let _ = writeln!(
                s,
                "{lead}\"{CSV_NAME}\" skip 1 using 2:(($1 == {rate} && $3 == {e}) ? $7 : 1/0) \
                 with linespoints pt {} title \"E = {e}\"{tail}",
                j + 1
            );
        }
    }
    let _ = writeln!(s, "unset multiplot");
    s
}
