//! Per-round CSV rendering.
//!
//! One row per simulated round with cumulative columns alongside the
//! per-round values. Rows are ordered by protocol name, then seed, then
//! round, so equal runs always serialize byte-identically.

use std::io::{self, Write};

use crate::engine::{overload_bits, MetricsSeries};

pub const CSV_HEADER: &str = "round,protocol,seed,alive,dead_cum,ch_count,orphan_count,\
energy_round_nj,energy_cum_nj,bits_round,bits_cum,overload_round,overload_cum,bs_reports";

/// Writes the rows of one run, without the header.
pub fn write_series<W: Write>(w: &mut W, series: &MetricsSeries) -> io::Result<()> {
    let mut energy_cum = 0.0f64;
    let mut bits_cum = 0u64;
    let mut overload_cum = 0u64;
    for r in &series.rounds {
        energy_cum += r.energy_nj;
        let bits = r.bits_total();
        bits_cum += bits;
        let overload = overload_bits(r, series.data_bits);
        overload_cum += overload;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.round,
            series.protocol.name(),
            series.seed,
            r.alive_end,
            series.nodes as u32 - r.alive_end,
            r.ch_count,
            r.orphan_count,
            r.energy_nj,
            energy_cum,
            bits,
            bits_cum,
            overload,
            overload_cum,
            r.bs_reports,
        )?;
    }
    Ok(())
}

/// Writes a header plus every run's rows, sorted by (protocol, seed).
pub fn write_runs<W: Write>(w: &mut W, runs: &[&MetricsSeries]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let mut ordered: Vec<&&MetricsSeries> = runs.iter().collect();
    ordered.sort_by_key(|s| (s.protocol.name(), s.seed));
    for series in ordered {
        write_series(w, series)?;
    }
    Ok(())
}

/// Renders every run to an owned string.
pub fn render_runs(runs: &[&MetricsSeries]) -> String {
    let mut buf = Vec::new();
    write_runs(&mut buf, runs).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}
