//! Library side of the command-line tool: data handling, benchmark sweeps,
//! the regression protocol, and CSV output.

mod bench;
mod data;
mod regression;

use std::io::Write;

pub use bench::{
    bench_errtime, bench_rank_error, bench_time, diag_harmonics, DiagConfig, DiagRow, ErrTimeConfig, ErrTimeRow,
    RankErrorRow, RankSweepConfig, TimeConfig, TimeRow,
};
pub use data::{
    fit_power_law, fmt_float, median_min_max, minmax_scale, read_points, read_points_file, read_table, seeded_vector,
    split_labels, synth_points, synth_regression, write_points, LabelColumn, Table,
};
pub use regression::{
    krr_run, trial_split, BlockErrorRow, KrrReport, KrrRunConfig, MethodChoice, SummaryRow, TrialRow,
};

use crate::error::Result;

/// A row of an emitted CSV.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn record(&self) -> Vec<String>;
}

/// Rows of a sweep plus human-readable notes about skipped points.
#[derive(Debug, Clone)]
pub struct Sweep<T> {
    pub rows: Vec<T>,
    pub notes: Vec<String>,
}

/// Writes a header line and one line per row.
pub fn write_csv<W: Write, T: CsvRow>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(T::HEADER).map_err(data::csv_err)?;
    for r in rows {
        w.write_record(r.record()).map_err(data::csv_err)?;
    }
    w.flush()?;
    Ok(())
}
