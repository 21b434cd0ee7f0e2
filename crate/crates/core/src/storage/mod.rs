//! Session logs and offline analysis: CSV persistence, waveform plots and
//! series comparison.

mod compare;
mod csv_log;
mod plot;
mod series;

pub use compare::{compare_series, CompareError, SeriesComparison};
pub use csv_log::{
    format_sig6, read_csv, sample_row, write_csv, Column, CsvError, CsvLog, CsvRecord, CsvWriter,
    SkippedRow, CSV_HEADER, FLUSH_INTERVAL,
};
pub use plot::{
    reconstruct_waveform, reconstruct_waveform_as, render_svg, render_text, PlotError, PlotFormat,
    PlotSummary, TraceSummary,
};
pub use series::{Series, SeriesError};
