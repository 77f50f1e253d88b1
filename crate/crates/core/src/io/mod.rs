//! Configuration files and CSV series.

mod config;
mod series;

pub use config::{
    parse_config, parse_config_with, ElasticSection, ForceSection, KernelEntrySection, KernelSection, ModelSection,
    NetworkRun, NetworkSection, OutputSection, Overrides, PronySection, ProtocolSection, RunConfig, SpringSection,
    SweepSection, DEFAULT_PRONY_TERMS,
};
pub use series::{format_value, parse_series, read_series, render_series, write_series, SeriesTable, FULL_PRECISION};
