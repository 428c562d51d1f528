//! Configuration, synthetic noise and file formats.

mod config;
mod dataset;
mod noise;
mod table;

pub use config::{
    BathSpec, DecoherenceSpec, ElementSpec, ExperimentConfig, GridSpec, OracleSpec, ProtonSpec,
    SceneSpec, SequenceSpec, CONFIG_VERSION, MODEL_IDS,
};
pub use dataset::{load_dataset, save_dataset, DatasetEntry, DATASET_FORMAT};
pub use noise::{synthesize_trace, NoiseModel};
pub use table::{
    format_fit, format_map, format_trace, load_fit, load_map, load_trace, parse_fit, parse_map,
    parse_trace, save_fit, save_map, save_trace, Meta, FIT_FORMAT, FORMAT_VERSION, MAP_FORMAT,
    TRACE_FORMAT,
};
