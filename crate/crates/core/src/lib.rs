//! Selection of `K` optical filters out of `N` candidates that maximizes the
//! smallest pairwise distance between filter responses over a set of object
//! spectra.
//!
//! The pipeline runs spectra ([`spectra`]) and filter curves ([`filters`])
//! into a response matrix, turns its rows into an adjacency matrix of
//! pairwise distances ([`metrics`]), and then searches for the best subset
//! ([`selection`]), either by bisection on the distance threshold with an
//! exact independent-set check or by exhaustive enumeration. [`classify`]
//! evaluates a selection with a nearest-reference spectral angle mapper.

pub mod classify;
pub mod filters;
pub mod metrics;
pub mod rng;
pub mod selection;
pub mod spectra;
pub mod synth;
pub mod table;

pub use classify::{
    classify, evaluate, full_spectrum_model, train, train_fixed, BandNormalization,
    ClassificationReport, ClassifyError, Recorder, TrainedModel,
};
pub use filters::{
    integrate_responses, make_bandpass, make_sweep_bank, make_uniform_bank, FilterBank,
    FilterCurve, FilterError, FilterMatrix, Shape,
};
pub use metrics::{build_adjacency, AdjacencyMatrix, MetricError, MetricId};
pub use selection::{
    build_conflict_graph, fbs_select, full_search, max_independent_set, min_pairwise_distance,
    trim_selection, ConflictGraph, FbsConfig, FeasibilityMode, SelectionError, SelectionResult,
    SelectionVector,
};
pub use spectra::{load_spectra, LoadOptions, SpectraError, Spectrum, SpectrumSet, WavelengthGrid};
