//! Turning instance flags into an adjacency matrix.

use std::fs::File;
use std::path::Path;

use filtersel::filters::{integrate_responses, load_filter_bank, make_sweep_bank};
use filtersel::metrics::build_adjacency;
use filtersel::rng::XorShift64Star;
use filtersel::spectra::{load_spectra, LoadOptions};
use filtersel::synth::random_response_matrix;
use filtersel::{
    AdjacencyMatrix, FilterBank, FilterMatrix, MetricId, Shape, SpectrumSet, WavelengthGrid,
};
use serde::Serialize;

use crate::args::{BankArgs, InstanceArgs};
use crate::error::{synthesis_error, CliError};

pub const DEFAULT_BANDWIDTHS: [f64; 3] = [10.0, 20.0, 50.0];
pub const DEFAULT_COUNT_PER_BANDWIDTH: usize = 24;

/// Bank synthesis parameters after defaults are filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedBank {
    pub range: (f64, f64),
    pub bandwidths: Vec<f64>,
    pub count_per_bandwidth: usize,
    pub shape: Shape,
}

impl ResolvedBank {
    pub fn resolve(args: &BankArgs, grid: &WavelengthGrid) -> ResolvedBank {
        ResolvedBank {
            range: args.bank_range.unwrap_or((grid.first(), grid.last())),
            bandwidths: args
                .bandwidths
                .clone()
                .unwrap_or_else(|| DEFAULT_BANDWIDTHS.to_vec()),
            count_per_bandwidth: args
                .count_per_bandwidth
                .unwrap_or(DEFAULT_COUNT_PER_BANDWIDTH),
            shape: args.shape.unwrap_or(Shape::Gaussian),
        }
    }

    pub fn build(&self, grid: &WavelengthGrid) -> Result<FilterBank, CliError> {
        make_sweep_bank(
            self.range,
            &self.bandwidths,
            self.count_per_bandwidth,
            self.shape,
            grid,
        )
        .map_err(synthesis_error)
    }
}

/// Where the candidate bank of a spectra-based instance came from.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BankSource {
    File(String),
    Synthesized(ResolvedBank),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSummary {
    Spectra {
        spectra: String,
        grid_samples: usize,
        classes: Vec<String>,
        bank: BankSource,
        filters: usize,
    },
    Responses {
        responses: String,
        filters: usize,
        objects: usize,
    },
    Random {
        filters: usize,
        objects: usize,
        seed: u64,
    },
}

pub struct Instance {
    pub adjacency: AdjacencyMatrix,
    /// Candidate bank, when the instance was built from spectra.
    pub bank: Option<FilterBank>,
    pub summary: InstanceSummary,
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::data(path.display(), e))
}

pub fn read_spectra(path: &Path, crop: Option<(f64, f64)>) -> Result<SpectrumSet, CliError> {
    load_spectra(open(path)?, LoadOptions { crop }).map_err(|e| CliError::data(path.display(), e))
}

pub fn read_bank(path: &Path) -> Result<FilterBank, CliError> {
    load_filter_bank(open(path)?).map_err(|e| CliError::data(path.display(), e))
}

/// Reads a response matrix: a header `id,<object labels...>` then one row
/// per filter with its id and responses.
pub fn read_responses(path: &Path) -> Result<FilterMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display(), e))?;
    let header_line = text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    let delimiter = if header_line.contains('\t') {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let bad = |e: String| CliError::data(path.display(), e);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(bad(
            "response table needs an id column and at least one object column".into(),
        ));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        ids.push(record.get(0).unwrap_or_default().to_string());
        let row = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    bad(format!(
                        "non-numeric cell `{cell}` at row {}, column {}",
                        r + 1,
                        c + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    FilterMatrix::from_rows(rows, ids, labels).map_err(|e| bad(e.to_string()))
}

/// Class means of `set`, each scaled to unit norm.
pub fn normalized_means(set: &SpectrumSet) -> SpectrumSet {
    set.average_by_class().l2_normalize()
}

pub fn candidate_bank(
    filters: Option<&Path>,
    bank_args: &BankArgs,
    grid: &WavelengthGrid,
) -> Result<(FilterBank, BankSource), CliError> {
    match filters {
        Some(path) => {
            if bank_args.any_set() {
                return Err(CliError::Config(
                    "give either --filters or bank synthesis flags, not both".into(),
                ));
            }
            Ok((
                read_bank(path)?,
                BankSource::File(path.display().to_string()),
            ))
        }
        None => {
            let resolved = ResolvedBank::resolve(bank_args, grid);
            Ok((resolved.build(grid)?, BankSource::Synthesized(resolved)))
        }
    }
}

fn adjacency(matrix: &FilterMatrix, metric: MetricId) -> Result<AdjacencyMatrix, CliError> {
    build_adjacency(matrix, metric).map_err(|e| CliError::data("adjacency", e))
}

pub fn load_instance(
    args: &InstanceArgs,
    metric: MetricId,
    seed: u64,
) -> Result<Instance, CliError> {
    if let Some((n, m)) = args.random {
        if args.crop.is_some() || args.bank.any_set() {
            return Err(CliError::Config(
                "--random takes no spectra, crop or bank flags".into(),
            ));
        }
        if n == 0 || m == 0 {
            return Err(CliError::Config("--random needs N >= 1 and M >= 1".into()));
        }
        let matrix = random_response_matrix(&mut XorShift64Star::new(seed), n, m);
        return Ok(Instance {
            adjacency: adjacency(&matrix, metric)?,
            bank: None,
            summary: InstanceSummary::Random {
                filters: n,
                objects: m,
                seed,
            },
        });
    }
    if let Some(path) = &args.responses {
        if args.crop.is_some() || args.bank.any_set() {
            return Err(CliError::Config(
                "--responses takes no crop or bank flags".into(),
            ));
        }
        let matrix = read_responses(path)?;
        return Ok(Instance {
            adjacency: adjacency(&matrix, metric)?,
            bank: None,
            summary: InstanceSummary::Responses {
                responses: path.display().to_string(),
                filters: matrix.filter_count(),
                objects: matrix.spectrum_count(),
            },
        });
    }
    let Some(path) = &args.spectra else {
        return Err(CliError::Config(
            "one of --spectra, --responses or --random is required".into(),
        ));
    };
    let set = read_spectra(path, args.crop)?;
    let means = normalized_means(&set);
    let (bank, source) = candidate_bank(args.filters.as_deref(), &args.bank, set.grid())?;
    let matrix = integrate_responses(&bank, &means);
    Ok(Instance {
        adjacency: adjacency(&matrix, metric)?,
        summary: InstanceSummary::Spectra {
            spectra: path.display().to_string(),
            grid_samples: set.grid().len(),
            classes: set.classes().to_vec(),
            bank: source,
            filters: bank.len(),
        },
        bank: Some(bank),
    })
}
