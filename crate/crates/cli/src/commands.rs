use std::time::Instant;

use filtersel::classify::{
    full_spectrum_model, train_fixed, train_with, Recorder, TrainOptions, TrainedModel,
};
use filtersel::filters::make_uniform_bank;
use filtersel::selection::{
    binomial, fbs_select, full_search_with, min_pairwise_distance, FullSearchOptions,
};
use filtersel::spectra::Spectrum;
use filtersel::synth::{spectral_benchmark, BenchmarkConfig, SpectrumFamily};
use filtersel::table::Delimiter;
use filtersel::{
    AdjacencyMatrix, ClassificationReport, FbsConfig, FilterBank, SelectionResult, SelectionVector,
    SpectrumSet, WavelengthGrid,
};
use serde::Serialize;

use crate::args::{
    BenchArgs, ClassifyArgs, ClassifyMethod, Format, FsMode, GenFiltersArgs, SearchArgs,
    SelectArgs, SelectMethod,
};
use crate::error::{synthesis_error, CliError};
use crate::instance::{
    candidate_bank, load_instance, read_spectra, BankSource, Instance, InstanceSummary,
};
use crate::output::{emit, to_json};

pub const SKIPPED_GUARD: &str = "skipped(guard)";

fn fbs_config(k: usize, search: &SearchArgs) -> FbsConfig {
    FbsConfig {
        k,
        iterations: search.iterations,
        feasibility_mode: search.feasibility.into(),
        literal_min: search.literal_min,
        min_bracket: search.min_bracket,
    }
}

fn check_search(search: &SearchArgs) -> Result<(), CliError> {
    if search.iterations == 0 {
        return Err(CliError::Config("--iterations must be at least 1".into()));
    }
    if let Some(b) = search.min_bracket {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Config("--min-bracket must be positive".into()));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SelectReport<'a> {
    pub command: &'static str,
    pub config: &'a SelectArgs,
    pub format: Format,
    pub instance: InstanceSummary,
    pub method: SelectMethod,
    pub k: usize,
    pub selection: SelectionVector,
    pub selected_ids: Vec<String>,
    pub achieved_min_distance: f64,
    /// Search trace; absent for the uniform baseline.
    pub search: Option<SelectionResult>,
}

/// Evenly spaced picks over the candidates ordered by nominal center (or by
/// index when no bank is known).
pub fn uniform_pick(
    adjacency: &AdjacencyMatrix,
    bank: Option<&FilterBank>,
    k: usize,
) -> Result<SelectionVector, CliError> {
    let n = adjacency.len();
    FbsConfig::new(k).validate(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(bank) = bank {
        let filters = bank.filters();
        order.sort_by(|&a, &b| {
            filters[a]
                .nominal_center()
                .total_cmp(&filters[b].nominal_center())
                .then(a.cmp(&b))
        });
    }
    let picks = (0..k)
        .map(|i| order[((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize])
        .collect();
    Ok(SelectionVector::new(picks))
}

pub fn cmd_select(args: &SelectArgs) -> Result<(), CliError> {
    check_search(&args.search)?;
    let Instance {
        adjacency,
        bank,
        summary,
    } = load_instance(&args.instance, args.search.metric, args.search.seed)?;
    let (selection, search) = match args.method {
        SelectMethod::Fbs => {
            let r = fbs_select(&adjacency, &fbs_config(args.k, &args.search))?;
            (r.selection.clone(), Some(r))
        }
        SelectMethod::Full => {
            let options = FullSearchOptions {
                guard: args.search.fs_guard,
                prune: true,
            };
            let r = full_search_with(&adjacency, args.k, options)?;
            (r.selection.clone(), Some(r))
        }
        SelectMethod::Uniform => (uniform_pick(&adjacency, bank.as_ref(), args.k)?, None),
    };
    let achieved_min_distance = min_pairwise_distance(&selection, &adjacency)?;
    let selected_ids = selection
        .indices()
        .iter()
        .map(|&i| adjacency.ids()[i].clone())
        .collect();
    let format = args.output.format.unwrap_or(Format::Json);
    let report = SelectReport {
        command: "select",
        config: args,
        format,
        instance: summary,
        method: args.method,
        k: args.k,
        selection,
        selected_ids,
        achieved_min_distance,
        search,
    };
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Tsv => select_tsv(&report)?,
    };
    emit(&args.output, &text)
}

fn select_tsv(report: &SelectReport) -> Result<String, CliError> {
    let mut out = format!(
        "# config\t{}\n",
        serde_json::to_string(report.config).map_err(json_error)?
    );
    out += &format!(
        "# method\t{}\n",
        serde_json::to_value(report.method)
            .map_err(json_error)?
            .as_str()
            .unwrap_or("")
    );
    out += &format!(
        "# achieved_min_distance\t{}\n",
        report.achieved_min_distance
    );
    if let Some(s) = &report.search {
        out += &format!(
            "# theta_bounds_final\t{}\t{}\n",
            s.theta_bounds_final.lo, s.theta_bounds_final.hi
        );
        out += &format!("# feasibility_calls\t{}\n", s.feasibility_calls);
        out += &format!("# wall_time_s\t{}\n", s.wall_time_s);
    }
    out += "rank\tindex\tfilter_id\n";
    for (rank, (i, id)) in report
        .selection
        .indices()
        .iter()
        .zip(&report.selected_ids)
        .enumerate()
    {
        out += &format!("{}\t{i}\t{id}\n", rank + 1);
    }
    Ok(out)
}

fn json_error(e: serde_json::Error) -> CliError {
    CliError::Data(format!("serialization: {e}"))
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

/// One full-search cell of the benchmark table.
#[derive(Debug, Clone, Serialize)]
pub struct FsCell {
    /// `ok`, `skipped(guard)` or `not_run`.
    pub status: String,
    pub median_s: Option<f64>,
    pub min_distance: Option<f64>,
    pub search_nodes: Option<u64>,
}

impl FsCell {
    fn not_run() -> Self {
        FsCell {
            status: "not_run".into(),
            median_s: None,
            min_distance: None,
            search_nodes: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub k: usize,
    pub combinations: u128,
    pub fbs_median_s: f64,
    pub fbs_min_distance: f64,
    pub fbs_feasibility_calls: usize,
    pub fs: FsCell,
    pub fs_exhaustive: FsCell,
}

#[derive(Debug, Serialize)]
pub struct BenchReport<'a> {
    pub command: &'static str,
    pub config: &'a BenchArgs,
    pub format: Format,
    pub instance: InstanceSummary,
    pub rows: Vec<BenchRow>,
}

fn time_fs(
    adjacency: &AdjacencyMatrix,
    k: usize,
    guard: u128,
    prune: bool,
    repeats: usize,
) -> Result<FsCell, CliError> {
    let options = FullSearchOptions { guard, prune };
    if binomial(adjacency.len(), k) > guard {
        return Ok(FsCell {
            status: SKIPPED_GUARD.into(),
            ..FsCell::not_run()
        });
    }
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        let r = full_search_with(adjacency, k, options)?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(r);
    }
    let r = last.expect("at least one repeat");
    Ok(FsCell {
        status: "ok".into(),
        median_s: Some(median(times)),
        min_distance: Some(r.achieved_min_distance),
        search_nodes: Some(r.search_nodes),
    })
}

pub fn bench_rows(
    adjacency: &AdjacencyMatrix,
    ks: &[usize],
    search: &SearchArgs,
    repeats: usize,
    fs_mode: FsMode,
) -> Result<Vec<BenchRow>, CliError> {
    if repeats == 0 {
        return Err(CliError::Config("--repeats must be at least 1".into()));
    }
    if ks.is_empty() {
        return Err(CliError::Config("--k needs at least one value".into()));
    }
    for &k in ks {
        fbs_config(k, search).validate(adjacency.len())?;
    }
    ks.iter()
        .map(|&k| {
            let cfg = fbs_config(k, search);
            let mut times = Vec::with_capacity(repeats);
            let mut last = None;
            for _ in 0..repeats {
                let start = Instant::now();
                let r = fbs_select(adjacency, &cfg)?;
                times.push(start.elapsed().as_secs_f64());
                last = Some(r);
            }
            let fbs = last.expect("at least one repeat");
            let run = |prune: bool, wanted: bool| {
                if wanted {
                    time_fs(adjacency, k, search.fs_guard, prune, repeats)
                } else {
                    Ok(FsCell::not_run())
                }
            };
            Ok(BenchRow {
                k,
                combinations: binomial(adjacency.len(), k),
                fbs_median_s: median(times),
                fbs_min_distance: fbs.achieved_min_distance,
                fbs_feasibility_calls: fbs.feasibility_calls,
                fs: run(true, fs_mode != FsMode::Exhaustive)?,
                fs_exhaustive: run(false, fs_mode != FsMode::Pruned)?,
            })
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    check_search(&args.search)?;
    let instance = load_instance(&args.instance, args.search.metric, args.search.seed)?;
    let rows = bench_rows(
        &instance.adjacency,
        &args.k,
        &args.search,
        args.repeats,
        args.fs_mode,
    )?;
    let format = args.output.format.unwrap_or(Format::Tsv);
    let report = BenchReport {
        command: "bench",
        config: args,
        format,
        instance: instance.summary,
        rows,
    };
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Tsv => bench_tsv(&report)?,
    };
    emit(&args.output, &text)
}

fn cell_value<T: ToString>(cell: &FsCell, value: Option<T>) -> String {
    match value {
        Some(v) => v.to_string(),
        None => cell.status.clone(),
    }
}

fn bench_tsv(report: &BenchReport) -> Result<String, CliError> {
    let mut out = format!(
        "# config\t{}\n",
        serde_json::to_string(report.config).map_err(json_error)?
    );
    out += "k\tcombinations\tfbs_median_s\tfbs_min_distance\tfbs_feasibility_calls\tfs_median_s\tfs_min_distance\tfs_exhaustive_median_s\tfs_exhaustive_min_distance\n";
    for r in &report.rows {
        out += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.k,
            r.combinations,
            r.fbs_median_s,
            r.fbs_min_distance,
            r.fbs_feasibility_calls,
            cell_value(&r.fs, r.fs.median_s),
            cell_value(&r.fs, r.fs.min_distance),
            cell_value(&r.fs_exhaustive, r.fs_exhaustive.median_s),
            cell_value(&r.fs_exhaustive, r.fs_exhaustive.min_distance),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub method: ClassifyMethod,
    pub bands: usize,
    /// Filter ids, or wavelength sample labels for the full-spectrum model.
    pub band_ids: Vec<String>,
    /// Minimum pairwise distance among the selected filters (fbs only).
    pub achieved_min_distance: Option<f64>,
    pub train_wall_time_s: f64,
    pub report: ClassificationReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSummary {
    File { spectra: String },
    Synthetic { benchmark: BenchmarkConfig },
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport<'a> {
    pub command: &'static str,
    pub config: &'a ClassifyArgs,
    pub format: Format,
    pub data: DataSummary,
    pub classes: Vec<String>,
    pub train_count: usize,
    pub test_count: usize,
    pub bank: Option<BankSource>,
    pub results: Vec<MethodResult>,
}

/// Training and test spectra for `classify`.
pub fn classify_data(
    args: &ClassifyArgs,
) -> Result<(SpectrumSet, Vec<Spectrum>, DataSummary), CliError> {
    if args.synthetic {
        if args
            .shared_base
            .is_some_and(|a| !(a > 0.0 && a.is_finite()))
        {
            return Err(CliError::Config("--shared-base must be positive".into()));
        }
        if !(args.noise >= 0.0 && args.noise.is_finite()) {
            return Err(CliError::Config("--noise must be nonnegative".into()));
        }
        if args.classes < 2 || args.train_per_class == 0 || args.test_per_class == 0 {
            return Err(CliError::Config(
                "synthetic benchmark needs >= 2 classes and >= 1 training and test spectrum each"
                    .into(),
            ));
        }
        let benchmark = BenchmarkConfig {
            family: match args.shared_base {
                Some(feature_amplitude) => SpectrumFamily::SharedBase { feature_amplitude },
                None => SpectrumFamily::Independent,
            },
            classes: args.classes,
            train_per_class: args.train_per_class,
            test_per_class: args.test_per_class,
            noise: args.noise,
            seed: args.search.seed,
            ..Default::default()
        };
        let b = spectral_benchmark(&benchmark);
        let (train, test) = match args.crop {
            Some((lo, hi)) => (b.train.crop(lo, hi)?, b.test.crop(lo, hi)?),
            None => (b.train, b.test),
        };
        return Ok((
            train,
            test.spectra().to_vec(),
            DataSummary::Synthetic { benchmark },
        ));
    }
    let Some(path) = &args.spectra else {
        return Err(CliError::Config(
            "classify needs --spectra or --synthetic".into(),
        ));
    };
    if args.train_per_class == 0 {
        return Err(CliError::Config(
            "--train-per-class must be at least 1".into(),
        ));
    }
    let set = read_spectra(path, args.crop)?;
    let (train, test) = set.split_per_class(args.train_per_class);
    let train = SpectrumSet::on_grid(train, set.grid().clone())?;
    Ok((
        train,
        test,
        DataSummary::File {
            spectra: path.display().to_string(),
        },
    ))
}

fn uniform_range(args: &ClassifyArgs, grid: &WavelengthGrid) -> (f64, f64) {
    args.bank.bank_range.unwrap_or((grid.first(), grid.last()))
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<(), CliError> {
    check_search(&args.search)?;
    if args.method.is_empty() {
        return Err(CliError::Config("--method needs at least one value".into()));
    }
    if args.model_out.is_some() && !args.method.contains(&ClassifyMethod::Fbs) {
        return Err(CliError::Config("--model-out needs the fbs method".into()));
    }
    let (train, test, data) = classify_data(args)?;
    let grid = train.grid().clone();
    let uses_bank = args.method.contains(&ClassifyMethod::Fbs);
    let candidates = if uses_bank {
        Some(candidate_bank(args.filters.as_deref(), &args.bank, &grid)?)
    } else {
        None
    };
    let mut results = Vec::new();
    let mut fbs_model = None;
    for &method in &args.method {
        let start = Instant::now();
        let model: TrainedModel = match method {
            ClassifyMethod::Fbs => {
                let (bank, _) = candidates.as_ref().expect("bank loaded for fbs");
                let options = TrainOptions {
                    band_norm: args.band_norm,
                    ..Default::default()
                };
                train_with(
                    &train,
                    bank,
                    &fbs_config(args.k, &args.search),
                    args.search.metric,
                    options,
                )?
            }
            ClassifyMethod::Uniform => {
                let shape = args.bank.shape.unwrap_or(filtersel::Shape::Gaussian);
                let bank = make_uniform_bank(
                    args.k,
                    uniform_range(args, &grid),
                    args.uniform_bandwidth,
                    shape,
                    &grid,
                )
                .map_err(synthesis_error)?;
                train_fixed(
                    &train,
                    Recorder::Filters(bank),
                    args.search.metric,
                    args.band_norm,
                )?
            }
            ClassifyMethod::FullSpectrum => full_spectrum_model(&train)?,
        };
        let train_wall_time_s = start.elapsed().as_secs_f64();
        let report = model.evaluate(&test)?;
        results.push(MethodResult {
            method,
            bands: model.recorder.band_count(),
            band_ids: model.recorder.band_ids(),
            achieved_min_distance: model.selection.as_ref().map(|s| s.achieved_min_distance),
            train_wall_time_s,
            report,
        });
        if method == ClassifyMethod::Fbs {
            fbs_model = Some(model);
        }
    }
    if let (Some(path), Some(model)) = (&args.model_out, &fbs_model) {
        let json = model.to_json().map_err(|e| CliError::Data(e.to_string()))?;
        crate::output::write_atomic(path, &(json + "\n"))?;
    }
    let format = args.output.format.unwrap_or(Format::Json);
    let report = ClassifyReport {
        command: "classify",
        config: args,
        format,
        classes: train.classes().to_vec(),
        train_count: train.len(),
        test_count: test.len(),
        data,
        bank: candidates.map(|(_, source)| source),
        results,
    };
    let text = match format {
        Format::Json => to_json(&report)?,
        Format::Tsv => classify_tsv(&report)?,
    };
    emit(&args.output, &text)
}

fn classify_tsv(report: &ClassifyReport) -> Result<String, CliError> {
    let mut out = format!(
        "# config\t{}\n",
        serde_json::to_string(report.config).map_err(json_error)?
    );
    out += "method\tbands\ttotal\twrong\tachieved_min_distance\tband_ids\n";
    for r in &report.results {
        let method = serde_json::to_value(r.method).map_err(json_error)?;
        let ids = if matches!(r.method, ClassifyMethod::FullSpectrum) {
            format!("{} samples", r.bands)
        } else {
            r.band_ids.join(",")
        };
        out += &format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            method.as_str().unwrap_or(""),
            r.bands,
            r.report.total,
            r.report.wrong,
            r.achieved_min_distance
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into()),
            ids
        );
    }
    out += "\n";
    for r in &report.results {
        out += &format!(
            "# confusion\t{}\n",
            serde_json::to_value(r.method)
                .map_err(json_error)?
                .as_str()
                .unwrap_or("")
        );
        out += &r.report.to_tsv();
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct GenFiltersReport<'a> {
    pub command: &'static str,
    pub config: &'a GenFiltersArgs,
    pub filters: &'a FilterBank,
}

pub fn generate_bank(args: &GenFiltersArgs) -> Result<FilterBank, CliError> {
    let (lo, hi) = args.grid_range.unwrap_or(args.bank_range);
    let grid = WavelengthGrid::uniform(lo, hi, args.grid_step)
        .map_err(|e| CliError::Config(format!("grid: {e}")))?;
    filtersel::make_sweep_bank(
        args.bank_range,
        &args.bandwidths,
        args.count_per_bandwidth,
        args.shape,
        &grid,
    )
    .map_err(synthesis_error)
}

pub fn cmd_gen_filters(args: &GenFiltersArgs) -> Result<(), CliError> {
    let bank = generate_bank(args)?;
    let text = match args.output.format.unwrap_or(Format::Tsv) {
        Format::Json => to_json(&GenFiltersReport {
            command: "gen-filters",
            config: args,
            filters: &bank,
        })?,
        Format::Tsv => {
            let config = serde_json::to_string(args).map_err(json_error)?;
            format!(
                "# config\t{config}\n{}",
                bank.to_table().to_string(Delimiter::Tab)
            )
        }
    };
    emit(&args.output, &text)
}
