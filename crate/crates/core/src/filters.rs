//! Filter transmittance curves, synthetic bandpass banks, and the response
//! matrix of integrated filter-times-spectrum products.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectra::{
    interpolate_sorted, merge_sorted, SpectraError, Spectrum, SpectrumSet, WavelengthGrid,
};
use crate::table::{Table, TableError, WAVELENGTH_HEADER};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter center {center} nm is outside the grid range {lo}..{hi} nm")]
    CenterOutsideGrid { center: f64, lo: f64, hi: f64 },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("range {lo}..{hi} nm is narrower than the bandwidth {bandwidth} nm")]
    RangeTooNarrow { lo: f64, hi: f64, bandwidth: f64 },
    #[error("range {lo}..{hi} nm is not inside the grid range {grid_lo}..{grid_hi} nm")]
    RangeOutsideGrid {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },
    #[error("filter count must be at least 1")]
    ZeroCount,
    #[error("bandwidth list is empty")]
    NoBandwidths,
    #[error("filter bank is empty")]
    EmptyBank,
    #[error("duplicate filter id `{0}`")]
    DuplicateId(String),
    #[error("filter `{id}` has transmittance {value} at sample {index}: must lie in [0, 1]")]
    TransmittanceOutOfRange {
        id: String,
        index: usize,
        value: f64,
    },
    #[error("filter `{id}` has {values} samples for a grid of {grid}")]
    LengthMismatch {
        id: String,
        values: usize,
        grid: usize,
    },
    #[error("filter `{0}` has zero transmittance everywhere on its grid")]
    AllZero(String),
    #[error("response matrix entry ({row}, {col}) is {value}: must be finite and >= 0")]
    InvalidResponse { row: usize, col: usize, value: f64 },
    #[error("response matrix rows have unequal lengths")]
    RaggedMatrix,
    #[error("filter index {index} out of range for a bank of {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Bandpass profile used when synthesizing filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Unit transmittance on `[center - bw/2, center + bw/2]`, zero elsewhere.
    Rectangular,
    /// Unit peak, FWHM equal to the bandwidth, truncated beyond 4 sigma.
    Gaussian,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Rectangular => "rectangular",
            Shape::Gaussian => "gaussian",
        })
    }
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rect" | "rectangular" => Ok(Shape::Rectangular),
            "gauss" | "gaussian" => Ok(Shape::Gaussian),
            other => Err(format!(
                "unknown filter shape `{other}` (expected rectangular|gaussian)"
            )),
        }
    }
}

const GAUSSIAN_TRUNCATION_SIGMAS: f64 = 4.0;
const EDGE_SNAP_NM: f64 = 1e-9;

/// A sampled transmittance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCurve {
    grid: WavelengthGrid,
    transmittance: Vec<f64>,
    id: String,
    nominal_center: f64,
    nominal_bandwidth: f64,
}

impl FilterCurve {
    /// Builds a curve from samples; the nominal center is the
    /// transmittance-weighted mean wavelength and the nominal bandwidth the
    /// span of samples at or above half the peak.
    pub fn new(
        grid: WavelengthGrid,
        transmittance: Vec<f64>,
        id: impl Into<String>,
    ) -> Result<Self, FilterError> {
        let id = id.into();
        validate_transmittance(&id, &grid, &transmittance)?;
        let xs = grid.samples();
        let weight: f64 = transmittance.iter().sum();
        let center = xs
            .iter()
            .zip(&transmittance)
            .map(|(x, t)| x * t)
            .sum::<f64>()
            / weight;
        let peak = transmittance.iter().cloned().fold(0.0, f64::max);
        let above: Vec<f64> = xs
            .iter()
            .zip(&transmittance)
            .filter(|(_, &t)| t >= 0.5 * peak)
            .map(|(&x, _)| x)
            .collect();
        let bandwidth = above.last().unwrap() - above.first().unwrap();
        Ok(FilterCurve {
            grid,
            transmittance,
            id,
            nominal_center: center,
            nominal_bandwidth: bandwidth,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn transmittance(&self) -> &[f64] {
        &self.transmittance
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn nominal_center(&self) -> f64 {
        self.nominal_center
    }

    pub fn nominal_bandwidth(&self) -> f64 {
        self.nominal_bandwidth
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Multiplies the transmittance by `factor` in `(0, 1]`.
    pub fn scaled(&self, factor: f64) -> Result<FilterCurve, FilterError> {
        let transmittance: Vec<f64> = self.transmittance.iter().map(|t| t * factor).collect();
        validate_transmittance(&self.id, &self.grid, &transmittance)?;
        Ok(FilterCurve {
            transmittance,
            ..self.clone()
        })
    }

    /// `[first, last]` wavelength with nonzero transmittance.
    pub fn support(&self) -> (f64, f64) {
        let xs = self.grid.samples();
        let first = self.transmittance.iter().position(|&t| t > 0.0).unwrap();
        let last = self.transmittance.iter().rposition(|&t| t > 0.0).unwrap();
        (xs[first], xs[last])
    }

    /// Integrated response of this filter to one spectrum, optionally through
    /// an extra system transmittance (lens, sensor) multiplied into the
    /// integrand.
    pub fn response(&self, spectrum: &Spectrum, system: Option<&FilterCurve>) -> f64 {
        let Some(points) = self.integration_points(spectrum.grid(), system) else {
            return 0.0;
        };
        let integrand = self.weights_on(&points, system);
        let light = interpolate_sorted(spectrum.grid().samples(), spectrum.values(), &points);
        trapezoid_product(&points, &integrand, &light)
    }

    /// Union of the filter, spectrum and system grids restricted to the
    /// intersection of their supports, with the bounds themselves included.
    fn integration_points(
        &self,
        spectrum_grid: &WavelengthGrid,
        system: Option<&FilterCurve>,
    ) -> Option<Vec<f64>> {
        let (mut lo, mut hi) = self.support();
        lo = lo.max(spectrum_grid.first());
        hi = hi.min(spectrum_grid.last());
        let mut points = merge_sorted(self.grid.samples(), spectrum_grid.samples());
        if let Some(sys) = system {
            let (slo, shi) = sys.support();
            lo = lo.max(slo);
            hi = hi.min(shi);
            points = merge_sorted(&points, sys.grid.samples());
        }
        if !(hi > lo) {
            return None;
        }
        let inner = points.iter().copied().filter(|&x| x > lo && x < hi);
        let mut out = Vec::with_capacity(points.len() + 2);
        out.push(lo);
        out.extend(inner);
        out.push(hi);
        Some(out)
    }

    fn weights_on(&self, points: &[f64], system: Option<&FilterCurve>) -> Vec<f64> {
        let mut w = interpolate_sorted(self.grid.samples(), &self.transmittance, points);
        if let Some(sys) = system {
            let s = interpolate_sorted(sys.grid.samples(), &sys.transmittance, points);
            for (a, b) in w.iter_mut().zip(s) {
                *a *= b;
            }
        }
        w
    }
}

fn validate_transmittance(id: &str, grid: &WavelengthGrid, t: &[f64]) -> Result<(), FilterError> {
    if t.len() != grid.len() {
        return Err(FilterError::LengthMismatch {
            id: id.to_string(),
            values: t.len(),
            grid: grid.len(),
        });
    }
    if let Some((index, &value)) = t
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
    {
        return Err(FilterError::TransmittanceOutOfRange {
            id: id.to_string(),
            index,
            value,
        });
    }
    if t.iter().all(|&v| v == 0.0) {
        return Err(FilterError::AllZero(id.to_string()));
    }
    Ok(())
}

/// Trapezoidal integral of `a(x) * b(x)` sampled at `xs`, summed left to right.
fn trapezoid_product(xs: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 1..xs.len() {
        let left = a[i - 1] * b[i - 1];
        let right = a[i] * b[i];
        sum += 0.5 * (xs[i] - xs[i - 1]) * (left + right);
    }
    sum
}

/// Compact wavelength label: integers print bare, otherwise up to two decimals.
pub(crate) fn format_nm(v: f64) -> String {
    let rounded = (v * 100.0).round() / 100.0;
    if rounded.fract() == 0.0 {
        format!("{}", rounded as i64)
    } else {
        let s = format!("{rounded:.2}");
        s.trim_end_matches('0').to_string()
    }
}

/// Default identifier of a synthetic bandpass filter.
pub fn bandpass_id(center: f64, bandwidth: f64) -> String {
    format!("bp{}nm_bw{}", format_nm(center), format_nm(bandwidth))
}

/// Synthesizes one bandpass filter sampled on `grid`.
///
/// Rectangular filters additionally carry samples at their exact passband
/// edges (when those fall inside the grid) so the passband width does not
/// depend on the grid spacing.
pub fn make_bandpass(
    center: f64,
    bandwidth: f64,
    shape: Shape,
    grid: &WavelengthGrid,
) -> Result<FilterCurve, FilterError> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(FilterError::InvalidBandwidth(bandwidth));
    }
    if !center.is_finite() || !grid.contains(center) {
        return Err(FilterError::CenterOutsideGrid {
            center,
            lo: grid.first(),
            hi: grid.last(),
        });
    }
    let id = bandpass_id(center, bandwidth);
    let (samples, transmittance): (Vec<f64>, Vec<f64>) = match shape {
        Shape::Rectangular => {
            let lo = center - bandwidth / 2.0;
            let hi = center + bandwidth / 2.0;
            let mut edges = Vec::new();
            for edge in [lo, hi] {
                let near_existing = grid
                    .samples()
                    .iter()
                    .any(|&x| (x - edge).abs() <= EDGE_SNAP_NM);
                if grid.contains(edge) && !near_existing {
                    edges.push(edge);
                }
            }
            let samples = merge_sorted(grid.samples(), &edges);
            let t = samples
                .iter()
                .map(|&x| {
                    if x >= lo - EDGE_SNAP_NM && x <= hi + EDGE_SNAP_NM {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            (samples, t)
        }
        Shape::Gaussian => {
            let sigma = bandwidth / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
            let cutoff = GAUSSIAN_TRUNCATION_SIGMAS * sigma;
            let t = grid
                .samples()
                .iter()
                .map(|&x| {
                    let d = x - center;
                    if d.abs() > cutoff {
                        0.0
                    } else {
                        (-d * d / (2.0 * sigma * sigma)).exp()
                    }
                })
                .collect();
            (grid.samples().to_vec(), t)
        }
    };
    let grid = WavelengthGrid::new(samples)?;
    validate_transmittance(&id, &grid, &transmittance)?;
    Ok(FilterCurve {
        grid,
        transmittance,
        id,
        nominal_center: center,
        nominal_bandwidth: bandwidth,
    })
}

/// An ordered set of candidate filters with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FilterCurve>", into = "Vec<FilterCurve>")]
pub struct FilterBank {
    filters: Vec<FilterCurve>,
}

impl FilterBank {
    pub fn new(filters: Vec<FilterCurve>) -> Result<Self, FilterError> {
        if filters.is_empty() {
            return Err(FilterError::EmptyBank);
        }
        let mut seen = HashSet::new();
        for f in &filters {
            if !seen.insert(f.id.as_str()) {
                return Err(FilterError::DuplicateId(f.id.clone()));
            }
        }
        Ok(FilterBank { filters })
    }

    pub fn filters(&self) -> &[FilterCurve] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.filters.iter().map(|f| f.id.clone()).collect()
    }

    /// Sub-bank holding the filters at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<FilterBank, FilterError> {
        let filters = indices
            .iter()
            .map(|&i| {
                self.filters
                    .get(i)
                    .cloned()
                    .ok_or(FilterError::IndexOutOfRange {
                        index: i,
                        len: self.filters.len(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        FilterBank::new(filters)
    }

    /// Tabular form on the union of all filter grids; each filter is linearly
    /// resampled (clamped) onto that union.
    pub fn to_table(&self) -> Table {
        let mut keys = self.filters[0].grid.samples().to_vec();
        for f in &self.filters[1..] {
            keys = merge_sorted(&keys, f.grid.samples());
        }
        let columns = self
            .filters
            .iter()
            .map(|f| interpolate_sorted(f.grid.samples(), &f.transmittance, &keys))
            .collect();
        Table {
            key_header: WAVELENGTH_HEADER.to_string(),
            headers: self.ids(),
            keys,
            columns,
        }
    }

    pub fn from_table(table: &Table) -> Result<FilterBank, FilterError> {
        let grid = WavelengthGrid::new(table.keys.clone())?;
        let filters = table
            .headers
            .iter()
            .zip(&table.columns)
            .map(|(id, column)| FilterCurve::new(grid.clone(), column.clone(), id.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        FilterBank::new(filters)
    }
}

impl TryFrom<Vec<FilterCurve>> for FilterBank {
    type Error = FilterError;

    fn try_from(filters: Vec<FilterCurve>) -> Result<Self, Self::Error> {
        FilterBank::new(filters)
    }
}

impl From<FilterBank> for Vec<FilterCurve> {
    fn from(bank: FilterBank) -> Self {
        bank.filters
    }
}

/// Reads a filter bank file (`wavelength_nm` plus one column per filter id).
pub fn load_filter_bank<R: Read>(source: R) -> Result<FilterBank, FilterError> {
    let table = Table::read(source, Some(WAVELENGTH_HEADER))?;
    FilterBank::from_table(&table)
}

/// Centers of `count` equally spaced passbands of width `bandwidth` that
/// together span `[lo, hi]`.
pub fn uniform_centers(
    count: usize,
    lo: f64,
    hi: f64,
    bandwidth: f64,
) -> Result<Vec<f64>, FilterError> {
    if count == 0 {
        return Err(FilterError::ZeroCount);
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(FilterError::InvalidBandwidth(bandwidth));
    }
    if hi - lo < bandwidth {
        return Err(FilterError::RangeTooNarrow { lo, hi, bandwidth });
    }
    if count == 1 {
        return Ok(vec![(lo + hi) / 2.0]);
    }
    let first = lo + bandwidth / 2.0;
    let step = (hi - lo - bandwidth) / (count - 1) as f64;
    Ok((0..count).map(|k| first + k as f64 * step).collect())
}

/// `count` equidistant bandpass filters covering `range`.
pub fn make_uniform_bank(
    count: usize,
    range: (f64, f64),
    bandwidth: f64,
    shape: Shape,
    grid: &WavelengthGrid,
) -> Result<FilterBank, FilterError> {
    let (lo, hi) = range;
    if !(grid.contains(lo) && grid.contains(hi)) {
        return Err(FilterError::RangeOutsideGrid {
            lo,
            hi,
            grid_lo: grid.first(),
            grid_hi: grid.last(),
        });
    }
    let filters = uniform_centers(count, lo, hi, bandwidth)?
        .into_iter()
        .map(|c| make_bandpass(c, bandwidth, shape, grid))
        .collect::<Result<Vec<_>, _>>()?;
    FilterBank::new(filters)
}

/// Concatenation of one uniform bank per bandwidth.
pub fn make_sweep_bank(
    range: (f64, f64),
    bandwidths: &[f64],
    count_per_bandwidth: usize,
    shape: Shape,
    grid: &WavelengthGrid,
) -> Result<FilterBank, FilterError> {
    if bandwidths.is_empty() {
        return Err(FilterError::NoBandwidths);
    }
    let mut filters = Vec::with_capacity(bandwidths.len() * count_per_bandwidth);
    for &bw in bandwidths {
        let bank = make_uniform_bank(count_per_bandwidth, range, bw, shape, grid)?;
        filters.extend(bank.filters);
    }
    FilterBank::new(filters)
}

/// Row-major matrix of filter responses: one row per filter, one column per
/// spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    filter_ids: Vec<String>,
    class_labels: Vec<String>,
}

impl FilterMatrix {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        filter_ids: Vec<String>,
        class_labels: Vec<String>,
    ) -> Result<Self, FilterError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) || filter_ids.len() != n || class_labels.len() != m {
            return Err(FilterError::RaggedMatrix);
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(pos) = entries.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FilterError::InvalidResponse {
                row: pos / m,
                col: pos % m,
                value: entries[pos],
            });
        }
        Ok(FilterMatrix {
            rows: n,
            cols: m,
            entries,
            filter_ids,
            class_labels,
        })
    }

    /// Matrix with generated ids `f1..fN` and labels `o1..oM`.
    pub fn from_rows_unlabeled(rows: Vec<Vec<f64>>) -> Result<Self, FilterError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let ids = (1..=n).map(|i| format!("f{i}")).collect();
        let labels = (1..=m).map(|j| format!("o{j}")).collect();
        Self::from_rows(rows, ids, labels)
    }

    pub fn filter_count(&self) -> usize {
        self.rows
    }

    pub fn spectrum_count(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn filter_ids(&self) -> &[String] {
        &self.filter_ids
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }
}

/// Response matrix `F[i][j]` = integral of filter `i` times spectrum `j`.
pub fn integrate_responses(bank: &FilterBank, spectra: &SpectrumSet) -> FilterMatrix {
    integrate_responses_with(bank, spectra, None)
}

/// As [`integrate_responses`], with an optional system transmittance curve
/// multiplied into every integrand.
pub fn integrate_responses_with(
    bank: &FilterBank,
    spectra: &SpectrumSet,
    system: Option<&FilterCurve>,
) -> FilterMatrix {
    let grid = spectra.grid();
    let cols = spectra.len();
    let mut entries = Vec::with_capacity(bank.len() * cols);
    for filter in bank.filters() {
        match filter.integration_points(grid, system) {
            None => entries.extend(std::iter::repeat(0.0).take(cols)),
            Some(points) => {
                let weights = filter.weights_on(&points, system);
                for s in spectra.spectra() {
                    let light = interpolate_sorted(grid.samples(), s.values(), &points);
                    entries.push(trapezoid_product(&points, &weights, &light));
                }
            }
        }
    }
    FilterMatrix {
        rows: bank.len(),
        cols,
        entries,
        filter_ids: bank.ids(),
        class_labels: spectra
            .spectra()
            .iter()
            .map(|s| s.label().to_string())
            .collect(),
    }
}
