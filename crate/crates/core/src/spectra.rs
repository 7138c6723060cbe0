//! Labeled object spectra: loading, resampling, class averaging and
//! normalization.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Table, TableError, WAVELENGTH_HEADER};

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("wavelength grid needs at least 2 samples, found {0}")]
    GridTooShort(usize),
    #[error("non-increasing grid at row {row}")]
    NonIncreasingGrid { row: usize },
    #[error("invalid wavelength {value} at row {row}: must be finite and positive")]
    InvalidWavelength { row: usize, value: f64 },
    #[error("spectrum `{label}` has {values} values for a grid of {grid} samples")]
    LengthMismatch {
        label: String,
        values: usize,
        grid: usize,
    },
    #[error(
        "spectrum `{label}` has invalid value {value} at sample {index}: must be finite and >= 0"
    )]
    InvalidValue {
        label: String,
        index: usize,
        value: f64,
    },
    #[error("spectrum `{label}` is identically zero")]
    AllZero { label: String },
    #[error("spectrum set is empty")]
    EmptySet,
    #[error("crop range {lo}..{hi} keeps fewer than 2 samples")]
    CropTooNarrow { lo: f64, hi: f64 },
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Strictly increasing, positive, finite wavelength samples in nanometers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WavelengthGrid(Vec<f64>);

impl WavelengthGrid {
    pub fn new(samples: Vec<f64>) -> Result<Self, SpectraError> {
        if samples.len() < 2 {
            return Err(SpectraError::GridTooShort(samples.len()));
        }
        for (i, &v) in samples.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(SpectraError::InvalidWavelength {
                    row: i + 1,
                    value: v,
                });
            }
            if i > 0 && v <= samples[i - 1] {
                return Err(SpectraError::NonIncreasingGrid { row: i + 1 });
            }
        }
        Ok(WavelengthGrid(samples))
    }

    /// Evenly spaced grid from `lo` to `hi` inclusive. The last sample is
    /// `hi` whenever `(hi - lo) / step` is integral.
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Result<Self, SpectraError> {
        if !(step > 0.0) || !(hi > lo) {
            return Err(SpectraError::GridTooShort(0));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let samples = (0..count).map(|i| lo + i as f64 * step).collect();
        Self::new(samples)
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn contains(&self, wavelength: f64) -> bool {
        wavelength >= self.first() && wavelength <= self.last()
    }

    /// Sorted union of two grids with exact duplicates merged.
    pub fn union(&self, other: &WavelengthGrid) -> WavelengthGrid {
        WavelengthGrid(merge_sorted(&self.0, &other.0))
    }

    /// Indices of the samples inside `[lo, hi]`.
    pub(crate) fn crop_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.0.partition_point(|&x| x < lo);
        let end = self.0.partition_point(|&x| x <= hi);
        start..end.max(start)
    }
}

impl TryFrom<Vec<f64>> for WavelengthGrid {
    type Error = SpectraError;

    fn try_from(samples: Vec<f64>) -> Result<Self, Self::Error> {
        WavelengthGrid::new(samples)
    }
}

impl From<WavelengthGrid> for Vec<f64> {
    fn from(grid: WavelengthGrid) -> Self {
        grid.0
    }
}

pub(crate) fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if y < x => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// Piecewise-linear interpolation of `(xs, ys)` at sorted `targets`, clamping
/// to the edge values outside `[xs[0], xs[last]]`. Exact at shared knots.
pub(crate) fn interpolate_sorted(xs: &[f64], ys: &[f64], targets: &[f64]) -> Vec<f64> {
    let last = xs.len() - 1;
    let mut seg = 0;
    targets
        .iter()
        .map(|&t| {
            if t <= xs[0] {
                return ys[0];
            }
            if t >= xs[last] {
                return ys[last];
            }
            while xs[seg + 1] < t {
                seg += 1;
            }
            if xs[seg + 1] == t {
                return ys[seg + 1];
            }
            if xs[seg] == t {
                return ys[seg];
            }
            let w = (t - xs[seg]) / (xs[seg + 1] - xs[seg]);
            ys[seg] + w * (ys[seg + 1] - ys[seg])
        })
        .collect()
}

/// A sampled light spectrum of one observation of an object class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    grid: WavelengthGrid,
    values: Vec<f64>,
    label: String,
}

impl Spectrum {
    pub fn new(
        grid: WavelengthGrid,
        values: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, SpectraError> {
        let label = label.into();
        if values.len() != grid.len() {
            return Err(SpectraError::LengthMismatch {
                label,
                values: values.len(),
                grid: grid.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(SpectraError::InvalidValue {
                label,
                index,
                value,
            });
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(SpectraError::AllZero { label });
        }
        Ok(Spectrum {
            grid,
            values,
            label,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Linear resampling onto `target`, clamped to the edge values outside
    /// this spectrum's grid.
    pub fn resample(&self, target: &WavelengthGrid) -> Spectrum {
        if &self.grid == target {
            return self.clone();
        }
        let values = interpolate_sorted(self.grid.samples(), &self.values, target.samples());
        Spectrum {
            grid: target.clone(),
            values,
            label: self.label.clone(),
        }
    }

    /// Values divided by their Euclidean norm.
    pub fn l2_normalize(&self) -> Spectrum {
        let norm = l2_norm(&self.values);
        Spectrum {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v / norm).collect(),
            label: self.label.clone(),
        }
    }

    /// Multiplies every value by `factor` (which must be positive).
    pub fn scaled(&self, factor: f64) -> Result<Spectrum, SpectraError> {
        Spectrum::new(
            self.grid.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.label.clone(),
        )
    }

    pub fn crop(&self, lo: f64, hi: f64) -> Result<Spectrum, SpectraError> {
        let range = self.grid.crop_range(lo, hi);
        if range.len() < 2 {
            return Err(SpectraError::CropTooNarrow { lo, hi });
        }
        let grid = WavelengthGrid::new(self.grid.samples()[range.clone()].to_vec())?;
        Spectrum::new(grid, self.values[range].to_vec(), self.label.clone())
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectra on one shared wavelength grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSet {
    grid: WavelengthGrid,
    spectra: Vec<Spectrum>,
    classes: Vec<String>,
}

impl SpectrumSet {
    /// Builds a set on the grid of the first spectrum, resampling the rest.
    pub fn new(spectra: Vec<Spectrum>) -> Result<Self, SpectraError> {
        let grid = spectra.first().ok_or(SpectraError::EmptySet)?.grid.clone();
        Self::on_grid(spectra, grid)
    }

    pub fn on_grid(spectra: Vec<Spectrum>, grid: WavelengthGrid) -> Result<Self, SpectraError> {
        if spectra.is_empty() {
            return Err(SpectraError::EmptySet);
        }
        let spectra: Vec<Spectrum> = spectra.iter().map(|s| s.resample(&grid)).collect();
        let mut classes: Vec<String> = Vec::new();
        for s in &spectra {
            if s.values.iter().all(|&v| v == 0.0) {
                return Err(SpectraError::AllZero {
                    label: s.label.clone(),
                });
            }
            if !classes.iter().any(|c| c == &s.label) {
                classes.push(s.label.clone());
            }
        }
        Ok(SpectrumSet {
            grid,
            spectra,
            classes,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    /// One spectrum per class holding the per-sample arithmetic mean of that
    /// class's members, in class order.
    pub fn average_by_class(&self) -> SpectrumSet {
        let width = self.grid.len();
        let mut sums = vec![vec![0.0; width]; self.classes.len()];
        let mut counts = vec![0usize; self.classes.len()];
        for s in &self.spectra {
            let c = self.class_index(&s.label).expect("label is a class");
            counts[c] += 1;
            for (acc, v) in sums[c].iter_mut().zip(&s.values) {
                *acc += v;
            }
        }
        let spectra = sums
            .into_iter()
            .zip(counts)
            .zip(&self.classes)
            .map(|((sum, count), label)| Spectrum {
                grid: self.grid.clone(),
                values: sum.into_iter().map(|v| v / count as f64).collect(),
                label: label.clone(),
            })
            .collect();
        SpectrumSet {
            grid: self.grid.clone(),
            spectra,
            classes: self.classes.clone(),
        }
    }

    pub fn l2_normalize(&self) -> SpectrumSet {
        SpectrumSet {
            grid: self.grid.clone(),
            spectra: self.spectra.iter().map(Spectrum::l2_normalize).collect(),
            classes: self.classes.clone(),
        }
    }

    pub fn crop(&self, lo: f64, hi: f64) -> Result<SpectrumSet, SpectraError> {
        let spectra = self
            .spectra
            .iter()
            .map(|s| s.crop(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        SpectrumSet::new(spectra)
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Splits each class into its first `per_class` members and the rest,
    /// preserving order within each part.
    pub fn split_per_class(&self, per_class: usize) -> (Vec<Spectrum>, Vec<Spectrum>) {
        let mut seen = vec![0usize; self.classes.len()];
        let mut head = Vec::new();
        let mut tail = Vec::new();
        for s in &self.spectra {
            let c = self.class_index(&s.label).expect("label is a class");
            if seen[c] < per_class {
                head.push(s.clone());
            } else {
                tail.push(s.clone());
            }
            seen[c] += 1;
        }
        (head, tail)
    }

    /// Tabular form: one column per spectrum, header = label.
    pub fn to_table(&self) -> Table {
        Table {
            key_header: WAVELENGTH_HEADER.to_string(),
            headers: self.spectra.iter().map(|s| s.label.clone()).collect(),
            keys: self.grid.samples().to_vec(),
            columns: self.spectra.iter().map(|s| s.values.clone()).collect(),
        }
    }
}

/// Options applied while loading a spectrum file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoadOptions {
    /// Keep only samples with `lo <= wavelength <= hi`.
    pub crop: Option<(f64, f64)>,
}

/// Reads a spectrum file: first column `wavelength_nm`, one spectrum per
/// remaining column with the class label as header.
pub fn load_spectra<R: Read>(source: R, options: LoadOptions) -> Result<SpectrumSet, SpectraError> {
    let table = Table::read(source, Some(WAVELENGTH_HEADER))?;
    spectra_from_table(&table, options)
}

pub fn spectra_from_table(
    table: &Table,
    options: LoadOptions,
) -> Result<SpectrumSet, SpectraError> {
    let grid = WavelengthGrid::new(table.keys.clone())?;
    let range = match options.crop {
        Some((lo, hi)) => {
            let r = grid.crop_range(lo, hi);
            if r.len() < 2 {
                return Err(SpectraError::CropTooNarrow { lo, hi });
            }
            r
        }
        None => 0..grid.len(),
    };
    let grid = WavelengthGrid::new(grid.samples()[range.clone()].to_vec())?;
    let spectra = table
        .headers
        .iter()
        .zip(&table.columns)
        .map(|(label, column)| {
            Spectrum::new(grid.clone(), column[range.clone()].to_vec(), label.clone())
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpectrumSet::on_grid(spectra, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(samples: &[f64]) -> WavelengthGrid {
        WavelengthGrid::new(samples.to_vec()).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(matches!(
            WavelengthGrid::new(vec![400.0]),
            Err(SpectraError::GridTooShort(1))
        ));
        assert!(WavelengthGrid::new(vec![400.0, 400.0]).is_err());
        assert!(WavelengthGrid::new(vec![0.0, 1.0]).is_err());
        assert!(WavelengthGrid::new(vec![1.0, f64::NAN]).is_err());
        let g = WavelengthGrid::uniform(400.0, 410.0, 1.0).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.last(), 410.0);
    }

    #[test]
    fn loads_three_column_file() {
        let rows: String = (0..5)
            .map(|i| format!("{},{},{}\n", 400 + i, i + 1, 2 * i + 1))
            .collect();
        let text = format!("wavelength_nm,a,b\n{rows}");
        let set = load_spectra(text.as_bytes(), LoadOptions::default()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.classes(), ["a", "b"]);
        assert_eq!(set.spectra()[1].values(), [1.0, 3.0, 5.0, 7.0, 9.0]);
    }

    #[test]
    fn rejects_non_increasing_wavelengths() {
        let text = "wavelength_nm,a\n400,1\n399,1\n401,1\n";
        let err = load_spectra(text.as_bytes(), LoadOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "non-increasing grid at row 2");
    }

    #[test]
    fn load_with_crop() {
        let text = "wavelength_nm\ta\ta\n400\t1\t3\n401\t2\t3\n402\t3\t3\n403\t4\t3\n";
        let set = load_spectra(
            text.as_bytes(),
            LoadOptions {
                crop: Some((401.0, 402.0)),
            },
        )
        .unwrap();
        assert_eq!(set.grid().samples(), [401.0, 402.0]);
        assert_eq!(set.classes(), ["a"]);
        assert_eq!(set.len(), 2);
        assert!(load_spectra(
            text.as_bytes(),
            LoadOptions {
                crop: Some((401.5, 401.9))
            }
        )
        .is_err());
    }

    #[test]
    fn spectrum_rejects_negative_and_zero() {
        let g = grid(&[400.0, 500.0]);
        assert!(Spectrum::new(g.clone(), vec![1.0, -1.0], "x").is_err());
        assert!(matches!(
            Spectrum::new(g.clone(), vec![0.0, 0.0], "x"),
            Err(SpectraError::AllZero { .. })
        ));
        assert!(Spectrum::new(g, vec![1.0], "x").is_err());
    }

    #[test]
    fn resample_constant_and_midpoint() {
        let s = Spectrum::new(grid(&[400.0, 450.0, 500.0]), vec![2.0; 3], "c").unwrap();
        let r = s.resample(&grid(&[300.0, 401.3, 477.0, 900.0]));
        assert!(r.values().iter().all(|&v| v == 2.0));

        let s = Spectrum::new(grid(&[400.0, 500.0]), vec![0.0, 10.0], "m").unwrap();
        let r = s.resample(&grid(&[450.0, 500.0]));
        assert_eq!(r.values()[0], 5.0);
        assert_eq!(r.label(), "m");
    }

    #[test]
    fn resample_clamps_outside_source() {
        let s = Spectrum::new(grid(&[400.0, 500.0]), vec![1.0, 3.0], "m").unwrap();
        let r = s.resample(&grid(&[350.0, 550.0]));
        assert_eq!(r.values(), [1.0, 3.0]);
    }

    #[test]
    fn resample_round_trip_on_superset() {
        let g = grid(&[400.0, 410.0, 425.0, 460.0]);
        let s = Spectrum::new(g.clone(), vec![1.0, 7.5, 0.25, 3.0], "p").unwrap();
        let fine = WavelengthGrid::uniform(400.0, 460.0, 0.5)
            .unwrap()
            .union(&g);
        let back = s.resample(&fine).resample(&g);
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn average_of_equals_and_of_two() {
        let g = grid(&[1.0, 2.0, 3.0]);
        let a1 = Spectrum::new(g.clone(), vec![1.0; 3], "a").unwrap();
        let a3 = Spectrum::new(g.clone(), vec![3.0; 3], "a").unwrap();
        let avg = SpectrumSet::new(vec![a1.clone(), a3])
            .unwrap()
            .average_by_class();
        assert_eq!(avg.len(), 1);
        assert_eq!(avg.spectra()[0].values(), [2.0; 3]);

        let avg = SpectrumSet::new(vec![a1.clone(), a1.clone()])
            .unwrap()
            .average_by_class();
        assert_eq!(avg.spectra(), [a1]);
    }

    #[test]
    fn average_preserves_first_appearance_order() {
        let g = grid(&[1.0, 2.0]);
        let mk = |l: &str, v: f64| Spectrum::new(g.clone(), vec![v, v], l).unwrap();
        let set = SpectrumSet::new(vec![mk("b", 1.0), mk("a", 2.0), mk("b", 3.0)]).unwrap();
        let avg = set.average_by_class();
        assert_eq!(avg.classes(), ["b", "a"]);
        assert_eq!(avg.spectra()[0].values(), [2.0, 2.0]);
        assert_eq!(avg.spectra()[1].values(), [2.0, 2.0]);
    }

    #[test]
    fn normalize_examples() {
        let s = Spectrum::new(grid(&[1.0, 2.0]), vec![3.0, 4.0], "t").unwrap();
        let n = s.l2_normalize();
        assert!((n.values()[0] - 0.6).abs() < 1e-12 && (n.values()[1] - 0.8).abs() < 1e-12);
        let again = n.l2_normalize();
        for (a, b) in again.values().iter().zip(n.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let u = Spectrum::new(grid(&[1.0, 2.0, 3.0, 4.0]), vec![2.0; 4], "u").unwrap();
        assert!(u
            .l2_normalize()
            .values()
            .iter()
            .all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn split_per_class_takes_first_members() {
        let g = grid(&[1.0, 2.0]);
        let mk = |l: &str, v: f64| Spectrum::new(g.clone(), vec![v, v], l).unwrap();
        let set =
            SpectrumSet::new(vec![mk("a", 1.0), mk("b", 1.0), mk("a", 2.0), mk("a", 3.0)]).unwrap();
        let (train, test) = set.split_per_class(2);
        assert_eq!(train.len(), 3);
        assert_eq!(test.len(), 1);
        assert_eq!(test[0].values(), [3.0, 3.0]);
    }
}
