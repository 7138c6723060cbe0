//! Train/inference pipeline: record class means through selected filters,
//! normalize per band, and classify by nearest reference under a metric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::{integrate_responses, FilterBank, FilterError, FilterMatrix};
use crate::metrics::{build_adjacency_with, AdjacencyOptions, MetricError, MetricId};
use crate::selection::{fbs_select, FbsConfig, SelectionError, SelectionResult};
use crate::spectra::{l2_norm, Spectrum, SpectrumSet, WavelengthGrid};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("recorded response vector is all zero")]
    ZeroResponse,
    #[error("band {band} has zero response over the whole training set")]
    DeadBand { band: usize },
    #[error("test label `{0}` is not a training class")]
    UnknownLabel(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("model file: {0}")]
    Serde(#[from] serde_json::Error),
}

/// How a spectrum is turned into band values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recorder {
    /// One band per filter: the integrated filter response.
    Filters(FilterBank),
    /// One band per wavelength sample (delta-impulse filters).
    Samples(WavelengthGrid),
}

impl Recorder {
    pub fn band_count(&self) -> usize {
        match self {
            Recorder::Filters(bank) => bank.len(),
            Recorder::Samples(grid) => grid.len(),
        }
    }

    pub fn band_ids(&self) -> Vec<String> {
        match self {
            Recorder::Filters(bank) => bank.ids(),
            Recorder::Samples(grid) => grid
                .samples()
                .iter()
                .map(|x| format!("{}nm", crate::filters::format_nm(*x)))
                .collect(),
        }
    }

    pub fn record(&self, spectrum: &Spectrum) -> Vec<f64> {
        match self {
            Recorder::Filters(bank) => bank
                .filters()
                .iter()
                .map(|f| f.response(spectrum, None))
                .collect(),
            Recorder::Samples(grid) => spectrum.resample(grid).values().to_vec(),
        }
    }
}

/// Per-band divisor computed over the training response vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandNormalization {
    /// Root mean square of the band over the training vectors.
    #[default]
    Rms,
    Max,
    Mean,
    /// All divisors one.
    None,
}

impl std::str::FromStr for BandNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rms" => Ok(Self::Rms),
            "max" => Ok(Self::Max),
            "mean" => Ok(Self::Mean),
            "none" => Ok(Self::None),
            other => Err(format!(
                "unknown band normalization `{other}` (expected rms|max|mean|none)"
            )),
        }
    }
}

impl BandNormalization {
    fn divisors(self, vectors: &[Vec<f64>], bands: usize) -> Result<Vec<f64>, ClassifyError> {
        let m = vectors.len() as f64;
        (0..bands)
            .map(|b| {
                let column = vectors.iter().map(|v| v[b]);
                let d = match self {
                    BandNormalization::Rms => (column.map(|x| x * x).sum::<f64>() / m).sqrt(),
                    BandNormalization::Max => column.fold(0.0, f64::max),
                    BandNormalization::Mean => column.sum::<f64>() / m,
                    BandNormalization::None => 1.0,
                };
                if d > 0.0 && d.is_finite() {
                    Ok(d)
                } else {
                    Err(ClassifyError::DeadBand { band: b })
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainOptions {
    pub band_norm: BandNormalization,
    pub adjacency: AdjacencyOptions,
}

/// A class label with its unit-norm reference vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub label: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub recorder: Recorder,
    pub band_norm: Vec<f64>,
    pub references: Vec<Reference>,
    pub metric: MetricId,
    /// Filter selection that produced `recorder`, when one was run.
    #[serde(default)]
    pub selection: Option<SelectionResult>,
}

/// Class means of `training`, each scaled to unit Euclidean norm.
pub fn normalized_class_means(training: &SpectrumSet) -> Result<SpectrumSet, ClassifyError> {
    if training.classes().len() < 2 {
        return Err(ClassifyError::TooFewClasses(training.classes().len()));
    }
    Ok(training.average_by_class().l2_normalize())
}

/// Full pipeline: normalize class means, select `cfg.k` filters from `bank`
/// by threshold bisection under `metric`, then build references.
pub fn train(
    training: &SpectrumSet,
    bank: &FilterBank,
    cfg: &FbsConfig,
    metric: MetricId,
) -> Result<TrainedModel, ClassifyError> {
    train_with(training, bank, cfg, metric, TrainOptions::default())
}

pub fn train_with(
    training: &SpectrumSet,
    bank: &FilterBank,
    cfg: &FbsConfig,
    metric: MetricId,
    options: TrainOptions,
) -> Result<TrainedModel, ClassifyError> {
    let means = normalized_class_means(training)?;
    let responses = integrate_responses(bank, &means);
    let adjacency = build_adjacency_with(&responses, metric, options.adjacency)?;
    let selection = fbs_select(&adjacency, cfg)?;
    let chosen = selection.selection.indices();
    let vectors: Vec<Vec<f64>> = (0..responses.spectrum_count())
        .map(|j| chosen.iter().map(|&i| responses.get(i, j)).collect())
        .collect();
    let recorder = Recorder::Filters(bank.subset(chosen)?);
    let mut model = assemble(recorder, &means, vectors, metric, options.band_norm)?;
    model.selection = Some(selection);
    Ok(model)
}

/// References through a fixed recorder, without any selection step.
pub fn train_fixed(
    training: &SpectrumSet,
    recorder: Recorder,
    metric: MetricId,
    band_norm: BandNormalization,
) -> Result<TrainedModel, ClassifyError> {
    let means = normalized_class_means(training)?;
    let vectors = means.spectra().iter().map(|s| recorder.record(s)).collect();
    assemble(recorder, &means, vectors, metric, band_norm)
}

/// Model whose bands are the wavelength samples themselves.
pub fn full_spectrum_model(training: &SpectrumSet) -> Result<TrainedModel, ClassifyError> {
    train_fixed(
        training,
        Recorder::Samples(training.grid().clone()),
        MetricId::SpectralAngle,
        BandNormalization::None,
    )
}

fn assemble(
    recorder: Recorder,
    means: &SpectrumSet,
    vectors: Vec<Vec<f64>>,
    metric: MetricId,
    band_norm: BandNormalization,
) -> Result<TrainedModel, ClassifyError> {
    let divisors = band_norm.divisors(&vectors, recorder.band_count())?;
    let references = means
        .spectra()
        .iter()
        .zip(vectors)
        .map(|(s, v)| {
            Ok(Reference {
                label: s.label().to_string(),
                vector: normalize_bands(&v, &divisors)?,
            })
        })
        .collect::<Result<Vec<_>, ClassifyError>>()?;
    Ok(TrainedModel {
        recorder,
        band_norm: divisors,
        references,
        metric,
        selection: None,
    })
}

fn normalize_bands(raw: &[f64], divisors: &[f64]) -> Result<Vec<f64>, ClassifyError> {
    let scaled: Vec<f64> = raw.iter().zip(divisors).map(|(v, d)| v / d).collect();
    let norm = l2_norm(&scaled);
    if !(norm > 0.0) {
        return Err(ClassifyError::ZeroResponse);
    }
    Ok(scaled.into_iter().map(|v| v / norm).collect())
}

impl TrainedModel {
    /// Band vector of `spectrum` after recording and both normalizations.
    pub fn features(&self, spectrum: &Spectrum) -> Result<Vec<f64>, ClassifyError> {
        normalize_bands(&self.recorder.record(spectrum), &self.band_norm)
    }

    /// Nearest reference under the model metric; ties go to the earlier class.
    pub fn classify(&self, spectrum: &Spectrum) -> Result<&str, ClassifyError> {
        let x = self.features(spectrum)?;
        let mut best: Option<(usize, f64)> = None;
        for (idx, r) in self.references.iter().enumerate() {
            let d = self.metric.distance(&x, &r.vector)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((idx, d));
            }
        }
        let (idx, _) = best.expect("a trained model has references");
        Ok(&self.references[idx].label)
    }

    pub fn classes(&self) -> Vec<String> {
        self.references.iter().map(|r| r.label.clone()).collect()
    }

    pub fn evaluate(&self, test: &[Spectrum]) -> Result<ClassificationReport, ClassifyError> {
        let classes = self.classes();
        let index = |label: &str| classes.iter().position(|c| c == label);
        let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
        for s in test {
            let truth = index(s.label())
                .ok_or_else(|| ClassifyError::UnknownLabel(s.label().to_string()))?;
            let predicted = index(self.classify(s)?).expect("prediction is a class");
            confusion[truth][predicted] += 1;
        }
        let total = test.len();
        let correct: usize = (0..classes.len()).map(|c| confusion[c][c]).sum();
        Ok(ClassificationReport {
            total,
            wrong: total - correct,
            classes,
            confusion,
        })
    }

    pub fn to_json(&self) -> Result<String, ClassifyError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Label of `spectrum` under `model`.
pub fn classify<'m>(
    model: &'m TrainedModel,
    spectrum: &Spectrum,
) -> Result<&'m str, ClassifyError> {
    model.classify(spectrum)
}

/// Scores `model` on every spectrum of `test`.
pub fn evaluate(
    model: &TrainedModel,
    test: &SpectrumSet,
) -> Result<ClassificationReport, ClassifyError> {
    model.evaluate(test.spectra())
}

/// Misclassification counts. `confusion[truth][predicted]`, rows and columns
/// in `classes` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub total: usize,
    pub wrong: usize,
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
}

impl ClassificationReport {
    /// Nonzero `(truth, predicted, count)` entries.
    pub fn confusion_pairs(&self) -> Vec<(String, String, usize)> {
        let mut out = Vec::new();
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &count) in row.iter().enumerate() {
                if count > 0 {
                    out.push((self.classes[t].clone(), self.classes[p].clone(), count));
                }
            }
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "total\t{}\nwrong\t{}\ntruth\\predicted",
            self.total, self.wrong
        );
        for c in &self.classes {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            out.push_str(c);
            for v in row {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Responses of the normalized class means through every filter of `bank`,
/// the input to selection during training.
pub fn training_responses(
    training: &SpectrumSet,
    bank: &FilterBank,
) -> Result<FilterMatrix, ClassifyError> {
    Ok(integrate_responses(
        bank,
        &normalized_class_means(training)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{make_sweep_bank, make_uniform_bank, Shape};

    fn grid() -> WavelengthGrid {
        WavelengthGrid::uniform(400.0, 700.0, 2.0).unwrap()
    }

    fn bump(center: f64, width: f64, label: &str) -> Spectrum {
        let g = grid();
        let v = g
            .samples()
            .iter()
            .map(|x| 0.1 + (-((x - center) / width).powi(2)).exp())
            .collect();
        Spectrum::new(g, v, label).unwrap()
    }

    fn three_classes() -> SpectrumSet {
        SpectrumSet::new(vec![
            bump(450.0, 30.0, "blue"),
            bump(550.0, 30.0, "green"),
            bump(650.0, 30.0, "red"),
        ])
        .unwrap()
    }

    fn bank() -> FilterBank {
        make_sweep_bank((400.0, 700.0), &[20.0, 50.0], 6, Shape::Gaussian, &grid()).unwrap()
    }

    #[test]
    fn two_class_model_has_distinct_references() {
        let set = SpectrumSet::new(vec![bump(450.0, 30.0, "a"), bump(650.0, 30.0, "b")]).unwrap();
        let model = train(&set, &bank(), &FbsConfig::new(2), MetricId::SpectralAngle).unwrap();
        assert_eq!(model.references.len(), 2);
        assert_eq!(model.recorder.band_count(), 2);
        let angle = crate::metrics::spectral_angle(
            &model.references[0].vector,
            &model.references[1].vector,
        )
        .unwrap();
        assert!(angle > 0.0);
        for r in &model.references {
            assert!((l2_norm(&r.vector) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn training_scale_invariance() {
        let set = three_classes();
        let scaled = SpectrumSet::new(
            set.spectra()
                .iter()
                .map(|s| s.scaled(3.0).unwrap())
                .collect(),
        )
        .unwrap();
        let cfg = FbsConfig::new(3);
        let a = train(&set, &bank(), &cfg, MetricId::SpectralAngle).unwrap();
        let b = train(&scaled, &bank(), &cfg, MetricId::SpectralAngle).unwrap();
        assert_eq!(
            a.selection.as_ref().unwrap().selection,
            b.selection.as_ref().unwrap().selection
        );
        for (ra, rb) in a.references.iter().zip(&b.references) {
            for (x, y) in ra.vector.iter().zip(&rb.vector) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn self_classification_and_darkening() {
        let set = three_classes();
        let model = train(&set, &bank(), &FbsConfig::new(3), MetricId::SpectralAngle).unwrap();
        for s in set.spectra() {
            assert_eq!(model.classify(s).unwrap(), s.label());
            assert_eq!(model.classify(&s.scaled(0.2).unwrap()).unwrap(), s.label());
        }
        let report = model.evaluate(set.spectra()).unwrap();
        assert_eq!((report.total, report.wrong), (3, 0));
    }

    #[test]
    fn too_few_classes() {
        let set = SpectrumSet::new(vec![bump(450.0, 30.0, "a"), bump(460.0, 30.0, "a")]).unwrap();
        assert!(matches!(
            train(&set, &bank(), &FbsConfig::new(2), MetricId::SpectralAngle),
            Err(ClassifyError::TooFewClasses(1))
        ));
        assert!(matches!(
            full_spectrum_model(&set),
            Err(ClassifyError::TooFewClasses(1))
        ));
    }

    #[test]
    fn evaluate_edge_cases() {
        let set = three_classes();
        let model = full_spectrum_model(&set).unwrap();
        let empty = model.evaluate(&[]).unwrap();
        assert_eq!((empty.total, empty.wrong), (0, 0));
        let stranger = bump(500.0, 30.0, "violet");
        assert!(
            matches!(model.evaluate(&[stranger]), Err(ClassifyError::UnknownLabel(l)) if l == "violet")
        );
    }

    #[test]
    fn full_spectrum_equals_identity_recorder() {
        let set = three_classes();
        let full = full_spectrum_model(&set).unwrap();
        assert!(full.band_norm.iter().all(|&d| d == 1.0));
        let means = set.average_by_class().l2_normalize();
        for (r, m) in full.references.iter().zip(means.spectra()) {
            assert_eq!(r.vector.len(), m.values().len());
            for (a, b) in r.vector.iter().zip(m.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let explicit = train_fixed(
            &set,
            Recorder::Samples(set.grid().clone()),
            MetricId::SpectralAngle,
            BandNormalization::None,
        )
        .unwrap();
        assert_eq!(explicit, full);
        for s in set.spectra() {
            assert_eq!(full.classify(s).unwrap(), s.label());
        }
    }

    #[test]
    fn uniform_band_norm_is_a_no_op_for_the_label() {
        let set = three_classes();
        let bank = make_uniform_bank(4, (400.0, 700.0), 50.0, Shape::Rectangular, &grid()).unwrap();
        let plain = train_fixed(
            &set,
            Recorder::Filters(bank.clone()),
            MetricId::SpectralAngle,
            BandNormalization::None,
        )
        .unwrap();
        let mut scaled = plain.clone();
        scaled.band_norm = vec![3.7; 4];
        let probe = bump(520.0, 40.0, "x");
        assert_eq!(
            plain.classify(&probe).unwrap(),
            scaled.classify(&probe).unwrap()
        );
    }

    #[test]
    fn band_norm_variants() {
        let v = vec![vec![1.0, 4.0], vec![3.0, 0.0]];
        let rms = BandNormalization::Rms.divisors(&v, 2).unwrap();
        assert!((rms[0] - 5f64.sqrt()).abs() < 1e-12 && (rms[1] - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(BandNormalization::Max.divisors(&v, 2).unwrap(), [3.0, 4.0]);
        assert_eq!(BandNormalization::Mean.divisors(&v, 2).unwrap(), [2.0, 2.0]);
        assert!(matches!(
            BandNormalization::Rms.divisors(&[vec![1.0, 0.0]], 2),
            Err(ClassifyError::DeadBand { band: 1 })
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let set = three_classes();
        let model = train(&set, &bank(), &FbsConfig::new(3), MetricId::SpectralAngle).unwrap();
        let back = TrainedModel::from_json(&model.to_json().unwrap()).unwrap();
        for s in set.spectra() {
            assert_eq!(back.classify(s).unwrap(), model.classify(s).unwrap());
        }
        assert_eq!(back.band_norm, model.band_norm);
    }

    #[test]
    fn report_marginals() {
        let r = ClassificationReport {
            total: 5,
            wrong: 2,
            classes: vec!["a".into(), "b".into()],
            confusion: vec![vec![2, 1], vec![1, 1]],
        };
        let sum: usize = r.confusion_pairs().iter().map(|p| p.2).sum();
        assert_eq!(sum, r.total);
        assert!(r.to_tsv().starts_with("total\t5\nwrong\t2\n"));
    }
}
