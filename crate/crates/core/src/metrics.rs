//! Distances between filter response rows and the adjacency matrix built
//! from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filters::FilterMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("vector is too short for this metric: {len} < {min}")]
    TooShort { len: usize, min: usize },
    #[error("argument {argument} has zero Euclidean norm")]
    ZeroNorm { argument: usize },
    #[error("argument {argument} has a nonpositive component at index {index}")]
    NonPositive { argument: usize, index: usize },
    #[error("argument {argument} has zero variance")]
    ZeroVariance { argument: usize },
    #[error("filter `{filter}` (row {row}): {source}")]
    Row {
        filter: String,
        row: usize,
        #[source]
        source: Box<MetricError>,
    },
}

/// The available dissimilarity measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    #[default]
    SpectralAngle,
    SpectralInformationDivergence,
    SpectralCorrelationAngle,
}

impl MetricId {
    pub fn short_name(self) -> &'static str {
        match self {
            MetricId::SpectralAngle => "angle",
            MetricId::SpectralInformationDivergence => "sid",
            MetricId::SpectralCorrelationAngle => "sca",
        }
    }

    pub fn distance(self, u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
        match self {
            MetricId::SpectralAngle => spectral_angle(u, v),
            MetricId::SpectralInformationDivergence => spectral_information_divergence(u, v),
            MetricId::SpectralCorrelationAngle => spectral_correlation_angle(u, v),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "angle" | "sam" | "spectral_angle" => Ok(MetricId::SpectralAngle),
            "sid" | "spectral_information_divergence" => {
                Ok(MetricId::SpectralInformationDivergence)
            }
            "sca" | "spectral_correlation_angle" => Ok(MetricId::SpectralCorrelationAngle),
            other => Err(format!("unknown metric `{other}` (expected angle|sid|sca)")),
        }
    }
}

fn check_lengths(u: &[f64], v: &[f64], min: usize) -> Result<(), MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::LengthMismatch(u.len(), v.len()));
    }
    if u.len() < min {
        return Err(MetricError::TooShort { len: u.len(), min });
    }
    Ok(())
}

/// Angle between `u` and `v` in radians, in `[0, pi]`.
///
/// Evaluated as `2 atan2(|u' - v'|, |u' + v'|)` on the unit vectors, which
/// equals `acos(u' . v')` but stays accurate (and never NaN) for nearly
/// parallel or antiparallel inputs.
pub fn spectral_angle(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    check_lengths(u, v, 1)?;
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 {
        return Err(MetricError::ZeroNorm { argument: 0 });
    }
    if nv == 0.0 {
        return Err(MetricError::ZeroNorm { argument: 1 });
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a / nu, b / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// Symmetric KL divergence between `u` and `v` normalized to unit sum.
pub fn spectral_information_divergence(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    check_lengths(u, v, 1)?;
    for (argument, w) in [u, v].into_iter().enumerate() {
        if let Some(index) = w.iter().position(|&x| !(x > 0.0)) {
            return Err(MetricError::NonPositive { argument, index });
        }
    }
    let su: f64 = u.iter().sum();
    let sv: f64 = v.iter().sum();
    let mut total = 0.0;
    for (a, b) in u.iter().zip(v) {
        let p = a / su;
        let q = b / sv;
        // D(p||q) + D(q||p) collapses to (p - q) ln(p / q) per component
        total += (p - q) * (p / q).ln();
    }
    Ok(total.max(0.0))
}

/// `acos((r + 1) / 2)` for the Pearson correlation `r` of `u` and `v`.
pub fn spectral_correlation_angle(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    check_lengths(u, v, 2)?;
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut cov, mut vu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let da = a - mu;
        let db = b - mv;
        cov += da * db;
        vu += da * da;
        vv += db * db;
    }
    if vu == 0.0 {
        return Err(MetricError::ZeroVariance { argument: 0 });
    }
    if vv == 0.0 {
        return Err(MetricError::ZeroVariance { argument: 1 });
    }
    let r = (cov / (vu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0);
    Ok(((r + 1.0) / 2.0).clamp(0.0, 1.0).acos())
}

/// Options for [`build_adjacency_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyOptions {
    /// Added to every response before normalization when the metric is SID,
    /// so that zero responses do not make the divergence undefined. `0`
    /// disables the shift.
    pub sid_epsilon: f64,
}

impl Default for AdjacencyOptions {
    fn default() -> Self {
        AdjacencyOptions { sid_epsilon: 1e-10 }
    }
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<f64>,
    ids: Vec<String>,
    metric: MetricId,
}

impl AdjacencyMatrix {
    /// From a full square matrix. Rejects asymmetry beyond 1e-12, a nonzero
    /// diagonal, and negative or non-finite entries. The upper triangle is
    /// mirrored so the stored matrix is exactly symmetric.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        ids: Vec<String>,
        metric: MetricId,
    ) -> Result<Self, String> {
        let n = rows.len();
        if ids.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err("adjacency matrix must be square with one id per row".into());
        }
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(format!("diagonal entry {i} is {} (must be 0)", rows[i][i]));
            }
            for j in i + 1..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !(a.is_finite() && a >= 0.0) {
                    return Err(format!("entry ({i}, {j}) is {a}: must be finite and >= 0"));
                }
                if (a - b).abs() > 1e-12 {
                    return Err(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ: {a} vs {b}"
                    ));
                }
                entries[i * n + j] = a;
                entries[j * n + i] = a;
            }
        }
        Ok(AdjacencyMatrix {
            n,
            entries,
            ids,
            metric,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn metric(&self) -> MetricId {
        self.metric
    }

    /// Iterates `(i, j, a_ij)` over unordered pairs `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn min_off_diagonal(&self) -> Option<f64> {
        self.pairs().map(|(_, _, d)| d).reduce(f64::min)
    }

    /// Largest entry including the zero diagonal.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> AdjacencyMatrix {
        AdjacencyMatrix {
            entries: self.entries.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Square table with filter ids as header and as the key column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("filter_id");
        for id in &self.ids {
            out.push('\t');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                out.push('\t');
                out.push_str(&crate::table::format_number(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`to_tsv`](Self::to_tsv) (tab or comma separated).
    pub fn from_tsv(text: &str, metric: MetricId) -> Result<Self, String> {
        let delimiter = if text.lines().next().is_some_and(|l| l.contains('\t')) {
            b'\t'
        } else {
            b','
        };
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| e.to_string())?.clone();
        let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::with_capacity(ids.len());
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            if record.get(0) != ids.get(r).map(String::as_str) {
                return Err(format!(
                    "row {} is labeled `{}`, expected `{}`",
                    r + 1,
                    &record[0],
                    ids.get(r).map_or("", |s| s)
                ));
            }
            let row = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<f64>().map_err(|_| {
                        format!(
                            "malformed number `{cell}` at row {}, column {}",
                            r + 1,
                            c + 2
                        )
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(rows, ids, metric)
    }
}

pub fn build_adjacency(
    matrix: &FilterMatrix,
    metric: MetricId,
) -> Result<AdjacencyMatrix, MetricError> {
    build_adjacency_with(matrix, metric, AdjacencyOptions::default())
}

/// `a_ij = metric(row_i, row_j)`, evaluated once per unordered pair and
/// mirrored.
pub fn build_adjacency_with(
    matrix: &FilterMatrix,
    metric: MetricId,
    options: AdjacencyOptions,
) -> Result<AdjacencyMatrix, MetricError> {
    let n = matrix.filter_count();
    let ids = matrix.filter_ids().to_vec();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row = matrix.row(i);
            if metric == MetricId::SpectralInformationDivergence && options.sid_epsilon > 0.0 {
                row.iter().map(|v| v + options.sid_epsilon).collect()
            } else {
                row.to_vec()
            }
        })
        .collect();
    let annotate = |i: usize, j: usize, e: MetricError| {
        let row = match &e {
            MetricError::ZeroNorm { argument }
            | MetricError::NonPositive { argument, .. }
            | MetricError::ZeroVariance { argument } => {
                if *argument == 0 {
                    i
                } else {
                    j
                }
            }
            _ => i,
        };
        MetricError::Row {
            filter: ids[row].clone(),
            row,
            source: Box::new(e),
        }
    };
    // A single row still has to satisfy the metric's preconditions.
    if n == 1 {
        metric
            .distance(&rows[0], &rows[0])
            .map_err(|e| annotate(0, 0, e))?;
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = metric
                .distance(&rows[i], &rows[j])
                .map_err(|e| annotate(i, j, e))?;
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    Ok(AdjacencyMatrix {
        n,
        entries,
        ids,
        metric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn angle_examples() {
        let a12 = spectral_angle(&[26.0, 12.0, 10.0], &[58.0, 28.0, 19.0]).unwrap();
        assert!((a12 - 0.05).abs() <= 0.005, "{a12}");
        let a34 = spectral_angle(&[23.0, 14.0, 5.0], &[5.0, 3.0, 1.0]).unwrap();
        assert!((a34 - 0.02).abs() <= 0.005, "{a34}");
        let v = [1.0, 2.5, 0.3];
        let u: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
        assert!(spectral_angle(&u, &v).unwrap().abs() < 1e-9);
        assert!((spectral_angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn angle_rejects_zero_norm() {
        assert_eq!(
            spectral_angle(&[1.0, 1.0], &[0.0, 0.0]),
            Err(MetricError::ZeroNorm { argument: 1 })
        );
        assert!(matches!(
            spectral_angle(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn sid_examples() {
        let v = [0.2, 0.7, 1.1];
        assert_eq!(spectral_information_divergence(&v, &v).unwrap(), 0.0);
        let u: Vec<f64> = v.iter().map(|x| 4.5 * x).collect();
        assert!(spectral_information_divergence(&u, &v).unwrap() < 1e-12);
        // p = (1/3, 2/3), q = (2/3, 1/3): two KL terms of (1/3) ln 2 each
        let expected = {
            let (p, q) = ([1.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 1.0 / 3.0]);
            let kl =
                |a: &[f64; 2], b: &[f64; 2]| a[0] * (a[0] / b[0]).ln() + a[1] * (a[1] / b[1]).ln();
            kl(&p, &q) + kl(&q, &p)
        };
        assert!((expected - 2.0 / 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
        let sid = spectral_information_divergence(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((sid - expected).abs() < 1e-12);
        assert!((sid - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn sid_rejects_nonpositive() {
        assert_eq!(
            spectral_information_divergence(&[1.0, 0.0], &[1.0, 1.0]),
            Err(MetricError::NonPositive {
                argument: 0,
                index: 1
            })
        );
    }

    #[test]
    fn sca_examples() {
        let u = [1.0, 2.0, 3.0, 5.0];
        let v: Vec<f64> = u.iter().map(|x| 2.0 * x + 7.0).collect();
        assert!(spectral_correlation_angle(&u, &v).unwrap().abs() < 1e-7);
        let w: Vec<f64> = u.iter().map(|x| -x).collect();
        assert!((spectral_correlation_angle(&u, &w).unwrap() - FRAC_PI_2).abs() < 1e-12);
        let r = spectral_correlation_angle(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.75f64.acos()).abs() < 1e-12);
        assert!((r - 0.7227).abs() < 1e-4);
        assert!(matches!(
            spectral_correlation_angle(&[1.0, 1.0], &[1.0, 2.0]),
            Err(MetricError::ZeroVariance { argument: 0 })
        ));
        assert!(matches!(
            spectral_correlation_angle(&[1.0], &[1.0]),
            Err(MetricError::TooShort { .. })
        ));
    }

    fn four_filters() -> FilterMatrix {
        FilterMatrix::from_rows_unlabeled(vec![
            vec![26.0, 12.0, 10.0],
            vec![58.0, 28.0, 19.0],
            vec![23.0, 14.0, 5.0],
            vec![5.0, 3.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn adjacency_matches_printed_matrix() {
        let printed = [
            [0.00, 0.05, 0.19, 0.20],
            [0.05, 0.00, 0.14, 0.15],
            [0.19, 0.14, 0.00, 0.02],
            [0.20, 0.15, 0.02, 0.00],
        ];
        let a = build_adjacency(&four_filters(), MetricId::SpectralAngle).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (a.get(i, j) - printed[i][j]).abs() <= 0.005,
                    "({i},{j}) = {}",
                    a.get(i, j)
                );
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn identical_rows_and_single_row() {
        let m = FilterMatrix::from_rows_unlabeled(vec![vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let a = build_adjacency(&m, MetricId::SpectralAngle).unwrap();
        assert_eq!(a.get(0, 1), 0.0);
        let m = FilterMatrix::from_rows_unlabeled(vec![vec![1.0, 2.0]]).unwrap();
        let a = build_adjacency(&m, MetricId::SpectralAngle).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn adjacency_errors_name_the_filter() {
        let m = FilterMatrix::from_rows(
            vec![vec![1.0, 2.0], vec![0.0, 0.0]],
            vec!["blue".into(), "dark".into()],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let err = build_adjacency(&m, MetricId::SpectralAngle).unwrap_err();
        assert!(
            matches!(&err, MetricError::Row { filter, row: 1, .. } if filter == "dark"),
            "{err}"
        );
    }

    #[test]
    fn sid_epsilon_handles_zero_responses() {
        let m = FilterMatrix::from_rows_unlabeled(vec![vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert!(build_adjacency(&m, MetricId::SpectralInformationDivergence).is_ok());
        let strict = AdjacencyOptions { sid_epsilon: 0.0 };
        assert!(build_adjacency_with(&m, MetricId::SpectralInformationDivergence, strict).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let a = build_adjacency(&four_filters(), MetricId::SpectralAngle).unwrap();
        assert_eq!(
            AdjacencyMatrix::from_tsv(&a.to_tsv(), MetricId::SpectralAngle).unwrap(),
            a
        );
    }

    #[test]
    fn metric_names_parse() {
        for m in [
            MetricId::SpectralAngle,
            MetricId::SpectralInformationDivergence,
            MetricId::SpectralCorrelationAngle,
        ] {
            assert_eq!(m.short_name().parse::<MetricId>().unwrap(), m);
        }
        assert!("cosine".parse::<MetricId>().is_err());
    }
}
