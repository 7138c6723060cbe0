//! Seeded synthetic instances: random response matrices and conflict graphs
//! for search parity checks, and a labeled spectral benchmark for the
//! classification pipeline.

use serde::{Deserialize, Serialize};

use crate::filters::FilterMatrix;
use crate::metrics::{build_adjacency, AdjacencyMatrix, MetricId};
use crate::rng::XorShift64Star;
use crate::selection::ConflictGraph;
use crate::spectra::{Spectrum, SpectrumSet, WavelengthGrid};

/// `n x m` responses drawn uniformly from `[0.01, 1)`.
pub fn random_response_matrix(rng: &mut XorShift64Star, n: usize, m: usize) -> FilterMatrix {
    let rows = (0..n)
        .map(|_| (0..m).map(|_| rng.uniform(0.01, 1.0)).collect())
        .collect();
    FilterMatrix::from_rows_unlabeled(rows).expect("positive finite entries")
}

/// Spectral-angle adjacency of [`random_response_matrix`].
pub fn random_adjacency(rng: &mut XorShift64Star, n: usize, m: usize) -> AdjacencyMatrix {
    build_adjacency(&random_response_matrix(rng, n, m), MetricId::SpectralAngle)
        .expect("positive rows")
}

/// Erdos-Renyi graph: each pair is an edge with probability `p`.
pub fn random_graph(rng: &mut XorShift64Star, n: usize, p: f64) -> ConflictGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.next_f64() < p {
                edges.push((i, j));
            }
        }
    }
    ConflictGraph::from_edges(n, &edges).expect("valid pairs")
}

/// How class mean spectra relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFamily {
    /// Every class draws its own floor and bumps.
    #[default]
    Independent,
    /// All classes share one smooth base spectrum and differ by a few
    /// multiplicative features of relative amplitude up to `feature_amplitude`.
    SharedBase { feature_amplitude: f64 },
}

/// Shape of the synthetic classification benchmark. Both per-class counts
/// must be at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub family: SpectrumFamily,
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Per-sample Gaussian noise, as a fraction of each class mean's average level.
    pub noise: f64,
    pub range: (f64, f64),
    pub step: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            family: SpectrumFamily::Independent,
            classes: 10,
            train_per_class: 25,
            test_per_class: 75,
            noise: 0.05,
            range: (400.0, 800.0),
            step: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    /// Noiseless class spectra.
    pub means: SpectrumSet,
    pub train: SpectrumSet,
    pub test: SpectrumSet,
}

/// Smooth random class spectra (a positive floor plus a handful of broad and
/// narrow Gaussian bumps) observed with per-sample Gaussian noise. Noisy
/// samples are clipped at zero.
pub fn spectral_benchmark(cfg: &BenchmarkConfig) -> Benchmark {
    let mut rng = XorShift64Star::new(cfg.seed);
    let grid =
        WavelengthGrid::uniform(cfg.range.0, cfg.range.1, cfg.step).expect("valid benchmark grid");
    let (lo, hi) = cfg.range;
    let bump = |x: f64, (center, width, amp): (f64, f64, f64)| {
        amp * (-0.5 * ((x - center) / width).powi(2)).exp()
    };
    let means: Vec<Spectrum> = match cfg.family {
        SpectrumFamily::Independent => (0..cfg.classes)
            .map(|_| {
                let floor = rng.uniform(0.05, 0.2);
                let mut bumps = Vec::new();
                for _ in 0..3 {
                    bumps.push((
                        rng.uniform(lo, hi),
                        rng.uniform(40.0, 120.0),
                        rng.uniform(0.2, 1.0),
                    ));
                }
                for _ in 0..2 {
                    bumps.push((
                        rng.uniform(lo, hi),
                        rng.uniform(8.0, 25.0),
                        rng.uniform(0.1, 0.5),
                    ));
                }
                grid.samples()
                    .iter()
                    .map(|&x| floor + bumps.iter().map(|&b| bump(x, b)).sum::<f64>())
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>(),
        SpectrumFamily::SharedBase { feature_amplitude } => {
            let floor = rng.uniform(0.1, 0.3);
            let base: Vec<_> = (0..3)
                .map(|_| {
                    (
                        rng.uniform(lo, hi),
                        rng.uniform(60.0, 150.0),
                        rng.uniform(0.3, 1.0),
                    )
                })
                .collect();
            (0..cfg.classes)
                .map(|_| {
                    let features: Vec<_> = (0..3)
                        .map(|_| {
                            let amp = rng.uniform(-feature_amplitude, feature_amplitude);
                            (rng.uniform(lo, hi), rng.uniform(8.0, 40.0), amp)
                        })
                        .collect();
                    grid.samples()
                        .iter()
                        .map(|&x| {
                            let level = floor + base.iter().map(|&b| bump(x, b)).sum::<f64>();
                            let gain = 1.0 + features.iter().map(|&f| bump(x, f)).sum::<f64>();
                            level * gain.max(0.05)
                        })
                        .collect()
                })
                .collect()
        }
    }
    .into_iter()
    .enumerate()
    .map(|(c, values)| {
        Spectrum::new(grid.clone(), values, format!("class{c:02}")).expect("positive spectrum")
    })
    .collect();

    let observe = |rng: &mut XorShift64Star, mean: &Spectrum| {
        let level = mean.values().iter().sum::<f64>() / mean.values().len() as f64;
        let sigma = cfg.noise * level;
        let values = mean
            .values()
            .iter()
            .map(|&v| (v + sigma * rng.normal()).max(0.0))
            .collect();
        Spectrum::new(grid.clone(), values, mean.label())
            .expect("noisy spectrum stays positive somewhere")
    };
    let mut train = Vec::with_capacity(cfg.classes * cfg.train_per_class);
    let mut test = Vec::new();
    for mean in &means {
        for _ in 0..cfg.train_per_class {
            train.push(observe(&mut rng, mean));
        }
        for _ in 0..cfg.test_per_class {
            test.push(observe(&mut rng, mean));
        }
    }
    Benchmark {
        means: SpectrumSet::new(means).expect("nonempty"),
        train: SpectrumSet::new(train).expect("nonempty"),
        test: SpectrumSet::new(test).expect("nonempty"),
    }
}
