//! Batch self-organizing map over transition vectors.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Category, Tense, VERB_DIM};
use crate::rng::{substream, SOM_STREAM};

#[derive(Debug, Error, PartialEq)]
pub enum SomError {
    #[error("no samples")]
    EmptySamples,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unit {unit} out of range for a map with {units} units")]
    IndexOutOfRange { unit: usize, units: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub initial_radius: f64,
    pub final_radius: f64,
    pub seed: u64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            epochs: 50,
            initial_radius: 4.0,
            final_radius: 0.5,
            seed: 0,
        }
    }
}

impl SomConfig {
    fn validate(&self) -> Result<(), SomError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(SomError::InvalidConfig("grid dimensions must be >= 1".into()));
        }
        let ok = |r: f64| r.is_finite() && r >= 0.0;
        if !ok(self.initial_radius) || !ok(self.final_radius) {
            return Err(SomError::InvalidConfig("radii must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Neighborhood radius used in `epoch`, decaying linearly so that the
    /// last epoch runs at `final_radius`.
    pub fn radius_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.final_radius;
        }
        let f = epoch as f64 / (self.epochs - 1) as f64;
        self.initial_radius + (self.final_radius - self.initial_radius) * f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub epochs: usize,
    pub initial_radius: f64,
    pub final_radius: f64,
    pub seed: u64,
}

/// Trained map: a `rows x cols` grid of prototypes, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomMap {
    pub rows: usize,
    pub cols: usize,
    pub input_dim: usize,
    pub seed: u64,
    pub schedule: Schedule,
    pub prototypes: Vec<Vec<f64>>,
}

/// Gaussian neighborhood weight at grid distance `g`; radius 0 keeps only
/// the unit itself.
pub fn neighborhood(g: f64, radius: f64) -> f64 {
    if radius <= 0.0 {
        return if g == 0.0 { 1.0 } else { 0.0 };
    }
    (-(g * g) / (2.0 * radius * radius)).exp()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SomMap {
    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn coords(&self, unit: usize) -> (usize, usize) {
        (unit / self.cols, unit % self.cols)
    }

    /// Chebyshev distance between two units on the grid.
    pub fn grid_distance(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb).max(ca.abs_diff(cb))
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), SomError> {
        if v.len() != self.input_dim {
            return Err(SomError::DimensionMismatch {
                expected: self.input_dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Nearest prototype by Euclidean distance, lowest index on ties.
    pub fn best_matching_unit(&self, sample: &[f64]) -> Result<(usize, f64), SomError> {
        self.check_dim(sample)?;
        Ok(self.bmu_unchecked(sample))
    }

    fn bmu_unchecked(&self, sample: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.prototypes.iter().enumerate() {
            let d = sq_dist(p, sample);
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    pub fn quantization_error(&self, samples: &[Vec<f64>]) -> Result<f64, SomError> {
        if samples.is_empty() {
            return Err(SomError::EmptySamples);
        }
        let mut total = 0.0;
        for s in samples {
            total += self.best_matching_unit(s)?.1;
        }
        Ok(total / samples.len() as f64)
    }

    pub fn hit_histogram(&self, samples: &[Vec<f64>]) -> Result<Vec<usize>, SomError> {
        let mut hits = vec![0; self.units()];
        for s in samples {
            hits[self.best_matching_unit(s)?.0] += 1;
        }
        Ok(hits)
    }

    /// One batch update at a fixed radius: assign every sample to its BMU,
    /// then move every prototype to the neighborhood-weighted mean. Units
    /// with negligible neighborhood mass keep their prototype.
    pub fn batch_epoch(&mut self, samples: &[Vec<f64>], radius: f64) -> Result<(), SomError> {
        if samples.is_empty() {
            return Err(SomError::EmptySamples);
        }
        let units = self.units();
        let dim = self.input_dim;
        let mut sums = vec![vec![0.0; dim]; units];
        let mut counts = vec![0.0; units];
        for s in samples {
            self.check_dim(s)?;
            let (b, _) = self.bmu_unchecked(s);
            counts[b] += 1.0;
            for (acc, x) in sums[b].iter_mut().zip(s) {
                *acc += x;
            }
        }
        let occupied: Vec<usize> = (0..units).filter(|&b| counts[b] > 0.0).collect();
        for j in 0..units {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for &b in &occupied {
                let h = neighborhood(self.grid_distance(b, j) as f64, radius);
                if h == 0.0 {
                    continue;
                }
                den += h * counts[b];
                for (n, s) in num.iter_mut().zip(&sums[b]) {
                    *n += h * s;
                }
            }
            if den >= 1e-12 {
                for n in num.iter_mut() {
                    *n /= den;
                }
                self.prototypes[j] = num;
            }
        }
        Ok(())
    }

    /// Slices a prototype into its four per-position distributions.
    pub fn decode_prototype(&self, unit: usize) -> Result<DecodedPrototype, SomError> {
        let p = self.prototypes.get(unit).ok_or(SomError::IndexOutOfRange {
            unit,
            units: self.units(),
        })?;
        if p.len() != 2 * VERB_DIM {
            return Err(SomError::DimensionMismatch {
                expected: 2 * VERB_DIM,
                got: p.len(),
            });
        }
        Ok(DecodedPrototype {
            first_category: normalize(&p[0..4]),
            first_tense: normalize(&p[4..13]),
            second_category: normalize(&p[13..17]),
            second_tense: normalize(&p[17..26]),
        })
    }
}

/// Initializes prototypes by sampling the data with replacement, then runs
/// the batch schedule.
pub fn train_som(samples: &[Vec<f64>], config: &SomConfig) -> Result<SomMap, SomError> {
    let mut map = init_som(samples, config)?;
    for epoch in 0..config.epochs {
        map.batch_epoch(samples, config.radius_at(epoch))?;
    }
    Ok(map)
}

/// The untrained map `train_som` starts from.
pub fn init_som(samples: &[Vec<f64>], config: &SomConfig) -> Result<SomMap, SomError> {
    config.validate()?;
    let first = samples.first().ok_or(SomError::EmptySamples)?;
    let dim = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(SomError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut rng = substream(config.seed, SOM_STREAM);
    let units = config.rows * config.cols;
    let prototypes = (0..units)
        .map(|_| samples[rng.gen_range(0..samples.len())].clone())
        .collect();
    Ok(SomMap {
        rows: config.rows,
        cols: config.cols,
        input_dim: dim,
        seed: config.seed,
        schedule: Schedule {
            epochs: config.epochs,
            initial_radius: config.initial_radius,
            final_radius: config.final_radius,
            seed: config.seed,
        },
        prototypes,
    })
}

fn normalize(block: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = block.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return vec![1.0 / block.len() as f64; block.len()];
    }
    clamped.iter().map(|x| x / total).collect()
}

/// Per-position category and tense distributions read off a prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedPrototype {
    pub first_category: Vec<f64>,
    pub first_tense: Vec<f64>,
    pub second_category: Vec<f64>,
    pub second_tense: Vec<f64>,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl DecodedPrototype {
    /// Most probable (category, tense) for each position.
    pub fn modal_pair(&self) -> ((Category, Tense), (Category, Tense)) {
        (
            (
                Category::ALL[argmax(&self.first_category)],
                Tense::ALL[argmax(&self.first_tense)],
            ),
            (
                Category::ALL[argmax(&self.second_category)],
                Tense::ALL[argmax(&self.second_tense)],
            ),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_pair, VerbCode};

    fn two_unit_map(p0: Vec<f64>, p1: Vec<f64>) -> SomMap {
        let dim = p0.len();
        SomMap {
            rows: 1,
            cols: 2,
            input_dim: dim,
            seed: 0,
            schedule: Schedule {
                epochs: 0,
                initial_radius: 0.0,
                final_radius: 0.0,
                seed: 0,
            },
            prototypes: vec![p0, p1],
        }
    }

    #[test]
    fn bmu_exact_match_and_tie() {
        let map = two_unit_map(vec![0.0, 0.0], vec![2.0, 0.0]);
        assert_eq!(map.best_matching_unit(&[2.0, 0.0]).unwrap(), (1, 0.0));
        assert_eq!(map.best_matching_unit(&[1.0, 5.0]).unwrap().0, 0);
        assert!(matches!(
            map.best_matching_unit(&[1.0]),
            Err(SomError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quantization_error_cases() {
        let map = two_unit_map(vec![0.0, 0.0], vec![2.0, 0.0]);
        assert_eq!(map.quantization_error(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap(), 0.0);
        assert!((map.quantization_error(&[vec![0.0, 0.3]]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(map.quantization_error(&[]), Err(SomError::EmptySamples));
    }

    #[test]
    fn histogram_cases() {
        let map = two_unit_map(vec![0.0, 0.0], vec![2.0, 0.0]);
        assert_eq!(map.hit_histogram(&vec![vec![2.0, 0.1]; 5]).unwrap(), vec![0, 5]);
        assert_eq!(map.hit_histogram(&[]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn constant_data_is_a_fixed_point() {
        let v = vec![0.25, -1.0, 3.0];
        let cfg = SomConfig {
            rows: 3,
            cols: 4,
            epochs: 5,
            ..SomConfig::default()
        };
        let map = train_som(&vec![v.clone(); 7], &cfg).unwrap();
        for p in &map.prototypes {
            for (a, b) in p.iter().zip(&v) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn train_errors() {
        assert_eq!(
            train_som(&[], &SomConfig::default()).unwrap_err(),
            SomError::EmptySamples
        );
        let err = train_som(&[vec![0.0; 2], vec![0.0; 3]], &SomConfig::default()).unwrap_err();
        assert!(matches!(err, SomError::DimensionMismatch { .. }));
    }

    #[test]
    fn radius_schedule_endpoints() {
        let cfg = SomConfig::default();
        assert_eq!(cfg.radius_at(0), 4.0);
        assert!((cfg.radius_at(49) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decode_one_hot_prototype() {
        let p = encode_pair(
            VerbCode::new(Category::Activity, Tense::Imparfait),
            VerbCode::new(Category::Accomplishment, Tense::Infinitive),
        );
        let map = two_unit_map(p.clone(), p);
        let d = map.decode_prototype(1).unwrap();
        assert_eq!(d.first_category, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(d.second_tense[Tense::Infinitive.index()], 1.0);
        assert!(matches!(
            map.decode_prototype(2),
            Err(SomError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn decode_partial_and_degenerate_blocks() {
        let mut p = vec![0.0; 26];
        p[0] = 0.5;
        p[1] = 0.5;
        p[13] = -0.2;
        p[14] = 0.4;
        let map = two_unit_map(p.clone(), p);
        let d = map.decode_prototype(0).unwrap();
        assert_eq!(d.first_category, vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(d.first_tense, vec![1.0 / 9.0; 9]);
        assert_eq!(d.second_category, vec![0.0, 1.0, 0.0, 0.0]);
    }
}
