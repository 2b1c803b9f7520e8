//! Concept generators.
//!
//! Parameterizations follow the usual stream-learning definitions:
//!
//! * STAGGER: three categorical attributes (size, color, shape), each uniform
//!   over three values and one-hot encoded, plus the boolean label of one of
//!   the three classic rules.
//! * RandomRBF: a fixed set of Gaussian-ish centroids in `[0,1]^d`, each with a
//!   class, spread and weight drawn from the model seed.
//! * Rotating hyperplane: uniform features in `[0,1]^d`, label is the side of
//!   a weighted hyperplane through the cube centre, with label noise.
//! * Resampled: uniform draws with replacement from a fixed pool.
//!
//! The class label is always appended as the last feature.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};
use crate::seed::{derive_seed, rng_from};

pub const STAGGER_DIM: usize = 10;
pub const DEFAULT_RBF_FEATURES: usize = 10;
pub const DEFAULT_RBF_CENTROIDS: usize = 50;
pub const DEFAULT_HYPERPLANE_FEATURES: usize = 10;
pub const DEFAULT_HYPERPLANE_NOISE: f64 = 0.05;

/// What a concept draws from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConceptKind {
    /// STAGGER rule 0, 1 or 2.
    Stagger { concept: u8 },
    RandomRbf {
        model_seed: u64,
        n_features: usize,
        n_centroids: usize,
    },
    Hyperplane { weights: Vec<f64>, noise: f64 },
    Resampled { pool: Vec<Vec<f64>> },
}

impl ConceptKind {
    pub fn stagger(concept: u8) -> Self {
        ConceptKind::Stagger { concept }
    }

    pub fn random_rbf(model_seed: u64) -> Self {
        ConceptKind::RandomRbf {
            model_seed,
            n_features: DEFAULT_RBF_FEATURES,
            n_centroids: DEFAULT_RBF_CENTROIDS,
        }
    }

    /// Output dimension including the appended label.
    pub fn dimension(&self) -> usize {
        match self {
            ConceptKind::Stagger { .. } => STAGGER_DIM,
            ConceptKind::RandomRbf { n_features, .. } => n_features + 1,
            ConceptKind::Hyperplane { weights, .. } => weights.len() + 1,
            ConceptKind::Resampled { pool } => pool.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConceptKind::Stagger { concept } if *concept > 2 => Err(DriftError::config(format!(
                "STAGGER concept must be 0, 1 or 2 (got {concept})"
            ))),
            ConceptKind::RandomRbf {
                n_features,
                n_centroids,
                ..
            } if *n_features == 0 || *n_centroids == 0 => Err(DriftError::config(
                "RandomRBF needs at least one feature and one centroid",
            )),
            ConceptKind::Hyperplane { weights, noise } => {
                if weights.is_empty() {
                    return Err(DriftError::config("hyperplane needs a weight vector"));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(DriftError::config("hyperplane weights must be finite"));
                }
                if !(0.0..=1.0).contains(noise) {
                    return Err(DriftError::config("hyperplane noise must lie in [0, 1]"));
                }
                Ok(())
            }
            ConceptKind::Resampled { pool } => {
                let dim = pool.first().map_or(0, Vec::len);
                if pool.is_empty() || dim == 0 {
                    return Err(DriftError::config("resample pool is empty"));
                }
                if pool.iter().any(|p| p.len() != dim) {
                    return Err(DriftError::config("resample pool has ragged rows"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
struct Centroid {
    centre: Vec<f64>,
    class: f64,
    spread: f64,
}

#[derive(Clone, Debug)]
enum Prepared {
    Stagger(u8),
    Rbf {
        centroids: Vec<Centroid>,
        cumulative: Vec<f64>,
    },
    Hyperplane {
        weights: Vec<f64>,
        offset: f64,
        noise: f64,
    },
    Resampled(Vec<Vec<f64>>),
}

/// A concept plus its sampler state. Two sources built with the same kind and
/// seed produce identical sequences.
#[derive(Clone, Debug)]
pub struct ConceptSource {
    kind: ConceptKind,
    prepared: Prepared,
    rng: ChaCha8Rng,
}

impl ConceptSource {
    pub fn new(kind: ConceptKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        let prepared = match &kind {
            ConceptKind::Stagger { concept } => Prepared::Stagger(*concept),
            ConceptKind::RandomRbf {
                model_seed,
                n_features,
                n_centroids,
            } => {
                let mut model_rng = rng_from(derive_seed(*model_seed, 0xBF));
                let mut centroids = Vec::with_capacity(*n_centroids);
                let mut cumulative = Vec::with_capacity(*n_centroids);
                let mut total = 0.0;
                for _ in 0..*n_centroids {
                    let centre = (0..*n_features).map(|_| model_rng.random::<f64>()).collect();
                    let class = if model_rng.random::<bool>() { 1.0 } else { 0.0 };
                    let spread = model_rng.random::<f64>();
                    total += model_rng.random::<f64>();
                    cumulative.push(total);
                    centroids.push(Centroid {
                        centre,
                        class,
                        spread,
                    });
                }
                Prepared::Rbf {
                    centroids,
                    cumulative,
                }
            }
            ConceptKind::Hyperplane { weights, noise } => Prepared::Hyperplane {
                offset: 0.5 * weights.iter().sum::<f64>(),
                weights: weights.clone(),
                noise: *noise,
            },
            ConceptKind::Resampled { pool } => Prepared::Resampled(pool.clone()),
        };
        Ok(ConceptSource {
            kind,
            prepared,
            rng: rng_from(seed),
        })
    }

    pub fn kind(&self) -> &ConceptKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn generate(&mut self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(DriftError::arg("generate_concept needs n > 0"));
        }
        Ok((0..n).map(|_| self.draw()).collect())
    }

    fn draw(&mut self) -> Vec<f64> {
        let rng = &mut self.rng;
        match &self.prepared {
            Prepared::Stagger(concept) => {
                let size = rng.random_range(0..3usize);
                let color = rng.random_range(0..3usize);
                let shape = rng.random_range(0..3usize);
                let label = stagger_label(*concept, size, color, shape);
                let mut x = vec![0.0; STAGGER_DIM];
                x[size] = 1.0;
                x[3 + color] = 1.0;
                x[6 + shape] = 1.0;
                x[9] = if label { 1.0 } else { 0.0 };
                x
            }
            Prepared::Rbf {
                centroids,
                cumulative,
            } => {
                let total = *cumulative.last().expect("validated non-empty");
                let pick = rng.random::<f64>() * total;
                let idx = cumulative.partition_point(|&c| c <= pick).min(centroids.len() - 1);
                let c = &centroids[idx];
                let mut dir: Vec<f64> = c.centre.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let radius: f64 = StandardNormal.sample(rng);
                let scale = if len > 0.0 { radius * c.spread / len } else { 0.0 };
                for (d, m) in dir.iter_mut().zip(&c.centre) {
                    *d = m + *d * scale;
                }
                dir.push(c.class);
                dir
            }
            Prepared::Hyperplane {
                weights,
                offset,
                noise,
            } => {
                let mut x: Vec<f64> = weights.iter().map(|_| rng.random::<f64>()).collect();
                let side: f64 = x.iter().zip(weights).map(|(a, w)| a * w).sum();
                let mut label = side >= *offset;
                if rng.random::<f64>() < *noise {
                    label = !label;
                }
                x.push(if label { 1.0 } else { 0.0 });
                x
            }
            Prepared::Resampled(pool) => pool[rng.random_range(0..pool.len())].clone(),
        }
    }
}

/// The three STAGGER rules on (size, color, shape) codes.
/// size: small/medium/large, color: red/green/blue, shape: square/circular/triangular.
pub fn stagger_label(concept: u8, size: usize, color: usize, shape: usize) -> bool {
    match concept {
        0 => size == 0 && color == 0,
        1 => color == 1 || shape == 1,
        _ => size == 1 || size == 2,
    }
}

/// Draws `n` i.i.d. samples from a freshly seeded source.
pub fn generate_concept(kind: &ConceptKind, seed: u64, n: usize) -> Result<Vec<Vec<f64>>> {
    ConceptSource::new(kind.clone(), seed)?.generate(n)
}

/// A family of concepts a benchmark draws its A/B/C concepts from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConceptFamily {
    Stagger,
    RandomRbf {
        #[serde(default = "default_rbf_features")]
        n_features: usize,
        #[serde(default = "default_rbf_centroids")]
        n_centroids: usize,
    },
    Hyperplane {
        #[serde(default = "default_hyperplane_features")]
        n_features: usize,
        #[serde(default = "default_hyperplane_noise")]
        noise: f64,
    },
    /// Concepts given as sample pools, e.g. time windows of a real dataset.
    Pools { pools: Vec<Vec<Vec<f64>>> },
}

fn default_rbf_features() -> usize {
    DEFAULT_RBF_FEATURES
}
fn default_rbf_centroids() -> usize {
    DEFAULT_RBF_CENTROIDS
}
fn default_hyperplane_features() -> usize {
    DEFAULT_HYPERPLANE_FEATURES
}
fn default_hyperplane_noise() -> f64 {
    DEFAULT_HYPERPLANE_NOISE
}

impl ConceptFamily {
    pub fn random_rbf() -> Self {
        ConceptFamily::RandomRbf {
            n_features: DEFAULT_RBF_FEATURES,
            n_centroids: DEFAULT_RBF_CENTROIDS,
        }
    }

    pub fn hyperplane() -> Self {
        ConceptFamily::Hyperplane {
            n_features: DEFAULT_HYPERPLANE_FEATURES,
            noise: DEFAULT_HYPERPLANE_NOISE,
        }
    }

    /// `count` pairwise distinct concepts, chosen from `seed`.
    pub fn draw_concepts(&self, count: usize, seed: u64) -> Result<Vec<ConceptKind>> {
        let mut rng = rng_from(derive_seed(seed, 0xC0));
        match self {
            ConceptFamily::Stagger => {
                if count > 3 {
                    return Err(DriftError::config("STAGGER has only three concepts"));
                }
                let ids = rand::seq::index::sample(&mut rng, 3, count);
                Ok(ids.iter().map(|i| ConceptKind::stagger(i as u8)).collect())
            }
            ConceptFamily::RandomRbf {
                n_features,
                n_centroids,
            } => Ok((0..count)
                .map(|i| ConceptKind::RandomRbf {
                    model_seed: derive_seed(seed, 0x100 + i as u64),
                    n_features: *n_features,
                    n_centroids: *n_centroids,
                })
                .collect()),
            ConceptFamily::Hyperplane { n_features, noise } => Ok((0..count)
                .map(|_| ConceptKind::Hyperplane {
                    weights: (0..*n_features).map(|_| rng.random::<f64>()).collect(),
                    noise: *noise,
                })
                .collect()),
            ConceptFamily::Pools { pools } => {
                if count > pools.len() {
                    return Err(DriftError::config(format!(
                        "need {count} concepts but only {} pools are available",
                        pools.len()
                    )));
                }
                let ids = rand::seq::index::sample(&mut rng, pools.len(), count);
                ids.iter()
                    .map(|i| {
                        let kind = ConceptKind::Resampled {
                            pool: pools[i].clone(),
                        };
                        kind.validate().map(|_| kind)
                    })
                    .collect()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConceptFamily::Stagger => "stagger",
            ConceptFamily::RandomRbf { .. } => "random_rbf",
            ConceptFamily::Hyperplane { .. } => "hyperplane",
            ConceptFamily::Pools { .. } => "pools",
        }
    }
}
