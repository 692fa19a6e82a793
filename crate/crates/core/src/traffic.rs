//! Request arrivals: Zipf popularity over per-user catalogs and Poisson counts.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RngStreams, Stream};

/// Truncation multiple applied to the per-slot mean of each Poisson count.
pub const A_MAX_FACTOR: f64 = 50.0;

/// Zipf law over `k` ranks with skewness `skew`.
pub fn zipf_popularity(k: usize, skew: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Input("library size must be at least 1".into()));
    }
    if !(skew >= 0.0) || !skew.is_finite() {
        return Err(Error::Input(format!("skewness must be finite and >= 0, got {skew}")));
    }
    let raw: Vec<f64> = (1..=k).map(|r| (r as f64).powf(-skew)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Per-slot cap of a count with the given mean.
pub fn a_max(mean: f64) -> u64 {
    (A_MAX_FACTOR * mean.max(1.0)).ceil() as u64
}

/// Library and per-user request catalogs, fixed for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub library_size: usize,
    pub skewness: f64,
    /// Popularity by rank within a user catalog.
    pub popularity: Vec<f64>,
    /// `catalogs[j][r]` is the object that user `j` requests at rank `r`.
    pub catalogs: Vec<Vec<usize>>,
}

impl Catalog {
    /// Draws each user's catalog uniformly without replacement from the library.
    /// With `identical` every user shares the first draw.
    pub fn generate(
        streams: &RngStreams,
        n_users: usize,
        library_size: usize,
        catalog_size: usize,
        skewness: f64,
        identical: bool,
    ) -> Result<Self> {
        if catalog_size == 0 || catalog_size > library_size {
            return Err(Error::Config(format!(
                "catalog size {catalog_size} must be in 1..={library_size}"
            )));
        }
        let popularity = zipf_popularity(catalog_size, skewness)?;
        let mut rng = streams.rng(Stream::Catalogs);
        let mut catalogs: Vec<Vec<usize>> = Vec::with_capacity(n_users);
        for j in 0..n_users {
            if identical && j > 0 {
                catalogs.push(catalogs[0].clone());
                continue;
            }
            catalogs.push(rand::seq::index::sample(&mut rng, library_size, catalog_size).into_vec());
        }
        Ok(Self {
            library_size,
            skewness,
            popularity,
            catalogs,
        })
    }

    /// Catalogs given explicitly (ranks in order).
    pub fn from_catalogs(library_size: usize, skewness: f64, catalogs: Vec<Vec<usize>>) -> Result<Self> {
        let size = catalogs.first().map_or(0, Vec::len);
        if catalogs
            .iter()
            .any(|c| c.len() != size || c.iter().any(|&k| k >= library_size))
        {
            return Err(Error::Config(
                "catalogs must share one length and index the library".into(),
            ));
        }
        Ok(Self {
            library_size,
            skewness,
            popularity: zipf_popularity(size, skewness)?,
            catalogs,
        })
    }

    pub fn n_users(&self) -> usize {
        self.catalogs.len()
    }

    /// Mean arrival rate of every (user, object) pair for total rate `lambda` per user.
    pub fn rates(&self, lambda: f64) -> Vec<Vec<f64>> {
        self.catalogs
            .iter()
            .map(|cat| {
                let mut row = vec![0.0; self.library_size];
                for (rank, &k) in cat.iter().enumerate() {
                    row[k] += lambda * self.popularity[rank];
                }
                row
            })
            .collect()
    }

    /// Aggregate arrival rate of each object summed over users.
    pub fn aggregate_rates(&self, lambda: f64) -> Vec<f64> {
        let mut total = vec![0.0; self.library_size];
        for row in self.rates(lambda) {
            for (t, r) in total.iter_mut().zip(row) {
                *t += r;
            }
        }
        total
    }
}

/// Object requests of one slot. Each request stands for all chunks of the object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrivalBatch {
    pub slot: u64,
    /// Nonzero counts `(user, object, count)`, sorted by user then object.
    pub entries: Vec<(usize, usize, u32)>,
}

impl ArrivalBatch {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.2 as u64).sum()
    }

    pub fn count(&self, user: usize, object: usize) -> u32 {
        self.entries
            .iter()
            .find(|e| e.0 == user && e.1 == object)
            .map_or(0, |e| e.2)
    }
}

/// Arrival generator for a fixed catalog and per-user rate.
#[derive(Debug, Clone)]
pub struct TrafficModel {
    pub catalog: Catalog,
    pub lambda: f64,
    samplers: Vec<Option<(Poisson<f64>, u64)>>,
}

impl TrafficModel {
    pub fn new(catalog: Catalog, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "arrival rate must be finite and >= 0, got {lambda}"
            )));
        }
        let samplers = catalog
            .popularity
            .iter()
            .map(|&rho| {
                let mean = lambda * rho;
                (mean > 0.0).then(|| (Poisson::new(mean).expect("positive finite mean"), a_max(mean)))
            })
            .collect();
        Ok(Self {
            catalog,
            lambda,
            samplers,
        })
    }

    pub fn generate_with<R: Rng>(&self, rng: &mut R, t: u64) -> ArrivalBatch {
        let mut entries = Vec::new();
        for (j, cat) in self.catalog.catalogs.iter().enumerate() {
            let mut row: Vec<(usize, u32)> = Vec::new();
            for (rank, &k) in cat.iter().enumerate() {
                if let Some((dist, cap)) = &self.samplers[rank] {
                    let draw = dist.sample(rng) as u64;
                    if draw > 0 {
                        row.push((k, draw.min(*cap) as u32));
                    }
                }
            }
            row.sort_unstable();
            entries.extend(row.into_iter().map(|(k, c)| (j, k, c)));
        }
        ArrivalBatch { slot: t, entries }
    }

    /// Arrivals of slot `t`; identical for identical (seed, t).
    pub fn generate(&self, streams: &RngStreams, t: u64) -> ArrivalBatch {
        self.generate_with(&mut streams.slot_rng(Stream::Arrivals, t), t)
    }
}
