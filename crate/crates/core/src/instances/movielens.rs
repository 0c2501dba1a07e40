//! Bandit instances whose arms are columns of a completed ratings matrix.

use std::sync::Arc;

use rand::Rng;

use super::synthetic::{synthetic_targets, SyntheticSpec, RESAMPLE_LIMIT};
use crate::bandit::{ArmEstimator, BanditInstance, RewardSource};
use crate::error::{Error, Result};

/// Dense users x movies matrix stored column by column, with per-movie
/// mean and population variance over all users.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedRatings {
    pub users: usize,
    pub movie_ids: Vec<u32>,
    pub columns: Vec<Arc<[f64]>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl CompletedRatings {
    pub fn from_columns(users: usize, movie_ids: Vec<u32>, columns: Vec<Arc<[f64]>>) -> Result<Self> {
        if movie_ids.len() != columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{} movie ids for {} columns",
                movie_ids.len(),
                columns.len()
            )));
        }
        if users == 0 || columns.iter().any(|c| c.len() != users) {
            return Err(Error::InvalidParameter(format!("every column must hold {users} > 0 users")));
        }
        let (means, variances) = columns
            .iter()
            .map(|c| {
                let est = c.iter().fold(ArmEstimator::new(), |mut e, &y| {
                    e.update(y);
                    e
                });
                (est.mean(), est.sum_sq_dev() / users as f64)
            })
            .unzip();
        Ok(Self {
            users,
            movie_ids,
            columns,
            means,
            variances,
        })
    }

    /// `U V^T` from row-major factor blocks of width `rank`.
    pub(crate) fn from_factors(users: &[f64], movies: &[f64], rank: usize, movie_ids: Vec<u32>) -> Self {
        let n_users = users.len() / rank;
        let columns = movies
            .chunks(rank)
            .map(|v| {
                users
                    .chunks(rank)
                    .map(|u| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
                    .collect::<Arc<[f64]>>()
            })
            .collect();
        Self::from_columns(n_users, movie_ids, columns).expect("factor shapes are consistent")
    }

    pub fn num_movies(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone)]
pub struct MovieLensDraw {
    pub instance: BanditInstance,
    pub source: RewardSource,
    /// Column index of the movie behind each arm.
    pub movies: Vec<usize>,
}

/// For each target in arm order, the nearest unused movie under squared
/// distance in (mean, variance). Ties go to the lower movie index.
pub fn match_movies(
    catalogue_means: &[f64],
    catalogue_vars: &[f64],
    target_means: &[f64],
    target_vars: &[f64],
) -> Result<Vec<usize>> {
    let movies = catalogue_means.len();
    if catalogue_vars.len() != movies || target_vars.len() != target_means.len() {
        return Err(Error::InvalidParameter("mean and variance lengths differ".into()));
    }
    if target_means.len() > movies {
        return Err(Error::InvalidParameter(format!(
            "{} arms requested but only {movies} movies available",
            target_means.len()
        )));
    }
    let mut used = vec![false; movies];
    let mut chosen = Vec::with_capacity(target_means.len());
    for (&tm, &tv) in target_means.iter().zip(target_vars) {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..movies).filter(|&j| !used[j]) {
            let d = (catalogue_means[j] - tm).powi(2) + (catalogue_vars[j] - tv).powi(2);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("fewer targets than movies");
        used[j] = true;
        chosen.push(j);
    }
    Ok(chosen)
}

pub fn movielens_instance<R: Rng + ?Sized>(
    completed: &CompletedRatings,
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<MovieLensDraw> {
    if spec.arms > completed.num_movies() {
        return Err(Error::InvalidParameter(format!(
            "{} arms requested but only {} movies available",
            spec.arms,
            completed.num_movies()
        )));
    }
    for _ in 0..RESAMPLE_LIMIT {
        let (tm, tv) = synthetic_targets(spec, rng)?;
        let movies = match_movies(&completed.means, &completed.variances, &tm, &tv)?;
        let pools = movies.iter().map(|&j| Arc::clone(&completed.columns[j])).collect();
        let source = RewardSource::tabular(pools)?;
        match source.effective_instance() {
            Ok(instance) => {
                return Ok(MovieLensDraw {
                    instance,
                    source,
                    movies,
                })
            }
            Err(Error::InvalidInstance(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResampleLimit(RESAMPLE_LIMIT))
}
