//! Low-rank completion of a sparse ratings matrix by alternating ridge
//! least squares on the observed entries.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::movielens::CompletedRatings;
use super::ratings::RatingsTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    pub rank: usize,
    pub reg: f64,
    pub iters: usize,
    /// Factors start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            rank: 5,
            reg: 0.1,
            iters: 20,
            init_scale: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub completed: CompletedRatings,
    /// Regularized objective after each full sweep.
    pub loss_history: Vec<f64>,
    /// RMSE on the observed entries after each full sweep.
    pub rmse_history: Vec<f64>,
}

impl Completion {
    pub fn observed_rmse(&self) -> f64 {
        *self.rmse_history.last().expect("at least one iteration")
    }
}

type Adjacency = Vec<Vec<(u32, f64)>>;

fn adjacency(ratings: &RatingsTable) -> (Adjacency, Adjacency) {
    let mut by_user = vec![Vec::new(); ratings.num_users()];
    let mut by_movie = vec![Vec::new(); ratings.num_movies()];
    for r in &ratings.ratings {
        by_user[r.user as usize].push((r.movie, r.value));
        by_movie[r.movie as usize].push((r.user, r.value));
    }
    (by_user, by_movie)
}

fn solve_row(out: &mut [f64], fixed: &[f64], observed: &[(u32, f64)], reg: f64, what: &str, idx: usize) -> Result<()> {
    let rank = out.len();
    let mut gram = DMatrix::<f64>::identity(rank, rank) * reg;
    let mut rhs = DVector::<f64>::zeros(rank);
    for &(j, value) in observed {
        let row = &fixed[j as usize * rank..(j as usize + 1) * rank];
        for a in 0..rank {
            rhs[a] += value * row[a];
            for b in 0..rank {
                gram[(a, b)] += row[a] * row[b];
            }
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularSystem(format!("{what} {idx}")))?;
    out.copy_from_slice(chol.solve(&rhs).as_slice());
    Ok(())
}

fn solve_side(target: &mut [f64], fixed: &[f64], lists: &Adjacency, rank: usize, reg: f64, what: &str) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        target
            .par_chunks_mut(rank)
            .zip(lists.par_iter())
            .enumerate()
            .try_for_each(|(i, (row, obs))| solve_row(row, fixed, obs, reg, what, i))
    }
    #[cfg(not(feature = "parallel"))]
    {
        target
            .chunks_mut(rank)
            .zip(lists.iter())
            .enumerate()
            .try_for_each(|(i, (row, obs))| solve_row(row, fixed, obs, reg, what, i))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(regularized loss, observed RMSE)`.
fn objective(ratings: &RatingsTable, users: &[f64], movies: &[f64], rank: usize, reg: f64) -> (f64, f64) {
    let sse: f64 = ratings
        .ratings
        .iter()
        .map(|r| {
            let u = &users[r.user as usize * rank..(r.user as usize + 1) * rank];
            let v = &movies[r.movie as usize * rank..(r.movie as usize + 1) * rank];
            (r.value - dot(u, v)).powi(2)
        })
        .sum();
    let norm: f64 = users.iter().chain(movies).map(|x| x * x).sum();
    (sse + reg * norm, (sse / ratings.ratings.len() as f64).sqrt())
}

pub fn complete_matrix<R: Rng + ?Sized>(ratings: &RatingsTable, config: &AlsConfig, rng: &mut R) -> Result<Completion> {
    let AlsConfig {
        rank,
        reg,
        iters,
        init_scale,
    } = *config;
    if rank == 0 || iters == 0 || !(reg >= 0.0) || !(init_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid ALS configuration {config:?}")));
    }
    let (by_user, by_movie) = adjacency(ratings);
    if let Some(u) = by_user.iter().position(Vec::is_empty) {
        return Err(Error::InvalidParameter(format!("user {} has no ratings", ratings.user_ids[u])));
    }
    if let Some(m) = by_movie.iter().position(Vec::is_empty) {
        return Err(Error::InvalidParameter(format!("movie {} has no ratings", ratings.movie_ids[m])));
    }

    let init = Uniform::new_inclusive(-init_scale, init_scale).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut users: Vec<f64> = (0..ratings.num_users() * rank).map(|_| init.sample(rng)).collect();
    let mut movies: Vec<f64> = (0..ratings.num_movies() * rank).map(|_| init.sample(rng)).collect();

    let mut loss_history = Vec::with_capacity(iters);
    let mut rmse_history = Vec::with_capacity(iters);
    for _ in 0..iters {
        solve_side(&mut users, &movies, &by_user, rank, reg, "user")?;
        solve_side(&mut movies, &users, &by_movie, rank, reg, "movie")?;
        let (loss, rmse) = objective(ratings, &users, &movies, rank, reg);
        loss_history.push(loss);
        rmse_history.push(rmse);
    }

    Ok(Completion {
        completed: CompletedRatings::from_factors(&users, &movies, rank, ratings.movie_ids.clone()),
        loss_history,
        rmse_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::ratings::Rating;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(entries: Vec<(u32, u32, f64)>, users: usize, movies: usize) -> RatingsTable {
        RatingsTable {
            user_ids: (0..users as u32).collect(),
            movie_ids: (0..movies as u32).collect(),
            ratings: entries
                .into_iter()
                .map(|(user, movie, value)| Rating { user, movie, value })
                .collect(),
        }
    }

    #[test]
    fn rank_one_fully_observed_is_exact() {
        let (nu, nm) = (12, 9);
        let a: Vec<f64> = (0..nu).map(|i| 1.0 + 0.1 * i as f64).collect();
        let b: Vec<f64> = (0..nm).map(|j| 2.0 - 0.15 * j as f64).collect();
        let mut entries = Vec::new();
        for (u, &au) in a.iter().enumerate() {
            for (m, &bm) in b.iter().enumerate() {
                entries.push((u as u32, m as u32, au * bm));
            }
        }
        let t = table(entries, nu, nm);
        let cfg = AlsConfig {
            reg: 1e-8,
            ..AlsConfig::default()
        };
        let done = complete_matrix(&t, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(done.observed_rmse() <= 1e-6, "{}", done.observed_rmse());
        let col = &done.completed.columns[3];
        for u in 0..nu {
            assert!((col[u] - a[u] * b[3]).abs() < 1e-5);
        }
    }

    #[test]
    fn loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nu, nm) = (30, 20);
        let mut entries = Vec::new();
        for u in 0..nu {
            for m in 0..nm {
                if (u + m) % 3 == 0 || u == m || rng.random::<f64>() < 0.2 {
                    entries.push((u as u32, m as u32, 1.0 + 4.0 * rng.random::<f64>()));
                }
            }
        }
        let done = complete_matrix(&table(entries, nu, nm), &AlsConfig::default(), &mut rng).unwrap();
        for w in done.loss_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
        }
    }

    #[test]
    fn unrated_movie_is_rejected() {
        let t = table(vec![(0, 0, 1.0), (1, 0, 2.0)], 2, 2);
        assert!(complete_matrix(&t, &AlsConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
