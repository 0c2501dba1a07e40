//! Problem generators: perturbed synthetic Gaussian bandits and bandits built
//! from a completed movie-rating matrix.

mod als;
mod movielens;
mod ratings;
mod store;
mod synthetic;

pub use als::{complete_matrix, AlsConfig, Completion};
pub use movielens::{match_movies, movielens_instance, CompletedRatings, MovieLensDraw};
pub use ratings::{ingest_ratings, parse_ratings, Rating, RatingsTable};
pub use store::{read_completed, write_completed, STORE_MAGIC, STORE_VERSION};
pub use synthetic::{synthetic_instance, synthetic_targets, SyntheticSpec, MIN_VARIANCE, RESAMPLE_LIMIT};
