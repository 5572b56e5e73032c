//! Concrete behavior worlds.

pub mod catalog;
pub mod cluster;
pub mod linear;
pub mod movie;
pub mod table;

pub use catalog::{appendix_d_worlds, figure2_world, CatalogOutcome, CatalogWorld, Item};
pub use cluster::centroid_clusters;
pub use linear::{LinearSpec, LinearWorld};
pub use movie::{
    asymptotic_personalization_gaps, asymptotic_personalization_oracle, sample_population, thompson_recommend, watch_probability,
    AwardLearning, Category, CategoryCounts, Concentration, MoviePrefs, MovieWorld,
};
pub use table::{Separability, TableWorld};
