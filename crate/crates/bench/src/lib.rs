//! Fixtures shared by the benchmarks.

use minetax_core::{LeaderStrategy, ModelConfig};

pub use minetax_core::ExtendedModel;

/// The bundled five-period model.
pub fn reference_model() -> ExtendedModel {
    ModelConfig::default().extended
}

/// A tax schedule under which every technology extracts across several
/// strata.
pub fn moderate_taxes() -> LeaderStrategy {
    LeaderStrategy::new(vec![12.0, 15.0, 18.0, 21.0, 24.0])
}
