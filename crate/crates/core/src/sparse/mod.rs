//! Sparse recovery of the cyclic autocorrelation from undersampled delay products.

mod dictionary;
mod greedy;
mod mask;
mod operator;

pub use dictionary::{
    build_asymptotic_dictionary, build_symmetry_dictionary, read_dictionary_csv,
    write_dictionary_csv, DictionaryKind, StructureDictionary,
};
pub use greedy::{
    hades_estimate, oracle_estimate, omp_estimate, primary_cycle_frequency, somp_estimate,
    RecoveryState,
};
pub use mask::{build_mask, undersample, SamplingMask};
pub use operator::MeasurementOperator;
