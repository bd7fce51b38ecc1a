//! Function-space functionals on sampled data: the weak-L² seminorm and
//! the Hardy-Littlewood-Sobolev ratio, local convergence in measure, and
//! pairings of vorticity against bounded functions.

mod pairing;
mod seminorm;

pub use pairing::{pairing_dictionary, weak_l1_pairing, BoundedFunction, DictionaryFunction};
pub use seminorm::{
    hls_ratio, hls_ratio_with, local_measure_distance, m2_seminorm, m2_seminorm_detail, M2Seminorm, SampledScalarField,
    MIN_LEVEL_CELLS,
};
