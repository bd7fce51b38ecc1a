//! Lagrangian flows of blob velocity fields: forward integration with the
//! carriers, backward and two-time transport through the stored field
//! history, pushforward of vorticity and flow-distance metrics.

mod config;
mod history;
mod labels;
mod map;
mod metrics;

pub use config::{Coupling, FlowConfig, Integrator};
pub use history::{AnalyticField, CarrierHistory, FieldHistory, TimeSlice};
pub use labels::{LabelGrid, Labels};
pub use map::{backward_flow, integrate_analytic_flow, integrate_flow, Cohort, FlowMap};
pub use metrics::{
    compressibility_estimate, compressibility_estimate_with, flow_measure_distance, measure_distance_from_positions,
    measure_distance_on,
    pushforward_vorticity, Compressibility, Pushforward, COMPRESSIBILITY_BLOCK,
};
