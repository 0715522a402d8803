//! Latency analysis, delivery-scheme synthesis, and slot-level simulation
//! for a 2x2 fog radio access network with device-to-device cooperation,
//! under serial and pipelined delivery.
//!
//! The crate is organized around four pieces:
//!
//! * [`model`]: parameter types, demand classes, and the flat config format;
//! * [`analysis`]: closed-form minimum pipelined NDT, regimes, the D2D
//!   threshold, breakpoint curves, and pipelining-gain bounds;
//! * [`scheme`]: synthesis of serial delivery policies that meet the closed
//!   form, block-Markov conversion to pipelined schedules, and the reverse
//!   serialization;
//! * [`simulator`]: bit-level execution of either delivery style at finite
//!   file size, with capacity enforcement and empirical NDT measurement.

pub mod analysis;
pub mod model;
pub mod scheme;
pub mod simulator;

pub use analysis::{
    classify_regime, d2d_threshold, gain_equality_conditions, is_d2d_beneficial, min_pipelined_ndt,
    ndt_vs_mu_breakpoints, pipelining_gain_bound, serialization_upper_bound, BreakpointCurve,
    D2dThreshold, GainEqualityConditions, Regime, RegimeTag,
};
pub use model::{
    worst_case_demands, ConfigFile, DemandVector, Ndt, NdtTriple, SimScale, SystemParams,
};
pub use scheme::{
    achievable_pipelined_ndt, block_markov_convert, serialize_pipelined, synthesize_serial_policy,
    validate_policy, CachePlacement, DeliveryMode, PipelinedSchedule, PlanEntry, SerialPolicy,
};
pub use simulator::{
    convergence_study, place_caches, run_pipelined_ti, run_serial_ti, worst_case_report,
    BusySymbols, CacheState, ConvergenceEntry, ConvergenceSeries, Delivery, DeliveryReport,
    RunOptions,
};
