//! Bit-exact software model of a dual-path discrete Gaussian sampler for
//! Falcon signatures, with a cycle-accurate control-FSM simulator, latency
//! models, and a statistical verification harness.
//!
//! The crate is organized around the hardware decomposition of SamplerZ:
//!
//! - [`fxp`]: 81-bit unsigned fixed-point arithmetic (72 fractional bits)
//!   replacing double-precision floats, bit-exact by construction.
//! - [`prng`]: ChaCha20 keystream generation with per-path refill lanes.
//! - [`basesampler`]: reverse-CDT half-Gaussian base sampling in both the
//!   counter-sum and transition-scan (priority-encoder) forms.
//! - [`kernel`]: the pipeline stages (Pre_samp, Bef_loop, For_loop, CMP,
//!   Fpr_adder) plus a double-precision reference sampler used as the
//!   correctness oracle.
//! - [`fsm`]: the dual-path control FSM with per-state cycle costs, the
//!   cross-path assistance mechanism, and module-activation accounting.
//! - [`latency`]: Monte-Carlo and closed-form expected-latency models,
//!   including the single-path comparison design.
//! - [`stats`]: chi-square goodness-of-fit, failure histograms, and
//!   assistance-rate measurement.
//! - [`campaign`] / [`vectors`]: deterministic batch drivers and golden-vector
//!   interchange.

pub mod basesampler;
pub mod campaign;
pub mod fsm;
pub mod fxp;
pub mod kernel;
pub mod latency;
pub mod params;
pub mod prng;
pub mod stats;
pub mod vectors;

pub use basesampler::{sample_pair, z0_counter, z0_scan, Rcdt};
pub use campaign::{run_campaign, CampaignConfig, CampaignResult, MuDist, SigmaDist, TaskGen};
pub use fsm::{
    activation_set, aloop_round, CycleCosts, DualSampler, FsmState, FsmTrace, HwModule, Policy,
    StateRecord, TaskResult,
};
pub use fxp::{Fxp81, FxpError};
pub use kernel::{
    bef_loop, cmp, for_loop, fpr_add, pre_samp, samplerz_oracle, ExpCoeffs, GaussLut, KernelError,
    OracleSample, PathState, PreComputed, SampleTask,
};
pub use latency::{
    analytic_expected_bi, analytic_expected_falconsign, expected_cycles_bi,
    expected_cycles_falconsign, outcome_probabilities, LatencyReport, RejectionMode,
    RejectionModel, DEFAULT_P_ACCEPT,
};
pub use params::{ParamSet, SamplerParams, SIGMA_MAX, SIGMA_MIN_1024, SIGMA_MIN_512};
pub use prng::{
    seed_from_hex, seed_to_hex, ByteStream, Lane, LaneView, PrngCore, RandomLanes, RefillControl,
    ScriptedBytes, ScriptedLanes, Seed, StreamRng, U144,
};
pub use stats::{
    assisted_success_rate, chi_square, count_samples, dist_report, failure_histogram, target_pmf,
    ChiSquareResult, DistReport, FailureHistogram, Pmf, StatsError,
};

/// Tool version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
