//! Expected-latency estimation.
//!
//! Monte-Carlo trials drive the dual-path control FSM with synthetic
//! accept/reject draws (bypassing the arithmetic kernel), or replay the
//! single-path cost structure of the FalconSign-style pipeline for
//! comparison. A geometric rejection model with p = 0.5758 is the default;
//! the empirical mode replays the published failure-count histogram instead.

use crate::fsm::{run_fsm, Attempt, AttemptEngine, CycleCosts, FsmTrace, Policy};
use crate::kernel::KernelError;
use crate::prng::{Lane, Seed, StreamRng};
use serde::{Deserialize, Serialize};

/// Aggregate single-sample acceptance probability observed for SamplerZ over
/// Falcon's operational input mixture.
pub const DEFAULT_P_ACCEPT: f64 = 0.5758;

/// Published per-execution failure-count ratios (0, 1, .., 5, >=6 failures).
pub const FAILURE_RATIOS: [f64; 7] = [0.5758, 0.2439, 0.1047, 0.0436, 0.0189, 0.0072, 0.0059];

/// FalconSign-style single-path stage costs: fixed preprocessing and
/// per-attempt loop cost; the BerExp stage alternates 41/42 cycles so the
/// two-sampling rejection-free total calibrates to 137.
pub const FALCONSIGN_PRE: u32 = 11;
pub const FALCONSIGN_SAMP_LOOP: u32 = 16;
pub const FALCONSIGN_BEREXP: [u32; 2] = [41, 42];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionMode {
    Geometric,
    EmpiricalHistogram,
}

/// Per-attempt accept/reject model for synthetic trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionModel {
    pub p_accept: f64,
    pub mode: RejectionMode,
}

impl RejectionModel {
    /// Geometric rejections with the given per-attempt acceptance
    /// probability, `0 < p <= 1`.
    pub fn geometric(p_accept: f64) -> RejectionModel {
        assert!(
            p_accept > 0.0 && p_accept <= 1.0,
            "acceptance probability must be in (0, 1]"
        );
        RejectionModel {
            p_accept,
            mode: RejectionMode::Geometric,
        }
    }

    /// Replays the published failure histogram; the open >=6 bin extends
    /// geometrically with `p_accept`.
    pub fn empirical(p_accept: f64) -> RejectionModel {
        assert!(p_accept > 0.0 && p_accept <= 1.0);
        RejectionModel {
            p_accept,
            mode: RejectionMode::EmpiricalHistogram,
        }
    }

    fn accept_threshold(&self) -> u128 {
        if self.p_accept >= 1.0 {
            1u128 << 64
        } else {
            (self.p_accept * 18446744073709551616.0) as u128 // p * 2^64
        }
    }

    /// Draws a per-execution failure count.
    pub fn draw_failures(&self, rng: &mut StreamRng) -> u32 {
        match self.mode {
            RejectionMode::Geometric => {
                let threshold = self.accept_threshold();
                let mut fails = 0;
                while (rng.next_u64() as u128) >= threshold {
                    fails += 1;
                    if fails >= 10_000 {
                        break;
                    }
                }
                fails
            }
            RejectionMode::EmpiricalHistogram => {
                let x = rng.next_f64();
                let mut acc = 0.0;
                for (bin, &ratio) in FAILURE_RATIOS.iter().enumerate() {
                    acc += ratio;
                    if x < acc {
                        if bin < 6 {
                            return bin as u32;
                        }
                        // open bin: 6 plus a geometric tail
                        return 6 + RejectionModel::geometric(self.p_accept).draw_failures(rng);
                    }
                }
                6
            }
        }
    }
}

/// Synthetic engine: Bernoulli accept draws, minimal CMP scans, no arithmetic.
/// In empirical mode each sample slot pre-draws its failure count and rejects
/// exactly that many attempts.
struct SyntheticEngine<'a> {
    rng: &'a mut StreamRng,
    model: RejectionModel,
    pending: [Option<u32>; 2],
}

impl<'a> SyntheticEngine<'a> {
    fn new(rng: &'a mut StreamRng, model: RejectionModel) -> Self {
        SyntheticEngine {
            rng,
            model,
            pending: [None, None],
        }
    }
}

impl AttemptEngine for SyntheticEngine<'_> {
    fn attempt(&mut self, _path: Lane, target: usize) -> Attempt {
        let accept = match self.model.mode {
            RejectionMode::Geometric => {
                (self.rng.next_u64() as u128) < self.model.accept_threshold()
            }
            RejectionMode::EmpiricalHistogram => {
                let remaining = self
                    .pending[target]
                    .get_or_insert_with(|| self.model.draw_failures(self.rng));
                if *remaining == 0 {
                    true
                } else {
                    *remaining -= 1;
                    false
                }
            }
        };
        Attempt {
            accept,
            z: 0,
            cmp_steps: 1,
        }
    }
}

/// Expected-cycles estimate for one design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyReport {
    pub design: String,
    pub expected_cycles: f64,
    pub rejection_free_cycles: f64,
    pub trials: u64,
    /// 95% confidence half-width of the mean.
    pub ci_half_width: f64,
}

fn summarize(design: &str, totals_mean: f64, m2: f64, n: u64, rejection_free: f64) -> LatencyReport {
    let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    LatencyReport {
        design: design.to_string(),
        expected_cycles: totals_mean,
        rejection_free_cycles: rejection_free,
        trials: n,
        ci_half_width: 1.96 * (variance / n as f64).sqrt(),
    }
}

/// Monte-Carlo expected cycles for the dual-path design under a policy;
/// synthetic draws bypass the arithmetic kernel but run the real FSM.
pub fn expected_cycles_bi(
    policy: Policy,
    model: RejectionModel,
    trials: u64,
    seed: Seed,
) -> Result<LatencyReport, KernelError> {
    let costs = CycleCosts::default();
    let mut rng = StreamRng::new(seed);
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..trials {
        let mut engine = SyntheticEngine::new(&mut rng, model);
        let run = run_fsm(&mut engine, policy, &costs)?;
        let x = run.trace.total_cycles as f64;
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let design = match policy {
        Policy::WithAssist => "bi_with_assist",
        Policy::WithoutAssist => "bi_without_assist",
    };
    Ok(summarize(
        design,
        mean,
        m2,
        trials,
        costs.rejection_free_total() as f64,
    ))
}

/// Synthetic traces for statistical harnesses (failure histograms, assist
/// rates) without the arithmetic kernel.
pub fn synthetic_traces(
    policy: Policy,
    model: RejectionModel,
    trials: u64,
    seed: Seed,
) -> Result<Vec<FsmTrace>, KernelError> {
    let costs = CycleCosts::default();
    let mut rng = StreamRng::new(seed);
    let mut traces = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let mut engine = SyntheticEngine::new(&mut rng, model);
        traces.push(run_fsm(&mut engine, policy, &costs)?.trace);
    }
    Ok(traces)
}

/// FalconSign rejection-free total for two samplings: 2*(11 + 16) + 41 + 42.
pub fn falconsign_rejection_free() -> u32 {
    2 * (FALCONSIGN_PRE + FALCONSIGN_SAMP_LOOP) + FALCONSIGN_BEREXP[0] + FALCONSIGN_BEREXP[1]
}

/// Monte-Carlo expected cycles for two sequential single-path samplings in
/// the FalconSign cost structure.
pub fn expected_cycles_falconsign(
    model: RejectionModel,
    trials: u64,
    seed: Seed,
) -> Result<LatencyReport, KernelError> {
    let mut rng = StreamRng::new(seed);
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let mut berexp_invocations = 0usize;
    for i in 0..trials {
        let mut total = 0u64;
        for _ in 0..2 {
            total += FALCONSIGN_PRE as u64;
            let failures = model.draw_failures(&mut rng);
            for _ in 0..=failures {
                total += FALCONSIGN_SAMP_LOOP as u64
                    + FALCONSIGN_BEREXP[berexp_invocations % 2] as u64;
                berexp_invocations += 1;
            }
        }
        let x = total as f64;
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok(summarize(
        "falconsign_model",
        mean,
        m2,
        trials,
        falconsign_rejection_free() as f64,
    ))
}

/// Outcome split for two parallel attempts at per-attempt acceptance `p`:
/// (both succeed, neither succeeds, exactly one succeeds).
pub fn outcome_probabilities(p: f64) -> (f64, f64, f64) {
    assert!((0.0..=1.0).contains(&p));
    let q = 1.0 - p;
    (p * p, q * q, 2.0 * p * q)
}

/// Closed-form expected cycles for the dual-path FSM under iid geometric
/// acceptance; cross-checks the Monte-Carlo estimates.
pub fn analytic_expected_bi(policy: Policy, p: f64, costs: &CycleCosts) -> f64 {
    let q = 1.0 - p;
    let fixed = (costs.pre + costs.nreg + costs.f_add) as f64;
    let round_exit = 1.0 - q * q; // at least one path accepts
    let e_rounds = 1.0 / round_exit;
    match policy {
        Policy::WithAssist => {
            let p_one = 2.0 * p * q / round_exit;
            fixed
                + costs.loop_base as f64 * e_rounds
                + costs.retry_penalty as f64 * (e_rounds - 1.0)
                + p_one
                    * (costs.switch_cycles as f64
                        + (costs.loop_base + costs.assist_penalty) as f64 * e_rounds)
        }
        Policy::WithoutAssist => {
            // rounds = max of two iid geometrics
            let e_max = 2.0 / p - e_rounds;
            fixed + costs.loop_base as f64 * e_max + costs.retry_penalty as f64 * (e_max - 1.0)
        }
    }
}

/// Closed-form FalconSign expectation: two samplings, geometric attempts.
pub fn analytic_expected_falconsign(p: f64) -> f64 {
    let berexp_mean = (FALCONSIGN_BEREXP[0] + FALCONSIGN_BEREXP[1]) as f64 / 2.0;
    2.0 * (FALCONSIGN_PRE as f64
        + (FALCONSIGN_SAMP_LOOP as f64 + berexp_mean) / p)
}
