//! Statistical verification: goodness-of-fit against the target discrete
//! Gaussian, failure-count histograms, and assistance-rate measurement.

use crate::fsm::FsmTrace;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    /// Fewer than two bins survive merging.
    DegenerateBins,
    InsufficientData { needed: u64, got: u64 },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::DegenerateBins => write!(f, "fewer than 2 bins after merging"),
            StatsError::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed}, got {got}")
            }
        }
    }
}

impl std::error::Error for StatsError {}

/// PMF over a contiguous integer support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pmf {
    pub start: i64,
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn end(&self) -> i64 {
        self.start + self.probs.len() as i64 - 1
    }

    pub fn prob(&self, k: i64) -> f64 {
        if k < self.start || k > self.end() {
            0.0
        } else {
            self.probs[(k - self.start) as usize]
        }
    }
}

/// Normalized `exp(-(k - mu)^2 / (2 sigma'^2))` over `[lo, hi]`. The support
/// must cover `floor(mu) +- 30`; beyond that the tail mass is below 1e-80 for
/// the sigma range in scope.
pub fn target_pmf(mu: f64, sigma_prime: f64, lo: i64, hi: i64) -> Pmf {
    assert!(
        lo <= mu.floor() as i64 - 30 && hi >= mu.floor() as i64 + 30,
        "support [{lo}, {hi}] must cover floor(mu) +- 30"
    );
    let inv = 1.0 / (2.0 * sigma_prime * sigma_prime);
    let probs: Vec<f64> = (lo..=hi)
        .map(|k| {
            let d = k as f64 - mu;
            (-d * d * inv).exp()
        })
        .collect();
    let total: f64 = probs.iter().sum();
    Pmf {
        start: lo,
        probs: probs.into_iter().map(|p| p / total).collect(),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Pearson goodness-of-fit. Adjacent bins with expected count below 5 are
/// merged before the statistic; the p-value is the upper tail of the
/// chi-square distribution with (bins - 1) degrees of freedom.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult, StatsError> {
    assert_eq!(observed.len(), expected.len());
    let mut merged: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        acc_o += o as f64;
        acc_e += e;
        if acc_e >= 5.0 {
            merged.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        // fold the small remainder into the last kept bin
        if let Some(last) = merged.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        }
    }
    if merged.len() < 2 {
        return Err(StatsError::DegenerateBins);
    }
    let statistic: f64 = merged
        .iter()
        .map(|&(o, e)| {
            let d = o - e;
            d * d / e
        })
        .sum();
    let dof = (merged.len() - 1) as u64;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Two-sample homogeneity test over aligned count vectors (2 x k
/// contingency); columns with small expected counts merge rightward.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquareResult, StatsError> {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().map(|&x| x as f64).sum();
    let nb: f64 = b.iter().map(|&x| x as f64).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(StatsError::InsufficientData {
            needed: 1,
            got: 0,
        });
    }
    let total = na + nb;
    // merge columns until each expected cell is >= 5
    let mut cols: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        acc.0 += x as f64;
        acc.1 += y as f64;
        let col_total = acc.0 + acc.1;
        if col_total * na / total >= 5.0 && col_total * nb / total >= 5.0 {
            cols.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        if let Some(last) = cols.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        }
    }
    if cols.len() < 2 {
        return Err(StatsError::DegenerateBins);
    }
    let mut statistic = 0.0;
    for &(x, y) in &cols {
        let col_total = x + y;
        let ea = col_total * na / total;
        let eb = col_total * nb / total;
        statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
    }
    let dof = (cols.len() - 1) as u64;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Distribution test report for one campaign cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistReport {
    pub label: String,
    pub support_start: i64,
    pub observed: Vec<u64>,
    pub empirical: Vec<f64>,
    pub target: Vec<f64>,
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub samples: u64,
}

/// Bins integer samples over the PMF support (values outside clamp to the
/// edges; their probability is far below test resolution).
pub fn count_samples<I: IntoIterator<Item = i64>>(samples: I, pmf: &Pmf) -> Vec<u64> {
    let mut counts = vec![0u64; pmf.probs.len()];
    let end = pmf.end();
    for s in samples {
        let k = s.clamp(pmf.start, end);
        counts[(k - pmf.start) as usize] += 1;
    }
    counts
}

pub fn dist_report(
    label: &str,
    observed: Vec<u64>,
    pmf: &Pmf,
) -> Result<DistReport, StatsError> {
    let n: u64 = observed.iter().sum();
    if n < 10_000 {
        return Err(StatsError::InsufficientData {
            needed: 10_000,
            got: n,
        });
    }
    let expected: Vec<f64> = pmf.probs.iter().map(|p| p * n as f64).collect();
    let result = chi_square(&observed, &expected)?;
    Ok(DistReport {
        label: label.to_string(),
        support_start: pmf.start,
        empirical: observed.iter().map(|&o| o as f64 / n as f64).collect(),
        observed,
        target: pmf.probs.clone(),
        statistic: result.statistic,
        dof: result.dof,
        p_value: result.p_value,
        samples: n,
    })
}

/// Executions binned by rejection count: 0..5 and >= 6.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FailureHistogram {
    pub counts: [u64; 7],
    pub total: u64,
}

impl FailureHistogram {
    pub fn record(&mut self, failures: u32) {
        let bin = (failures as usize).min(6);
        self.counts[bin] += 1;
        self.total += 1;
    }

    pub fn ratios(&self) -> [f64; 7] {
        let mut r = [0.0; 7];
        if self.total > 0 {
            for (i, &c) in self.counts.iter().enumerate() {
                r[i] = c as f64 / self.total as f64;
            }
        }
        r
    }

    /// Aligned text table, one row of executions and one of percentages.
    pub fn render_table(&self) -> String {
        let mut header = format!("{:<12}", "# Failures");
        let mut execs = format!("{:<12}", "Executions");
        let mut ratios = format!("{:<12}", "Ratio (%)");
        let labels = ["0", "1", "2", "3", "4", "5", ">=6"];
        for (i, label) in labels.iter().enumerate() {
            header.push_str(&format!("{label:>10}"));
            execs.push_str(&format!("{:>10}", self.counts[i]));
            ratios.push_str(&format!("{:>10.2}", self.ratios()[i] * 100.0));
        }
        header.push_str(&format!("{:>10}", "Total"));
        execs.push_str(&format!("{:>10}", self.total));
        ratios.push_str(&format!("{:>10.2}", 100.0));
        format!("{header}\n{execs}\n{ratios}")
    }
}

/// Bins per-execution rejection counts.
pub fn failure_histogram<I: IntoIterator<Item = u32>>(counts: I) -> FailureHistogram {
    let mut h = FailureHistogram::default();
    for c in counts {
        h.record(c);
    }
    h
}

/// Fraction of assistance rounds that complete the task. Each switch episode
/// ends in exactly one completing round, so the rate is
/// `switch_episodes / aloop_rounds`.
pub fn assisted_success_rate(traces: &[FsmTrace]) -> Result<f64, StatsError> {
    let rounds: u64 = traces.iter().map(|t| t.aloop_rounds as u64).sum();
    let successes: u64 = traces.iter().map(|t| t.switches as u64).sum();
    if rounds < 10_000 {
        return Err(StatsError::InsufficientData {
            needed: 10_000,
            got: rounds,
        });
    }
    Ok(successes as f64 / rounds as f64)
}

/// Renyi divergence of order `alpha` between aligned PMFs (diagnostic only).
pub fn renyi_divergence(p: &Pmf, q: &Pmf, alpha: f64) -> f64 {
    assert!(alpha > 1.0);
    assert_eq!(p.start, q.start);
    assert_eq!(p.probs.len(), q.probs.len());
    let mut sum = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi > 0.0 && qi > 0.0 {
            sum += pi.powf(alpha) / qi.powf(alpha - 1.0);
        }
    }
    sum.ln() / (alpha - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::{synthetic_traces, RejectionModel};
    use crate::fsm::Policy;
    use crate::prng::StreamRng;

    #[test]
    fn target_pmf_symmetries() {
        let pmf = target_pmf(0.0, 1.5, -31, 31);
        for k in 0..=30i64 {
            assert!((pmf.prob(k) - pmf.prob(-k)).abs() < 1e-15);
        }
        let pmf = target_pmf(0.5, 1.5, -31, 31);
        assert!((pmf.prob(0) - pmf.prob(1)).abs() < 1e-15);

        // pmf(0)/pmf(1) = exp(1/(2 * 1.5^2))
        let pmf = target_pmf(0.0, 1.5, -31, 31);
        let ratio = pmf.prob(0) / pmf.prob(1);
        assert!((ratio - (1.0f64 / 4.5).exp()).abs() < 1e-12);

        let total: f64 = pmf.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chi_square_exact_match_scores_zero() {
        let expected = [2000.0, 3000.0, 5000.0];
        let observed = [2000u64, 3000, 5000];
        let r = chi_square(&observed, &expected).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn chi_square_merges_small_bins() {
        // Three tiny bins below 5 expected fold into their neighbors.
        let expected = [0.5, 0.5, 100.0, 100.0, 0.5];
        let observed = [1u64, 0, 100, 100, 0];
        let r = chi_square(&observed, &expected).unwrap();
        assert_eq!(r.dof, 1); // merged to 2 bins
        let err = chi_square(&[1u64, 1], &[0.5, 0.5]);
        assert!(matches!(err, Err(StatsError::DegenerateBins)));
    }

    #[test]
    fn chi_square_detects_wrong_sigma() {
        // 10^6 draws from sigma = 1.65 tested against sigma = 1.5.
        let wrong = target_pmf(0.0, 1.65, -31, 31);
        let claimed = target_pmf(0.0, 1.5, -31, 31);
        let mut rng = StreamRng::new([4u8; 32]);
        let n = 1_000_000u64;
        let mut counts = vec![0u64; claimed.probs.len()];
        // inverse-CDF sampling from the wrong PMF
        for _ in 0..n {
            let x = rng.next_f64();
            let mut acc = 0.0;
            for (i, &p) in wrong.probs.iter().enumerate() {
                acc += p;
                if x < acc {
                    counts[i] += 1;
                    break;
                }
            }
        }
        let expected: Vec<f64> = claimed.probs.iter().map(|p| p * n as f64).collect();
        let r = chi_square(&counts, &expected).unwrap();
        assert!(r.p_value < 1e-6, "power check failed: p = {}", r.p_value);
    }

    #[test]
    fn chi_square_self_consistency() {
        // Draws from the target itself should pass at the 0.01 level in at
        // least 98 of 100 repetitions.
        let pmf = target_pmf(0.0, 1.5, -31, 31);
        let cdf: Vec<f64> = pmf
            .probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut rng = StreamRng::new([8u8; 32]);
        let n = 1_000_000u64;
        let mut passes = 0;
        for _ in 0..100 {
            let mut counts = vec![0u64; pmf.probs.len()];
            let last = counts.len() - 1;
            for _ in 0..n {
                let x = rng.next_f64();
                let idx = cdf.partition_point(|&c| c <= x);
                counts[idx.min(last)] += 1;
            }
            let expected: Vec<f64> = pmf.probs.iter().map(|p| p * n as f64).collect();
            if chi_square(&counts, &expected).unwrap().p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 98, "only {passes}/100 repetitions passed");
    }

    #[test]
    fn failure_histogram_bins_and_ratios() {
        let h = failure_histogram([0u32, 0, 1, 2, 9, 6, 0, 3].into_iter());
        assert_eq!(h.total, 8);
        assert_eq!(h.counts, [3, 1, 1, 1, 0, 0, 2]);
        let table = h.render_table();
        assert!(table.contains("Executions"));
        assert!(table.contains("Total"));
    }

    #[test]
    fn assisted_rate_on_synthetic_traces() {
        // p = 0.5 makes each assisted round succeed with 1 - 0.25 = 0.75.
        let traces = synthetic_traces(
            Policy::WithAssist,
            RejectionModel::geometric(0.5),
            60_000,
            [13u8; 32],
        )
        .unwrap();
        let rate = assisted_success_rate(&traces).unwrap();
        assert!((rate - 0.75).abs() < 0.01, "rate {rate}");

        // p = 1: no task ever enters ALOOP, so the rate is undefined.
        let traces = synthetic_traces(
            Policy::WithAssist,
            RejectionModel::geometric(1.0),
            1_000,
            [13u8; 32],
        )
        .unwrap();
        assert!(matches!(
            assisted_success_rate(&traces),
            Err(StatsError::InsufficientData { .. })
        ));
    }

    #[test]
    fn renyi_is_zero_for_identical_pmfs() {
        let p = target_pmf(0.0, 1.5, -31, 31);
        let d = renyi_divergence(&p, &p, 2.0);
        assert!(d.abs() < 1e-12);
        let q = target_pmf(0.1, 1.5, -31, 31);
        assert!(renyi_divergence(&p, &q, 2.0) > 0.0);
    }

    #[test]
    fn two_sample_test_accepts_same_source() {
        let pmf = target_pmf(0.0, 1.5, -31, 31);
        let mut rng = StreamRng::new([2u8; 32]);
        let mut draw = |n: u64| {
            let mut counts = vec![0u64; pmf.probs.len()];
            for _ in 0..n {
                let x = rng.next_f64();
                let mut acc = 0.0;
                for (i, &p) in pmf.probs.iter().enumerate() {
                    acc += p;
                    if x < acc {
                        counts[i] += 1;
                        break;
                    }
                }
            }
            counts
        };
        let a = draw(200_000);
        let b = draw(200_000);
        let r = chi_square_two_sample(&a, &b).unwrap();
        assert!(r.p_value > 0.001, "p = {}", r.p_value);
    }
}
