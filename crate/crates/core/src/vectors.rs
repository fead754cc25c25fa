//! Golden-vector files: line-oriented records pinning sampler outputs and
//! byte consumption for regression interchange.
//!
//! Format (whitespace-separated, `#` comments):
//!
//! ```text
//! # samplerz vectors v1 params=falcon512 policy=with_assist
//! <seed 64 hex> <mu_l> <mu_r> <sigma> <z_l> <z_r> <bytes_l> <bytes_r>
//! ```
//!
//! Floats print in shortest round-trip form, so files replay bit-exactly.

use crate::campaign::{derive_subseeds, TaskGen};
use crate::campaign::{MuDist, SigmaDist};
use crate::fsm::{DualSampler, Policy};
use crate::params::{ParamSet, SamplerParams};
use crate::prng::{seed_from_hex, seed_to_hex, Lane, RandomLanes, RefillControl, Seed};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorLine {
    pub seed: Seed,
    pub mu_l: f64,
    pub mu_r: f64,
    pub sigma_prime: f64,
    pub z_l: f64,
    pub z_r: f64,
    pub bytes_l: u64,
    pub bytes_r: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorError {
    BadHeader(String),
    BadLine { line: usize, reason: String },
    Mismatch { line: usize, detail: String },
}

impl fmt::Display for VectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorError::BadHeader(h) => write!(f, "bad vector header: {h}"),
            VectorError::BadLine { line, reason } => write!(f, "line {line}: {reason}"),
            VectorError::Mismatch { line, detail } => write!(f, "line {line} mismatch: {detail}"),
        }
    }
}

impl std::error::Error for VectorError {}

fn run_vector_task(
    sampler: &DualSampler,
    seed: &Seed,
    mu_l: f64,
    mu_r: f64,
    sigma_prime: f64,
    policy: Policy,
) -> Result<VectorLine, String> {
    let mut lanes = RefillControl::new(*seed);
    let task = crate::kernel::SampleTask {
        mu_l,
        mu_r,
        sigma_prime,
    };
    let res = sampler
        .run_task(&task, &mut lanes, policy)
        .map_err(|e| e.to_string())?;
    Ok(VectorLine {
        seed: *seed,
        mu_l,
        mu_r,
        sigma_prime,
        z_l: res.z_l,
        z_r: res.z_r,
        bytes_l: lanes.lane_consumed(Lane::Left),
        bytes_r: lanes.lane_consumed(Lane::Right),
    })
}

/// Generates `count` vectors; each line gets its own sampler seed and task
/// drawn from the master seed.
pub fn emit(
    sampler: &DualSampler,
    policy: Policy,
    count: usize,
    master_seed: &Seed,
) -> Result<String, VectorError> {
    let (mut line_seed, taskgen_seed) = derive_subseeds(master_seed);
    let mut gen = TaskGen::new(
        taskgen_seed,
        *sampler.params(),
        MuDist::Uniform,
        SigmaDist::Uniform,
    );
    let mut out = format!(
        "# samplerz vectors v1 params={} policy={}\n",
        sampler.params().set,
        policy
    );
    let mut seed_stream = crate::prng::StreamRng::new(line_seed);
    for i in 0..count {
        crate::prng::ByteStream::fill_bytes(&mut seed_stream, &mut line_seed);
        let task = gen.next_task();
        let v = run_vector_task(
            sampler,
            &line_seed,
            task.mu_l,
            task.mu_r,
            task.sigma_prime,
            policy,
        )
        .map_err(|reason| VectorError::BadLine { line: i + 2, reason })?;
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            seed_to_hex(&v.seed),
            v.mu_l,
            v.mu_r,
            v.sigma_prime,
            v.z_l,
            v.z_r,
            v.bytes_l,
            v.bytes_r
        ));
    }
    Ok(out)
}

fn parse_header(header: &str) -> Result<(ParamSet, Policy), VectorError> {
    let err = || VectorError::BadHeader(header.to_string());
    if !header.starts_with("# samplerz vectors v1") {
        return Err(err());
    }
    let mut params = None;
    let mut policy = None;
    for token in header.split_whitespace() {
        if let Some(v) = token.strip_prefix("params=") {
            params = Some(match v {
                "falcon512" => ParamSet::Falcon512,
                "falcon1024" => ParamSet::Falcon1024,
                _ => return Err(err()),
            });
        } else if let Some(v) = token.strip_prefix("policy=") {
            policy = Some(v.parse::<Policy>().map_err(|_| err())?);
        }
    }
    match (params, policy) {
        (Some(p), Some(pol)) => Ok((p, pol)),
        _ => Err(err()),
    }
}

/// Replays every line and verifies outputs and byte-consumption counts.
/// Returns the number of verified vectors.
pub fn check(content: &str) -> Result<usize, VectorError> {
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| VectorError::BadHeader("empty file".into()))?;
    let (set, policy) = parse_header(header)?;
    let params = match set {
        ParamSet::Falcon512 => SamplerParams::falcon512(),
        ParamSet::Falcon1024 => SamplerParams::falcon1024(),
        ParamSet::Custom => unreachable!("header parser rejects custom"),
    };
    let sampler = DualSampler::new(params);

    let mut verified = 0;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(VectorError::BadLine {
                line: line_no,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let seed = seed_from_hex(fields[0]).ok_or_else(|| VectorError::BadLine {
            line: line_no,
            reason: "bad seed hex".into(),
        })?;
        let parse_f = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| VectorError::BadLine {
                line: line_no,
                reason: format!("bad {what}"),
            })
        };
        let parse_u = |s: &str, what: &str| {
            s.parse::<u64>().map_err(|_| VectorError::BadLine {
                line: line_no,
                reason: format!("bad {what}"),
            })
        };
        let expected = VectorLine {
            seed,
            mu_l: parse_f(fields[1], "mu_l")?,
            mu_r: parse_f(fields[2], "mu_r")?,
            sigma_prime: parse_f(fields[3], "sigma")?,
            z_l: parse_f(fields[4], "z_l")?,
            z_r: parse_f(fields[5], "z_r")?,
            bytes_l: parse_u(fields[6], "bytes_l")?,
            bytes_r: parse_u(fields[7], "bytes_r")?,
        };
        let actual = run_vector_task(
            &sampler,
            &seed,
            expected.mu_l,
            expected.mu_r,
            expected.sigma_prime,
            policy,
        )
        .map_err(|reason| VectorError::BadLine {
            line: line_no,
            reason,
        })?;
        if actual != expected {
            return Err(VectorError::Mismatch {
                line: line_no,
                detail: format!(
                    "expected z=({}, {}) bytes=({}, {}), got z=({}, {}) bytes=({}, {})",
                    expected.z_l,
                    expected.z_r,
                    expected.bytes_l,
                    expected.bytes_r,
                    actual.z_l,
                    actual.z_r,
                    actual.bytes_l,
                    actual.bytes_r
                ),
            });
        }
        verified += 1;
    }
    Ok(verified)
}
