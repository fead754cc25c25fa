//! SamplerZ stage arithmetic in 81-bit fixed point, plus the straightforward
//! double-precision reference path used as the correctness oracle.
//!
//! The pipeline decomposes a single rejection round into the hardware stages:
//! precomputation shared per task (`pre_samp`), per-candidate setup
//! (`bef_loop`), the integer Horner evaluation of `2^63*ccs*exp(-res)`
//! (`for_loop`), the random byte-scan acceptance test (`cmp`), and the final
//! integer-to-float add (`fpr_add`). All fixed-point rounding is truncation,
//! so results are bit-exact functions of their inputs.

use crate::basesampler::Rcdt;
use crate::fxp::Fxp81;
use crate::params::{SamplerParams, SIGMA_MAX};
use crate::prng::ByteStream;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Rejection rounds before a sampling is declared defective. Acceptance
/// probability is bounded below by a constant, so this is unreachable in
/// correct operation.
pub const ITERATION_LIMIT: u32 = 10_000;

/// Centers beyond this magnitude are rejected; keeps `z + floor(mu)` exact in
/// a double.
pub const MU_LIMIT: f64 = 1099511627776.0; // 2^40

const TWO63: f64 = 9223372036854775808.0;

/// `floor(LN_2 * 2^72)` for the IEEE-754 double LN_2.
pub const LN2_RAW: u128 = 3273295013171879739392;
/// `floor((1/LN_2) * 2^72)` for the IEEE-754 double reciprocal.
pub const INV_LN2_RAW: u128 = 6812934706096293019648;

const ILN2: f64 = 1.4426950408889634;
const LN2: f64 = std::f64::consts::LN_2;

/// ln(2) as a stored pipeline constant.
pub fn ln2_fx() -> Fxp81 {
    Fxp81::from_raw(LN2_RAW)
}

/// 1/ln(2) as a stored pipeline constant.
pub fn inv_ln2_fx() -> Fxp81 {
    Fxp81::from_raw(INV_LN2_RAW)
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    SigmaOutOfRange {
        sigma: f64,
        min: f64,
        max: f64,
    },
    BadCenter(f64),
    /// Rejection loop exceeded [`ITERATION_LIMIT`]; diagnostic failure.
    IterationLimit,
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::SigmaOutOfRange { sigma, min, max } => {
                write!(f, "sigma' = {sigma} outside [{min}, {max}]")
            }
            KernelError::BadCenter(mu) => write!(f, "center {mu} not finite or too large"),
            KernelError::IterationLimit => {
                write!(f, "rejection loop exceeded {ITERATION_LIMIT} rounds")
            }
        }
    }
}

impl std::error::Error for KernelError {}

/// Coefficients of the degree-12 polynomial approximating `2^63 * exp(-x)` on
/// `[0, ln 2]`, evaluated by integer Horner recurrence. Taken from the Falcon
/// reference implementation (FACCT-derived) and validated by the polynomial
/// accuracy tests rather than trusted as transcribed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpCoeffs {
    pub c: [u64; 13],
}

impl ExpCoeffs {
    pub fn falcon() -> ExpCoeffs {
        ExpCoeffs {
            c: [
                0x00000004741183A3,
                0x00000036548CFC06,
                0x0000024FDCBF140A,
                0x0000171D939DE045,
                0x0000D00CF58F6F84,
                0x000680681CF796E3,
                0x002D82D8305B0FEA,
                0x011111110E066FD0,
                0x0555555555070F00,
                0x155555555581FF00,
                0x400000000002B400,
                0x7FFFFFFFFFFF4800,
                0x8000000000000000,
            ],
        }
    }
}

/// Precomputed lookup tables: `T[z0] = z0^2/(2*sigma_max^2)` in fixed point
/// for the rejection exponent, and the float value of every reachable `z` so
/// the final add needs no int-to-float converter.
#[derive(Debug, Clone)]
pub struct GaussLut {
    t: [Fxp81; 19],
    zf: [f64; 38],
}

impl GaussLut {
    pub fn new() -> GaussLut {
        let inv = Fxp81::from_double(1.0 / (2.0 * SIGMA_MAX * SIGMA_MAX))
            .expect("1/(2 sigma_max^2) is in range");
        let mut t = [Fxp81::ZERO; 19];
        for (z0, slot) in t.iter_mut().enumerate() {
            *slot = Fxp81::from_int((z0 * z0) as u32).mul(inv);
        }
        let mut zf = [0.0; 38];
        for (i, slot) in zf.iter_mut().enumerate() {
            *slot = i as f64 - 18.0;
        }
        GaussLut { t, zf }
    }

    pub fn t(&self, z0: u32) -> Fxp81 {
        self.t[z0 as usize]
    }

    /// Float representation of `z`, `z in [-18, 19]`.
    pub fn zf(&self, z: i32) -> f64 {
        self.zf[(z + 18) as usize]
    }
}

impl Default for GaussLut {
    fn default() -> Self {
        GaussLut::new()
    }
}

/// One leaf-level sampling job: two centers sharing a sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleTask {
    pub mu_l: f64,
    pub mu_r: f64,
    pub sigma_prime: f64,
}

impl SampleTask {
    pub fn validate(&self, params: &SamplerParams) -> Result<(), KernelError> {
        if !params.contains_sigma(self.sigma_prime) {
            return Err(KernelError::SigmaOutOfRange {
                sigma: self.sigma_prime,
                min: params.sigma_min,
                max: params.sigma_max,
            });
        }
        for mu in [self.mu_l, self.mu_r] {
            if !mu.is_finite() || mu.abs() > MU_LIMIT {
                return Err(KernelError::BadCenter(mu));
            }
        }
        Ok(())
    }
}

/// Task-invariant values computed once per sampling job.
#[derive(Debug, Clone)]
pub struct PreComputed {
    /// Fractional offsets `mu - floor(mu)` per path (left = 0, right = 1).
    pub r: [Fxp81; 2],
    pub floor_mu: [i64; 2],
    /// `sigma_min / sigma'`, the scaling that makes runtime sigma-independent.
    pub ccs: Fxp81,
    /// `1/(2 sigma'^2)`.
    pub inv_2sigma2: Fxp81,
}

/// Shared per-task precomputation. The two divisions run in double precision
/// and convert losslessly: both quotients have binary exponent >= -3.
pub fn pre_samp(task: &SampleTask, params: &SamplerParams) -> Result<PreComputed, KernelError> {
    task.validate(params)?;
    let mut r = [Fxp81::ZERO; 2];
    let mut floor_mu = [0i64; 2];
    for (i, mu) in [task.mu_l, task.mu_r].into_iter().enumerate() {
        let fl = mu.floor();
        r[i] = Fxp81::from_double(mu - fl).expect("fractional part is in [0, 1)");
        floor_mu[i] = fl as i64;
    }
    let ccs = Fxp81::from_double(params.sigma_min / task.sigma_prime)
        .expect("ccs is in (0, 1]");
    let inv_2sigma2 = Fxp81::from_double(1.0 / (2.0 * task.sigma_prime * task.sigma_prime))
        .expect("1/(2 sigma'^2) is in range");
    Ok(PreComputed {
        r,
        floor_mu,
        ccs,
        inv_2sigma2,
    })
}

/// Working state of one datapath between stages.
#[derive(Debug, Clone)]
pub struct PathState {
    pub z0: u32,
    pub b: bool,
    /// Candidate `z = b + (2b - 1) z0`, in `[-18, 19]`.
    pub z: i32,
    /// Rejection exponent `(z - r)^2/(2 sigma'^2) - z0^2/(2 sigma_max^2)`.
    pub x: Fxp81,
    /// `min(floor(x / ln 2), 63)`.
    pub s: u32,
    /// Residue `x - floor(x/ln2) * ln2`, in `[0, ln 2)`.
    pub res: Fxp81,
    /// Horner accumulator output.
    pub y: u64,
    pub accepted: bool,
}

/// Per-candidate setup: forms `z`, the rejection exponent, and its `(s, res)`
/// decomposition. `|z - r|` is assembled unsigned: `z0 + r` when b = 0,
/// `z0 + 1 - r` when b = 1.
pub fn bef_loop(z0: u32, b: bool, r: Fxp81, inv_2sigma2: Fxp81, lut: &GaussLut) -> PathState {
    debug_assert!(z0 <= 18);
    let z = if b { z0 as i32 + 1 } else { -(z0 as i32) };
    let abs_z_minus_r = if b {
        Fxp81::from_int(z0 + 1)
            .sub(r)
            .expect("r < 1 keeps z0 + 1 - r positive")
    } else {
        Fxp81::from_int(z0).add(r)
    };
    let sq = abs_z_minus_r.mul(abs_z_minus_r);
    assert!(
        sq.raw() <= (361u128) << 72,
        "(z - r)^2 exceeded the 361 range bound"
    );
    let x = sq
        .mul(inv_2sigma2)
        .sub(lut.t(z0))
        .expect("x >= 0: (z - r)^2 >= z0^2 and sigma' <= sigma_max");

    // s = floor(x / ln 2) via the stored reciprocal. If the truncated product
    // lands one step high (x within an ulp below a multiple of ln 2), the
    // residue saturates to zero, mirroring the reference path's f64 -> u64
    // cast of a slightly negative residue.
    let s_full = x.mul(inv_ln2_fx()).int_part();
    let res = x
        .sub(Fxp81::from_int(s_full).mul(ln2_fx()))
        .unwrap_or(Fxp81::ZERO);
    debug_assert!(res.raw() < 1 << 72, "residue must stay below 1");

    PathState {
        z0,
        b,
        z,
        x,
        s: s_full.min(63),
        res,
        y: 0,
        accepted: false,
    }
}

/// Integer Horner evaluation of `2^63 * ccs * exp(-res)`: twelve iterations of
/// `y <- C[i] - ((z_int * y) >> 63)` over 126-bit intermediate products, then
/// the final ccs scaling. Pure integer arithmetic, bit-exact by construction.
pub fn for_loop(state: &mut PathState, ccs: Fxp81, coeffs: &ExpCoeffs) -> u64 {
    let z_int = state.res.q63();
    debug_assert!(z_int < 1 << 63);
    let mut y = coeffs.c[0];
    for &c in &coeffs.c[1..] {
        y = c - (((z_int as u128 * y as u128) >> 63) as u64);
    }
    let ccs63 = ccs.q63();
    y = ((ccs63 as u128 * y as u128) >> 63) as u64;
    state.y = y;
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CmpOutcome {
    pub accept: bool,
    /// Byte comparisons performed (1..=8); extra iterations happen only on
    /// byte ties.
    pub steps: u32,
}

/// Bernoulli acceptance scan: compares `z_cmp = (2y - 1) >> s` against random
/// bytes from the most significant byte down, stopping at the first nonzero
/// difference. Accepts exactly when the 64 random bits read as an integer are
/// below `z_cmp`.
pub fn cmp<S: ByteStream + ?Sized>(y: u64, s: u32, src: &mut S) -> CmpOutcome {
    debug_assert!(s <= 63);
    // 2y can overflow 64 bits when y = 2^63 (exp(0) with ccs = 1).
    let z_cmp = ((((y as u128) << 1) - 1) >> s) as u64;
    let mut steps = 0;
    let mut w;
    let mut i = 64i32;
    loop {
        i -= 8;
        steps += 1;
        w = src.next_u8() as i32 - ((z_cmp >> i) & 0xFF) as i32;
        if w != 0 || i == 0 {
            break;
        }
    }
    CmpOutcome {
        accept: w < 0,
        steps,
    }
}

/// Final add `z + floor(mu)` through the float LUT; the result is an
/// integer-valued double.
pub fn fpr_add(z: i32, floor_mu: i64, lut: &GaussLut) -> f64 {
    lut.zf(z) + floor_mu as f64
}

/// One accepted sample from the reference path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSample {
    pub z: i64,
    /// Rejected rounds before acceptance.
    pub rejections: u32,
}

fn approx_exp_double(x: f64, ccs: f64, coeffs: &ExpCoeffs) -> u64 {
    let z = (x * TWO63) as u64;
    let mut y = coeffs.c[0];
    for &c in &coeffs.c[1..] {
        y = c - (((z as u128 * y as u128) >> 63) as u64);
    }
    let z = (ccs * TWO63) as u64;
    ((z as u128 * y as u128) >> 63) as u64
}

fn ber_exp_double<S: ByteStream + ?Sized>(
    x: f64,
    ccs: f64,
    coeffs: &ExpCoeffs,
    src: &mut S,
) -> bool {
    let s = (x * ILN2).floor();
    let r = x - s * LN2;
    let s = (s as u64).min(63);
    let z = ((((approx_exp_double(r, ccs, coeffs) as u128) << 1) - 1) >> s) as u64;
    let mut w;
    let mut i = 64i32;
    loop {
        i -= 8;
        w = src.next_u8() as i32 - ((z >> i) & 0xFF) as i32;
        if w != 0 || i == 0 {
            break;
        }
    }
    w < 0
}

/// Straightforward double-precision sampler (single path, loop until accept),
/// consuming the same byte-source abstraction as the fixed-point pipeline.
/// Serves as the correctness oracle for the pipeline's accept/reject
/// decisions and accepted values.
pub fn samplerz_oracle<S: ByteStream + ?Sized>(
    mu: f64,
    sigma_prime: f64,
    params: &SamplerParams,
    rcdt: &Rcdt,
    coeffs: &ExpCoeffs,
    src: &mut S,
) -> Result<OracleSample, KernelError> {
    let task = SampleTask {
        mu_l: mu,
        mu_r: mu,
        sigma_prime,
    };
    task.validate(params)?;
    const INV_2SIGMA_MAX_SQ: f64 = 1.0 / (2.0 * SIGMA_MAX * SIGMA_MAX);
    let floor_mu = mu.floor();
    let r = mu - floor_mu;
    let ccs = params.sigma_min / sigma_prime;
    let dss = 1.0 / (2.0 * sigma_prime * sigma_prime);

    for rejections in 0..ITERATION_LIMIT {
        let u = src.next_u72();
        let z0 = rcdt.entries().iter().filter(|&&e| u < e).count() as i32;
        let b = (src.next_u8() & 1) as i32;
        let z = b + (2 * b - 1) * z0;
        let zf_min_r = z as f64 - r;
        let x = zf_min_r * zf_min_r * dss - ((z0 * z0) as f64) * INV_2SIGMA_MAX_SQ;
        if ber_exp_double(x, ccs, coeffs, src) {
            return Ok(OracleSample {
                z: z as i64 + floor_mu as i64,
                rejections,
            });
        }
    }
    Err(KernelError::IterationLimit)
}
