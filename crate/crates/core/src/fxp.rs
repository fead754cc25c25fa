//! 81-bit unsigned fixed-point arithmetic with 72 fractional bits.
//!
//! A value is stored as `raw / 2^72` with 9 integer bits, so the representable
//! range is `[0, 512)`. Every quantity the sampling pipeline feeds through this
//! type stays at or below `max (z - r)^2 = 361`, which keeps all in-contract
//! products inside the format. All rounding is truncation toward zero; the
//! multiplier computes the full 162-bit product and keeps bits `[152:72]`.
//!
//! Sign is handled by the callers: `z` may be negative, but `(z - r)^2` is
//! always formed from `|z - r|` before it reaches this type.

use std::fmt;

/// Number of fractional bits (the scale is `2^72`).
pub const FRAC_BITS: u32 = 72;

/// Total width of the raw representation.
pub const RAW_BITS: u32 = 81;

const RAW_LIMIT: u128 = 1 << RAW_BITS;
const F64_MANT_BITS: u32 = 52;
/// 2^72 as an f64 (exact, it is a power of two).
const TWO72: f64 = 4722366482869645213696.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FxpError {
    /// Input to `from_double` is negative, >= 512, NaN or infinite.
    OutOfRange(f64),
    /// `sub` called with minuend < subtrahend; in the sampling pipeline this
    /// signals a violated `x >= 0` invariant.
    Underflow,
    /// Hex string is not 21 hex digits or encodes more than 81 bits.
    BadHex,
}

impl fmt::Display for FxpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FxpError::OutOfRange(v) => write!(f, "value {v} not representable in [0, 512)"),
            FxpError::Underflow => write!(f, "fixed-point subtraction underflow"),
            FxpError::BadHex => write!(f, "expected 21 hex digits encoding at most 81 bits"),
        }
    }
}

impl std::error::Error for FxpError {}

/// Unsigned fixed-point value, scale `2^72`, 81 bits total.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fxp81 {
    raw: u128,
}

impl fmt::Debug for Fxp81 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fxp81({} = {})", self.to_hex(), self.to_double())
    }
}

impl Fxp81 {
    pub const ZERO: Fxp81 = Fxp81 { raw: 0 };
    pub const ONE: Fxp81 = Fxp81 { raw: 1 << FRAC_BITS };

    /// Wraps a raw 81-bit integer. Panics if `raw >= 2^81`.
    pub fn from_raw(raw: u128) -> Fxp81 {
        assert!(raw < RAW_LIMIT, "raw value exceeds 81 bits");
        Fxp81 { raw }
    }

    pub fn raw(self) -> u128 {
        self.raw
    }

    /// Small-integer constructor (`v < 512`), exact.
    pub fn from_int(v: u32) -> Fxp81 {
        assert!(v < 512, "integer {v} exceeds the 9 integer bits");
        Fxp81 {
            raw: (v as u128) << FRAC_BITS,
        }
    }

    /// Converts a nonnegative double to fixed point: `floor(v * 2^72)`.
    ///
    /// The conversion is exact (no truncation loss) whenever the binary
    /// exponent of `v` is at least -20, since all 53 significand bits then
    /// land at or above the 2^-72 place.
    pub fn from_double(v: f64) -> Result<Fxp81, FxpError> {
        if !v.is_finite() || v < 0.0 || v >= 512.0 {
            return Err(FxpError::OutOfRange(v));
        }
        if v == 0.0 {
            return Ok(Fxp81::ZERO);
        }
        let bits = v.to_bits();
        let biased = ((bits >> F64_MANT_BITS) & 0x7FF) as i32;
        let frac = (bits & ((1u64 << F64_MANT_BITS) - 1)) as u128;
        // Subnormals have no implicit leading bit and exponent -1022.
        let (mant, exp) = if biased == 0 {
            (frac, -1022i32)
        } else {
            (frac | (1 << F64_MANT_BITS), biased - 1023)
        };
        // v = mant * 2^(exp - 52); raw = floor(mant * 2^(exp - 52 + 72)).
        let shift = exp - F64_MANT_BITS as i32 + FRAC_BITS as i32;
        let raw = if shift >= 0 {
            mant << shift
        } else if shift > -128 {
            mant >> (-shift) as u32
        } else {
            0
        };
        debug_assert!(raw < RAW_LIMIT);
        Ok(Fxp81 { raw })
    }

    /// Nearest double to `raw / 2^72`.
    pub fn to_double(self) -> f64 {
        // u128 -> f64 rounds to nearest; the division by 2^72 is exact.
        self.raw as f64 / TWO72
    }

    /// Fixed-point multiply: full 162-bit product, keep bits `[152:72]`
    /// (floor semantics). The caller guarantees the true product is below 512;
    /// debug builds abort if the discarded top 9 bits are nonzero.
    pub fn mul(self, rhs: Fxp81) -> Fxp81 {
        let (a_hi, a_lo) = ((self.raw >> 64) as u64, self.raw as u64);
        let (b_hi, b_lo) = ((rhs.raw >> 64) as u64, rhs.raw as u64);
        let low = (a_lo as u128) * (b_lo as u128);
        let mid = (a_hi as u128) * (b_lo as u128) + (a_lo as u128) * (b_hi as u128);
        let high = (a_hi as u128) * (b_hi as u128);
        // t = floor(product / 2^64); a_hi, b_hi < 2^17 so t < 2^99.
        let t = (high << 64) + mid + (low >> 64);
        let raw = t >> (FRAC_BITS - 64);
        debug_assert!(
            raw < RAW_LIMIT,
            "fixed-point product overflow: operands {} and {}",
            self.to_hex(),
            rhs.to_hex()
        );
        Fxp81 {
            raw: raw & (RAW_LIMIT - 1),
        }
    }

    /// Exact subtraction; errors if `self < rhs`.
    pub fn sub(self, rhs: Fxp81) -> Result<Fxp81, FxpError> {
        self.raw
            .checked_sub(rhs.raw)
            .map(|raw| Fxp81 { raw })
            .ok_or(FxpError::Underflow)
    }

    /// Exact addition of in-range operands. Panics on overflow past 2^81;
    /// only used to assemble `|z - r|`, which stays below 20.
    pub fn add(self, rhs: Fxp81) -> Fxp81 {
        let raw = self.raw + rhs.raw;
        assert!(raw < RAW_LIMIT, "fixed-point addition overflow");
        Fxp81 { raw }
    }

    /// Right shift (exact division by `2^k`, floor), `k <= 80`.
    pub fn shr(self, k: u32) -> Fxp81 {
        assert!(k <= 80, "shift amount {k} out of range");
        Fxp81 { raw: self.raw >> k }
    }

    /// Integer part, `floor(value)`.
    pub fn int_part(self) -> u32 {
        (self.raw >> FRAC_BITS) as u32
    }

    /// `floor(value * 2^63)` for values below 2 (residues, ccs).
    pub fn q63(self) -> u64 {
        debug_assert!(self.raw < 1 << (FRAC_BITS + 1), "q63 needs value < 2");
        (self.raw >> 9) as u64
    }

    /// 21 hex digits, most-significant first.
    pub fn to_hex(self) -> String {
        format!("{:021x}", self.raw)
    }

    pub fn from_hex(s: &str) -> Result<Fxp81, FxpError> {
        if s.len() != 21 {
            return Err(FxpError::BadHex);
        }
        let raw = u128::from_str_radix(s, 16).map_err(|_| FxpError::BadHex)?;
        if raw >= RAW_LIMIT {
            return Err(FxpError::BadHex);
        }
        Ok(Fxp81 { raw })
    }
}
