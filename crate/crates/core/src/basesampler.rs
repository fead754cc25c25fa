//! Base half-Gaussian sampling through a reverse cumulative distribution table.
//!
//! The table holds 18 strictly decreasing 72-bit tail weights of the
//! half-Gaussian with parameter `SIGMA_MAX`; counting how many entries exceed
//! a uniform 72-bit draw yields `z0 in [0, 18]`. Two functionally equivalent
//! lookups are provided: the counter-sum form and the transition-scan form
//! that mirrors the one-hot selection of a priority encoder.

use crate::prng::U144;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

pub const RCDT_LEN: usize = 18;

/// Largest base sample value.
pub const Z0_MAX: u32 = 18;

/// Reverse CDT for the half-Gaussian with sigma_max = 1.8205, quantized to 72
/// bits per element (tail sums of `floor(2^72 * rho(k) / norm)`), identical to
/// the Falcon reference table. Regenerated from first principles by the test
/// suite and checked against [`RCDT_SHA256`].
const FALCON_RCDT: [u128; RCDT_LEN] = [
    3024686241123004913666,
    1564742784480091954050,
    636254429462080897535,
    199560484645026482916,
    47667343854657281903,
    8595902006365044063,
    1163297957344668388,
    117656387352093658,
    8867391802663976,
    496969357462633,
    20680885154299,
    638331848991,
    14602316184,
    247426747,
    3104126,
    28824,
    198,
    1,
];

/// SHA-256 of the 18 entries encoded as 16-byte big-endian words.
pub const RCDT_SHA256: &str = "9a96b1f58376451dffc1d15544faf2d3083c00ff3da11d747625e14cadeac8bc";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RcdtError {
    /// Entries must be strictly decreasing, below 2^72, and end above zero.
    InvalidTable(String),
}

impl fmt::Display for RcdtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RcdtError::InvalidTable(msg) => write!(f, "invalid RCDT: {msg}"),
        }
    }
}

impl std::error::Error for RcdtError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rcdt {
    entries: [u128; RCDT_LEN],
}

impl Rcdt {
    /// The embedded Falcon table.
    pub fn falcon() -> Rcdt {
        Rcdt {
            entries: FALCON_RCDT,
        }
    }

    pub fn new(entries: [u128; RCDT_LEN]) -> Result<Rcdt, RcdtError> {
        if entries[0] >= 1 << 72 {
            return Err(RcdtError::InvalidTable("entries[0] >= 2^72".into()));
        }
        if entries[RCDT_LEN - 1] == 0 {
            return Err(RcdtError::InvalidTable("last entry is zero".into()));
        }
        for i in 0..RCDT_LEN - 1 {
            if entries[i] <= entries[i + 1] {
                return Err(RcdtError::InvalidTable(format!(
                    "entries[{i}] <= entries[{}]",
                    i + 1
                )));
            }
        }
        Ok(Rcdt { entries })
    }

    pub fn entries(&self) -> &[u128; RCDT_LEN] {
        &self.entries
    }

    /// SHA-256 over the canonical big-endian encoding.
    pub fn checksum_hex(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update(e.to_be_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The PMF over z0 implied by the table: p(0) carries the mass above
    /// entries[0], p(i) the gap between consecutive entries, p(18) the final
    /// tail.
    pub fn implied_pmf(&self) -> [f64; RCDT_LEN + 1] {
        const TOTAL: f64 = 4722366482869645213696.0; // 2^72
        let mut pmf = [0.0; RCDT_LEN + 1];
        let mut prev = 1u128 << 72;
        for (i, &e) in self.entries.iter().enumerate() {
            pmf[i] = (prev - e) as f64 / TOTAL;
            prev = e;
        }
        pmf[RCDT_LEN] = self.entries[RCDT_LEN - 1] as f64 / TOTAL;
        pmf
    }

    /// JSON array of 18 decimal strings, for golden-vector interchange.
    pub fn to_json(&self) -> String {
        let strings: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        serde_json::to_string(&strings).expect("string array serializes")
    }

    pub fn from_json(json: &str) -> Result<Rcdt, RcdtError> {
        let strings: Vec<String> = serde_json::from_str(json)
            .map_err(|e| RcdtError::InvalidTable(format!("bad JSON: {e}")))?;
        if strings.len() != RCDT_LEN {
            return Err(RcdtError::InvalidTable(format!(
                "expected {RCDT_LEN} entries, got {}",
                strings.len()
            )));
        }
        let mut entries = [0u128; RCDT_LEN];
        for (i, s) in strings.iter().enumerate() {
            entries[i] = s
                .parse()
                .map_err(|_| RcdtError::InvalidTable(format!("entry {i} not a decimal integer")))?;
        }
        Rcdt::new(entries)
    }

    /// Fault-injection table: entry 2 shrunk by 1/64 of its value, still
    /// strictly decreasing. Skews p(2)/p(3) enough for a goodness-of-fit test
    /// to flag at campaign scale.
    pub fn skewed_test_table() -> Rcdt {
        let mut entries = FALCON_RCDT;
        entries[2] -= entries[2] / 64;
        Rcdt::new(entries).expect("skewed table still valid")
    }
}

impl Serialize for Rcdt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.entries.iter().map(|e| e.to_string()).collect();
        strings.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rcdt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let strings: Vec<String> = Vec::deserialize(d)?;
        if strings.len() != RCDT_LEN {
            return Err(serde::de::Error::custom("expected 18 entries"));
        }
        let mut entries = [0u128; RCDT_LEN];
        for (i, s) in strings.iter().enumerate() {
            entries[i] = s.parse().map_err(serde::de::Error::custom)?;
        }
        Rcdt::new(entries).map_err(serde::de::Error::custom)
    }
}

/// Counter-sum form: `z0 = |{ i : u < entries[i] }|`.
pub fn z0_counter(u: u128, t: &Rcdt) -> u32 {
    t.entries.iter().filter(|&&e| u < e).count() as u32
}

/// Transition-scan form: the comparison bits form a run of ones followed by
/// zeros; locating the single 1->0 transition yields the run length. Models
/// the XOR-cascade/one-hot selection of the hardware base sampler.
pub fn z0_scan(u: u128, t: &Rcdt) -> u32 {
    let mut bits = [false; RCDT_LEN + 1];
    for i in 0..RCDT_LEN {
        bits[i] = u < t.entries[i];
    }
    // bits[18] stays false; a transition at position i selects index i + 1.
    let mut selected: Option<u32> = None;
    for i in 0..RCDT_LEN {
        if bits[i] && !bits[i + 1] {
            debug_assert!(selected.is_none(), "comparison bits not monotone");
            selected = Some(i as u32 + 1);
        }
    }
    selected.unwrap_or(0)
}

/// Splits a 144-bit draw and scans both halves independently.
pub fn sample_pair(u: &U144, t: &Rcdt) -> (u32, u32) {
    (z0_scan(u.low72(), t), z0_scan(u.high72(), t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_is_frozen() {
        assert_eq!(Rcdt::falcon().checksum_hex(), RCDT_SHA256);
    }

    #[test]
    fn counter_boundaries() {
        let t = Rcdt::falcon();
        assert_eq!(z0_counter((1 << 72) - 1, &t), 0);
        assert_eq!(z0_counter(0, &t), 18);
        assert_eq!(z0_counter(t.entries()[0], &t), 0);
        assert_eq!(z0_counter(t.entries()[0] - 1, &t), 1);
    }

    #[test]
    fn scan_boundaries() {
        let t = Rcdt::falcon();
        assert_eq!(z0_scan((1 << 72) - 1, &t), 0); // all comparison bits zero
        assert_eq!(z0_scan(0, &t), 18); // full run of ones
        assert_eq!(z0_scan(t.entries()[17], &t), 17);
        assert_eq!(z0_scan(t.entries()[17] - 1, &t), 18);
    }

    #[test]
    fn scan_equals_counter_at_all_boundaries() {
        let t = Rcdt::falcon();
        let mut points = vec![0u128, (1 << 72) - 1];
        for &e in t.entries() {
            points.push(e);
            points.push(e + 1);
            points.push(e - 1);
        }
        for u in points {
            assert_eq!(z0_scan(u, &t), z0_counter(u, &t), "u = {u}");
        }
    }

    #[test]
    fn sample_pair_corners() {
        let t = Rcdt::falcon();
        assert_eq!(sample_pair(&U144::from_bytes([0u8; 18]), &t), (18, 18));
        assert_eq!(sample_pair(&U144::from_bytes([0xFF; 18]), &t), (0, 0));
        let mut bytes = [0u8; 18];
        for b in bytes.iter_mut().skip(9) {
            *b = 0xFF;
        }
        assert_eq!(sample_pair(&U144::from_bytes(bytes), &t), (18, 0));
    }

    #[test]
    fn table_validation() {
        let mut entries = *Rcdt::falcon().entries();
        entries[5] = entries[4]; // break strict descent
        assert!(Rcdt::new(entries).is_err());
        let mut entries = *Rcdt::falcon().entries();
        entries[0] = 1 << 72;
        assert!(Rcdt::new(entries).is_err());
        let mut entries = *Rcdt::falcon().entries();
        entries[17] = 0;
        assert!(Rcdt::new(entries).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = Rcdt::falcon();
        let json = t.to_json();
        assert_eq!(Rcdt::from_json(&json).unwrap(), t);
        assert!(json.contains("\"3024686241123004913666\""));
    }

    #[test]
    fn implied_pmf_sums_to_one() {
        let pmf = Rcdt::falcon().implied_pmf();
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(pmf[0] > pmf[1]); // mass decreasing from zero outward
    }

    #[test]
    fn skewed_table_is_valid_but_different() {
        let skewed = Rcdt::skewed_test_table();
        assert_ne!(skewed, Rcdt::falcon());
        assert_ne!(skewed.checksum_hex(), RCDT_SHA256);
    }
}
