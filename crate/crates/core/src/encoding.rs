//! Fixed-length bitstring chromosomes and their decoding to quantities.
//!
//! Bit `k` (1-based) carries weight `2^(k-1)`; bit 1 is the least significant.
//! The text form is most significant bit first.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_BITS: u32 = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    bits: u64,
    len: u8,
}

fn mask(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl Chromosome {
    /// Chromosome of `len` bits with integer value `value`.
    pub fn new(value: u64, len: u32) -> Result<Self> {
        if len == 0 || len > MAX_BITS {
            return Err(Error::config(format!("chromosome length must be in 1..={MAX_BITS}, got {len}")));
        }
        if value & !mask(len) != 0 {
            return Err(Error::config(format!("value {value} does not fit in {len} bits")));
        }
        Ok(Chromosome { bits: value, len: len as u8 })
    }

    pub fn zeros(len: u32) -> Result<Self> {
        Self::new(0, len)
    }

    pub fn ones(len: u32) -> Result<Self> {
        Self::new(mask(len), len)
    }

    pub fn len(&self) -> u32 {
        self.len as u32
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unsigned integer value `V = sum_k bit_k 2^(k-1)`.
    pub fn value(&self) -> u64 {
        self.bits
    }

    /// Bit at zero-based position `i` counted from the least significant end.
    pub fn bit(&self, i: u32) -> bool {
        debug_assert!(i < self.len());
        self.bits >> i & 1 == 1
    }

    pub fn flip(self, i: u32) -> Self {
        debug_assert!(i < self.len());
        Chromosome { bits: self.bits ^ (1 << i), ..self }
    }

    pub fn complement(self) -> Self {
        Chromosome { bits: !self.bits & mask(self.len()), ..self }
    }

    /// Keeps the lowest `low_bits` bits of `self` and takes the rest from
    /// `other`.
    pub(crate) fn splice(self, other: Self, low_bits: u32) -> Self {
        let low = mask(low_bits);
        Chromosome { bits: (self.bits & low) | (other.bits & !low), ..self }
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len()).rev() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chromosome({self})")
    }
}

impl FromStr for Chromosome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let len = u32::try_from(s.len()).map_err(|_| Error::config("bitstring too long"))?;
        let mut value = 0u64;
        for ch in s.chars() {
            let bit = match ch {
                '0' => 0,
                '1' => 1,
                other => return Err(Error::config(format!("invalid bit `{other}` in `{s}`"))),
            };
            value = value << 1 | bit;
        }
        Chromosome::new(value, len)
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Chromosome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn hamming(a: &Chromosome, b: &Chromosome) -> Result<u32> {
    if a.len != b.len {
        return Err(Error::config(format!("hamming distance of {}-bit and {}-bit chromosomes", a.len, b.len)));
    }
    Ok((a.bits ^ b.bits).count_ones())
}

/// Sum of Hamming distances of every chromosome to `target`, with the number
/// of chromosomes visited.
pub(crate) fn hamming_total<'a>(
    chromosomes: impl IntoIterator<Item = &'a Chromosome>,
    target: &Chromosome,
) -> Result<(u64, u64)> {
    let mut total = 0u64;
    let mut count = 0u64;
    for c in chromosomes {
        total += u64::from(hamming(c, target)?);
        count += 1;
    }
    Ok((total, count))
}

/// Mean Hamming distance between all chromosomes of all players and the Nash
/// chromosome.
pub fn avg_hamming_to_nash<P: AsRef<[Chromosome]>>(populations: &[P], nash: &Chromosome) -> Result<f64> {
    let (total, count) = hamming_total(populations.iter().flat_map(|p| p.as_ref()), nash)?;
    if count == 0 {
        return Err(Error::config("average Hamming distance of empty populations"));
    }
    Ok(total as f64 / count as f64)
}

/// Affine map from `L`-bit chromosomes onto `[0, q_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityCodec<T> {
    bits: u32,
    q_max: T,
}

impl<T: Scalar> QuantityCodec<T> {
    pub fn new(bits: u32, q_max: T) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::config(format!("chromosome length must be in 1..={MAX_BITS}, got {bits}")));
        }
        if !(q_max > T::zero()) {
            return Err(Error::config(format!("q_max must be positive, got {q_max:?}")));
        }
        Ok(QuantityCodec { bits, q_max })
    }

    /// Codec whose grid contains `q_hat` exactly: `q_max = 3 q_hat`, `L` even.
    pub fn for_nash(bits: u32, q_hat: T) -> Result<Self> {
        if !bits.is_multiple_of(2) {
            return Err(Error::Unsupported(format!(
                "the Nash quantity is only on the grid for even chromosome lengths, got {bits}"
            )));
        }
        let three = T::from_u8(3).unwrap();
        Self::new(bits, q_hat * three)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn q_max(&self) -> &T {
        &self.q_max
    }

    /// Distance between adjacent grid quantities.
    pub fn step(&self) -> T {
        self.q_max.clone() / T::from_u64(mask(self.bits)).unwrap()
    }

    /// `q_max * V / (2^L - 1)`, with `V / (2^L - 1)` reduced first so that
    /// `decode(nash) = q_max / 3` up to a single rounding.
    pub fn decode(&self, c: &Chromosome) -> Result<T> {
        if c.len() != self.bits {
            return Err(Error::config(format!("{}-bit chromosome given to a {}-bit codec", c.len(), self.bits)));
        }
        Ok(self.decode_value(c.value()))
    }

    pub(crate) fn decode_value(&self, value: u64) -> T {
        let denom = mask(self.bits);
        let g = value.gcd(&denom);
        let (num, den) = (value / g, denom / g);
        self.q_max.clone() * T::from_u64(num).unwrap() / T::from_u64(den).unwrap()
    }

    /// The alternating chromosome `0101...01` with value `(2^L - 1) / 3`.
    pub fn nash_chromosome(&self) -> Result<Chromosome> {
        if !self.bits.is_multiple_of(2) {
            return Err(Error::Unsupported(format!(
                "no Nash chromosome for odd length {}",
                self.bits
            )));
        }
        Chromosome::new(0x5555_5555_5555_5555 & mask(self.bits), self.bits)
    }

    /// Bitwise complement of the Nash chromosome, `1010...10`.
    pub fn anti_nash_chromosome(&self) -> Result<Chromosome> {
        self.nash_chromosome().map(Chromosome::complement)
    }
}
