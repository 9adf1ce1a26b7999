//! Finite bit strings: cylinder addresses, programs, outputs.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite binary string. The empty prefix addresses the whole space.
///
/// Ordered length-lexicographically, which is also the order of the integer
/// codes `code()`.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Prefix {
    bits: Vec<bool>,
}

impl Prefix {
    pub fn empty() -> Self {
        Prefix { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Prefix { bits }
    }

    pub fn from_slice(bits: &[bool]) -> Self {
        Prefix {
            bits: bits.to_vec(),
        }
    }

    /// `n` copies of `bit`.
    pub fn repeat(bit: bool, n: usize) -> Self {
        Prefix {
            bits: vec![bit; n],
        }
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_value(value: u128, len: usize) -> Self {
        Prefix {
            bits: (0..len).rev().map(|i| (value >> i) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn push(&mut self, b: bool) {
        self.bits.push(b);
    }

    pub fn child(&self, b: bool) -> Prefix {
        let mut p = self.clone();
        p.push(b);
        p
    }

    pub fn parent(&self) -> Option<Prefix> {
        if self.bits.is_empty() {
            None
        } else {
            Some(Prefix::from_slice(&self.bits[..self.bits.len() - 1]))
        }
    }

    /// The `n`-bit prefix; the whole string when `n >= len`.
    pub fn take(&self, n: usize) -> Prefix {
        Prefix::from_slice(&self.bits[..n.min(self.bits.len())])
    }

    pub fn concat(&self, other: &Prefix) -> Prefix {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Prefix { bits }
    }

    pub fn is_prefix_of(&self, other: &Prefix) -> bool {
        other.bits.len() >= self.bits.len() && other.bits[..self.bits.len()] == self.bits[..]
    }

    /// Comparable cylinders: one is a prefix of the other.
    pub fn comparable(&self, other: &Prefix) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// Bits read as a binary number (empty string is 0).
    pub fn value(&self) -> u128 {
        self.bits
            .iter()
            .fold(0u128, |acc, &b| (acc << 1) | b as u128)
    }

    /// Position in the length-lexicographic enumeration ε, 0, 1, 00, ...
    ///
    /// This is the identification of strings with integers used for the
    /// discrete distribution.
    pub fn code(&self) -> u128 {
        assert!(self.len() < 127, "prefix too long for an integer code");
        (1u128 << self.len()) - 1 + self.value()
    }

    pub fn from_code(code: u128) -> Prefix {
        let len = (127 - (code + 1).leading_zeros()) as usize;
        Prefix::from_value(code + 1 - (1u128 << len), len)
    }

    /// Index of this node in a dense table of all prefixes up to some depth.
    pub fn index(&self) -> usize {
        self.code() as usize
    }

    pub fn all_of_length(n: usize) -> impl Iterator<Item = Prefix> {
        assert!(n < 64);
        (0..(1u128 << n)).map(move |v| Prefix::from_value(v, n))
    }

    /// All prefixes of length at most `n`, length-lexicographically.
    pub fn all_up_to(n: usize) -> impl Iterator<Item = Prefix> {
        (0..=n).flat_map(Prefix::all_of_length)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Big-endian packed bytes, zero padded on the right.
    pub fn packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn from_packed(bytes: &[u8], len: usize) -> Prefix {
        Prefix {
            bits: (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect(),
        }
    }
}

impl Ord for Prefix {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bits
            .len()
            .cmp(&other.bits.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for Prefix {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            write!(f, "ε")
        } else {
            write!(f, "{}", self.to_bit_string())
        }
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prefix({})", self)
    }
}

impl FromStr for Prefix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ε" || s == "e" || s == "-" {
            return Ok(Prefix::empty());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("not a bit string: {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Prefix::from_bits)
    }
}

/// Self-delimiting header for a length: `1^L 0 bin(n)` where `L` is the
/// bit length of `bin(n)` (and `bin(0)` is empty).
pub fn length_header(n: usize) -> Prefix {
    let width = (usize::BITS - n.leading_zeros()) as usize;
    let mut p = Prefix::repeat(true, width);
    p.push(false);
    p.concat(&Prefix::from_value(n as u128, width))
}

/// `header(|a|) · a`.
pub fn self_delimit(a: &Prefix) -> Prefix {
    length_header(a.len()).concat(a)
}

/// The documented pairing `(a, b) ↦ header(|a|) · a · b`.
pub fn encode_pair(a: &Prefix, b: &Prefix) -> Prefix {
    self_delimit(a).concat(b)
}

/// Inverse of [`encode_pair`]; `None` if `s` is not a pair code.
pub fn decode_pair(s: &Prefix) -> Option<(Prefix, Prefix)> {
    let bits = s.bits();
    let width = bits.iter().take_while(|&&b| b).count();
    if width >= bits.len() {
        return None;
    }
    let start = width + 1;
    if start + width > bits.len() {
        return None;
    }
    // bin(n) has no leading zero, so each pair has exactly one code
    if width > 0 && !bits[start] {
        return None;
    }
    let n = Prefix::from_slice(&bits[start..start + width]).value() as usize;
    let body = start + width;
    if body + n > bits.len() {
        return None;
    }
    Some((
        Prefix::from_slice(&bits[body..body + n]),
        Prefix::from_slice(&bits[body + n..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    #[test]
    fn codes_are_length_lexicographic() {
        let listed: Vec<Prefix> = Prefix::all_up_to(3).collect();
        for (i, x) in listed.iter().enumerate() {
            assert_eq!(x.code(), i as u128);
            assert_eq!(&Prefix::from_code(i as u128), x);
        }
        let mut sorted = listed.clone();
        sorted.sort();
        assert_eq!(sorted, listed);
    }

    #[test]
    fn prefix_relations() {
        assert!(p("").is_prefix_of(&p("101")));
        assert!(p("10").is_prefix_of(&p("101")));
        assert!(!p("11").is_prefix_of(&p("101")));
        assert_eq!(p("101").take(2), p("10"));
        assert_eq!(p("1").parent(), Some(Prefix::empty()));
    }

    #[test]
    fn headers() {
        assert_eq!(length_header(0), p("0"));
        assert_eq!(length_header(1), p("101"));
        assert_eq!(length_header(2), p("11010"));
        assert_eq!(encode_pair(&p("01"), &p("1")), p("11010011"));
    }

    proptest! {
        #[test]
        fn pair_decodes(a in proptest::collection::vec(any::<bool>(), 0..20),
                        b in proptest::collection::vec(any::<bool>(), 0..20)) {
            let (a, b) = (Prefix::from_bits(a), Prefix::from_bits(b));
            prop_assert_eq!(decode_pair(&encode_pair(&a, &b)), Some((a, b)));
        }

        #[test]
        fn decoded_pairs_reencode(s in proptest::collection::vec(any::<bool>(), 0..24)) {
            let s = Prefix::from_bits(s);
            if let Some((a, b)) = decode_pair(&s) {
                prop_assert_eq!(encode_pair(&a, &b), s);
            }
        }

        #[test]
        fn packing_round_trips(a in proptest::collection::vec(any::<bool>(), 0..40)) {
            let a = Prefix::from_bits(a);
            prop_assert_eq!(Prefix::from_packed(&a.packed(), a.len()), a);
        }
    }
}
