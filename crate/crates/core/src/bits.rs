//! Bitstring conventions shared across the simulator and post-processing.
//!
//! Basis index bit `i` is the occupation of atom `i` (= feature `i`). The
//! text form lists atoms left to right, so `"10"` is atom 0 excited,
//! basis index 1.

use crate::error::{Error, Result};

pub fn to_text(index: u64, n: usize) -> String {
    (0..n).map(|i| if index >> i & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse(text: &str) -> Result<u64> {
    if text.len() > 63 {
        return Err(Error::invalid(format!("bitstring `{text}` is too long")));
    }
    text.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << i),
        _ => Err(Error::invalid(format!("bitstring `{text}` contains `{c}`"))),
    })
}

#[inline]
pub fn is_set(index: u64, i: usize) -> bool {
    index >> i & 1 == 1
}

pub fn support(index: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| is_set(index, i)).collect()
}

pub fn from_support(features: &[usize]) -> u64 {
    features.iter().fold(0, |acc, &i| acc | 1 << i)
}
