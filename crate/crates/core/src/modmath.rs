//! Arithmetic in the multiplicative group of integers modulo a small prime.
//!
//! Quantities and conversion factors live in `Z_p*`, so they are never zero.
//! Every product stays below `p^2`, which fits in a `u64` for any modulus we
//! accept.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest modulus accepted. Keeps `p^2` far away from `u64::MAX`.
pub const MAX_MODULUS: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModError {
    #[error("modulus {0} is not a prime >= 3")]
    NotPrime(u64),
    #[error("modulus {0} exceeds the supported maximum")]
    TooLarge(u64),
    #[error("residue {value} is outside [1, {max}]")]
    OutOfRange { value: u64, max: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroResidue,
}

/// A prime modulus `p >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Modulus(u64);

impl Modulus {
    pub const FIVE: Modulus = Modulus(5);

    pub fn new(p: u64) -> Result<Self, ModError> {
        if p > MAX_MODULUS {
            return Err(ModError::TooLarge(p));
        }
        if p < 3 || !is_prime(p) {
            return Err(ModError::NotPrime(p));
        }
        Ok(Modulus(p))
    }

    #[inline]
    pub const fn get(self) -> u64 {
        self.0
    }

    /// Number of nonzero residues, i.e. `p - 1`.
    #[inline]
    pub const fn order(self) -> u64 {
        self.0 - 1
    }

    /// Checks that `value` is a nonzero residue and wraps it.
    pub fn residue(self, value: u64) -> Result<Residue, ModError> {
        if value == 0 || value >= self.0 {
            return Err(ModError::OutOfRange { value, max: self.0 - 1 });
        }
        Ok(Residue(value))
    }

    #[inline]
    pub fn mul(self, a: Residue, b: Residue) -> Residue {
        Residue(a.0 * b.0 % self.0)
    }

    pub fn pow(self, base: Residue, mut exp: u64) -> Residue {
        let p = self.0;
        let mut acc = 1 % p;
        let mut b = base.0 % p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * b % p;
            }
            b = b * b % p;
            exp >>= 1;
        }
        Residue(acc)
    }

    /// Iterates over all of `Z_p*` in increasing order.
    pub fn residues(self) -> impl Iterator<Item = Residue> {
        (1..self.0).map(Residue)
    }
}

impl TryFrom<u64> for Modulus {
    type Error = ModError;

    fn try_from(p: u64) -> Result<Self, Self::Error> {
        Modulus::new(p)
    }
}

impl From<Modulus> for u64 {
    fn from(m: Modulus) -> u64 {
        m.0
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A nonzero residue. Only meaningful together with the [`Modulus`] that
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Residue(u64);

impl Residue {
    pub const ONE: Residue = Residue(1);

    #[inline]
    pub const fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Direction of travel along a conversion rule relative to its stated
/// orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Multiplicative inverse via Fermat: `a^(p-2)`.
pub fn mod_inv(a: Residue, m: Modulus) -> Result<Residue, ModError> {
    if a.0.is_multiple_of(m.0) {
        return Err(ModError::ZeroResidue);
    }
    Ok(m.pow(a, m.0 - 2))
}

/// Applies one edge traversal: multiply going forward, divide going backward.
///
/// Both inputs must be residues of `m`.
pub fn traverse(q: Residue, factor: Residue, direction: Direction, m: Modulus) -> Residue {
    match direction {
        Direction::Forward => m.mul(q, factor),
        Direction::Backward => {
            let inv = mod_inv(factor, m).expect("factor is a nonzero residue");
            m.mul(q, inv)
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}
