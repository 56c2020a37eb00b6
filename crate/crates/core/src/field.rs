//! Arithmetic in a prime field `F_p` with a precomputed square-count table.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is even, not an odd prime")]
    EvenModulus(u64),
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} does not fit the 32-bit residue representation")]
    ModulusTooLarge(u64),
}

/// A residue in `[0, p)`.
///
/// Elements carry no reference to their field; every operation goes through
/// the owning [`PrimeField`], which is the only place values are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fe(u32);

impl Fe {
    pub const ZERO: Fe = Fe(0);

    #[inline]
    pub fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// The caller guarantees `v` is already reduced.
    #[inline]
    pub(crate) const fn from_reduced(v: u32) -> Fe {
        Fe(v)
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Neg,
    Square,
}

/// The prime field `F_p` for an odd prime `p`.
///
/// `square_counts[t]` is the number of `x` with `x^2 = t`, so it is `1` at
/// zero and `0` or `2` elsewhere. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeField {
    p: u32,
    square_counts: Vec<u8>,
    minus_one_is_square: bool,
}

/// Deterministic trial division.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p.is_multiple_of(2) {
            return Err(FieldError::EvenModulus(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let p32 = u32::try_from(p).map_err(|_| FieldError::ModulusTooLarge(p))?;
        let mut square_counts = vec![0u8; p32 as usize];
        for x in 0..p {
            square_counts[((x * x) % p) as usize] += 1;
        }
        let minus_one_is_square = square_counts[(p - 1) as usize] > 0;
        Ok(Self {
            p: p32,
            square_counts,
            minus_one_is_square,
        })
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.p
    }

    pub fn square_counts(&self) -> &[u8] {
        &self.square_counts
    }

    pub fn minus_one_is_square(&self) -> bool {
        self.minus_one_is_square
    }

    /// True when `-1` is a non-square, i.e. `p = 3 (mod 4)`. When this is
    /// false the field is usable but the standing hypothesis of the distance
    /// bounds does not hold.
    pub fn hypothesis_holds(&self) -> bool {
        !self.minus_one_is_square
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn elem(&self, v: i64) -> Fe {
        Fe(v.rem_euclid(self.p as i64) as u32)
    }

    /// Wraps a value already known to lie in `[0, p)`.
    #[inline]
    pub fn elem_unchecked(&self, v: u32) -> Fe {
        debug_assert!(v < self.p);
        Fe(v)
    }

    /// Wraps a residue, rejecting anything outside `[0, p)`.
    pub fn try_elem(&self, v: u64) -> Option<Fe> {
        (v < self.p as u64).then_some(Fe(v as u32))
    }

    pub fn elements(&self) -> impl Iterator<Item = Fe> + '_ {
        (0..self.p).map(Fe)
    }

    pub fn nonzero_elements(&self) -> impl Iterator<Item = Fe> + '_ {
        (1..self.p).map(Fe)
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let s = a.0 as u64 + b.0 as u64;
        let p = self.p as u64;
        Fe(if s >= p { s - p } else { s } as u32)
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        if a.0 >= b.0 {
            Fe(a.0 - b.0)
        } else {
            Fe((a.0 as u64 + self.p as u64 - b.0 as u64) as u32)
        }
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        Fe(((a.0 as u64 * b.0 as u64) % self.p as u64) as u32)
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        if a.0 == 0 {
            a
        } else {
            Fe(self.p - a.0)
        }
    }

    #[inline]
    pub fn square(&self, a: Fe) -> Fe {
        self.mul(a, a)
    }

    /// Dispatches a binary or unary operation; unary ops ignore `b`.
    pub fn arith(&self, a: Fe, b: Fe, op: ArithOp) -> Fe {
        match op {
            ArithOp::Add => self.add(a, b),
            ArithOp::Sub => self.sub(a, b),
            ArithOp::Mul => self.mul(a, b),
            ArithOp::Neg => self.neg(a),
            ArithOp::Square => self.square(a),
        }
    }

    #[inline]
    pub fn is_square(&self, t: Fe) -> bool {
        self.square_counts[t.0 as usize] > 0
    }
}

/// Builds a validated field; see [`PrimeField::new`].
pub fn make_field(p: u64) -> Result<PrimeField, FieldError> {
    PrimeField::new(p)
}
