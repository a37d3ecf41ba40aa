//! Pairwise coupling of cube symbols.
//!
//! Companion symbols are mixed two at a time through the symmetric transform
//!
//! ```text
//!   [B1]   [1  u] [A1]
//!   [B2] = [u  1] [A2]
//! ```
//!
//! with u neither 0 nor a square root of 1, so the four values
//! (B1, B2, A1, A2) form a (4, Q^2, 3) MDS code: any two of them determine
//! the other two. The scalar form multiplies by a field constant; the vector
//! form replaces u with the companion matrix T of a primitive binary
//! polynomial acting on m-bit tuples, keeping the data path XOR-only.

use std::sync::Arc;

use crate::gf::{primitive_poly, FieldTable, Gf};
use crate::rdp::Bits;
use crate::{Error, Result};

/// Position of a value within one coupled pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    B1,
    B2,
    A1,
    A2,
}

/// The coupling transform over some symbol type.
///
/// `scale`/`unscale` multiply by u (resp. u^-1) and `unmix` by (1 + u^2)^-1;
/// everything else follows from those and characteristic-2 addition.
pub trait PairCoupler {
    type Sym: Copy + Eq + std::fmt::Debug;

    fn add(&self, a: Self::Sym, b: Self::Sym) -> Self::Sym;
    fn scale(&self, s: Self::Sym) -> Self::Sym;
    fn unscale(&self, s: Self::Sym) -> Self::Sym;
    fn unmix(&self, s: Self::Sym) -> Self::Sym;

    /// (A1, A2) -> (B1, B2).
    fn couple(&self, a1: Self::Sym, a2: Self::Sym) -> (Self::Sym, Self::Sym) {
        (self.add(a1, self.scale(a2)), self.add(self.scale(a1), a2))
    }

    /// (B1, B2) -> (A1, A2): A1 = (1+u^2)^-1 (B1 + u B2), symmetrically A2.
    fn decouple(&self, b1: Self::Sym, b2: Self::Sym) -> (Self::Sym, Self::Sym) {
        let a1 = self.unmix(self.add(b1, self.scale(b2)));
        let a2 = self.unmix(self.add(self.scale(b1), b2));
        (a1, a2)
    }

    /// Completes (B1, B2, A1, A2) from any two distinct members.
    fn recover_any2(
        &self,
        first: (Slot, Self::Sym),
        second: (Slot, Self::Sym),
    ) -> Result<[Self::Sym; 4]> {
        use Slot::*;
        if first.0 == second.0 {
            return Err(Error::BadParameter("recover_any2 needs two distinct slots"));
        }
        // Normalize so the match below sees each unordered pair once.
        let ((s1, v1), (s2, v2)) = if slot_rank(first.0) <= slot_rank(second.0) {
            (first, second)
        } else {
            (second, first)
        };
        let (b1, b2, a1, a2) = match (s1, s2) {
            (B1, B2) => {
                let (a1, a2) = self.decouple(v1, v2);
                (v1, v2, a1, a2)
            }
            (A1, A2) => {
                let (b1, b2) = self.couple(v1, v2);
                (b1, b2, v1, v2)
            }
            (B1, A1) => {
                let a2 = self.unscale(self.add(v1, v2));
                (v1, self.add(self.scale(v2), a2), v2, a2)
            }
            (B1, A2) => {
                let a1 = self.add(v1, self.scale(v2));
                (v1, self.add(self.scale(a1), v2), a1, v2)
            }
            (B2, A1) => {
                let a2 = self.add(v1, self.scale(v2));
                (self.add(v2, self.scale(a2)), v1, v2, a2)
            }
            (B2, A2) => {
                let a1 = self.unscale(self.add(v1, v2));
                (self.add(a1, self.scale(v2)), v1, a1, v2)
            }
            _ => unreachable!("slots are ordered and distinct"),
        };
        Ok([b1, b2, a1, a2])
    }
}

fn slot_rank(s: Slot) -> u8 {
    match s {
        Slot::B1 => 0,
        Slot::B2 => 1,
        Slot::A1 => 2,
        Slot::A2 => 3,
    }
}

/// Field-constant coupler.
#[derive(Clone, Debug)]
pub struct ScalarCoupler {
    field: Arc<FieldTable>,
    u: Gf,
    u_inv: Gf,
    mix_inv: Gf,
}

impl ScalarCoupler {
    pub fn new(field: Arc<FieldTable>, u: Gf) -> Result<ScalarCoupler> {
        let u_sq = field.mul(u, u);
        if u.is_zero() || u_sq == Gf::ONE {
            return Err(Error::BadCouplingConstant(u.0));
        }
        let u_inv = field.inv(u);
        let mix_inv = field.inv(field.add(Gf::ONE, u_sq));
        Ok(ScalarCoupler {
            field,
            u,
            u_inv,
            mix_inv,
        })
    }

    pub fn u(&self) -> Gf {
        self.u
    }
}

impl PairCoupler for ScalarCoupler {
    type Sym = Gf;

    #[inline]
    fn add(&self, a: Gf, b: Gf) -> Gf {
        self.field.add(a, b)
    }

    #[inline]
    fn scale(&self, s: Gf) -> Gf {
        self.field.mul(self.u, s)
    }

    #[inline]
    fn unscale(&self, s: Gf) -> Gf {
        self.field.mul(self.u_inv, s)
    }

    #[inline]
    fn unmix(&self, s: Gf) -> Gf {
        self.field.mul(self.mix_inv, s)
    }
}

/// Matrix coupler over binary m-tuples: u becomes T, the companion matrix of
/// a primitive polynomial, stored as m column bitmasks.
#[derive(Clone, Debug)]
pub struct VectorCoupler {
    m: usize,
    poly: u32,
    t_cols: Vec<u64>,
    t_inv_cols: Vec<u64>,
    mix_inv_cols: Vec<u64>,
}

/// Builds the coupler for m-bit tuples from the fixed primitive polynomial
/// of degree m.
pub fn build_vector_coupler(m: usize) -> Result<VectorCoupler> {
    let poly = primitive_poly(m)?;
    // Column j of T = x^(j+1) mod p(x); the last column wraps through the
    // modulus.
    let cols: Vec<u64> = (0..m)
        .map(|j| {
            if j + 1 < m {
                1u64 << (j + 1)
            } else {
                (poly ^ (1 << m)) as u64
            }
        })
        .collect();
    VectorCoupler::from_columns(m, poly, cols)
}

impl VectorCoupler {
    /// Assembles a coupler from explicit T columns, rejecting any T for
    /// which T or I + T^2 is singular.
    pub fn from_columns(m: usize, poly: u32, t_cols: Vec<u64>) -> Result<VectorCoupler> {
        if m == 0 || m > 63 || t_cols.len() != m {
            return Err(Error::BadParameter("coupler width must be 1..=63 columns"));
        }
        let t_inv_cols = invert_gf2(m, &t_cols).ok_or(Error::SingularCoupler)?;
        let t2_cols: Vec<u64> = (0..m)
            .map(|j| mat_vec(&t_cols, mat_vec(&t_cols, 1u64 << j)))
            .collect();
        let mix_cols: Vec<u64> = (0..m).map(|j| t2_cols[j] ^ (1u64 << j)).collect();
        let mix_inv_cols = invert_gf2(m, &mix_cols).ok_or(Error::SingularCoupler)?;
        Ok(VectorCoupler {
            m,
            poly,
            t_cols,
            t_inv_cols,
            mix_inv_cols,
        })
    }

    pub fn tuple_len(&self) -> usize {
        self.m
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    pub fn t_columns(&self) -> &[u64] {
        &self.t_cols
    }
}

/// M * v with M given as column bitmasks.
#[inline]
fn mat_vec(cols: &[u64], v: u64) -> u64 {
    let mut acc = 0u64;
    let mut rest = v;
    while rest != 0 {
        let j = rest.trailing_zeros() as usize;
        acc ^= cols[j];
        rest &= rest - 1;
    }
    acc
}

/// Inverts an m x m GF(2) matrix given as column bitmasks; None if singular.
fn invert_gf2(m: usize, cols: &[u64]) -> Option<Vec<u64>> {
    // Row i of [M | I] packed as (left bits, right bits).
    let mut rows: Vec<(u64, u64)> = (0..m)
        .map(|i| {
            let left = (0..m).fold(0u64, |acc, j| acc | ((cols[j] >> i & 1) << j));
            (left, 1u64 << i)
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).find(|&r| rows[r].0 >> col & 1 == 1)?;
        rows.swap(col, pivot);
        let (pl, pr) = rows[col];
        for r in 0..m {
            if r != col && rows[r].0 >> col & 1 == 1 {
                rows[r].0 ^= pl;
                rows[r].1 ^= pr;
            }
        }
    }
    // rows[i].1 is now row i of M^-1; transpose back to columns.
    Some(
        (0..m)
            .map(|j| (0..m).fold(0u64, |acc, i| acc | ((rows[i].1 >> j & 1) << i)))
            .collect(),
    )
}

impl PairCoupler for VectorCoupler {
    type Sym = Bits;

    #[inline]
    fn add(&self, a: Bits, b: Bits) -> Bits {
        a.xor(b)
    }

    #[inline]
    fn scale(&self, s: Bits) -> Bits {
        Bits(mat_vec(&self.t_cols, s.0))
    }

    #[inline]
    fn unscale(&self, s: Bits) -> Bits {
        Bits(mat_vec(&self.t_inv_cols, s.0))
    }

    #[inline]
    fn unmix(&self, s: Bits) -> Bits {
        Bits(mat_vec(&self.mix_inv_cols, s.0))
    }
}
