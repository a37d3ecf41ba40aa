//! GF(2^m) arithmetic over exp/log tables, 2 <= m <= 16.
//!
//! One fixed primitive polynomial per degree keeps every table, and therefore
//! every codeword and shard, bit-reproducible across runs and machines.

use crate::{Error, Result};

/// A field element, value in 0..2^m. Addition is XOR; the remaining ops live
/// on [`FieldTable`] so the modulus travels with them.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf(pub u16);

impl std::fmt::Debug for Gf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl Gf {
    pub const ZERO: Gf = Gf(0);
    pub const ONE: Gf = Gf(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// Fixed primitive polynomial per extension degree, index = m. Entry m=1 is
/// a placeholder for the test-only GF(2) table.
const PRIMITIVE_POLY: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

/// Exp/log tables for GF(2^m). The exp table is doubled so products of two
/// logs index it without a modulo.
#[derive(Clone)]
pub struct FieldTable {
    m: usize,
    q: usize,
    modulus: u32,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl std::fmt::Debug for FieldTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldTable")
            .field("m", &self.m)
            .field("modulus", &format_args!("{:#x}", self.modulus))
            .finish()
    }
}

/// Builds the GF(2^m) tables for the fixed primitive polynomial of degree m.
pub fn build_field(m: usize) -> Result<FieldTable> {
    if !(2..=16).contains(&m) {
        return Err(Error::DegreeOutOfRange(m));
    }
    Ok(FieldTable::with_modulus(m, PRIMITIVE_POLY[m]))
}

impl FieldTable {
    fn with_modulus(m: usize, modulus: u32) -> FieldTable {
        let q = 1usize << m;
        let mut exp = vec![0u16; 2 * (q - 1)];
        let mut log = vec![0u16; q];
        let mut v: u32 = 1;
        for i in 0..(q - 1) {
            assert!(i == 0 || v != 1, "polynomial {modulus:#x} is not primitive");
            exp[i] = v as u16;
            log[v as usize] = i as u16;
            v <<= 1;
            if v & (1 << m) != 0 {
                v ^= modulus;
            }
        }
        assert_eq!(v, 1, "polynomial {modulus:#x} is not primitive");
        for i in 0..(q - 1) {
            exp[q - 1 + i] = exp[i];
        }
        FieldTable {
            m,
            q,
            modulus,
            exp,
            log,
        }
    }

    /// Extension degree m.
    pub fn degree(&self) -> usize {
        self.m
    }

    /// Field size Q = 2^m.
    pub fn size(&self) -> usize {
        self.q
    }

    /// The primitive polynomial, bit i = coefficient of x^i.
    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Bytes needed to carry one symbol on the wire.
    pub fn symbol_width(&self) -> usize {
        self.m.div_ceil(8)
    }

    /// alpha^i for i < Q-1, i.e. the nonzero elements in generator order.
    pub fn exp(&self, i: usize) -> Gf {
        Gf(self.exp[i % (self.q - 1)])
    }

    #[inline]
    pub fn add(&self, a: Gf, b: Gf) -> Gf {
        Gf(a.0 ^ b.0)
    }

    #[inline]
    pub fn mul(&self, a: Gf, b: Gf) -> Gf {
        if a.is_zero() || b.is_zero() {
            return Gf::ZERO;
        }
        Gf(self.exp[self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize])
    }

    #[inline]
    pub fn inv(&self, a: Gf) -> Gf {
        assert!(!a.is_zero(), "inverse of zero");
        Gf(self.exp[self.q - 1 - self.log[a.0 as usize] as usize])
    }

    #[inline]
    pub fn div(&self, a: Gf, b: Gf) -> Gf {
        assert!(!b.is_zero(), "division by zero");
        if a.is_zero() {
            return Gf::ZERO;
        }
        let d = self.log[a.0 as usize] as usize + (self.q - 1) - self.log[b.0 as usize] as usize;
        Gf(self.exp[d])
    }

    /// a^e with 0^0 = 1.
    pub fn pow(&self, a: Gf, e: usize) -> Gf {
        if e == 0 {
            return Gf::ONE;
        }
        if a.is_zero() {
            return Gf::ZERO;
        }
        Gf(self.exp[(self.log[a.0 as usize] as usize * e) % (self.q - 1)])
    }

    /// The n evaluation points used by parity-check construction: nonzero
    /// elements in exp-table order, with 0 appended last when n = Q.
    pub fn points(&self, n: usize) -> Result<Vec<Gf>> {
        if n > self.q {
            return Err(Error::BlockTooLong { n, q: self.q });
        }
        let mut pts: Vec<Gf> = (0..n.min(self.q - 1)).map(|i| self.exp(i)).collect();
        if n == self.q {
            pts.push(Gf::ZERO);
        }
        Ok(pts)
    }

    /// Test-only GF(2), used to exercise guards that full construction
    /// cannot reach.
    #[cfg(test)]
    pub(crate) fn gf2() -> FieldTable {
        FieldTable {
            m: 1,
            q: 2,
            modulus: 0x3,
            exp: vec![1, 1],
            log: vec![0, 0],
        }
    }
}

/// The fixed primitive polynomial used for degree m (bit i = coefficient of
/// x^i), shared by field construction and the vector coupler.
pub fn primitive_poly(m: usize) -> Result<u32> {
    if !(2..=16).contains(&m) {
        return Err(Error::DegreeOutOfRange(m));
    }
    Ok(PRIMITIVE_POLY[m])
}

/// Picks the coupling constant u: the first element in exp-table order that
/// is neither 0 nor 1 (hence u = alpha), rejecting fields below GF(4).
pub fn pick_u(field: &FieldTable) -> Result<Gf> {
    for i in 0..field.size() - 1 {
        let c = field.exp(i);
        if c != Gf::ZERO && c != Gf::ONE {
            let sq = field.mul(c, c);
            if sq != Gf::ONE {
                return Ok(c);
            }
        }
    }
    Err(Error::FieldTooSmall(field.size()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf4_tables_match_hand_reduction() {
        // x^2 + x + 1: x*x = x+1 = 3, x*(x+1) = 1, squares cycle.
        let f = build_field(2).unwrap();
        assert_eq!(f.mul(Gf(2), Gf(2)), Gf(3));
        assert_eq!(f.mul(Gf(2), Gf(3)), Gf(1));
        assert_eq!(f.inv(Gf(2)), Gf(3));
        assert_eq!(f.inv(Gf(3)), Gf(2));
        assert_eq!((0..3).map(|i| f.exp(i).0).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn gf8_exp_sequence() {
        // x^3 + x + 1 over GF(8): powers of x run 1,2,4,3,6,7,5.
        let f = build_field(3).unwrap();
        let seq: Vec<u16> = (0..7).map(|i| f.exp(i).0).collect();
        assert_eq!(seq, [1, 2, 4, 3, 6, 7, 5]);
    }

    #[test]
    fn all_degrees_build_and_small_fields_satisfy_axioms() {
        for m in 2..=16 {
            build_field(m).unwrap();
        }
        for m in 2..=4 {
            let f = build_field(m).unwrap();
            let q = f.size() as u16;
            for a in 0..q {
                for b in 0..q {
                    let (a, b) = (Gf(a), Gf(b));
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.add(f.add(a, b), b), a, "addition is self-inverse");
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        let c = Gf(c);
                        assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                        assert_eq!(
                            f.mul(a, f.add(b, c)),
                            f.add(f.mul(a, b), f.mul(a, c)),
                            "distributivity"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gf256_inverses_exhaustive() {
        let f = build_field(8).unwrap();
        for a in 1..256u16 {
            let inv = f.inv(Gf(a));
            assert_eq!(f.mul(Gf(a), inv), Gf::ONE, "a={a}");
            assert_eq!(f.div(Gf(a), Gf(a)), Gf::ONE);
        }
    }

    #[test]
    fn degree_bounds_rejected() {
        assert!(matches!(build_field(1), Err(Error::DegreeOutOfRange(1))));
        assert!(matches!(build_field(17), Err(Error::DegreeOutOfRange(17))));
    }

    #[test]
    fn pow_agrees_with_repeated_mul() {
        let f = build_field(5).unwrap();
        for a in 0..32u16 {
            let mut acc = Gf::ONE;
            for e in 0..10 {
                assert_eq!(f.pow(Gf(a), e), acc, "a={a} e={e}");
                acc = f.mul(acc, Gf(a));
            }
        }
    }

    #[test]
    fn points_cover_field_when_n_equals_q() {
        let f = build_field(2).unwrap();
        let pts = f.points(4).unwrap();
        assert_eq!(pts.iter().map(|p| p.0).collect::<Vec<_>>(), [1, 2, 3, 0]);
        assert!(f.points(5).is_err());
        // Distinctness at a larger size.
        let f = build_field(5).unwrap();
        let pts = f.points(20).unwrap();
        let set: std::collections::BTreeSet<u16> = pts.iter().map(|p| p.0).collect();
        assert_eq!(set.len(), 20);
    }

    #[test]
    fn coupling_constant_is_generator() {
        let f = build_field(2).unwrap();
        let u = pick_u(&f).unwrap();
        assert_eq!(u, Gf(2));
        assert_ne!(f.mul(u, u), Gf::ONE);
        for m in 3..=8 {
            let f = build_field(m).unwrap();
            let u = pick_u(&f).unwrap();
            assert_eq!(u, Gf(2));
        }
    }

    #[test]
    fn coupling_constant_rejected_below_gf4() {
        let f2 = FieldTable::gf2();
        assert!(matches!(pick_u(&f2), Err(Error::FieldTooSmall(2))));
    }
}
