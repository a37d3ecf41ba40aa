//! RDP array code over binary m-tuples: the vector-alphabet MDS base code.
//!
//! For an odd prime p, the code has n = p+1 symbols of m = p-1 bits each and
//! tolerates any two symbol erasures. Symbol c is column c of the usual
//! (p-1) x (p+1) bit array: columns 0..p-2 carry data, column p-1 the row
//! parity, column p the diagonal parity (diagonal p-1 is the unstored one).
//! Everything is XOR; no field multiplication ever touches the data path.

use crate::{Error, Result};

/// A binary m-tuple, bit i of `.0` = row i. The width m is carried by the
/// code or coupler operating on it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bits(pub u64);

impl std::fmt::Debug for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

impl Bits {
    pub const ZERO: Bits = Bits(0);

    #[inline]
    pub fn xor(self, other: Bits) -> Bits {
        Bits(self.0 ^ other.0)
    }

    #[inline]
    pub fn bit(self, i: usize) -> bool {
        self.0 >> i & 1 != 0
    }
}

/// (p+1, p-1) RDP code over (p-1)-bit symbols.
#[derive(Clone, Debug)]
pub struct RdpCode {
    p: usize,
}

/// Builds the RDP code for an odd prime p.
pub fn rdp_codec(p: usize) -> Result<RdpCode> {
    let prime = p >= 3
        && (2..p)
            .take_while(|d| d * d <= p)
            .all(|d| !p.is_multiple_of(d));
    if !prime || p.is_multiple_of(2) {
        return Err(Error::NotOddPrime(p));
    }
    if p > 61 {
        return Err(Error::BadParameter(
            "RDP prime too large for 64-bit symbols",
        ));
    }
    Ok(RdpCode { p })
}

impl RdpCode {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Bits per symbol.
    pub fn tuple_len(&self) -> usize {
        self.p - 1
    }

    /// Code length n = p + 1.
    pub fn block_len(&self) -> usize {
        self.p + 1
    }

    /// Dimension k = p - 1.
    pub fn dimension(&self) -> usize {
        self.p - 1
    }

    /// Appends row parity and diagonal parity to p-1 data symbols.
    pub fn encode(&self, data: &[Bits]) -> Result<Vec<Bits>> {
        let p = self.p;
        if data.len() != p - 1 {
            return Err(Error::BadMessageLength {
                got: data.len(),
                want: p - 1,
            });
        }
        let mut cw: Vec<Bits> = data.to_vec();
        let row = data.iter().fold(Bits::ZERO, |acc, &d| acc.xor(d));
        cw.push(row);
        let mut diag = 0u64;
        for kd in 0..p - 1 {
            let mut bit = false;
            for c in 0..p {
                let r = (kd + p - c) % p;
                if r <= p - 2 {
                    bit ^= cw[c].bit(r);
                }
            }
            diag |= (bit as u64) << kd;
        }
        cw.push(Bits(diag));
        Ok(cw)
    }

    /// Fills in up to two missing symbols of a codeword in place.
    ///
    /// Peels the row and diagonal parity equations at bit granularity:
    /// any equation with a single unknown cell resolves it, and for one or
    /// two erased columns the chains always run to completion.
    pub fn decode_erasures(&self, cw: &mut [Option<Bits>]) -> Result<()> {
        let p = self.p;
        if cw.len() != p + 1 {
            return Err(Error::BadMessageLength {
                got: cw.len(),
                want: p + 1,
            });
        }
        let missing = cw.iter().filter(|c| c.is_none()).count();
        if missing == 0 {
            return Ok(());
        }
        if missing > 2 {
            return Err(Error::TooManyErasures {
                got: missing,
                max: 2,
            });
        }

        // cell[r][c], None = unknown. The imaginary row p-1 is all zero.
        let mut cell = vec![vec![None::<bool>; p + 1]; p];
        for c in 0..=p {
            if let Some(v) = cw[c] {
                for r in 0..p - 1 {
                    cell[r][c] = Some(v.bit(r));
                }
            }
            cell[p - 1][c] = Some(false);
        }

        let mut progressed = true;
        while progressed {
            progressed = false;
            // Row equations: XOR of cells (r, 0..p-1) = 0 for real rows.
            for r in 0..p - 1 {
                progressed |= peel(&mut cell, (0..p).map(|c| (r, c)));
            }
            // Diagonal equations: diagonal kd over columns 0..p-1 plus the
            // stored parity cell (kd, p).
            for kd in 0..p - 1 {
                let eq = (0..p)
                    .map(move |c| ((kd + p - c) % p, c))
                    .chain(std::iter::once((kd, p)));
                progressed |= peel(&mut cell, eq);
            }
        }

        for c in 0..=p {
            if cw[c].is_some() {
                continue;
            }
            let mut v = 0u64;
            for r in 0..p - 1 {
                match cell[r][c] {
                    Some(true) => v |= 1 << r,
                    Some(false) => {}
                    None => return Err(Error::SingularSystem("RDP peeling stalled")),
                }
            }
            cw[c] = Some(Bits(v));
        }
        Ok(())
    }
}

/// Resolves the single unknown of one XOR equation, if there is exactly one.
fn peel(cell: &mut [Vec<Option<bool>>], eq: impl Iterator<Item = (usize, usize)>) -> bool {
    let mut acc = false;
    let mut hole: Option<(usize, usize)> = None;
    for (r, c) in eq {
        match cell[r][c] {
            Some(b) => acc ^= b,
            None if hole.is_some() => return false,
            None => hole = Some((r, c)),
        }
    }
    match hole {
        Some((r, c)) => {
            cell[r][c] = Some(acc);
            true
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use rand::{Rng, SeedableRng};

    #[test]
    fn shape_for_p5() {
        let c = rdp_codec(5).unwrap();
        assert_eq!(
            (c.block_len(), c.dimension(), c.tuple_len()),
            (6, 4, 4),
            "(n, k, m) = (p+1, p-1, p-1)"
        );
    }

    #[test]
    fn non_primes_rejected() {
        for p in [0, 1, 2, 4, 9, 15] {
            assert!(matches!(rdp_codec(p), Err(Error::NotOddPrime(_))), "p={p}");
        }
    }

    #[test]
    fn hand_worked_p3_vector() {
        // p=3: data [01, 10] -> row parity 11; diagonal 0 covers cells
        // (0,0),(1,2) -> 0, diagonal 1 covers (1,0),(0,1) -> 0.
        let c = rdp_codec(3).unwrap();
        let cw = c.encode(&[Bits(1), Bits(2)]).unwrap();
        let vals: Vec<u64> = cw.iter().map(|b| b.0).collect();
        assert_eq!(vals, [1, 2, 3, 0]);
    }

    /// Re-derives both parity columns with an independent per-bit loop.
    fn check_parities(p: usize, cw: &[Bits]) {
        for r in 0..p - 1 {
            let mut acc = false;
            for c in 0..p {
                acc ^= cw[c].bit(r);
            }
            assert!(!acc, "row {r}");
        }
        for kd in 0..p - 1 {
            let mut acc = cw[p].bit(kd);
            for c in 0..p {
                for r in 0..p - 1 {
                    if (r + c) % p == kd {
                        acc ^= cw[c].bit(r);
                    }
                }
            }
            assert!(!acc, "diagonal {kd}");
        }
    }

    #[test]
    fn all_single_and_double_erasures_recover() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in [3usize, 5, 7] {
            let c = rdp_codec(p).unwrap();
            let mask = (1u64 << (p - 1)) - 1;
            for _ in 0..40 {
                let data: Vec<Bits> = (0..p - 1).map(|_| Bits(rng.gen::<u64>() & mask)).collect();
                let cw = c.encode(&data).unwrap();
                check_parities(p, &cw);

                for lost in (0..=p).combinations(2).chain((0..=p).map(|i| vec![i])) {
                    let mut holes: Vec<Option<Bits>> = cw.iter().copied().map(Some).collect();
                    for &i in &lost {
                        holes[i] = None;
                    }
                    c.decode_erasures(&mut holes).unwrap();
                    let got: Vec<Bits> = holes.into_iter().map(Option::unwrap).collect();
                    assert_eq!(got, cw, "p={p} lost={lost:?}");
                }
            }
        }
    }

    #[test]
    fn triple_erasure_rejected() {
        let c = rdp_codec(5).unwrap();
        let cw = c.encode(&[Bits(1), Bits(2), Bits(3), Bits(4)]).unwrap();
        let mut holes: Vec<Option<Bits>> = cw.iter().copied().map(Some).collect();
        holes[0] = None;
        holes[2] = None;
        holes[5] = None;
        assert!(matches!(
            c.decode_erasures(&mut holes),
            Err(Error::TooManyErasures { got: 3, max: 2 })
        ));
    }
}
