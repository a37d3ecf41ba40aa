//! The flattened scalar view of the parity-check structure.
//!
//! Treating every cube cell A(a,b; z') as one coordinate of a length
//! n*q^t scalar code, the parity-check matrix H_scalar has its row (z, l)
//! and column (a,b; z') entry given by
//!
//! ```text
//!   phi((z,l),(a,b;z')) = theta[l][(a,b)]        if z' = z
//!                         u * theta[l][(z'_b,b)] if a = z_b != z'_b
//!                                                   and z'_{~b} = z_{~b}
//!                         0                      otherwise
//! ```
//!
//! Rows have weight qt + t(q-1) = t(2q-1); a column has weight q when
//! z'_b = a (a fixed point) and 2q otherwise. The matrix is streamed row by
//! row; small instances can also be materialized densely for rank and
//! nullspace checks.

use crate::cube::{CubeGeometry, NodeId};
use crate::gf::{FieldTable, Gf};
use crate::mds::Theta;
use crate::msr::{DataCube, MsrCodec};

/// Streaming access to H_scalar for one code instance.
pub struct ScalarView<'a> {
    geom: &'a CubeGeometry,
    theta: &'a Theta,
    field: &'a FieldTable,
    u: Gf,
}

impl<'a> ScalarView<'a> {
    pub fn new(
        geom: &'a CubeGeometry,
        theta: &'a Theta,
        field: &'a FieldTable,
        u: Gf,
    ) -> ScalarView<'a> {
        ScalarView {
            geom,
            theta,
            field,
            u,
        }
    }

    pub fn for_codec(codec: &'a MsrCodec) -> ScalarView<'a> {
        ScalarView::new(codec.geometry(), codec.theta(), codec.field(), codec.u())
    }

    /// Parity rows: one per (plane, l) pair.
    pub fn rows(&self) -> usize {
        self.theta.rows() * self.geom.alpha()
    }

    /// Scalar code length: one per cube cell.
    pub fn cols(&self) -> usize {
        self.geom.n() * self.geom.alpha()
    }

    /// Row index of the (z, l) check; l varies fastest.
    pub fn row_index(&self, z_rank: usize, l: usize) -> usize {
        z_rank * self.theta.rows() + l
    }

    /// Column index of the cell (node; z'): node-major like `DataCube`.
    pub fn col_index(&self, node: NodeId, z_rank: usize) -> usize {
        self.geom.node_index(node) * self.geom.alpha() + z_rank
    }

    /// Direct evaluation of one matrix entry.
    pub fn entry(&self, row: usize, col: usize) -> Gf {
        let (z, l) = (row / self.theta.rows(), row % self.theta.rows());
        let (node_col, zp) = (col / self.geom.alpha(), col % self.geom.alpha());
        let node = self.geom.node_at(node_col);
        let (a, b) = (node.x, node.y);
        if zp == z {
            return self.theta.at(l, node_col);
        }
        let zb = self.geom.plane_coord(z, b);
        let zpb = self.geom.plane_coord(zp, b);
        if a == zb
            && zb != zpb
            && self.geom.plane_replace(z, b, 0) == self.geom.plane_replace(zp, b, 0)
        {
            let slot = self.geom.node_index(NodeId::new(zpb, b));
            return self.field.mul(self.u, self.theta.at(l, slot));
        }
        Gf::ZERO
    }

    /// The nonzero entries of one row, as (column, coefficient) pairs.
    pub fn row_entries(&self, row: usize) -> Vec<(usize, Gf)> {
        let (z, l) = (row / self.theta.rows(), row % self.theta.rows());
        let (q, t) = (self.geom.q() as u8, self.geom.t() as u8);
        let mut out = Vec::with_capacity(self.geom.n() + t as usize * (q as usize - 1));
        for j in 0..self.geom.n() {
            let c = self.theta.at(l, j);
            if !c.is_zero() {
                out.push((j * self.geom.alpha() + z, c));
            }
        }
        for y in 1..=t {
            let zy = self.geom.plane_coord(z, y);
            let owner = NodeId::new(zy, y);
            for x in 0..q {
                if x == zy {
                    continue;
                }
                let slot = self.geom.node_index(NodeId::new(x, y));
                let c = self.field.mul(self.u, self.theta.at(l, slot));
                if !c.is_zero() {
                    out.push((self.col_index(owner, self.geom.plane_replace(z, y, x)), c));
                }
            }
        }
        out
    }

    /// Hamming weight of one row.
    pub fn row_weight(&self, row: usize) -> usize {
        self.row_entries(row).len()
    }

    /// Hamming weight of every column, accumulated by streaming all rows.
    pub fn col_weights(&self) -> Vec<usize> {
        let mut w = vec![0usize; self.cols()];
        for row in 0..self.rows() {
            for (col, _) in self.row_entries(row) {
                w[col] += 1;
            }
        }
        w
    }

    /// Whether the cube, flattened node-major, lies in the nullspace.
    pub fn syndrome_is_zero(&self, cube: &DataCube<Gf>) -> bool {
        for row in 0..self.rows() {
            let mut acc = Gf::ZERO;
            for (col, c) in self.row_entries(row) {
                let v = cube.get(col / self.geom.alpha(), col % self.geom.alpha());
                acc = self.field.add(acc, self.field.mul(c, v));
            }
            if !acc.is_zero() {
                return false;
            }
        }
        true
    }

    /// The full matrix; only sensible for small instances.
    pub fn dense(&self) -> Vec<Vec<Gf>> {
        let mut m = vec![vec![Gf::ZERO; self.cols()]; self.rows()];
        for (row, out) in m.iter_mut().enumerate() {
            for (col, c) in self.row_entries(row) {
                out[col] = c;
            }
        }
        m
    }
}

/// Rank of a matrix over the field, by plain Gaussian elimination.
pub fn rank_over_gf(field: &FieldTable, mat: &[Vec<Gf>]) -> usize {
    let mut m: Vec<Vec<Gf>> = mat.to_vec();
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = field.inv(m[rank][col]);
        for c in col..cols {
            m[rank][c] = field.mul(m[rank][c], inv);
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col];
                for c in col..cols {
                    let sub = field.mul(f, m[rank][c]);
                    m[r][c] = field.add(m[r][c], sub);
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msr::DMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_codeword(codec: &MsrCodec, rng: &mut ChaCha8Rng) -> DataCube<Gf> {
        let msg: Vec<Gf> = (0..codec.params().message_len())
            .map(|_| Gf(rng.gen_range(0..codec.field().size() as u16)))
            .collect();
        codec.encode_systematic(&msg).unwrap()
    }

    #[test]
    fn entry_and_streaming_agree() {
        let codec = MsrCodec::for_grid(2, 2, DMode::NMinusOne).unwrap();
        let view = ScalarView::for_codec(&codec);
        for row in 0..view.rows() {
            let sparse = view.row_entries(row);
            let mut dense_row = vec![Gf::ZERO; view.cols()];
            for &(c, v) in &sparse {
                dense_row[c] = v;
            }
            for col in 0..view.cols() {
                assert_eq!(view.entry(row, col), dense_row[col], "row {row} col {col}");
            }
        }
    }

    #[test]
    fn hand_worked_first_row() {
        // (q,t) = (2,2), row (z = (0,0), l = 0): the plain sum hits all four
        // nodes at plane rank 0 with coefficient theta[0][j] = 1; the
        // coupled terms are A(0,1;(1,0)) and A(0,2;(0,1)) with coefficient
        // u * 1 = 2.
        let codec = MsrCodec::for_grid(2, 2, DMode::NMinusOne).unwrap();
        let view = ScalarView::for_codec(&codec);
        let mut got = view.row_entries(view.row_index(0, 0));
        got.sort();
        assert_eq!(
            got,
            vec![
                (0, Gf(1)),
                (2, Gf(2)), // A(0,1; (1,0)): node 0, plane rank 2
                (4, Gf(1)),
                (8, Gf(1)),
                (9, Gf(2)), // A(0,2; (0,1)): node 2, plane rank 1
                (12, Gf(1)),
            ]
        );
    }

    #[test]
    fn weights_match_formulas() {
        for (q, t) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let codec = MsrCodec::for_grid(q, t, DMode::NMinusOne).unwrap();
            let view = ScalarView::for_codec(&codec);
            assert_eq!(view.rows(), q.pow(t as u32 + 1));
            // Row weight t(2q-1) holds whenever no theta coefficient
            // vanishes; at n = Q the zero evaluation point drops l >= 1
            // rows below the bound, so assert <=, exact elsewhere.
            let bound = t * (2 * q - 1);
            for row in 0..view.rows() {
                assert!(view.row_weight(row) <= bound);
            }
            if codec.params().n < codec.field().size() {
                assert!((0..view.rows()).all(|r| view.row_weight(r) == bound));
            }
            let weights = view.col_weights();
            if codec.params().n < codec.field().size() {
                assert!(weights.iter().all(|&w| w == q || w == 2 * q));
                let fixed = weights.iter().filter(|&&w| w == q).count();
                assert_eq!(
                    fixed,
                    t * codec.params().alpha,
                    "t*alpha fixed-point columns"
                );
            }
        }
    }

    #[test]
    fn rank_equals_q_alpha_and_codewords_lie_in_nullspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for (q, t) in [(2usize, 2usize), (2, 3)] {
            let codec = MsrCodec::for_grid(q, t, DMode::NMinusOne).unwrap();
            let view = ScalarView::for_codec(&codec);
            let dense = view.dense();
            assert_eq!(
                rank_over_gf(codec.field(), &dense),
                q * codec.params().alpha
            );
            for _ in 0..10 {
                let cube = random_codeword(&codec, &mut rng);
                assert!(view.syndrome_is_zero(&cube));
                let mut bad = cube.clone();
                let j = rng.gen_range(0..codec.params().n);
                let r = rng.gen_range(0..codec.params().alpha);
                bad.set(j, r, codec.field().add(bad.get(j, r), Gf::ONE));
                assert!(!view.syndrome_is_zero(&bad));
            }
        }
    }

    #[test]
    fn syndrome_agrees_with_codec_verifier() {
        let codec = MsrCodec::for_grid(2, 3, DMode::NMinusOne).unwrap();
        let view = ScalarView::for_codec(&codec);
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for _ in 0..50 {
            let cube = random_codeword(&codec, &mut rng);
            assert!(view.syndrome_is_zero(&cube) && codec.verify_parity(&cube));
        }
        for _ in 0..50 {
            let mut cube = DataCube::zero(6, 8);
            for j in 0..6 {
                for r in 0..8 {
                    cube.set(j, r, Gf(rng.gen_range(0..8)));
                }
            }
            assert_eq!(view.syndrome_is_zero(&cube), codec.verify_parity(&cube));
        }
    }
}
