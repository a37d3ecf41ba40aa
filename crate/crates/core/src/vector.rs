//! The coupled-layer construction over a generic vector alphabet.
//!
//! The scalar base code is replaced by any MDS code over m-bit binary
//! tuples — here RDP, whose two parities make a (p+1, p-1) distance-3 code —
//! and the field-constant coupling by the companion-matrix coupler. The cube
//! machinery is unchanged: q^t layers of base codewords, companion pairs
//! coupled by a (4, Q^2, 3) MDS relation, repair from beta symbols per
//! helper. Every operation on symbol data is XOR-only.

use std::collections::HashMap;

use crate::coupling::{PairCoupler, Slot, VectorCoupler};
use crate::cube::{CubeGeometry, ErasurePattern, NodeId};
use crate::msr::{AlphabetDesc, DataCube, MsrParams, RepairTranscript};
use crate::rdp::{Bits, RdpCode};
use crate::{Error, Result};

/// Coupled-layer MSR codec over binary (p-1)-tuples.
#[derive(Clone, Debug)]
pub struct VectorMsrCodec {
    params: MsrParams,
    geom: CubeGeometry,
    base: RdpCode,
    coupler: VectorCoupler,
}

/// Builds the MSR instance on top of a vector-alphabet base code: block
/// length n = qt with n - k = q parities, plus a pair coupler over the same
/// tuples.
pub fn generic_instance(base: RdpCode, coupler: VectorCoupler) -> Result<VectorMsrCodec> {
    if coupler.tuple_len() != base.tuple_len() {
        return Err(Error::BadParameter(
            "coupler and base code tuple widths differ",
        ));
    }
    let n = base.block_len();
    let q = n - base.dimension();
    if q < 2 || !n.is_multiple_of(q) || n / q < 2 {
        return Err(Error::BadShape {
            n,
            k: base.dimension(),
            q,
        });
    }
    let t = n / q;
    let geom = CubeGeometry::new(q, t)?;
    let params = MsrParams {
        q,
        t,
        n,
        k: base.dimension(),
        d: n - 1,
        alpha: geom.alpha(),
        beta: geom.beta(),
        shorten_by: 0,
        theta: crate::mds::ThetaKind::Vandermonde, // unused for a binary base
        alphabet: AlphabetDesc::Binary {
            p: base.p(),
            coupler_poly: coupler.poly(),
        },
    };
    Ok(VectorMsrCodec {
        params,
        geom,
        base,
        coupler,
    })
}

impl VectorMsrCodec {
    /// The RDP-based instance for odd prime p.
    pub fn for_p(p: usize) -> Result<VectorMsrCodec> {
        let base = crate::rdp::rdp_codec(p)?;
        let coupler = crate::coupling::build_vector_coupler(base.tuple_len())?;
        generic_instance(base, coupler)
    }

    pub fn params(&self) -> &MsrParams {
        &self.params
    }

    pub fn geometry(&self) -> &CubeGeometry {
        &self.geom
    }

    pub fn base(&self) -> &RdpCode {
        &self.base
    }

    pub fn coupler(&self) -> &VectorCoupler {
        &self.coupler
    }

    fn col(&self, node: NodeId) -> usize {
        self.geom.node_index(node)
    }

    fn mask(&self) -> u64 {
        (1u64 << self.base.tuple_len()) - 1
    }

    pub fn parity_nodes(&self) -> Vec<NodeId> {
        (self.params.k..self.params.n)
            .map(|j| self.geom.node_at(j))
            .collect()
    }

    pub fn default_helpers(&self, failed: NodeId) -> Vec<NodeId> {
        (0..self.params.n)
            .map(|j| self.geom.node_at(j))
            .filter(|&n| n != failed)
            .collect()
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if !self.geom.contains_node(node) {
            return Err(Error::NodeOutOfRange {
                x: node.x,
                y: node.y,
            });
        }
        Ok(())
    }

    /// Systematic encoding: message into the first k nodes, the q parity
    /// nodes recovered by data collection.
    pub fn encode_systematic(&self, message: &[Bits]) -> Result<DataCube<Bits>> {
        let want = self.params.message_len();
        if message.len() != want {
            return Err(Error::BadMessageLength {
                got: message.len(),
                want,
            });
        }
        if message.iter().any(|b| b.0 & !self.mask() != 0) {
            return Err(Error::BadParameter("message tuple wider than p-1 bits"));
        }
        let mut cube = DataCube::zero(self.params.n, self.params.alpha);
        for j in 0..self.params.k {
            cube.node_mut(j)
                .copy_from_slice(&message[j * self.params.alpha..(j + 1) * self.params.alpha]);
        }
        let parities = ErasurePattern::new(self.parity_nodes());
        self.collect_data(&cube, &parities)
    }

    pub fn message_of(&self, cube: &DataCube<Bits>) -> Vec<Bits> {
        let mut out = Vec::with_capacity(self.params.message_len());
        for j in 0..self.params.k {
            out.extend_from_slice(cube.node(j));
        }
        out
    }

    /// B at `node`'s slot from the A values of both pair members.
    fn pair_b(&self, node: NodeId, owner: NodeId, a: Bits, comp: Bits) -> Bits {
        let four = if node.x < owner.x {
            self.coupler
                .recover_any2((Slot::A1, a), (Slot::A2, comp))
                .expect("distinct slots")
        } else {
            self.coupler
                .recover_any2((Slot::A2, a), (Slot::A1, comp))
                .expect("distinct slots")
        };
        if node.x < owner.x {
            four[0]
        } else {
            four[1]
        }
    }

    /// True iff every plane of the decoupled cube is a base-code codeword.
    pub fn verify_parity(&self, cube: &DataCube<Bits>) -> bool {
        let b = self.decouple(cube);
        for rank in 0..self.params.alpha {
            let word: Vec<Bits> = (0..self.params.n).map(|j| b.get(j, rank)).collect();
            match self.base.encode(&word[..self.params.k]) {
                Ok(full) => {
                    if full != word {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        true
    }

    /// The layered view: every companion pair mapped to its B values.
    pub fn decouple(&self, cube: &DataCube<Bits>) -> DataCube<Bits> {
        self.map_pairs(cube, |a1, a2| self.coupler.couple(a1, a2))
    }

    /// Inverse of [`decouple`](Self::decouple).
    pub fn couple_cube(&self, cube: &DataCube<Bits>) -> DataCube<Bits> {
        self.map_pairs(cube, |b1, b2| self.coupler.decouple(b1, b2))
    }

    fn map_pairs(
        &self,
        cube: &DataCube<Bits>,
        f: impl Fn(Bits, Bits) -> (Bits, Bits),
    ) -> DataCube<Bits> {
        let mut out = cube.clone();
        let (q, t) = (self.params.q as u8, self.params.t as u8);
        for y in 1..=t {
            for rank in 0..self.params.alpha {
                let zy = self.geom.plane_coord(rank, y);
                for x in 0..zy.min(q) {
                    let partner_rank = self.geom.plane_replace(rank, y, x);
                    let j1 = self.col(NodeId::new(x, y));
                    let j2 = self.col(NodeId::new(zy, y));
                    let (v1, v2) = f(cube.get(j1, rank), cube.get(j2, partner_rank));
                    out.set(j1, rank, v1);
                    out.set(j2, partner_rank, v2);
                }
            }
        }
        out
    }

    /// Recovers the full cube from at most n - k = q erased nodes, round by
    /// round over intersection scores: compute B at every surviving slot,
    /// erasure-decode the plane in the base code, then map the erased B
    /// values back to stored symbols.
    pub fn collect_data(
        &self,
        damaged: &DataCube<Bits>,
        erased: &ErasurePattern,
    ) -> Result<DataCube<Bits>> {
        let r = self.params.parity_rows();
        if erased.len() > r {
            return Err(Error::TooManyErasures {
                got: erased.len(),
                max: r,
            });
        }
        for node in erased.iter() {
            self.check_node(node)?;
        }
        let alpha = self.params.alpha;
        let mut out = damaged.clone();
        if erased.is_empty() {
            return Ok(out);
        }
        for node in erased.iter() {
            out.node_mut(self.col(node)).fill(Bits::ZERO);
        }
        let scores: Vec<u8> = (0..alpha)
            .map(|rank| self.geom.intersection_score(erased, rank) as u8)
            .collect();
        const UNSET: u8 = u8::MAX;
        let mut round_of = vec![UNSET; self.params.n * alpha];

        for s in 0..=self.geom.max_score(erased) as u8 {
            let mut pending: Vec<(NodeId, usize, Bits)> = Vec::new();
            for rank in 0..alpha {
                if scores[rank] != s {
                    continue;
                }
                let mut word: Vec<Option<Bits>> = Vec::with_capacity(self.params.n);
                for j in 0..self.params.n {
                    let node = self.geom.node_at(j);
                    if erased.contains(node) {
                        word.push(None);
                        continue;
                    }
                    let a = out.get(j, rank);
                    let b = match self.geom.companion_rank(node, rank) {
                        None => a,
                        Some((owner, comp_rank)) => {
                            if erased.contains(owner) {
                                // Companion plane has score s - 1: its value
                                // must date from an earlier round.
                                assert!(
                                    round_of[self.col(owner) * alpha + comp_rank] < s,
                                    "collection consumed a symbol before its round"
                                );
                            }
                            self.pair_b(node, owner, a, out.get(self.col(owner), comp_rank))
                        }
                    };
                    word.push(Some(b));
                }
                self.base.decode_erasures(&mut word)?;
                for node in erased.iter() {
                    let j = self.col(node);
                    let b = word[j].expect("erasure decoder fills every position");
                    let zy = self.geom.plane_coord(rank, node.y);
                    if zy == node.x {
                        // Fixed point: the stored symbol is the B value.
                        out.set(j, rank, b);
                        round_of[j * alpha + rank] = s;
                    } else if erased.contains(NodeId::new(zy, node.y)) {
                        // Companion erased too; pairs resolve after the round.
                        pending.push((node, rank, b));
                    } else {
                        // Companion survives: two of the four pair values
                        // are known, recover the stored symbol.
                        let owner = NodeId::new(zy, node.y);
                        let comp_rank = self.geom.plane_replace(rank, node.y, node.x);
                        let comp = out.get(self.col(owner), comp_rank);
                        let four = if node.x < owner.x {
                            self.coupler.recover_any2((Slot::B1, b), (Slot::A2, comp))?
                        } else {
                            self.coupler.recover_any2((Slot::B2, b), (Slot::A1, comp))?
                        };
                        let a = if node.x < owner.x { four[2] } else { four[3] };
                        out.set(j, rank, a);
                        round_of[j * alpha + rank] = s;
                    }
                }
            }
            let by_coord: HashMap<(u8, u8, usize), Bits> = pending
                .iter()
                .map(|&(node, rank, v)| ((node.x, node.y, rank), v))
                .collect();
            for &(node, rank, b1) in &pending {
                let (partner, partner_rank) = self
                    .geom
                    .companion_rank(node, rank)
                    .expect("pending values are paired");
                if node.x > partner.x {
                    continue;
                }
                let b2 = by_coord[&(partner.x, partner.y, partner_rank)];
                let (a1, a2) = self.coupler.decouple(b1, b2);
                out.set(self.col(node), rank, a1);
                out.set(self.col(partner), partner_rank, a2);
                round_of[self.col(node) * alpha + rank] = s;
                round_of[self.col(partner) * alpha + partner_rank] = s;
            }
        }
        Ok(out)
    }

    /// Regenerates one node from the beta symbols on planes z_y0 = x0 of
    /// each of the other n - 1 nodes: within such a plane every surviving
    /// slot's companion is itself a helper symbol in the same plane set, so
    /// all B values outside the failed section are known, the base code
    /// fills the section, and the pair relation returns the failed node's
    /// symbols in the sibling planes.
    pub fn repair_node(
        &self,
        damaged: &DataCube<Bits>,
        failed: NodeId,
        helpers: &[NodeId],
    ) -> Result<RepairTranscript<Bits>> {
        self.check_node(failed)?;
        let mut seen = vec![false; self.params.n];
        for &h in helpers {
            self.check_node(h)?;
            let j = self.col(h);
            if h == failed || seen[j] {
                return Err(Error::BadHelperSet("helpers must be distinct live nodes"));
            }
            seen[j] = true;
        }
        if helpers.len() != self.params.d {
            return Err(Error::BadHelperSet("helper count must equal d"));
        }

        let z0 = self.geom.repair_planes(failed);
        let mut z0_pos = vec![usize::MAX; self.params.alpha];
        for (i, &rank) in z0.iter().enumerate() {
            z0_pos[rank] = i;
        }
        let mut view: HashMap<usize, Vec<Bits>> = HashMap::new();
        for &h in helpers {
            let j = self.col(h);
            view.insert(j, z0.iter().map(|&rank| damaged.get(j, rank)).collect());
        }
        let fetch = |node: NodeId, rank: usize| -> Bits {
            let pos = z0_pos[rank];
            debug_assert!(pos != usize::MAX, "read outside the repair planes");
            view[&self.col(node)][pos]
        };

        let (x0, y0) = (failed.x, failed.y);
        let (q, t) = (self.params.q as u8, self.params.t as u8);
        let mut content = vec![Bits::ZERO; self.params.alpha];
        for &rank in &z0 {
            let mut word: Vec<Option<Bits>> = vec![None; self.params.n];
            for y in 1..=t {
                if y == y0 {
                    continue;
                }
                let zy = self.geom.plane_coord(rank, y);
                for x in 0..q {
                    let slot = NodeId::new(x, y);
                    let a = fetch(slot, rank);
                    let b = if x == zy {
                        a
                    } else {
                        let owner = NodeId::new(zy, y);
                        let comp = fetch(owner, self.geom.plane_replace(rank, y, x));
                        self.pair_b(slot, owner, a, comp)
                    };
                    word[self.col(slot)] = Some(b);
                }
            }
            self.base.decode_erasures(&mut word)?;
            for x in 0..q {
                let node = NodeId::new(x, y0);
                let b = word[self.col(node)].expect("decoded");
                if x == x0 {
                    content[rank] = b;
                } else {
                    // Both A and B of this slot known: the pair relation
                    // yields the failed node's symbol in the sibling plane.
                    let a = fetch(node, rank);
                    let four = if node.x < x0 {
                        self.coupler.recover_any2((Slot::B1, b), (Slot::A1, a))?
                    } else {
                        self.coupler.recover_any2((Slot::B2, b), (Slot::A2, a))?
                    };
                    let comp = if node.x < x0 { four[3] } else { four[2] };
                    content[self.geom.plane_replace(rank, y0, x)] = comp;
                }
            }
        }

        let mut helpers_sorted = helpers.to_vec();
        helpers_sorted.sort();
        let downloads = helpers_sorted.iter().map(|&h| (h, z0.clone())).collect();
        Ok(RepairTranscript {
            failed,
            helpers: helpers_sorted,
            aloof: None,
            downloads,
            total_downloaded: helpers.len() * z0.len(),
            content,
        })
    }
}
