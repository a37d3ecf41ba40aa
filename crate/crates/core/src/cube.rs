//! Cube geometry: planes, incidence, companions, and erasure bookkeeping.
//!
//! The data cube has one symbol per (node, plane) pair: nodes are the qt
//! points (x, y) with x in Z_q and section y in 1..=t, planes are indexed by
//! z in Z_q^t. Everything the codecs need about *where* symbols sit --
//! which plane holds the companion of a symbol, which planes a repair
//! touches, how hard a plane is hit by an erasure pattern -- lives here,
//! independent of the symbol alphabet.

use std::collections::BTreeSet;

use crate::{Error, Result};

/// A storage node (x, y); x in 0..q, section y in 1..=t. Ordering follows
/// the base-code column order j = (y-1)q + x.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    pub x: u8,
    pub y: u8,
}

impl NodeId {
    pub fn new(x: u8, y: u8) -> NodeId {
        NodeId { x, y }
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl std::fmt::Debug for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// A plane index z = (z_1, ..., z_t), each coordinate in Z_q.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PlaneIndex {
    coords: Vec<u8>,
}

impl PlaneIndex {
    pub fn new(coords: Vec<u8>, q: usize) -> Result<PlaneIndex> {
        if coords.iter().any(|&c| (c as usize) >= q) {
            return Err(Error::BadParameter("plane coordinate out of range"));
        }
        Ok(PlaneIndex { coords })
    }

    /// z_y for 1-based section y.
    pub fn coord(&self, y: u8) -> u8 {
        self.coords[y as usize - 1]
    }

    pub fn coords(&self) -> &[u8] {
        &self.coords
    }
}

impl std::fmt::Debug for PlaneIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// One symbol position in the cube.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CubeCoord {
    pub x: u8,
    pub y: u8,
    pub z: PlaneIndex,
}

/// Companion relation of a cube coordinate.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Companion {
    /// x = z_y: the symbol pairs with itself and passes through coupling.
    Fixed,
    /// The partner coordinate (z_y, y; x, z_~y).
    Pair(CubeCoord),
}

/// A set of erased (or otherwise distinguished) nodes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ErasurePattern {
    nodes: BTreeSet<NodeId>,
}

impl ErasurePattern {
    pub fn new(nodes: impl IntoIterator<Item = NodeId>) -> ErasurePattern {
        ErasurePattern {
            nodes: nodes.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains(&node)
    }

    /// Nodes in column order.
    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }
}

/// Partition of an erasure pattern relative to one plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanePartition {
    /// Intersection points: erased (x, y) with x = z_y.
    pub e0: Vec<NodeId>,
    /// Erased nodes whose companion node (z_y, y) is intact.
    pub e1: Vec<NodeId>,
    /// Erased nodes whose companion node is also erased (x != z_y).
    pub e2: Vec<NodeId>,
}

/// Geometry of the (q x t) x q^t cube; all plane arithmetic is rank-based
/// with z_1 the most significant base-q digit.
#[derive(Clone, Debug)]
pub struct CubeGeometry {
    q: usize,
    t: usize,
    n: usize,
    alpha: usize,
    beta: usize,
    /// pow[i] = q^(t-1-i), the place value of coordinate z_(i+1).
    pow: Vec<usize>,
}

impl CubeGeometry {
    pub fn new(q: usize, t: usize) -> Result<CubeGeometry> {
        if !(2..=255).contains(&q) || !(2..=255).contains(&t) {
            return Err(Error::BadParameter("need q >= 2 and t >= 2"));
        }
        let alpha = (q as u64).checked_pow(t as u32).filter(|&a| a <= 1 << 28);
        let Some(alpha) = alpha else {
            return Err(Error::BadParameter("cube too large (q^t over 2^28)"));
        };
        let alpha = alpha as usize;
        let mut pow = vec![1usize; t];
        for i in (0..t - 1).rev() {
            pow[i] = pow[i + 1] * q;
        }
        Ok(CubeGeometry {
            q,
            t,
            n: q * t,
            alpha,
            beta: alpha / q,
            pow,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    /// Base-code column of a node: j = (y-1)q + x.
    pub fn node_index(&self, node: NodeId) -> usize {
        (node.y as usize - 1) * self.q + node.x as usize
    }

    pub fn node_at(&self, j: usize) -> NodeId {
        NodeId {
            x: (j % self.q) as u8,
            y: (j / self.q + 1) as u8,
        }
    }

    /// All nodes in column order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).map(|j| self.node_at(j))
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        (node.x as usize) < self.q && node.y >= 1 && (node.y as usize) <= self.t
    }

    /// z_y of the plane with this rank (y is 1-based).
    #[inline]
    pub fn plane_coord(&self, rank: usize, y: u8) -> u8 {
        (rank / self.pow[y as usize - 1] % self.q) as u8
    }

    /// Rank of the plane equal to `rank` except z_y = x.
    #[inline]
    pub fn plane_replace(&self, rank: usize, y: u8, x: u8) -> usize {
        let pv = self.pow[y as usize - 1];
        rank - (rank / pv % self.q) * pv + x as usize * pv
    }

    pub fn rank_of(&self, z: &PlaneIndex) -> usize {
        z.coords()
            .iter()
            .zip(&self.pow)
            .map(|(&c, &pv)| c as usize * pv)
            .sum()
    }

    pub fn plane_at(&self, rank: usize) -> PlaneIndex {
        let coords = (1..=self.t as u8)
            .map(|y| self.plane_coord(rank, y))
            .collect();
        PlaneIndex { coords }
    }

    /// q x t incidence matrix of a plane: entry (x, y) = 1 iff z_y = x, so
    /// every column has exactly one 1.
    pub fn plane_incidence(&self, z: &PlaneIndex) -> Vec<Vec<u8>> {
        let mut m = vec![vec![0u8; self.t]; self.q];
        for y in 1..=self.t as u8 {
            m[z.coord(y) as usize][y as usize - 1] = 1;
        }
        m
    }

    /// Number of erased nodes sitting on their own plane coordinate:
    /// |{ y : (z_y, y) erased }|.
    pub fn intersection_score(&self, erased: &ErasurePattern, rank: usize) -> usize {
        (1..=self.t as u8)
            .filter(|&y| {
                erased.contains(NodeId {
                    x: self.plane_coord(rank, y),
                    y,
                })
            })
            .count()
    }

    /// Largest intersection score over all planes: one per section that
    /// contains an erasure (choose z_y there accordingly, freely elsewhere).
    pub fn max_score(&self, erased: &ErasurePattern) -> usize {
        let sections: BTreeSet<u8> = erased.iter().map(|node| node.y).collect();
        sections.len()
    }

    /// Splits the erased nodes by their relation to one plane.
    pub fn partition(&self, erased: &ErasurePattern, rank: usize) -> PlanePartition {
        let mut part = PlanePartition {
            e0: Vec::new(),
            e1: Vec::new(),
            e2: Vec::new(),
        };
        for node in erased.iter() {
            let zy = self.plane_coord(rank, node.y);
            if node.x == zy {
                part.e0.push(node);
            } else if erased.contains(NodeId { x: zy, y: node.y }) {
                part.e2.push(node);
            } else {
                part.e1.push(node);
            }
        }
        part
    }

    /// Companion of the symbol at (node, plane): `None` for a fixed point
    /// (x = z_y), otherwise the partner (z_y, y) in the plane whose y-th
    /// coordinate is swapped to x.
    #[inline]
    pub fn companion_rank(&self, node: NodeId, rank: usize) -> Option<(NodeId, usize)> {
        let zy = self.plane_coord(rank, node.y);
        if zy == node.x {
            return None;
        }
        Some((
            NodeId { x: zy, y: node.y },
            self.plane_replace(rank, node.y, node.x),
        ))
    }

    /// Coordinate-level companion relation.
    pub fn companion(&self, c: &CubeCoord) -> Result<Companion> {
        let node = NodeId { x: c.x, y: c.y };
        if !self.contains_node(node) {
            return Err(Error::NodeOutOfRange { x: c.x, y: c.y });
        }
        let rank = self.rank_of(&c.z);
        Ok(match self.companion_rank(node, rank) {
            None => Companion::Fixed,
            Some((partner, partner_rank)) => Companion::Pair(CubeCoord {
                x: partner.x,
                y: partner.y,
                z: self.plane_at(partner_rank),
            }),
        })
    }

    /// Ranks of the beta planes a repair of `node` touches: those with
    /// z_y = x, in increasing rank order.
    pub fn repair_planes(&self, node: NodeId) -> Vec<usize> {
        (0..self.alpha)
            .filter(|&r| self.plane_coord(r, node.y) == node.x)
            .collect()
    }

    /// ASCII view of a plane against an erasure pattern: the incidence grid
    /// with erased-node entries parenthesized and intersection points
    /// starred. Rows are x = 0..q-1, columns y = 1..t.
    pub fn pict(&self, erased: &ErasurePattern, z: &PlaneIndex) -> String {
        let inc = self.plane_incidence(z);
        let mut out = String::new();
        for x in 0..self.q as u8 {
            for y in 1..=self.t as u8 {
                if y > 1 {
                    out.push(' ');
                }
                let bit = inc[x as usize][y as usize - 1];
                if erased.contains(NodeId { x, y }) {
                    out.push('(');
                    out.push(char::from(b'0' + bit));
                    out.push(')');
                    if bit == 1 {
                        out.push('*');
                    }
                } else {
                    out.push(char::from(b'0' + bit));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(geom: &CubeGeometry, coords: &[u8]) -> PlaneIndex {
        PlaneIndex::new(coords.to_vec(), geom.q()).unwrap()
    }

    fn pattern(nodes: &[(u8, u8)]) -> ErasurePattern {
        ErasurePattern::new(nodes.iter().map(|&(x, y)| NodeId { x, y }))
    }

    #[test]
    fn incidence_of_worked_plane() {
        let g = CubeGeometry::new(4, 5).unwrap();
        let z = plane(&g, &[1, 2, 3, 1, 0]);
        let m = g.plane_incidence(&z);
        let expect = [
            [0, 0, 0, 0, 1],
            [1, 0, 0, 1, 0],
            [0, 1, 0, 0, 0],
            [0, 0, 1, 0, 0],
        ];
        for x in 0..4 {
            assert_eq!(m[x], expect[x], "row x={x}");
        }
        // Every column carries exactly one 1; the all-zero plane puts them
        // all in the first row.
        for y in 0..5 {
            assert_eq!((0..4).map(|x| m[x][y] as usize).sum::<usize>(), 1);
        }
        let z0 = plane(&g, &[0, 0, 0, 0, 0]);
        let m0 = g.plane_incidence(&z0);
        assert_eq!(m0[0], [1, 1, 1, 1, 1]);
    }

    #[test]
    fn score_of_worked_pattern() {
        let g = CubeGeometry::new(4, 5).unwrap();
        let e = pattern(&[(0, 2), (1, 2), (2, 2), (2, 4)]);
        let z = plane(&g, &[1, 2, 3, 1, 0]);
        assert_eq!(g.intersection_score(&e, g.rank_of(&z)), 1);
        let brute = (0..g.alpha())
            .map(|r| g.intersection_score(&e, r))
            .max()
            .unwrap();
        assert_eq!(brute, 2);
        assert_eq!(g.max_score(&e), 2);
    }

    #[test]
    fn max_score_matches_brute_force_everywhere() {
        let g = CubeGeometry::new(2, 3).unwrap();
        let all: Vec<NodeId> = g.nodes().collect();
        for mask in 0u32..1 << 6 {
            let e = ErasurePattern::new(
                all.iter()
                    .copied()
                    .enumerate()
                    .filter_map(|(i, n)| (mask >> i & 1 == 1).then_some(n)),
            );
            let brute = (0..g.alpha())
                .map(|r| g.intersection_score(&e, r))
                .max()
                .unwrap();
            assert_eq!(g.max_score(&e), brute, "mask={mask:#b}");
        }
    }

    #[test]
    fn empty_pattern_scores_zero() {
        let g = CubeGeometry::new(3, 3).unwrap();
        let e = ErasurePattern::default();
        for r in 0..g.alpha() {
            assert_eq!(g.intersection_score(&e, r), 0);
        }
    }

    #[test]
    fn partition_of_worked_plane() {
        let g = CubeGeometry::new(4, 5).unwrap();
        let e = pattern(&[(1, 2), (2, 2), (2, 3), (3, 3)]);
        let z = plane(&g, &[1, 2, 3, 1, 0]);
        let part = g.partition(&e, g.rank_of(&z));
        assert_eq!(part.e0, vec![NodeId::new(2, 2), NodeId::new(3, 3)]);
        assert!(part.e1.is_empty());
        assert_eq!(part.e2, vec![NodeId::new(1, 2), NodeId::new(2, 3)]);
    }

    #[test]
    fn partition_is_exhaustive_and_scores_e0() {
        for (q, t) in [(2usize, 2usize), (2, 3), (3, 2), (3, 3)] {
            let g = CubeGeometry::new(q, t).unwrap();
            let all: Vec<NodeId> = g.nodes().collect();
            for mask in 0u32..1 << g.n() {
                let e = ErasurePattern::new(
                    all.iter()
                        .copied()
                        .enumerate()
                        .filter_map(|(i, n)| (mask >> i & 1 == 1).then_some(n)),
                );
                for r in 0..g.alpha() {
                    let part = g.partition(&e, r);
                    assert_eq!(part.e0.len(), g.intersection_score(&e, r));
                    let mut merged: Vec<NodeId> = part
                        .e0
                        .iter()
                        .chain(&part.e1)
                        .chain(&part.e2)
                        .copied()
                        .collect();
                    merged.sort();
                    let original: Vec<NodeId> = e.iter().collect();
                    assert_eq!(merged, original, "partition covers E exactly once");
                    // e2 members are intersection points of their companion
                    // plane, which has the same score.
                    for &node in &part.e2 {
                        let (partner, pr) = g.companion_rank(node, r).unwrap();
                        assert!(e.contains(partner));
                        let pp = g.partition(&e, pr);
                        assert!(pp.e0.contains(&node));
                        assert_eq!(g.intersection_score(&e, pr), g.intersection_score(&e, r));
                    }
                }
            }
        }
    }

    #[test]
    fn companion_of_worked_coordinate() {
        let g = CubeGeometry::new(4, 5).unwrap();
        let c = CubeCoord {
            x: 1,
            y: 1,
            z: plane(&g, &[3, 0, 0, 0, 0]),
        };
        match g.companion(&c).unwrap() {
            Companion::Pair(p) => {
                assert_eq!((p.x, p.y), (3, 1));
                assert_eq!(p.z.coords(), &[1, 0, 0, 0, 0]);
            }
            Companion::Fixed => panic!("not a fixed point"),
        }
        let fixed = CubeCoord {
            x: 3,
            y: 1,
            z: plane(&g, &[3, 0, 0, 0, 0]),
        };
        assert_eq!(g.companion(&fixed).unwrap(), Companion::Fixed);
    }

    #[test]
    fn companion_is_an_involution() {
        let g = CubeGeometry::new(3, 2).unwrap();
        for j in 0..g.n() {
            let node = g.node_at(j);
            for r in 0..g.alpha() {
                match g.companion_rank(node, r) {
                    None => assert_eq!(g.plane_coord(r, node.y), node.x),
                    Some((partner, pr)) => {
                        let (back, br) = g.companion_rank(partner, pr).unwrap();
                        assert_eq!((back, br), (node, r));
                    }
                }
            }
        }
    }

    #[test]
    fn repair_planes_fix_one_coordinate() {
        let g = CubeGeometry::new(4, 5).unwrap();
        let planes = g.repair_planes(NodeId::new(3, 1));
        assert_eq!(planes.len(), g.beta());
        assert_eq!(planes.len(), 256);
        assert!(planes.iter().all(|&r| g.plane_coord(r, 1) == 3));

        let g = CubeGeometry::new(2, 2).unwrap();
        assert_eq!(g.repair_planes(NodeId::new(0, 2)), vec![0, 2]);

        let g = CubeGeometry::new(3, 3).unwrap();
        for node in g.nodes() {
            assert_eq!(g.repair_planes(node).len(), g.beta());
        }
    }

    #[test]
    fn rank_round_trip_and_significance() {
        let g = CubeGeometry::new(3, 3).unwrap();
        for r in 0..g.alpha() {
            let z = g.plane_at(r);
            assert_eq!(g.rank_of(&z), r);
        }
        // z_1 is the most significant digit.
        let z = plane(&g, &[2, 0, 1]);
        assert_eq!(g.rank_of(&z), (2 * 9) + 1);
        assert_eq!(
            g.plane_replace(g.rank_of(&z), 2, 2),
            g.rank_of(&plane(&g, &[2, 2, 1]))
        );
    }

    #[test]
    fn pict_of_worked_plane() {
        let g = CubeGeometry::new(4, 5).unwrap();
        let e = pattern(&[(0, 2), (1, 2), (2, 2), (2, 4)]);
        let z = plane(&g, &[1, 2, 3, 1, 0]);
        let got = g.pict(&e, &z);
        let want = "\
0 (0) 0 0 1
1 (0) 0 1 0
0 (1)* 0 (0) 0
0 0 1 0 0
";
        assert_eq!(got, want);
        assert_eq!(
            got.matches('*').count(),
            g.intersection_score(&e, g.rank_of(&z))
        );
        // No erasures: plain grid, no parentheses or stars.
        let empty = g.pict(&ErasurePattern::default(), &z);
        assert!(!empty.contains('(') && !empty.contains('*'));
    }

    #[test]
    fn star_count_equals_score_randomly() {
        let g = CubeGeometry::new(3, 3).unwrap();
        let e = pattern(&[(0, 1), (2, 2), (1, 2)]);
        for r in 0..g.alpha() {
            let s = g.pict(&e, &g.plane_at(r));
            assert_eq!(s.matches('*').count(), g.intersection_score(&e, r));
        }
    }

    #[test]
    fn bad_coordinates_rejected() {
        let g = CubeGeometry::new(2, 2).unwrap();
        assert!(PlaneIndex::new(vec![0, 2], 2).is_err());
        let c = CubeCoord {
            x: 0,
            y: 3,
            z: plane(&g, &[0, 0]),
        };
        assert!(matches!(g.companion(&c), Err(Error::NodeOutOfRange { .. })));
        assert!(CubeGeometry::new(1, 2).is_err());
    }
}
