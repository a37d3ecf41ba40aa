//! The coupled-layer MSR codec over GF(2^m) symbols.
//!
//! A codeword is a cube A(x, y; z) satisfying, for every plane z and parity
//! row l,
//!
//! ```text
//!   sum_{x,y} theta[l][(x,y)] A(x,y; z)
//!     + u * sum_{y} sum_{x != z_y} theta[l][(x,y)] A(z_y,y; x,z_~y) = 0
//! ```
//!
//! Equivalently: pairwise coupling of companion symbols turns every plane of
//! the cube into a codeword of the base MDS code. Repair of node (x0, y0)
//! reads only the beta planes with z_y0 = x0 from each helper; data
//! collection recovers up to n-k erased nodes by solving planes in
//! increasing intersection-score order.

use std::collections::HashMap;
use std::sync::Arc;

use crate::coupling::{PairCoupler, ScalarCoupler};
use crate::cube::{CubeGeometry, ErasurePattern, NodeId};
use crate::gf::{build_field, pick_u, FieldTable, Gf};
use crate::mds::{build_theta, smds_decode, Theta, ThetaKind};
use crate::{Error, Result};

/// Which symbol alphabet a parameter set uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlphabetDesc {
    /// GF(2^m) scalars with coupling constant u.
    Field { m: usize, modulus: u32, u: u16 },
    /// Binary (p-1)-tuples over the RDP base code, coupled by the companion
    /// matrix of `coupler_poly`.
    Binary { p: usize, coupler_poly: u32 },
}

impl AlphabetDesc {
    /// Bytes per symbol on the wire.
    pub fn symbol_width(&self) -> usize {
        self.tuple_len().div_ceil(8)
    }

    /// Bits per symbol.
    pub fn tuple_len(&self) -> usize {
        match *self {
            AlphabetDesc::Field { m, .. } => m,
            AlphabetDesc::Binary { p, .. } => p - 1,
        }
    }
}

/// Helper-count mode: repair downloads from all survivors, or from all but
/// one (the aloof node).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DMode {
    NMinusOne,
    NMinusTwo,
}

impl DMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DMode::NMinusOne => "n-1",
            DMode::NMinusTwo => "n-2",
        }
    }

    pub fn parse(s: &str) -> Result<DMode> {
        match s {
            "n-1" => Ok(DMode::NMinusOne),
            "n-2" => Ok(DMode::NMinusTwo),
            _ => Err(Error::ManifestFormat(format!("unknown d mode {s:?}"))),
        }
    }
}

/// Full parameter set of one code instance.
///
/// q, t, n, k, d, alpha, beta always describe the parent (q, t) grid; a
/// shortened code additionally pins the first `shorten_by` systematic nodes
/// to zero, and the `*_eff` accessors give the externally visible shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsrParams {
    pub q: usize,
    pub t: usize,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub alpha: usize,
    pub beta: usize,
    pub shorten_by: usize,
    pub theta: ThetaKind,
    pub alphabet: AlphabetDesc,
}

/// Parameters for the (n = qt, k, d) code on a q x t grid.
pub fn derive_params(q: usize, t: usize, mode: DMode) -> Result<MsrParams> {
    if q < 2 || t < 2 {
        return Err(Error::BadParameter("need q >= 2 and t >= 2"));
    }
    let n = q * t;
    let (k, theta) = match mode {
        DMode::NMinusOne => (q * (t - 1), ThetaKind::Vandermonde),
        DMode::NMinusTwo => (n - q - 1, ThetaKind::CauchyIdentity),
    };
    if k == 0 {
        return Err(Error::BadParameter("code has no data nodes"));
    }
    let d = match mode {
        DMode::NMinusOne => n - 1,
        DMode::NMinusTwo => n - 2,
    };
    let geom = CubeGeometry::new(q, t)?;
    // Smallest binary field with at least max(n, 4) elements.
    let mut m = 2;
    while (1usize << m) < n {
        m += 1;
    }
    let field = build_field(m)?;
    let u = pick_u(&field)?;
    Ok(MsrParams {
        q,
        t,
        n,
        k,
        d,
        alpha: geom.alpha(),
        beta: geom.beta(),
        shorten_by: 0,
        theta,
        alphabet: AlphabetDesc::Field {
            m,
            modulus: field.modulus(),
            u: u.0,
        },
    })
}

/// Parameters for an (n, k) pair that need not factor as a full grid: with
/// q = n - k and delta = q*ceil(n/q) - n, the (n + delta, k + delta) parent
/// is built and its first delta systematic nodes are pinned to zero.
pub fn derive_params_from_nk(n: usize, k: usize) -> Result<MsrParams> {
    if k == 0 || k >= n {
        return Err(Error::BadParameter("need 0 < k < n"));
    }
    let q = n - k;
    let t = n.div_ceil(q);
    if q < 2 || t < 2 {
        return Err(Error::BadShape { n, k, q });
    }
    let delta = q * t - n;
    let mut params = derive_params(q, t, DMode::NMinusOne)?;
    params.shorten_by = delta;
    Ok(params)
}

impl MsrParams {
    /// Parity rows of the base code.
    pub fn parity_rows(&self) -> usize {
        self.n - self.k
    }

    pub fn dmode(&self) -> DMode {
        if self.d == self.n - 1 {
            DMode::NMinusOne
        } else {
            DMode::NMinusTwo
        }
    }

    pub fn n_eff(&self) -> usize {
        self.n - self.shorten_by
    }

    pub fn k_eff(&self) -> usize {
        self.k - self.shorten_by
    }

    pub fn d_eff(&self) -> usize {
        self.d - self.shorten_by
    }

    /// Message symbols per stripe: B = k * alpha.
    pub fn message_len(&self) -> usize {
        self.k_eff() * self.alpha
    }

    pub fn symbol_width(&self) -> usize {
        self.alphabet.symbol_width()
    }

    fn validate(&self) -> Result<()> {
        if self.n != self.q * self.t {
            return Err(Error::BadParameter("n must equal q*t"));
        }
        let expect_k = match self.dmode() {
            DMode::NMinusOne => self.q * (self.t - 1),
            DMode::NMinusTwo => self.n - self.q - 1,
        };
        if self.d != self.n - 1 && self.d != self.n - 2 {
            return Err(Error::BadParameter("d must be n-1 or n-2"));
        }
        if self.k != expect_k {
            return Err(Error::BadParameter("k inconsistent with d mode"));
        }
        if self.shorten_by >= self.q && self.shorten_by != 0 {
            return Err(Error::BadParameter("shorten_by must be below q"));
        }
        if self.shorten_by > 0 && self.dmode() == DMode::NMinusTwo {
            return Err(Error::BadParameter("shortening requires d = n-1"));
        }
        Ok(())
    }
}

/// The (q x t) x alpha symbol cube; index = node column * alpha + plane rank.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DataCube<S> {
    n: usize,
    alpha: usize,
    data: Vec<S>,
}

impl<S: Copy + Default> DataCube<S> {
    pub fn zero(n: usize, alpha: usize) -> DataCube<S> {
        DataCube {
            n,
            alpha,
            data: vec![S::default(); n * alpha],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    #[inline]
    pub fn get(&self, node_col: usize, plane: usize) -> S {
        self.data[node_col * self.alpha + plane]
    }

    #[inline]
    pub fn set(&mut self, node_col: usize, plane: usize, v: S) {
        self.data[node_col * self.alpha + plane] = v;
    }

    /// The alpha symbols of one node, in plane-rank order.
    pub fn node(&self, node_col: usize) -> &[S] {
        &self.data[node_col * self.alpha..(node_col + 1) * self.alpha]
    }

    pub fn node_mut(&mut self, node_col: usize) -> &mut [S] {
        &mut self.data[node_col * self.alpha..(node_col + 1) * self.alpha]
    }
}

/// Whether a solved plane unknown was a cube value or a coupled value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnknownKind {
    /// The symbol itself (intersection point, or companion node intact).
    Direct,
    /// The coupled value; the symbol emerges after pairing with its
    /// same-round companion.
    Coupled,
}

/// One plane solve during data collection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneEvent {
    pub plane: usize,
    pub round: usize,
    pub unknowns: Vec<(NodeId, UnknownKind)>,
}

/// Order in which collection visited planes, for inspection and tests.
#[derive(Clone, Debug, Default)]
pub struct DecodeTrace {
    pub planes: Vec<PlaneEvent>,
}

/// Accounting record of one node repair.
#[derive(Clone, Debug)]
pub struct RepairTranscript<S> {
    pub failed: NodeId,
    /// Helpers in column order.
    pub helpers: Vec<NodeId>,
    pub aloof: Option<NodeId>,
    /// Plane ranks read from each helper (always the repair planes of the
    /// failed node, beta of them).
    pub downloads: std::collections::BTreeMap<NodeId, Vec<usize>>,
    /// Total symbols moved = d_eff * beta.
    pub total_downloaded: usize,
    /// The regenerated node content, plane-rank order.
    pub content: Vec<S>,
}

/// Scalar-field coupled-layer codec.
#[derive(Clone, Debug)]
pub struct MsrCodec {
    params: MsrParams,
    geom: CubeGeometry,
    field: Arc<FieldTable>,
    theta: Theta,
    coupler: ScalarCoupler,
}

impl MsrCodec {
    pub fn new(params: MsrParams) -> Result<MsrCodec> {
        params.validate()?;
        let AlphabetDesc::Field { m, modulus, u } = params.alphabet else {
            return Err(Error::BadParameter("scalar codec needs a field alphabet"));
        };
        let field = build_field(m)?;
        if field.modulus() != modulus {
            return Err(Error::BadParameter("unsupported field modulus"));
        }
        let field = Arc::new(field);
        let geom = CubeGeometry::new(params.q, params.t)?;
        let theta = build_theta(params.parity_rows(), params.n, &field, params.theta)?;
        let coupler = ScalarCoupler::new(field.clone(), Gf(u))?;
        Ok(MsrCodec {
            params,
            geom,
            field,
            theta,
            coupler,
        })
    }

    /// Codec for the grid (q, t) with everything else derived.
    pub fn for_grid(q: usize, t: usize, mode: DMode) -> Result<MsrCodec> {
        MsrCodec::new(derive_params(q, t, mode)?)
    }

    pub fn params(&self) -> &MsrParams {
        &self.params
    }

    pub fn geometry(&self) -> &CubeGeometry {
        &self.geom
    }

    pub fn field(&self) -> &FieldTable {
        &self.field
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn u(&self) -> Gf {
        self.coupler.u()
    }

    fn col(&self, node: NodeId) -> usize {
        self.geom.node_index(node)
    }

    fn is_pinned(&self, node: NodeId) -> bool {
        self.col(node) < self.params.shorten_by
    }

    /// The n - k parity nodes: the trailing columns.
    pub fn parity_nodes(&self) -> Vec<NodeId> {
        (self.params.k..self.params.n)
            .map(|j| self.geom.node_at(j))
            .collect()
    }

    /// The k_eff data nodes (pinned columns excluded).
    pub fn data_nodes(&self) -> Vec<NodeId> {
        (self.params.shorten_by..self.params.k)
            .map(|j| self.geom.node_at(j))
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

    /// Systematic encoding: lays the message into the data nodes and solves
    /// the parity nodes by data collection.
    pub fn encode_systematic(&self, message: &[Gf]) -> Result<DataCube<Gf>> {
        let want = self.params.message_len();
        if message.len() != want {
            return Err(Error::BadMessageLength {
                got: message.len(),
                want,
            });
        }
        if message.iter().any(|s| s.0 as usize >= self.field.size()) {
            return Err(Error::BadParameter("message symbol outside the field"));
        }
        let mut cube = DataCube::zero(self.params.n, self.params.alpha);
        for (i, j) in (self.params.shorten_by..self.params.k).enumerate() {
            cube.node_mut(j)
                .copy_from_slice(&message[i * self.params.alpha..(i + 1) * self.params.alpha]);
        }
        let parities = ErasurePattern::new(self.parity_nodes());
        self.collect_data(&cube, &parities)
    }

    /// Extracts the message from a full cube (inverse of systematic layout).
    pub fn message_of(&self, cube: &DataCube<Gf>) -> Vec<Gf> {
        let mut out = Vec::with_capacity(self.params.message_len());
        for j in self.params.shorten_by..self.params.k {
            out.extend_from_slice(cube.node(j));
        }
        out
    }

    /// Evaluates every parity equation directly on the cube.
    pub fn verify_parity(&self, cube: &DataCube<Gf>) -> bool {
        let (q, t, r) = (self.params.q, self.params.t, self.params.parity_rows());
        for rank in 0..self.params.alpha {
            for l in 0..r {
                let mut acc = Gf::ZERO;
                for j in 0..self.params.n {
                    acc = self
                        .field
                        .add(acc, self.field.mul(self.theta.at(l, j), cube.get(j, rank)));
                }
                for y in 1..=t as u8 {
                    let zy = self.geom.plane_coord(rank, y);
                    let owner = self.col(NodeId::new(zy, y));
                    for x in 0..q as u8 {
                        if x == zy {
                            continue;
                        }
                        let slot = self.col(NodeId::new(x, y));
                        let comp = cube.get(owner, self.geom.plane_replace(rank, y, x));
                        let term = self
                            .field
                            .mul(self.theta.at(l, slot), self.coupler.scale(comp));
                        acc = self.field.add(acc, term);
                    }
                }
                if !acc.is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// Same check through the other path: decouple, then test every plane
    /// against the base code.
    pub fn verify_parity_decoupled(&self, cube: &DataCube<Gf>) -> bool {
        let b = self.decouple(cube);
        for rank in 0..self.params.alpha {
            for l in 0..self.theta.rows() {
                let mut acc = Gf::ZERO;
                for j in 0..self.params.n {
                    acc = self
                        .field
                        .add(acc, self.field.mul(self.theta.at(l, j), b.get(j, rank)));
                }
                if !acc.is_zero() {
                    return false;
                }
            }
        }
        true
    }

    /// Applies the pair transform to every companion pair: the result is the
    /// virtual cube whose planes are base-code codewords. Fixed points pass
    /// through.
    pub fn decouple(&self, cube: &DataCube<Gf>) -> DataCube<Gf> {
        self.map_pairs(cube, |a1, a2| self.coupler.couple(a1, a2))
    }

    /// Inverse of [`decouple`](Self::decouple).
    pub fn couple_cube(&self, cube: &DataCube<Gf>) -> DataCube<Gf> {
        self.map_pairs(cube, |b1, b2| self.coupler.decouple(b1, b2))
    }

    fn map_pairs(&self, cube: &DataCube<Gf>, f: impl Fn(Gf, Gf) -> (Gf, Gf)) -> DataCube<Gf> {
        let mut out = cube.clone();
        let (q, t) = (self.params.q as u8, self.params.t as u8);
        for y in 1..=t {
            for rank in 0..self.params.alpha {
                let zy = self.geom.plane_coord(rank, y);
                // Visit each pair once: slot 1 is the smaller x.
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

    /// Recovers the full cube from one with up to n - k erased nodes.
    pub fn collect_data(
        &self,
        damaged: &DataCube<Gf>,
        erased: &ErasurePattern,
    ) -> Result<DataCube<Gf>> {
        Ok(self.collect_data_traced(damaged, erased)?.0)
    }

    /// As [`collect_data`](Self::collect_data), also reporting which plane
    /// was solved in which round and for which unknowns.
    pub fn collect_data_traced(
        &self,
        damaged: &DataCube<Gf>,
        erased: &ErasurePattern,
    ) -> Result<(DataCube<Gf>, DecodeTrace)> {
        let r = self.params.parity_rows();
        if erased.len() > r {
            return Err(Error::TooManyErasures {
                got: erased.len(),
                max: r,
            });
        }
        for node in erased.iter() {
            self.check_node(node)?;
            if self.is_pinned(node) {
                return Err(Error::BadParameter(
                    "erasure pattern includes a pinned node",
                ));
            }
        }
        let alpha = self.params.alpha;
        let mut out = damaged.clone();
        for j in 0..self.params.shorten_by {
            out.node_mut(j).fill(Gf::ZERO);
        }
        let mut trace = DecodeTrace::default();
        if erased.is_empty() {
            return Ok((out, trace));
        }
        for node in erased.iter() {
            out.node_mut(self.col(node)).fill(Gf::ZERO);
        }

        let erased_cols: Vec<usize> = erased.iter().map(|e| self.col(e)).collect();
        let scores: Vec<u8> = (0..alpha)
            .map(|rank| self.geom.intersection_score(erased, rank) as u8)
            .collect();
        // Round in which each erased symbol becomes known; guards the rule
        // that kappa* only consumes symbols from strictly earlier rounds.
        const UNSET: u8 = u8::MAX;
        let mut round_of = vec![UNSET; self.params.n * alpha];

        for s in 0..=self.geom.max_score(erased) as u8 {
            let mut pending: Vec<(NodeId, usize, Gf)> = Vec::new();
            for rank in 0..alpha {
                if scores[rank] != s {
                    continue;
                }
                let rhs = self.plane_rhs(&out, erased, rank, s, &round_of);
                let sol = smds_decode(&self.field, &self.theta, &[], &erased_cols, &rhs, &[])?;
                let mut unknowns = Vec::with_capacity(erased_cols.len());
                for (i, node) in erased.iter().enumerate() {
                    let zy = self.geom.plane_coord(rank, node.y);
                    let coupled = zy != node.x && erased.contains(NodeId::new(zy, node.y));
                    if coupled {
                        pending.push((node, rank, sol[i]));
                        unknowns.push((node, UnknownKind::Coupled));
                    } else {
                        out.set(erased_cols[i], rank, sol[i]);
                        round_of[erased_cols[i] * alpha + rank] = s;
                        unknowns.push((node, UnknownKind::Direct));
                    }
                }
                trace.planes.push(PlaneEvent {
                    plane: rank,
                    round: s as usize,
                    unknowns,
                });
            }
            // Resolve coupled values: companions always land in the same
            // round, so every partner is already in `pending`.
            let by_coord: HashMap<(u8, u8, usize), Gf> = pending
                .iter()
                .map(|&(node, rank, v)| ((node.x, node.y, rank), v))
                .collect();
            for &(node, rank, b1) in &pending {
                let (partner, partner_rank) = self
                    .geom
                    .companion_rank(node, rank)
                    .expect("coupled unknowns are not fixed");
                if node.x > partner.x {
                    continue; // handled from the slot-1 side
                }
                let b2 = by_coord[&(partner.x, partner.y, partner_rank)];
                let (a1, a2) = self.coupler.decouple(b1, b2);
                out.set(self.col(node), rank, a1);
                out.set(self.col(partner), partner_rank, a2);
                round_of[self.col(node) * alpha + rank] = s;
                round_of[self.col(partner) * alpha + partner_rank] = s;
            }
        }
        Ok((out, trace))
    }

    /// Right-hand side of the plane system: every parity equation evaluated
    /// on the known symbols (surviving nodes, plus erased symbols recovered
    /// in earlier rounds).
    fn plane_rhs(
        &self,
        out: &DataCube<Gf>,
        erased: &ErasurePattern,
        rank: usize,
        s: u8,
        round_of: &[u8],
    ) -> Vec<Gf> {
        let (q, t, r) = (self.params.q as u8, self.params.t as u8, self.theta.rows());
        let alpha = self.params.alpha;
        let mut rhs = vec![Gf::ZERO; r];
        for l in 0..r {
            let mut acc = Gf::ZERO;
            for j in 0..self.params.n {
                if !erased.contains(self.geom.node_at(j)) {
                    acc = self
                        .field
                        .add(acc, self.field.mul(self.theta.at(l, j), out.get(j, rank)));
                }
            }
            for y in 1..=t {
                let zy = self.geom.plane_coord(rank, y);
                let owner = NodeId::new(zy, y);
                let owner_col = self.col(owner);
                let owner_erased = erased.contains(owner);
                for x in 0..q {
                    if x == zy {
                        continue;
                    }
                    let slot = NodeId::new(x, y);
                    if owner_erased {
                        if erased.contains(slot) {
                            continue; // folded into the coupled unknown
                        }
                        // Companion plane has score s-1; its value must come
                        // from an earlier round.
                        let comp_rank = self.geom.plane_replace(rank, y, x);
                        assert!(
                            round_of[owner_col * alpha + comp_rank] < s,
                            "collection consumed a symbol before its round"
                        );
                    }
                    let comp = out.get(owner_col, self.geom.plane_replace(rank, y, x));
                    let term = self
                        .field
                        .mul(self.theta.at(l, self.col(slot)), self.coupler.scale(comp));
                    acc = self.field.add(acc, term);
                }
            }
            rhs[l] = acc;
        }
        rhs
    }

    /// Helpers for a repair of `failed`: every live node, minus the aloof
    /// node when one is given.
    pub fn default_helpers(&self, failed: NodeId, aloof: Option<NodeId>) -> Vec<NodeId> {
        (self.params.shorten_by..self.params.n)
            .map(|j| self.geom.node_at(j))
            .filter(|&n| n != failed && Some(n) != aloof)
            .collect()
    }

    /// Regenerates one node from the repair planes of the helpers.
    ///
    /// `helpers` must be exactly the d_eff live nodes other than the failed
    /// one (d = n-1), or all but one additional aloof node from a different
    /// section (d = n-2). Only helper symbols on the beta planes with
    /// z_y0 = x0 are ever read.
    pub fn repair_node(
        &self,
        damaged: &DataCube<Gf>,
        failed: NodeId,
        helpers: &[NodeId],
    ) -> Result<RepairTranscript<Gf>> {
        self.check_node(failed)?;
        if self.is_pinned(failed) {
            return Err(Error::BadHelperSet("cannot repair a pinned node"));
        }
        let mut seen = vec![false; self.params.n];
        for &h in helpers {
            self.check_node(h)?;
            let j = self.col(h);
            if h == failed || self.is_pinned(h) || seen[j] {
                return Err(Error::BadHelperSet("helpers must be distinct live nodes"));
            }
            seen[j] = true;
        }
        if helpers.len() != self.params.d_eff() {
            return Err(Error::BadHelperSet("helper count must equal d"));
        }
        let aloof = (self.params.shorten_by..self.params.n)
            .map(|j| self.geom.node_at(j))
            .find(|&n| n != failed && !seen[self.col(n)]);
        match self.params.dmode() {
            DMode::NMinusOne => debug_assert!(aloof.is_none()),
            DMode::NMinusTwo => {
                let a = aloof.expect("one node absent when d = n-2");
                if a.y == failed.y {
                    return Err(Error::BadHelperSet(
                        "aloof node must come from a different section",
                    ));
                }
            }
        }

        let z0 = self.geom.repair_planes(failed);
        let beta = z0.len();
        // Position of each repair plane, or usize::MAX outside Z_0: the
        // helper view is keyed by it so nothing outside Z_0 can be read.
        let mut z0_pos = vec![usize::MAX; self.params.alpha];
        for (i, &rank) in z0.iter().enumerate() {
            z0_pos[rank] = i;
        }
        let mut view: HashMap<usize, Vec<Gf>> = HashMap::new();
        for &h in helpers {
            let j = self.col(h);
            view.insert(j, z0.iter().map(|&rank| damaged.get(j, rank)).collect());
        }
        let fetch = |node: NodeId, rank: usize| -> Gf {
            if self.is_pinned(node) {
                return Gf::ZERO;
            }
            let pos = z0_pos[rank];
            debug_assert!(pos != usize::MAX, "read outside the repair planes");
            view[&self.col(node)][pos]
        };

        let (x0, y0) = (failed.x, failed.y);
        let (q, t) = (self.params.q as u8, self.params.t as u8);
        // d = n-2 processes planes by intersection score of {failed, aloof}:
        // score-1 planes surface the aloof node's off-grid symbols that
        // score-2 planes need as companions.
        let mut ordered = z0.clone();
        if let Some(a) = aloof {
            let pat = ErasurePattern::new([failed, a]);
            ordered.sort_by_key(|&rank| (self.geom.intersection_score(&pat, rank), rank));
        }
        let mut aloof_side: HashMap<usize, Gf> = HashMap::new();
        let mut content = vec![Gf::ZERO; self.params.alpha];
        for &rank in &ordered {
            let mut known: Vec<(usize, Gf)> = Vec::with_capacity(self.params.n);
            let mut unknown_cols: Vec<usize> =
                (0..q).map(|x| self.col(NodeId::new(x, y0))).collect();
            for y in 1..=t {
                if y == y0 {
                    continue;
                }
                let zy = self.geom.plane_coord(rank, y);
                for x in 0..q {
                    let slot = NodeId::new(x, y);
                    if Some(slot) == aloof {
                        unknown_cols.push(self.col(slot));
                        continue;
                    }
                    let a = fetch(slot, rank);
                    let b = if x == zy {
                        a
                    } else {
                        let owner = NodeId::new(zy, y);
                        let comp_rank = self.geom.plane_replace(rank, y, x);
                        let comp = if Some(owner) == aloof {
                            *aloof_side
                                .get(&comp_rank)
                                .expect("aloof companion recovered in a score-1 plane")
                        } else {
                            fetch(owner, comp_rank)
                        };
                        self.coupler.add(a, self.coupler.scale(comp))
                    };
                    known.push((self.col(slot), b));
                }
            }
            unknown_cols.sort_unstable();
            let sol = smds_decode(&self.field, &self.theta, &known, &unknown_cols, &[], &[])?;
            for (i, &colj) in unknown_cols.iter().enumerate() {
                let node = self.geom.node_at(colj);
                if node.y == y0 {
                    if node.x == x0 {
                        content[rank] = sol[i];
                    } else {
                        // B and A of the same slot give the companion: the
                        // failed node's symbol in the sibling plane.
                        let a_same = fetch(node, rank);
                        let comp = self.coupler.unscale(self.coupler.add(sol[i], a_same));
                        content[self.geom.plane_replace(rank, y0, node.x)] = comp;
                    }
                } else {
                    // Aloof column: in a score-1 plane the coupled value and
                    // the downloaded companion yield the aloof symbol that
                    // score-2 planes will need.
                    let zya = self.geom.plane_coord(rank, node.y);
                    if zya != node.x {
                        let owner = NodeId::new(zya, node.y);
                        let comp_rank = self.geom.plane_replace(rank, node.y, node.x);
                        let comp = fetch(owner, comp_rank);
                        aloof_side.insert(rank, self.coupler.add(sol[i], self.coupler.scale(comp)));
                    }
                }
            }
        }

        let mut helpers_sorted = helpers.to_vec();
        helpers_sorted.sort();
        let downloads = helpers_sorted.iter().map(|&h| (h, z0.clone())).collect();
        Ok(RepairTranscript {
            failed,
            helpers: helpers_sorted,
            aloof,
            downloads,
            total_downloaded: helpers.len() * beta,
            content,
        })
    }
}
