//! One codec behind one face: scalar-field or binary-tuple instances
//! exposed through a stripe-level byte API for the storage layer and CLI.
//!
//! Symbols cross this boundary as plain `u64` values (at most `tuple_len`
//! bits each) or as wire bytes (`symbol_width` little-endian bytes per
//! symbol, alpha symbols per node per stripe).

use std::collections::BTreeMap;

use crate::cube::{CubeGeometry, ErasurePattern, NodeId};
use crate::gf::Gf;
use crate::msr::{AlphabetDesc, DataCube, MsrCodec, MsrParams};
use crate::rdp::Bits;
use crate::shard::{pack_symbols, unpack_symbols};
use crate::vector::VectorMsrCodec;
use crate::{Error, Result};

/// A fully built codec of either alphabet.
#[derive(Clone, Debug)]
pub enum CodecInstance {
    Field(MsrCodec),
    Vector(VectorMsrCodec),
}

/// Plane-level repair result at the byte layer.
#[derive(Clone, Debug)]
pub struct StripeRepair {
    /// The regenerated node payload (alpha symbols, wire format).
    pub payload: Vec<u8>,
    /// Plane ranks read from each helper.
    pub downloads: BTreeMap<NodeId, Vec<usize>>,
    /// Symbols moved in total (= d_eff * beta).
    pub total_symbols: usize,
}

impl CodecInstance {
    /// Builds the codec described by `params`, validating every derived
    /// quantity against it.
    pub fn from_params(params: MsrParams) -> Result<CodecInstance> {
        match params.alphabet {
            AlphabetDesc::Field { .. } => Ok(CodecInstance::Field(MsrCodec::new(params)?)),
            AlphabetDesc::Binary { p, coupler_poly } => {
                let base = crate::rdp::rdp_codec(p)?;
                let coupler = crate::coupling::build_vector_coupler(base.tuple_len())?;
                if coupler.poly() != coupler_poly {
                    return Err(Error::BadParameter("unsupported coupler polynomial"));
                }
                let codec = crate::vector::generic_instance(base, coupler)?;
                if *codec.params() != params {
                    return Err(Error::BadParameter(
                        "parameters inconsistent with the binary base code",
                    ));
                }
                Ok(CodecInstance::Vector(codec))
            }
        }
    }

    pub fn params(&self) -> &MsrParams {
        match self {
            CodecInstance::Field(c) => c.params(),
            CodecInstance::Vector(c) => c.params(),
        }
    }

    pub fn geometry(&self) -> &CubeGeometry {
        match self {
            CodecInstance::Field(c) => c.geometry(),
            CodecInstance::Vector(c) => c.geometry(),
        }
    }

    /// Bits per symbol.
    pub fn tuple_bits(&self) -> usize {
        self.params().alphabet.tuple_len()
    }

    /// Bytes per symbol on the wire.
    pub fn symbol_width(&self) -> usize {
        self.params().symbol_width()
    }

    /// Bytes of one node's payload for one stripe.
    pub fn node_payload_len(&self) -> usize {
        self.params().alpha * self.symbol_width()
    }

    /// Message bits consumed per stripe.
    pub fn stripe_message_bits(&self) -> usize {
        self.params().message_len() * self.tuple_bits()
    }

    /// The nodes that store data: every node except pinned ones.
    pub fn stored_nodes(&self) -> Vec<NodeId> {
        let geom = self.geometry();
        (self.params().shorten_by..self.params().n)
            .map(|j| geom.node_at(j))
            .collect()
    }

    /// Plane ranks a repair of `failed` reads from every helper.
    pub fn repair_planes(&self, failed: NodeId) -> Vec<usize> {
        self.geometry().repair_planes(failed)
    }

    /// The helper set a repair of `failed` contacts: every other stored
    /// node, minus the aloof node when one is named.
    pub fn default_helpers(&self, failed: NodeId, aloof: Option<NodeId>) -> Result<Vec<NodeId>> {
        match self {
            CodecInstance::Field(c) => Ok(c.default_helpers(failed, aloof)),
            CodecInstance::Vector(c) => {
                if aloof.is_some() {
                    return Err(Error::BadParameter(
                        "an aloof node requires the d = n-2 construction",
                    ));
                }
                Ok(c.default_helpers(failed))
            }
        }
    }

    fn check_value(&self, v: u64) -> Result<()> {
        if v >> self.tuple_bits() != 0 {
            return Err(Error::BadParameter("symbol value exceeds the alphabet"));
        }
        Ok(())
    }

    fn cube_from_values<S: Copy + Default>(
        &self,
        shards: &BTreeMap<NodeId, Vec<u64>>,
        make: impl Fn(u64) -> S,
    ) -> Result<DataCube<S>> {
        let p = self.params();
        let geom = self.geometry();
        let mut cube = DataCube::zero(p.n, p.alpha);
        for (&node, values) in shards {
            if !geom.contains_node(node) {
                return Err(Error::NodeOutOfRange {
                    x: node.x,
                    y: node.y,
                });
            }
            if values.len() != p.alpha {
                return Err(Error::ShardFormat(format!(
                    "node ({},{}) holds {} symbols, expected {}",
                    node.x,
                    node.y,
                    values.len(),
                    p.alpha
                )));
            }
            for (rank, &v) in values.iter().enumerate() {
                self.check_value(v)?;
                cube.set(geom.node_index(node), rank, make(v));
            }
        }
        Ok(cube)
    }

    /// Encodes one stripe worth of message symbol values into per-node
    /// payload bytes (pinned nodes excluded).
    pub fn encode_stripe(&self, message: &[u64]) -> Result<BTreeMap<NodeId, Vec<u8>>> {
        for &v in message {
            self.check_value(v)?;
        }
        let geom = self.geometry();
        let width = self.symbol_width();
        let mut out = BTreeMap::new();
        match self {
            CodecInstance::Field(c) => {
                let msg: Vec<Gf> = message.iter().map(|&v| Gf(v as u16)).collect();
                let cube = c.encode_systematic(&msg)?;
                for node in self.stored_nodes() {
                    let vals: Vec<u64> = cube
                        .node(geom.node_index(node))
                        .iter()
                        .map(|s| s.0 as u64)
                        .collect();
                    out.insert(node, pack_symbols(&vals, width));
                }
            }
            CodecInstance::Vector(c) => {
                let msg: Vec<Bits> = message.iter().map(|&v| Bits(v)).collect();
                let cube = c.encode_systematic(&msg)?;
                for node in self.stored_nodes() {
                    let vals: Vec<u64> = cube
                        .node(geom.node_index(node))
                        .iter()
                        .map(|s| s.0)
                        .collect();
                    out.insert(node, pack_symbols(&vals, width));
                }
            }
        }
        Ok(out)
    }

    fn shards_to_values(
        &self,
        shards: &BTreeMap<NodeId, Vec<u8>>,
    ) -> Result<BTreeMap<NodeId, Vec<u64>>> {
        let width = self.symbol_width();
        let want = self.node_payload_len();
        let mut out = BTreeMap::new();
        for (&node, bytes) in shards {
            if bytes.len() != want {
                return Err(Error::ShardFormat(format!(
                    "node ({},{}) payload is {} bytes, expected {want}",
                    node.x,
                    node.y,
                    bytes.len()
                )));
            }
            out.insert(node, unpack_symbols(bytes, width)?);
        }
        Ok(out)
    }

    /// Recovers the message symbol values of one stripe from any subset of
    /// nodes containing at least k_eff of them.
    pub fn decode_stripe(&self, available: &BTreeMap<NodeId, Vec<u8>>) -> Result<Vec<u64>> {
        let cube = self.full_cube(available)?;
        Ok(match (self, cube) {
            (CodecInstance::Field(c), Cube::Field(cube)) => {
                c.message_of(&cube).iter().map(|s| s.0 as u64).collect()
            }
            (CodecInstance::Vector(c), Cube::Vector(cube)) => {
                c.message_of(&cube).iter().map(|s| s.0).collect()
            }
            _ => unreachable!("cube variant follows codec variant"),
        })
    }

    /// Reconstructs one node's payload by full data collection from the
    /// available nodes — the naive (baseline) repair path.
    pub fn reconstruct_node(
        &self,
        available: &BTreeMap<NodeId, Vec<u8>>,
        target: NodeId,
    ) -> Result<Vec<u8>> {
        let j = self.geometry().node_index(target);
        let width = self.symbol_width();
        Ok(match self.full_cube(available)? {
            Cube::Field(cube) => {
                let vals: Vec<u64> = cube.node(j).iter().map(|s| s.0 as u64).collect();
                pack_symbols(&vals, width)
            }
            Cube::Vector(cube) => {
                let vals: Vec<u64> = cube.node(j).iter().map(|s| s.0).collect();
                pack_symbols(&vals, width)
            }
        })
    }

    fn full_cube(&self, available: &BTreeMap<NodeId, Vec<u8>>) -> Result<Cube> {
        let need = self.params().k_eff();
        if available.len() < need {
            return Err(Error::NotEnoughNodes {
                got: available.len(),
                need,
            });
        }
        let values = self.shards_to_values(available)?;
        let erased = ErasurePattern::new(
            self.stored_nodes()
                .into_iter()
                .filter(|n| !values.contains_key(n)),
        );
        match self {
            CodecInstance::Field(c) => {
                let cube = self.cube_from_values(&values, |v| Gf(v as u16))?;
                Ok(Cube::Field(c.collect_data(&cube, &erased)?))
            }
            CodecInstance::Vector(c) => {
                let cube = self.cube_from_values(&values, Bits)?;
                Ok(Cube::Vector(c.collect_data(&cube, &erased)?))
            }
        }
    }

    /// Full-parity check of one stripe; requires every stored node.
    pub fn verify_stripe(&self, shards: &BTreeMap<NodeId, Vec<u8>>) -> Result<()> {
        for node in self.stored_nodes() {
            if !shards.contains_key(&node) {
                return Err(Error::MissingShard {
                    x: node.x,
                    y: node.y,
                    stripe: 0,
                });
            }
        }
        let values = self.shards_to_values(shards)?;
        let ok = match self {
            CodecInstance::Field(c) => {
                let cube = self.cube_from_values(&values, |v| Gf(v as u16))?;
                c.verify_parity(&cube) && c.verify_parity_decoupled(&cube)
            }
            CodecInstance::Vector(c) => {
                let cube = self.cube_from_values(&values, Bits)?;
                c.verify_parity(&cube)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParityFailure(
                "stripe fails its parity checks".into(),
            ))
        }
    }

    /// Regenerates `failed` from helper symbols restricted to the repair
    /// planes: `helper_planes[h][i]` is helper h's symbol on the i-th rank
    /// of [`repair_planes`](Self::repair_planes).
    pub fn repair_stripe(
        &self,
        failed: NodeId,
        helper_planes: &BTreeMap<NodeId, Vec<u64>>,
    ) -> Result<StripeRepair> {
        let z0 = self.repair_planes(failed);
        let geom = self.geometry();
        let p = self.params();
        // Lay the helper symbols into a scratch cube; the codec reads only
        // the Z_0 cells of helper nodes, which are exactly the ones filled.
        let mut spread: BTreeMap<NodeId, Vec<u64>> = BTreeMap::new();
        let helpers: Vec<NodeId> = helper_planes.keys().copied().collect();
        for (&node, vals) in helper_planes {
            if vals.len() != z0.len() {
                return Err(Error::ShardFormat(format!(
                    "helper ({},{}) sent {} symbols, expected {}",
                    node.x,
                    node.y,
                    vals.len(),
                    z0.len()
                )));
            }
            let mut full = vec![0u64; p.alpha];
            for (i, &rank) in z0.iter().enumerate() {
                full[rank] = vals[i];
            }
            spread.insert(node, full);
        }
        let width = self.symbol_width();
        let (payload, downloads, total) = match self {
            CodecInstance::Field(c) => {
                let cube = self.cube_from_values(&spread, |v| Gf(v as u16))?;
                let tr = c.repair_node(&cube, failed, &helpers)?;
                let vals: Vec<u64> = tr.content.iter().map(|s| s.0 as u64).collect();
                (
                    pack_symbols(&vals, width),
                    tr.downloads,
                    tr.total_downloaded,
                )
            }
            CodecInstance::Vector(c) => {
                let cube = self.cube_from_values(&spread, Bits)?;
                let tr = c.repair_node(&cube, failed, &helpers)?;
                let vals: Vec<u64> = tr.content.iter().map(|s| s.0).collect();
                (
                    pack_symbols(&vals, width),
                    tr.downloads,
                    tr.total_downloaded,
                )
            }
        };
        debug_assert!(downloads.values().all(|planes| *planes == z0));
        let _ = geom;
        Ok(StripeRepair {
            payload,
            downloads,
            total_symbols: total,
        })
    }
}

enum Cube {
    Field(DataCube<Gf>),
    Vector(DataCube<Bits>),
}
