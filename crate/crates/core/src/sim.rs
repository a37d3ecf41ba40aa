//! Cluster simulator with exact bandwidth accounting.
//!
//! A [`Cluster`] spreads an ingested payload over the code's nodes, one
//! shard per node per stripe, backed either by memory or by a directory
//! of shard files (30-byte header + little-endian symbol payload).  Every
//! repair goes through the plane-selective read path and is logged, so a
//! transcript shows exactly which plane ranks were read from which node —
//! the byte counts in a [`BandwidthReport`] are tallied from those reads,
//! not assumed from formulas.  Shard headers are control-plane metadata
//! and are never counted as repair traffic.
//!
//! Every mutating call is recorded in an event log; [`Cluster::replay`]
//! re-runs a log on a fresh in-memory cluster and reproduces the same
//! state and the same reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::cube::NodeId;
use crate::instance::CodecInstance;
use crate::msr::{DMode, MsrParams};
use crate::shard::{
    crc32, read_bits, shard_rel_path, BitWriter, Manifest, ShardHeader, HEADER_LEN,
};
use crate::{Error, Result};

/// One logged helper read: which plane ranks of which shard were fetched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Access {
    pub node: NodeId,
    pub stripe: u32,
    pub planes: Vec<usize>,
    pub bytes: usize,
}

/// A recorded cluster mutation, sufficient to re-run it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Ingest { payload: Vec<u8> },
    Fail { nodes: Vec<NodeId> },
    Repair { node: NodeId, aloof: Option<NodeId> },
}

/// Bandwidth accounting for one repair, tallied from actual reads.
#[derive(Clone, Debug, PartialEq)]
pub struct BandwidthReport {
    pub node: NodeId,
    /// True when the node was already live and nothing was done.
    pub noop: bool,
    pub stripes: u32,
    /// Helper fan-in (nodes contacted per stripe).
    pub helpers: usize,
    pub aloof: Option<NodeId>,
    /// Symbols fetched from helpers, summed over stripes.
    pub symbols_transferred: u64,
    pub bytes_transferred: u64,
    /// Bytes read off helper storage; equals `bytes_transferred` because
    /// helpers transfer exactly what the repair reads.
    pub bytes_read: u64,
    /// Cost of the naive alternative: full data collection from k_eff
    /// nodes (k_eff * alpha symbols per stripe).
    pub baseline_symbols: u64,
    pub baseline_bytes: u64,
}

impl BandwidthReport {
    /// Repair traffic as a fraction of the naive-collection baseline.
    pub fn ratio(&self) -> f64 {
        if self.baseline_symbols == 0 {
            0.0
        } else {
            self.symbols_transferred as f64 / self.baseline_symbols as f64
        }
    }
}

/// Outcome of a full integrity sweep.
#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub shards_checked: usize,
    pub missing: Vec<(NodeId, u32)>,
    pub crc_failures: Vec<(NodeId, u32)>,
    /// Stripes whose parity equations were checked (needs every node).
    pub parity_checked: u32,
    pub parity_failures: Vec<u32>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.missing.is_empty() && self.crc_failures.is_empty() && self.parity_failures.is_empty()
    }
}

enum Backing {
    Memory(BTreeMap<(NodeId, u32), Vec<u8>>),
    Directory(PathBuf),
}

impl Backing {
    fn put(&mut self, params: &MsrParams, node: NodeId, stripe: u32, payload: &[u8]) -> Result<()> {
        match self {
            Backing::Memory(map) => {
                map.insert((node, stripe), payload.to_vec());
                Ok(())
            }
            Backing::Directory(root) => {
                let path = root.join(shard_rel_path(node, stripe));
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir)?;
                }
                let header = ShardHeader::new(params, node, stripe, payload.len() as u64);
                let mut f = fs::File::create(path)?;
                f.write_all(&header.encode())?;
                f.write_all(payload)?;
                Ok(())
            }
        }
    }

    fn has(&self, node: NodeId, stripe: u32) -> bool {
        match self {
            Backing::Memory(map) => map.contains_key(&(node, stripe)),
            Backing::Directory(root) => root.join(shard_rel_path(node, stripe)).is_file(),
        }
    }

    fn read_full(&self, params: &MsrParams, node: NodeId, stripe: u32) -> Result<Vec<u8>> {
        let missing = || Error::MissingShard {
            x: node.x,
            y: node.y,
            stripe,
        };
        match self {
            Backing::Memory(map) => map.get(&(node, stripe)).cloned().ok_or_else(missing),
            Backing::Directory(root) => {
                let path = root.join(shard_rel_path(node, stripe));
                let bytes = fs::read(&path).map_err(|_| missing())?;
                if bytes.len() < HEADER_LEN {
                    return Err(Error::ShardFormat(format!(
                        "{} is truncated",
                        path.display()
                    )));
                }
                let header = ShardHeader::parse(&bytes[..HEADER_LEN])?;
                if !header.matches_params(params)
                    || header.node() != node
                    || header.stripe != stripe
                {
                    return Err(Error::ShardFormat(format!(
                        "{} header does not match this cluster",
                        path.display()
                    )));
                }
                if bytes.len() - HEADER_LEN != header.payload_len as usize {
                    return Err(Error::ShardFormat(format!(
                        "{} is truncated",
                        path.display()
                    )));
                }
                Ok(bytes[HEADER_LEN..].to_vec())
            }
        }
    }

    /// Reads only the bytes of the given plane ranks (sorted ascending).
    /// Consecutive ranks are fetched as one contiguous read.
    fn read_planes(
        &self,
        node: NodeId,
        stripe: u32,
        ranks: &[usize],
        width: usize,
    ) -> Result<Vec<u64>> {
        let missing = || Error::MissingShard {
            x: node.x,
            y: node.y,
            stripe,
        };
        let mut raw = Vec::with_capacity(ranks.len() * width);
        match self {
            Backing::Memory(map) => {
                let payload = map.get(&(node, stripe)).ok_or_else(missing)?;
                for &rank in ranks {
                    let off = rank * width;
                    if off + width > payload.len() {
                        return Err(Error::ShardFormat("shard payload too short".into()));
                    }
                    raw.extend_from_slice(&payload[off..off + width]);
                }
            }
            Backing::Directory(root) => {
                let path = root.join(shard_rel_path(node, stripe));
                let mut f = fs::File::open(&path).map_err(|_| missing())?;
                let mut i = 0;
                while i < ranks.len() {
                    let mut j = i + 1;
                    while j < ranks.len() && ranks[j] == ranks[j - 1] + 1 {
                        j += 1;
                    }
                    let off = HEADER_LEN + ranks[i] * width;
                    let len = (j - i) * width;
                    let mut buf = vec![0u8; len];
                    f.seek(SeekFrom::Start(off as u64))?;
                    f.read_exact(&mut buf)?;
                    raw.extend_from_slice(&buf);
                    i = j;
                }
            }
        }
        crate::shard::unpack_symbols(&raw, width)
    }

    fn delete_node(&mut self, node: NodeId, stripes: u32) -> Result<()> {
        match self {
            Backing::Memory(map) => {
                for stripe in 0..stripes {
                    map.remove(&(node, stripe));
                }
            }
            Backing::Directory(root) => {
                let dir = root.join(format!("node_{}_{}", node.x, node.y));
                if dir.is_dir() {
                    fs::remove_dir_all(dir)?;
                }
            }
        }
        Ok(())
    }
}

/// A simulated storage cluster over one codec instance.
pub struct Cluster {
    codec: CodecInstance,
    backing: Backing,
    stripes: u32,
    length: u64,
    manifest: Option<Manifest>,
    failed: BTreeSet<NodeId>,
    access: Vec<Access>,
    events: Vec<Event>,
}

impl Cluster {
    pub fn new_memory(codec: CodecInstance) -> Cluster {
        Cluster {
            codec,
            backing: Backing::Memory(BTreeMap::new()),
            stripes: 0,
            length: 0,
            manifest: None,
            failed: BTreeSet::new(),
            access: Vec::new(),
            events: Vec::new(),
        }
    }

    /// A cluster whose shards live under `root` as
    /// `node_<x>_<y>/stripe_<i>.shard` files.  `ingest` also writes
    /// `manifest.txt` there.
    pub fn new_directory(codec: CodecInstance, root: &Path) -> Result<Cluster> {
        fs::create_dir_all(root)?;
        Ok(Cluster {
            codec,
            backing: Backing::Directory(root.to_path_buf()),
            stripes: 0,
            length: 0,
            manifest: None,
            failed: BTreeSet::new(),
            access: Vec::new(),
            events: Vec::new(),
        })
    }

    /// Opens an existing shard directory under the given manifest.  Nodes
    /// with any shard file missing start out marked failed.
    pub fn open_directory(manifest: Manifest, root: &Path) -> Result<Cluster> {
        let codec = CodecInstance::from_params(manifest.params.clone())?;
        let backing = Backing::Directory(root.to_path_buf());
        let mut failed = BTreeSet::new();
        for node in codec.stored_nodes() {
            if (0..manifest.stripes).any(|s| !backing.has(node, s)) {
                failed.insert(node);
            }
        }
        Ok(Cluster {
            codec,
            backing,
            stripes: manifest.stripes,
            length: manifest.length,
            manifest: Some(manifest),
            failed,
            access: Vec::new(),
            events: Vec::new(),
        })
    }

    pub fn codec(&self) -> &CodecInstance {
        &self.codec
    }

    pub fn stripes(&self) -> u32 {
        self.stripes
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn manifest(&self) -> Option<&Manifest> {
        self.manifest.as_ref()
    }

    pub fn failed_nodes(&self) -> Vec<NodeId> {
        self.failed.iter().copied().collect()
    }

    pub fn live_nodes(&self) -> Vec<NodeId> {
        self.codec
            .stored_nodes()
            .into_iter()
            .filter(|n| !self.failed.contains(n))
            .collect()
    }

    /// Helper reads logged by repairs since the last [`Self::clear_access_log`].
    pub fn access_log(&self) -> &[Access] {
        &self.access
    }

    pub fn clear_access_log(&mut self) {
        self.access.clear();
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Splits `payload` into stripes and stores every node's shard.
    ///
    /// The payload is consumed as one continuous most-significant-bit-first
    /// bit stream; each stripe takes exactly `stripe_message_bits` bits with
    /// no per-stripe alignment, and the tail of the last stripe is padded
    /// with zero bits.  Returns the stripe count.
    pub fn ingest(&mut self, payload: &[u8]) -> Result<u32> {
        if self.manifest.is_some() {
            return Err(Error::BadParameter("cluster already holds data"));
        }
        let bits_per_stripe = self.codec.stripe_message_bits();
        let m = self.codec.tuple_bits();
        let total_bits = payload.len() * 8;
        let stripes = total_bits.div_ceil(bits_per_stripe) as u32;
        let mut shards_crc = BTreeMap::new();
        for stripe in 0..stripes {
            let base = stripe as usize * bits_per_stripe;
            let message: Vec<u64> = (0..self.codec.params().message_len())
                .map(|i| read_bits(payload, base + i * m, m))
                .collect();
            let shards = self.codec.encode_stripe(&message)?;
            for (node, bytes) in shards {
                shards_crc.insert((node, stripe), crc32(&bytes));
                self.backing
                    .put(self.codec.params(), node, stripe, &bytes)?;
            }
        }
        self.stripes = stripes;
        self.length = payload.len() as u64;
        let manifest = Manifest {
            params: self.codec.params().clone(),
            stripes,
            length: self.length,
            shards: shards_crc,
        };
        if let Backing::Directory(root) = &self.backing {
            fs::write(root.join("manifest.txt"), manifest.render())?;
        }
        self.manifest = Some(manifest);
        self.events.push(Event::Ingest {
            payload: payload.to_vec(),
        });
        Ok(stripes)
    }

    /// Rejects coordinates outside the grid and nodes removed by
    /// shortening; both hold no shard, so no shard operation can name them.
    fn check_stored_node(&self, node: NodeId) -> Result<()> {
        if !self.codec.geometry().contains_node(node)
            || self.codec.geometry().node_index(node) < self.codec.params().shorten_by
        {
            return Err(Error::NodeOutOfRange {
                x: node.x,
                y: node.y,
            });
        }
        Ok(())
    }

    /// Marks nodes failed and erases their shards.
    pub fn fail_nodes(&mut self, nodes: &[NodeId]) -> Result<()> {
        for &node in nodes {
            self.check_stored_node(node)?;
        }
        for &node in nodes {
            self.failed.insert(node);
            self.backing.delete_node(node, self.stripes)?;
        }
        self.events.push(Event::Fail {
            nodes: nodes.to_vec(),
        });
        Ok(())
    }

    fn manifest_crc(&self, node: NodeId, stripe: u32) -> Option<u32> {
        self.manifest
            .as_ref()
            .and_then(|m| m.shards.get(&(node, stripe)).copied())
    }

    /// Regenerates a failed node from its helpers, reading only the repair
    /// planes of each helper shard, and stores the result.  Repairing a
    /// live node is a no-op.  Under the d = n-2 construction an aloof node
    /// may be named explicitly; when it is not, a single other failed node
    /// is used as the aloof node automatically.
    pub fn repair(&mut self, node: NodeId, aloof: Option<NodeId>) -> Result<BandwidthReport> {
        self.check_stored_node(node)?;
        if let Some(a) = aloof {
            self.check_stored_node(a)?;
        }
        let params = self.codec.params().clone();
        let width = self.codec.symbol_width();
        let baseline_symbols = (params.k_eff() * params.alpha) as u64 * self.stripes as u64;
        if !self.failed.contains(&node) {
            return Ok(BandwidthReport {
                node,
                noop: true,
                stripes: self.stripes,
                helpers: 0,
                aloof: None,
                symbols_transferred: 0,
                bytes_transferred: 0,
                bytes_read: 0,
                baseline_symbols,
                baseline_bytes: baseline_symbols * width as u64,
            });
        }
        let aloof = match (params.dmode(), aloof) {
            (_, Some(a)) => Some(a),
            (DMode::NMinusTwo, None) => {
                let others: Vec<NodeId> =
                    self.failed.iter().copied().filter(|&f| f != node).collect();
                match others.len() {
                    // Everything else is live: leave out the first node in
                    // another section (any choice works; this one is
                    // deterministic).
                    0 => self
                        .codec
                        .stored_nodes()
                        .into_iter()
                        .find(|h| h.y != node.y),
                    1 => Some(others[0]),
                    _ => {
                        return Err(Error::BadHelperSet(
                            "more than one other node is failed; name the aloof node",
                        ))
                    }
                }
            }
            (DMode::NMinusOne, None) => None,
        };
        let helpers = self.codec.default_helpers(node, aloof)?;
        for &h in &helpers {
            if self.failed.contains(&h) {
                return Err(Error::BadHelperSet("a required helper node is failed"));
            }
        }
        let planes = self.codec.repair_planes(node);
        let mut symbols = 0u64;
        for stripe in 0..self.stripes {
            let mut helper_planes = BTreeMap::new();
            for &h in &helpers {
                let vals = self.backing.read_planes(h, stripe, &planes, width)?;
                self.access.push(Access {
                    node: h,
                    stripe,
                    planes: planes.clone(),
                    bytes: planes.len() * width,
                });
                symbols += vals.len() as u64;
                helper_planes.insert(h, vals);
            }
            let rep = self.codec.repair_stripe(node, &helper_planes)?;
            if let Some(want) = self.manifest_crc(node, stripe) {
                if crc32(&rep.payload) != want {
                    return Err(Error::ChecksumMismatch(format!(
                        "repaired {}",
                        shard_rel_path(node, stripe)
                    )));
                }
            }
            self.backing.put(&params, node, stripe, &rep.payload)?;
        }
        self.failed.remove(&node);
        self.events.push(Event::Repair { node, aloof });
        Ok(BandwidthReport {
            node,
            noop: false,
            stripes: self.stripes,
            helpers: helpers.len(),
            aloof,
            symbols_transferred: symbols,
            bytes_transferred: symbols * width as u64,
            bytes_read: symbols * width as u64,
            baseline_symbols,
            baseline_bytes: baseline_symbols * width as u64,
        })
    }

    /// Performs the naive repair — full data collection from k_eff live
    /// nodes — counting every symbol read, and checks the reconstruction
    /// against the manifest.  Returns (symbols read, bytes read).
    pub fn measure_baseline(&mut self, node: NodeId) -> Result<(u64, u64)> {
        self.check_stored_node(node)?;
        let k = self.codec.params().k_eff();
        let width = self.codec.symbol_width();
        let sources: Vec<NodeId> = self
            .live_nodes()
            .into_iter()
            .filter(|&n| n != node)
            .take(k)
            .collect();
        if sources.len() < k {
            return Err(Error::NotEnoughNodes {
                got: sources.len(),
                need: k,
            });
        }
        let mut symbols = 0u64;
        for stripe in 0..self.stripes {
            let mut available = BTreeMap::new();
            for &s in &sources {
                let payload = self.backing.read_full(self.codec.params(), s, stripe)?;
                symbols += (payload.len() / width) as u64;
                available.insert(s, payload);
            }
            let content = self.codec.reconstruct_node(&available, node)?;
            if let Some(want) = self.manifest_crc(node, stripe) {
                if crc32(&content) != want {
                    return Err(Error::ChecksumMismatch(format!(
                        "baseline reconstruction of {}",
                        shard_rel_path(node, stripe)
                    )));
                }
            }
        }
        Ok((symbols, symbols * width as u64))
    }

    /// Decodes the original payload from the live nodes.
    pub fn collect(&self) -> Result<Vec<u8>> {
        let m = self.codec.tuple_bits();
        let mut w = BitWriter::new();
        for stripe in 0..self.stripes {
            let mut available = BTreeMap::new();
            for node in self.live_nodes() {
                if !self.backing.has(node, stripe) {
                    continue;
                }
                let payload = self.backing.read_full(self.codec.params(), node, stripe)?;
                if let Some(want) = self.manifest_crc(node, stripe) {
                    if crc32(&payload) != want {
                        continue; // corrupt shard: treat as erased
                    }
                }
                available.insert(node, payload);
            }
            for v in self.codec.decode_stripe(&available)? {
                w.push(v, m);
            }
        }
        let mut bytes = w.into_bytes();
        bytes.truncate(self.length as usize);
        Ok(bytes)
    }

    /// Checks every shard against the manifest, and stripe parity where a
    /// full stripe is present.
    pub fn verify(&self) -> Result<VerifyReport> {
        let mut report = VerifyReport::default();
        for stripe in 0..self.stripes {
            let mut full = BTreeMap::new();
            let mut complete = true;
            for node in self.codec.stored_nodes() {
                if !self.backing.has(node, stripe) {
                    report.missing.push((node, stripe));
                    complete = false;
                    continue;
                }
                let payload = self.backing.read_full(self.codec.params(), node, stripe)?;
                report.shards_checked += 1;
                if let Some(want) = self.manifest_crc(node, stripe) {
                    if crc32(&payload) != want {
                        report.crc_failures.push((node, stripe));
                        complete = false;
                        continue;
                    }
                }
                full.insert(node, payload);
            }
            if complete {
                report.parity_checked += 1;
                if self.codec.verify_stripe(&full).is_err() {
                    report.parity_failures.push(stripe);
                }
            }
        }
        Ok(report)
    }

    /// CRC fingerprint of every present shard — cheap state equality.
    pub fn state_fingerprint(&self) -> Result<BTreeMap<(NodeId, u32), u32>> {
        let mut out = BTreeMap::new();
        for node in self.codec.stored_nodes() {
            for stripe in 0..self.stripes {
                if self.backing.has(node, stripe) {
                    let payload = self.backing.read_full(self.codec.params(), node, stripe)?;
                    out.insert((node, stripe), crc32(&payload));
                }
            }
        }
        Ok(out)
    }

    /// Re-runs an event log on a fresh in-memory cluster, returning it
    /// together with the report of every repair event in order.
    pub fn replay(params: MsrParams, events: &[Event]) -> Result<(Cluster, Vec<BandwidthReport>)> {
        let mut cluster = Cluster::new_memory(CodecInstance::from_params(params)?);
        let mut reports = Vec::new();
        for event in events {
            match event {
                Event::Ingest { payload } => {
                    cluster.ingest(payload)?;
                }
                Event::Fail { nodes } => cluster.fail_nodes(nodes)?,
                Event::Repair { node, aloof } => reports.push(cluster.repair(*node, *aloof)?),
            }
        }
        Ok((cluster, reports))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msr::{derive_params, derive_params_from_nk};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn payload(len: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen()).collect()
    }

    fn memory_cluster(q: usize, t: usize, mode: DMode) -> Cluster {
        let params = derive_params(q, t, mode).unwrap();
        Cluster::new_memory(CodecInstance::from_params(params).unwrap())
    }

    #[test]
    fn ingest_collect_round_trip_odd_lengths() {
        // Lengths that are not multiples of the stripe payload, including
        // an empty payload and a stripe boundary hit exactly.
        let c = memory_cluster(3, 2, DMode::NMinusOne);
        // k_eff * alpha * m = 3 * 9 * 3: stripes straddle byte boundaries.
        let bits = c.codec().stripe_message_bits();
        assert_eq!(bits, 81);
        for len in [0usize, 1, 7, bits / 8, bits / 8 + 1, 100] {
            let mut c = memory_cluster(3, 2, DMode::NMinusOne);
            let data = payload(len, len as u64 + 11);
            let stripes = c.ingest(&data).unwrap();
            assert_eq!(stripes as usize, (len * 8).div_ceil(bits));
            assert_eq!(c.collect().unwrap(), data);
        }
    }

    #[test]
    fn repair_rejects_nodes_outside_the_grid() {
        // A coordinate off the grid must be a typed error from every
        // shard-addressed entry point, never a silent no-op (the node is
        // not in the failed set) and never a panic further down.
        let mut c = memory_cluster(2, 2, DMode::NMinusOne);
        c.ingest(&payload(40, 5)).unwrap();
        let bogus = NodeId::new(9, 9);
        assert!(matches!(
            c.repair(bogus, None),
            Err(Error::NodeOutOfRange { x: 9, y: 9 })
        ));
        assert!(matches!(
            c.measure_baseline(bogus),
            Err(Error::NodeOutOfRange { .. })
        ));

        let mut c = memory_cluster(2, 3, DMode::NMinusTwo);
        c.ingest(&payload(40, 6)).unwrap();
        let victim = c.codec().stored_nodes()[0];
        c.fail_nodes(&[victim]).unwrap();
        assert!(matches!(
            c.repair(victim, Some(bogus)),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn repair_restores_state_and_counts_bandwidth() {
        let mut c = memory_cluster(2, 2, DMode::NMinusOne);
        let data = payload(40, 3);
        c.ingest(&data).unwrap();
        let before = c.state_fingerprint().unwrap();
        let p = c.codec().params().clone();
        for node in c.codec().stored_nodes() {
            c.fail_nodes(&[node]).unwrap();
            assert!(
                c.collect().unwrap() == data,
                "degraded read must still work"
            );
            let report = c.repair(node, None).unwrap();
            assert!(!report.noop);
            assert_eq!(report.helpers, p.d_eff());
            assert_eq!(
                report.symbols_transferred,
                (p.d_eff() * p.beta) as u64 * c.stripes() as u64
            );
            assert_eq!(
                report.baseline_symbols,
                (p.k_eff() * p.alpha) as u64 * c.stripes() as u64
            );
            assert!(report.ratio() < 1.0);
        }
        assert_eq!(c.state_fingerprint().unwrap(), before);
        // Access log: every logged read is a repair-plane read.
        for acc in c.access_log() {
            assert_eq!(acc.bytes, acc.planes.len() * c.codec().symbol_width());
        }
    }

    #[test]
    fn live_node_repair_is_noop() {
        let mut c = memory_cluster(2, 2, DMode::NMinusOne);
        c.ingest(&payload(10, 4)).unwrap();
        let node = c.codec().stored_nodes()[0];
        let report = c.repair(node, None).unwrap();
        assert!(report.noop);
        assert_eq!(report.symbols_transferred, 0);
        assert!(c.access_log().is_empty());
        assert!(c
            .events()
            .iter()
            .all(|e| !matches!(e, Event::Repair { .. })));
    }

    #[test]
    fn aloof_auto_selection_repairs_two_failures() {
        let mut c = memory_cluster(2, 3, DMode::NMinusTwo);
        let data = payload(64, 5);
        c.ingest(&data).unwrap();
        let before = c.state_fingerprint().unwrap();
        let nodes = c.codec().stored_nodes();
        // Two failed nodes in different sections: each repair leans on the
        // other as the aloof node, no aloof named explicitly.
        let (a, b) = (nodes[0], nodes[3]);
        assert_ne!(a.y, b.y);
        c.fail_nodes(&[a, b]).unwrap();
        let ra = c.repair(a, None).unwrap();
        assert_eq!(ra.aloof, Some(b));
        assert_eq!(ra.helpers, c.codec().params().d_eff());
        let rb = c.repair(b, None).unwrap();
        assert!(rb.aloof.is_some());
        assert_eq!(c.state_fingerprint().unwrap(), before);
        assert_eq!(c.collect().unwrap(), data);
    }

    #[test]
    fn missing_helper_is_rejected_under_n_minus_one() {
        let mut c = memory_cluster(2, 2, DMode::NMinusOne);
        c.ingest(&payload(16, 6)).unwrap();
        let nodes = c.codec().stored_nodes();
        c.fail_nodes(&[nodes[0], nodes[1]]).unwrap();
        assert!(matches!(
            c.repair(nodes[0], None),
            Err(Error::BadHelperSet(_))
        ));
    }

    #[test]
    fn baseline_measurement_matches_formula() {
        let mut c = memory_cluster(2, 2, DMode::NMinusOne);
        c.ingest(&payload(32, 7)).unwrap();
        let p = c.codec().params().clone();
        let node = c.codec().stored_nodes()[2];
        let (symbols, bytes) = c.measure_baseline(node).unwrap();
        assert_eq!(symbols, (p.k_eff() * p.alpha) as u64 * c.stripes() as u64);
        assert_eq!(bytes, symbols * p.symbol_width() as u64);
    }

    #[test]
    fn directory_backing_round_trip_and_plane_reads() {
        let dir = tempfile::tempdir().unwrap();
        let params = derive_params(2, 2, DMode::NMinusOne).unwrap();
        let mut c = Cluster::new_directory(
            CodecInstance::from_params(params.clone()).unwrap(),
            dir.path(),
        )
        .unwrap();
        let data = payload(50, 8);
        c.ingest(&data).unwrap();
        assert!(dir.path().join("manifest.txt").is_file());
        assert!(dir.path().join("node_0_1/stripe_0.shard").is_file());

        // Reopen from disk, delete a node directory out of band, repair.
        let manifest =
            Manifest::parse(&fs::read_to_string(dir.path().join("manifest.txt")).unwrap()).unwrap();
        let victim = NodeId::new(1, 2);
        fs::remove_dir_all(dir.path().join("node_1_2")).unwrap();
        let mut c2 = Cluster::open_directory(manifest, dir.path()).unwrap();
        assert_eq!(c2.failed_nodes(), vec![victim]);
        let report = c2.repair(victim, None).unwrap();
        assert!(!report.noop);
        let z0: BTreeSet<usize> = c2.codec().repair_planes(victim).into_iter().collect();
        assert!(!c2.access_log().is_empty());
        for acc in c2.access_log() {
            assert!(
                acc.planes.iter().all(|r| z0.contains(r)),
                "read outside Z_0"
            );
        }
        assert_eq!(c2.collect().unwrap(), data);
        assert!(c2.verify().unwrap().ok());
    }

    #[test]
    fn verify_flags_corruption_and_missing_shards() {
        let dir = tempfile::tempdir().unwrap();
        let params = derive_params(2, 2, DMode::NMinusOne).unwrap();
        let mut c = Cluster::new_directory(CodecInstance::from_params(params).unwrap(), dir.path())
            .unwrap();
        c.ingest(&payload(20, 9)).unwrap();
        assert!(c.verify().unwrap().ok());

        // Flip one payload byte on disk.
        let path = dir.path().join("node_0_1/stripe_0.shard");
        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        let report = c.verify().unwrap();
        assert_eq!(report.crc_failures, vec![(NodeId::new(0, 1), 0)]);
        assert!(!report.ok());
        // The corrupt shard is excluded from decoding, so reads still work.
        assert_eq!(c.collect().unwrap().len(), 20);

        fs::remove_file(&path).unwrap();
        let report = c.verify().unwrap();
        assert_eq!(report.missing, vec![(NodeId::new(0, 1), 0)]);
    }

    #[test]
    fn corrupt_helpers_fail_the_repair_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let params = derive_params(2, 2, DMode::NMinusOne).unwrap();
        let mut c = Cluster::new_directory(CodecInstance::from_params(params).unwrap(), dir.path())
            .unwrap();
        c.ingest(&payload(20, 10)).unwrap();
        let nodes = c.codec().stored_nodes();
        c.fail_nodes(&[nodes[0]]).unwrap();
        let path = dir.path().join(shard_rel_path(nodes[1], 0));
        let mut bytes = fs::read(&path).unwrap();
        // Corrupt a byte inside the planes the repair actually reads.
        let rank = c.codec().repair_planes(nodes[0])[0];
        bytes[HEADER_LEN + rank * c.codec().symbol_width()] ^= 1;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            c.repair(nodes[0], None),
            Err(Error::ChecksumMismatch(_))
        ));
    }

    #[test]
    fn shortened_cluster_round_trip() {
        let params = derive_params_from_nk(5, 3).unwrap();
        let mut c = Cluster::new_memory(CodecInstance::from_params(params.clone()).unwrap());
        let data = payload(33, 11);
        c.ingest(&data).unwrap();
        assert_eq!(c.codec().stored_nodes().len(), 5);
        let before = c.state_fingerprint().unwrap();
        for node in c.codec().stored_nodes() {
            c.fail_nodes(&[node]).unwrap();
            let report = c.repair(node, None).unwrap();
            assert_eq!(report.helpers, params.d_eff());
            assert_eq!(
                report.symbols_transferred,
                (params.d_eff() * params.beta) as u64 * c.stripes() as u64
            );
        }
        assert_eq!(c.state_fingerprint().unwrap(), before);
        assert_eq!(c.collect().unwrap(), data);
    }

    #[test]
    fn binary_cluster_round_trip() {
        let params = crate::vector::VectorMsrCodec::for_p(5)
            .unwrap()
            .params()
            .clone();
        let mut c = Cluster::new_memory(CodecInstance::from_params(params).unwrap());
        let data = payload(41, 12);
        c.ingest(&data).unwrap();
        let node = c.codec().stored_nodes()[4];
        c.fail_nodes(&[node]).unwrap();
        let report = c.repair(node, None).unwrap();
        assert!(report.ratio() < 1.0);
        assert_eq!(c.collect().unwrap(), data);
    }

    #[test]
    fn replay_reproduces_state_and_reports() {
        let params = derive_params(2, 2, DMode::NMinusOne).unwrap();
        let mut c = Cluster::new_memory(CodecInstance::from_params(params.clone()).unwrap());
        c.ingest(&payload(25, 13)).unwrap();
        let nodes = c.codec().stored_nodes();
        let mut reports = Vec::new();
        c.fail_nodes(&[nodes[1]]).unwrap();
        reports.push(c.repair(nodes[1], None).unwrap());
        c.fail_nodes(&[nodes[3]]).unwrap();
        reports.push(c.repair(nodes[3], None).unwrap());
        let (c2, replayed) = Cluster::replay(params, c.events()).unwrap();
        assert_eq!(replayed, reports);
        assert_eq!(
            c2.state_fingerprint().unwrap(),
            c.state_fingerprint().unwrap()
        );
    }
}
