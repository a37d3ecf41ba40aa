//! Wire formats: shard header, manifest, checksums, and symbol packing.
//!
//! A shard file is a 30-byte header followed by the node's payload for one
//! stripe (alpha symbols, each `symbol_width` bytes little-endian). The
//! manifest is a UTF-8 key=value file with a `[shards]` section listing each
//! shard's relative path and payload CRC-32; together they are sufficient to
//! rebuild the codec with no ambiguity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cube::NodeId;
use crate::gf::build_field;
use crate::mds::ThetaKind;
use crate::msr::{AlphabetDesc, DMode, MsrParams};
use crate::{Error, Result};

/// CRC-32 (IEEE) of a byte slice.
pub fn crc32(data: &[u8]) -> u32 {
    crc32fast::hash(data)
}

/// Fixed-size binary header prefixed to every shard file.
///
/// Layout (little-endian integers):
/// magic "CLMS" | version u8 | q u8 | t u8 | dmode u8 | alphabet kind u8 |
/// 7-byte alphabet descriptor | x u8 | y u8 | stripe u32 | payload_len u64.
///
/// The descriptor is `m u8, modulus u32, u u16` for the field alphabet
/// (kind 0) and `p u8, coupler_poly u32, zero u16` for the binary-tuple
/// alphabet (kind 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardHeader {
    pub q: u8,
    pub t: u8,
    pub dmode: DMode,
    pub alphabet: AlphabetDesc,
    pub x: u8,
    pub y: u8,
    pub stripe: u32,
    pub payload_len: u64,
}

pub const SHARD_MAGIC: [u8; 4] = *b"CLMS";
pub const SHARD_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 30;

impl ShardHeader {
    pub fn new(params: &MsrParams, node: NodeId, stripe: u32, payload_len: u64) -> ShardHeader {
        ShardHeader {
            q: params.q as u8,
            t: params.t as u8,
            dmode: params.dmode(),
            alphabet: params.alphabet.clone(),
            x: node.x,
            y: node.y,
            stripe,
            payload_len,
        }
    }

    pub fn node(&self) -> NodeId {
        NodeId::new(self.x, self.y)
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&SHARD_MAGIC);
        b[4] = SHARD_VERSION;
        b[5] = self.q;
        b[6] = self.t;
        b[7] = match self.dmode {
            DMode::NMinusOne => 0,
            DMode::NMinusTwo => 1,
        };
        match self.alphabet {
            AlphabetDesc::Field { m, modulus, u } => {
                b[8] = 0;
                b[9] = m as u8;
                b[10..14].copy_from_slice(&modulus.to_le_bytes());
                b[14..16].copy_from_slice(&u.to_le_bytes());
            }
            AlphabetDesc::Binary { p, coupler_poly } => {
                b[8] = 1;
                b[9] = p as u8;
                b[10..14].copy_from_slice(&coupler_poly.to_le_bytes());
                // b[14..16] stay zero
            }
        }
        b[16] = self.x;
        b[17] = self.y;
        b[18..22].copy_from_slice(&self.stripe.to_le_bytes());
        b[22..30].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    /// Parses the header at the start of a shard file.
    pub fn parse(bytes: &[u8]) -> Result<ShardHeader> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::ShardFormat(format!(
                "file too short for header: {} < {HEADER_LEN} bytes",
                bytes.len()
            )));
        }
        if bytes[..4] != SHARD_MAGIC {
            return Err(Error::ShardFormat("bad magic".into()));
        }
        if bytes[4] != SHARD_VERSION {
            return Err(Error::ShardFormat(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let dmode = match bytes[7] {
            0 => DMode::NMinusOne,
            1 => DMode::NMinusTwo,
            v => return Err(Error::ShardFormat(format!("unknown d-mode byte {v}"))),
        };
        let word32 = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let alphabet = match bytes[8] {
            0 => AlphabetDesc::Field {
                m: bytes[9] as usize,
                modulus: word32(10),
                u: u16::from_le_bytes([bytes[14], bytes[15]]),
            },
            1 => {
                if bytes[14] != 0 || bytes[15] != 0 {
                    return Err(Error::ShardFormat("nonzero padding in descriptor".into()));
                }
                AlphabetDesc::Binary {
                    p: bytes[9] as usize,
                    coupler_poly: word32(10),
                }
            }
            v => return Err(Error::ShardFormat(format!("unknown alphabet kind {v}"))),
        };
        Ok(ShardHeader {
            q: bytes[5],
            t: bytes[6],
            dmode,
            alphabet,
            x: bytes[16],
            y: bytes[17],
            stripe: word32(18),
            payload_len: u64::from_le_bytes(bytes[22..30].try_into().unwrap()),
        })
    }

    /// Whether the header's code parameters agree with `params`.
    pub fn matches_params(&self, params: &MsrParams) -> bool {
        self.q as usize == params.q
            && self.t as usize == params.t
            && self.dmode == params.dmode()
            && self.alphabet == params.alphabet
    }
}

/// Relative path of one shard inside the output directory.
pub fn shard_rel_path(node: NodeId, stripe: u32) -> String {
    format!("node_{}_{}/stripe_{stripe}.shard", node.x, node.y)
}

/// Inverse of [`shard_rel_path`].
pub fn parse_shard_path(path: &str) -> Result<(NodeId, u32)> {
    let err = || Error::ManifestFormat(format!("bad shard path {path:?}"));
    let (dir, file) = path.split_once('/').ok_or_else(err)?;
    let mut parts = dir.strip_prefix("node_").ok_or_else(err)?.splitn(2, '_');
    let x: u8 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
    let y: u8 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
    let stripe: u32 = file
        .strip_prefix("stripe_")
        .and_then(|s| s.strip_suffix(".shard"))
        .and_then(|s| s.parse().ok())
        .ok_or_else(err)?;
    Ok((NodeId::new(x, y), stripe))
}

/// Everything needed to rebuild the codec and check the shard set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub params: MsrParams,
    /// Stripes in the encoded object.
    pub stripes: u32,
    /// Original payload length in bytes.
    pub length: u64,
    /// (node, stripe) -> payload CRC-32. Pinned nodes never appear.
    pub shards: BTreeMap<(NodeId, u32), u32>,
}

impl Manifest {
    /// Renders the manifest as UTF-8 key=value lines plus the shard table.
    pub fn render(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "version=1");
        let _ = writeln!(s, "q={}", p.q);
        let _ = writeln!(s, "t={}", p.t);
        let _ = writeln!(s, "d={}", p.dmode().as_str());
        let _ = writeln!(s, "shorten={}", p.shorten_by);
        match p.alphabet {
            AlphabetDesc::Field { m, modulus, u } => {
                let _ = writeln!(s, "base=gf");
                let _ = writeln!(s, "m={m}");
                let _ = writeln!(s, "modulus={modulus:#x}");
                let _ = writeln!(s, "u={u}");
                let _ = writeln!(s, "theta={}", p.theta.as_str());
                let points = render_points(m, modulus, p.n).unwrap_or_default();
                let _ = writeln!(s, "points={points}");
            }
            AlphabetDesc::Binary {
                p: prime,
                coupler_poly,
            } => {
                let _ = writeln!(s, "base=rdp");
                let _ = writeln!(s, "p={prime}");
                let _ = writeln!(s, "coupler_poly={coupler_poly:#x}");
            }
        }
        let _ = writeln!(s, "stripes={}", self.stripes);
        let _ = writeln!(s, "length={}", self.length);
        let _ = writeln!(s, "\n[shards]");
        for (&(node, stripe), &crc) in &self.shards {
            let _ = writeln!(s, "{}={crc:#010x}", shard_rel_path(node, stripe));
        }
        s
    }

    /// Parses and fully validates a manifest file.
    pub fn parse(text: &str) -> Result<Manifest> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        let mut shards = BTreeMap::new();
        let mut in_shards = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line == "[shards]" {
                in_shards = true;
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::ManifestFormat(format!("line {}: expected key=value", no + 1))
            })?;
            if in_shards {
                let (node, stripe) = parse_shard_path(key)?;
                let crc = parse_u32(value)?;
                if shards.insert((node, stripe), crc).is_some() {
                    return Err(Error::ManifestFormat(format!(
                        "duplicate shard entry {key}"
                    )));
                }
            } else if kv.insert(key, value).is_some() {
                return Err(Error::ManifestFormat(format!("duplicate key {key}")));
            }
        }

        let get = |key: &str| {
            kv.get(key)
                .copied()
                .ok_or_else(|| Error::ManifestFormat(format!("missing key {key}")))
        };
        if get("version")? != "1" {
            return Err(Error::ManifestFormat("unsupported manifest version".into()));
        }
        let q: usize = parse_num(get("q")?)?;
        let t: usize = parse_num(get("t")?)?;
        let dmode = DMode::parse(get("d")?)?;
        let shorten_by: usize = parse_num(get("shorten")?)?;
        let base = get("base")?;
        let mut known_keys = vec![
            "version", "q", "t", "d", "shorten", "base", "stripes", "length",
        ];
        let alphabet = match base {
            "gf" => {
                known_keys.extend(["m", "modulus", "u", "theta", "points"]);
                AlphabetDesc::Field {
                    m: parse_num(get("m")?)?,
                    modulus: parse_u32(get("modulus")?)?,
                    u: parse_num::<u16>(get("u")?)?,
                }
            }
            "rdp" => {
                known_keys.extend(["p", "coupler_poly"]);
                AlphabetDesc::Binary {
                    p: parse_num(get("p")?)?,
                    coupler_poly: parse_u32(get("coupler_poly")?)?,
                }
            }
            other => {
                return Err(Error::ManifestFormat(format!("unknown base {other:?}")));
            }
        };
        for key in kv.keys() {
            if !known_keys.contains(key) {
                return Err(Error::ManifestFormat(format!("unknown key {key}")));
            }
        }

        let n = q * t;
        let k = match dmode {
            DMode::NMinusOne => q * (t - 1),
            DMode::NMinusTwo => n - q - 1,
        };
        let d = match dmode {
            DMode::NMinusOne => n - 1,
            DMode::NMinusTwo => n - 2,
        };
        let theta = match alphabet {
            AlphabetDesc::Field { m, modulus, .. } => {
                let kind = ThetaKind::parse(get("theta")?)?;
                let expect = render_points(m, modulus, n)?;
                if get("points")? != expect {
                    return Err(Error::ManifestFormat(
                        "points do not match the declared field".into(),
                    ));
                }
                kind
            }
            AlphabetDesc::Binary { .. } => ThetaKind::Vandermonde,
        };
        let geom = crate::cube::CubeGeometry::new(q, t)?;
        let params = MsrParams {
            q,
            t,
            n,
            k,
            d,
            alpha: geom.alpha(),
            beta: geom.beta(),
            shorten_by,
            theta,
            alphabet,
        };
        Ok(Manifest {
            params,
            stripes: parse_num(get("stripes")?)?,
            length: parse_num(get("length")?)?,
            shards,
        })
    }
}

/// The base-code evaluation points in column order, comma-separated.
fn render_points(m: usize, modulus: u32, n: usize) -> Result<String> {
    let field = build_field(m)?;
    if field.modulus() != modulus {
        return Err(Error::ManifestFormat(
            "modulus is not the supported primitive".into(),
        ));
    }
    let points = field.points(n)?;
    Ok(points
        .iter()
        .map(|g| g.0.to_string())
        .collect::<Vec<_>>()
        .join(","))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::ManifestFormat(format!("bad number {s:?}")))
}

fn parse_u32(s: &str) -> Result<u32> {
    let r = if let Some(hex) = s.strip_prefix("0x") {
        u32::from_str_radix(hex, 16)
    } else {
        s.parse()
    };
    r.map_err(|_| Error::ManifestFormat(format!("bad number {s:?}")))
}

/// Serializes symbol values at the wire width, little-endian.
pub fn pack_symbols(values: &[u64], width: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * width);
    for &v in values {
        out.extend_from_slice(&v.to_le_bytes()[..width]);
    }
    out
}

/// Inverse of [`pack_symbols`]; the byte count must be a multiple of width.
pub fn unpack_symbols(bytes: &[u8], width: usize) -> Result<Vec<u64>> {
    if width == 0 || !bytes.len().is_multiple_of(width) {
        return Err(Error::ShardFormat(format!(
            "payload of {} bytes is not a whole number of {width}-byte symbols",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(width)
        .map(|c| {
            let mut w = [0u8; 8];
            w[..width].copy_from_slice(c);
            u64::from_le_bytes(w)
        })
        .collect())
}

/// Reads `m` bits MSB-first starting at `bit_off`; bits past the end are 0.
pub fn read_bits(bytes: &[u8], bit_off: usize, m: usize) -> u64 {
    debug_assert!(m <= 64);
    let mut v = 0u64;
    for i in 0..m {
        let pos = bit_off + i;
        let bit = match bytes.get(pos / 8) {
            Some(&b) => (b >> (7 - pos % 8)) & 1,
            None => 0,
        };
        v = (v << 1) | bit as u64;
    }
    v
}

/// MSB-first bit accumulator for turning symbol streams back into bytes.
#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    used: usize,
}

impl BitWriter {
    pub fn new() -> BitWriter {
        BitWriter::default()
    }

    /// Appends the low `m` bits of `v`, most significant first.
    pub fn push(&mut self, v: u64, m: usize) {
        debug_assert!(m <= 64);
        for i in (0..m).rev() {
            if self.used.is_multiple_of(8) {
                self.bytes.push(0);
            }
            let bit = ((v >> i) & 1) as u8;
            let last = self.bytes.last_mut().unwrap();
            *last |= bit << (7 - self.used % 8);
            self.used += 1;
        }
    }

    /// The accumulated bytes; the final partial byte is zero-padded.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}
