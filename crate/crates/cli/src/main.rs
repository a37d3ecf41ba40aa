//! `clms` — encode files into coupled-layer MSR shards, decode them back,
//! repair lost nodes with minimal reads, and benchmark repair bandwidth.
//!
//! Every command prints machine-parseable `key=value` lines on standard
//! output and exits nonzero on any integrity failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use clms_core::msr::DMode;
use clms_core::{Cluster, CodecInstance, Manifest, MsrParams, NodeId, ShardHeader, VectorMsrCodec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "clms",
    version,
    about = "Coupled-layer MSR erasure coding tool"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode a file into per-node shard directories plus a manifest.
    Encode {
        /// Input file.
        input: PathBuf,
        /// Sections per row; the code tolerates q node losses.
        #[arg(long)]
        q: usize,
        /// Rows (sections); n = q*t nodes in total.
        #[arg(long)]
        t: usize,
        /// Helper count mode: every node repairs from d helpers.
        #[arg(long, default_value = "n-1", value_parser = parse_dmode)]
        d: DMode,
        /// Symbol alphabet: "gf" (field) or "rdp" (binary tuples).
        #[arg(long, default_value = "gf")]
        base: String,
        /// Output directory for shards and manifest.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode the original file from at least k surviving nodes.
    Decode {
        /// Path to manifest.txt.
        manifest: PathBuf,
        /// Shard directory.
        dir: PathBuf,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate one lost node from the surviving nodes.
    Repair {
        /// Path to manifest.txt.
        manifest: PathBuf,
        /// Shard directory.
        dir: PathBuf,
        /// Node to regenerate, as "x,y".
        #[arg(long, value_parser = parse_node)]
        node: NodeId,
        /// Node to leave out of the helper set (d = n-2 codes), as "x,y".
        #[arg(long, value_parser = parse_node)]
        aloof: Option<NodeId>,
        /// Write one line per helper read: node, stripe, plane ranks.
        #[arg(long)]
        access_log: Option<PathBuf>,
    },
    /// Check every shard checksum and the parity of complete stripes.
    Verify {
        /// Path to manifest.txt.
        manifest: PathBuf,
        /// Shard directory.
        dir: PathBuf,
    },
    /// Measure repair traffic against the naive baseline on random data.
    Bench {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value = "n-1", value_parser = parse_dmode)]
        d: DMode,
        #[arg(long, default_value = "gf")]
        base: String,
        /// Number of stripes of random payload to exercise.
        #[arg(long, default_value_t = 4)]
        stripes: u32,
        /// Payload RNG seed; a fixed seed reproduces the exact reports.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Describe a manifest or a single shard file.
    Inspect {
        /// Path to a manifest.txt or a .shard file.
        path: PathBuf,
    },
}

fn parse_dmode(s: &str) -> Result<DMode, String> {
    DMode::parse(s).map_err(|e| e.to_string())
}

fn parse_node(s: &str) -> Result<NodeId, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"x,y\", got {s:?}"))?;
    let x: u8 = x
        .trim()
        .parse()
        .map_err(|_| format!("bad x coordinate {x:?}"))?;
    let y: u8 = y
        .trim()
        .parse()
        .map_err(|_| format!("bad y coordinate {y:?}"))?;
    Ok(NodeId::new(x, y))
}

fn build_params(q: usize, t: usize, d: DMode, base: &str) -> Result<MsrParams> {
    match base {
        "gf" => Ok(clms_core::derive_params(q, t, d)?),
        "rdp" => {
            if d != DMode::NMinusOne {
                bail!("the rdp base supports d = n-1 only");
            }
            if q != 2 {
                bail!("the rdp base requires q = 2 (two parities)");
            }
            let p = q * t - 1;
            let codec = VectorMsrCodec::for_p(p)
                .with_context(|| format!("q*t-1 = {p} must be an odd prime for the rdp base"))?;
            Ok(codec.params().clone())
        }
        other => bail!("unknown base {other:?} (expected \"gf\" or \"rdp\")"),
    }
}

fn print_params(p: &MsrParams) {
    println!("q={}", p.q);
    println!("t={}", p.t);
    println!("d={}", p.dmode().as_str());
    println!("n={}", p.n_eff());
    println!("k={}", p.k_eff());
    println!("alpha={}", p.alpha);
    println!("beta={}", p.beta);
    println!("symbol_bits={}", p.alphabet.tuple_len());
}

fn open_cluster(manifest: &Path, dir: &Path) -> Result<Cluster> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("cannot read manifest {}", manifest.display()))?;
    let manifest = Manifest::parse(&text)?;
    Ok(Cluster::open_directory(manifest, dir)?)
}

fn node_key(n: NodeId) -> String {
    format!("{},{}", n.x, n.y)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Encode {
            input,
            q,
            t,
            d,
            base,
            out,
        } => cmd_encode(input, q, t, d, &base, out),
        Cmd::Decode { manifest, dir, out } => cmd_decode(manifest, dir, out),
        Cmd::Repair {
            manifest,
            dir,
            node,
            aloof,
            access_log,
        } => cmd_repair(manifest, dir, node, aloof, access_log),
        Cmd::Verify { manifest, dir } => cmd_verify(manifest, dir),
        Cmd::Bench {
            q,
            t,
            d,
            base,
            stripes,
            seed,
        } => cmd_bench(q, t, d, &base, stripes, seed),
        Cmd::Inspect { path } => cmd_inspect(path),
    }
}

fn cmd_encode(
    input: PathBuf,
    q: usize,
    t: usize,
    d: DMode,
    base: &str,
    out: PathBuf,
) -> Result<()> {
    let params = build_params(q, t, d, base)?;
    let data = fs::read(&input).with_context(|| format!("cannot read {}", input.display()))?;
    let codec = CodecInstance::from_params(params.clone())?;
    let mut cluster = Cluster::new_directory(codec, &out)?;
    let stripes = cluster.ingest(&data)?;
    print_params(&params);
    println!("base={base}");
    println!("length={}", data.len());
    println!("stripes={stripes}");
    println!("nodes={}", cluster.codec().stored_nodes().len());
    println!("manifest={}", out.join("manifest.txt").display());
    println!("out={}", out.display());
    Ok(())
}

fn cmd_decode(manifest: PathBuf, dir: PathBuf, out: PathBuf) -> Result<()> {
    let cluster = open_cluster(&manifest, &dir)?;
    let failed = cluster.failed_nodes();
    let data = cluster.collect().context("data collection failed")?;
    fs::write(&out, &data).with_context(|| format!("cannot write {}", out.display()))?;
    println!("stripes={}", cluster.stripes());
    println!("length={}", data.len());
    println!(
        "nodes_missing={}",
        if failed.is_empty() {
            "none".to_string()
        } else {
            failed
                .iter()
                .map(|&n| node_key(n))
                .collect::<Vec<_>>()
                .join(";")
        }
    );
    println!("out={}", out.display());
    Ok(())
}

fn cmd_repair(
    manifest: PathBuf,
    dir: PathBuf,
    node: NodeId,
    aloof: Option<NodeId>,
    access_log: Option<PathBuf>,
) -> Result<()> {
    let mut cluster = open_cluster(&manifest, &dir)?;
    let report = cluster.repair(node, aloof).context("repair failed")?;
    if let Some(path) = access_log {
        let mut f =
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        for acc in cluster.access_log() {
            let planes: Vec<String> = acc.planes.iter().map(|r| r.to_string()).collect();
            writeln!(
                f,
                "node={} stripe={} bytes={} planes={}",
                node_key(acc.node),
                acc.stripe,
                acc.bytes,
                planes.join(",")
            )?;
        }
    }
    let z0: Vec<String> = cluster
        .codec()
        .repair_planes(node)
        .iter()
        .map(|r| r.to_string())
        .collect();
    println!("node={}", node_key(node));
    println!("noop={}", report.noop);
    println!("stripes={}", report.stripes);
    println!("helpers={}", report.helpers);
    println!(
        "aloof={}",
        report
            .aloof
            .map(node_key)
            .unwrap_or_else(|| "none".to_string())
    );
    println!("planes_per_helper={}", cluster.codec().params().beta);
    println!("z0_planes={}", z0.join(","));
    println!("symbols_transferred={}", report.symbols_transferred);
    println!("bytes_transferred={}", report.bytes_transferred);
    println!("bytes_read={}", report.bytes_read);
    println!("baseline_symbols={}", report.baseline_symbols);
    println!("baseline_bytes={}", report.baseline_bytes);
    println!("ratio={:.4}", report.ratio());
    Ok(())
}

fn cmd_verify(manifest: PathBuf, dir: PathBuf) -> Result<()> {
    let cluster = open_cluster(&manifest, &dir)?;
    let report = cluster.verify()?;
    let join = |v: &[(NodeId, u32)]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.iter()
                .map(|&(n, s)| format!("{}:{s}", node_key(n)))
                .collect::<Vec<_>>()
                .join(";")
        }
    };
    println!("shards_checked={}", report.shards_checked);
    println!("missing_count={}", report.missing.len());
    println!("missing={}", join(&report.missing));
    println!("crc_fail_count={}", report.crc_failures.len());
    println!("crc_fail={}", join(&report.crc_failures));
    println!("parity_checked_stripes={}", report.parity_checked);
    println!("parity_fail_count={}", report.parity_failures.len());
    println!("ok={}", report.ok());
    if !report.ok() {
        bail!("integrity failure");
    }
    Ok(())
}

fn cmd_bench(q: usize, t: usize, d: DMode, base: &str, stripes: u32, seed: u64) -> Result<()> {
    if stripes == 0 {
        bail!("--stripes must be at least 1");
    }
    let params = build_params(q, t, d, base)?;
    let codec = CodecInstance::from_params(params.clone())?;
    let bits = codec.stripe_message_bits();
    // Largest byte length that still fits in exactly `stripes` stripes.
    let len = (stripes as usize * bits) / 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();

    let mut cluster = Cluster::new_memory(codec);
    let got = cluster.ingest(&payload)?;
    if got != stripes {
        bail!("internal error: produced {got} stripes, wanted {stripes}");
    }
    let node = cluster.codec().stored_nodes()[0];
    cluster.fail_nodes(&[node])?;
    let report = cluster.repair(node, None)?;
    let (baseline_symbols, baseline_bytes) = cluster.measure_baseline(node)?;

    print_params(&params);
    println!("base={base}");
    println!("stripes={stripes}");
    println!("seed={seed}");
    println!("node={}", node_key(node));
    println!("repair_symbols_per_stripe={}", params.d_eff() * params.beta);
    println!(
        "baseline_symbols_per_stripe={}",
        params.k_eff() * params.alpha
    );
    println!("repair_symbols={}", report.symbols_transferred);
    println!("repair_bytes={}", report.bytes_transferred);
    println!("baseline_symbols={baseline_symbols}");
    println!("baseline_bytes={baseline_bytes}");
    if report.baseline_symbols != baseline_symbols {
        bail!("baseline count disagrees with the naive-read measurement");
    }
    println!("ratio={:.4}", report.ratio());
    Ok(())
}

fn cmd_inspect(path: PathBuf) -> Result<()> {
    let bytes = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
    if let Ok(text) = std::str::from_utf8(&bytes) {
        if let Ok(manifest) = Manifest::parse(text) {
            println!("kind=manifest");
            print_params(&manifest.params);
            println!("theta={:?}", manifest.params.theta);
            println!("stripes={}", manifest.stripes);
            println!("length={}", manifest.length);
            println!("shards={}", manifest.shards.len());
            return Ok(());
        }
    }
    let header =
        ShardHeader::parse(&bytes).context("not a manifest and not a valid shard header")?;
    let payload = &bytes[clms_core::shard::HEADER_LEN..];
    if payload.len() as u64 != header.payload_len {
        bail!(
            "payload is {} bytes but the header records {}",
            payload.len(),
            header.payload_len
        );
    }
    println!("kind=shard");
    println!("q={}", header.q);
    println!("t={}", header.t);
    println!("d={}", header.dmode.as_str());
    println!("node={},{}", header.x, header.y);
    println!("stripe={}", header.stripe);
    println!("payload_len={}", header.payload_len);
    println!("crc32=0x{:08x}", clms_core::crc32(payload));
    Ok(())
}
