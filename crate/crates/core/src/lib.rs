//! Coupled-layer MSR erasure codes.
//!
//! An (n = qt, k, d) regenerating code stores a data cube of (q x t) x q^t
//! symbols across n nodes of alpha = q^t symbols each, and regenerates any
//! single node by downloading beta = q^(t-1) symbols from each of d helpers
//! (d = n-1, or d = n-2 with one aloof node), for a total of d*beta symbols
//! instead of the k*alpha a plain MDS code would read. Any k of the n nodes
//! recover the original data via sequential per-plane decoding.
//!
//! Two interchangeable alphabets are provided:
//! - [`MsrCodec`]: symbols in GF(2^m), base code given by a Vandermonde or
//!   Cauchy-plus-identity parity-check matrix;
//! - [`VectorMsrCodec`]: symbols are binary m-tuples, base code is RDP
//!   (row + diagonal parity), all arithmetic XOR/shift only.
//!
//! Both share the cube geometry ([`cube`]), the pair coupling ([`coupling`]),
//! and the storage/accounting layer ([`sim`], [`shard`]).

// Indexed loops stay where the row/column index is part of the algebra
// being implemented; enumerate()-chains would hide those coordinates.
#![allow(clippy::needless_range_loop)]

pub mod coupling;
pub mod cube;
pub mod gf;
pub mod instance;
pub mod mds;
pub mod msr;
pub mod rdp;
pub mod scalar_view;
pub mod shard;
pub mod sim;
pub mod vector;

pub use coupling::{build_vector_coupler, PairCoupler, ScalarCoupler, Slot, VectorCoupler};
pub use cube::{CubeCoord, CubeGeometry, ErasurePattern, NodeId, PlaneIndex, PlanePartition};
pub use gf::{build_field, pick_u, FieldTable, Gf};
pub use instance::{CodecInstance, StripeRepair};
pub use mds::{build_theta, smds_decode, verify_mds, Theta, ThetaKind};
pub use msr::{
    derive_params, derive_params_from_nk, AlphabetDesc, DMode, DataCube, DecodeTrace, MsrCodec,
    MsrParams, PlaneEvent, RepairTranscript, UnknownKind,
};
pub use rdp::{rdp_codec, Bits, RdpCode};
pub use scalar_view::{rank_over_gf, ScalarView};
pub use shard::{crc32, shard_rel_path, Manifest, ShardHeader};
pub use sim::{Access, BandwidthReport, Cluster, Event, VerifyReport};
pub use vector::{generic_instance, VectorMsrCodec};

/// Scalar-field cube: one GF(2^m) symbol per cell.
pub type FieldCube = DataCube<Gf>;
/// Binary-tuple cube: one (p-1)-bit word per cell.
pub type TupleCube = DataCube<Bits>;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("extension degree m={0} outside supported range 2..=16")]
    DegreeOutOfRange(usize),
    #[error("field has {0} elements; need at least 4")]
    FieldTooSmall(usize),
    #[error("coupling constant {0} is not usable (need u != 0 and u^2 != 1)")]
    BadCouplingConstant(u16),
    #[error("coupler matrix is singular (I + T^2 or T not invertible)")]
    SingularCoupler,
    #[error("block length n={n} exceeds field size {q}")]
    BlockTooLong { n: usize, q: usize },
    #[error("parity count {rows} exceeds block length {n}")]
    TooManyParities { rows: usize, n: usize },
    #[error("{0} unknowns exceed the {1} parities available")]
    TooManyUnknowns(usize, usize),
    #[error("erasure-decoding system is singular: {0}")]
    SingularSystem(&'static str),
    #[error("inconsistent parity residual in over-determined system")]
    InconsistentSystem,
    #[error("{0} is not an odd prime")]
    NotOddPrime(usize),
    #[error("parameter out of range: {0}")]
    BadParameter(&'static str),
    #[error("cannot factor (n={n}, k={k}) as a shortened q={q} coupled-layer code")]
    BadShape { n: usize, k: usize, q: usize },
    #[error("message has {got} symbols, expected {want}")]
    BadMessageLength { got: usize, want: usize },
    #[error("erasure pattern has {got} nodes, at most {max} recoverable")]
    TooManyErasures { got: usize, max: usize },
    #[error("node ({x},{y}) is out of range for this code")]
    NodeOutOfRange { x: u8, y: u8 },
    #[error("helper set invalid: {0}")]
    BadHelperSet(&'static str),
    #[error("shard format error: {0}")]
    ShardFormat(String),
    #[error("manifest format error: {0}")]
    ManifestFormat(String),
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("node ({x},{y}) has no data for stripe {stripe}")]
    MissingShard { x: u8, y: u8, stripe: u32 },
    #[error("only {got} node(s) available, need at least {need}")]
    NotEnoughNodes { got: usize, need: usize },
    #[error("parity verification failed: {0}")]
    ParityFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
