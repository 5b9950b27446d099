//! Canonical triangular inter-layer coding.
//!
//! A class-`i` packet mixes layers `1..=i`. Two schemes are supported:
//!
//! - [`Scheme::Xor`]: replica `t` of class `i` carries the XOR of the cells of
//!   layers `1..=i` in column `t mod P`. Decoding peels column by column.
//! - [`Scheme::Rlc`]: each packet is a seeded random GF(2^8) combination of
//!   all `i * P` cells of layers `1..=i`. Decoding is Gaussian elimination.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::{gf256, seed, Error, LayerGrid, Result, StrategyVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Xor,
    #[default]
    Rlc,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Xor => "xor",
            Scheme::Rlc => "rlc",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xor" => Ok(Scheme::Xor),
            "rlc" => Ok(Scheme::Rlc),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// How a packet's payload was formed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coding {
    Xor { column: usize },
    Rlc { coefficients: Vec<u8> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodedPacket {
    pub gop_id: u64,
    /// Class depth, 1-based: the packet mixes layers `1..=depth`.
    pub depth: usize,
    pub replica: u32,
    pub coding: Coding,
    pub payload: Vec<u8>,
}

impl CodedPacket {
    pub fn scheme(&self) -> Scheme {
        match self.coding {
            Coding::Xor { .. } => Scheme::Xor,
            Coding::Rlc { .. } => Scheme::Rlc,
        }
    }
}

/// Per-class received counts `r_1..r_L`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ReceptionCounts(Vec<u32>);

impl ReceptionCounts {
    pub fn new(layers: usize) -> Self {
        Self(vec![0; layers])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    /// Records one packet of class `depth` (1-based). Depths beyond the
    /// tracked layer count are ignored.
    pub fn record(&mut self, depth: usize) {
        if let Some(c) = depth.checked_sub(1).and_then(|i| self.0.get_mut(i)) {
            *c += 1;
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn decodable_layers(&self, packets_per_layer: usize) -> usize {
        decodable_layers(&self.0, packets_per_layer)
    }
}

/// Number of leading layers decodable from per-class counts.
///
/// Returns the largest `i` such that for every `k < i` the classes
/// `i-k..=i` together hold at least `(k+1) * P` packets, or 0. With
/// `y_j = r_j - P` and prefix sums `Y`, that is the last `i` where `Y_i`
/// reaches the running maximum of `Y_0..Y_i`, tracked here as the gap
/// `G_i = max(0, G_{i-1} + P - r_i)` hitting zero.
pub fn decodable_layers(counts: &[u32], packets_per_layer: usize) -> usize {
    let p = packets_per_layer as i64;
    let mut gap = 0i64;
    let mut last = 0;
    for (i, &r) in counts.iter().enumerate() {
        gap = (gap + p - i64::from(r)).max(0);
        if gap == 0 {
            last = i + 1;
        }
    }
    last
}

/// Encodes one GOP under `strategy`: `X_i` packets of class `i`, class 1
/// first.
pub fn encode_gop(grid: &LayerGrid, strategy: &StrategyVector, scheme: Scheme, seed: u64) -> Result<Vec<CodedPacket>> {
    if strategy.len() != grid.layers() {
        return Err(Error::StrategyLength {
            expected: grid.layers(),
            actual: strategy.len(),
        });
    }
    let p = grid.packets_per_layer();
    let s = grid.payload_size();
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(strategy.budget() as usize);
    for (class, &count) in strategy.counts().iter().enumerate() {
        let depth = class + 1;
        for replica in 0..count {
            let packet = match scheme {
                Scheme::Xor => {
                    let column = replica as usize % p;
                    let mut payload = vec![0u8; s];
                    for layer in 0..depth {
                        payload
                            .iter_mut()
                            .zip(grid.cell(layer, column))
                            .for_each(|(d, c)| *d ^= c);
                    }
                    CodedPacket {
                        gop_id: grid.gop_id(),
                        depth,
                        replica,
                        coding: Coding::Xor { column },
                        payload,
                    }
                }
                Scheme::Rlc => {
                    let mut coefficients = vec![0u8; depth * p];
                    rng.fill_bytes(&mut coefficients);
                    let mut payload = vec![0u8; s];
                    for (k, &c) in coefficients.iter().enumerate() {
                        gf256::mul_add_slice(&mut payload, grid.cell(k / p, k % p), c);
                    }
                    CodedPacket {
                        gop_id: grid.gop_id(),
                        depth,
                        replica,
                        coding: Coding::Rlc { coefficients },
                        payload,
                    }
                }
            };
            out.push(packet);
        }
    }
    Ok(out)
}

/// Result of decoding one GOP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedGop {
    pub layers: usize,
    /// The recovered prefix of the grid, `None` when no layer was recovered.
    pub grid: Option<LayerGrid>,
}

/// Decodes a set of packets of one GOP and one scheme into the longest
/// recoverable prefix of layers.
pub fn decode_gop(
    packets: &[CodedPacket],
    layers: usize,
    packets_per_layer: usize,
    payload_size: usize,
) -> Result<DecodedGop> {
    let Some(first) = packets.first() else {
        return Ok(DecodedGop { layers: 0, grid: None });
    };
    let scheme = first.scheme();
    for pkt in packets {
        if pkt.gop_id != first.gop_id {
            return Err(Error::MixedGops {
                first: first.gop_id,
                other: pkt.gop_id,
            });
        }
        if pkt.scheme() != scheme {
            return Err(Error::MixedSchemes);
        }
        validate(pkt, layers, packets_per_layer, payload_size)?;
    }
    let (count, data) = match scheme {
        Scheme::Xor => decode_xor(packets, layers, packets_per_layer, payload_size),
        Scheme::Rlc => decode_rlc(packets, layers, packets_per_layer, payload_size),
    };
    let grid = if count == 0 {
        None
    } else {
        Some(LayerGrid::from_bytes(
            first.gop_id,
            &data,
            count,
            packets_per_layer,
            payload_size,
        )?)
    };
    Ok(DecodedGop { layers: count, grid })
}

fn validate(pkt: &CodedPacket, layers: usize, p: usize, s: usize) -> Result<()> {
    if pkt.depth == 0 || pkt.depth > layers {
        return Err(Error::MalformedPacket(format!(
            "class depth {} outside 1..={layers}",
            pkt.depth
        )));
    }
    if pkt.payload.len() != s {
        return Err(Error::MalformedPacket(format!(
            "payload of {} bytes, expected {s}",
            pkt.payload.len()
        )));
    }
    match &pkt.coding {
        Coding::Xor { column } if *column >= p => {
            Err(Error::MalformedPacket(format!("column {column} outside 0..{p}")))
        }
        Coding::Rlc { coefficients } if coefficients.len() != pkt.depth * p => Err(Error::MalformedPacket(format!(
            "{} coefficients for class depth {}, expected {}",
            coefficients.len(),
            pkt.depth,
            pkt.depth * p
        ))),
        _ => Ok(()),
    }
}

/// Per-column peeling rule on packet metadata alone: the number of leading
/// layers every column can recover from the `(depth, column)` pairs seen.
pub fn xor_recoverable_layers(
    seen: impl IntoIterator<Item = (usize, usize)>,
    layers: usize,
    packets_per_layer: usize,
) -> usize {
    let mut have = vec![false; layers * packets_per_layer];
    for (depth, column) in seen {
        if (1..=layers).contains(&depth) && column < packets_per_layer {
            have[column * layers + depth - 1] = true;
        }
    }
    have.chunks(layers)
        .map(|col| col.iter().take_while(|&&h| h).count())
        .min()
        .unwrap_or(0)
}

fn decode_xor(packets: &[CodedPacket], layers: usize, p: usize, s: usize) -> (usize, Vec<u8>) {
    // by_slot[column * layers + depth - 1]
    let mut by_slot: Vec<Option<&[u8]>> = vec![None; layers * p];
    for pkt in packets {
        if let Coding::Xor { column } = pkt.coding {
            by_slot[column * layers + pkt.depth - 1].get_or_insert(&pkt.payload);
        }
    }
    let count = by_slot
        .chunks(layers)
        .map(|col| col.iter().take_while(|x| x.is_some()).count())
        .min()
        .unwrap_or(0);
    let mut data = vec![0u8; count * p * s];
    for layer in 0..count {
        for column in 0..p {
            let out = &mut data[(layer * p + column) * s..][..s];
            let cur = by_slot[column * layers + layer].expect("counted above");
            out.copy_from_slice(cur);
            if layer > 0 {
                let below = by_slot[column * layers + layer - 1].expect("counted above");
                out.iter_mut().zip(below).for_each(|(o, b)| *o ^= b);
            }
        }
    }
    (count, data)
}

/// Incremental Gaussian elimination kept in reduced row echelon form.
struct Eliminator {
    unknowns: usize,
    pivot_row: Vec<Option<usize>>,
    rows: Vec<(Vec<u8>, Vec<u8>)>,
}

impl Eliminator {
    fn new(unknowns: usize) -> Self {
        Self {
            unknowns,
            pivot_row: vec![None; unknowns],
            rows: Vec::new(),
        }
    }

    fn insert(&mut self, coefficients: &[u8], payload: &[u8]) {
        let mut coef = vec![0u8; self.unknowns];
        coef[..coefficients.len()].copy_from_slice(coefficients);
        let mut data = payload.to_vec();
        for col in 0..self.unknowns {
            let f = coef[col];
            if f == 0 {
                continue;
            }
            if let Some(r) = self.pivot_row[col] {
                let (rc, rd) = &self.rows[r];
                gf256::mul_add_slice(&mut coef, rc, f);
                gf256::mul_add_slice(&mut data, rd, f);
            }
        }
        let Some(lead) = coef.iter().position(|&c| c != 0) else {
            return;
        };
        let norm = gf256::inv(coef[lead]).expect("non-zero lead");
        gf256::scale_slice(&mut coef, norm);
        gf256::scale_slice(&mut data, norm);
        for (rc, rd) in &mut self.rows {
            let f = rc[lead];
            if f != 0 {
                gf256::mul_add_slice(rc, &coef, f);
                gf256::mul_add_slice(rd, &data, f);
            }
        }
        self.pivot_row[lead] = Some(self.rows.len());
        self.rows.push((coef, data));
    }

    /// The solved value of `unknown`, if the received rows pin it down.
    fn solved(&self, unknown: usize) -> Option<&[u8]> {
        let r = self.pivot_row[unknown]?;
        let (coef, data) = &self.rows[r];
        coef.iter()
            .enumerate()
            .all(|(c, &v)| c == unknown || v == 0)
            .then_some(data.as_slice())
    }
}

fn decode_rlc(packets: &[CodedPacket], layers: usize, p: usize, s: usize) -> (usize, Vec<u8>) {
    let mut elim = Eliminator::new(layers * p);
    for pkt in packets {
        if let Coding::Rlc { coefficients } = &pkt.coding {
            elim.insert(coefficients, &pkt.payload);
        }
    }
    let mut data = Vec::new();
    let mut count = 0;
    'layers: for layer in 0..layers {
        let mut row = Vec::with_capacity(p * s);
        for column in 0..p {
            match elim.solved(layer * p + column) {
                Some(v) => row.extend_from_slice(v),
                None => break 'layers,
            }
        }
        data.extend_from_slice(&row);
        count += 1;
    }
    (count, data)
}
