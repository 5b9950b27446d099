//! Layered GOP data model.
//!
//! A GOP is an `L x P` grid of equally sized packet payloads. Layer index 0
//! is the base layer; higher indices are enhancement layers in significance
//! order, so a layer is only useful when every lower layer is present.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::{seed, Error, Result};

/// One GOP of layered media.
#[derive(Clone, PartialEq, Eq)]
pub struct LayerGrid {
    gop_id: u64,
    layers: usize,
    packets_per_layer: usize,
    payload_size: usize,
    // row-major: layer, then column, then byte
    data: Vec<u8>,
}

impl LayerGrid {
    fn check_dims(layers: usize, packets: usize, payload: usize) -> Result<()> {
        if layers == 0 || packets == 0 || payload == 0 {
            return Err(Error::InvalidDimensions {
                layers,
                packets,
                payload,
            });
        }
        Ok(())
    }

    /// Builds a grid from a row-major byte buffer: layer 1 (base) first,
    /// then each enhancement layer in order.
    pub fn from_bytes(
        gop_id: u64,
        data: &[u8],
        layers: usize,
        packets_per_layer: usize,
        payload_size: usize,
    ) -> Result<Self> {
        Self::check_dims(layers, packets_per_layer, payload_size)?;
        let expected = layers * packets_per_layer * payload_size;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            gop_id,
            layers,
            packets_per_layer,
            payload_size,
            data: data.to_vec(),
        })
    }

    /// Deterministic pseudo-random content standing in for one segmented GOP.
    pub fn synthetic(
        gop_id: u64,
        layers: usize,
        packets_per_layer: usize,
        payload_size: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::check_dims(layers, packets_per_layer, payload_size)?;
        let mut data = vec![0u8; layers * packets_per_layer * payload_size];
        seed::rng(seed::derive(seed, seed::stream::MEDIA_CONTENT, gop_id)).fill_bytes(&mut data);
        Ok(Self {
            gop_id,
            layers,
            packets_per_layer,
            payload_size,
            data,
        })
    }

    pub fn gop_id(&self) -> u64 {
        self.gop_id
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn packets_per_layer(&self) -> usize {
        self.packets_per_layer
    }

    pub fn payload_size(&self) -> usize {
        self.payload_size
    }

    /// Total packet count `N = L * P`.
    pub fn packet_count(&self) -> usize {
        self.layers * self.packets_per_layer
    }

    /// Payload of `(layer, column)`, both zero-based.
    pub fn cell(&self, layer: usize, column: usize) -> &[u8] {
        assert!(layer < self.layers && column < self.packets_per_layer);
        let start = (layer * self.packets_per_layer + column) * self.payload_size;
        &self.data[start..start + self.payload_size]
    }

    /// All payloads of `layer`, concatenated column by column.
    pub fn layer_bytes(&self, layer: usize) -> &[u8] {
        let row = self.packets_per_layer * self.payload_size;
        &self.data[layer * row..(layer + 1) * row]
    }

    /// The first `layers` layers as a grid of their own.
    pub fn prefix(&self, layers: usize) -> Result<Self> {
        let row = self.packets_per_layer * self.payload_size;
        if layers > self.layers {
            return Err(Error::InvalidDimensions {
                layers,
                packets: self.packets_per_layer,
                payload: self.payload_size,
            });
        }
        Self::from_bytes(
            self.gop_id,
            &self.data[..layers * row],
            layers,
            self.packets_per_layer,
            self.payload_size,
        )
    }

    /// Row-major flattening, the inverse of [`LayerGrid::from_bytes`].
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

impl fmt::Debug for LayerGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LayerGrid")
            .field("gop_id", &self.gop_id)
            .field("layers", &self.layers)
            .field("packets_per_layer", &self.packets_per_layer)
            .field("payload_size", &self.payload_size)
            .finish_non_exhaustive()
    }
}

/// Transmission counts per triangular class: `counts[i]` packets mixing
/// layers `1..=i+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyVector(Vec<u32>);

impl StrategyVector {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidStrategy("no classes".into()));
        }
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total == 0 || total > u64::from(u32::MAX) {
            return Err(Error::InvalidStrategy(format!("budget must be positive, got {total}")));
        }
        Ok(Self(counts))
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// Number of classes (equals the layer count of the grid it encodes).
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn budget(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Deepest class with a non-zero count.
    pub fn depth(&self) -> usize {
        self.0.iter().rposition(|&c| c > 0).map_or(0, |i| i + 1)
    }
}

impl fmt::Display for StrategyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for StrategyVector {
    type Err = Error;

    /// Accepts `64,0,0,0`, `(64,0,0,0)` or whitespace-separated counts.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let counts = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::InvalidStrategy(format!("bad count {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_sized_gop() {
        let g = LayerGrid::synthetic(0, 4, 8, 1024, 7).unwrap();
        assert_eq!(g.packet_count(), 32);
        for l in 0..4 {
            for c in 0..8 {
                assert_eq!(g.cell(l, c).len(), 1024);
            }
        }
    }

    #[test]
    fn minimal_and_deterministic() {
        let g = LayerGrid::synthetic(0, 1, 1, 1, 0).unwrap();
        assert_eq!(g.as_bytes().len(), 1);
        let a = LayerGrid::synthetic(3, 4, 8, 64, 11).unwrap();
        let b = LayerGrid::synthetic(3, 4, 8, 64, 11).unwrap();
        assert_eq!(a, b);
        let c = LayerGrid::synthetic(4, 4, 8, 64, 11).unwrap();
        assert_ne!(a.as_bytes(), c.as_bytes());
    }

    #[test]
    fn zero_dimensions_rejected() {
        for (l, p, s) in [(0, 8, 1), (4, 0, 1), (4, 8, 0)] {
            assert!(matches!(
                LayerGrid::synthetic(0, l, p, s, 1),
                Err(Error::InvalidDimensions { .. })
            ));
        }
    }

    #[test]
    fn from_bytes_fill_and_mismatch() {
        let data: Vec<u8> = (0..32).collect();
        let g = LayerGrid::from_bytes(0, &data, 4, 8, 1).unwrap();
        assert_eq!(g.cell(0, 0), &[0]);
        assert_eq!(g.cell(1, 0), &[8]);
        assert_eq!(g.cell(3, 7), &[31]);
        assert_eq!(
            LayerGrid::from_bytes(0, &data[..31], 4, 8, 1),
            Err(Error::LengthMismatch {
                expected: 32,
                actual: 31
            })
        );
    }

    #[test]
    fn strategy_parse_and_depth() {
        let s: StrategyVector = "(24,20,20,0)".parse().unwrap();
        assert_eq!(s.counts(), &[24, 20, 20, 0]);
        assert_eq!(s.budget(), 64);
        assert_eq!(s.depth(), 3);
        assert_eq!(s.to_string(), "(24,20,20,0)");
        assert!("0,0".parse::<StrategyVector>().is_err());
        assert!("1,x".parse::<StrategyVector>().is_err());
    }

    proptest! {
        #[test]
        fn flatten_round_trip(l in 1usize..5, p in 1usize..9, s in 1usize..17, seed in any::<u64>()) {
            let g = LayerGrid::synthetic(seed % 100, l, p, s, seed).unwrap();
            let back = LayerGrid::from_bytes(g.gop_id(), g.as_bytes(), l, p, s).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(back.as_bytes(), g.as_bytes());
        }
    }
}
