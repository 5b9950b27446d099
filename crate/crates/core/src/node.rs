//! Sender, relay, and receiver state machines.
//!
//! Each machine is a sequential actor driven one GOP at a time by the
//! simulator.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::codec::{self, CodedPacket, Coding, DecodedGop, ReceptionCounts, Scheme};
use crate::heuristic::ThresholdPolicy;
use crate::spt::StrategyTable;
use crate::{seed, Error, LayerGrid, Result, StrategyVector};

/// Count of probe packets that reached the reporting node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeedbackReport {
    pub node: usize,
    pub received: u32,
    pub sent: u32,
}

impl FeedbackReport {
    pub fn new(node: usize, received: u32, sent: u32) -> Result<Self> {
        if received > sent {
            return Err(Error::Config(format!(
                "node {node} reports {received} received out of {sent} sent"
            )));
        }
        if sent == 0 {
            return Err(Error::NoProbes);
        }
        Ok(Self { node, received, sent })
    }

    pub fn pdr(&self) -> f64 {
        f64::from(self.received) / f64::from(self.sent)
    }
}

/// Where a node gets its strategies from.
#[derive(Clone, Debug)]
pub enum Selector {
    Table(Arc<StrategyTable>),
    Policy(ThresholdPolicy),
}

impl Selector {
    pub fn select(&self, pdr: f64) -> StrategyVector {
        match self {
            Selector::Table(t) => t.select_best(pdr).clone(),
            Selector::Policy(p) => p.select(pdr).clone(),
        }
    }

    pub fn select_within(&self, pdr: f64, max_depth: usize) -> Option<StrategyVector> {
        match self {
            Selector::Table(t) => t.select_best_within(pdr, max_depth).cloned(),
            Selector::Policy(p) => p.select_within(pdr, max_depth),
        }
    }

    pub fn contains(&self, strategy: &StrategyVector) -> bool {
        match self {
            Selector::Table(t) => t.position(strategy).is_some(),
            Selector::Policy(p) => p.strategies().contains(strategy),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SenderState {
    selector: Option<Selector>,
    scheme: Scheme,
    update_period: u32,
    codec_seed: u64,
    pdr_estimate: f64,
    strategy: Option<StrategyVector>,
    epoch: u64,
}

impl SenderState {
    pub fn new(selector: Option<Selector>, scheme: Scheme, update_period: u32, codec_seed: u64) -> Self {
        Self {
            selector,
            scheme,
            update_period: update_period.max(1),
            codec_seed,
            pdr_estimate: 1.0,
            strategy: None,
            epoch: 0,
        }
    }

    pub fn pdr_estimate(&self) -> f64 {
        self.pdr_estimate
    }

    pub fn strategy(&self) -> Option<&StrategyVector> {
        self.strategy.as_ref()
    }

    /// Whether the next call to [`epoch`](Self::epoch) starts an update period.
    pub fn at_period_boundary(&self) -> bool {
        self.epoch % u64::from(self.update_period) == 0
    }

    /// One GOP: absorb the latest feedback, re-select the strategy at period
    /// boundaries, and encode.
    pub fn epoch(&mut self, grid: &LayerGrid, feedback: Option<&FeedbackReport>) -> Result<Vec<CodedPacket>> {
        let selector = self.selector.as_ref().ok_or(Error::MissingSelector)?;
        if let Some(fb) = feedback {
            self.pdr_estimate = fb.pdr();
        }
        if self.at_period_boundary() || self.strategy.is_none() {
            self.strategy = Some(selector.select(self.pdr_estimate));
        }
        self.epoch += 1;
        let strategy = self.strategy.as_ref().expect("selected above");
        let seed = seed::derive(self.codec_seed, seed::stream::SENDER_CODEC, grid.gop_id());
        codec::encode_gop(grid, strategy, self.scheme, seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelayMode {
    Forward,
    Nc,
}

/// What a relay emitted for one GOP.
#[derive(Clone, Debug, PartialEq)]
pub struct RelayOutput {
    pub packets: Vec<CodedPacket>,
    /// Processing delay charged for this GOP, seconds.
    pub delay: f64,
    /// Layers recovered (nc mode only).
    pub decoded_layers: Option<usize>,
    pub strategy: Option<StrategyVector>,
}

#[derive(Clone, Debug)]
pub struct RelayState {
    id: usize,
    mode: RelayMode,
    selector: Option<Selector>,
    scheme: Scheme,
    layers: usize,
    packets_per_layer: usize,
    payload_size: usize,
    fwd_delay: f64,
    nc_delay: f64,
    codec_seed: u64,
    downstream_pdr: f64,
}

impl RelayState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        mode: RelayMode,
        selector: Option<Selector>,
        scheme: Scheme,
        (layers, packets_per_layer, payload_size): (usize, usize, usize),
        fwd_delay: f64,
        nc_delay: f64,
        codec_seed: u64,
    ) -> Self {
        Self {
            id,
            mode,
            selector,
            scheme,
            layers,
            packets_per_layer,
            payload_size,
            fwd_delay,
            nc_delay,
            codec_seed,
            downstream_pdr: 1.0,
        }
    }

    pub fn mode(&self) -> RelayMode {
        self.mode
    }

    pub fn downstream_pdr(&self) -> f64 {
        self.downstream_pdr
    }

    pub fn update_downstream(&mut self, feedback: &FeedbackReport) {
        self.downstream_pdr = feedback.pdr();
    }

    /// Handles everything received for one GOP.
    pub fn step(&mut self, incoming: Vec<CodedPacket>) -> Result<RelayOutput> {
        match self.mode {
            RelayMode::Forward => Ok(RelayOutput {
                packets: incoming,
                delay: self.fwd_delay,
                decoded_layers: None,
                strategy: None,
            }),
            RelayMode::Nc => {
                let selector = self.selector.as_ref().ok_or(Error::MissingSelector)?;
                let delay = self.fwd_delay + self.nc_delay;
                let gop_id = incoming.first().map(|p| p.gop_id);
                let DecodedGop { layers, grid } =
                    codec::decode_gop(&incoming, self.layers, self.packets_per_layer, self.payload_size)?;
                let (Some(grid), Some(gop_id)) = (grid, gop_id) else {
                    return Ok(RelayOutput {
                        packets: Vec::new(),
                        delay,
                        decoded_layers: Some(0),
                        strategy: None,
                    });
                };
                let strategy = selector
                    .select_within(self.downstream_pdr, layers)
                    .ok_or(Error::MissingSelector)?;
                let truncated = StrategyVector::new(strategy.counts()[..layers].to_vec())?;
                let seed = seed::derive(
                    self.codec_seed,
                    seed::stream::RELAY_CODEC,
                    gop_id.wrapping_mul(1024).wrapping_add(self.id as u64),
                );
                let packets = codec::encode_gop(&grid, &truncated, self.scheme, seed)?;
                Ok(RelayOutput {
                    packets,
                    delay,
                    decoded_layers: Some(layers),
                    strategy: Some(strategy),
                })
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
struct GopBuffer {
    counts: ReceptionCounts,
    xor_seen: Vec<(usize, usize)>,
    packets: Vec<CodedPacket>,
}

/// Outcome of closing one GOP at the receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct GopResult {
    pub layers: usize,
    pub counts: Vec<u32>,
    /// Full decode, present in payload-verification mode.
    pub decoded: Option<DecodedGop>,
}

#[derive(Clone, Debug)]
pub struct ReceiverState {
    layers: usize,
    packets_per_layer: usize,
    payload_size: usize,
    scheme: Scheme,
    verify: bool,
    open: BTreeMap<u64, GopBuffer>,
    received_total: u64,
    results: Vec<(u64, usize)>,
    mismatches: u64,
}

impl ReceiverState {
    pub fn new(scheme: Scheme, (layers, packets_per_layer, payload_size): (usize, usize, usize), verify: bool) -> Self {
        Self {
            layers,
            packets_per_layer,
            payload_size,
            scheme,
            verify,
            open: BTreeMap::new(),
            received_total: 0,
            results: Vec::new(),
            mismatches: 0,
        }
    }

    pub fn ingest(&mut self, packet: CodedPacket) {
        self.received_total += 1;
        let layers = self.layers;
        let buf = self.open.entry(packet.gop_id).or_insert_with(|| GopBuffer {
            counts: ReceptionCounts::new(layers),
            ..Default::default()
        });
        buf.counts.record(packet.depth);
        if let Coding::Xor { column } = packet.coding {
            buf.xor_seen.push((packet.depth, column));
        }
        if self.verify {
            buf.packets.push(packet);
        }
    }

    /// Closes `gop_id` and returns its decoded layer count.
    pub fn finalize_gop(&mut self, gop_id: u64) -> Result<GopResult> {
        let buf = self.open.remove(&gop_id).unwrap_or_else(|| GopBuffer {
            counts: ReceptionCounts::new(self.layers),
            ..Default::default()
        });
        let layers = match self.scheme {
            Scheme::Rlc => buf.counts.decodable_layers(self.packets_per_layer),
            Scheme::Xor => codec::xor_recoverable_layers(buf.xor_seen, self.layers, self.packets_per_layer),
        };
        let decoded = if self.verify {
            let d = codec::decode_gop(&buf.packets, self.layers, self.packets_per_layer, self.payload_size)?;
            if d.layers != layers {
                self.mismatches += 1;
            }
            Some(d)
        } else {
            None
        };
        self.results.push((gop_id, layers));
        Ok(GopResult {
            layers,
            counts: buf.counts.counts().to_vec(),
            decoded,
        })
    }

    /// Total packets ingested (NPR).
    pub fn received_total(&self) -> u64 {
        self.received_total
    }

    pub fn results(&self) -> &[(u64, usize)] {
        &self.results
    }

    /// GOPs where the full decode disagreed with the count rule.
    pub fn mismatches(&self) -> u64 {
        self.mismatches
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spt::Method;

    fn sv(v: &[u32]) -> StrategyVector {
        StrategyVector::new(v.to_vec()).unwrap()
    }

    fn table() -> Arc<StrategyTable> {
        Arc::new(StrategyTable::build(64, 4, 8, 4, Method::Exact, 0).unwrap())
    }

    #[test]
    fn sender_spt_lossless() {
        let t = table();
        let mut s = SenderState::new(Some(Selector::Table(t.clone())), Scheme::Rlc, 1, 3);
        let grid = LayerGrid::synthetic(0, 4, 8, 4, 1).unwrap();
        let fb = FeedbackReport::new(0, 100, 100).unwrap();
        let pkts = s.epoch(&grid, Some(&fb)).unwrap();
        assert_eq!(s.strategy(), Some(t.select_best(1.0)));
        assert_eq!(s.strategy(), Some(&sv(&[40, 8, 8, 8])));
        assert_eq!(pkts.len(), 64);
    }

    #[test]
    fn sender_heuristic_and_period() {
        let policy = ThresholdPolicy::builtin(1).unwrap();
        let mut s = SenderState::new(Some(Selector::Policy(policy)), Scheme::Xor, 2, 3);
        let g0 = LayerGrid::synthetic(0, 4, 8, 4, 1).unwrap();
        let g1 = LayerGrid::synthetic(1, 4, 8, 4, 1).unwrap();
        let low = FeedbackReport::new(0, 40, 100).unwrap();
        let high = FeedbackReport::new(0, 90, 100).unwrap();
        let a = s.epoch(&g0, Some(&low)).unwrap();
        assert_eq!(a.len(), 64);
        assert!(a.iter().all(|p| p.depth == 1));
        // still inside the update period: estimate moves, strategy does not
        let b = s.epoch(&g1, Some(&high)).unwrap();
        assert!(b.iter().all(|p| p.depth == 1));
        assert_eq!(s.pdr_estimate(), 0.9);
        let c = s.epoch(&g1, None).unwrap();
        assert_eq!(s.strategy(), Some(&sv(&[24, 20, 20, 0])));
        assert!(c.iter().any(|p| p.depth == 3));
    }

    #[test]
    fn missing_selector() {
        let mut s = SenderState::new(None, Scheme::Rlc, 1, 0);
        let g = LayerGrid::synthetic(0, 4, 8, 4, 1).unwrap();
        assert_eq!(s.epoch(&g, None), Err(Error::MissingSelector));
        let mut r = RelayState::new(0, RelayMode::Nc, None, Scheme::Rlc, (4, 8, 4), 0.0, 0.0, 0);
        assert_eq!(r.step(Vec::new()), Err(Error::MissingSelector));
    }

    #[test]
    fn forwarder_is_transparent() {
        let g = LayerGrid::synthetic(0, 4, 8, 4, 1).unwrap();
        let pkts = codec::encode_gop(&g, &sv(&[40, 0, 0, 0]), Scheme::Rlc, 1).unwrap();
        let mut r = RelayState::new(0, RelayMode::Forward, None, Scheme::Rlc, (4, 8, 4), 0.005, 60.0, 0);
        let out = r.step(pkts.clone()).unwrap();
        assert_eq!(out.packets, pkts);
        assert_eq!(out.delay, 0.005);
    }

    #[test]
    fn nc_relay_reencodes_full_and_partial() {
        let t = table();
        let g = LayerGrid::synthetic(5, 4, 8, 4, 1).unwrap();
        let mut r = RelayState::new(
            1,
            RelayMode::Nc,
            Some(Selector::Table(t)),
            Scheme::Rlc,
            (4, 8, 4),
            0.005,
            60.0,
            9,
        );
        r.update_downstream(&FeedbackReport::new(2, 100, 100).unwrap());
        // find a seed whose full delivery decodes completely
        let pkts = (0..20)
            .map(|s| codec::encode_gop(&g, &sv(&[40, 8, 8, 8]), Scheme::Rlc, s).unwrap())
            .find(|p| codec::decode_gop(p, 4, 8, 4).unwrap().layers == 4)
            .unwrap();
        let out = r.step(pkts).unwrap();
        assert_eq!(out.decoded_layers, Some(4));
        assert_eq!(out.packets.len(), 64);
        assert_eq!(out.delay, 60.005);
        let mut counts = ReceptionCounts::new(4);
        out.packets.iter().for_each(|p| counts.record(p.depth));
        assert_eq!(counts.decodable_layers(8), 4);
        assert_eq!(
            codec::decode_gop(&out.packets, 4, 8, 4).unwrap().grid.map(|x| x == g),
            Some(true)
        );

        let base_only = codec::encode_gop(&g, &sv(&[16, 0, 0, 0]), Scheme::Rlc, 1).unwrap();
        let out = r.step(base_only).unwrap();
        assert_eq!(out.decoded_layers, Some(1));
        assert_eq!(out.packets.len(), 64);
        assert!(out.packets.iter().all(|p| p.depth == 1));

        let out = r.step(Vec::new()).unwrap();
        assert!(out.packets.is_empty());
    }

    #[test]
    fn receiver_counts() {
        let mut rx = ReceiverState::new(Scheme::Rlc, (4, 1, 2), true);
        assert_eq!(rx.finalize_gop(0).unwrap().layers, 0);
        let g = LayerGrid::synthetic(1, 4, 1, 2, 1).unwrap();
        for p in codec::encode_gop(&g, &sv(&[1, 1, 1, 0]), Scheme::Rlc, 4).unwrap() {
            rx.ingest(p);
        }
        let res = rx.finalize_gop(1).unwrap();
        assert_eq!(res.layers, 3);
        assert_eq!(res.counts, vec![1, 1, 1, 0]);
        assert_eq!(rx.received_total(), 3);

        let mut rx = ReceiverState::new(Scheme::Rlc, (4, 8, 1), false);
        let g = LayerGrid::synthetic(2, 4, 8, 1, 1).unwrap();
        for p in codec::encode_gop(&g, &sv(&[24, 20, 20, 0]), Scheme::Rlc, 4).unwrap() {
            rx.ingest(p);
        }
        assert_eq!(rx.finalize_gop(2).unwrap().layers, 3);
    }

    #[test]
    fn feedback_validation() {
        assert!(FeedbackReport::new(0, 5, 4).is_err());
        assert!(FeedbackReport::new(0, 0, 0).is_err());
        assert_eq!(FeedbackReport::new(0, 1, 4).unwrap().pdr(), 0.25);
    }
}
