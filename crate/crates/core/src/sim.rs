//! Multi-hop chain simulator.
//!
//! A chain is `sender -> I_1 -> ... -> I_{h-1} -> receiver` over `h` lossy
//! links. Each intermediate either forwards packets untouched or decodes
//! and re-encodes them (nc). Coding nodes (the sender and nc relays) each
//! probe the stretch of links up to the next coding node and pick their
//! strategy from that PDR, so an all-forwarder chain uses the end-to-end
//! PDR and an all-nc chain uses per-hop PDRs.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{chain_e2e_pdr, LinkModel, DEFAULT_PROBES};
use crate::codec::Scheme;
use crate::heuristic::ThresholdPolicy;
use crate::node::{FeedbackReport, ReceiverState, RelayMode, RelayState, Selector, SenderState};
use crate::spt::{Method, StrategyTable};
use crate::{seed, Error, LayerGrid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSpec {
    pub pdr: f64,
    /// Per-packet transmission delay, seconds.
    pub tx_delay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    Spt,
    Heuristic(ThresholdPolicy),
    /// Uncoded baseline: every source packet sent `ceil(B/N)` times.
    NoNc,
}

/// How the nc processing delay `d_nc` is charged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SptCharge {
    /// Once per nc relay per run (table built once and reused).
    #[default]
    Amortized,
    /// On every GOP at every nc relay.
    PerNode,
}

impl FromStr for SptCharge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amortized" => Ok(SptCharge::Amortized),
            "per-node" | "pernode" => Ok(SptCharge::PerNode),
            other => Err(Error::Config(format!("unknown spt_charge {other:?}"))),
        }
    }
}

/// From `start_gop` on, links use `pdrs` (one per link).
#[derive(Clone, Debug, PartialEq)]
pub struct PdrEpoch {
    pub start_gop: u64,
    pub pdrs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub links: Vec<LinkSpec>,
    /// Intermediate node modes, `links.len() - 1` entries.
    pub relays: Vec<RelayMode>,
    pub scheme: Scheme,
    pub selection: Selection,
    pub budget: u32,
    pub layers: usize,
    pub packets_per_layer: usize,
    pub payload_size: usize,
    pub granularity: u32,
    pub method: Method,
    pub gop_count: u64,
    pub probes: u32,
    /// Strategy update period, in GOPs.
    pub update_period: u32,
    pub fwd_delay: f64,
    pub nc_delay: f64,
    pub spt_charge: SptCharge,
    pub seed: u64,
    pub schedule: Vec<PdrEpoch>,
    /// Decode payloads at the receiver and cross-check them against the source.
    pub verify_payloads: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            links: vec![LinkSpec {
                pdr: 1.0,
                tx_delay: 0.001,
            }],
            relays: Vec::new(),
            scheme: Scheme::Rlc,
            selection: Selection::Spt,
            budget: 64,
            layers: 4,
            packets_per_layer: 8,
            payload_size: 16,
            granularity: 4,
            method: Method::Exact,
            gop_count: 100,
            probes: DEFAULT_PROBES,
            update_period: 1,
            fwd_delay: 0.005,
            nc_delay: 60.0,
            spt_charge: SptCharge::Amortized,
            seed: 0,
            schedule: Vec::new(),
            verify_payloads: false,
        }
    }
}

impl ChainConfig {
    /// `hops` links of equal PDR, every intermediate a forwarder.
    pub fn chain(hops: usize, pdr: f64) -> Self {
        let base = Self::default();
        Self {
            links: vec![
                LinkSpec {
                    pdr,
                    tx_delay: base.links[0].tx_delay,
                };
                hops
            ],
            relays: vec![RelayMode::Forward; hops.saturating_sub(1)],
            ..base
        }
    }

    /// Makes the first `count` intermediates nc relays and the rest forwarders.
    pub fn with_nc_relays(mut self, count: usize) -> Self {
        for (i, r) in self.relays.iter_mut().enumerate() {
            *r = if i < count { RelayMode::Nc } else { RelayMode::Forward };
        }
        self
    }

    pub fn hop_count(&self) -> usize {
        self.links.len()
    }

    pub fn nc_relay_count(&self) -> usize {
        self.relays.iter().filter(|&&m| m == RelayMode::Nc).count()
    }

    pub fn set_all_pdr(&mut self, pdr: f64) {
        self.links.iter_mut().for_each(|l| l.pdr = pdr);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.links.is_empty() {
            return bad("at least one link is required".into());
        }
        if self.relays.len() != self.links.len() - 1 {
            return bad(format!(
                "{} hops need {} intermediate modes, got {}",
                self.links.len(),
                self.links.len() - 1,
                self.relays.len()
            ));
        }
        for (i, l) in self.links.iter().enumerate() {
            if !(0.0..=1.0).contains(&l.pdr) {
                return bad(format!("link {}: pdr {} outside [0, 1]", i + 1, l.pdr));
            }
            if !(l.tx_delay >= 0.0) {
                return bad(format!("link {}: d_tx must be >= 0", i + 1));
            }
        }
        if self.layers == 0 || self.packets_per_layer == 0 || self.payload_size == 0 {
            return bad("L, P and S must be at least 1".into());
        }
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.granularity == 0 || self.budget % self.granularity != 0 {
            return Err(Error::Granularity {
                budget: self.budget,
                granularity: self.granularity,
            });
        }
        if self.probes == 0 {
            return Err(Error::NoProbes);
        }
        if self.gop_count == 0 {
            return bad("gop count must be positive".into());
        }
        if !(self.fwd_delay >= 0.0 && self.nc_delay >= 0.0) {
            return bad("delays must be >= 0".into());
        }
        if let Selection::Heuristic(p) = &self.selection {
            if p.layers() != self.layers {
                return bad(format!(
                    "heuristic strategies have {} classes but L = {}",
                    p.layers(),
                    self.layers
                ));
            }
        }
        for e in &self.schedule {
            if e.pdrs.len() != self.links.len() || e.pdrs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad(format!(
                    "schedule at GOP {}: need {} PDRs in [0, 1]",
                    e.start_gop,
                    self.links.len()
                ));
            }
        }
        Ok(())
    }

    pub fn build_table(&self) -> Result<StrategyTable> {
        StrategyTable::build(
            self.budget,
            self.layers,
            self.packets_per_layer,
            self.granularity,
            self.method,
            self.seed,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// Packets received at the final receiver.
    pub npr: u64,
    /// Packets sent by the source.
    pub sent_total: u64,
    pub pdr: f64,
    /// Mean decoded layers per GOP.
    pub audl: f64,
    pub per_gop_layers: Vec<usize>,
    pub per_gop_delay: Vec<f64>,
    /// Sum of per-GOP delays plus any amortized nc charge, seconds.
    pub total_delay: f64,
    /// `total_delay / gop_count`.
    pub mean_delay: f64,
    /// Wall-clock table build time (not part of any deterministic output).
    pub spt_build_time: Duration,
    /// GOPs where full decoding disagreed with the count rule.
    pub verify_mismatches: u64,
    /// GOPs whose decoded payloads differed from the source.
    pub payload_errors: u64,
}

impl RunMetrics {
    fn finish(
        npr: u64,
        sent_total: u64,
        per_gop_layers: Vec<usize>,
        per_gop_delay: Vec<f64>,
        extra_delay: f64,
    ) -> Self {
        let gops = per_gop_layers.len().max(1) as f64;
        let audl = per_gop_layers.iter().sum::<usize>() as f64 / gops;
        let total_delay = per_gop_delay.iter().sum::<f64>() + extra_delay;
        Self {
            npr,
            sent_total,
            pdr: if sent_total == 0 {
                0.0
            } else {
                npr as f64 / sent_total as f64
            },
            audl,
            per_gop_layers,
            per_gop_delay,
            total_delay,
            mean_delay: total_delay / gops,
            spt_build_time: Duration::ZERO,
            verify_mismatches: 0,
            payload_errors: 0,
        }
    }

    /// Standard error of the per-GOP decoded-layer mean.
    pub fn audl_std_error(&self) -> f64 {
        let n = self.per_gop_layers.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let var = self
            .per_gop_layers
            .iter()
            .map(|&l| (l as f64 - self.audl).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

fn make_links(config: &ChainConfig) -> Result<Vec<LinkModel>> {
    config
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| {
            LinkModel::new(
                i,
                l.pdr,
                l.tx_delay,
                seed::derive(config.seed, seed::stream::LINK, i as u64),
            )
        })
        .collect()
}

fn apply_schedule(config: &ChainConfig, links: &mut [LinkModel], gop: u64) -> Result<()> {
    for epoch in config.schedule.iter().filter(|e| e.start_gop == gop) {
        for (link, &p) in links.iter_mut().zip(&epoch.pdrs) {
            link.set_pdr(p)?;
        }
    }
    Ok(())
}

/// Runs one configuration, building the strategy table if it needs one.
pub fn run(config: &ChainConfig) -> Result<RunMetrics> {
    config.validate()?;
    if config.selection != Selection::Spt {
        return run_with_table(config, None);
    }
    let start = Instant::now();
    let table = Arc::new(config.build_table()?);
    let built = start.elapsed();
    let mut metrics = run_with_table(config, Some(table))?;
    metrics.spt_build_time = built;
    Ok(metrics)
}

/// Runs one configuration with a prebuilt table (required for SPT selection).
pub fn run_with_table(config: &ChainConfig, table: Option<Arc<StrategyTable>>) -> Result<RunMetrics> {
    config.validate()?;
    let selector = match &config.selection {
        Selection::NoNc => return no_nc_baseline(config),
        Selection::Heuristic(p) => Selector::Policy(p.clone()),
        Selection::Spt => {
            let t = table.ok_or(Error::MissingSelector)?;
            if t.layers() != config.layers || t.packets_per_layer() != config.packets_per_layer {
                return Err(Error::Config("strategy table does not match L/P".into()));
            }
            Selector::Table(t)
        }
    };
    let hops = config.hop_count();
    let dims = (config.layers, config.packets_per_layer, config.payload_size);
    let mut links = make_links(config)?;
    let mut sender = SenderState::new(
        Some(selector.clone()),
        config.scheme,
        config.update_period,
        seed::derive(config.seed, seed::stream::SENDER_CODEC, 0),
    );
    let nc_per_gop = match config.spt_charge {
        SptCharge::PerNode => config.nc_delay,
        SptCharge::Amortized => 0.0,
    };
    let mut relays: Vec<RelayState> = config
        .relays
        .iter()
        .enumerate()
        .map(|(i, &mode)| {
            RelayState::new(
                i + 1,
                mode,
                (mode == RelayMode::Nc).then(|| selector.clone()),
                config.scheme,
                dims,
                config.fwd_delay,
                nc_per_gop,
                seed::derive(config.seed, seed::stream::RELAY_CODEC, i as u64),
            )
        })
        .collect();
    let mut receiver = ReceiverState::new(config.scheme, dims, config.verify_payloads);

    // Coding nodes sit at link boundaries 0 (sender) and i+1 for nc relay i;
    // each probes the links up to the next coding node or the receiver.
    let mut boundaries: Vec<usize> = std::iter::once(0)
        .chain(
            config
                .relays
                .iter()
                .enumerate()
                .filter(|(_, &m)| m == RelayMode::Nc)
                .map(|(i, _)| i + 1),
        )
        .collect();
    boundaries.push(hops);

    let media_seed = seed::derive(config.seed, seed::stream::MEDIA, 0);
    let mut npr = 0u64;
    let mut sent_total = 0u64;
    let mut per_gop_layers = Vec::with_capacity(config.gop_count as usize);
    let mut per_gop_delay = Vec::with_capacity(config.gop_count as usize);
    let mut mismatches = 0;
    let mut payload_errors = 0;

    for gop in 0..config.gop_count {
        apply_schedule(config, &mut links, gop)?;
        let mut sender_feedback = None;
        if sender.at_period_boundary() {
            for w in boundaries.windows(2) {
                let frac = chain_e2e_pdr(&mut links[w[0]..w[1]], config.probes)?;
                let received = (frac * f64::from(config.probes)).round() as u32;
                let report = FeedbackReport::new(w[1], received, config.probes)?;
                if w[0] == 0 {
                    sender_feedback = Some(report);
                } else {
                    relays[w[0] - 1].update_downstream(&report);
                }
            }
        }
        let grid = LayerGrid::synthetic(
            gop,
            config.layers,
            config.packets_per_layer,
            config.payload_size,
            media_seed,
        )?;
        let mut packets = sender.epoch(&grid, sender_feedback.as_ref())?;
        sent_total += packets.len() as u64;
        let mut delay = 0.0;
        for (i, link) in links.iter_mut().enumerate() {
            delay += packets.len() as f64 * link.tx_delay();
            packets = link.transmit(packets);
            if i + 1 < hops {
                let out = relays[i].step(packets)?;
                delay += out.delay;
                packets = out.packets;
            }
        }
        npr += packets.len() as u64;
        for p in packets {
            receiver.ingest(p);
        }
        let result = receiver.finalize_gop(gop)?;
        if let Some(decoded) = &result.decoded {
            if decoded.layers != result.layers {
                mismatches += 1;
            }
            if let Some(g) = &decoded.grid {
                if *g != grid.prefix(decoded.layers)? {
                    payload_errors += 1;
                }
            }
        }
        per_gop_layers.push(result.layers);
        per_gop_delay.push(delay);
    }
    let amortized = match config.spt_charge {
        SptCharge::Amortized => config.nc_relay_count() as f64 * config.nc_delay,
        SptCharge::PerNode => 0.0,
    };
    let mut m = RunMetrics::finish(npr, sent_total, per_gop_layers, per_gop_delay, amortized);
    m.verify_mismatches = mismatches;
    m.payload_errors = payload_errors;
    Ok(m)
}

/// Uncoded baseline: each of the `N = L*P` source packets is sent
/// `ceil(B/N)` times through the chain; intermediates only forward. Layer
/// `i` counts when all packets of layers `1..=i` arrived at least once.
pub fn no_nc_baseline(config: &ChainConfig) -> Result<RunMetrics> {
    config.validate()?;
    let (l, p) = (config.layers, config.packets_per_layer);
    let n = l * p;
    let copies = (config.budget as usize).div_ceil(n);
    let mut links = make_links(config)?;
    let hops = links.len();
    let mut npr = 0u64;
    let mut sent_total = 0u64;
    let mut per_gop_layers = Vec::with_capacity(config.gop_count as usize);
    let mut per_gop_delay = Vec::with_capacity(config.gop_count as usize);
    for gop in 0..config.gop_count {
        apply_schedule(config, &mut links, gop)?;
        let mut packets: Vec<usize> = (0..copies).flat_map(|_| 0..n).collect();
        sent_total += packets.len() as u64;
        let mut delay = config.fwd_delay * (hops - 1) as f64;
        for link in links.iter_mut() {
            delay += packets.len() as f64 * link.tx_delay();
            packets = link.transmit(packets);
        }
        npr += packets.len() as u64;
        let mut got = vec![false; n];
        packets.iter().for_each(|&i| got[i] = true);
        let layers = got.chunks(p).take_while(|layer| layer.iter().all(|&g| g)).count();
        per_gop_layers.push(layers);
        per_gop_delay.push(delay);
    }
    Ok(RunMetrics::finish(npr, sent_total, per_gop_layers, per_gop_delay, 0.0))
}

/// One sweep configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// `hops` links, the first `nc_relays` intermediates doing nc, SPT selection.
    Nc { hops: usize, nc_relays: usize },
    /// Uncoded baseline over `hops` links.
    NoNc { hops: usize },
    /// Built-in heuristic set on the base chain.
    Heuristic(u8),
    /// SPT selection on the base chain.
    Spt,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Mode::Nc { hops: 1, .. } => write!(f, "NC1"),
            Mode::Nc { hops, nc_relays: 0 } => write!(f, "NC{hops}-E2E"),
            Mode::Nc { hops, nc_relays } if nc_relays + 1 == hops => write!(f, "NC{hops}-HBH"),
            Mode::Nc { hops, nc_relays } => write!(f, "NC{hops}-HBH{nc_relays}"),
            Mode::NoNc { hops } => write!(f, "NoNC{hops}"),
            Mode::Heuristic(s) => write!(f, "heuristic-{s}"),
            Mode::Spt => write!(f, "spt"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    /// `NC<h>`, `NC<h>-E2E`, `NC<h>-HBH`, `NC<h>-HBH<k>`, `NoNC<h>`,
    /// `heuristic-<1|2|3>`, `spt` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMode(s.to_owned());
        let lower = s.trim().to_ascii_lowercase();
        let hops_of = |t: &str| t.parse::<usize>().ok().filter(|&h| h >= 1).ok_or_else(unknown);
        if lower == "spt" {
            return Ok(Mode::Spt);
        }
        if let Some(set) = lower.strip_prefix("heuristic-") {
            let set: u8 = set.parse().map_err(|_| unknown())?;
            ThresholdPolicy::builtin(set).map_err(|_| unknown())?;
            return Ok(Mode::Heuristic(set));
        }
        if let Some(h) = lower.strip_prefix("nonc") {
            return Ok(Mode::NoNc { hops: hops_of(h)? });
        }
        let rest = lower.strip_prefix("nc").ok_or_else(unknown)?;
        let (h, scheme) = rest.split_once('-').unwrap_or((rest, "e2e"));
        let hops = hops_of(h)?;
        let nc_relays = match scheme {
            "e2e" => 0,
            "hbh" => hops - 1,
            other => {
                let k: usize = other
                    .strip_prefix("hbh")
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(unknown)?;
                if k > hops - 1 {
                    return Err(unknown());
                }
                k
            }
        };
        Ok(Mode::Nc { hops, nc_relays })
    }
}

impl Mode {
    fn uses_table(&self) -> bool {
        matches!(self, Mode::Nc { .. } | Mode::Spt)
    }

    /// The base configuration specialised to this mode with every link at `pdr`.
    pub fn configure(&self, base: &ChainConfig, pdr: f64) -> Result<ChainConfig> {
        let tx = base.links.first().map_or(0.001, |l| l.tx_delay);
        let reshape = |hops: usize| -> ChainConfig {
            ChainConfig {
                links: vec![LinkSpec { pdr, tx_delay: tx }; hops],
                relays: vec![RelayMode::Forward; hops - 1],
                schedule: Vec::new(),
                ..base.clone()
            }
        };
        let mut c = match *self {
            Mode::Nc { hops, nc_relays } => ChainConfig {
                selection: Selection::Spt,
                ..reshape(hops).with_nc_relays(nc_relays)
            },
            Mode::NoNc { hops } => ChainConfig {
                selection: Selection::NoNc,
                ..reshape(hops)
            },
            Mode::Heuristic(set) => ChainConfig {
                selection: Selection::Heuristic(ThresholdPolicy::builtin(set)?),
                ..base.clone()
            },
            Mode::Spt => ChainConfig {
                selection: Selection::Spt,
                ..base.clone()
            },
        };
        c.set_all_pdr(pdr);
        if let Some(e) = c.schedule.first() {
            return Err(Error::Config(format!(
                "sweeps override link PDRs; remove the schedule entry at GOP {}",
                e.start_gop
            )));
        }
        Ok(c)
    }
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: String,
    pub hop_count: usize,
    pub link_pdr: f64,
    pub measured_pdr: f64,
    pub npr: u64,
    pub audl: f64,
    pub delay: f64,
    pub seed: u64,
}

impl SweepRow {
    pub fn new(mode: &str, config: &ChainConfig, link_pdr: f64, m: &RunMetrics) -> Self {
        Self {
            mode: mode.to_owned(),
            hop_count: config.hop_count(),
            link_pdr,
            measured_pdr: m.pdr,
            npr: m.npr,
            audl: m.audl,
            delay: m.mean_delay,
            seed: config.seed,
        }
    }
}

/// Runs every `(pdr, mode, repetition)` combination, in that nesting order.
///
/// Repetition `r` at grid point `i` uses the same seed for every mode, so
/// modes are compared on common random numbers. `jobs` caps the number of
/// concurrent runs; output order does not depend on it.
pub fn sweep(base: &ChainConfig, pdr_grid: &[f64], modes: &[Mode], reps: u32, jobs: usize) -> Result<Vec<SweepRow>> {
    if pdr_grid.is_empty() {
        return Err(Error::Config("empty PDR grid".into()));
    }
    let table = if modes.iter().any(Mode::uses_table) {
        Some(Arc::new(base.build_table()?))
    } else {
        None
    };
    let mut tasks = Vec::new();
    for (pi, &pdr) in pdr_grid.iter().enumerate() {
        for mode in modes {
            for rep in 0..reps {
                let mut c = mode.configure(base, pdr)?;
                c.seed = seed::derive(base.seed, seed::stream::SWEEP, ((pi as u64) << 32) | u64::from(rep));
                tasks.push((mode.to_string(), pdr, c));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|(name, pdr, c)| {
                let m = run_with_table(c, table.clone())?;
                Ok(SweepRow::new(name, c, *pdr, &m))
            })
            .collect()
    })
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(hops: usize, pdr: f64, gops: u64) -> ChainConfig {
        ChainConfig {
            gop_count: gops,
            ..ChainConfig::chain(hops, pdr)
        }
    }

    #[test]
    fn lossless_single_hop() {
        let m = run(&quick(1, 1.0, 10)).unwrap();
        assert_eq!(m.audl, 4.0);
        assert_eq!(m.pdr, 1.0);
        assert_eq!(m.npr, 640);
        assert!((m.mean_delay - 0.064).abs() < 1e-12);
    }

    #[test]
    fn forwarders_are_transparent_when_lossless() {
        let one = run(&quick(1, 1.0, 10)).unwrap();
        let two = run(&quick(2, 1.0, 10)).unwrap();
        assert_eq!(one.audl, two.audl);
        assert_eq!(one.pdr, two.pdr);
        assert_eq!(one.npr, two.npr);
        assert_eq!(one.per_gop_layers, two.per_gop_layers);
        assert!(two.mean_delay > one.mean_delay);
    }

    #[test]
    fn lossless_hbh_and_e2e_decode_everything() {
        for hops in 2..=3 {
            // XOR relays decode whenever every column is covered, so lossless is exact
            let mut c = quick(hops, 1.0, 5).with_nc_relays(hops - 1);
            c.scheme = Scheme::Xor;
            c.verify_payloads = true;
            let m = run(&c).unwrap();
            assert!(m.per_gop_layers.iter().all(|&l| l == 4), "{:?}", m.per_gop_layers);
            assert_eq!((m.payload_errors, m.verify_mismatches), (0, 0));

            // RLC blocks with no spare packets are singular about 0.4% of the time each
            let mut c = quick(hops, 1.0, 200).with_nc_relays(hops - 1);
            c.verify_payloads = true;
            let m = run(&c).unwrap();
            assert!(m.audl >= 3.9, "{}", m.audl);
            assert_eq!(m.payload_errors, 0);

            let e = run(&quick(hops, 1.0, 5)).unwrap();
            assert!(e.per_gop_layers.iter().all(|&l| l == 4));
        }
    }

    #[test]
    fn deterministic() {
        let c = quick(3, 0.7, 30).with_nc_relays(1);
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.per_gop_layers, b.per_gop_layers);
        assert_eq!(a.npr, b.npr);
        assert_eq!(a.total_delay, b.total_delay);
    }

    #[test]
    fn no_nc_extremes() {
        let mut c = quick(1, 1.0, 20);
        c.selection = Selection::NoNc;
        let m = run(&c).unwrap();
        assert_eq!(m.audl, 4.0);
        assert_eq!(m.sent_total, 20 * 64);
        c.set_all_pdr(0.0);
        assert_eq!(run(&c).unwrap().audl, 0.0);
    }

    #[test]
    fn validation() {
        let mut c = quick(2, 0.5, 1);
        c.relays.clear();
        assert!(c.validate().is_err());
        let mut c = quick(1, 0.5, 1);
        c.granularity = 3;
        assert!(matches!(c.validate(), Err(Error::Granularity { .. })));
        let mut c = quick(1, 0.5, 1);
        c.links[0].pdr = 1.5;
        assert!(c.validate().is_err());
        let mut c = quick(1, 0.5, 1);
        c.layers = 3;
        c.selection = Selection::Heuristic(ThresholdPolicy::builtin(1).unwrap());
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedule_changes_link_quality() {
        let mut c = quick(1, 1.0, 20);
        c.schedule = vec![PdrEpoch {
            start_gop: 10,
            pdrs: vec![0.0],
        }];
        let m = run(&c).unwrap();
        assert!(m.per_gop_layers[..10].iter().all(|&l| l == 4));
        assert!(m.per_gop_layers[10..].iter().all(|&l| l == 0));
    }

    #[test]
    fn mode_names_round_trip() {
        for s in ["NC1", "NoNC1", "NC2-E2E", "NC2-HBH", "NC3-HBH1", "heuristic-2", "spt"] {
            let m: Mode = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("nc3".parse::<Mode>().unwrap(), Mode::Nc { hops: 3, nc_relays: 0 });
        assert_eq!("NC3-HBH2".parse::<Mode>().unwrap().to_string(), "NC3-HBH");
        for bad in ["NC0", "NC2-HBH2", "heuristic-4", "foo", "NoNC"] {
            assert!(bad.parse::<Mode>().is_err(), "{bad}");
        }
    }

    #[test]
    fn sweep_cardinality_and_csv() {
        let base = quick(1, 1.0, 5);
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let modes = ["NC1", "NoNC1"].map(|m| m.parse().unwrap());
        let rows = sweep(&base, &grid, &modes, 2, 2).unwrap();
        assert_eq!(rows.len(), 40);
        assert_eq!(rows[0].mode, "NC1");
        assert_eq!(rows[2].mode, "NoNC1");
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf, true).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mode,hop_count,link_pdr,measured_pdr,npr,audl,delay,seed\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
        assert!(sweep(&base, &[], &modes, 1, 1).is_err());
    }
}
