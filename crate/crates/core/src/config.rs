//! Run configuration files.
//!
//! A plain-text `key = value` document. `#` starts a comment. A line
//! `[section]` prefixes the keys that follow with `section.`, so
//! `[media]` followed by `L = 4` is the same as `media.L = 4`.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `media.L`, `media.P`, `media.S` | 4, 8, 16 | layers, packets per layer, payload bytes |
//! | `media.B`, `media.g` | 64, 4 | budget per GOP, strategy granularity |
//! | `chain.hops` | highest link index, else 1 | number of links |
//! | `link.pdr`, `link.d_tx` | 1.0, 0.001 | defaults for every link |
//! | `link.<n>.pdr`, `link.<n>.d_tx` | | link `n` (1-based) |
//! | `nodes.mode` | forward | every intermediate: `forward` or `nc` |
//! | `node.<n>.mode` | | intermediate `n` (1-based) |
//! | `scheme` | rlc | `rlc` or `xor` |
//! | `selection` | spt | `spt`, `heuristic` or `nonc` |
//! | `heuristic.set` | 1 | built-in threshold set 1, 2 or 3 |
//! | `heuristic.breakpoints` | | custom ascending thresholds, comma separated |
//! | `heuristic.strategies` | | custom strategies, `;` between vectors |
//! | `spt.method` | exact | `exact`, `monte-carlo` or `brute-force` |
//! | `probes.count`, `probes.period` | 100, 1 | probes per update, update period in GOPs |
//! | `delay.d_fwd`, `delay.d_nc` | 0.005, 60 | per-intermediate and nc processing delay, seconds |
//! | `delay.spt_charge` | amortized | `amortized` or `per-node` |
//! | `sim.gops` | 100 | GOPs per run |
//! | `sim.verify` | false | decode payloads at the receiver and check them |
//! | `seeds.master` | 0 | master seed |
//! | `schedule.<gop>` | | link PDRs from GOP `gop` on: one value, or one per link |
//! | `output.csv`, `output.table` | | output paths |

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::heuristic::ThresholdPolicy;
use crate::node::RelayMode;
use crate::sim::{ChainConfig, LinkSpec, PdrEpoch, Selection};
use crate::{Error, Result, StrategyVector};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfigFile {
    pub chain: ChainConfig,
    pub outputs: Outputs,
}

struct Entry {
    line: usize,
    value: String,
}

fn parse_value<T: FromStr>(e: &Entry, what: &str) -> Result<T> {
    e.value.parse().map_err(|_| Error::ConfigLine {
        line: e.line,
        msg: format!("invalid {what}: {:?}", e.value),
    })
}

fn wrap<T>(e: &Entry, r: Result<T>) -> Result<T> {
    r.map_err(|err| Error::ConfigLine {
        line: e.line,
        msg: err.to_string(),
    })
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => parse_value::<bool>(e, "boolean"),
    }
}

fn parse_mode(e: &Entry) -> Result<RelayMode> {
    match e.value.to_ascii_lowercase().as_str() {
        "forward" | "fwd" => Ok(RelayMode::Forward),
        "nc" => Ok(RelayMode::Nc),
        _ => Err(Error::ConfigLine {
            line: e.line,
            msg: format!("node mode must be forward or nc, got {:?}", e.value),
        }),
    }
}

fn parse_list(e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| Error::ConfigLine {
                line: e.line,
                msg: format!("invalid number {t:?}"),
            })
        })
        .collect()
}

/// `link.<n>.<field>` style keys: returns `(n, field)` with `n >= 1`.
fn indexed<'a>(key: &'a str, prefix: &str) -> Option<(usize, &'a str)> {
    let rest = key.strip_prefix(prefix)?.strip_prefix('.')?;
    let (n, field) = rest.split_once('.')?;
    n.parse().ok().filter(|&n| n >= 1).map(|n| (n, field))
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_owned();
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(Error::ConfigLine {
                    line,
                    msg: format!("expected key = value, got {content:?}"),
                });
            };
            let key = if section.is_empty() {
                k.trim().to_owned()
            } else {
                format!("{section}.{}", k.trim())
            };
            if entries.contains_key(&key) {
                return Err(Error::ConfigLine {
                    line,
                    msg: format!("duplicate key {key}"),
                });
            }
            entries.insert(
                key,
                Entry {
                    line,
                    value: v.trim().to_owned(),
                },
            );
        }
        Self::from_entries(&entries)
    }

    fn from_entries(entries: &BTreeMap<String, Entry>) -> Result<Self> {
        let mut c = ChainConfig::default();
        let mut out = Outputs::default();

        let max_link = entries
            .keys()
            .filter_map(|k| indexed(k, "link"))
            .map(|(n, _)| n)
            .max()
            .unwrap_or(1);
        let hops: usize = match entries.get("chain.hops") {
            Some(e) => {
                let h: usize = parse_value(e, "hop count")?;
                if h == 0 || h < max_link {
                    return Err(Error::ConfigLine {
                        line: e.line,
                        msg: format!("chain.hops = {h} but links up to {max_link} are configured"),
                    });
                }
                h
            }
            None => max_link,
        };
        let default_link = LinkSpec {
            pdr: entries
                .get("link.pdr")
                .map(|e| parse_value(e, "pdr"))
                .transpose()?
                .unwrap_or(1.0),
            tx_delay: entries
                .get("link.d_tx")
                .map(|e| parse_value(e, "d_tx"))
                .transpose()?
                .unwrap_or(c.links[0].tx_delay),
        };
        c.links = vec![default_link; hops];
        let default_mode = entries
            .get("nodes.mode")
            .map(parse_mode)
            .transpose()?
            .unwrap_or(RelayMode::Forward);
        c.relays = vec![default_mode; hops - 1];

        let mut heuristic_set: Option<u8> = None;
        let mut breakpoints: Option<(usize, Vec<f64>)> = None;
        let mut strategies: Option<(usize, Vec<StrategyVector>)> = None;
        let mut selection = "spt".to_owned();
        let mut selection_line = 0;

        for (key, e) in entries {
            match key.as_str() {
                "chain.hops" | "link.pdr" | "link.d_tx" | "nodes.mode" => {}
                "media.L" => c.layers = parse_value(e, "layer count")?,
                "media.P" => c.packets_per_layer = parse_value(e, "packets per layer")?,
                "media.S" => c.payload_size = parse_value(e, "payload size")?,
                "media.B" => c.budget = parse_value(e, "budget")?,
                "media.g" => c.granularity = parse_value(e, "granularity")?,
                "scheme" => c.scheme = wrap(e, e.value.parse())?,
                "selection" => {
                    selection = e.value.to_ascii_lowercase();
                    selection_line = e.line;
                }
                "heuristic.set" => heuristic_set = Some(parse_value(e, "heuristic set")?),
                "heuristic.breakpoints" => breakpoints = Some((e.line, parse_list(e)?)),
                "heuristic.strategies" => {
                    let list = e
                        .value
                        .split(';')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| wrap(e, s.parse()))
                        .collect::<Result<Vec<_>>>()?;
                    strategies = Some((e.line, list));
                }
                "spt.method" => c.method = wrap(e, e.value.parse())?,
                "probes.count" => c.probes = parse_value(e, "probe count")?,
                "probes.period" => c.update_period = parse_value(e, "update period")?,
                "delay.d_fwd" => c.fwd_delay = parse_value(e, "d_fwd")?,
                "delay.d_nc" => c.nc_delay = parse_value(e, "d_nc")?,
                "delay.spt_charge" => c.spt_charge = wrap(e, e.value.parse())?,
                "sim.gops" => c.gop_count = parse_value(e, "GOP count")?,
                "sim.verify" => c.verify_payloads = parse_bool(e)?,
                "seeds.master" => c.seed = parse_value(e, "seed")?,
                "output.csv" => out.csv = Some(PathBuf::from(&e.value)),
                "output.table" => out.table = Some(PathBuf::from(&e.value)),
                k => {
                    if let Some((n, field)) = indexed(k, "link") {
                        let link = &mut c.links[n - 1];
                        match field {
                            "pdr" => link.pdr = parse_value(e, "pdr")?,
                            "d_tx" => link.tx_delay = parse_value(e, "d_tx")?,
                            _ => return Err(unknown(e, k)),
                        }
                    } else if let Some((n, "mode")) = indexed(k, "node") {
                        if n > c.relays.len() {
                            return Err(Error::ConfigLine {
                                line: e.line,
                                msg: format!("node {n} does not exist in a {hops}-hop chain"),
                            });
                        }
                        c.relays[n - 1] = parse_mode(e)?;
                    } else if let Some(gop) = k.strip_prefix("schedule.") {
                        let start_gop: u64 = gop.parse().map_err(|_| unknown(e, k))?;
                        let mut pdrs = parse_list(e)?;
                        if pdrs.len() == 1 {
                            pdrs = vec![pdrs[0]; hops];
                        }
                        c.schedule.push(PdrEpoch { start_gop, pdrs });
                    } else {
                        return Err(unknown(e, k));
                    }
                }
            }
        }
        c.schedule.sort_by_key(|e| e.start_gop);

        c.selection = match selection.as_str() {
            "spt" => Selection::Spt,
            "nonc" | "no-nc" => Selection::NoNc,
            "heuristic" => {
                let policy = match (breakpoints, strategies) {
                    (Some((_, b)), Some((line, s))) => ThresholdPolicy::new(b, s).map_err(|err| Error::ConfigLine {
                        line,
                        msg: err.to_string(),
                    })?,
                    (None, None) => {
                        ThresholdPolicy::builtin(heuristic_set.unwrap_or(1)).map_err(|err| Error::ConfigLine {
                            line: selection_line,
                            msg: err.to_string(),
                        })?
                    }
                    _ => {
                        return Err(Error::ConfigLine {
                            line: selection_line,
                            msg: "custom policies need both heuristic.breakpoints and heuristic.strategies".into(),
                        })
                    }
                };
                Selection::Heuristic(policy)
            }
            other => {
                return Err(Error::ConfigLine {
                    line: selection_line,
                    msg: format!("selection must be spt, heuristic or nonc, got {other:?}"),
                })
            }
        };
        c.validate()?;
        Ok(Self { chain: c, outputs: out })
    }
}

fn unknown(e: &Entry, key: &str) -> Error {
    Error::ConfigLine {
        line: e.line,
        msg: format!("unknown key {key:?}"),
    }
}
