//! Built-in self-test: brute-force oracle equivalence, codec round trips
//! and exhaustive GF(2^8) checks.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{decode_gop, encode_gop, Scheme};
use crate::gf256::{Tables, GENERATOR, POLY};
use crate::spt::{enumerate_strategies, expected_decoded_layers, Method};
use crate::LayerGrid;

/// Largest budget and layer count covered by the oracle suite.
pub const ORACLE_MAX_BUDGET: u32 = 8;
pub const ORACLE_MAX_LAYERS: usize = 3;
const ORACLE_PDRS: [f64; 3] = [0.3, 0.6, 0.9];
const ORACLE_PACKETS: [usize; 2] = [1, 2];
const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Corrupts one antilog entry before the GF checks run.
    pub corrupt_gf: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// First failing case, if any.
    pub failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            match &c.failure {
                None => writeln!(f, "PASS {:<24} {} cases", c.name, c.cases)?,
                Some(msg) => writeln!(f, "FAIL {:<24} {msg}", c.name)?,
            }
        }
        let verdict = if self.passed() { "passed" } else { "FAILED" };
        write!(f, "self-test {verdict}")
    }
}

pub fn run(options: &Options) -> Report {
    let mut tables = Tables::build();
    if options.corrupt_gf {
        // log(0x03) = 1, so every product involving the generator breaks
        tables.corrupt_exp(1, 0x00);
    }
    Report {
        checks: vec![oracle_suite(), codec_round_trips(), gf_checks(&tables)],
    }
}

/// Number of strategies the oracle suite covers: every vector with
/// `1 <= sum <= ORACLE_MAX_BUDGET` and `1..=ORACLE_MAX_LAYERS` classes.
pub fn oracle_strategy_count() -> usize {
    (1..=ORACLE_MAX_LAYERS)
        .map(|l| {
            (1..=ORACLE_MAX_BUDGET)
                .map(|b| enumerate_strategies(b, l, 1).map_or(0, |s| s.len()))
                .sum::<usize>()
        })
        .sum()
}

fn oracle_suite() -> CheckResult {
    let mut cases = 0;
    let mut check = |counts: &[u32], p: f64, packets: usize| -> Option<String> {
        cases += 1;
        let exact = expected_decoded_layers(counts, p, packets, Method::Exact, 0);
        let brute = expected_decoded_layers(counts, p, packets, Method::BruteForce, 0);
        match (exact, brute) {
            (Ok(a), Ok(b)) if (a - b).abs() <= ORACLE_TOLERANCE => None,
            (a, b) => Some(format!(
                "oracle {counts:?} p={p} P={packets}: exact {a:?} vs brute force {b:?}"
            )),
        }
    };
    // worked example: two class-1 packets, one layer of one packet
    if let Some(msg) = check(&[2, 1, 0, 0], 0.5, 1) {
        return CheckResult {
            name: "spt oracle",
            cases,
            failure: Some(msg),
        };
    }
    let mut strategies = 0;
    for layers in 1..=ORACLE_MAX_LAYERS {
        for budget in 1..=ORACLE_MAX_BUDGET {
            let Ok(list) = enumerate_strategies(budget, layers, 1) else {
                return CheckResult {
                    name: "spt oracle",
                    cases,
                    failure: Some(format!("enumeration failed for B={budget} L={layers}")),
                };
            };
            for s in &list {
                strategies += 1;
                for &packets in &ORACLE_PACKETS {
                    for &p in &ORACLE_PDRS {
                        if let Some(msg) = check(s.counts(), p, packets) {
                            return CheckResult {
                                name: "spt oracle",
                                cases,
                                failure: Some(msg),
                            };
                        }
                    }
                }
            }
        }
    }
    let expected = oracle_strategy_count();
    let failure = (strategies != expected || expected != 216)
        .then(|| format!("oracle covered {strategies} strategies, expected {expected} (216)"));
    CheckResult {
        name: "spt oracle",
        cases,
        failure,
    }
}

fn codec_round_trips() -> CheckResult {
    let mut cases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    for scheme in [Scheme::Xor, Scheme::Rlc] {
        for &(layers, packets, payload) in &[(1, 1, 1), (2, 3, 5), (4, 8, 16), (3, 4, 64)] {
            for gop in 0..8u64 {
                cases += 1;
                let grid = LayerGrid::synthetic(gop, layers, packets, payload, rng.gen()).expect("valid dimensions");
                // generous: three full layers' worth per class
                let strategy = crate::StrategyVector::new(vec![3 * packets as u32; layers]).expect("nonzero");
                let result = encode_gop(&grid, &strategy, scheme, rng.gen())
                    .and_then(|coded| decode_gop(&coded, layers, packets, payload));
                let ok = match &result {
                    Ok(d) => match scheme {
                        // XOR replicas cover every column, so the grid always decodes
                        Scheme::Xor => d.layers == layers && d.grid.as_ref() == Some(&grid),
                        // RLC may be rank deficient; whatever decodes must be exact
                        Scheme::Rlc => d
                            .grid
                            .as_ref()
                            .map_or(d.layers == 0, |g| grid.prefix(d.layers).is_ok_and(|p| *g == p)),
                    },
                    Err(_) => false,
                };
                if !ok {
                    return CheckResult {
                        name: "codec round trip",
                        cases,
                        failure: Some(format!(
                            "codec {scheme} L={layers} P={packets} S={payload} gop={gop}: {result:?}"
                        )),
                    };
                }
            }
        }
    }
    CheckResult {
        name: "codec round trip",
        cases,
        failure: None,
    }
}

/// Shift-and-add multiplication, independent of the tables.
fn peasant_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= (POLY & 0xFF) as u8;
        }
        b >>= 1;
    }
    acc
}

fn gf_checks(tables: &Tables) -> CheckResult {
    let mut cases = 0;
    let fail = |cases, msg| CheckResult {
        name: "gf256",
        cases,
        failure: Some(msg),
    };
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            cases += 1;
            let got = tables.mul(a, b);
            let want = peasant_mul(a, b);
            if got != want {
                return fail(
                    cases,
                    format!("gf mul {a:#04x} * {b:#04x} = {got:#04x}, expected {want:#04x}"),
                );
            }
        }
    }
    for a in 1..=255u8 {
        cases += 1;
        match tables.inv(a) {
            Ok(i) if peasant_mul(a, i) == 1 => {}
            other => return fail(cases, format!("gf inv {a:#04x} gave {other:?}")),
        }
    }
    cases += 1;
    if tables.inv(0).is_ok() {
        return fail(cases, "gf inv 0x00 did not fail".into());
    }
    cases += 1;
    let mut x = 1u8;
    for k in 1..=255u32 {
        x = peasant_mul(x, GENERATOR);
        if x == 1 && k != 255 {
            return fail(cases, format!("gf generator {GENERATOR:#04x} has order {k}"));
        }
    }
    CheckResult {
        name: "gf256",
        cases,
        failure: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let report = run(&Options::default());
        assert!(report.passed(), "{report}");
        assert_eq!(oracle_strategy_count(), 216);
        let oracle = &report.checks[0];
        assert_eq!(oracle.cases, 1 + 216 * ORACLE_PACKETS.len() * ORACLE_PDRS.len());
        assert_eq!(report.checks[2].cases, 65536 + 255 + 2);
    }

    #[test]
    fn corrupted_tables_fail_naming_gf_case() {
        let report = run(&Options { corrupt_gf: true });
        assert!(!report.passed());
        let gf = report.checks.iter().find(|c| c.name == "gf256").unwrap();
        let msg = gf.failure.as_deref().unwrap();
        assert!(msg.starts_with("gf mul"), "{msg}");
        assert!(report.to_string().contains("FAIL gf256"));
    }

    #[test]
    fn peasant_matches_known_products() {
        assert_eq!(peasant_mul(0x57, 0x83), 0xC1);
        assert_eq!(peasant_mul(0x80, 0x02), 0x1B);
    }
}
