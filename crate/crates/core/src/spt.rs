//! Strategy Performance Table.
//!
//! For every strategy `(X_1..X_L)` with `sum X_i = B` (in steps of `g`) and
//! every PDR bin `0.05, 0.10, ..., 1.00`, the table stores the expected
//! number of decodable layers when each transmission is delivered
//! independently with probability `p`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::codec::decodable_layers;
use crate::{seed, Error, Result, StrategyVector};

pub const BIN_COUNT: usize = 20;
pub const BRUTE_FORCE_CAP: u32 = 20;
pub const DEFAULT_MC_TRIALS: u32 = 100_000;

/// PDR of bin `index` (zero-based): `0.05 * (index + 1)`.
pub fn bin_pdr(index: usize) -> f64 {
    (index + 1) as f64 / BIN_COUNT as f64
}

/// Nearest bin for a PDR estimate. Ties go to the lower bin and estimates
/// below the first bin use it.
pub fn bin_index(pdr: f64) -> usize {
    let scaled = if pdr.is_nan() { 0.0 } else { pdr * BIN_COUNT as f64 };
    let k = (scaled - 0.5).ceil();
    (k.clamp(1.0, BIN_COUNT as f64) as usize) - 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Method {
    #[default]
    Exact,
    MonteCarlo,
    BruteForce,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte-carlo",
            Method::BruteForce => "brute-force",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "monte-carlo" | "montecarlo" | "mc" => Ok(Method::MonteCarlo),
            "brute-force" | "bruteforce" => Ok(Method::BruteForce),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// All `L`-vectors of non-negative multiples of `g` summing to `B`, in
/// lexicographic order.
pub fn enumerate_strategies(budget: u32, layers: usize, granularity: u32) -> Result<Vec<StrategyVector>> {
    if granularity == 0 || budget % granularity != 0 {
        return Err(Error::Granularity { budget, granularity });
    }
    if budget == 0 || layers == 0 {
        return Err(Error::InvalidStrategy(format!(
            "need a positive budget and at least one layer (B={budget}, L={layers})"
        )));
    }
    let units = budget / granularity;
    let mut out = Vec::new();
    let mut current = vec![0u32; layers];
    fn fill(pos: usize, left: u32, g: u32, cur: &mut Vec<u32>, out: &mut Vec<StrategyVector>) {
        if pos + 1 == cur.len() {
            cur[pos] = left * g;
            out.push(StrategyVector::new(cur.clone()).expect("positive budget"));
            return;
        }
        for u in 0..=left {
            cur[pos] = u * g;
            fill(pos + 1, left - u, g, cur, out);
        }
    }
    fill(0, units, granularity, &mut current, &mut out);
    Ok(out)
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Probability(p))
    }
}

/// Binomial(n, p) probability mass function.
pub fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let n_us = n as usize;
    let mut pmf = vec![0.0; n_us + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n_us] = 1.0;
        return pmf;
    }
    let q = 1.0 - p;
    if n <= 1000 {
        let mut choose = 1.0f64;
        for (k, slot) in pmf.iter_mut().enumerate() {
            if k > 0 {
                choose = choose * (n_us - k + 1) as f64 / k as f64;
            }
            *slot = choose * p.powi(k as i32) * q.powi((n_us - k) as i32);
        }
    } else {
        let (lp, lq) = (p.ln(), q.ln());
        let mut ln_choose = 0.0f64;
        for (k, slot) in pmf.iter_mut().enumerate() {
            if k > 0 {
                ln_choose += ((n_us - k + 1) as f64).ln() - (k as f64).ln();
            }
            *slot = (ln_choose + k as f64 * lp + (n_us - k) as f64 * lq).exp();
        }
    }
    pmf
}

/// Exact expectation by a forward pass over the decodability gap.
///
/// The state after class `t` is `(gap, last)`: the gap of
/// [`decodable_layers`] and the last class at which it was zero. The final
/// `last` is the number of decoded layers.
fn expected_exact(counts: &[u32], p: f64, packets_per_layer: usize) -> f64 {
    let layers = counts.len();
    let max_gap = layers * packets_per_layer;
    let width = layers + 1;
    let mut dist = vec![0.0f64; (max_gap + 1) * width];
    dist[0] = 1.0;
    for (t, &x) in counts.iter().enumerate() {
        let pmf = binomial_pmf(x, p);
        let mut next = vec![0.0f64; dist.len()];
        for gap in 0..=max_gap {
            for last in 0..width {
                let mass = dist[gap * width + last];
                if mass == 0.0 {
                    continue;
                }
                for (r, &pr) in pmf.iter().enumerate() {
                    if pr == 0.0 {
                        continue;
                    }
                    let g = (gap + packets_per_layer).saturating_sub(r);
                    let l = if g == 0 { t + 1 } else { last };
                    next[g * width + l] += mass * pr;
                }
            }
        }
        dist = next;
    }
    dist.chunks(width)
        .flat_map(|row| row.iter().enumerate())
        .map(|(last, &m)| last as f64 * m)
        .sum()
}

/// Enumerates every delivery outcome of the `sum X_i` transmissions.
fn expected_brute_force(counts: &[u32], p: f64, packets_per_layer: usize) -> Result<f64> {
    let n: u32 = counts.iter().sum();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::BruteForceTooLarge(n));
    }
    let classes: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat(i).take(c as usize))
        .collect();
    let mut received = vec![0u32; counts.len()];
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        received.fill(0);
        for (bit, &class) in classes.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                received[class] += 1;
            }
        }
        let k = mask.count_ones() as i32;
        let weight = p.powi(k) * (1.0 - p).powi(n as i32 - k);
        total += weight * decodable_layers(&received, packets_per_layer) as f64;
    }
    Ok(total)
}

/// Seeded Monte Carlo estimate: `(mean, standard error)`.
pub fn monte_carlo_estimate(
    counts: &[u32],
    p: f64,
    packets_per_layer: usize,
    trials: u32,
    seed: u64,
) -> Result<(f64, f64)> {
    check_probability(p)?;
    let trials = trials.max(1);
    let dists = counts
        .iter()
        .map(|&x| Binomial::new(u64::from(x), p).map_err(|_| Error::Probability(p)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seed::rng(seed);
    let mut received = vec![0u32; counts.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        for (slot, d) in received.iter_mut().zip(&dists) {
            *slot = d.sample(&mut rng) as u32;
        }
        let v = decodable_layers(&received, packets_per_layer) as f64;
        sum += v;
        sum_sq += v * v;
    }
    let n = f64::from(trials);
    let mean = sum / n;
    let var = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// Expected number of decoded layers for strategy `counts` at delivery
/// probability `p`.
pub fn expected_decoded_layers(
    counts: &[u32],
    p: f64,
    packets_per_layer: usize,
    method: Method,
    seed: u64,
) -> Result<f64> {
    check_probability(p)?;
    match method {
        Method::Exact => Ok(expected_exact(counts, p, packets_per_layer)),
        Method::BruteForce => expected_brute_force(counts, p, packets_per_layer),
        Method::MonteCarlo => monte_carlo_estimate(counts, p, packets_per_layer, DEFAULT_MC_TRIALS, seed).map(|r| r.0),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyTable {
    budget: u32,
    layers: usize,
    packets_per_layer: usize,
    granularity: u32,
    method: Method,
    seed: u64,
    strategies: Vec<StrategyVector>,
    // values[s * BIN_COUNT + b]
    values: Vec<f64>,
    best: Vec<usize>,
}

/// Lexicographically largest strategy among those attaining the maximum,
/// optionally restricted to strategies no deeper than `max_depth`.
fn argmax(strategies: &[StrategyVector], values: &[f64], bin: usize, max_depth: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in strategies.iter().enumerate() {
        if s.depth() > max_depth {
            continue;
        }
        let v = values[i * BIN_COUNT + bin];
        // strategies are in ascending lexicographic order, so >= keeps the largest
        if best.is_none_or(|(_, bv)| v >= bv) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

impl StrategyTable {
    pub fn build(
        budget: u32,
        layers: usize,
        packets_per_layer: usize,
        granularity: u32,
        method: Method,
        seed: u64,
    ) -> Result<Self> {
        if packets_per_layer == 0 {
            return Err(Error::InvalidDimensions {
                layers,
                packets: 0,
                payload: 1,
            });
        }
        let strategies = enumerate_strategies(budget, layers, granularity)?;
        let values = strategies
            .par_iter()
            .enumerate()
            .map(|(si, s)| {
                (0..BIN_COUNT)
                    .map(|b| {
                        let cell_seed = seed::derive(seed, seed::stream::SPT, (si * BIN_COUNT + b) as u64);
                        expected_decoded_layers(s.counts(), bin_pdr(b), packets_per_layer, method, cell_seed)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        let best = (0..BIN_COUNT)
            .map(|b| argmax(&strategies, &values, b, layers).expect("non-empty strategy set"))
            .collect();
        Ok(Self {
            budget,
            layers,
            packets_per_layer,
            granularity,
            method,
            seed,
            strategies,
            values,
            best,
        })
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn packets_per_layer(&self) -> usize {
        self.packets_per_layer
    }

    pub fn granularity(&self) -> u32 {
        self.granularity
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn strategies(&self) -> &[StrategyVector] {
        &self.strategies
    }

    pub fn value(&self, strategy: usize, bin: usize) -> f64 {
        self.values[strategy * BIN_COUNT + bin]
    }

    /// Index of `strategy` in the table, if present.
    pub fn position(&self, strategy: &StrategyVector) -> Option<usize> {
        self.strategies.binary_search(strategy).ok()
    }

    pub fn best_index(&self, bin: usize) -> usize {
        self.best[bin]
    }

    pub fn best_value(&self, bin: usize) -> f64 {
        self.value(self.best[bin], bin)
    }

    /// Best strategy for an estimated PDR.
    pub fn select_best(&self, pdr_estimate: f64) -> &StrategyVector {
        &self.strategies[self.best[bin_index(pdr_estimate)]]
    }

    /// Best strategy for an estimated PDR among those whose deepest class is
    /// at most `max_depth`. `None` when `max_depth` is 0.
    pub fn select_best_within(&self, pdr_estimate: f64, max_depth: usize) -> Option<&StrategyVector> {
        let bin = bin_index(pdr_estimate);
        if max_depth >= self.layers {
            return Some(&self.strategies[self.best[bin]]);
        }
        argmax(&self.strategies, &self.values, bin, max_depth).map(|i| &self.strategies[i])
    }

    /// Plain-text table file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "B={}", self.budget);
        let _ = writeln!(out, "L={}", self.layers);
        let _ = writeln!(out, "P={}", self.packets_per_layer);
        let _ = writeln!(out, "g={}", self.granularity);
        let _ = writeln!(out, "method={}", self.method);
        let _ = writeln!(out, "seed={}", self.seed);
        let row = |out: &mut String, prefix: &str, b: usize, s: usize| {
            let _ = write!(out, "{prefix}{:.2}", bin_pdr(b));
            for c in self.strategies[s].counts() {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{:.6}", self.value(s, b));
        };
        for b in 0..BIN_COUNT {
            for s in 0..self.strategies.len() {
                row(&mut out, "", b, s);
            }
        }
        for b in 0..BIN_COUNT {
            row(&mut out, "best,", b, self.best[b]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::TableFormat { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut header = |key: &str| -> Result<String> {
            let (n, l) = lines.next().ok_or_else(|| err(0, format!("missing header {key}")))?;
            l.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| err(n, format!("expected {key}=...")))
        };
        fn num<T: FromStr>(v: &str, key: &str) -> Result<T> {
            v.parse().map_err(|_| Error::TableFormat {
                line: 0,
                msg: format!("bad {key} value {v:?}"),
            })
        }
        let budget: u32 = num(&header("B")?, "B")?;
        let layers: usize = num(&header("L")?, "L")?;
        let packets_per_layer: usize = num(&header("P")?, "P")?;
        let granularity: u32 = num(&header("g")?, "g")?;
        let method: Method = header("method")?.parse()?;
        let seed: u64 = num(&header("seed")?, "seed")?;

        let parse_row = |n: usize, fields: &[&str]| -> Result<(usize, StrategyVector, f64)> {
            if fields.len() != layers + 2 {
                return Err(err(n, format!("expected {} fields, got {}", layers + 2, fields.len())));
            }
            let pdr: f64 = fields[0].parse().map_err(|_| err(n, "bad pdr".into()))?;
            let bin = bin_index(pdr);
            if (bin_pdr(bin) - pdr).abs() > 1e-9 {
                return Err(err(n, format!("pdr {pdr} is not a bin")));
            }
            let counts = fields[1..=layers]
                .iter()
                .map(|f| f.parse::<u32>().map_err(|_| err(n, format!("bad count {f:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let value: f64 = fields[layers + 1].parse().map_err(|_| err(n, "bad value".into()))?;
            Ok((bin, StrategyVector::new(counts)?, value))
        };

        let mut strategies: Vec<StrategyVector> = Vec::new();
        let mut raw: Vec<(usize, usize, StrategyVector, f64)> = Vec::new();
        let mut best_rows = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields[0] == "best" {
                best_rows.push((n, parse_row(n, &fields[1..])?));
            } else {
                let (bin, s, v) = parse_row(n, &fields)?;
                if bin == 0 {
                    strategies.push(s.clone());
                }
                raw.push((n, bin, s, v));
            }
        }
        let count = strategies.len();
        if count == 0 || raw.len() != count * BIN_COUNT {
            return Err(err(
                0,
                format!("expected {} value rows, got {}", count * BIN_COUNT, raw.len()),
            ));
        }
        let mut values = vec![0.0; count * BIN_COUNT];
        for (i, (n, bin, s, v)) in raw.into_iter().enumerate() {
            let si = i % count;
            if bin != i / count || s != strategies[si] {
                return Err(err(n, "value rows out of order".into()));
            }
            values[si * BIN_COUNT + bin] = v;
        }
        if best_rows.len() != BIN_COUNT {
            return Err(err(
                0,
                format!("expected {BIN_COUNT} best rows, got {}", best_rows.len()),
            ));
        }
        let mut best = Vec::with_capacity(BIN_COUNT);
        for (b, (n, (bin, s, _))) in best_rows.into_iter().enumerate() {
            if bin != b {
                return Err(err(n, "best rows out of order".into()));
            }
            let idx = strategies
                .iter()
                .position(|x| *x == s)
                .ok_or_else(|| err(n, format!("best strategy {s} not in table")))?;
            best.push(idx);
        }
        Ok(Self {
            budget,
            layers,
            packets_per_layer,
            granularity,
            method,
            seed,
            strategies,
            values,
            best,
        })
    }
}
