//! Bernoulli-loss links and probe-based PDR estimation.
//!
//! Feedback (probe counts) is assumed lossless and instantaneous; only the
//! forward direction of a link drops packets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{seed, Error, Result};

pub const DEFAULT_PROBES: u32 = 100;

/// A lossy link. Deliveries are i.i.d. Bernoulli(`pdr`) in draw order.
#[derive(Clone, Debug)]
pub struct LinkModel {
    id: usize,
    pdr: f64,
    tx_delay: f64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl LinkModel {
    pub fn new(id: usize, pdr: f64, tx_delay: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pdr) {
            return Err(Error::Probability(pdr));
        }
        if !(tx_delay >= 0.0) {
            return Err(Error::Config(format!("link {id}: negative d_tx {tx_delay}")));
        }
        Ok(Self {
            id,
            pdr,
            tx_delay,
            rng: seed::rng(seed),
            draws: 0,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn pdr(&self) -> f64 {
        self.pdr
    }

    /// Changes the delivery probability for subsequent draws.
    pub fn set_pdr(&mut self, pdr: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&pdr) {
            return Err(Error::Probability(pdr));
        }
        self.pdr = pdr;
        Ok(())
    }

    /// Per-packet transmission delay in seconds.
    pub fn tx_delay(&self) -> f64 {
        self.tx_delay
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// One Bernoulli draw.
    pub fn deliver(&mut self) -> bool {
        self.draws += 1;
        self.rng.gen::<f64>() < self.pdr
    }

    /// Keeps each packet independently with probability `pdr`, in order.
    pub fn transmit<T>(&mut self, packets: Vec<T>) -> Vec<T> {
        packets.into_iter().filter(|_| self.deliver()).collect()
    }

    /// Fraction of `n_probes` probes that got through.
    pub fn estimate_pdr(&mut self, n_probes: u32) -> Result<f64> {
        if n_probes == 0 {
            return Err(Error::NoProbes);
        }
        let got = (0..n_probes).filter(|_| self.deliver()).count();
        Ok(got as f64 / f64::from(n_probes))
    }
}

/// Probes a chain of links end to end. A probe lost on one link consumes no
/// draws downstream.
pub fn chain_e2e_pdr(links: &mut [LinkModel], n_probes: u32) -> Result<f64> {
    if n_probes == 0 {
        return Err(Error::NoProbes);
    }
    if links.is_empty() {
        return Err(Error::Config("a chain needs at least one link".into()));
    }
    let got = (0..n_probes)
        .filter(|_| links.iter_mut().all(LinkModel::deliver))
        .count();
    Ok(got as f64 / f64::from(n_probes))
}

/// Analytic end-to-end delivery probability of independent links.
pub fn expected_chain_pdr(pdrs: &[f64]) -> f64 {
    pdrs.iter().product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let mut l = LinkModel::new(0, 1.0, 0.0, 1).unwrap();
        assert_eq!(l.transmit((0..50).collect::<Vec<_>>()).len(), 50);
        assert_eq!(l.draws(), 50);
        assert_eq!(l.estimate_pdr(17).unwrap(), 1.0);
        let mut l = LinkModel::new(0, 0.0, 0.0, 1).unwrap();
        assert!(l.transmit(vec![1, 2, 3]).is_empty());
        assert_eq!(l.estimate_pdr(5).unwrap(), 0.0);
    }

    #[test]
    fn order_preserved_and_seeded() {
        let mut a = LinkModel::new(0, 0.5, 0.0, 42).unwrap();
        let mut b = LinkModel::new(0, 0.5, 0.0, 42).unwrap();
        let x = a.transmit((0..1000).collect::<Vec<u32>>());
        let y = b.transmit((0..1000).collect::<Vec<u32>>());
        assert_eq!(x, y);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn binomial_concentration() {
        let mut l = LinkModel::new(0, 0.5, 0.0, 7).unwrap();
        let n = l.transmit(vec![(); 10_000]).len() as f64;
        assert!((n - 5000.0).abs() <= 4.0 * 2500f64.sqrt(), "{n}");
        let mut l = LinkModel::new(0, 0.7, 0.0, 9).unwrap();
        assert!((l.estimate_pdr(10_000).unwrap() - 0.7).abs() < 0.02);
        let mut l = LinkModel::new(0, 0.7, 0.0, 9).unwrap();
        let one = l.estimate_pdr(1).unwrap();
        assert!(one == 0.0 || one == 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(LinkModel::new(0, 1.2, 0.0, 0).err(), Some(Error::Probability(1.2)));
        let mut l = LinkModel::new(0, 0.5, 0.0, 0).unwrap();
        assert_eq!(l.estimate_pdr(0), Err(Error::NoProbes));
        assert!(chain_e2e_pdr(&mut [], 10).is_err());
        assert!(l.set_pdr(-0.1).is_err());
    }

    #[test]
    fn chain_estimates() {
        assert!((expected_chain_pdr(&[0.9, 0.9]) - 0.81).abs() < 1e-15);
        assert_eq!(expected_chain_pdr(&[1.0, 0.37, 1.0]), 0.37);
        let mut single = [LinkModel::new(0, 0.6, 0.0, 5).unwrap()];
        let mut alone = LinkModel::new(0, 0.6, 0.0, 5).unwrap();
        assert_eq!(
            chain_e2e_pdr(&mut single, 300).unwrap(),
            alone.estimate_pdr(300).unwrap()
        );
        let mut links = [
            LinkModel::new(0, 0.9, 0.0, 1).unwrap(),
            LinkModel::new(1, 0.9, 0.0, 2).unwrap(),
        ];
        let est = chain_e2e_pdr(&mut links, 20_000).unwrap();
        assert!((est - 0.81).abs() < 4.0 * (0.81 * 0.19 / 20_000f64).sqrt());
    }

    #[test]
    fn estimator_is_unbiased() {
        let mean: f64 = (0..400)
            .map(|s| LinkModel::new(0, 0.3, 0.0, s).unwrap().estimate_pdr(100).unwrap())
            .sum::<f64>()
            / 400.0;
        let se = (0.3 * 0.7 / 40_000f64).sqrt();
        assert!((mean - 0.3).abs() < 4.0 * se, "{mean}");
    }
}
