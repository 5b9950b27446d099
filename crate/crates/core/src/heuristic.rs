//! Constant-time threshold policies.

use crate::{Error, Result, StrategyVector};

/// Ascending PDR breakpoints with one strategy per interval. A PDR equal to
/// a breakpoint belongs to the interval above it.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdPolicy {
    set_id: Option<u8>,
    breakpoints: Vec<f64>,
    strategies: Vec<StrategyVector>,
}

fn sv(v: [u32; 4]) -> StrategyVector {
    StrategyVector::new(v.to_vec()).expect("non-empty")
}

impl ThresholdPolicy {
    pub fn new(breakpoints: Vec<f64>, strategies: Vec<StrategyVector>) -> Result<Self> {
        if strategies.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidPolicy(format!(
                "{} breakpoints need {} strategies, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                strategies.len()
            )));
        }
        if breakpoints.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidPolicy("breakpoints must lie in (0, 1)".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPolicy("breakpoints must be strictly ascending".into()));
        }
        let (len, budget) = (strategies[0].len(), strategies[0].budget());
        if strategies.iter().any(|s| s.len() != len || s.budget() != budget) {
            return Err(Error::InvalidPolicy(
                "strategies must share layer count and budget".into(),
            ));
        }
        Ok(Self {
            set_id: None,
            breakpoints,
            strategies,
        })
    }

    /// One of the three built-in sets for `L = 4`, `B = 64`.
    pub fn builtin(set_id: u8) -> Result<Self> {
        let (breakpoints, strategies) = match set_id {
            1 => (vec![0.5], vec![sv([64, 0, 0, 0]), sv([24, 20, 20, 0])]),
            2 => (
                vec![0.3, 0.8],
                vec![sv([64, 0, 0, 0]), sv([48, 16, 0, 0]), sv([24, 20, 20, 0])],
            ),
            3 => (
                vec![0.3, 0.5, 0.8],
                vec![
                    sv([64, 0, 0, 0]),
                    sv([48, 16, 0, 0]),
                    sv([24, 20, 20, 0]),
                    sv([40, 8, 8, 8]),
                ],
            ),
            other => return Err(Error::UnknownPolicy(other)),
        };
        let mut policy = Self::new(breakpoints, strategies)?;
        policy.set_id = Some(set_id);
        Ok(policy)
    }

    pub fn set_id(&self) -> Option<u8> {
        self.set_id
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn strategies(&self) -> &[StrategyVector] {
        &self.strategies
    }

    pub fn budget(&self) -> u32 {
        self.strategies[0].budget()
    }

    pub fn layers(&self) -> usize {
        self.strategies[0].len()
    }

    fn interval(&self, pdr: f64) -> usize {
        self.breakpoints.iter().take_while(|&&b| pdr >= b).count()
    }

    pub fn select(&self, pdr: f64) -> &StrategyVector {
        &self.strategies[self.interval(pdr)]
    }

    /// Like [`select`](Self::select), but never returns a strategy deeper
    /// than `max_depth`: falls back to the nearest lower interval whose
    /// strategy fits, else to the whole budget on class 1.
    pub fn select_within(&self, pdr: f64, max_depth: usize) -> Option<StrategyVector> {
        if max_depth == 0 {
            return None;
        }
        let top = self.interval(pdr);
        if let Some(s) = self.strategies[..=top].iter().rev().find(|s| s.depth() <= max_depth) {
            return Some(s.clone());
        }
        let mut counts = vec![0; self.layers()];
        counts[0] = self.budget();
        StrategyVector::new(counts).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::decodable_layers;

    #[test]
    fn builtin_sets() {
        let s1 = ThresholdPolicy::builtin(1).unwrap();
        assert_eq!(s1.breakpoints(), &[0.5]);
        assert_eq!(s1.select(0.9), &sv([24, 20, 20, 0]));
        assert_eq!(s1.select(0.4), &sv([64, 0, 0, 0]));
        let s2 = ThresholdPolicy::builtin(2).unwrap();
        assert_eq!(s2.select(0.29), &sv([64, 0, 0, 0]));
        assert_eq!(s2.select(0.3), &sv([48, 16, 0, 0]));
        assert_eq!(s2.select(0.8), &sv([24, 20, 20, 0]));
        let s3 = ThresholdPolicy::builtin(3).unwrap();
        assert_eq!(s3.breakpoints().len(), 3);
        assert_eq!(s3.strategies().len(), 4);
        assert_eq!(s3.select(0.6), &sv([24, 20, 20, 0]));
        assert_eq!(s3.select(1.0), &sv([40, 8, 8, 8]));
        for id in 1..=3 {
            let p = ThresholdPolicy::builtin(id).unwrap();
            assert_eq!(p.select(0.0), &sv([64, 0, 0, 0]));
            assert!(p.strategies().iter().all(|s| s.budget() == 64));
        }
        assert_eq!(ThresholdPolicy::builtin(4), Err(Error::UnknownPolicy(4)));
    }

    #[test]
    fn invalid_custom_policies() {
        let one = || vec![sv([64, 0, 0, 0]), sv([24, 20, 20, 0])];
        assert!(ThresholdPolicy::new(vec![0.5, 0.6], one()).is_err());
        assert!(ThresholdPolicy::new(vec![1.0], one()).is_err());
        assert!(ThresholdPolicy::new(vec![0.6, 0.5], vec![sv([64, 0, 0, 0]); 3]).is_err());
        let mixed = vec![sv([64, 0, 0, 0]), StrategyVector::new(vec![32, 0, 0, 0]).unwrap()];
        assert!(ThresholdPolicy::new(vec![0.5], mixed).is_err());
        assert!(ThresholdPolicy::new(vec![0.5], one()).is_ok());
    }

    #[test]
    fn base_only_strategy_caps_at_one_layer() {
        for a in 0..=64u32 {
            for p in 1..=8 {
                assert!(decodable_layers(&[a, 0, 0, 0], p) <= 1);
            }
        }
    }

    #[test]
    fn restricted_selection_falls_back() {
        let s3 = ThresholdPolicy::builtin(3).unwrap();
        assert_eq!(s3.select_within(0.9, 4), Some(sv([40, 8, 8, 8])));
        assert_eq!(s3.select_within(0.9, 3), Some(sv([24, 20, 20, 0])));
        assert_eq!(s3.select_within(0.9, 2), Some(sv([48, 16, 0, 0])));
        assert_eq!(s3.select_within(0.9, 1), Some(sv([64, 0, 0, 0])));
        assert_eq!(s3.select_within(0.9, 0), None);
    }
}
