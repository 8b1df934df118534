//! Deterministic random generation for the property suites and the CLI's
//! randomized checks. All sampling is seeded (ChaCha8) and the seed is part
//! of every failure report, so runs are reproducible.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeff::{rat_i, FieldConfig, FieldElem, FieldKind, Rat};
use crate::useries::{SeriesKind, USeries};

pub struct Sampler {
    rng: ChaCha8Rng,
    pub seed: u64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }

    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.rng.next_u64() % n
    }

    pub fn int_in(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }

    /// Small nonzero rational: numerator in [-9, 9] \ {0}, denominator in
    /// [1, 4] (rejection sampling on zero).
    pub fn small_rat(&mut self) -> Rat {
        loop {
            let n = self.int_in(-9, 9);
            if n == 0 {
                continue;
            }
            let d = self.int_in(1, 4);
            return Rat::new(n.into(), d.into());
        }
    }

    pub fn small_rat_or_zero(&mut self) -> Rat {
        if self.chance(1, 4) {
            rat_i(0)
        } else {
            self.small_rat()
        }
    }

    /// Nonzero coefficient; in a Novikov field this is a monomial `c T^q`
    /// with a small integer exponent (kept exact and homogeneous-friendly).
    pub fn coeff(&mut self, cfg: &FieldConfig) -> FieldElem {
        match cfg.kind {
            FieldKind::Rational => FieldElem::Rational(self.small_rat()),
            FieldKind::Novikov { .. } => {
                let q = rat_i(self.int_in(0, 2));
                FieldElem::monomial(self.small_rat(), q)
            }
        }
    }

    /// Exact power series with exponents in `[0, max_exp]`, roughly
    /// `density`/4 of them present.
    pub fn power_series(&mut self, cfg: &FieldConfig, max_exp: i64, density: u64) -> USeries {
        let mut s = USeries::zero(SeriesKind::Power, *cfg);
        for k in 0..=max_exp {
            if self.chance(density, 4) {
                let c = self.coeff(cfg);
                s.coeffs.insert(k, c);
            }
        }
        s
    }

    /// Exact unit of `K[[u]]` (nonzero constant term).
    pub fn unit_series(&mut self, cfg: &FieldConfig, max_exp: i64) -> USeries {
        let mut s = self.power_series(cfg, max_exp, 2);
        s.coeffs.insert(0, FieldElem::Rational(self.small_rat()));
        if let FieldKind::Novikov { .. } = cfg.kind {
            s.coeffs.insert(0, FieldElem::monomial(self.small_rat(), rat_i(0)));
        }
        s
    }

    /// A fresh ChaCha stream split off for a sub-task.
    pub fn fork(&mut self) -> Sampler {
        Sampler::new(self.rng.next_u64())
    }

    /// Shuffle (Fisher-Yates).
    pub fn shuffle<T>(&mut self, xs: &mut Vec<T>) {
        if xs.is_empty() {
            return;
        }
        for i in (1..xs.len()).rev() {
            let j = self.below((i + 1) as u64) as usize;
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn deterministic_and_nonzero() {
        let mut a = Sampler::new(7);
        let mut b = Sampler::new(7);
        for _ in 0..100 {
            let x = a.small_rat();
            assert_eq!(x, b.small_rat());
            assert!(!x.is_zero());
        }
    }

    #[test]
    fn unit_series_is_a_unit() {
        let cfg = FieldConfig::rational();
        let mut s = Sampler::new(3);
        for _ in 0..20 {
            let u = s.unit_series(&cfg, 5);
            assert!(u.coeffs.contains_key(&0));
            assert!(u.inv(Some(8)).is_ok());
        }
    }
}
