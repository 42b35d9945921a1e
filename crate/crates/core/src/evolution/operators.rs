//! Selection and reproduction over bitstring genomes. Fitness is minimized.

use std::cmp::Ordering;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, RngCore};

use super::params::{EAParams, Selection};
use crate::device::{Bits, Configuration};

const ROULETTE_EPSILON: f64 = 1e-9;

fn by_fitness(fitness: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    |&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b))
}

/// Indices sorted best first; ties keep the lower index first.
pub fn rank(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(by_fitness(fitness));
    order
}

/// Size of the truncation pool for `fraction` of `n` individuals.
pub fn truncation_size(fraction: f64, n: usize) -> usize {
    // the small offset keeps 1/n · n from rounding up to 2
    (((fraction * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Draws `count` parent indices from a scored population.
pub fn select<R: Rng + ?Sized>(
    fitness: &[f64],
    method: Selection,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = fitness.len();
    assert!(n > 0, "selection needs a nonempty population");
    match method {
        Selection::Tournament { k } => {
            let k = k.clamp(1, n);
            (0..count)
                .map(|_| {
                    index::sample(rng, n, k)
                        .into_iter()
                        .min_by(by_fitness(fitness))
                        .expect("k >= 1")
                })
                .collect()
        }
        Selection::Truncation { fraction } => {
            let ranked = rank(fitness);
            let m = truncation_size(fraction, n);
            (0..count).map(|_| ranked[rng.random_range(0..m)]).collect()
        }
        Selection::RouletteWheel => {
            let finite = |f: f64| if f.is_finite() { f } else { f64::MAX };
            let worst = fitness.iter().copied().map(finite).fold(f64::MIN, f64::max);
            let weights: Vec<f64> = fitness
                .iter()
                .map(|&f| (worst - finite(f)) + ROULETTE_EPSILON)
                .collect();
            let dist = WeightedIndex::new(&weights).expect("weights are positive and finite");
            (0..count).map(|_| dist.sample(rng)).collect()
        }
    }
}

/// Per-bit mutation at a fixed rate that jumps between flipped positions
/// with geometrically distributed gaps instead of drawing once per bit.
///
/// The gap is found by a binary search over precomputed powers `(1-p)^(2^j)`
/// using only multiplications and comparisons, so the resulting stream is
/// identical on every IEEE-754 platform.
#[derive(Debug, Clone)]
pub struct Mutator {
    rate: f64,
    /// `pows[j] = (1 - rate)^(2^j)`.
    pows: Vec<f64>,
}

impl Mutator {
    pub fn new(rate: f64, genome_len: usize) -> Self {
        let mut pows = Vec::new();
        if rate > 0.0 && rate < 1.0 {
            let levels = usize::BITS - genome_len.max(1).leading_zeros() + 1;
            let mut p = 1.0 - rate;
            for _ in 0..levels {
                pows.push(p);
                p *= p;
            }
        }
        Self { rate, pows }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Number of non-flipped bits before the next flip; `>= 2^levels - 1`
    /// means "past the end of any genome this mutator was built for".
    fn gap<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        // u in (0, 1]
        let u = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let mut acc = 1.0;
        let mut g = 0usize;
        for j in (0..self.pows.len()).rev() {
            let cand = acc * self.pows[j];
            if cand >= u {
                acc = cand;
                g += 1 << j;
            }
        }
        g
    }

    /// Flips each bit independently with probability `rate`; returns the
    /// number of flips.
    pub fn mutate<R: RngCore + ?Sized>(&self, bits: &mut Bits, rng: &mut R) -> usize {
        if self.rate <= 0.0 {
            return 0;
        }
        if self.rate >= 1.0 {
            let n = bits.len();
            for mut b in bits.iter_mut() {
                *b = !*b;
            }
            return n;
        }
        let len = bits.len();
        let mut flips = 0;
        let mut pos = self.gap(rng);
        while pos < len {
            let v = bits[pos];
            bits.set(pos, !v);
            flips += 1;
            pos = pos.saturating_add(1).saturating_add(self.gap(rng));
        }
        flips
    }
}

/// Single-point crossover: `a[..cut] ++ b[cut..]`.
pub fn crossover(a: &Bits, b: &Bits, cut: usize) -> Bits {
    let mut child = a.clone();
    child[cut..].copy_from_bitslice(&b[cut..]);
    child
}

/// Breeds `params.offspring_count()` children from a parent pool.
///
/// Child `i` starts from `pool[i % pool.len()]`. When crossover applies, a
/// second parent is drawn uniformly from the pool and cut at a uniform point.
/// Mutation follows in every case.
pub fn reproduce<R: Rng + ?Sized>(
    pool: &[&Configuration],
    params: &EAParams,
    mutator: &Mutator,
    rng: &mut R,
) -> Vec<Configuration> {
    assert!(!pool.is_empty(), "reproduction needs parents");
    (0..params.offspring_count())
        .map(|i| {
            let first = pool[i % pool.len()];
            let mut child = first.clone();
            let len = child.len();
            if params.crossover_rate > 0.0 && len > 1 && rng.random_bool(params.crossover_rate) {
                let second = pool[rng.random_range(0..pool.len())];
                let cut = rng.random_range(1..len);
                *child.bits_mut() = crossover(first.bits(), second.bits(), cut);
            }
            mutator.mutate(child.bits_mut(), rng);
            child
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use bitvec::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::device::{find_builtin, random_configuration, DecodeMap};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn truncation_to_one_is_the_best() {
        let fitness = [3.0, 1.0, 2.0, 1.0, 5.0];
        let n = fitness.len();
        let pool = select(
            &fitness,
            Selection::Truncation {
                fraction: 1.0 / n as f64,
            },
            200,
            &mut rng(1),
        );
        assert!(pool.iter().all(|&i| i == 1), "lower index wins ties");
        assert_eq!(truncation_size(0.25, 10), 3);
        assert_eq!(truncation_size(0.25, 100), 25);
        assert_eq!(truncation_size(1.0 / 3.0, 3), 1);
    }

    #[test]
    fn full_tournament_returns_global_best() {
        let fitness = [4.0, 2.0, 9.0, 2.5, 7.0, 3.0];
        let pool = select(
            &fitness,
            Selection::Tournament { k: fitness.len() },
            500,
            &mut rng(2),
        );
        assert!(pool.iter().all(|&i| i == 1));
    }

    #[test]
    fn roulette_on_uniform_fitness_is_uniform() {
        let n = 8;
        let draws = 10_000;
        let pool = select(&vec![0.5; n], Selection::RouletteWheel, draws, &mut rng(3));
        let mut counts = vec![0usize; n];
        for i in pool {
            counts[i] += 1;
        }
        let expected = draws as f64 / n as f64;
        let sigma = (draws as f64 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64)).sqrt();
        for c in &counts {
            assert!((*c as f64 - expected).abs() <= 3.0 * sigma, "{counts:?}");
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 7 degrees of freedom, 99.9th percentile
        assert!(chi2 < 24.32, "chi2 = {chi2}");
    }

    #[test]
    fn roulette_prefers_better() {
        let pool = select(&[0.0, 10.0], Selection::RouletteWheel, 1000, &mut rng(4));
        assert!(pool.iter().all(|&i| i == 0));
    }

    #[test]
    fn tiny_rate_leaves_children_identical() {
        let device = Arc::new(find_builtin("FPTA2").unwrap());
        let parent = random_configuration(&device, 11);
        let params = EAParams::high_pressure_mutation(10, 1, 1e-12, 0);
        let mutator = Mutator::new(params.mutation_rate, parent.len());
        let kids = reproduce(&[&parent], &params, &mutator, &mut rng(5));
        assert_eq!(kids.len(), 9);
        assert!(kids.iter().all(|k| k.bits() == parent.bits()));
    }

    #[test]
    fn crossover_of_identical_parents_is_closed() {
        let device = Arc::new(find_builtin("FPTA2").unwrap());
        let p = random_configuration(&device, 12);
        for cut in [1, 17, 4095] {
            assert_eq!(&crossover(p.bits(), p.bits(), cut), p.bits());
        }
        let mut params = EAParams::plain_ga(1e-12, 0);
        params.crossover_rate = 1.0;
        params.population_size = 6;
        let mutator = Mutator::new(params.mutation_rate, p.len());
        let kids = reproduce(&[&p, &p], &params, &mutator, &mut rng(6));
        assert!(kids.iter().all(|k| k.bits() == p.bits()));
    }

    #[test]
    fn crossover_takes_prefix_and_suffix() {
        let a = bitvec![u64, Lsb0; 0; 10];
        let b = bitvec![u64, Lsb0; 1; 10];
        let c = crossover(&a, &b, 4);
        assert_eq!(c.count_ones(), 6);
        assert!(!c[3] && c[4]);
    }

    #[test]
    fn mutation_flip_count_matches_binomial() {
        for (rate, len) in [
            (0.01, 4096usize),
            (0.15, 4096),
            (0.5, 200),
            (1.0 / 36_864.0, 36_864),
        ] {
            let mutator = Mutator::new(rate, len);
            let mut r = rng(7);
            let children = 10_000;
            let mut total = 0usize;
            for _ in 0..children {
                let mut bits = bitvec![u64, Lsb0; 0; len];
                let flips = mutator.mutate(&mut bits, &mut r);
                assert_eq!(flips, bits.count_ones());
                total += flips;
            }
            let mean = total as f64 / children as f64;
            let expected = rate * len as f64;
            let sigma_of_mean = (len as f64 * rate * (1.0 - rate) / children as f64).sqrt();
            assert!(
                (mean - expected).abs() <= 3.0 * sigma_of_mean,
                "rate {rate}: mean {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn mutation_positions_are_uniform() {
        let len = 16;
        let mutator = Mutator::new(0.1, len);
        let mut r = rng(8);
        let mut counts = vec![0usize; len];
        let trials = 20_000;
        for _ in 0..trials {
            let mut bits = bitvec![u64, Lsb0; 0; len];
            mutator.mutate(&mut bits, &mut r);
            for i in bits.iter_ones() {
                counts[i] += 1;
            }
        }
        let sigma = (trials as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 0.1 * trials as f64).abs() <= 4.0 * sigma, "{c}");
        }
    }

    #[test]
    fn offspring_count_and_layout() {
        let device = Arc::new(find_builtin("FPTA2").unwrap());
        let map = Arc::new(DecodeMap::opaque(device.config_bits()));
        let p = crate::device::Configuration::zeros(device, map).unwrap();
        let mut params = EAParams::high_pressure_mutation(7, 1, 0.2, 0);
        params.elitism = 2;
        let mutator = Mutator::new(0.2, p.len());
        let kids = reproduce(&[&p], &params, &mutator, &mut rng(9));
        assert_eq!(kids.len(), 5);
        assert!(kids.iter().all(|k| k.same_layout(&p)));
    }
}
