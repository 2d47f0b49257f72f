//! Canonical GA operators: fitness-proportional selection, single-point
//! crossover and per-bit mutation. No elitism.
//!
//! Random draws happen in a fixed order so a seeded run replays exactly. For
//! each offspring pair [`next_generation`] draws: parent A, parent B, the cut
//! point, then one Bernoulli draw per bit of child A followed by child B.

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::Chromosome;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Owner {
    Player(usize),
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Population {
    pub members: Vec<Chromosome>,
    pub owner: Owner,
}

impl Population {
    pub fn new(members: Vec<Chromosome>, owner: Owner) -> Result<Self> {
        if let Some(first) = members.first() {
            if members.iter().any(|c| c.len() != first.len()) {
                return Err(Error::config("population members differ in length"));
            }
        }
        Ok(Population { members, owner })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl AsRef<[Chromosome]> for Population {
    fn as_ref(&self) -> &[Chromosome] {
        &self.members
    }
}

/// Non-negative selection weights aligned with a population.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessVector<T>(pub Vec<T>);

impl<T> FitnessVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shifts profits so the worst member sits just above zero:
/// `profit - min + eps` with `eps = 1e-6 * (max - min)`, or `1e-6` when all
/// profits are equal. Order is preserved and every member stays selectable.
pub fn profits_to_fitness<T: Real>(profits: &[T]) -> FitnessVector<T> {
    let Some(&first) = profits.first() else {
        return FitnessVector(Vec::new());
    };
    let (min, max) = profits.iter().fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let spread = max - min;
    let eps = T::lit(1e-6) * if spread > T::zero() { spread } else { T::one() };
    FitnessVector(profits.iter().map(|&p| p - min + eps).collect())
}

/// Ordered fitness: the `r`-th smallest profit (1-based, ties share their
/// average rank) gets weight `r^exponent`.
pub fn ranked_fitness<T: Real>(profits: &[T], exponent: f64) -> FitnessVector<T> {
    let mut order: Vec<usize> = (0..profits.len()).collect();
    order.sort_by(|&a, &b| profits[a].partial_cmp(&profits[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = vec![T::zero(); profits.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && profits[order[end + 1]] == profits[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            out[i] = T::lit(rank.powf(exponent));
        }
        start = end + 1;
    }
    FitnessVector(out)
}

/// How realised profits become roulette weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum FitnessScheme {
    /// [`profits_to_fitness`].
    MinShift,
    /// [`ranked_fitness`].
    Ranked { exponent: f64 },
}

impl Default for FitnessScheme {
    fn default() -> Self {
        FitnessScheme::Ranked { exponent: 2.0 }
    }
}

impl FitnessScheme {
    pub fn apply<T: Real>(&self, profits: &[T]) -> FitnessVector<T> {
        match *self {
            FitnessScheme::MinShift => profits_to_fitness(profits),
            FitnessScheme::Ranked { exponent } => ranked_fitness(profits, exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FitnessScheme::Ranked { exponent } if !(exponent.is_finite() && exponent >= 0.0) => {
                Err(Error::config(format!("rank exponent must be finite and >= 0, got {exponent}")))
            }
            _ => Ok(()),
        }
    }
}

/// Cumulative fitness table for repeated roulette spins.
#[derive(Debug, Clone)]
pub struct RouletteWheel<T> {
    cumulative: Vec<T>,
}

impl<T: Real> RouletteWheel<T> {
    pub fn new(fit: &FitnessVector<T>) -> Result<Self> {
        let mut acc = T::zero();
        let mut cumulative = Vec::with_capacity(fit.len());
        for &f in &fit.0 {
            if !(f >= T::zero()) || !f.is_finite() {
                return Err(Error::config(format!("invalid fitness value {f}")));
            }
            acc = acc + f;
            cumulative.push(acc);
        }
        if !(acc > T::zero()) {
            return Err(Error::config("roulette wheel needs positive total fitness"));
        }
        Ok(RouletteWheel { cumulative })
    }

    /// Index drawn with probability `fit_j / sum(fit)`.
    pub fn spin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let target = T::lit(rng.random::<f64>()) * total;
        // first slot whose cumulative weight exceeds the target
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.cumulative.len() - 1)
    }
}

/// `count` independent fitness-proportional draws, with replacement.
pub fn roulette_select<T: Real, R: Rng + ?Sized>(
    pop: &Population,
    fit: &FitnessVector<T>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Chromosome>> {
    if fit.len() != pop.len() {
        return Err(Error::config(format!(
            "fitness vector of length {} for population of {}",
            fit.len(),
            pop.len()
        )));
    }
    let wheel = RouletteWheel::new(fit)?;
    Ok((0..count).map(|_| pop.members[wheel.spin(rng)]).collect())
}

/// Swaps everything above bit position `cut` (counted from the least
/// significant end, `1 <= cut < L`).
pub fn crossover_at(a: Chromosome, b: Chromosome, cut: u32) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::config("crossover parents differ in length"));
    }
    if cut == 0 || cut >= a.len() {
        return Err(Error::config(format!("cut {cut} outside 1..{}", a.len())));
    }
    Ok((a.splice(b, cut), b.splice(a, cut)))
}

pub fn single_point_crossover<R: Rng + ?Sized>(
    a: Chromosome,
    b: Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() < 2 {
        return Err(Error::config("crossover needs chromosomes of at least two bits"));
    }
    let cut = rng.random_range(1..a.len());
    crossover_at(a, b, cut)
}

/// Per-bit mutation with a fixed flip probability.
#[derive(Debug, Clone, Copy)]
pub struct Mutation {
    flip: Bernoulli,
}

impl Mutation {
    pub fn new(p_mut: f64) -> Result<Self> {
        let flip = Bernoulli::new(p_mut)
            .map_err(|_| Error::config(format!("mutation probability {p_mut} outside [0, 1]")))?;
        Ok(Mutation { flip })
    }

    pub fn apply<R: Rng + ?Sized>(&self, mut c: Chromosome, rng: &mut R) -> Chromosome {
        for i in 0..c.len() {
            if self.flip.sample(rng) {
                c = c.flip(i);
            }
        }
        c
    }
}

pub fn mutate<R: Rng + ?Sized>(c: Chromosome, p_mut: f64, rng: &mut R) -> Result<Chromosome> {
    Ok(Mutation::new(p_mut)?.apply(c, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub p_cross: f64,
    pub p_mut: f64,
}

impl GaParams {
    pub fn new(p_mut: f64) -> Result<Self> {
        let params = GaParams { p_cross: 1.0, p_mut };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_cross != 1.0 {
            return Err(Error::config(format!(
                "crossover probability is fixed at 1, got {}",
                self.p_cross
            )));
        }
        Mutation::new(self.p_mut).map(|_| ())
    }
}

/// Selection, crossover and mutation over a whole population; output has the
/// same size as the input.
pub fn next_generation<T: Real, R: Rng + ?Sized>(
    pop: &Population,
    fit: &FitnessVector<T>,
    params: &GaParams,
    rng: &mut R,
) -> Result<Population> {
    params.validate()?;
    let mutation = Mutation::new(params.p_mut)?;
    if !pop.len().is_multiple_of(2) {
        return Err(Error::config(format!("population size must be even, got {}", pop.len())));
    }
    if fit.len() != pop.len() {
        return Err(Error::config("fitness vector not aligned with population"));
    }
    let wheel = RouletteWheel::new(fit)?;
    let mut members = Vec::with_capacity(pop.len());
    for _ in 0..pop.len() / 2 {
        let a = pop.members[wheel.spin(rng)];
        let b = pop.members[wheel.spin(rng)];
        let (c1, c2) = single_point_crossover(a, b, rng)?;
        members.push(mutation.apply(c1, rng));
        members.push(mutation.apply(c2, rng));
    }
    Ok(Population { members, owner: pop.owner })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn c(s: &str) -> Chromosome {
        s.parse().unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn pop(members: &[&str]) -> Population {
        Population::new(members.iter().map(|s| c(s)).collect(), Owner::Player(0)).unwrap()
    }

    #[test]
    fn fitness_transform() {
        let equal = profits_to_fitness(&[5.0, 5.0, 5.0]);
        assert!(equal.0.iter().all(|&f| f == equal.0[0] && f > 0.0));

        let f = profits_to_fitness(&[0.0f64, 100.0]);
        assert!((f.0[0] - 1e-4).abs() < 1e-12);
        assert!((f.0[1] - (100.0 + 1e-4)).abs() < 1e-9);

        // shift by 50, eps = 1e-4
        let f = profits_to_fitness(&[-50.0f64, 50.0]);
        assert!((f.0[0] - 1e-4).abs() < 1e-12);
        assert!((f.0[1] - 100.0001).abs() < 1e-9);
        assert!(profits_to_fitness::<f64>(&[]).is_empty());
    }

    #[test]
    fn ranked_transform() {
        let f = ranked_fitness(&[10.0f64, -3.0, 10.0, 7.0], 2.0);
        // ranks 3.5, 1, 3.5, 2
        assert_eq!(f.0, vec![12.25, 1.0, 12.25, 4.0]);
        let flat = ranked_fitness(&[1.0f64; 5], 2.0);
        assert!(flat.0.iter().all(|&x| x == 9.0));
        let linear = ranked_fitness(&[0.5f64, 0.1], 1.0);
        assert_eq!(linear.0, vec![2.0, 1.0]);
        assert!(FitnessScheme::Ranked { exponent: -1.0 }.validate().is_err());
        assert_eq!(FitnessScheme::MinShift.apply(&[0.0f64, 100.0]), profits_to_fitness(&[0.0, 100.0]));
    }

    #[test]
    fn degenerate_wheel() {
        let p = pop(&["00", "01", "10"]);
        let fit = FitnessVector(vec![0.0, 2.0, 0.0]);
        let picks = roulette_select(&p, &fit, 1000, &mut rng(1)).unwrap();
        assert!(picks.iter().all(|&x| x == c("01")));
        assert!(roulette_select(&p, &FitnessVector(vec![0.0; 3]), 1, &mut rng(1)).is_err());
        assert!(roulette_select(&p, &FitnessVector(vec![1.0; 2]), 1, &mut rng(1)).is_err());
    }

    #[test]
    fn roulette_binomial() {
        // member 2 has probability 3/4; sd of the count is sqrt(N p (1-p))
        let p = pop(&["00", "11"]);
        let n = 100_000;
        let picks = roulette_select(&p, &FitnessVector(vec![1.0, 3.0]), n, &mut rng(7)).unwrap();
        let hits = picks.iter().filter(|&&x| x == c("11")).count() as f64;
        let sd = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((hits - 0.75 * n as f64).abs() <= 3.0 * sd, "{hits}");
    }

    #[test]
    fn crossover_hand_trace() {
        let (a, b) = crossover_at(c("0000"), c("1111"), 2).unwrap();
        assert_eq!(a.to_string(), "1100");
        assert_eq!(b.to_string(), "0011");
        for cut in 1..4 {
            let (x, y) = crossover_at(c("1010"), c("1010"), cut).unwrap();
            assert_eq!((x, y), (c("1010"), c("1010")));
        }
        assert!(crossover_at(c("0000"), c("1111"), 0).is_err());
        assert!(crossover_at(c("0000"), c("1111"), 4).is_err());
        assert!(single_point_crossover(c("0"), c("1"), &mut rng(0)).is_err());
    }

    #[test]
    fn mutation_extremes() {
        let x = c("0110100101");
        assert_eq!(mutate(x, 0.0, &mut rng(3)).unwrap(), x);
        assert_eq!(mutate(x, 1.0, &mut rng(3)).unwrap(), x.complement());
        assert!(mutate(x, 1.5, &mut rng(3)).is_err());
    }

    #[test]
    fn mutation_binomial() {
        let mut r = rng(11);
        let m = Mutation::new(0.1).unwrap();
        let zero = Chromosome::zeros(50).unwrap();
        let flips: u32 = (0..2000).map(|_| m.apply(zero, &mut r).value().count_ones()).sum();
        let (n, p) = (100_000.0f64, 0.1);
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((flips as f64 - n * p).abs() <= 3.0 * sd, "{flips}");
    }

    #[test]
    fn next_generation_sizes() {
        let codec_nash = c("01010101");
        for k in [20, 30, 40, 50] {
            let p = Population::new(vec![codec_nash; k], Owner::Pooled).unwrap();
            let fit = profits_to_fitness(&vec![1.0; k]);
            let next = next_generation(&p, &fit, &GaParams::new(0.0).unwrap(), &mut rng(k as u64)).unwrap();
            assert_eq!(next.len(), k);
            assert!(next.members.iter().all(|&x| x == codec_nash));
        }
    }

    #[test]
    fn next_generation_rejects_bad_input() {
        let p = pop(&["01", "10", "11"]);
        let fit = FitnessVector(vec![1.0; 3]);
        assert!(next_generation(&p, &fit, &GaParams::new(0.1).unwrap(), &mut rng(0)).is_err());
        let bad = GaParams { p_cross: 0.5, p_mut: 0.1 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mutation_can_reach_complement() {
        let x = c("00000000");
        let mut r = rng(5);
        let reached = (0..200_000).any(|_| mutate(x, 0.3, &mut r).unwrap() == x.complement());
        assert!(reached);
    }

    #[test]
    fn deterministic_replay() {
        let p = pop(&["0001", "0110", "1011", "1111"]);
        let fit = profits_to_fitness(&[3.0, -1.0, 7.0, 2.0]);
        let params = GaParams::new(0.2).unwrap();
        let a = next_generation(&p, &fit, &params, &mut rng(42)).unwrap();
        let b = next_generation(&p, &fit, &params, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    fn chrom(bits: u32) -> impl Strategy<Value = Chromosome> {
        (0u64..(1 << bits)).prop_map(move |v| Chromosome::new(v, bits).unwrap())
    }

    proptest! {
        #[test]
        fn crossover_conserves_bits(a in chrom(12), b in chrom(12), seed in any::<u64>()) {
            let (x, y) = single_point_crossover(a, b, &mut rng(seed)).unwrap();
            prop_assert_eq!(x.len(), 12);
            for i in 0..12 {
                let before = a.bit(i) as u8 + b.bit(i) as u8;
                let after = x.bit(i) as u8 + y.bit(i) as u8;
                prop_assert_eq!(before, after);
            }
        }

        #[test]
        fn no_novel_alleles_without_mutation(
            members in proptest::collection::vec(chrom(10), 2..12usize),
            seed in any::<u64>(),
        ) {
            let mut members = members;
            if members.len() % 2 == 1 { members.pop(); }
            let p = Population::new(members, Owner::Pooled).unwrap();
            let fit = FitnessVector(vec![1.0; p.len()]);
            let next = next_generation(&p, &fit, &GaParams::new(0.0).unwrap(), &mut rng(seed)).unwrap();
            prop_assert_eq!(next.len(), p.len());
            for child in &next.members {
                for i in 0..10 {
                    prop_assert!(p.members.iter().any(|m| m.bit(i) == child.bit(i)));
                }
            }
        }
    }
}
