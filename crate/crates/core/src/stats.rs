//! Quantity statistics of runs and the batch location tests against the Nash
//! quantity.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::algorithms::{GenerationRecord, Moments};
use crate::error::{Error, Result};

/// Batches smaller than this use Student-t critical values; larger ones the
/// normal quantile.
pub const T_QUANTILE_BELOW: usize = 50;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunQuantityStats {
    /// Mean quantity over all games and players.
    pub grand_mean_q: f64,
    /// Per-generation mean of the per-game average quantity.
    #[serde(skip)]
    pub per_gen_mean_q: Vec<f64>,
    /// Sample standard deviation (normaliser `N - 1`) of the per-game average
    /// quantity over all `N` games of the run.
    pub std_q: f64,
    pub per_player_means: Vec<f64>,
}

pub fn quantity_stats(trace: &[GenerationRecord], players: usize) -> Result<RunQuantityStats> {
    if trace.is_empty() {
        return Err(Error::Analysis("quantity statistics of an empty trace".into()));
    }
    let mut all = Moments::default();
    let mut player_sums = vec![0.0; players];
    for rec in trace {
        if rec.player_means.len() != players {
            return Err(Error::Analysis(format!(
                "generation {} has {} player means, expected {players}",
                rec.generation,
                rec.player_means.len()
            )));
        }
        all = all.merge(Moments { count: u64::from(rec.games), mean: rec.mean_q, m2: rec.q_m2 });
        for (sum, m) in player_sums.iter_mut().zip(&rec.player_means) {
            *sum += m * f64::from(rec.games);
        }
    }
    if all.count == 0 {
        return Err(Error::Analysis("trace contains no games".into()));
    }
    let games = all.count as f64;
    Ok(RunQuantityStats {
        grand_mean_q: all.mean,
        per_gen_mean_q: trace.iter().map(|r| r.mean_q).collect(),
        std_q: if all.count > 1 { (all.m2 / (games - 1.0)).sqrt() } else { 0.0 },
        per_player_means: player_sums.into_iter().map(|s| s / games).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub statistic: f64,
    pub critical_value: f64,
    pub accepted: bool,
    pub alpha: f64,
    pub sample_size: usize,
}

/// Two-sided critical value of the one-sample location test.
pub fn critical_value(sample_size: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Analysis(format!("significance level {alpha} outside (0, 1)")));
    }
    let p = 1.0 - alpha / 2.0;
    let q = if sample_size < T_QUANTILE_BELOW {
        StudentsT::new(0.0, 1.0, (sample_size - 1) as f64)
            .map_err(|e| Error::Analysis(e.to_string()))?
            .inverse_cdf(p)
    } else {
        Normal::standard().inverse_cdf(p)
    };
    Ok(q)
}

/// Two-sided one-sample t test of `mean(sample) = target`.
///
/// A sample without spread is decided by exact comparison: statistic 0 and
/// accepted when every value equals the target, infinite and rejected
/// otherwise.
pub fn one_sample_mean_test(sample: &[f64], target: f64, alpha: f64) -> Result<TestVerdict> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Analysis(format!("location test needs at least 2 observations, got {n}")));
    }
    let critical_value = critical_value(n, alpha)?;
    let mut m = Moments::default();
    sample.iter().for_each(|&x| m.push(x));
    let var = m.m2 / (n as f64 - 1.0);
    let diff = m.mean - target;
    let statistic = if var > 0.0 {
        diff / (var / n as f64).sqrt()
    } else if sample.iter().all(|&x| x == target) {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(TestVerdict { statistic, critical_value, accepted: statistic.abs() <= critical_value, alpha, sample_size: n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictTable {
    pub q_nash: f64,
    /// `H0: mean over runs of the grand mean = q_nash`.
    pub grand_mean: TestVerdict,
    /// `H0: mean over runs of player i's mean = q_nash`, one per player.
    pub players: Vec<TestVerdict>,
}

impl VerdictTable {
    pub fn all_players_accepted(&self) -> bool {
        self.players.iter().all(|v| v.accepted)
    }

    pub fn any_player_rejected(&self) -> bool {
        self.players.iter().any(|v| !v.accepted)
    }
}

/// Runs the grand-mean test and one test per player over a batch. Each run
/// is paired with a key describing its parameters; all keys must be equal.
pub fn batch_verdicts<K: PartialEq + std::fmt::Debug>(
    runs: &[(K, RunQuantityStats)],
    q_nash: f64,
    alpha: f64,
) -> Result<VerdictTable> {
    let Some((key, first)) = runs.first() else {
        return Err(Error::Analysis("verdicts of an empty batch".into()));
    };
    if let Some((other, _)) = runs.iter().find(|(k, _)| k != key) {
        return Err(Error::Analysis(format!("batch mixes parameter sets {key:?} and {other:?}")));
    }
    let players = first.per_player_means.len();
    if runs.iter().any(|(_, s)| s.per_player_means.len() != players) {
        return Err(Error::Analysis("runs disagree on the number of players".into()));
    }
    let grand: Vec<f64> = runs.iter().map(|(_, s)| s.grand_mean_q).collect();
    let grand_mean = one_sample_mean_test(&grand, q_nash, alpha)?;
    let players = (0..players)
        .map(|i| {
            let sample: Vec<f64> = runs.iter().map(|(_, s)| s.per_player_means[i]).collect();
            one_sample_mean_test(&sample, q_nash, alpha)
        })
        .collect::<Result<_>>()?;
    Ok(VerdictTable { q_nash, grand_mean, players })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Builds generation records from explicit per-game player quantities.
    fn records(games: &[Vec<Vec<f64>>]) -> Vec<GenerationRecord> {
        games
            .iter()
            .enumerate()
            .map(|(g, gen)| {
                let mut m = Moments::default();
                let n = gen[0].len();
                let mut sums = vec![0.0; n];
                for game in gen {
                    m.push(game.iter().sum::<f64>() / n as f64);
                    for (s, q) in sums.iter_mut().zip(game) {
                        *s += q;
                    }
                }
                GenerationRecord {
                    generation: g as u64,
                    lumped_state: 0,
                    games: gen.len() as u32,
                    ne_games: 0,
                    mean_q: m.mean,
                    q_m2: m.m2,
                    player_means: sums.iter().map(|s| s / gen.len() as f64).collect(),
                    population_hash: 0,
                }
            })
            .collect()
    }

    #[test]
    fn constant_play() {
        let trace = records(&vec![vec![vec![86.9401; 4]; 5]; 10]);
        let s = quantity_stats(&trace, 4).unwrap();
        assert!((s.grand_mean_q - 86.9401).abs() < 1e-12);
        assert!(s.std_q < 1e-9);
        assert!(s.per_player_means.iter().all(|&m| (m - 86.9401).abs() < 1e-12));
    }

    #[test]
    fn hand_average() {
        let trace = records(&[vec![vec![10.0, 50.0], vec![30.0, 50.0]]]);
        let s = quantity_stats(&trace, 2).unwrap();
        assert_eq!(s.per_player_means, vec![20.0, 50.0]);
        assert_eq!(s.grand_mean_q, 35.0);
        // per-game means 30 and 40
        assert!((s.std_q - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_trace() {
        assert!(quantity_stats(&[], 4).is_err());
        let trace = records(&[vec![vec![1.0, 2.0]]]);
        assert!(quantity_stats(&trace, 3).is_err());
    }

    #[test]
    fn identities_and_two_pass_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let games: Vec<Vec<Vec<f64>>> = (0..40)
            .map(|_| (0..13).map(|_| (0..4).map(|_| 60.0 + 50.0 * rng.random::<f64>()).collect()).collect())
            .collect();
        let s = quantity_stats(&records(&games), 4).unwrap();

        let flat: Vec<f64> = games.iter().flatten().map(|g| g.iter().sum::<f64>() / 4.0).collect();
        let mean = flat.iter().sum::<f64>() / flat.len() as f64;
        let var = flat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (flat.len() - 1) as f64;
        assert!((s.std_q - var.sqrt()).abs() / var.sqrt() < 1e-9);

        let player_avg = s.per_player_means.iter().sum::<f64>() / 4.0;
        let gen_avg = s.per_gen_mean_q.iter().sum::<f64>() / s.per_gen_mean_q.len() as f64;
        assert!((s.grand_mean_q - player_avg).abs() / s.grand_mean_q < 1e-12);
        assert!((s.grand_mean_q - gen_avg).abs() / s.grand_mean_q < 1e-12);
    }

    #[test]
    fn degenerate_samples() {
        let v = one_sample_mean_test(&[5.0; 10], 5.0, 0.05).unwrap();
        assert_eq!(v.statistic, 0.0);
        assert!(v.accepted);
        let v = one_sample_mean_test(&[15.0; 10], 5.0, 0.05).unwrap();
        assert!(!v.accepted);
        let v = one_sample_mean_test(&[15.0, 15.0 + 1e-9, 15.0 - 1e-9], 5.0, 0.05).unwrap();
        assert!(!v.accepted);
        assert!(one_sample_mean_test(&[1.0], 1.0, 0.05).is_err());
    }

    #[test]
    fn critical_values() {
        assert!((critical_value(300, 0.05).unwrap() - 1.959_964).abs() < 1e-5);
        // t_{0.975, 29}
        assert!((critical_value(30, 0.05).unwrap() - 2.045_230).abs() < 1e-5);
        assert!(critical_value(30, 1.5).is_err());
    }

    #[test]
    fn calibrated_size() {
        // Monte-Carlo oracle: under H0 the test accepts in ~95% of samples.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 2000;
        let accepted = (0..trials)
            .filter(|_| {
                let sample: Vec<f64> = (0..300).map(|_| 86.94 + 10.0 * (rng.random::<f64>() - 0.5)).collect();
                one_sample_mean_test(&sample, 86.94, 0.05).unwrap().accepted
            })
            .count() as f64
            / trials as f64;
        // binomial sd at 2000 trials is ~0.005
        assert!((accepted - 0.95).abs() < 0.02, "{accepted}");
    }

    #[test]
    fn batch_checks() {
        let stats = |g: f64, p: Vec<f64>| RunQuantityStats { grand_mean_q: g, per_gen_mean_q: vec![], std_q: 0.0, per_player_means: p };
        let locked: Vec<_> = (0..5).map(|_| ("a", stats(40.0, vec![40.0; 4]))).collect();
        let t = batch_verdicts(&locked, 40.0, 0.05).unwrap();
        assert!(t.grand_mean.accepted && t.all_players_accepted());

        let mixed = vec![("a", stats(40.0, vec![40.0; 4])), ("b", stats(40.0, vec![40.0; 4]))];
        assert!(batch_verdicts(&mixed, 40.0, 0.05).is_err());
        let empty: Vec<(&str, RunQuantityStats)> = vec![];
        assert!(batch_verdicts(&empty, 40.0, 0.05).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariance(sample in proptest::collection::vec(-100.0f64..100.0, 2..40), target in -50.0f64..50.0, shift in -1e3f64..1e3) {
            let a = one_sample_mean_test(&sample, target, 0.05).unwrap();
            let shifted: Vec<f64> = sample.iter().map(|x| x + shift).collect();
            let b = one_sample_mean_test(&shifted, target + shift, 0.05).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() <= 1e-6 * (1.0 + a.statistic.abs()));
            prop_assert_eq!(a.accepted, b.accepted);
        }

        #[test]
        fn sign_symmetry(sample in proptest::collection::vec(-100.0f64..100.0, 2..40), target in -50.0f64..50.0) {
            let a = one_sample_mean_test(&sample, target, 0.05).unwrap();
            let neg: Vec<f64> = sample.iter().map(|x| -x).collect();
            let b = one_sample_mean_test(&neg, -target, 0.05).unwrap();
            prop_assert_eq!(a.accepted, b.accepted);
            prop_assert!((a.statistic + b.statistic).abs() <= 1e-9 * (1.0 + a.statistic.abs()));
        }
    }
}
