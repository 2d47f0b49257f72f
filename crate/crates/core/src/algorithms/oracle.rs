use rand::Rng;

use crate::encoding::QuantityCodec;
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::operators::Population;
use crate::scalar::Real;

const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Expected profit of every chromosome when each opponent's chromosome is
/// drawn uniformly from that opponent's population, which is the marginal
/// law of the co-evolutionary random matching.
///
/// Enumerates all `K^(n-1)` opponent profiles when there are at most 10^6 of
/// them, otherwise averages `samples` Monte-Carlo profiles.
pub fn expected_profit_coevol_oracle<T: Real, R: Rng + ?Sized>(
    populations: &[Population],
    model: &MarketModel<T>,
    codec: &QuantityCodec<T>,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    let n = populations.len();
    if n != model.players || populations.iter().any(|p| p.is_empty()) {
        return Err(Error::config("oracle needs one non-empty population per player"));
    }
    let quantities: Vec<Vec<T>> = populations
        .iter()
        .map(|p| p.members.iter().map(|c| codec.decode(c)).collect())
        .collect::<Result<_>>()?;

    let profiles: u128 = populations
        .iter()
        .skip(1)
        .try_fold(1u128, |acc, p| acc.checked_mul(p.len() as u128))
        .unwrap_or(u128::MAX);
    let exact = profiles <= ENUMERATION_LIMIT;
    if !exact && samples == 0 {
        return Err(Error::config("Monte-Carlo oracle needs at least one sample"));
    }

    let mut out = Vec::with_capacity(n);
    for (i, own) in quantities.iter().enumerate() {
        let others: Vec<&Vec<T>> = quantities.iter().enumerate().filter(|&(l, _)| l != i).map(|(_, q)| q).collect();
        let mut totals = Vec::new();
        if exact {
            // odometer over opponent indices
            let mut idx = vec![0usize; others.len()];
            loop {
                totals.push(others.iter().zip(&idx).fold(T::zero(), |acc, (q, &j)| acc + q[j]));
                let mut pos = 0;
                while pos < idx.len() {
                    idx[pos] += 1;
                    if idx[pos] < others[pos].len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == idx.len() {
                    break;
                }
            }
        } else {
            for _ in 0..samples {
                totals.push(others.iter().fold(T::zero(), |acc, q| acc + q[rng.random_range(0..q.len())]));
            }
        }
        let count = T::from_usize(totals.len()).unwrap();
        out.push(
            own.iter()
                .map(|&q| totals.iter().fold(T::zero(), |acc, &rest| acc + model.profit(q, q + rest)) / count)
                .collect(),
        );
    }
    Ok(out)
}
