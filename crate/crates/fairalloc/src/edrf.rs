//! Divisible allocation by synchronized rounds.
//!
//! Demands are first normalized so each user's dominant entry is exactly 1.
//! Every round grants all active users the same extra dominant share `x`,
//! chosen as the largest uniform step the remaining capacity admits. Users
//! whose dominant resource saturates leave; the run halts when a step of
//! zero is forced (some needed resource is already empty).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::Error;
use crate::rational::Rational;
use crate::scenario::{
    dominant_share, fractional_demands, DemandVector, ResourceVector, Scenario, UserId, WeightMode,
};

/// A demand rescaled to dominant-share units: entries lie in `[0, 1]` and at
/// least one equals 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizedDemand(Vec<Rational>);

impl NormalizedDemand {
    pub fn new(entries: Vec<Rational>) -> Result<Self, Error> {
        let one = Rational::one();
        let in_range = entries
            .iter()
            .all(|e| !e.is_negative() && e <= &one);
        if !in_range || !entries.contains(&one) {
            return Err(Error::InvalidNormalizedDemand);
        }
        Ok(NormalizedDemand(entries))
    }

    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Resources this demand saturates first, i.e. entries equal to 1.
    fn dominant_resources(&self) -> impl Iterator<Item = usize> + '_ {
        let one = Rational::one();
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, e)| **e == one)
            .map(|(r, _)| r)
    }
}

/// Divides the fractional demand by the dominant share, making the dominant
/// entry exactly 1.
pub fn normalize(
    demand: &DemandVector,
    capacities: &ResourceVector,
) -> Result<NormalizedDemand, Error> {
    let fractions = fractional_demands(demand, capacities)?;
    let ds = dominant_share(demand, capacities, None)?;
    let entries = fractions.into_iter().map(|f| f / &ds.share).collect();
    Ok(NormalizedDemand(entries))
}

/// One synchronized round: the common dominant-share step granted to every
/// listed user and the resources it saturated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdrfRound {
    pub x: Rational,
    pub active: Vec<UserId>,
    pub saturated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DivisibleAllocation {
    /// Total dominant share granted per user.
    pub shares: BTreeMap<UserId, Rational>,
    /// Exact resource amounts per user, in capacity units.
    pub amounts: BTreeMap<UserId, Vec<Rational>>,
    pub rounds: Vec<EdrfRound>,
}

fn round_core<'a, I>(
    demands: I,
    remaining: &[Rational],
) -> Result<(Rational, BTreeSet<usize>), Error>
where
    I: Iterator<Item = &'a NormalizedDemand>,
{
    let mut column_sums = vec![Rational::zero(); remaining.len()];
    let mut any = false;
    for nd in demands {
        any = true;
        if nd.len() != remaining.len() {
            return Err(Error::LengthMismatch {
                expected: remaining.len(),
                got: nd.len(),
            });
        }
        for (sum, e) in column_sums.iter_mut().zip(nd.entries()) {
            *sum += e;
        }
    }
    if !any {
        return Err(Error::EmptyUserSet);
    }

    let mut x: Option<Rational> = None;
    for (sum, rem) in column_sums.iter().zip(remaining) {
        if !sum.is_positive() {
            continue;
        }
        let step = rem / sum;
        x = Some(match x {
            None => step,
            Some(best) => best.min(step),
        });
    }
    // Every normalized demand has a 1-entry, so some column sum is positive.
    let x = x.expect("at least one positive column sum");

    let saturated = column_sums
        .iter()
        .zip(remaining)
        .enumerate()
        .filter(|(_, (sum, rem))| sum.is_positive() && *rem == &(&x * *sum))
        .map(|(r, _)| r)
        .collect();
    Ok((x, saturated))
}

/// Computes one round's uniform step over `remaining` (fractions of each
/// capacity still free) and the set of resources that step saturates.
pub fn round(
    users: &[NormalizedDemand],
    remaining: &[Rational],
) -> Result<(Rational, BTreeSet<usize>), Error> {
    round_core(users.iter(), remaining)
}

/// Runs rounds to completion over a whole scenario. Per-user weights are not
/// supported here; use the integral allocators for weighted scenarios.
pub fn allocate(scenario: &Scenario) -> Result<DivisibleAllocation, Error> {
    scenario.ensure_valid(WeightMode::Free)?;
    if scenario.has_weights() {
        return Err(Error::WeightsUnsupported("divisible round allocation"));
    }

    let m = scenario.n_resources();
    let order = scenario.ranked_user_indices();
    let demands: Vec<NormalizedDemand> = order
        .iter()
        .map(|&idx| normalize(&scenario.users[idx].demand, &scenario.resources))
        .collect::<Result<_, _>>()?;

    let mut remaining = vec![Rational::one(); m];
    let mut active: Vec<usize> = (0..demands.len()).collect();
    let mut shares = vec![Rational::zero(); demands.len()];
    let mut amounts = vec![vec![Rational::zero(); m]; demands.len()];
    let mut rounds = Vec::new();

    while !active.is_empty() {
        let (x, saturated) = round_core(active.iter().map(|&i| &demands[i]), &remaining)?;
        if x.is_zero() {
            // Some active user needs a resource that is already empty.
            break;
        }
        let mut column_consumed = vec![Rational::zero(); m];
        for &i in &active {
            shares[i] += &x;
            for (r, e) in demands[i].entries().iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                let cap = Rational::from_integer(scenario.resources[r]);
                amounts[i][r] += &(&x * e * cap);
                column_consumed[r] += &(&x * e);
            }
        }
        for (rem, used) in remaining.iter_mut().zip(&column_consumed) {
            *rem -= used;
        }
        rounds.push(EdrfRound {
            x,
            active: active
                .iter()
                .map(|&i| scenario.users[order[i]].id.clone())
                .collect(),
            saturated: saturated.iter().copied().collect(),
        });
        active.retain(|&i| {
            demands[i]
                .dominant_resources()
                .all(|r| !saturated.contains(&r))
        });
    }

    let shares = order
        .iter()
        .enumerate()
        .map(|(i, &idx)| (scenario.users[idx].id.clone(), shares[i].clone()))
        .collect();
    let amounts = order
        .iter()
        .enumerate()
        .map(|(i, &idx)| (scenario.users[idx].id.clone(), amounts[i].clone()))
        .collect();
    Ok(DivisibleAllocation { shares, amounts, rounds })
}
