//! Cycle structure of progressive filling.
//!
//! When every user keeps fitting, progressive filling is periodic: after
//! `lcm(ds_1, …, ds_n) / ds_i` grants to user `i` all shares meet at the
//! same level and the pattern repeats. The shorter basic subcycle follows
//! the user with the largest per-task share: while that user receives one
//! task, user `i` receives `floor(ds_max / ds_i)` of them, with leftover
//! fractions surfacing as periodic extra grants across subcycles.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::Error;
use crate::rational::Rational;
use crate::scenario::{dominant_share, ResourceVector, Scenario, UserId, WeightMode};

/// Least common multiple extended to positive fractions: the smallest
/// positive value that is an integer multiple of every input. Equals
/// `lcm(numerators) / gcd(denominators)` with inputs in lowest terms.
pub fn rational_lcm(values: &[Rational]) -> Result<Rational, Error> {
    if values.is_empty() {
        return Err(Error::EmptyValueSet);
    }
    let mut numer_lcm = BigInt::one();
    let mut denom_gcd = BigInt::zero();
    for v in values {
        if !v.is_positive() {
            return Err(Error::NonPositiveValue);
        }
        numer_lcm = numer_lcm.lcm(v.numer());
        denom_gcd = denom_gcd.gcd(v.denom());
    }
    Ok(Rational::new(numer_lcm, denom_gcd))
}

/// Cycle counts can exceed any machine integer, so they serialize as
/// decimal strings, matching how fractions are rendered.
fn biguint_as_string<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn biguint_map_as_strings<S: Serializer>(
    map: &BTreeMap<UserId, BigUint>,
    s: S,
) -> Result<S::Ok, S::Error> {
    let mut out = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        out.serialize_entry(k, &v.to_string())?;
    }
    out.end()
}

/// Periodic structure of an unconstrained progressive-filling run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleProfile {
    /// Common share level at which all users realign.
    pub lcm_share: Rational,
    /// Tasks granted per full cycle, per user: `lcm_share / ds_i`.
    #[serde(serialize_with = "biguint_map_as_strings")]
    pub occurrences: BTreeMap<UserId, BigUint>,
    /// Total grants in one full cycle.
    #[serde(serialize_with = "biguint_as_string")]
    pub full_length: BigUint,
    /// Tasks per basic subcycle, per user: `floor(ds_max / ds_i)`.
    #[serde(serialize_with = "biguint_map_as_strings")]
    pub basic_occurrences: BTreeMap<UserId, BigUint>,
    /// Total grants in one basic subcycle.
    #[serde(serialize_with = "biguint_as_string")]
    pub basic_length: BigUint,
}

pub fn cycle_profile(scenario: &Scenario) -> Result<CycleProfile, Error> {
    scenario.ensure_valid(WeightMode::Free)?;
    let mut shares = Vec::with_capacity(scenario.n_users());
    for user in &scenario.users {
        let ds = dominant_share(&user.demand, &scenario.resources, user.weight.as_ref())?;
        shares.push((user.id.clone(), ds.share));
    }
    let lcm_share = rational_lcm(
        &shares.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>(),
    )?;
    let max_share = shares
        .iter()
        .map(|(_, s)| s)
        .max()
        .expect("validated scenario has users")
        .clone();

    let mut occurrences = BTreeMap::new();
    let mut basic_occurrences = BTreeMap::new();
    let mut full_length = BigUint::zero();
    let mut basic_length = BigUint::zero();
    for (id, share) in &shares {
        let count = &lcm_share / share;
        debug_assert!(count.is_integer(), "lcm is a multiple of every share");
        let count = count
            .numer()
            .to_biguint()
            .expect("positive integer multiple");
        full_length += &count;
        occurrences.insert(id.clone(), count);

        let basic = (&max_share / share)
            .floor()
            .to_biguint()
            .expect("ratio of positive shares");
        basic_length += &basic;
        basic_occurrences.insert(id.clone(), basic);
    }
    Ok(CycleProfile {
        lcm_share,
        occurrences,
        full_length,
        basic_occurrences,
        basic_length,
    })
}

/// Where a user with a fractional share ratio picks up extra grants.
///
/// A ratio `ds_max / ds_i = w + p/q` means user `i` gets `w` grants in most
/// subcycles and one extra in `p` of every `q` subcycles; the extras land at
/// the subcycle indices listed here (1-based, repeating with period `q`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubcyclePattern {
    #[serde(serialize_with = "biguint_as_string")]
    pub period: BigUint,
    /// 1-based subcycle indices within one period that carry an extra
    /// grant; `None` when the period exceeds the enumeration limit.
    pub extra_at: Option<Vec<u64>>,
}

/// Extra-grant schedule for one share ratio, or `None` when the ratio is an
/// integer and every subcycle looks the same.
pub fn subcycle_pattern(ratio: &Rational, enumerate_limit: u64) -> Option<SubcyclePattern> {
    debug_assert!(!ratio.is_negative(), "share ratios are positive");
    let frac = ratio.fract();
    if frac.is_zero() {
        return None;
    }
    let period = frac.denom().to_biguint().expect("positive denominator");
    let extra_at = match (frac.numer().to_u128(), frac.denom().to_u128()) {
        (Some(p), Some(q)) if q <= enumerate_limit as u128 => Some(
            // The j-th extra lands in the first subcycle k with k*p/q >= j.
            (1..=p)
                .map(|j| ((j * q).div_ceil(p)) as u64)
                .collect(),
        ),
        _ => None,
    };
    Some(SubcyclePattern { period, extra_at })
}

/// One executed layer of the recursive decomposition: the cycle that the
/// listed users repeat until its step factor drops below 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecompositionLayer {
    pub active: Vec<UserId>,
    /// Step factor of this layer against the capacity left for it.
    pub cycle_factor: Rational,
    /// Whole repetitions executed: `floor(cycle_factor)`.
    pub iterations: u64,
    /// Grants per repetition, per user.
    pub counts: BTreeMap<UserId, u64>,
    /// The idealized `floor(ds_max / ds_i)` occurrence counts, kept beside
    /// `counts` because the two disagree whenever fractional ratio parts
    /// force the capacity-weighted schedule to hold grants back.
    pub basic_counts: BTreeMap<UserId, u64>,
    /// Total amounts consumed by this layer.
    pub consumed: ResourceVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleDecomposition {
    pub layers: Vec<DecompositionLayer>,
    /// Capacity no layer could use.
    pub residual: ResourceVector,
}

/// Experimental: peels progressive filling into nested cycle layers.
///
/// Each layer runs the current active set's cycle as often as capacity
/// allows, then removes the largest-share users and descends into the
/// residual. The search stops when two consecutive active sets both fail to
/// fit even one repetition, or when no user remains feasible. Weighted
/// scenarios are rejected: a residual-relative share has no agreed weighted
/// form.
pub fn decompose_higher_order(scenario: &Scenario) -> Result<CycleDecomposition, Error> {
    scenario.ensure_valid(WeightMode::Free)?;
    if scenario.has_weights() {
        return Err(Error::WeightsUnsupported("higher-order decomposition"));
    }

    let m = scenario.n_resources();
    let order = scenario.ranked_user_indices();
    let mut residual: Vec<u64> = scenario.resources.to_vec();
    let mut active: Vec<usize> = order.clone();
    let mut layers = Vec::new();
    let mut starved_once = false;

    loop {
        // A user with positive demand on an empty resource can never take
        // another whole task; shares against the residual are undefined.
        active.retain(|&idx| {
            scenario.users[idx]
                .demand
                .iter()
                .zip(&residual)
                .all(|(&d, &r)| d == 0 || r > 0)
        });
        if active.is_empty() {
            break;
        }

        let residual_caps = ResourceVector::new(residual.clone());
        let mut shares = Vec::with_capacity(active.len());
        for &idx in &active {
            let ds = dominant_share(&scenario.users[idx].demand, &residual_caps, None)?;
            shares.push(ds.share);
        }
        let max_share = shares.iter().max().expect("nonempty active set").clone();
        let ratios: Vec<Rational> = shares.iter().map(|s| &max_share / s).collect();

        let mut factor: Option<Rational> = None;
        for (r, &cap_left) in residual.iter().enumerate() {
            let column: Rational = active
                .iter()
                .zip(&ratios)
                .map(|(&idx, q)| q * Rational::from_integer(scenario.users[idx].demand[r]))
                .sum();
            if !column.is_positive() {
                continue;
            }
            let bound = Rational::from_integer(cap_left) / column;
            factor = Some(match factor {
                None => bound,
                Some(best) => best.min(bound),
            });
        }
        let factor = factor.expect("active users have positive demands");

        if factor < Rational::one() {
            if starved_once {
                break;
            }
            starved_once = true;
        } else {
            starved_once = false;
            let iterations = factor.floor_u64().expect("factor >= 1 fits u64");

            // One repetition serves every top-share user once; the leftover
            // slots of the idealized cycle spread over the rest in
            // proportion to their ratios.
            let star_count = shares.iter().filter(|s| **s == max_share).count() as u64;
            let slot_total: u64 = ratios
                .iter()
                .map(|q| q.floor_u64().expect("ratio >= 1"))
                .sum();
            let open_slots = slot_total - star_count;
            let ratio_mass: Rational = shares
                .iter()
                .zip(&ratios)
                .filter(|(s, _)| **s != max_share)
                .map(|(_, q)| q.clone())
                .sum();

            let mut counts = BTreeMap::new();
            let mut basic_counts = BTreeMap::new();
            let mut per_iteration = vec![0u64; m];
            for ((&idx, share), ratio) in active.iter().zip(&shares).zip(&ratios) {
                let id = scenario.users[idx].id.clone();
                let count = if *share == max_share {
                    1
                } else {
                    (Rational::from_integer(open_slots) * ratio / &ratio_mass)
                        .floor_u64()
                        .expect("bounded by ratio")
                };
                for (acc, &d) in per_iteration.iter_mut().zip(scenario.users[idx].demand.iter()) {
                    *acc += count * d;
                }
                basic_counts.insert(id.clone(), ratio.floor_u64().expect("ratio >= 1"));
                counts.insert(id, count);
            }

            let mut consumed = vec![0u64; m];
            for (c, &per) in consumed.iter_mut().zip(&per_iteration) {
                *c = per * iterations;
            }
            for (r, &used) in residual.iter_mut().zip(&consumed) {
                debug_assert!(used <= *r, "layer consumption bounded by residual");
                *r -= used;
            }
            layers.push(DecompositionLayer {
                active: active
                    .iter()
                    .map(|&idx| scenario.users[idx].id.clone())
                    .collect(),
                cycle_factor: factor,
                iterations,
                counts,
                basic_counts,
                consumed: ResourceVector::new(consumed),
            });
        }

        // Peel the top share group and descend.
        let keep: Vec<usize> = active
            .iter()
            .zip(&shares)
            .filter(|(_, s)| **s != max_share)
            .map(|(&idx, _)| idx)
            .collect();
        active = keep;
    }

    Ok(CycleDecomposition {
        layers,
        residual: ResourceVector::new(residual),
    })
}
