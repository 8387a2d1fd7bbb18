//! Closed-form integral allocation by cycle precomputation.
//!
//! Instead of filling task by task, this allocator prices one idealized
//! cycle (every user `i` appearing `ds_max / ds_i` times), finds how many
//! cycles fit into capacity, and floors per user:
//!
//! `factor = min_r cap_r / sum_i (ds_max / ds_i) * d_ir`, then user `i`
//! gets `floor(factor * ds_max / ds_i)` tasks.
//!
//! A single ascending sweep afterwards (`finishing_pass`) tops up users
//! whose next task still fits. With normalized per-user weights the same
//! formulas run on weighted shares. The whole computation touches each of
//! the `n * m` demand entries a constant number of times.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Error;
use crate::rational::Rational;
use crate::scenario::{dominant_share, Allocation, Scenario, UserId, WeightMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PdrfResult {
    /// How many idealized cycles fit: the `k` of the construction.
    pub cycle_factor: Rational,
    /// Precomputed whole-task counts: `floor(cycle_factor * ds_max / ds_i)`.
    pub multipliers: BTreeMap<UserId, u64>,
    pub allocation: Allocation,
}

/// Arithmetic work performed by one precomputation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub divisions: u64,
    pub multiplications: u64,
    pub additions: u64,
    pub comparisons: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.divisions + self.multiplications + self.additions + self.comparisons
    }
}

fn weight_mode(scenario: &Scenario) -> WeightMode {
    if scenario.has_weights() {
        WeightMode::Normalized
    } else {
        WeightMode::Free
    }
}

/// Per-user dominant shares in id order, plus their maximum.
fn ranked_shares(scenario: &Scenario, ops: &mut OpCount) -> Result<(Vec<usize>, Vec<Rational>, Rational), Error> {
    let order = scenario.ranked_user_indices();
    let m = scenario.n_resources() as u64;
    let mut shares = Vec::with_capacity(order.len());
    for &idx in &order {
        let user = &scenario.users[idx];
        let ds = dominant_share(&user.demand, &scenario.resources, user.weight.as_ref())?;
        // One division per entry (two when weighted) and a linear max scan.
        ops.divisions += if user.weight.is_some() { 2 * m } else { m };
        ops.comparisons += m.saturating_sub(1);
        shares.push(ds.share);
    }
    let max_share = shares.iter().max().expect("validated nonempty").clone();
    ops.comparisons += shares.len() as u64 - 1;
    Ok((order, shares, max_share))
}

/// The cycle step factor `k`: capacity of the tightest resource divided by
/// one idealized cycle's consumption of it.
pub fn cycle_factor(scenario: &Scenario) -> Result<Rational, Error> {
    scenario.ensure_valid(weight_mode(scenario))?;
    let mut ops = OpCount::default();
    let (order, shares, max_share) = ranked_shares(scenario, &mut ops)?;
    Ok(factor_from_shares(scenario, &order, &shares, &max_share, &mut ops))
}

fn factor_from_shares(
    scenario: &Scenario,
    order: &[usize],
    shares: &[Rational],
    max_share: &Rational,
    ops: &mut OpCount,
) -> Rational {
    let n = order.len() as u64;
    let ratios: Vec<Rational> = shares.iter().map(|s| max_share / s).collect();
    ops.divisions += n;

    let mut factor: Option<Rational> = None;
    for (r, &cap) in scenario.resources.iter().enumerate() {
        let mut column = Rational::zero();
        for (&idx, ratio) in order.iter().zip(&ratios) {
            let d = scenario.users[idx].demand[r];
            if d == 0 {
                continue;
            }
            column += &(ratio * Rational::from_integer(d));
        }
        ops.multiplications += n;
        ops.additions += n.saturating_sub(1);
        if !column.is_positive() {
            continue;
        }
        let bound = Rational::from_integer(cap) / column;
        ops.divisions += 1;
        factor = Some(match factor {
            None => bound,
            Some(best) => {
                ops.comparisons += 1;
                best.min(bound)
            }
        });
    }
    factor.expect("validated scenario has a positive demand column")
}

/// Simplified factor `k' = min_r cap_r / sum_i d_ir / ds_i`, which absorbs
/// the constant `ds_max`: `k = k' / ds_max` exactly.
pub fn cycle_factor_simplified(scenario: &Scenario) -> Result<Rational, Error> {
    scenario.ensure_valid(weight_mode(scenario))?;
    let mut ops = OpCount::default();
    let (order, shares, _) = ranked_shares(scenario, &mut ops)?;

    let mut factor: Option<Rational> = None;
    for (r, &cap) in scenario.resources.iter().enumerate() {
        let mut column = Rational::zero();
        for (&idx, share) in order.iter().zip(&shares) {
            let d = scenario.users[idx].demand[r];
            if d == 0 {
                continue;
            }
            column += &(Rational::from_integer(d) / share);
        }
        if !column.is_positive() {
            continue;
        }
        let bound = Rational::from_integer(cap) / column;
        factor = Some(match factor {
            None => bound,
            Some(best) => best.min(bound),
        });
    }
    Ok(factor.expect("validated scenario has a positive demand column"))
}

pub fn allocate(scenario: &Scenario) -> Result<PdrfResult, Error> {
    allocate_counted(scenario).map(|(result, _)| result)
}

/// Runs the precomputation and reports the arithmetic operations it spent.
/// The count grows as `n * m` with small constants; there is no per-task
/// loop anywhere.
pub fn allocate_counted(scenario: &Scenario) -> Result<(PdrfResult, OpCount), Error> {
    scenario.ensure_valid(weight_mode(scenario))?;
    let mut ops = OpCount::default();
    let (order, shares, max_share) = ranked_shares(scenario, &mut ops)?;
    let factor = factor_from_shares(scenario, &order, &shares, &max_share, &mut ops);

    let n = order.len() as u64;
    let m = scenario.n_resources() as u64;
    let mut multipliers = BTreeMap::new();
    let mut tasks = BTreeMap::new();
    for (&idx, share) in order.iter().zip(&shares) {
        let count = (&factor * &(&max_share / share))
            .floor_u64()
            .expect("factor and ratios are nonnegative");
        let id = scenario.users[idx].id.clone();
        multipliers.insert(id.clone(), count);
        tasks.insert(id, count);
    }
    // Per user: one ratio product, then one scaling per resource entry.
    ops.multiplications += n + n * m;

    let allocation = Allocation::from_tasks(scenario, tasks);
    Ok((
        PdrfResult {
            cycle_factor: factor,
            multipliers,
            allocation,
        },
        ops,
    ))
}

/// One ascending sweep over users by allocated share (ties to the larger
/// per-task share, then to the smaller id), granting a single extra task
/// wherever one still fits. Returns the topped-up allocation.
pub fn finishing_pass(scenario: &Scenario, result: &PdrfResult) -> Result<Allocation, Error> {
    scenario.ensure_valid(weight_mode(scenario))?;
    let order = scenario.ranked_user_indices();
    let matches = order.len() == result.allocation.tasks.len()
        && order
            .iter()
            .all(|&idx| result.allocation.tasks.contains_key(&scenario.users[idx].id));
    if !matches {
        return Err(Error::UserSetMismatch);
    }

    let mut entries = Vec::with_capacity(order.len());
    for &idx in &order {
        let user = &scenario.users[idx];
        let per_task = dominant_share(&user.demand, &scenario.resources, user.weight.as_ref())?;
        let count = result.allocation.tasks[&user.id];
        let allocated = Rational::from_integer(count) * &per_task.share;
        entries.push((allocated, per_task.share, idx));
    }
    entries.sort_by(|(alloc_a, per_a, ia), (alloc_b, per_b, ib)| {
        alloc_a
            .cmp(alloc_b)
            .then_with(|| per_b.cmp(per_a))
            .then_with(|| scenario.users[*ia].id.cmp(&scenario.users[*ib].id))
    });

    let mut residual: Vec<u64> = result.allocation.residual.to_vec();
    let mut tasks = result.allocation.tasks.clone();
    for (_, _, idx) in &entries {
        let user = &scenario.users[*idx];
        if user.demand.fits(&residual) {
            for (r, &d) in residual.iter_mut().zip(user.demand.iter()) {
                *r -= d;
            }
            *tasks.get_mut(&user.id).expect("checked membership") += 1;
        }
    }
    Ok(Allocation::from_tasks(scenario, tasks))
}

/// Float-mode counterpart of `cycle_factor`, for measuring how far plain
/// `f64` arithmetic drifts from the exact result. Unweighted only.
pub fn cycle_factor_f64(scenario: &Scenario) -> Result<f64, Error> {
    float_factors(scenario).map(|(k, _)| k)
}

/// Float-mode counterpart of `cycle_factor_simplified`.
pub fn cycle_factor_simplified_f64(scenario: &Scenario) -> Result<f64, Error> {
    float_factors(scenario).map(|(k, ds_max)| k * ds_max)
}

/// Float-mode task counts: `floor` applied to `f64` products, so results
/// may differ from the exact allocator near integer boundaries.
pub fn multipliers_f64(scenario: &Scenario) -> Result<BTreeMap<UserId, u64>, Error> {
    scenario.ensure_valid(WeightMode::Free)?;
    if scenario.has_weights() {
        return Err(Error::WeightsUnsupported("float-mode precomputation"));
    }
    let (k, ds_max) = float_factors(scenario)?;
    let mut out = BTreeMap::new();
    for user in &scenario.users {
        let ds = float_share(scenario, user);
        out.insert(user.id.clone(), (k * (ds_max / ds)).floor() as u64);
    }
    Ok(out)
}

fn float_share(scenario: &Scenario, user: &crate::scenario::UserDemand) -> f64 {
    user.demand
        .iter()
        .zip(scenario.resources.iter())
        .map(|(&d, &cap)| d as f64 / cap as f64)
        .fold(f64::MIN, f64::max)
}

fn float_factors(scenario: &Scenario) -> Result<(f64, f64), Error> {
    scenario.ensure_valid(WeightMode::Free)?;
    if scenario.has_weights() {
        return Err(Error::WeightsUnsupported("float-mode precomputation"));
    }
    let shares: Vec<f64> = scenario
        .users
        .iter()
        .map(|u| float_share(scenario, u))
        .collect();
    let ds_max = shares.iter().copied().fold(f64::MIN, f64::max);
    let mut factor = f64::INFINITY;
    for (r, &cap) in scenario.resources.iter().enumerate() {
        let column: f64 = scenario
            .users
            .iter()
            .zip(&shares)
            .map(|(u, &ds)| (ds_max / ds) * u.demand[r] as f64)
            .sum();
        if column > 0.0 {
            factor = factor.min(cap as f64 / column);
        }
    }
    Ok((factor, ds_max))
}
