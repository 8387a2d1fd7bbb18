//! Scenario model: capacities, per-task demands, optional weights, and the
//! dominant-share computation every allocator builds on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ValidationIssue};
use crate::rational::Rational;

/// Stable user identifier. Ordering ties in the allocators resolve by
/// ascending id, so the `Ord` on this type is load bearing.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        UserId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for UserId {
    fn from(s: &str) -> Self {
        UserId::new(s)
    }
}

impl From<String> for UserId {
    fn from(s: String) -> Self {
        UserId(s)
    }
}

/// Total capacity of each resource, indexed by resource position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(Vec<u64>);

impl ResourceVector {
    pub fn new(capacities: Vec<u64>) -> Self {
        ResourceVector(capacities)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

impl Deref for ResourceVector {
    type Target = [u64];
    fn deref(&self) -> &[u64] {
        &self.0
    }
}

impl From<Vec<u64>> for ResourceVector {
    fn from(v: Vec<u64>) -> Self {
        ResourceVector(v)
    }
}

/// Per-task demand of one user, one entry per resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<u64>);

impl DemandVector {
    pub fn new(demands: Vec<u64>) -> Self {
        DemandVector(demands)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }

    /// One more task of this demand fits within `residual`.
    pub(crate) fn fits(&self, residual: &[u64]) -> bool {
        self.0.iter().zip(residual).all(|(&d, &r)| d <= r)
    }
}

impl Deref for DemandVector {
    type Target = [u64];
    fn deref(&self) -> &[u64] {
        &self.0
    }
}

impl From<Vec<u64>> for DemandVector {
    fn from(v: Vec<u64>) -> Self {
        DemandVector(v)
    }
}

/// Per-resource weights for one user. Entries must be positive; under
/// `WeightMode::Normalized` the per-resource sums across users must be 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<Rational>);

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Self {
        WeightVector(weights)
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }
}

impl Deref for WeightVector {
    type Target = [Rational];
    fn deref(&self) -> &[Rational] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserDemand {
    pub id: UserId,
    pub demand: DemandVector,
    pub weight: Option<WeightVector>,
}

impl UserDemand {
    pub fn new(id: impl Into<UserId>, demand: Vec<u64>) -> Self {
        UserDemand {
            id: id.into(),
            demand: DemandVector::new(demand),
            weight: None,
        }
    }

    pub fn with_weight(mut self, weight: Vec<Rational>) -> Self {
        self.weight = Some(WeightVector::new(weight));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub resources: ResourceVector,
    pub users: Vec<UserDemand>,
}

/// How validation treats weights.
///
/// `Free` accepts any positive weights (and users without any). `Normalized`
/// additionally requires every user to carry weights summing to 1 per
/// resource, the precondition of weighted cycle precomputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Free,
    Normalized,
}

impl Scenario {
    pub fn new(resources: Vec<u64>, users: Vec<UserDemand>) -> Self {
        Scenario {
            resources: ResourceVector::new(resources),
            users,
        }
    }

    pub fn n_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn has_weights(&self) -> bool {
        self.users.iter().any(|u| u.weight.is_some())
    }

    pub fn validate(&self, mode: WeightMode) -> Vec<ValidationIssue> {
        validate_scenario(self, mode)
    }

    pub fn ensure_valid(&self, mode: WeightMode) -> Result<(), Error> {
        let issues = self.validate(mode);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(issues))
        }
    }

    /// User indices ordered by ascending id; allocator tie-breaks and all
    /// keyed outputs follow this order.
    pub(crate) fn ranked_user_indices(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        order.sort_by(|&a, &b| self.users[a].id.cmp(&self.users[b].id));
        order
    }
}

/// Demand as a fraction of each capacity: `d_r / cap_r` per resource.
pub fn fractional_demands(
    demand: &DemandVector,
    capacities: &ResourceVector,
) -> Result<Vec<Rational>, Error> {
    if demand.len() != capacities.len() {
        return Err(Error::LengthMismatch {
            expected: capacities.len(),
            got: demand.len(),
        });
    }
    if demand.is_all_zero() {
        return Err(Error::AllZeroDemand);
    }
    demand
        .iter()
        .zip(capacities.iter())
        .enumerate()
        .map(|(r, (&d, &cap))| {
            if d == 0 {
                Ok(Rational::zero())
            } else if cap == 0 {
                Err(Error::ZeroCapacity { resource: r })
            } else {
                Ok(Rational::new(d, cap))
            }
        })
        .collect()
}

/// Largest fractional demand and the resource attaining it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominantShare {
    pub share: Rational,
    pub resource: usize,
}

/// Dominant share of one task: the maximum fractional demand, divided
/// entrywise by the weight when one is given. Ties go to the lowest
/// resource index.
pub fn dominant_share(
    demand: &DemandVector,
    capacities: &ResourceVector,
    weight: Option<&WeightVector>,
) -> Result<DominantShare, Error> {
    let fractions = fractional_demands(demand, capacities)?;
    let weighted = match weight {
        None => fractions,
        Some(w) => {
            if w.len() != fractions.len() {
                return Err(Error::LengthMismatch {
                    expected: fractions.len(),
                    got: w.len(),
                });
            }
            fractions
                .into_iter()
                .zip(w.iter())
                .enumerate()
                .map(|(r, (f, w_r))| {
                    if !w_r.is_positive() {
                        Err(Error::NonPositiveWeight { resource: r })
                    } else {
                        Ok(f / w_r)
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let mut best = DominantShare {
        share: weighted[0].clone(),
        resource: 0,
    };
    for (r, f) in weighted.into_iter().enumerate().skip(1) {
        if f > best.share {
            best = DominantShare { share: f, resource: r };
        }
    }
    Ok(best)
}

/// Checks every structural invariant of a scenario and returns all
/// violations found.
pub fn validate_scenario(scenario: &Scenario, mode: WeightMode) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let m = scenario.n_resources();
    if m == 0 {
        issues.push(ValidationIssue::NoResources);
    }
    if scenario.users.is_empty() {
        issues.push(ValidationIssue::NoUsers);
    }

    let mut seen = BTreeSet::new();
    for user in &scenario.users {
        if !seen.insert(&user.id) {
            issues.push(ValidationIssue::DuplicateId(user.id.clone()));
        }
    }

    let mut weights_usable = true;
    for user in &scenario.users {
        if user.demand.len() != m {
            issues.push(ValidationIssue::DemandLengthMismatch {
                user: user.id.clone(),
                expected: m,
                got: user.demand.len(),
            });
        } else {
            if user.demand.is_all_zero() {
                issues.push(ValidationIssue::AllZeroDemand {
                    user: user.id.clone(),
                });
            }
            for (r, (&d, &cap)) in user.demand.iter().zip(scenario.resources.iter()).enumerate() {
                if d > 0 && cap == 0 {
                    issues.push(ValidationIssue::InfeasibleDemand {
                        user: user.id.clone(),
                        resource: r,
                    });
                }
            }
        }
        match &user.weight {
            None => {
                if mode == WeightMode::Normalized {
                    issues.push(ValidationIssue::MissingWeight {
                        user: user.id.clone(),
                    });
                    weights_usable = false;
                }
            }
            Some(w) => {
                if w.len() != m {
                    issues.push(ValidationIssue::WeightLengthMismatch {
                        user: user.id.clone(),
                        expected: m,
                        got: w.len(),
                    });
                    weights_usable = false;
                } else {
                    for (r, w_r) in w.iter().enumerate() {
                        if !w_r.is_positive() {
                            issues.push(ValidationIssue::NonPositiveWeight {
                                user: user.id.clone(),
                                resource: r,
                            });
                        }
                    }
                }
            }
        }
    }

    // Per-resource weight sums are only meaningful once every user carries a
    // full-length weight vector.
    if mode == WeightMode::Normalized && weights_usable && !scenario.users.is_empty() {
        for r in 0..m {
            let sum: Rational = scenario
                .users
                .iter()
                .map(|u| &u.weight.as_ref().expect("checked above")[r])
                .sum();
            if sum != Rational::one() {
                issues.push(ValidationIssue::UnnormalizedWeights { resource: r, sum });
            }
        }
    }

    issues
}

/// Outcome of an integral allocator: whole tasks per user plus the exact
/// resource bookkeeping they imply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Allocation {
    pub tasks: BTreeMap<UserId, u64>,
    pub per_user_amounts: BTreeMap<UserId, ResourceVector>,
    pub consumed: ResourceVector,
    pub residual: ResourceVector,
}

impl Allocation {
    /// Derives amounts, consumption, and residual from task counts. Callers
    /// guarantee the counts are capacity feasible.
    pub(crate) fn from_tasks(scenario: &Scenario, tasks: BTreeMap<UserId, u64>) -> Allocation {
        let m = scenario.n_resources();
        let mut consumed = vec![0u64; m];
        let mut per_user_amounts = BTreeMap::new();
        for user in &scenario.users {
            let count = tasks.get(&user.id).copied().unwrap_or(0);
            let amounts: Vec<u64> = user.demand.iter().map(|&d| d * count).collect();
            for (c, &a) in consumed.iter_mut().zip(&amounts) {
                *c += a;
            }
            per_user_amounts.insert(user.id.clone(), ResourceVector::new(amounts));
        }
        let residual: Vec<u64> = scenario
            .resources
            .iter()
            .zip(&consumed)
            .map(|(&cap, &c)| {
                debug_assert!(c <= cap, "allocation exceeds capacity");
                cap - c
            })
            .collect();
        Allocation {
            tasks,
            per_user_amounts,
            consumed: ResourceVector::new(consumed),
            residual: ResourceVector::new(residual),
        }
    }

    pub fn total_tasks(&self) -> u64 {
        self.tasks.values().sum()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    resources: Vec<u64>,
    users: Vec<UserFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UserFile {
    id: String,
    demand: Vec<u64>,
    #[serde(default)]
    weight: Option<Vec<String>>,
}

/// Parses the scenario interchange format:
///
/// ```json
/// {
///   "resources": [9, 18],
///   "users": [
///     {"id": "A", "demand": [1, 4]},
///     {"id": "B", "demand": [3, 1], "weight": ["1/2", "1/2"]}
///   ]
/// }
/// ```
///
/// Unknown fields are rejected. Weights are exact fraction strings. The
/// result is structurally parsed only; run `ensure_valid` before allocating.
pub fn scenario_from_json(text: &str) -> Result<Scenario, Error> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let users = file
        .users
        .into_iter()
        .map(|u| {
            let weight = match u.weight {
                None => None,
                Some(entries) => {
                    let parsed = entries
                        .iter()
                        .map(|s| {
                            Rational::from_str(s).map_err(|e| {
                                Error::Parse(format!("user {}: weight {:?}: {}", u.id, s, e))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(WeightVector::new(parsed))
                }
            };
            Ok(UserDemand {
                id: UserId::new(u.id),
                demand: DemandVector::new(u.demand),
                weight,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Scenario {
        resources: ResourceVector::new(file.resources),
        users,
    })
}
