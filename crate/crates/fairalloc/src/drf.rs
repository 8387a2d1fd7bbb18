//! Progressive filling over dominant shares.
//!
//! Each iteration hands one whole task to the active user with the lowest
//! allocated dominant share. Ties go to the user whose single task carries
//! the larger dominant share, then to the smaller user id. Two halt modes
//! exist: the default removes users whose next task no longer fits and keeps
//! filling the rest; the strict mode stops outright the first time the
//! selected user does not fit, leaving capacity on the table.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rational::Rational;
use crate::scenario::{dominant_share, Allocation, Scenario, UserId, WeightMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrfOptions {
    /// Keep allocating to users that still fit after others saturate.
    pub remove_saturated: bool,
    /// Halt on the first non-fitting selection, overriding `remove_saturated`.
    pub strict_halt: bool,
    /// Record every iteration in the returned trace.
    pub collect_trace: bool,
}

impl Default for DrfOptions {
    fn default() -> Self {
        DrfOptions {
            remove_saturated: true,
            strict_halt: false,
            collect_trace: false,
        }
    }
}

impl DrfOptions {
    /// Options that halt on the first blocked selection instead of removing
    /// the saturated user and continuing.
    pub fn strict() -> Self {
        DrfOptions {
            remove_saturated: false,
            strict_halt: true,
            collect_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.collect_trace = true;
        self
    }

    fn removal_enabled(&self) -> bool {
        self.remove_saturated && !self.strict_halt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltReason {
    /// Strict mode: the selected user's next task did not fit.
    ResourceExhausted,
    /// Removal mode: no user's next task fits anymore.
    AllSaturated,
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HaltReason::ResourceExhausted => "resource-exhausted",
            HaltReason::AllSaturated => "all-saturated",
        })
    }
}

/// One granted task: the 1-based iteration, the receiving user, and that
/// user's allocated dominant share after the grant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DrfStep {
    pub iteration: u64,
    pub user: UserId,
    pub share: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DrfTrace {
    pub steps: Vec<DrfStep>,
    pub halt_reason: HaltReason,
}

impl DrfTrace {
    /// Tab-separated export: one `iteration<TAB>user<TAB>share` line per
    /// step, then a final `halt<TAB>reason` line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&format!("{}\t{}\t{}\n", step.iteration, step.user, step.share));
        }
        out.push_str(&format!("halt\t{}\n", self.halt_reason));
        out
    }
}

/// Heap entry ordered so that the maximum element is the next user to serve:
/// lowest allocated share first, then larger per-task share, then smaller
/// rank (rank is the position in id order).
#[derive(PartialEq, Eq)]
struct Candidate {
    allocated: Rational,
    per_task: Rational,
    rank: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .allocated
            .cmp(&self.allocated)
            .then_with(|| self.per_task.cmp(&other.per_task))
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs progressive filling to completion and reports the integral
/// allocation together with the iteration trace.
pub fn allocate(scenario: &Scenario, options: &DrfOptions) -> Result<(Allocation, DrfTrace), Error> {
    scenario.ensure_valid(WeightMode::Free)?;

    let order = scenario.ranked_user_indices();
    let n = order.len();
    let mut heap = BinaryHeap::with_capacity(n);
    for (rank, &idx) in order.iter().enumerate() {
        let user = &scenario.users[idx];
        let per_task = dominant_share(&user.demand, &scenario.resources, user.weight.as_ref())?;
        heap.push(Candidate {
            allocated: Rational::zero(),
            per_task: per_task.share,
            rank,
        });
    }

    let mut residual: Vec<u64> = scenario.resources.to_vec();
    let mut tasks_by_rank = vec![0u64; n];
    let mut steps = Vec::new();
    let mut iteration = 0u64;

    let halt_reason = loop {
        let Some(top) = heap.pop() else {
            break HaltReason::AllSaturated;
        };
        let user = &scenario.users[order[top.rank]];
        if user.demand.fits(&residual) {
            iteration += 1;
            for (r, &d) in residual.iter_mut().zip(user.demand.iter()) {
                *r -= d;
            }
            tasks_by_rank[top.rank] += 1;
            let allocated = &top.allocated + &top.per_task;
            if options.collect_trace {
                steps.push(DrfStep {
                    iteration,
                    user: user.id.clone(),
                    share: allocated.clone(),
                });
            }
            heap.push(Candidate { allocated, ..top });
        } else if options.removal_enabled() {
            // Saturated for good: capacity only shrinks, so drop the entry.
        } else {
            break HaltReason::ResourceExhausted;
        }
    };

    let tasks: BTreeMap<UserId, u64> = order
        .iter()
        .enumerate()
        .map(|(rank, &idx)| (scenario.users[idx].id.clone(), tasks_by_rank[rank]))
        .collect();
    Ok((
        Allocation::from_tasks(scenario, tasks),
        DrfTrace { steps, halt_reason },
    ))
}

/// Expected iteration count of progressive filling under uniform demands:
/// the tightest `capacity / mean demand` over all resources. The heap cost
/// per iteration (a `log n` factor) is reported by callers separately.
pub fn predicted_iterations(scenario: &Scenario) -> Result<Rational, Error> {
    scenario.ensure_valid(WeightMode::Free)?;
    let n = scenario.n_users() as u64;
    let mut best: Option<Rational> = None;
    for (r, &cap) in scenario.resources.iter().enumerate() {
        let total: u128 = scenario.users.iter().map(|u| u.demand[r] as u128).sum();
        if total == 0 {
            continue;
        }
        // cap / (total / n) = cap * n / total
        let bound = Rational::new(
            num_bigint::BigInt::from(cap) * num_bigint::BigInt::from(n),
            num_bigint::BigInt::from(total),
        );
        best = Some(match best {
            None => bound,
            Some(b) => b.min(bound),
        });
    }
    // Validation guarantees at least one positive demand column.
    Ok(best.expect("at least one resource with positive total demand"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::UserDemand;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn canonical() -> Scenario {
        Scenario::new(
            vec![9, 18],
            vec![UserDemand::new("A", vec![1, 4]), UserDemand::new("B", vec![3, 1])],
        )
    }

    fn pareto_gap() -> Scenario {
        Scenario::new(
            vec![59, 19],
            vec![UserDemand::new("A", vec![1, 4]), UserDemand::new("B", vec![3, 1])],
        )
    }

    fn tasks(alloc: &Allocation, id: &str) -> u64 {
        alloc.tasks[&UserId::new(id)]
    }

    #[test]
    fn canonical_two_user_run() {
        let (alloc, trace) = allocate(&canonical(), &DrfOptions::default().with_trace()).unwrap();
        assert_eq!(tasks(&alloc, "A"), 3);
        assert_eq!(tasks(&alloc, "B"), 2);
        assert_eq!(alloc.consumed.as_slice(), &[9, 14]);
        assert_eq!(alloc.residual.as_slice(), &[0, 4]);

        // B first (larger per-task share), then shares leapfrog.
        let picked: Vec<&str> = trace.steps.iter().map(|s| s.user.as_str()).collect();
        assert_eq!(picked, ["B", "A", "A", "B", "A"]);
        let shares: Vec<Rational> = trace.steps.iter().map(|s| s.share.clone()).collect();
        assert_eq!(shares, [r(1, 3), r(2, 9), r(4, 9), r(2, 3), r(2, 3)]);
        assert_eq!(trace.halt_reason, HaltReason::AllSaturated);
    }

    #[test]
    fn canonical_run_is_identical_in_strict_mode() {
        // No user saturates early here, so only the halt reason differs.
        let (alloc, trace) = allocate(&canonical(), &DrfOptions::strict().with_trace()).unwrap();
        assert_eq!(tasks(&alloc, "A"), 3);
        assert_eq!(tasks(&alloc, "B"), 2);
        assert_eq!(trace.halt_reason, HaltReason::ResourceExhausted);
        assert_eq!(trace.steps.len(), 5);
    }

    #[test]
    fn strict_mode_strands_capacity() {
        let (alloc, trace) = allocate(&pareto_gap(), &DrfOptions::strict().with_trace()).unwrap();
        assert_eq!(tasks(&alloc, "A"), 2);
        assert_eq!(tasks(&alloc, "B"), 8);
        assert_eq!(alloc.per_user_amounts[&UserId::new("A")].as_slice(), &[2, 8]);
        assert_eq!(alloc.per_user_amounts[&UserId::new("B")].as_slice(), &[24, 8]);
        assert_eq!(alloc.residual.as_slice(), &[33, 3]);
        assert_eq!(trace.steps.len(), 10);
        assert_eq!(trace.halt_reason, HaltReason::ResourceExhausted);
        // The residual still fits three more B tasks; strict mode leaves them.
        assert!(scenario_fits(&pareto_gap(), &alloc, "B"));
    }

    #[test]
    fn removal_mode_keeps_filling() {
        let (alloc, trace) = allocate(&pareto_gap(), &DrfOptions::default()).unwrap();
        assert_eq!(tasks(&alloc, "A"), 2);
        assert_eq!(tasks(&alloc, "B"), 11);
        assert_eq!(alloc.residual.as_slice(), &[24, 0]);
        assert_eq!(trace.halt_reason, HaltReason::AllSaturated);
        // Nothing fits anymore for anyone.
        assert!(!scenario_fits(&pareto_gap(), &alloc, "A"));
        assert!(!scenario_fits(&pareto_gap(), &alloc, "B"));
    }

    fn scenario_fits(scenario: &Scenario, alloc: &Allocation, id: &str) -> bool {
        let user = scenario.users.iter().find(|u| u.id.as_str() == id).unwrap();
        user.demand.fits(&alloc.residual)
    }

    #[test]
    fn trace_export_format() {
        let (_, trace) = allocate(&canonical(), &DrfOptions::default().with_trace()).unwrap();
        let text = trace.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "1\tB\t1/3");
        assert_eq!(lines[4], "5\tA\t2/3");
        assert_eq!(lines[5], "halt\tall-saturated");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn trace_is_off_by_default() {
        let (_, trace) = allocate(&canonical(), &DrfOptions::default()).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.halt_reason, HaltReason::AllSaturated);
    }

    #[test]
    fn weights_scale_per_task_shares() {
        // Equal demands; A's weight on resource 0 is twice B's, so A's
        // weighted share per task is half and A ends with twice the tasks.
        let scenario = Scenario::new(
            vec![12],
            vec![
                UserDemand::new("A", vec![1]).with_weight(vec![r(2, 3)]),
                UserDemand::new("B", vec![1]).with_weight(vec![r(1, 3)]),
            ],
        );
        let (alloc, _) = allocate(&scenario, &DrfOptions::default()).unwrap();
        assert_eq!(tasks(&alloc, "A"), 8);
        assert_eq!(tasks(&alloc, "B"), 4);
    }

    #[test]
    fn rejects_invalid_scenarios() {
        let empty = Scenario::new(vec![9], vec![]);
        assert!(matches!(
            allocate(&empty, &DrfOptions::default()),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn oversized_demand_halts_immediately() {
        let scenario = Scenario::new(
            vec![3, 7],
            vec![UserDemand::new("A", vec![4, 1])],
        );
        let (alloc, trace) = allocate(&scenario, &DrfOptions::strict().with_trace()).unwrap();
        assert_eq!(tasks(&alloc, "A"), 0);
        assert!(trace.steps.is_empty());
        assert_eq!(trace.halt_reason, HaltReason::ResourceExhausted);
    }

    #[test]
    fn predicted_iterations_takes_tightest_resource() {
        // Column means: 2 and 5/2; bounds 9/2 and 36/5; min is 9/2.
        assert_eq!(predicted_iterations(&canonical()).unwrap(), r(9, 2));
    }

    #[test]
    fn identical_runs_are_deterministic() {
        let scenario = Scenario::new(
            vec![40, 40, 40],
            vec![
                UserDemand::new("u0", vec![1, 2, 3]),
                UserDemand::new("u1", vec![3, 2, 1]),
                UserDemand::new("u2", vec![2, 2, 2]),
                UserDemand::new("u3", vec![1, 1, 4]),
            ],
        );
        let opts = DrfOptions::default().with_trace();
        let (a1, t1) = allocate(&scenario, &opts).unwrap();
        let (a2, t2) = allocate(&scenario, &opts).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(t1, t2);
    }

    proptest! {
        #[test]
        fn shares_never_decrease_and_tasks_stay_feasible(
            caps in proptest::collection::vec(1u64..60, 1..4),
            demands in proptest::collection::vec(proptest::collection::vec(0u64..9, 4), 1..6),
        ) {
            let m = caps.len();
            let users: Vec<UserDemand> = demands
                .iter()
                .enumerate()
                .map(|(i, d)| UserDemand::new(format!("u{i}"), d[..m].to_vec()))
                .filter(|u| !u.demand.is_all_zero())
                .collect();
            prop_assume!(!users.is_empty());
            let scenario = Scenario::new(caps, users);
            let (alloc, trace) =
                allocate(&scenario, &DrfOptions::default().with_trace()).unwrap();

            // Residual accounting is exact and nonnegative by construction.
            for (r, (&cap, &used)) in scenario.resources.iter().zip(alloc.consumed.iter()).enumerate() {
                prop_assert!(used <= cap, "resource {r} overcommitted");
            }
            // Per user the traced share is strictly increasing.
            let mut last: BTreeMap<&str, Rational> = BTreeMap::new();
            for step in &trace.steps {
                if let Some(prev) = last.get(step.user.as_str()) {
                    prop_assert!(&step.share > prev);
                }
                last.insert(step.user.as_str(), step.share.clone());
            }
            // Removal mode ends only when nothing fits.
            for user in &scenario.users {
                prop_assert!(!user.demand.fits(&alloc.residual));
            }
        }
    }
}
