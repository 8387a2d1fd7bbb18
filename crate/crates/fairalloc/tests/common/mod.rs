//! Shared helpers for the integration suites.
//!
//! `fill_progressively` is an independent reference for the heap-based
//! allocator: a straight linear scan over plain integers. Share comparisons
//! are done by u128 cross multiplication, so none of the library's rational
//! arithmetic is on the path being checked.

use fairalloc::{Scenario, UserDemand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub struct OracleUser {
    pub id: String,
    pub tasks: u64,
}

pub struct OracleRun {
    pub users: Vec<OracleUser>,
    pub picks: Vec<String>,
    pub blocked: bool,
}

struct Candidate {
    demands: Vec<u64>,
    // dominant share of one task, as an integer pair num/den
    num: u64,
    den: u64,
    tasks: u64,
    active: bool,
}

// allocated share of a vs b: a.tasks*a.num/a.den <=> b.tasks*b.num/b.den
fn allocated_less(a: &Candidate, b: &Candidate) -> bool {
    (a.tasks as u128) * (a.num as u128) * (b.den as u128)
        < (b.tasks as u128) * (b.num as u128) * (a.den as u128)
}

fn allocated_equal(a: &Candidate, b: &Candidate) -> bool {
    (a.tasks as u128) * (a.num as u128) * (b.den as u128)
        == (b.tasks as u128) * (b.num as u128) * (a.den as u128)
}

fn per_task_greater(a: &Candidate, b: &Candidate) -> bool {
    (a.num as u128) * (b.den as u128) > (b.num as u128) * (a.den as u128)
}

/// Progressive filling by exhaustive scan. Users are considered in id order,
/// the next grant goes to the active user with the smallest allocated
/// dominant share, ties to the larger per-task share, then the smaller id.
/// A grant that does not fit either halts the run (`remove_on_block` false)
/// or permanently deactivates that user.
pub fn fill_progressively(
    capacities: &[u64],
    users: &[(String, Vec<u64>)],
    remove_on_block: bool,
) -> OracleRun {
    let mut ordered: Vec<&(String, Vec<u64>)> = users.iter().collect();
    ordered.sort_by(|a, b| a.0.cmp(&b.0));

    let mut cands: Vec<Candidate> = ordered
        .iter()
        .map(|(_, d)| {
            // dominant resource: max_r d[r]/cap[r], first index on ties
            let mut num = d[0];
            let mut den = capacities[0];
            for r in 1..d.len() {
                if (d[r] as u128) * (den as u128) > (num as u128) * (capacities[r] as u128) {
                    num = d[r];
                    den = capacities[r];
                }
            }
            assert!(num > 0, "oracle requires a nonzero demand row");
            assert!(den > 0, "oracle requires nonzero capacities");
            Candidate {
                demands: d.clone(),
                num,
                den,
                tasks: 0,
                active: true,
            }
        })
        .collect();

    let mut remaining = capacities.to_vec();
    let mut picks = Vec::new();
    let mut blocked = false;

    loop {
        let mut best: Option<usize> = None;
        for (i, c) in cands.iter().enumerate() {
            if !c.active {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(j) => {
                    let b = &cands[j];
                    if allocated_less(c, b) || (allocated_equal(c, b) && per_task_greater(c, b)) {
                        best = Some(i);
                    }
                }
            }
        }
        let Some(i) = best else { break };
        let fits = cands[i]
            .demands
            .iter()
            .zip(remaining.iter())
            .all(|(d, r)| d <= r);
        if !fits {
            if remove_on_block {
                cands[i].active = false;
                continue;
            }
            blocked = true;
            break;
        }
        for (d, r) in cands[i].demands.iter().zip(remaining.iter_mut()) {
            *r -= d;
        }
        cands[i].tasks += 1;
        picks.push(ordered[i].0.clone());
    }

    OracleRun {
        users: ordered
            .iter()
            .zip(cands.iter())
            .map(|((id, _), c)| OracleUser {
                id: id.clone(),
                tasks: c.tasks,
            })
            .collect(),
        picks,
        blocked,
    }
}

/// Small random scenarios for the property suites: up to 6 users, up to 4
/// resources, demand entries up to 9 (no all-zero rows), capacities up to 60.
pub fn small_scenarios(seed: u64, count: usize) -> Vec<Scenario> {
    let mut out = Vec::with_capacity(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let n_users = rng.random_range(1..=6usize);
        let n_res = rng.random_range(1..=4usize);
        let caps: Vec<u64> = (0..n_res).map(|_| rng.random_range(1..=60)).collect();
        let mut users = Vec::with_capacity(n_users);
        for u in 0..n_users {
            let mut row: Vec<u64>;
            loop {
                row = (0..n_res).map(|_| rng.random_range(0..=9)).collect();
                if row.iter().any(|&d| d > 0) {
                    break;
                }
            }
            users.push(UserDemand::new(format!("u{u}"), row));
        }
        out.push(Scenario::new(caps, users));
    }
    out
}
