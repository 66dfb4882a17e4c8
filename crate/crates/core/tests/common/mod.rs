//! Shared instance builders for the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schedrift::scheduling::SchedulingInstance;
use schedrift::time::Time;

/// Uniform small instance: releases and deliveries in `0..=12`, processing
/// in `1..=6`.
pub fn uniform_instance(n: usize, seed: u64) -> SchedulingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<(i64, i64, i64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0..=12),
                rng.random_range(1..=6),
                rng.random_range(0..=12),
            )
        })
        .collect();
    SchedulingInstance::from_integers(&triples).unwrap()
}

/// Eight jobs with two heavy processing times mixed among six light ones, so
/// that moderate `eps` values actually produce long jobs.
pub fn skewed_instance(seed: u64) -> SchedulingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples: Vec<(i64, i64, i64)> = Vec::new();
    for _ in 0..6 {
        triples.push((
            rng.random_range(0..=30),
            rng.random_range(1..=4),
            rng.random_range(0..=30),
        ));
    }
    for _ in 0..2 {
        triples.push((
            rng.random_range(0..=30),
            rng.random_range(20..=40),
            rng.random_range(0..=30),
        ));
    }
    // Shuffle the heavy jobs into random positions.
    for i in (1..triples.len()).rev() {
        let j = rng.random_range(0..=i);
        triples.swap(i, j);
    }
    SchedulingInstance::from_integers(&triples).unwrap()
}

/// Eight-job acceptance mix rotating three shapes: two heavy jobs among
/// light ones (occasionally one long job at `eps = 1/2`), one dominant job
/// (always long at `eps = 1/2`), and two equal heavies over zero-length
/// fillers (two long jobs at `eps = 1/2`, the count cap).
pub fn mixed_instance(seed: u64) -> SchedulingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(900_000 + seed);
    let mut triples: Vec<(i64, i64, i64)> = Vec::new();
    match seed % 3 {
        0 => return skewed_instance(seed),
        1 => {
            triples.push((
                rng.random_range(0..=10),
                rng.random_range(30..=60),
                rng.random_range(0..=30),
            ));
            for _ in 0..7 {
                triples.push((
                    rng.random_range(0..=30),
                    rng.random_range(1..=3),
                    rng.random_range(0..=30),
                ));
            }
        }
        _ => {
            let heavy = rng.random_range(10..=25);
            for _ in 0..2 {
                triples.push((rng.random_range(0..=10), heavy, rng.random_range(0..=30)));
            }
            for _ in 0..6 {
                triples.push((rng.random_range(0..=30), 0, rng.random_range(0..=30)));
            }
        }
    }
    for i in (1..triples.len()).rev() {
        let j = rng.random_range(0..=i);
        triples.swap(i, j);
    }
    SchedulingInstance::from_integers(&triples).unwrap()
}

pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

pub fn half() -> Time {
    Time::new(1, 2)
}

pub fn one() -> Time {
    Time::from_integer(1)
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut items, &mut out);
    out
}
