//! Seeded witness search shared by the Rademacher, Gaussian and cotype engines.
//!
//! A candidate is `k` slots, each an operator choice and a vector with
//! coordinates in `[−1, 1]`. Ratios are invariant under joint scaling, so the
//! box loses nothing. The search evaluates canonical seeds, optionally every
//! grid witness up to a small length, then independent restarts. Every random
//! draw of restart `r` happens at its initialization from stream `r`, and the
//! ascent only accepts strict improvements, so adding restarts or grid levels
//! never lowers the result.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Maximum sweeps per grid level.
    pub ascent_steps: usize,
    pub seed: u64,
    /// Finest grid spacing is `2^{-grid_levels}`.
    pub grid_levels: u32,
    /// Largest number of evaluations spent on the exhaustive grid.
    pub exhaustive_budget: usize,
    /// Longest witness tried by the exhaustive grid.
    pub exhaustive_len: usize,
    /// Longest witness tried by random restarts.
    pub max_witness_len: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 64,
            ascent_steps: 32,
            seed: 42,
            grid_levels: 6,
            exhaustive_budget: 2_000_000,
            exhaustive_len: 3,
            max_witness_len: 12,
        }
    }
}

impl SearchConfig {
    pub fn new(restarts: usize, ascent_steps: usize, seed: u64, grid_levels: u32) -> Result<Self> {
        if restarts == 0 || ascent_steps == 0 || grid_levels == 0 {
            return Err(Error::domain("restarts, ascent steps and grid levels must be positive"));
        }
        Ok(SearchConfig { restarts, ascent_steps, seed, grid_levels, ..Default::default() })
    }

    pub fn with_restarts(self, restarts: usize) -> Self {
        SearchConfig { restarts, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SearchConfig { seed, ..self }
    }

    pub fn with_grid_levels(self, grid_levels: u32) -> Self {
        SearchConfig { grid_levels, ..self }
    }

    pub fn with_exhaustive_budget(self, exhaustive_budget: usize) -> Self {
        SearchConfig { exhaustive_budget, ..self }
    }
}

pub(crate) trait Objective: Sync {
    fn dim(&self) -> usize;
    /// Operator choices per slot.
    fn choices(&self) -> usize;
    /// Ratio for slots `ops` and row-wise vectors `xs`; zero when degenerate.
    fn value(&self, ops: &[usize], xs: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Candidate {
    pub ops: Vec<usize>,
    pub xs: Vec<f64>,
    pub value: f64,
}

pub(crate) struct Outcome {
    pub best: Candidate,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    /// Domain is `ℓ∞`: seed restarts from sign vectors, allow the grid.
    pub grid: bool,
    pub exhaustive: bool,
    /// Stop once this value (a known upper bound) is reached.
    pub stop_at: f64,
}

fn improves(new: f64, old: f64) -> bool {
    new > old + 1e-13 * old.abs()
}

fn keep_better(best: &mut Option<Candidate>, c: Candidate) {
    match best {
        Some(b) if c.value <= b.value => {}
        _ => *best = Some(c),
    }
}

fn reached(best: &Option<Candidate>, stop_at: f64) -> bool {
    best.as_ref().is_some_and(|b| stop_at.is_finite() && b.value >= stop_at * (1.0 - 1e-12))
}

pub(crate) fn maximize<O: Objective>(
    obj: &O,
    cfg: &SearchConfig,
    seeds: Vec<(Vec<usize>, Vec<f64>)>,
    opts: Options,
) -> Outcome {
    let mut best: Option<Candidate> = None;
    let mut exhaustive = false;
    for (ops, xs) in seeds {
        let value = obj.value(&ops, &xs);
        keep_better(&mut best, Candidate { ops, xs, value });
    }
    if let Some(b) = best.clone() {
        if b.ops.len() <= cfg.max_witness_len && !reached(&best, opts.stop_at) {
            keep_better(&mut best, ascend(obj, cfg, b));
        }
    }
    if opts.grid && opts.exhaustive && !reached(&best, opts.stop_at) {
        if let Some(level) = grid_level(obj, cfg) {
            exhaustive = true;
            if let Some(c) = exhaustive_grid(obj, cfg.exhaustive_len, level) {
                keep_better(&mut best, c);
            }
        }
    }
    if !reached(&best, opts.stop_at) {
        let results: Vec<Candidate> = (0..cfg.restarts)
            .into_par_iter()
            .map(|r| {
                let start = initial(obj, cfg, r as u64, opts.grid);
                ascend(obj, cfg, start)
            })
            .collect();
        for c in results {
            keep_better(&mut best, c);
        }
    }
    let best = best.unwrap_or_else(|| {
        let xs = vec![0.0; obj.dim()];
        Candidate { value: obj.value(&[0], &xs), ops: vec![0], xs }
    });
    Outcome { best, exhaustive }
}

/// Longest witness used by restarts for an objective with `choices` operators.
fn repeat_len(obj: &impl Objective, cfg: &SearchConfig) -> usize {
    (obj.choices().max(obj.dim()) + 2).min(10).min(cfg.max_witness_len).max(1)
}

fn initial<O: Objective>(obj: &O, cfg: &SearchConfig, r: u64, grid: bool) -> Candidate {
    let mut rng = mc::stream_rng(cfg.seed, tag::SEARCH, r);
    let c = obj.choices();
    let d = obj.dim();
    // Even restarts use each distinct operator once, odd ones allow repeats.
    let ops: Vec<usize> = if r % 2 == 0 && c > 1 {
        let mut all: Vec<usize> = (0..c).collect();
        while all.len() > cfg.max_witness_len {
            let drop = rng.random_range(0..all.len());
            all.remove(drop);
        }
        all
    } else {
        let k = rng.random_range(1..=repeat_len(obj, cfg));
        (0..k).map(|_| rng.random_range(0..c)).collect()
    };
    let xs: Vec<f64> = (0..ops.len() * d).map(|_| random_coord(&mut rng, grid)).collect();
    let value = obj.value(&ops, &xs);
    Candidate { ops, xs, value }
}

fn random_coord(rng: &mut ChaCha8Rng, grid: bool) -> f64 {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    if grid || rng.random::<bool>() {
        sign
    } else {
        (rng.random_range(0..=8u32) as f64) / 8.0 * sign
    }
}

/// Coordinate and operator-index ascent over dyadic grids `j/2^L`, `L = 0…levels`.
fn ascend<O: Objective>(obj: &O, cfg: &SearchConfig, mut cur: Candidate) -> Candidate {
    let d = obj.dim();
    let c = obj.choices();
    let k = cur.ops.len();
    for level in 0..=cfg.grid_levels {
        let h = (-(level as f64)).exp2();
        for _ in 0..cfg.ascent_steps {
            let mut improved = false;
            if c > 1 {
                for s in 0..k {
                    let keep = cur.ops[s];
                    let mut best_op = keep;
                    for o in 0..c {
                        if o == keep {
                            continue;
                        }
                        cur.ops[s] = o;
                        let v = obj.value(&cur.ops, &cur.xs);
                        if improves(v, cur.value) {
                            cur.value = v;
                            best_op = o;
                            improved = true;
                        }
                    }
                    cur.ops[s] = best_op;
                }
            }
            for i in 0..k * d {
                let keep = cur.xs[i];
                let mut best_x = keep;
                let tries: [f64; 3] = if level == 0 { [-1.0, 0.0, 1.0] } else { [keep - h, keep + h, f64::NAN] };
                for t in tries {
                    if t.is_nan() || t == keep || !(-1.0..=1.0).contains(&t) {
                        continue;
                    }
                    cur.xs[i] = t;
                    let v = obj.value(&cur.ops, &cur.xs);
                    if improves(v, cur.value) {
                        cur.value = v;
                        best_x = t;
                        improved = true;
                    }
                }
                cur.xs[i] = best_x;
            }
            if !improved {
                break;
            }
        }
    }
    cur
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Evaluations needed for all multisets of up to `len` (vector, operator) pairs.
fn grid_cost(d: usize, choices: usize, level: u32, len: usize) -> u128 {
    let side = (1u128 << (level + 1)) + 1;
    let Some(cube) = side.checked_pow(d as u32) else { return u128::MAX };
    let pairs = (cube - 1) / 2 * choices as u128;
    (1..=len as u128).fold(0u128, |acc, k| acc.saturating_add(binomial(pairs + k - 1, k)))
}

fn grid_level<O: Objective>(obj: &O, cfg: &SearchConfig) -> Option<u32> {
    (0..=cfg.grid_levels)
        .take_while(|&l| grid_cost(obj.dim(), obj.choices(), l, cfg.exhaustive_len) <= cfg.exhaustive_budget as u128)
        .last()
}

/// Nonzero vectors of `{j/2^level}^d ∩ [−1,1]^d` whose first nonzero entry is positive.
fn grid_vectors(d: usize, level: u32) -> Vec<Vec<f64>> {
    let steps = 1i64 << level;
    let side = 2 * steps + 1;
    let total = side.pow(d as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut v = Vec::with_capacity(d);
        for _ in 0..d {
            v.push(((c % side) - steps) as f64 / steps as f64);
            c /= side;
        }
        if v.iter().find(|&&x| x != 0.0).is_some_and(|&x| x > 0.0) {
            out.push(v);
        }
    }
    out
}

fn exhaustive_grid<O: Objective>(obj: &O, len: usize, level: u32) -> Option<Candidate> {
    let d = obj.dim();
    let vectors = grid_vectors(d, level);
    let pairs: Vec<(usize, &[f64])> = (0..obj.choices())
        .flat_map(|o| vectors.iter().map(move |v| (o, v.as_slice())))
        .collect();
    let n = pairs.len();
    // Multisets i_1 ≤ i_2 ≤ … ≤ i_k, split over the first index.
    let results: Vec<Option<Candidate>> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<Candidate> = None;
            let mut idx = vec![first];
            let mut ops = Vec::with_capacity(len);
            let mut xs = Vec::with_capacity(len * d);
            loop {
                ops.clear();
                xs.clear();
                for &i in &idx {
                    ops.push(pairs[i].0);
                    xs.extend_from_slice(pairs[i].1);
                }
                let value = obj.value(&ops, &xs);
                if best.as_ref().is_none_or(|b| value > b.value) {
                    best = Some(Candidate { ops: ops.clone(), xs: xs.clone(), value });
                }
                // next multiset in lexicographic order with idx[0] fixed
                if idx.len() < len {
                    let last = *idx.last().unwrap();
                    idx.push(last);
                    continue;
                }
                loop {
                    if idx.len() == 1 {
                        return best;
                    }
                    let last = idx.pop().unwrap();
                    if last + 1 < n {
                        idx.push(last + 1);
                        break;
                    }
                }
            }
        })
        .collect();
    let mut best = None;
    for c in results.into_iter().flatten() {
        keep_better(&mut best, c);
    }
    best
}
