use serde::{Deserialize, Serialize};

use super::{fit_with_schedule, ConstrainedTree, LevelParams, Partition, MAX_LEVELS};
use crate::error::{Error, Result};
use crate::tree::TrainMatrix;

pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 100_000;

/// Relative SSE margin a later schedule must beat to replace an earlier one.
const SEARCH_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Picks each level's slot in turn, keeping earlier choices fixed.
    #[default]
    Greedy,
    /// Scores every schedule of length 1 to 7.
    Exhaustive,
}

/// A slot the search may place, and how many levels may use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub slot: usize,
    pub max_uses: usize,
}

/// Number of distinct schedules of length `1..=max_len` respecting the
/// per-candidate use limits.
pub fn schedule_space_size(candidates: &[Candidate], max_len: usize) -> u64 {
    // ways[k] = orderings of length k over the candidates seen so far;
    // adding j copies of a new candidate interleaves in C(k + j, j) ways
    let mut ways = vec![0u128; max_len + 1];
    ways[0] = 1;
    for c in candidates {
        let mut next = vec![0u128; max_len + 1];
        for (k, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for j in 0..=c.max_uses.min(max_len - k) {
                next[k + j] = next[k + j].saturating_add(w.saturating_mul(binomial(k + j, j)));
            }
        }
        ways = next;
    }
    let total: u128 = ways[1..].iter().fold(0u128, |a, &b| a.saturating_add(b));
    u64::try_from(total).unwrap_or(u64::MAX)
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Chooses a schedule over `candidates` by training SSE and fits it.
pub fn search_schedule(
    m: &TrainMatrix,
    candidates: &[Candidate],
    params: &LevelParams,
    mode: SearchMode,
    exhaustive_cap: u64,
) -> Result<(Vec<usize>, ConstrainedTree)> {
    if candidates.is_empty() {
        return Err(Error::Config("schedule search needs at least one candidate".into()));
    }
    if let Some(c) = candidates.iter().find(|c| c.slot >= m.n_slots()) {
        return Err(Error::Config(format!("candidate slot {} out of range", c.slot)));
    }
    // validates min_bucket and the surface slot before any search work
    let root = fit_with_schedule(m, &[], params)?;
    let schedule = match mode {
        SearchMode::Greedy => greedy(m, candidates, params),
        SearchMode::Exhaustive => {
            let size = schedule_space_size(candidates, MAX_LEVELS);
            if size > exhaustive_cap {
                return Err(Error::SearchSpaceTooLarge {
                    size,
                    cap: exhaustive_cap,
                });
            }
            exhaustive(m, candidates, params)
        }
    };
    let tree = if schedule.is_empty() {
        root
    } else {
        fit_with_schedule(m, &schedule, params)?
    };
    Ok((schedule, tree))
}

fn greedy(m: &TrainMatrix, candidates: &[Candidate], params: &LevelParams) -> Vec<usize> {
    let mut part = Partition::root(m);
    let mut current = part.sse(m, params);
    let mut uses = vec![0usize; candidates.len()];
    let mut schedule = Vec::new();
    while schedule.len() < MAX_LEVELS && !part.open.is_empty() {
        let mut best: Option<(f64, usize, Partition)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if uses[i] >= c.max_uses {
                continue;
            }
            let next = part.extend(m, c.slot, params);
            if next.open.is_empty() {
                continue;
            }
            let sse = next.sse(m, params);
            if best.as_ref().is_none_or(|(b, _, _)| sse < b - SEARCH_TIE * b.abs()) {
                best = Some((sse, i, next));
            }
        }
        match best {
            Some((sse, i, next)) if sse < current - SEARCH_TIE * current.abs() => {
                uses[i] += 1;
                schedule.push(candidates[i].slot);
                part = next;
                current = sse;
            }
            _ => break,
        }
    }
    schedule
}

fn exhaustive(m: &TrainMatrix, candidates: &[Candidate], params: &LevelParams) -> Vec<usize> {
    struct Walk<'a> {
        m: &'a TrainMatrix,
        candidates: &'a [Candidate],
        params: &'a LevelParams,
        uses: Vec<usize>,
        prefix: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }

    impl Walk<'_> {
        fn visit(&mut self, part: &Partition) {
            if !self.prefix.is_empty() {
                let sse = part.sse(self.m, self.params);
                if self.best.as_ref().is_none_or(|(b, _)| sse < b - SEARCH_TIE * b.abs()) {
                    self.best = Some((sse, self.prefix.clone()));
                }
            }
            // with nothing left to split, longer schedules give the same tree
            if self.prefix.len() == MAX_LEVELS || part.open.is_empty() {
                return;
            }
            for i in 0..self.candidates.len() {
                let c = self.candidates[i];
                if self.uses[i] >= c.max_uses {
                    continue;
                }
                let next = part.extend(self.m, c.slot, self.params);
                self.uses[i] += 1;
                self.prefix.push(c.slot);
                self.visit(&next);
                self.prefix.pop();
                self.uses[i] -= 1;
            }
        }
    }

    let mut walk = Walk {
        m,
        candidates,
        params,
        uses: vec![0; candidates.len()],
        prefix: Vec::new(),
        best: None,
    };
    walk.visit(&Partition::root(m));
    walk.best.map(|(_, s)| s).unwrap_or_default()
}
