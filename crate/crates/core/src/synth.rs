//! Seeded synthetic corpora for tests and benchmarks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AgentKind, Corpus, PatentRecord};

/// Bounds for [`random_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSpec {
    pub max_patents: usize,
    pub max_classes: usize,
    pub max_agents: usize,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_patents: 50,
            max_classes: 6,
            max_agents: 10,
            first_year: 1990,
            last_year: 1999,
        }
    }
}

/// Excluded by the default `*99` pattern; mixed into random corpora so that
/// exclusion is exercised.
pub const EXCLUDED_CLASS: &str = "X99";

/// A small random corpus: up to `max_classes` admitted classes plus the
/// occasional [`EXCLUDED_CLASS`], references to earlier and to unknown
/// patents, and agents drawn from pools of up to `max_agents` per kind.
pub fn random_corpus(seed: u64, spec: RandomSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = rng.random_range(1..=spec.max_classes.max(1));
    let mut codes: Vec<String> = (0..n_classes).map(|i| format!("C{i:02}")).collect();
    codes.push(EXCLUDED_CLASS.to_string());
    let n_patents = rng.random_range(1..=spec.max_patents.max(1));
    let pools: Vec<Vec<String>> = AgentKind::ALL
        .iter()
        .map(|k| {
            let n = rng.random_range(1..=spec.max_agents.max(1));
            (0..n).map(|i| format!("{}{i}", &k.as_str()[..3])).collect()
        })
        .collect();

    let mut records = Vec::with_capacity(n_patents);
    for p in 0..n_patents {
        let year = rng.random_range(spec.first_year..=spec.last_year);
        let k = rng.random_range(1..=3.min(codes.len()));
        // the excluded class appears with low weight
        let admitted = &codes[..n_classes];
        let mut classes: Vec<&str> = admitted.choose_multiple(&mut rng, k.min(n_classes)).map(String::as_str).collect();
        if rng.random_bool(0.1) {
            if rng.random_bool(0.5) {
                classes.clear();
            }
            classes.push(EXCLUDED_CLASS);
        }
        let mut refs = Vec::new();
        for _ in 0..rng.random_range(0..=4) {
            if p > 0 && rng.random_bool(0.7) {
                refs.push(format!("P{:03}", rng.random_range(0..p)));
            } else {
                refs.push(format!("EXT{}", rng.random_range(0..8)));
            }
        }
        let mut rec = PatentRecord::new(format!("P{p:03}"), year)
            .with_classes(classes)
            .with_references(refs);
        for (kind, pool) in AgentKind::ALL.into_iter().zip(&pools) {
            let m = rng.random_range(0..=3.min(pool.len()));
            rec = rec.with_agents(kind, pool.choose_multiple(&mut rng, m).cloned());
        }
        records.push(rec);
    }
    Corpus::from_records(records).expect("generated records are valid")
}

/// Parameters of [`planted_blocks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub classes_per_block: usize,
    pub patents: usize,
    /// Agents per kind; each has a home block.
    pub agents: usize,
    /// Probability that a second class, a reference or an agent comes from
    /// the patent's own block.
    pub within: f64,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            classes_per_block: 4,
            patents: 600,
            agents: 40,
            within: 0.9,
            first_year: 1990,
            last_year: 2009,
        }
    }
}

/// A corpus whose classes fall into two blocks, with citations,
/// co-classification and agent activity concentrated inside blocks.
///
/// Returns the corpus and the block (0 or 1) of each class in sorted code
/// order. Block 0 classes are `A00..`, block 1 classes are `B00..`.
pub fn planted_blocks(seed: u64, spec: PlantedSpec) -> (Corpus, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.classes_per_block.max(1);
    let block_codes: [Vec<String>; 2] = [
        (0..k).map(|i| format!("A{i:02}")).collect(),
        (0..k).map(|i| format!("B{i:02}")).collect(),
    ];
    let agents: Vec<[Vec<String>; 2]> = AgentKind::ALL
        .iter()
        .map(|kind| {
            let mut home: [Vec<String>; 2] = [Vec::new(), Vec::new()];
            for a in 0..spec.agents.max(2) {
                home[a % 2].push(format!("{}{a:03}", kind.as_str()));
            }
            home
        })
        .collect();

    let mut by_block: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    let mut records = Vec::with_capacity(spec.patents);
    for p in 0..spec.patents {
        let b = rng.random_range(0..2usize);
        let other = 1 - b;
        let pick_block = |rng: &mut ChaCha8Rng| if rng.random_bool(spec.within) { b } else { other };

        let mut classes = vec![block_codes[b].choose(&mut rng).expect("nonempty block").clone()];
        if rng.random_bool(0.6) {
            let bb = pick_block(&mut rng);
            classes.push(block_codes[bb].choose(&mut rng).expect("nonempty block").clone());
        }

        let mut refs = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let bb = pick_block(&mut rng);
            if let Some(&q) = by_block[bb].choose(&mut rng) {
                refs.push(format!("P{q:05}"));
            }
        }

        let year = spec.first_year + (p * (spec.last_year - spec.first_year + 1) as usize / spec.patents.max(1)) as i32;
        let mut rec = PatentRecord::new(format!("P{p:05}"), year)
            .with_classes(classes)
            .with_references(refs);
        for (kind, home) in AgentKind::ALL.into_iter().zip(&agents) {
            let n = rng.random_range(1..=2);
            let mut chosen = Vec::with_capacity(n);
            for _ in 0..n {
                let bb = pick_block(&mut rng);
                chosen.push(home[bb].choose(&mut rng).expect("nonempty pool").clone());
            }
            rec = rec.with_agents(kind, chosen);
        }
        records.push(rec);
        by_block[b].push(p);
    }
    let blocks = (0..2 * k).map(|i| i / k).collect();
    (Corpus::from_records(records).expect("generated records are valid"), blocks)
}
