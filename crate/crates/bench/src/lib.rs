//! Shared fixtures for the benchmarks.

use techmap::aggregate::Aggregates;
use techmap::corpus::Corpus;
use techmap::pipeline::aggregate_corpus;
use techmap::synth::{planted_blocks, PlantedSpec};

/// A two-block corpus with `classes` classes in total.
pub fn corpus(classes: usize, patents: usize) -> Corpus {
    let spec = PlantedSpec {
        classes_per_block: classes / 2,
        patents,
        agents: patents / 10,
        within: 0.8,
        first_year: 1976,
        last_year: 2006,
    };
    planted_blocks(7, spec).0
}

pub fn aggregates(corpus: &Corpus) -> Aggregates {
    aggregate_corpus(corpus, &[], None).expect("fixture has classes")
}
