use std::collections::BTreeSet;

use serde::Serialize;

use super::TechNetwork;
use crate::corpus::{AgentKind, Corpus, PeriodSpec};

/// Classes in which one agent patented during a period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlaySet {
    pub agent_id: String,
    pub agent_kind: AgentKind,
    pub period: PeriodSpec,
    /// Vertex indices of the network's universe.
    pub highlighted: BTreeSet<usize>,
    /// False when the agent holds no patent anywhere in the corpus.
    pub agent_found: bool,
}

impl OverlaySet {
    pub fn is_empty(&self) -> bool {
        self.highlighted.is_empty()
    }
}

pub fn overlay(
    net: &TechNetwork,
    corpus: &Corpus,
    agent_id: &str,
    agent_kind: AgentKind,
    period: PeriodSpec,
) -> OverlaySet {
    let universe = net.universe();
    let mut highlighted = BTreeSet::new();
    let mut agent_found = false;
    for record in corpus.iter().filter(|r| r.agents(agent_kind).contains(agent_id)) {
        agent_found = true;
        if period.contains(record.grant_year) {
            highlighted.extend(universe.admitted(record));
        }
    }
    OverlaySet {
        agent_id: agent_id.to_string(),
        agent_kind,
        period,
        highlighted,
        agent_found,
    }
}
