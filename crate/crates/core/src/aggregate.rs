//! Count structures consumed by the proximity measures.
//!
//! Every patent counts whole in each of its admitted classes and for each of
//! its agents. Codes outside the [`ClassUniverse`] are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{AgentKind, ClassUniverse, Corpus, PeriodSpec};
use crate::error::{Error, Result};

/// Citation structures over classes.
///
/// `class_to_class[[i, j]]` counts citations from patents in class `i` to
/// corpus patents in class `j`. `class_to_patent(i)` holds, for each cited
/// patent, how many times patents in class `i` cite it. Cited patents are
/// interned into [`cited_ids`](Self::cited_ids) and need not be corpus members.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationAggregate {
    class_to_class: Array2<u64>,
    cited_ids: Vec<String>,
    class_to_patent: Vec<Vec<(u32, u64)>>,
}

impl CitationAggregate {
    /// Assembles an aggregate from parts; each class row must be sorted by cited index.
    pub fn from_parts(
        class_to_class: Array2<u64>,
        cited_ids: Vec<String>,
        class_to_patent: Vec<Vec<(u32, u64)>>,
    ) -> Result<Self> {
        let n = class_to_patent.len();
        if class_to_class.dim() != (n, n) {
            return Err(Error::UniverseMismatch(format!(
                "class_to_class is {:?} but there are {n} class rows",
                class_to_class.dim()
            )));
        }
        for row in &class_to_patent {
            if row.windows(2).any(|w| w[0].0 >= w[1].0) || row.iter().any(|&(q, _)| q as usize >= cited_ids.len()) {
                return Err(Error::Schema("class_to_patent rows must be sorted and in range".into()));
            }
        }
        Ok(CitationAggregate {
            class_to_class,
            cited_ids,
            class_to_patent,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_to_patent.len()
    }

    pub fn class_to_class(&self) -> &Array2<u64> {
        &self.class_to_class
    }

    pub fn cited_ids(&self) -> &[String] {
        &self.cited_ids
    }

    /// Sparse cited-patent counts of one class, sorted by cited index.
    pub fn class_to_patent(&self, class: usize) -> &[(u32, u64)] {
        &self.class_to_patent[class]
    }

    /// Unique patents referenced by class `class`, ascending.
    pub fn reference_set(&self, class: usize) -> impl Iterator<Item = u32> + '_ {
        self.class_to_patent[class].iter().map(|&(q, _)| q)
    }
}

pub fn build_citation_aggregate(corpus: &Corpus, universe: &ClassUniverse) -> CitationAggregate {
    let n = universe.len();
    let admitted: Vec<Vec<usize>> = corpus.iter().map(|r| universe.admitted(r)).collect();
    let member: HashMap<&str, usize> = corpus
        .iter()
        .enumerate()
        .map(|(k, r)| (r.patent_id.as_str(), k))
        .collect();

    let cited: BTreeSet<&str> = corpus
        .iter()
        .zip(&admitted)
        .filter(|(_, s)| !s.is_empty())
        .flat_map(|(r, _)| r.references.iter().map(String::as_str))
        .collect();
    let cited_ids: Vec<String> = cited.iter().map(|s| s.to_string()).collect();
    let cited_index: HashMap<&str, u32> = cited.iter().enumerate().map(|(k, s)| (*s, k as u32)).collect();

    let mut class_to_class = Array2::<u64>::zeros((n, n));
    let mut per_class: Vec<HashMap<u32, u64>> = vec![HashMap::new(); n];
    for (record, citing) in corpus.iter().zip(&admitted) {
        if citing.is_empty() {
            continue;
        }
        for q in &record.references {
            let qi = cited_index[q.as_str()];
            for &i in citing {
                *per_class[i].entry(qi).or_default() += 1;
            }
            if let Some(&k) = member.get(q.as_str()) {
                for &i in citing {
                    for &j in &admitted[k] {
                        class_to_class[[i, j]] += 1;
                    }
                }
            }
        }
    }
    let class_to_patent = per_class
        .into_iter()
        .map(|m| {
            let mut v: Vec<(u32, u64)> = m.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect();
    CitationAggregate {
        class_to_class,
        cited_ids,
        class_to_patent,
    }
}

/// Co-classification counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoClassCounts {
    /// `shared[[i, j]]`: patents carrying both classes; the diagonal holds `N_i`.
    pub shared: Array2<u64>,
    /// Patents carrying each class.
    pub class_patent_counts: Vec<u64>,
    /// Patents carrying each class among patents with at least two admitted classes.
    pub multi_class_counts: Vec<u64>,
    /// Number of patents with at least two admitted classes.
    pub multi_class_total: u64,
}

pub fn build_coclass_counts(corpus: &Corpus, universe: &ClassUniverse) -> CoClassCounts {
    let n = universe.len();
    let mut shared = Array2::<u64>::zeros((n, n));
    let mut multi_class_counts = vec![0u64; n];
    let mut multi_class_total = 0;
    for record in corpus {
        let s = universe.admitted(record);
        for (a, &i) in s.iter().enumerate() {
            shared[[i, i]] += 1;
            for &j in &s[a + 1..] {
                shared[[i, j]] += 1;
                shared[[j, i]] += 1;
            }
        }
        if s.len() >= 2 {
            multi_class_total += 1;
            for &i in &s {
                multi_class_counts[i] += 1;
            }
        }
    }
    let class_patent_counts = (0..n).map(|i| shared[[i, i]]).collect();
    CoClassCounts {
        shared,
        class_patent_counts,
        multi_class_counts,
        multi_class_total,
    }
}

/// Patent counts per (agent, class) with marginals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentClassMatrix {
    kind: AgentKind,
    num_classes: usize,
    agents: Vec<String>,
    rows: Vec<Vec<(usize, u64)>>,
    agent_totals: Vec<u64>,
    class_totals: Vec<u64>,
    grand_total: u64,
}

impl AgentClassMatrix {
    /// Builds the matrix from `(agent, class, count)` triples; repeated keys add up.
    pub fn from_entries<I>(kind: AgentKind, num_classes: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, usize, u64)>,
    {
        let mut map: BTreeMap<String, BTreeMap<usize, u64>> = BTreeMap::new();
        for (agent, class, count) in entries {
            if class >= num_classes {
                return Err(Error::UniverseMismatch(format!(
                    "class index {class} out of range for {num_classes} classes"
                )));
            }
            if count > 0 {
                *map.entry(agent).or_default().entry(class).or_default() += count;
            }
        }
        Ok(Self::from_map(kind, num_classes, map))
    }

    fn from_map(kind: AgentKind, num_classes: usize, map: BTreeMap<String, BTreeMap<usize, u64>>) -> Self {
        let mut agents = Vec::with_capacity(map.len());
        let mut rows = Vec::with_capacity(map.len());
        let mut agent_totals = Vec::with_capacity(map.len());
        let mut class_totals = vec![0u64; num_classes];
        for (agent, row) in map {
            let row: Vec<(usize, u64)> = row.into_iter().collect();
            for &(i, x) in &row {
                class_totals[i] += x;
            }
            agent_totals.push(row.iter().map(|&(_, x)| x).sum());
            agents.push(agent);
            rows.push(row);
        }
        let grand_total = agent_totals.iter().sum();
        AgentClassMatrix {
            kind,
            num_classes,
            agents,
            rows,
            agent_totals,
            class_totals,
            grand_total,
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Agent ids, sorted.
    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    /// Nonzero `(class, count)` entries of one agent, ascending by class.
    pub fn row(&self, agent: usize) -> &[(usize, u64)] {
        &self.rows[agent]
    }

    pub fn get(&self, agent: usize, class: usize) -> u64 {
        let row = &self.rows[agent];
        row.binary_search_by_key(&class, |&(i, _)| i)
            .map(|k| row[k].1)
            .unwrap_or(0)
    }

    pub fn agent_totals(&self) -> &[u64] {
        &self.agent_totals
    }

    pub fn class_totals(&self) -> &[u64] {
        &self.class_totals
    }

    pub fn grand_total(&self) -> u64 {
        self.grand_total
    }

    /// All nonzero entries in agent-then-class order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, u64)> + '_ {
        self.agents
            .iter()
            .zip(&self.rows)
            .flat_map(|(a, row)| row.iter().map(move |&(i, x)| (a.as_str(), i, x)))
    }
}

pub fn build_agent_class_matrix(corpus: &Corpus, universe: &ClassUniverse, kind: AgentKind) -> AgentClassMatrix {
    let mut map: BTreeMap<String, BTreeMap<usize, u64>> = BTreeMap::new();
    for record in corpus {
        let agents = record.agents(kind);
        if agents.is_empty() {
            continue;
        }
        let classes = universe.admitted(record);
        if classes.is_empty() {
            continue;
        }
        for agent in agents {
            let row = map.entry(agent.clone()).or_default();
            for &i in &classes {
                *row.entry(i).or_default() += 1;
            }
        }
    }
    AgentClassMatrix::from_map(kind, universe.len(), map)
}

/// Revealed technological advantage per (agent, class); absent entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RtaMatrix {
    kind: AgentKind,
    num_classes: usize,
    agents: Vec<String>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl RtaMatrix {
    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn row(&self, agent: usize) -> &[(usize, f64)] {
        &self.rows[agent]
    }

    pub fn get(&self, agent: usize, class: usize) -> f64 {
        let row = &self.rows[agent];
        row.binary_search_by_key(&class, |&(i, _)| i)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }
}

/// `RTA(c,i) = [x(c,i) / Σ_i x(c,i)] / [Σ_c x(c,i) / Σ_{c,i} x(c,i)]`.
pub fn compute_rta(acm: &AgentClassMatrix) -> Result<RtaMatrix> {
    if acm.grand_total == 0 {
        return Err(Error::ZeroGrandTotal);
    }
    let grand = acm.grand_total as f64;
    let rows = acm
        .rows
        .iter()
        .zip(&acm.agent_totals)
        .map(|(row, &total)| {
            let total = total as f64;
            row.iter()
                .map(|&(i, x)| {
                    let class_share = acm.class_totals[i] as f64 / grand;
                    (i, (x as f64 / total) / class_share)
                })
                .collect()
        })
        .collect();
    Ok(RtaMatrix {
        kind: acm.kind,
        num_classes: acm.num_classes,
        agents: acm.agents.clone(),
        rows,
    })
}

/// Which agents form the sample space of the co-occurrence statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CooccurrenceUniverse {
    /// Only agents active in at least two classes.
    #[default]
    Diversified,
    /// Every agent active in at least one class.
    All,
}

/// Number of agents active in both classes of each pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentCooccurrence {
    pub kind: AgentKind,
    /// Symmetric; the diagonal equals `class_counts`.
    pub cooccur: Array2<u64>,
    pub class_counts: Vec<u64>,
    pub total: u64,
}

pub fn build_agent_cooccurrence(acm: &AgentClassMatrix, universe: CooccurrenceUniverse) -> AgentCooccurrence {
    let n = acm.num_classes;
    let min_classes = match universe {
        CooccurrenceUniverse::Diversified => 2,
        CooccurrenceUniverse::All => 1,
    };
    let mut cooccur = Array2::<u64>::zeros((n, n));
    let mut class_counts = vec![0u64; n];
    let mut total = 0;
    for row in &acm.rows {
        if row.len() < min_classes {
            continue;
        }
        total += 1;
        for (a, &(i, _)) in row.iter().enumerate() {
            class_counts[i] += 1;
            cooccur[[i, i]] += 1;
            for &(j, _) in &row[a + 1..] {
                cooccur[[i, j]] += 1;
                cooccur[[j, i]] += 1;
            }
        }
    }
    AgentCooccurrence {
        kind: acm.kind,
        cooccur,
        class_counts,
        total,
    }
}

/// Per-class size and impact indicators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub patent_count: Vec<u64>,
    /// Citations received by the class's patents from corpus patents.
    pub forward_citations: Vec<u64>,
}

pub fn build_class_stats(corpus: &Corpus, universe: &ClassUniverse) -> ClassStats {
    let n = universe.len();
    let mut patent_count = vec![0u64; n];
    let mut received: HashMap<&str, u64> = HashMap::new();
    for record in corpus {
        for q in &record.references {
            *received.entry(q.as_str()).or_default() += 1;
        }
    }
    let mut forward_citations = vec![0u64; n];
    for record in corpus {
        let cites = received.get(record.patent_id.as_str()).copied().unwrap_or(0);
        for i in universe.admitted(record) {
            patent_count[i] += 1;
            forward_citations[i] += cites;
        }
    }
    ClassStats {
        patent_count,
        forward_citations,
    }
}

/// Everything the measures need for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub universe: ClassUniverse,
    pub period: Option<PeriodSpec>,
    pub citations: CitationAggregate,
    pub coclass: CoClassCounts,
    pub inventors: AgentClassMatrix,
    pub organizations: AgentClassMatrix,
    pub countries: AgentClassMatrix,
    pub stats: ClassStats,
    /// Records in the sliced corpus.
    pub records: u64,
    /// Records whose classes are all outside the universe.
    pub unclassified: u64,
}

impl Aggregates {
    pub fn build(corpus: &Corpus, universe: &ClassUniverse, period: Option<PeriodSpec>) -> Aggregates {
        Aggregates {
            universe: universe.clone(),
            period,
            citations: build_citation_aggregate(corpus, universe),
            coclass: build_coclass_counts(corpus, universe),
            inventors: build_agent_class_matrix(corpus, universe, AgentKind::Inventor),
            organizations: build_agent_class_matrix(corpus, universe, AgentKind::Organization),
            countries: build_agent_class_matrix(corpus, universe, AgentKind::Country),
            stats: build_class_stats(corpus, universe),
            records: corpus.len() as u64,
            unclassified: corpus.count_unclassified(universe) as u64,
        }
    }

    pub fn agents(&self, kind: AgentKind) -> &AgentClassMatrix {
        match kind {
            AgentKind::Inventor => &self.inventors,
            AgentKind::Organization => &self.organizations,
            AgentKind::Country => &self.countries,
        }
    }
}
