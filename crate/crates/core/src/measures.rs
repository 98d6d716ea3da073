//! The twelve class-to-class proximity measures.
//!
//! | id | data | statistic |
//! |----|------|-----------|
//! | A1 | backward citations | Jaccard of cited-patent sets |
//! | A2 | backward citations | cosine of class→class citation rows |
//! | A3 | backward citations | cosine of class→patent citation rows |
//! | B1–B3 | inventors / organizations / countries | min conditional probability of RTA > 1 |
//! | C1–C3 | inventors / organizations / countries | hypergeometric t-statistic of shared agents |
//! | D1 | co-classification | Jaccard of patent sets |
//! | D2 | co-classification | cosine of shared-patent rows |
//! | D3 | co-classification | hypergeometric t-statistic of shared patents |
//!
//! Every matrix is exactly symmetric with a zero diagonal. Degenerate cells
//! (empty sets, zero vectors, zero variance) are 0.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{
    build_agent_cooccurrence, compute_rta, Aggregates, AgentCooccurrence, CitationAggregate, CoClassCounts,
    CooccurrenceUniverse, RtaMatrix,
};
use crate::corpus::{AgentKind, ClassUniverse, PeriodSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasureId {
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    C1,
    C2,
    C3,
    D1,
    D2,
    D3,
}

impl MeasureId {
    pub const ALL: [MeasureId; 12] = [
        MeasureId::A1,
        MeasureId::A2,
        MeasureId::A3,
        MeasureId::B1,
        MeasureId::B2,
        MeasureId::B3,
        MeasureId::C1,
        MeasureId::C2,
        MeasureId::C3,
        MeasureId::D1,
        MeasureId::D2,
        MeasureId::D3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureId::A1 => "A1",
            MeasureId::A2 => "A2",
            MeasureId::A3 => "A3",
            MeasureId::B1 => "B1",
            MeasureId::B2 => "B2",
            MeasureId::B3 => "B3",
            MeasureId::C1 => "C1",
            MeasureId::C2 => "C2",
            MeasureId::C3 => "C3",
            MeasureId::D1 => "D1",
            MeasureId::D2 => "D2",
            MeasureId::D3 => "D3",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            MeasureId::A1 => "normalized co-reference",
            MeasureId::A2 => "class-to-class cosine similarity",
            MeasureId::A3 => "class-to-patent cosine similarity",
            MeasureId::B1 => "inventor diversification likelihood",
            MeasureId::B2 => "organization diversification likelihood",
            MeasureId::B3 => "country diversification likelihood",
            MeasureId::C1 => "inventor co-occurrence frequency",
            MeasureId::C2 => "organization co-occurrence frequency",
            MeasureId::C3 => "country co-occurrence frequency",
            MeasureId::D1 => "normalized co-classification",
            MeasureId::D2 => "co-classification cosine similarity",
            MeasureId::D3 => "patent co-occurrence frequency",
        }
    }

    /// Agent kind behind the B and C groups.
    pub fn agent_kind(self) -> Option<AgentKind> {
        match self {
            MeasureId::B1 | MeasureId::C1 => Some(AgentKind::Inventor),
            MeasureId::B2 | MeasureId::C2 => Some(AgentKind::Organization),
            MeasureId::B3 | MeasureId::C3 => Some(AgentKind::Country),
            _ => None,
        }
    }

    /// Whether values are confined to [0, 1]. The t-statistic measures are unbounded.
    pub fn is_unit_bounded(self) -> bool {
        !matches!(self, MeasureId::C1 | MeasureId::C2 | MeasureId::C3 | MeasureId::D3)
    }

    /// Parses a comma-separated list where `all` expands to every measure.
    pub fn parse_list(s: &str) -> Result<Vec<MeasureId>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(MeasureId::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MeasureId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownMeasure(s.to_string()))
    }
}

/// Switches that change how measures are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureOptions {
    pub cooccurrence_universe: CooccurrenceUniverse,
    /// Keep the diagonal of the shared-count matrix in D2.
    pub d2_keep_diagonal: bool,
}

/// A symmetric class-by-class matrix of edge weights for one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    pub measure: MeasureId,
    pub period: Option<PeriodSpec>,
    pub universe: ClassUniverse,
    pub values: Array2<f64>,
}

impl ProximityMatrix {
    pub fn new(
        measure: MeasureId,
        period: Option<PeriodSpec>,
        universe: ClassUniverse,
        values: Array2<f64>,
    ) -> Result<Self> {
        let n = universe.len();
        if values.dim() != (n, n) {
            return Err(Error::UniverseMismatch(format!(
                "{measure} matrix is {:?} but the universe has {n} classes",
                values.dim()
            )));
        }
        Ok(ProximityMatrix {
            measure,
            period,
            universe,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.universe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universe.is_empty()
    }

    /// Checks symmetry, the zero diagonal, finiteness and the measure's range.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.len();
        for i in 0..n {
            if self.values[[i, i]] != 0.0 {
                return Err(format!("{}: nonzero diagonal at {i}", self.measure));
            }
            for j in 0..n {
                let v = self.values[[i, j]];
                if !v.is_finite() {
                    return Err(format!("{}: non-finite value at ({i}, {j})", self.measure));
                }
                if v != self.values[[j, i]] {
                    return Err(format!("{}: asymmetric at ({i}, {j})", self.measure));
                }
                if self.measure.is_unit_bounded() && !(0.0..=1.0).contains(&v) {
                    return Err(format!("{}: {v} outside [0, 1] at ({i}, {j})", self.measure));
                }
            }
        }
        Ok(())
    }
}

/// Fills a symmetric zero-diagonal matrix from a pair function evaluated for `i < j`.
fn symmetric_from_pairs<F>(n: usize, cell: F) -> Array2<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| cell(i, j)).collect();
    let mut m = Array2::<f64>::zeros((n, n));
    for (&(i, j), v) in pairs.iter().zip(values) {
        m[[i, j]] = v;
        m[[j, i]] = v;
    }
    m
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Cosine of two nonnegative vectors given their dot product and squared norms.
fn cosine(dot: f64, sq_a: f64, sq_b: f64) -> f64 {
    if sq_a <= 0.0 || sq_b <= 0.0 {
        return 0.0;
    }
    (dot / (sq_a.sqrt() * sq_b.sqrt())).clamp(0.0, 1.0)
}

/// Size of the intersection of two ascending sequences.
fn sorted_intersection_len<T: Ord + Copy>(a: impl IntoIterator<Item = T>, b: impl IntoIterator<Item = T>) -> usize {
    let mut a = a.into_iter().peekable();
    let mut b = b.into_iter().peekable();
    let mut n = 0;
    while let (Some(&x), Some(&y)) = (a.peek(), b.peek()) {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                n += 1;
                a.next();
                b.next();
            }
        }
    }
    n
}

/// Hypergeometric t-statistic of an observed overlap `o` between groups of
/// sizes `ni` and `nj` drawn from `t` units. Zero when the variance vanishes.
pub fn t_statistic(o: f64, ni: f64, nj: f64, t: f64) -> f64 {
    if t < 2.0 {
        return 0.0;
    }
    let mu = ni * nj / t;
    let var = mu * ((t - ni) / t) * ((t - nj) / (t - 1.0));
    if var > 0.0 {
        (o - mu) / var.sqrt()
    } else {
        0.0
    }
}

/// A1: Jaccard index of the per-class sets of referenced patents.
pub fn normalized_co_reference(agg: &CitationAggregate) -> Array2<f64> {
    symmetric_from_pairs(agg.num_classes(), |i, j| {
        let inter = sorted_intersection_len(agg.reference_set(i), agg.reference_set(j));
        let union = agg.class_to_patent(i).len() + agg.class_to_patent(j).len() - inter;
        ratio_or_zero(inter as f64, union as f64)
    })
}

/// A2: cosine of rows of the class→class citation matrix, summed over all classes.
pub fn class_class_cosine(agg: &CitationAggregate) -> Array2<f64> {
    let c = agg.class_to_class().mapv(|x| x as f64);
    let sq: Vec<f64> = c.rows().into_iter().map(|r| r.dot(&r)).collect();
    symmetric_from_pairs(agg.num_classes(), |i, j| cosine(c.row(i).dot(&c.row(j)), sq[i], sq[j]))
}

/// A3: cosine of the per-class citation counts over individual cited patents.
pub fn class_patent_cosine(agg: &CitationAggregate) -> Array2<f64> {
    let n = agg.num_classes();
    let sq: Vec<f64> = (0..n)
        .map(|i| agg.class_to_patent(i).iter().map(|&(_, x)| (x as f64) * (x as f64)).sum())
        .collect();
    symmetric_from_pairs(n, |i, j| {
        let (a, b) = (agg.class_to_patent(i), agg.class_to_patent(j));
        let (mut p, mut q, mut dot) = (0, 0, 0.0);
        while p < a.len() && q < b.len() {
            match a[p].0.cmp(&b[q].0) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[p].1 as f64 * b[q].1 as f64;
                    p += 1;
                    q += 1;
                }
            }
        }
        cosine(dot, sq[i], sq[j])
    })
}

/// B1–B3: `min(P(RTA_i > 1 | RTA_j > 1), P(RTA_j > 1 | RTA_i > 1))` over agents.
pub fn diversification_likelihood(rta: &RtaMatrix) -> Array2<f64> {
    let n = rta.num_classes();
    let mut specialists: Vec<Vec<u32>> = vec![Vec::new(); n];
    for agent in 0..rta.agents().len() {
        for &(i, v) in rta.row(agent) {
            if v > 1.0 {
                specialists[i].push(agent as u32);
            }
        }
    }
    symmetric_from_pairs(n, |i, j| {
        let (ai, aj) = (&specialists[i], &specialists[j]);
        if ai.is_empty() || aj.is_empty() {
            return 0.0;
        }
        let inter = sorted_intersection_len(ai.iter().copied(), aj.iter().copied()) as f64;
        (inter / aj.len() as f64).min(inter / ai.len() as f64)
    })
}

/// C1–C3: t-statistic of the number of agents active in both classes.
pub fn cooccurrence_frequency(co: &AgentCooccurrence) -> Array2<f64> {
    let t = co.total as f64;
    symmetric_from_pairs(co.class_counts.len(), |i, j| {
        t_statistic(
            co.cooccur[[i, j]] as f64,
            co.class_counts[i] as f64,
            co.class_counts[j] as f64,
            t,
        )
    })
}

/// D1: Jaccard index of the per-class patent sets.
pub fn normalized_co_classification(cc: &CoClassCounts) -> Array2<f64> {
    symmetric_from_pairs(cc.class_patent_counts.len(), |i, j| {
        let shared = cc.shared[[i, j]];
        let union = cc.class_patent_counts[i] + cc.class_patent_counts[j] - shared;
        ratio_or_zero(shared as f64, union as f64)
    })
}

/// D2: cosine of rows of the shared-count matrix; its diagonal is zeroed first
/// unless `keep_diagonal`.
pub fn coclass_cosine(cc: &CoClassCounts, keep_diagonal: bool) -> Array2<f64> {
    let mut o = cc.shared.mapv(|x| x as f64);
    if !keep_diagonal {
        o.diag_mut().fill(0.0);
    }
    let sq: Vec<f64> = o.rows().into_iter().map(|r| r.dot(&r)).collect();
    symmetric_from_pairs(cc.class_patent_counts.len(), |i, j| {
        cosine(o.row(i).dot(&o.row(j)), sq[i], sq[j])
    })
}

/// D3: t-statistic of shared patents within the multi-class patent population.
pub fn patent_cooccurrence_frequency(cc: &CoClassCounts) -> Array2<f64> {
    let t = cc.multi_class_total as f64;
    symmetric_from_pairs(cc.class_patent_counts.len(), |i, j| {
        t_statistic(
            cc.shared[[i, j]] as f64,
            cc.multi_class_counts[i] as f64,
            cc.multi_class_counts[j] as f64,
            t,
        )
    })
}

/// Computes one measure from a period's aggregates.
pub fn compute_measure(id: MeasureId, agg: &Aggregates, opts: &MeasureOptions) -> Result<ProximityMatrix> {
    let n = agg.universe.len();
    let values = match id {
        MeasureId::A1 => normalized_co_reference(&agg.citations),
        MeasureId::A2 => class_class_cosine(&agg.citations),
        MeasureId::A3 => class_patent_cosine(&agg.citations),
        MeasureId::B1 | MeasureId::B2 | MeasureId::B3 => {
            let acm = agg.agents(id.agent_kind().expect("B measures have an agent kind"));
            if acm.grand_total() == 0 {
                // no agents of this kind in the period: every specialist set is empty
                Array2::zeros((n, n))
            } else {
                diversification_likelihood(&compute_rta(acm)?)
            }
        }
        MeasureId::C1 | MeasureId::C2 | MeasureId::C3 => {
            let acm = agg.agents(id.agent_kind().expect("C measures have an agent kind"));
            cooccurrence_frequency(&build_agent_cooccurrence(acm, opts.cooccurrence_universe))
        }
        MeasureId::D1 => normalized_co_classification(&agg.coclass),
        MeasureId::D2 => coclass_cosine(&agg.coclass, opts.d2_keep_diagonal),
        MeasureId::D3 => patent_cooccurrence_frequency(&agg.coclass),
    };
    ProximityMatrix::new(id, agg.period, agg.universe.clone(), values)
}
