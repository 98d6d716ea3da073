//! Brute-force measures computed straight from patent records.
//!
//! Nothing here goes through the crate's aggregate structures: sets are
//! enumerated, vectors are dense, agents are scanned exhaustively and the
//! RTA threshold is decided in integer arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use techmap::corpus::{AgentKind, PatentRecord};
use techmap::measures::MeasureId;

pub struct Oracle<'a> {
    records: Vec<&'a PatentRecord>,
    /// Admitted classes, sorted.
    pub classes: Vec<String>,
    /// Admitted classes of each record, as indices.
    admitted: Vec<BTreeSet<usize>>,
}

/// Classes are admitted unless they end in "99" (the default exclusion).
pub fn default_excluded(code: &str) -> bool {
    code.ends_with("99")
}

impl<'a> Oracle<'a> {
    /// `all` defines the class universe; `sliced` the records measured.
    pub fn new(all: &'a [PatentRecord], sliced: &'a [PatentRecord]) -> Self {
        let classes: Vec<String> = all
            .iter()
            .flat_map(|r| r.classes.iter())
            .filter(|c| !default_excluded(c))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let records: Vec<&PatentRecord> = sliced.iter().collect();
        let admitted = records
            .iter()
            .map(|r| {
                (0..classes.len())
                    .filter(|&i| r.classes.contains(&classes[i]))
                    .collect()
            })
            .collect();
        Oracle {
            records,
            classes,
            admitted,
        }
    }

    pub fn n(&self) -> usize {
        self.classes.len()
    }

    fn has(&self, p: usize, i: usize) -> bool {
        self.admitted[p].contains(&i)
    }

    fn pairwise(&self, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { f(i, j) }).collect())
            .collect()
    }

    pub fn measure(&self, id: MeasureId, all_agents: bool, keep_diagonal: bool) -> Vec<Vec<f64>> {
        use MeasureId::*;
        match id {
            A1 => self.co_reference(),
            A2 => self.class_class_cosine(),
            A3 => self.class_patent_cosine(),
            B1 => self.diversification(AgentKind::Inventor),
            B2 => self.diversification(AgentKind::Organization),
            B3 => self.diversification(AgentKind::Country),
            C1 => self.cooccurrence(AgentKind::Inventor, all_agents),
            C2 => self.cooccurrence(AgentKind::Organization, all_agents),
            C3 => self.cooccurrence(AgentKind::Country, all_agents),
            D1 => self.co_classification(),
            D2 => self.coclass_cosine(keep_diagonal),
            D3 => self.patent_cooccurrence(),
        }
    }

    /// Union of the references of every record carrying class `i`.
    pub fn reference_set(&self, i: usize) -> BTreeSet<&str> {
        let mut s = BTreeSet::new();
        for (p, r) in self.records.iter().enumerate() {
            if self.has(p, i) {
                s.extend(r.references.iter().map(String::as_str));
            }
        }
        s
    }

    pub fn patent_set(&self, i: usize) -> BTreeSet<usize> {
        (0..self.records.len()).filter(|&p| self.has(p, i)).collect()
    }

    fn co_reference(&self) -> Vec<Vec<f64>> {
        let sets: Vec<_> = (0..self.n()).map(|i| self.reference_set(i)).collect();
        self.pairwise(|i, j| jaccard(&sets[i], &sets[j]))
    }

    fn class_class_cosine(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let index: BTreeMap<&str, usize> = self
            .records
            .iter()
            .enumerate()
            .map(|(p, r)| (r.patent_id.as_str(), p))
            .collect();
        let mut c = vec![vec![0.0; n]; n];
        for (p, r) in self.records.iter().enumerate() {
            for q in &r.references {
                let Some(&q) = index.get(q.as_str()) else { continue };
                for &i in &self.admitted[p] {
                    for &j in &self.admitted[q] {
                        c[i][j] += 1.0;
                    }
                }
            }
        }
        self.pairwise(|i, j| dense_cosine(&c[i], &c[j]))
    }

    fn class_patent_cosine(&self) -> Vec<Vec<f64>> {
        let cited: Vec<&str> = self
            .records
            .iter()
            .flat_map(|r| r.references.iter().map(String::as_str))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let vectors: Vec<Vec<f64>> = (0..self.n())
            .map(|i| {
                cited
                    .iter()
                    .map(|q| {
                        (0..self.records.len())
                            .filter(|&p| self.has(p, i) && self.records[p].references.contains(*q))
                            .count() as f64
                    })
                    .collect()
            })
            .collect();
        self.pairwise(|i, j| dense_cosine(&vectors[i], &vectors[j]))
    }

    /// x(c, i) for every agent of `kind`, whole counting.
    pub fn agent_counts(&self, kind: AgentKind) -> BTreeMap<&str, Vec<u64>> {
        let mut x: BTreeMap<&str, Vec<u64>> = BTreeMap::new();
        for (p, r) in self.records.iter().enumerate() {
            for a in r.agents(kind) {
                let row = x.entry(a.as_str()).or_insert_with(|| vec![0; self.n()]);
                for &i in &self.admitted[p] {
                    row[i] += 1;
                }
            }
        }
        x
    }

    fn diversification(&self, kind: AgentKind) -> Vec<Vec<f64>> {
        let x = self.agent_counts(kind);
        let n = self.n();
        let grand: u64 = x.values().flatten().sum();
        let class_total: Vec<u64> = (0..n).map(|i| x.values().map(|r| r[i]).sum()).collect();
        // RTA > 1  <=>  x(c,i) * grand > row_total(c) * class_total(i)
        let specialists: Vec<BTreeSet<&str>> = (0..n)
            .map(|i| {
                x.iter()
                    .filter(|(_, row)| {
                        let row_total: u64 = row.iter().sum();
                        row[i] > 0 && (row[i] as u128) * (grand as u128) > (row_total as u128) * (class_total[i] as u128)
                    })
                    .map(|(a, _)| *a)
                    .collect()
            })
            .collect();
        self.pairwise(|i, j| {
            let (ai, aj) = (&specialists[i], &specialists[j]);
            if ai.is_empty() || aj.is_empty() {
                return 0.0;
            }
            let both = ai.intersection(aj).count() as f64;
            f64::min(both / ai.len() as f64, both / aj.len() as f64)
        })
    }

    fn cooccurrence(&self, kind: AgentKind, all_agents: bool) -> Vec<Vec<f64>> {
        let x = self.agent_counts(kind);
        let min_classes = if all_agents { 1 } else { 2 };
        let active: Vec<BTreeSet<usize>> = x
            .values()
            .map(|row| (0..row.len()).filter(|&i| row[i] > 0).collect::<BTreeSet<_>>())
            .filter(|s| s.len() >= min_classes)
            .collect();
        let t = active.len() as f64;
        self.pairwise(|i, j| {
            let o = active.iter().filter(|s| s.contains(&i) && s.contains(&j)).count() as f64;
            let ni = active.iter().filter(|s| s.contains(&i)).count() as f64;
            let nj = active.iter().filter(|s| s.contains(&j)).count() as f64;
            hypergeometric_t(o, ni, nj, t)
        })
    }

    fn co_classification(&self) -> Vec<Vec<f64>> {
        let sets: Vec<_> = (0..self.n()).map(|i| self.patent_set(i)).collect();
        self.pairwise(|i, j| jaccard(&sets[i], &sets[j]))
    }

    fn coclass_cosine(&self, keep_diagonal: bool) -> Vec<Vec<f64>> {
        let n = self.n();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        if k == i && !keep_diagonal {
                            0.0
                        } else {
                            (0..self.records.len()).filter(|&p| self.has(p, i) && self.has(p, k)).count() as f64
                        }
                    })
                    .collect()
            })
            .collect();
        self.pairwise(|i, j| dense_cosine(&rows[i], &rows[j]))
    }

    fn patent_cooccurrence(&self) -> Vec<Vec<f64>> {
        let multi: Vec<usize> = (0..self.records.len()).filter(|&p| self.admitted[p].len() >= 2).collect();
        let t = multi.len() as f64;
        self.pairwise(|i, j| {
            let o = multi.iter().filter(|&&p| self.has(p, i) && self.has(p, j)).count() as f64;
            let ni = multi.iter().filter(|&&p| self.has(p, i)).count() as f64;
            let nj = multi.iter().filter(|&&p| self.has(p, j)).count() as f64;
            hypergeometric_t(o, ni, nj, t)
        })
    }
}

pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// `(O - mu) / sigma` with `mu = Ni Nj / T` and the hypergeometric variance.
pub fn hypergeometric_t(o: f64, ni: f64, nj: f64, t: f64) -> f64 {
    if t < 2.0 {
        return 0.0;
    }
    let mu = ni * nj / t;
    let var = mu * ((t - ni) / t) * ((t - nj) / (t - 1.0));
    if var <= 0.0 {
        0.0
    } else {
        (o - mu) / var.sqrt()
    }
}
