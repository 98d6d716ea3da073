//! Cross-network comparison: edge-weight and centrality correlations,
//! importance rank correlations, and the representativeness ranking.

mod stats;

pub use stats::{average_ranks, pearson, spearman};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregate::ClassStats;
use crate::corpus::PeriodSpec;
use crate::error::{Error, Result};
use crate::measures::{MeasureId, ProximityMatrix};
use crate::network::{
    build_network, degree_centrality, eigenvector_centrality, filter_backbone, CentralityKind, EigenOptions,
    TechNetwork,
};
use crate::numfmt::format_table_cell;

/// Which class pairs enter an edge-weight correlation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    #[default]
    All,
    /// Only pairs with a nonzero weight in both networks.
    JointNonzero,
}

/// Network on which centralities are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphScope {
    #[default]
    Full,
    Backbone,
}

/// Upper-triangle weights of a proximity matrix in class-pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector {
    pub measure: MeasureId,
    pub period: Option<PeriodSpec>,
    pub values: Vec<f64>,
}

pub fn edge_vector(pm: &ProximityMatrix) -> EdgeVector {
    let n = pm.len();
    let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            values.push(pm.values[[i, j]]);
        }
    }
    EdgeVector {
        measure: pm.measure,
        period: pm.period,
        values,
    }
}

/// Pearson correlation of two edge vectors under a pair selection rule.
pub fn edge_correlation(a: &EdgeVector, b: &EdgeVector, pairs: PairSelection) -> Result<Option<f64>> {
    match pairs {
        PairSelection::All => pearson(&a.values, &b.values),
        PairSelection::JointNonzero => {
            if a.values.len() != b.values.len() {
                return Err(Error::LengthMismatch {
                    left: a.values.len(),
                    right: b.values.len(),
                });
            }
            let (x, y): (Vec<f64>, Vec<f64>) = a
                .values
                .iter()
                .zip(&b.values)
                .filter(|(p, q)| **p != 0.0 && **q != 0.0)
                .map(|(p, q)| (*p, *q))
                .unzip();
            if x.len() < 2 {
                return Ok(None);
            }
            pearson(&x, &y)
        }
    }
}

/// Symmetric table of pairwise coefficients. `None` marks undefined cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub title: String,
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Mean of each row's defined off-diagonal entries.
    pub averages: Vec<Option<f64>>,
}

impl CorrelationTable {
    /// Evaluates `coef` on `i < j` and mirrors. The diagonal is 1 when `coef(i, i)` is defined.
    #[allow(clippy::needless_range_loop)]
    pub fn from_pairwise<F>(title: impl Into<String>, labels: Vec<String>, mut coef: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<Option<f64>>,
    {
        let k = labels.len();
        let mut values = vec![vec![None; k]; k];
        for i in 0..k {
            values[i][i] = coef(i, i)?.map(|_| 1.0);
            for j in i + 1..k {
                let v = coef(i, j)?;
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        let averages = (0..k)
            .map(|i| {
                let defined: Vec<f64> = (0..k).filter(|&j| j != i).filter_map(|j| values[i][j]).collect();
                if defined.is_empty() {
                    None
                } else {
                    Some(defined.iter().sum::<f64>() / defined.len() as f64)
                }
            })
            .collect();
        Ok(CorrelationTable {
            title: title.into(),
            labels,
            values,
            averages,
        })
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == row)?;
        let j = self.labels.iter().position(|l| l == col)?;
        self.values[i][j]
    }

    pub fn average(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        self.averages[i]
    }

    /// Three-decimal table with an `Average` row; undefined cells are blank.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| format_table_cell(*v)));
            out.write_record(&rec)?;
        }
        let mut avg = vec!["Average".to_string()];
        avg.extend(self.averages.iter().map(|v| format_table_cell(*v)));
        out.write_record(&avg)?;
        out.flush()?;
        Ok(())
    }
}

/// Correlations of one measure's edge weights across periods.
pub fn temporal_stability(matrices: &[ProximityMatrix], pairs: PairSelection) -> Result<CorrelationTable> {
    if matrices.len() < 2 {
        return Err(Error::InvalidInput("temporal stability needs at least two periods".into()));
    }
    let measure = matrices[0].measure;
    for m in matrices {
        if m.measure != measure {
            return Err(Error::InvalidInput(format!("mixed measures {measure} and {}", m.measure)));
        }
        if m.universe != matrices[0].universe {
            return Err(Error::UniverseMismatch("periods use different class universes".into()));
        }
    }
    let vectors: Vec<EdgeVector> = matrices.iter().map(edge_vector).collect();
    let labels = matrices
        .iter()
        .enumerate()
        .map(|(k, m)| m.period.map_or_else(|| format!("period{}", k + 1), |p| p.to_string()))
        .collect();
    CorrelationTable::from_pairwise(
        format!("Edge-weight correlations of {measure} across periods"),
        labels,
        |i, j| edge_correlation(&vectors[i], &vectors[j], pairs),
    )
}

/// Pairwise edge-weight correlations between measures.
pub fn cross_measure_correlation(vectors: &[EdgeVector], pairs: PairSelection) -> Result<CorrelationTable> {
    if let Some(first) = vectors.first() {
        if let Some(v) = vectors.iter().find(|v| v.values.len() != first.values.len()) {
            return Err(Error::LengthMismatch {
                left: first.values.len(),
                right: v.values.len(),
            });
        }
    }
    let labels = vectors.iter().map(|v| v.measure.to_string()).collect();
    CorrelationTable::from_pairwise("Edge-weight correlations between networks", labels, |i, j| {
        edge_correlation(&vectors[i], &vectors[j], pairs)
    })
}

/// Degree and eigenvector centralities of one measure's network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityProfile {
    pub measure: MeasureId,
    pub degree: Vec<f64>,
    /// `None` when the network has no positive edge weight.
    pub eigenvector: Option<Vec<f64>>,
}

impl CentralityProfile {
    pub fn compute(measure: MeasureId, net: &TechNetwork, opts: EigenOptions) -> Result<Self> {
        let eigenvector = match eigenvector_centrality(net, opts) {
            Ok(v) => Some(v),
            Err(Error::NoPositiveWeight) => None,
            Err(e) => return Err(e),
        };
        Ok(CentralityProfile {
            measure,
            degree: degree_centrality(net),
            eigenvector,
        })
    }

    pub fn get(&self, kind: CentralityKind) -> Option<&[f64]> {
        match kind {
            CentralityKind::Degree => Some(&self.degree),
            CentralityKind::Eigenvector => self.eigenvector.as_deref(),
        }
    }
}

fn optional_pearson(a: Option<&[f64]>, b: Option<&[f64]>) -> Result<Option<f64>> {
    match (a, b) {
        (Some(a), Some(b)) => pearson(a, b),
        _ => Ok(None),
    }
}

fn optional_spearman(a: Option<&[f64]>, b: &[f64]) -> Result<Option<f64>> {
    match a {
        Some(a) => spearman(a, b),
        None => Ok(None),
    }
}

/// Pearson correlations of per-vertex centralities between measures.
pub fn centrality_correlation(profiles: &[CentralityProfile], kind: CentralityKind) -> Result<CorrelationTable> {
    let labels = profiles.iter().map(|p| p.measure.to_string()).collect();
    CorrelationTable::from_pairwise(
        format!("Correlations of vertex {} centrality between networks", kind.as_str()),
        labels,
        |i, j| optional_pearson(profiles[i].get(kind), profiles[j].get(kind)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRow {
    pub measure: MeasureId,
    pub degree_vs_patents: Option<f64>,
    pub degree_vs_forward_citations: Option<f64>,
    pub eigenvector_vs_patents: Option<f64>,
    pub eigenvector_vs_forward_citations: Option<f64>,
}

/// Spearman correlations of centralities with class size and impact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceTable {
    pub rows: Vec<ImportanceRow>,
}

impl ImportanceTable {
    pub fn row(&self, measure: MeasureId) -> Option<&ImportanceRow> {
        self.rows.iter().find(|r| r.measure == measure)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "measure",
            "degree_vs_patents",
            "degree_vs_forward_citations",
            "eigenvector_vs_patents",
            "eigenvector_vs_forward_citations",
        ])?;
        for r in &self.rows {
            out.write_record([
                r.measure.to_string(),
                format_table_cell(r.degree_vs_patents),
                format_table_cell(r.degree_vs_forward_citations),
                format_table_cell(r.eigenvector_vs_patents),
                format_table_cell(r.eigenvector_vs_forward_citations),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn importance_correlation(profiles: &[CentralityProfile], stats: &ClassStats) -> Result<ImportanceTable> {
    let patents: Vec<f64> = stats.patent_count.iter().map(|&x| x as f64).collect();
    let citations: Vec<f64> = stats.forward_citations.iter().map(|&x| x as f64).collect();
    let rows = profiles
        .iter()
        .map(|p| {
            let deg = p.get(CentralityKind::Degree);
            let eig = p.get(CentralityKind::Eigenvector);
            Ok(ImportanceRow {
                measure: p.measure,
                degree_vs_patents: optional_spearman(deg, &patents)?,
                degree_vs_forward_citations: optional_spearman(deg, &citations)?,
                eigenvector_vs_patents: optional_spearman(eig, &patents)?,
                eigenvector_vs_forward_citations: optional_spearman(eig, &citations)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImportanceTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    pub label: String,
    /// The label's average in each input table.
    pub per_table: Vec<Option<f64>>,
    /// Mean of the defined per-table averages.
    pub score: Option<f64>,
}

/// Orders labels by the mean of their per-table averages, highest first.
/// Undefined scores go last; ties fall back to label order.
pub fn representativeness_ranking(tables: &[&CorrelationTable]) -> Vec<RankEntry> {
    let mut labels: Vec<String> = tables.iter().flat_map(|t| t.labels.iter().cloned()).collect();
    labels.sort();
    labels.dedup();
    let mut entries: Vec<RankEntry> = labels
        .into_iter()
        .map(|label| {
            let per_table: Vec<Option<f64>> = tables.iter().map(|t| t.average(&label)).collect();
            let defined: Vec<f64> = per_table.iter().flatten().copied().collect();
            let score = if defined.is_empty() {
                None
            } else {
                Some(defined.iter().sum::<f64>() / defined.len() as f64)
            };
            RankEntry {
                label,
                per_table,
                score,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        let key = |e: &RankEntry| e.score.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then_with(|| a.label.cmp(&b.label))
    });
    entries
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareOptions {
    pub pairs: PairSelection,
    pub centrality_on: GraphScope,
    pub backbone_multiplier: usize,
    pub eigen: EigenOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            pairs: PairSelection::All,
            centrality_on: GraphScope::Full,
            backbone_multiplier: 2,
            eigen: EigenOptions::default(),
        }
    }
}

/// All comparison tables for one study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub primary_period: Option<PeriodSpec>,
    pub periods: Vec<PeriodSpec>,
    pub temporal: BTreeMap<MeasureId, CorrelationTable>,
    pub edge_weights: CorrelationTable,
    pub degree: CorrelationTable,
    pub eigenvector: CorrelationTable,
    pub importance: ImportanceTable,
    pub ranking: Vec<RankEntry>,
}

impl ComparisonReport {
    /// File name and contents of every report file, in a fixed order.
    pub fn render(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let csv_err = |e: csv::Error| Error::InvalidInput(format!("rendering report: {e}"));
        let mut files = Vec::new();
        for (measure, table) in &self.temporal {
            let mut buf = Vec::new();
            table.write_csv(&mut buf).map_err(csv_err)?;
            files.push((format!("table2_{measure}.csv"), buf));
        }
        for (name, table) in [
            ("table3.csv", &self.edge_weights),
            ("table4a.csv", &self.degree),
            ("table4b.csv", &self.eigenvector),
        ] {
            let mut buf = Vec::new();
            table.write_csv(&mut buf).map_err(csv_err)?;
            files.push((name.to_string(), buf));
        }
        let mut buf = Vec::new();
        self.importance.write_csv(&mut buf).map_err(csv_err)?;
        files.push(("table5.csv".to_string(), buf));

        let mut buf = Vec::new();
        {
            let mut out = csv::Writer::from_writer(&mut buf);
            out.write_record(["rank", "measure", "edge_weights", "degree", "eigenvector", "score"])
                .map_err(csv_err)?;
            for (k, e) in self.ranking.iter().enumerate() {
                let mut rec = vec![(k + 1).to_string(), e.label.clone()];
                rec.extend(e.per_table.iter().map(|v| format_table_cell(*v)));
                rec.push(format_table_cell(e.score));
                out.write_record(&rec).map_err(csv_err)?;
            }
            out.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        files.push(("representativeness.csv".to_string(), buf));

        let mut json = serde_json::to_vec_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        json.push(b'\n');
        files.push(("report.json".to_string(), json));
        Ok(files)
    }
}

/// Builds every comparison table.
///
/// `primary` holds one matrix per measure for the main period. `by_period`
/// holds, per measure, the matrices of all periods for the temporal tables
/// (measures with fewer than two periods are skipped).
pub fn compare(
    primary: &[ProximityMatrix],
    by_period: &BTreeMap<MeasureId, Vec<ProximityMatrix>>,
    stats: &ClassStats,
    opts: &CompareOptions,
) -> Result<ComparisonReport> {
    let mut temporal = BTreeMap::new();
    for (measure, mats) in by_period {
        if mats.len() >= 2 {
            temporal.insert(*measure, temporal_stability(mats, opts.pairs)?);
        }
    }
    let vectors: Vec<EdgeVector> = primary.iter().map(edge_vector).collect();
    let edge_weights = cross_measure_correlation(&vectors, opts.pairs)?;

    let profiles = primary
        .iter()
        .map(|pm| {
            let net = build_network(pm, stats)?;
            let net = match opts.centrality_on {
                GraphScope::Full => net,
                GraphScope::Backbone => {
                    let bb = filter_backbone(&net, opts.backbone_multiplier);
                    net.with_edges(bb.kept_edges().to_vec())?
                }
            };
            CentralityProfile::compute(pm.measure, &net, opts.eigen)
        })
        .collect::<Result<Vec<_>>>()?;
    let degree = centrality_correlation(&profiles, CentralityKind::Degree)?;
    let eigenvector = centrality_correlation(&profiles, CentralityKind::Eigenvector)?;
    let importance = importance_correlation(&profiles, stats)?;
    let ranking = representativeness_ranking(&[&edge_weights, &degree, &eigenvector]);

    let mut periods: Vec<PeriodSpec> = by_period.values().flatten().filter_map(|m| m.period).collect();
    periods.sort();
    periods.dedup();
    Ok(ComparisonReport {
        primary_period: primary.first().and_then(|m| m.period),
        periods,
        temporal,
        edge_weights,
        degree,
        eigenvector,
        importance,
        ranking,
    })
}
