//! Config-driven staged runs: ingest, aggregate, measure, network, compare.
//!
//! Every stage reads its inputs from files written by the previous one, so
//! the standalone subcommands and [`run_pipeline`] share one code path. A
//! stage is skipped when its key (a digest over the toolkit version, the
//! stage parameters and the digests of its input files) matches the cache
//! index and its recorded outputs are still on disk with unchanged digests.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! corpus.csv
//! aggregate/<period>/*.csv
//! matrices/<period>/<measure>.csv
//! networks/<period>/<measure>.{graphml,dot,edges.csv,full.edges.csv,communities.csv}
//! report/{table2_<measure>,table3,table4a,table4b,table5,representativeness}.csv, report.json
//! overlays/<period>/<measure>_<kind>_<agent>_<overlay period>.{graphml,dot,json}
//! manifest.json, cache.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregate::{Aggregates, ClassStats, CooccurrenceUniverse};
use crate::compare::{compare, CompareOptions, GraphScope, PairSelection};
use crate::corpus::{build_class_universe, parse_corpus, AgentKind, ClassUniverse, Corpus, PeriodSpec, Schema};
use crate::error::{Error, Result};
use crate::io::{read_aggregates, read_class_stats, read_matrix, render_aggregates, render_matrix, write_atomic};
use crate::measures::{compute_measure, MeasureId, MeasureOptions, ProximityMatrix};
use crate::network::{
    build_network, detect_communities, filter_backbone, louvain, overlay, Backbone, EigenOptions, GraphExport, OverlaySet,
    Partition, TechNetwork,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Aggregate,
    Measure,
    Network,
    Compare,
    Overlay,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Aggregate => "aggregate",
            Stage::Measure => "measure",
            Stage::Network => "network",
            Stage::Compare => "compare",
            Stage::Overlay => "overlay",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn missing(stage: Stage, path: &Path) -> Error {
    Error::MissingArtifact {
        stage: stage.as_str().to_string(),
        path: path.to_path_buf(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Error::io(path, e))?))
}

// ---------------------------------------------------------------------------
// configuration

/// Schema given inline as a table or as the path of a schema file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaSource {
    File(PathBuf),
    Inline(Schema),
}

impl Default for SchemaSource {
    fn default() -> Self {
        SchemaSource::Inline(Schema::default())
    }
}

impl SchemaSource {
    pub fn load(&self) -> Result<Schema> {
        match self {
            SchemaSource::File(p) => Schema::from_file(p),
            SchemaSource::Inline(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub backbone_multiplier: usize,
    pub community_seed: u64,
    /// Graph that community detection runs on.
    pub communities_on: GraphScope,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            backbone_multiplier: 2,
            community_seed: 42,
            communities_on: GraphScope::Backbone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralityConfig {
    pub on: GraphScope,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CentralityConfig {
    fn default() -> Self {
        let e = EigenOptions::default();
        CentralityConfig {
            on: GraphScope::Full,
            tolerance: e.tolerance,
            max_iterations: e.max_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub pairs: PairSelection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub cooccurrence_universe: CooccurrenceUniverse,
    pub d2_keep_diagonal: bool,
}

fn default_exclude() -> Vec<String> {
    vec!["*99".to_string()]
}

pub fn default_periods() -> Vec<PeriodSpec> {
    [(1977, 1986), (1987, 1996), (1997, 2006), (1976, 2006)]
        .into_iter()
        .map(|(a, b)| PeriodSpec::new(a, b).expect("valid default period"))
        .collect()
}

fn default_measures() -> Vec<String> {
    vec!["all".to_string()]
}

/// Run configuration, read from a TOML file. Only `input` and `output_dir`
/// are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub schema: SchemaSource,
    #[serde(default = "default_exclude")]
    pub exclude: Vec<String>,
    #[serde(default = "default_periods")]
    pub periods: Vec<PeriodSpec>,
    /// Period of the cross-measure tables; defaults to the widest period.
    #[serde(default)]
    pub primary_period: Option<PeriodSpec>,
    /// Measure ids or `"all"`.
    #[serde(default = "default_measures")]
    pub measures: Vec<String>,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub centrality: CentralityConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

impl PipelineConfig {
    /// Minimal config with every switch at its default.
    pub fn new(input: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            output_dir: output_dir.into(),
            schema: SchemaSource::default(),
            exclude: default_exclude(),
            periods: default_periods(),
            primary_period: None,
            measures: default_measures(),
            measure: MeasureConfig::default(),
            network: NetworkConfig::default(),
            centrality: CentralityConfig::default(),
            compare: CompareConfig::default(),
        }
    }

    /// Parses and validates; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(s: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.input);
        resolve(&mut cfg.output_dir);
        if let SchemaSource::File(p) = &mut cfg.schema {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::Config("at least one period is required".into()));
        }
        let distinct: BTreeSet<_> = self.periods.iter().collect();
        if distinct.len() != self.periods.len() {
            return Err(Error::Config("periods must be distinct".into()));
        }
        if let Some(p) = self.primary_period {
            if !self.periods.contains(&p) {
                return Err(Error::Config(format!("primary period {p} is not among the periods")));
            }
        }
        if self.measure_ids()?.is_empty() {
            return Err(Error::Config("at least one measure is required".into()));
        }
        if self.network.backbone_multiplier < 1 {
            return Err(Error::Config("backbone multiplier must be at least 1".into()));
        }
        if !(self.centrality.tolerance.is_finite() && self.centrality.tolerance > 0.0) {
            return Err(Error::Config("centrality tolerance must be positive".into()));
        }
        if self.centrality.max_iterations == 0 {
            return Err(Error::Config("centrality max_iterations must be positive".into()));
        }
        for p in &self.exclude {
            glob::Pattern::new(p).map_err(|e| Error::Pattern {
                pattern: p.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Requested measures, sorted and deduplicated.
    pub fn measure_ids(&self) -> Result<Vec<MeasureId>> {
        MeasureId::parse_list(&self.measures.join(","))
    }

    /// The configured primary period, else the widest one (earliest start on ties).
    pub fn primary(&self) -> PeriodSpec {
        self.primary_period.unwrap_or_else(|| {
            *self
                .periods
                .iter()
                .max_by(|a, b| a.span().cmp(&b.span()).then(b.start_year().cmp(&a.start_year())))
                .expect("validated: at least one period")
        })
    }

    pub fn measure_options(&self) -> MeasureOptions {
        MeasureOptions {
            cooccurrence_universe: self.measure.cooccurrence_universe,
            d2_keep_diagonal: self.measure.d2_keep_diagonal,
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tolerance: self.centrality.tolerance,
            max_iterations: self.centrality.max_iterations,
        }
    }

    pub fn compare_options(&self) -> CompareOptions {
        CompareOptions {
            pairs: self.compare.pairs,
            centrality_on: self.centrality.on,
            backbone_multiplier: self.network.backbone_multiplier,
            eigen: self.eigen_options(),
        }
    }

    /// Digest of every field that affects results. Paths are left out; the
    /// input's content enters through the input digest instead.
    pub fn digest(&self) -> Result<String> {
        let mut exclude = self.exclude.clone();
        exclude.sort();
        exclude.dedup();
        let canonical = serde_json::json!({
            "schema": self.schema.load()?,
            "exclude": exclude,
            "periods": self.periods,
            "primary_period": self.primary(),
            "measures": self.measure_ids()?,
            "measure": self.measure,
            "network": self.network,
            "centrality": self.centrality,
            "compare": self.compare,
        });
        Ok(sha256_hex(canonical.to_string().as_bytes()))
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.output_dir)
    }
}

/// Paths of every artifact under an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.csv")
    }

    pub fn aggregate_dir(&self, p: PeriodSpec) -> PathBuf {
        self.root.join("aggregate").join(p.to_string())
    }

    pub fn stats(&self, p: PeriodSpec) -> PathBuf {
        self.aggregate_dir(p).join("class_stats.csv")
    }

    pub fn matrix_dir(&self) -> PathBuf {
        self.root.join("matrices")
    }

    pub fn matrix(&self, p: PeriodSpec, m: MeasureId) -> PathBuf {
        self.matrix_dir().join(p.to_string()).join(format!("{m}.csv"))
    }

    pub fn network_prefix(&self, p: PeriodSpec, m: MeasureId) -> PathBuf {
        self.root.join("networks").join(p.to_string()).join(m.as_str())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn overlay_prefix(&self, net_period: PeriodSpec, m: MeasureId, kind: AgentKind, agent: &str, p: PeriodSpec) -> PathBuf {
        self.root
            .join("overlays")
            .join(net_period.to_string())
            .join(format!("{m}_{kind}_{}_{p}", sanitize(agent)))
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn cache_index(&self) -> PathBuf {
        self.root.join("cache.json")
    }

    fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Appends `suffix` to the last path component.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// stage computations

/// Universe from the full corpus, aggregates from the period slice.
pub fn aggregate_corpus(corpus: &Corpus, exclude: &[String], period: Option<PeriodSpec>) -> Result<Aggregates> {
    let universe = build_class_universe(corpus, exclude)?;
    Ok(match period {
        Some(p) => Aggregates::build(&corpus.slice_period(p), &universe, Some(p)),
        None => Aggregates::build(corpus, &universe, None),
    })
}

/// Full network, its backbone and optionally its communities.
#[derive(Debug, Clone)]
pub struct NetworkBuild {
    pub network: TechNetwork,
    pub backbone: Backbone,
    pub partition: Option<Partition>,
}

pub const NETWORK_SUFFIXES: [&str; 5] = [".graphml", ".dot", ".edges.csv", ".full.edges.csv", ".communities.csv"];

impl NetworkBuild {
    /// `communities` gives the Louvain seed and the graph it runs on.
    pub fn new(
        pm: &ProximityMatrix,
        stats: &ClassStats,
        multiplier: usize,
        communities: Option<(u64, GraphScope)>,
    ) -> Result<Self> {
        let network = build_network(pm, stats)?;
        let backbone = filter_backbone(&network, multiplier);
        let partition = communities.map(|(seed, on)| match on {
            GraphScope::Backbone => detect_communities(&backbone, seed),
            GraphScope::Full => louvain(network.vertex_count(), network.edges(), seed),
        });
        Ok(NetworkBuild {
            network,
            backbone,
            partition,
        })
    }

    fn export(&self) -> GraphExport<'_> {
        let e = GraphExport::new(&self.network, self.backbone.kept_edges());
        match &self.partition {
            Some(p) => e.with_communities(&p.membership),
            None => e,
        }
    }

    /// Backbone GraphML, DOT and edge list, the full edge list, and the
    /// community table when communities were detected.
    pub fn render(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut out = Vec::new();
        let e = self.export();
        let mut buf = Vec::new();
        e.write_graphml(&mut buf).expect("writing to memory");
        out.push((NETWORK_SUFFIXES[0], buf));
        let mut buf = Vec::new();
        e.write_dot(&mut buf).expect("writing to memory");
        out.push((NETWORK_SUFFIXES[1], buf));
        let mut buf = Vec::new();
        e.write_edge_list(&mut buf).expect("writing to memory");
        out.push((NETWORK_SUFFIXES[2], buf));
        let mut buf = Vec::new();
        GraphExport::new(&self.network, self.network.edges())
            .write_edge_list(&mut buf)
            .expect("writing to memory");
        out.push((NETWORK_SUFFIXES[3], buf));
        if let Some(p) = &self.partition {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["class", "community"]).expect("writing to memory");
            for (code, c) in self.network.universe().codes().iter().zip(&p.membership) {
                w.write_record([code.as_str(), &c.to_string()]).expect("writing to memory");
            }
            out.push((NETWORK_SUFFIXES[4], w.into_inner().expect("flushing to memory")));
        }
        out
    }

    /// GraphML and DOT of the backbone with overlay flags.
    pub fn render_overlay(&self, highlighted: &BTreeSet<usize>) -> Vec<(&'static str, Vec<u8>)> {
        let e = self.export().with_overlay(highlighted);
        let mut graphml = Vec::new();
        e.write_graphml(&mut graphml).expect("writing to memory");
        let mut dot = Vec::new();
        e.write_dot(&mut dot).expect("writing to memory");
        vec![(".graphml", graphml), (".dot", dot)]
    }
}

pub fn check_stats_universe(universe: &ClassUniverse, stats_universe: &ClassUniverse) -> Result<()> {
    if universe != stats_universe {
        return Err(Error::UniverseMismatch(
            "class stats and matrix list different classes".into(),
        ));
    }
    Ok(())
}

/// Matrices found under `dir`, grouped by period.
///
/// Either `dir/<period>/<measure>.csv` or a flat `dir/<measure>.csv` for a
/// single unnamed period. Periods are ordered by span, then start year.
pub fn load_matrix_dir(dir: &Path) -> Result<BTreeMap<Option<PeriodSpec>, Vec<ProximityMatrix>>> {
    let mut out: BTreeMap<Option<PeriodSpec>, Vec<ProximityMatrix>> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for path in paths {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if path.is_dir() {
            let Ok(period) = name.parse::<PeriodSpec>() else {
                continue;
            };
            let mut files: Vec<PathBuf> = std::fs::read_dir(&path)
                .map_err(|e| Error::io(&path, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| is_matrix_file(p))
                .collect();
            files.sort();
            let mats = files
                .iter()
                .map(|f| read_matrix(f, Some(period)))
                .collect::<Result<Vec<_>>>()?;
            if !mats.is_empty() {
                out.insert(Some(period), mats);
            }
        } else if is_matrix_file(&path) {
            out.entry(None).or_default().push(read_matrix(&path, None)?);
        }
    }
    for mats in out.values_mut() {
        mats.sort_by_key(|m| m.measure);
    }
    if out.is_empty() {
        return Err(missing(Stage::Measure, dir));
    }
    Ok(out)
}

fn is_matrix_file(p: &Path) -> bool {
    p.is_file()
        && p.extension().is_some_and(|e| e == "csv")
        && p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| s.parse::<MeasureId>().is_ok())
}

/// Comparison report over a matrix directory (see [`load_matrix_dir`]).
///
/// Periods are taken in `order` when given, else by span then start year;
/// the primary period defaults to the widest.
pub fn compare_matrix_dir(
    dir: &Path,
    stats_path: &Path,
    opts: &CompareOptions,
    order: Option<&[PeriodSpec]>,
    primary: Option<PeriodSpec>,
) -> Result<crate::compare::ComparisonReport> {
    let mut groups = load_matrix_dir(dir)?;
    let keys: Vec<Option<PeriodSpec>> = match order {
        Some(o) => o.iter().map(|p| Some(*p)).filter(|k| groups.contains_key(k)).collect(),
        None => {
            let mut k: Vec<_> = groups.keys().copied().collect();
            k.sort_by_key(|p| p.map(|p| (p.span(), p.start_year())));
            k
        }
    };
    let primary_key = match primary {
        Some(p) => Some(p),
        None => keys
            .iter()
            .copied()
            .max_by(|a, b| {
                let span = |p: &Option<PeriodSpec>| p.map_or(0, |p| p.span());
                let start = |p: &Option<PeriodSpec>| p.map_or(0, |p| p.start_year());
                span(a).cmp(&span(b)).then(start(b).cmp(&start(a)))
            })
            .flatten(),
    };
    let primary_mats = groups
        .get(&primary_key)
        .cloned()
        .ok_or_else(|| Error::InvalidInput(format!("no matrices for primary period {primary_key:?}")))?;
    let mut by_period: BTreeMap<MeasureId, Vec<ProximityMatrix>> = BTreeMap::new();
    for k in &keys {
        for m in groups.remove(k).unwrap_or_default() {
            by_period.entry(m.measure).or_default().push(m);
        }
    }
    let (stats_universe, stats) = read_class_stats(stats_path)?;
    for m in &primary_mats {
        check_stats_universe(&m.universe, &stats_universe)?;
    }
    compare(&primary_mats, &by_period, &stats, opts)
}

// ---------------------------------------------------------------------------
// manifest and cache

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub outputs: Vec<OutputRecord>,
    #[serde(skip)]
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config_digest: String,
    pub input_digest: String,
    pub started_at: String,
    pub finished_at: String,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn cache_hits(&self) -> usize {
        self.stages.iter().filter(|s| s.cache_hit).count()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        json.push(b'\n');
        write_atomic(path, &json)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CacheIndex {
    version: String,
    stages: BTreeMap<String, CacheEntry>,
}

impl CacheIndex {
    fn load(path: &Path) -> Self {
        let index = std::fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str::<CacheIndex>(&t).ok())
            .unwrap_or_default();
        if index.version == VERSION {
            index
        } else {
            CacheIndex::default()
        }
    }

    fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        json.push(b'\n');
        write_atomic(path, &json)
    }

    /// The recorded outputs when `key` matches and every output is intact.
    fn lookup(&self, layout: &Layout, name: &str, key: &str) -> Option<Vec<OutputRecord>> {
        let entry = self.stages.get(name)?;
        if entry.key != key {
            return None;
        }
        for o in &entry.outputs {
            match sha256_file(&layout.root.join(&o.path)) {
                Ok(d) if d == o.sha256 => {}
                _ => return None,
            }
        }
        Some(entry.outputs.clone())
    }
}

fn stage_key(name: &str, parts: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(format!("techmap {VERSION}\n{name}\n").as_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn combined_digest(outputs: &[OutputRecord]) -> String {
    let mut h = Sha256::new();
    for o in outputs {
        h.update(o.path.as_bytes());
        h.update(b"=");
        h.update(o.sha256.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Writes every file; on failure removes the ones already written.
fn commit(layout: &Layout, files: Vec<(PathBuf, Vec<u8>)>) -> Result<Vec<OutputRecord>> {
    let mut written: Vec<PathBuf> = Vec::with_capacity(files.len());
    let mut records = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        if let Err(e) = write_atomic(&path, &bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        records.push(OutputRecord {
            path: layout.relative(&path),
            sha256: sha256_hex(&bytes),
        });
        written.push(path);
    }
    Ok(records)
}

struct Runner<'a> {
    layout: &'a Layout,
    cache: CacheIndex,
    records: Vec<StageRecord>,
}

impl Runner<'_> {
    /// Runs a group of independent stages, in parallel, consulting the cache.
    ///
    /// Each job is `(name, key, compute)`; results keep job order.
    #[allow(clippy::type_complexity)]
    fn run_group<F>(&mut self, jobs: Vec<(String, String, F)>) -> Result<Vec<Vec<OutputRecord>>>
    where
        F: FnOnce() -> Result<Vec<(PathBuf, Vec<u8>)>> + Send,
    {
        let layout = self.layout;
        let cache = &self.cache;
        let results: Vec<(String, String, Result<(Vec<OutputRecord>, bool)>)> = jobs
            .into_par_iter()
            .map(|(name, key, compute)| {
                if let Some(outputs) = cache.lookup(layout, &name, &key) {
                    debug!("{name}: cache hit");
                    return (name, key, Ok((outputs, true)));
                }
                info!("{name}: running");
                let res = compute().and_then(|files| commit(layout, files)).map(|o| (o, false));
                (name, key, res)
            })
            .collect();

        let mut first_err = None;
        let mut outputs = Vec::with_capacity(results.len());
        for (name, key, res) in results {
            match res {
                Ok((outs, hit)) => {
                    self.cache.stages.insert(
                        name.clone(),
                        CacheEntry {
                            key: key.clone(),
                            outputs: outs.clone(),
                        },
                    );
                    self.records.push(StageRecord {
                        name,
                        key,
                        outputs: outs.clone(),
                        cache_hit: hit,
                    });
                    outputs.push(outs);
                }
                Err(e) => {
                    // stale outputs of an earlier run of this stage must not survive
                    if let Some(old) = self.cache.stages.remove(&name) {
                        for o in old.outputs {
                            let _ = std::fs::remove_file(layout.root.join(&o.path));
                        }
                    }
                    if first_err.is_none() {
                        first_err = Some(Error::Stage {
                            stage: name,
                            source: Box::new(e),
                        });
                    }
                }
            }
        }
        match first_err {
            Some(e) => {
                self.cache.save(&layout.cache_index())?;
                Err(e)
            }
            None => Ok(outputs),
        }
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Runs `f` on a dedicated pool of `jobs` threads, or the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

type Job<'a> = (String, String, Box<dyn FnOnce() -> Result<Vec<(PathBuf, Vec<u8>)>> + Send + 'a>);

/// Runs every stage and writes `manifest.json` and `cache.json`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate()?;
    let started_at = now();
    let layout = config.layout();
    std::fs::create_dir_all(layout.root()).map_err(|e| Error::io(layout.root(), e))?;
    let schema = config.schema.load()?;
    let measures = config.measure_ids()?;
    let config_digest = config.digest()?;
    let input_digest = sha256_file(&config.input)?;
    let mut warnings = Vec::new();
    let mut runner = Runner {
        layout: &layout,
        cache: CacheIndex::load(&layout.cache_index()),
        records: Vec::new(),
    };
    runner.cache.version = VERSION.to_string();

    // ingest
    let schema_json = serde_json::to_string(&schema).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let key = stage_key("ingest", &[&input_digest, &schema_json]);
    let input = config.input.clone();
    let corpus_path = layout.corpus();
    let jobs: Vec<Job> = vec![(
        "ingest".to_string(),
        key,
        Box::new(move || {
            let corpus = parse_corpus(&input, &schema)?;
            let mut buf = Vec::new();
            crate::corpus::write_corpus(&corpus, &mut buf)?;
            Ok(vec![(corpus_path, buf)])
        }),
    )];
    let corpus_digest = runner.run_group(jobs)?.remove(0).remove(0).sha256;

    // aggregate: the universe comes from the full corpus so that edge
    // vectors align across periods
    let mut exclude = config.exclude.clone();
    exclude.sort();
    exclude.dedup();
    let exclude_key = exclude.join("\n");
    let agg_keys: Vec<(PeriodSpec, String, String)> = config
        .periods
        .iter()
        .map(|&p| {
            let name = format!("aggregate/{p}");
            let key = stage_key(&name, &[&corpus_digest, &exclude_key, &p.to_string()]);
            (p, name, key)
        })
        .collect();
    let need_corpus = agg_keys
        .iter()
        .any(|(_, name, key)| runner.cache.lookup(&layout, name, key).is_none());
    let corpus = if need_corpus {
        Some(parse_corpus(layout.corpus(), &Schema::default()).map_err(|e| Error::Stage {
            stage: "aggregate".into(),
            source: Box::new(e),
        })?)
    } else {
        None
    };
    let corpus_ref = corpus.as_ref();
    let exclude_ref = &exclude;
    let jobs: Vec<Job> = agg_keys
        .iter()
        .map(|(p, name, key)| {
            let p = *p;
            let dir = layout.aggregate_dir(p);
            let job: Job = (
                name.clone(),
                key.clone(),
                Box::new(move || {
                    let corpus = corpus_ref.expect("corpus loaded when a stage misses the cache");
                    let agg = aggregate_corpus(corpus, exclude_ref, Some(p))?;
                    Ok(render_aggregates(&agg)
                        .into_iter()
                        .map(|(n, b)| (dir.join(n), b))
                        .collect())
                }),
            );
            job
        })
        .collect();
    let agg_outputs = runner.run_group(jobs)?;
    drop(corpus);
    let agg_digest: BTreeMap<PeriodSpec, String> = config
        .periods
        .iter()
        .zip(&agg_outputs)
        .map(|(p, o)| (*p, combined_digest(o)))
        .collect();
    let stats_digest: BTreeMap<PeriodSpec, String> = config
        .periods
        .iter()
        .map(|&p| {
            let rel = layout.relative(&layout.stats(p));
            let i = config.periods.iter().position(|q| *q == p).expect("period listed");
            let d = agg_outputs[i]
                .iter()
                .find(|o| o.path == rel)
                .map(|o| o.sha256.clone())
                .unwrap_or_default();
            (p, d)
        })
        .collect();
    for &p in &config.periods {
        let totals = read_aggregates_totals(&layout.aggregate_dir(p))?;
        if totals.0 == 0 {
            warnings.push(format!("period {p}: no patents"));
        }
        if totals.1 > 0 {
            warnings.push(format!("period {p}: {} patents have no class in the universe", totals.1));
        }
    }

    // measure
    let mopts = config.measure_options();
    let mopts_json = serde_json::to_string(&mopts).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let pairs: Vec<(PeriodSpec, MeasureId)> = config
        .periods
        .iter()
        .flat_map(|&p| measures.iter().map(move |&m| (p, m)))
        .collect();
    let loaded: BTreeMap<PeriodSpec, Aggregates> = {
        let missing_periods: BTreeSet<PeriodSpec> = pairs
            .iter()
            .filter(|(p, m)| {
                let name = format!("measure/{p}/{m}");
                let key = stage_key(&name, &[&agg_digest[p], &mopts_json]);
                runner.cache.lookup(&layout, &name, &key).is_none()
            })
            .map(|(p, _)| *p)
            .collect();
        missing_periods
            .into_par_iter()
            .map(|p| read_aggregates(&layout.aggregate_dir(p)).map(|a| (p, a)))
            .collect::<Result<_>>()
            .map_err(|e| Error::Stage {
                stage: "measure".into(),
                source: Box::new(e),
            })?
    };
    let loaded_ref = &loaded;
    let mopts_ref = &mopts;
    let jobs: Vec<Job> = pairs
        .iter()
        .map(|&(p, m)| {
            let name = format!("measure/{p}/{m}");
            let key = stage_key(&name, &[&agg_digest[&p], &mopts_json]);
            let path = layout.matrix(p, m);
            let job: Job = (
                name,
                key,
                Box::new(move || {
                    let agg = &loaded_ref[&p];
                    let pm = compute_measure(m, agg, mopts_ref)?;
                    Ok(vec![(path, render_matrix(&pm))])
                }),
            );
            job
        })
        .collect();
    let matrix_outputs = runner.run_group(jobs)?;
    drop(loaded);
    let matrix_digest: BTreeMap<(PeriodSpec, MeasureId), String> = pairs
        .iter()
        .zip(&matrix_outputs)
        .map(|(k, o)| (*k, o[0].sha256.clone()))
        .collect();

    // network
    let multiplier = config.network.backbone_multiplier;
    let seed = config.network.community_seed;
    let communities_on = config.network.communities_on;
    let net_params = format!("multiplier={multiplier} seed={seed} communities_on={communities_on:?}");
    let jobs: Vec<Job> = pairs
        .iter()
        .map(|&(p, m)| {
            let name = format!("network/{p}/{m}");
            let key = stage_key(&name, &[&matrix_digest[&(p, m)], &stats_digest[&p], &net_params]);
            let matrix_path = layout.matrix(p, m);
            let stats_path = layout.stats(p);
            let prefix = layout.network_prefix(p, m);
            let job: Job = (
                name,
                key,
                Box::new(move || {
                    let pm = read_matrix(&matrix_path, Some(p))?;
                    let (su, stats) = read_class_stats(&stats_path)?;
                    check_stats_universe(&pm.universe, &su)?;
                    let build = NetworkBuild::new(&pm, &stats, multiplier, Some((seed, communities_on)))?;
                    Ok(build
                        .render()
                        .into_iter()
                        .map(|(suffix, b)| (with_suffix(&prefix, suffix), b))
                        .collect())
                }),
            );
            job
        })
        .collect();
    runner.run_group(jobs)?;

    // compare
    let primary = config.primary();
    let copts = config.compare_options();
    let copts_json = serde_json::to_string(&copts).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut parts: Vec<String> = vec![copts_json, primary.to_string(), stats_digest[&primary].clone()];
    parts.extend(pairs.iter().map(|(p, m)| format!("{p}/{m}={}", matrix_digest[&(*p, *m)])));
    let part_refs: Vec<&str> = parts.iter().map(String::as_str).collect();
    let key = stage_key("compare", &part_refs);
    let report_dir = layout.report_dir();
    let layout_ref = &layout;
    let periods = &config.periods;
    let measures_ref = &measures;
    let jobs: Vec<Job> = vec![(
        "compare".to_string(),
        key,
        Box::new(move || {
            let read = |p: PeriodSpec, m: MeasureId| read_matrix(&layout_ref.matrix(p, m), Some(p));
            let primary_mats = measures_ref
                .iter()
                .map(|&m| read(primary, m))
                .collect::<Result<Vec<_>>>()?;
            let mut by_period = BTreeMap::new();
            for &m in measures_ref {
                let mats = periods.iter().map(|&p| read(p, m)).collect::<Result<Vec<_>>>()?;
                by_period.insert(m, mats);
            }
            let (su, stats) = read_class_stats(&layout_ref.stats(primary))?;
            check_stats_universe(&primary_mats[0].universe, &su)?;
            let report = compare(&primary_mats, &by_period, &stats, &copts)?;
            Ok(report
                .render()?
                .into_iter()
                .map(|(n, b)| (report_dir.join(n), b))
                .collect())
        }),
    )];
    runner.run_group(jobs)?;

    runner.cache.save(&layout.cache_index())?;
    for w in &warnings {
        warn!("{w}");
    }
    let manifest = RunManifest {
        version: VERSION.to_string(),
        config_digest,
        input_digest,
        started_at,
        finished_at: now(),
        stages: runner.records,
        warnings,
    };
    manifest.write(&layout.manifest())?;
    Ok(manifest)
}

/// (records, unclassified) from an aggregate directory's totals file.
fn read_aggregates_totals(dir: &Path) -> Result<(u64, u64)> {
    let path = dir.join("totals.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    let (mut records, mut unclassified) = (0, 0);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(&path, e))?;
        match &rec[0] {
            "records" => records = rec[1].parse().unwrap_or(0),
            "unclassified" => unclassified = rec[1].parse().unwrap_or(0),
            _ => {}
        }
    }
    Ok((records, unclassified))
}

// ---------------------------------------------------------------------------
// overlays

#[derive(Debug, Clone)]
pub struct OverlayExport {
    pub overlay: OverlaySet,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Writes the network of `measure` in `net_period` with the classes of one
/// agent's patents granted in `period` flagged.
///
/// Needs the ingest, aggregate, measure and network artifacts of an earlier
/// run. Warnings (empty overlay, unknown agent) are appended to the manifest.
pub fn export_overlay(
    config: &PipelineConfig,
    agent_id: &str,
    agent_kind: AgentKind,
    period: PeriodSpec,
    measure: MeasureId,
    net_period: PeriodSpec,
) -> Result<OverlayExport> {
    let layout = config.layout();
    let corpus_path = layout.corpus();
    if !corpus_path.is_file() {
        return Err(missing(Stage::Ingest, &corpus_path));
    }
    let matrix_path = layout.matrix(net_period, measure);
    if !matrix_path.is_file() {
        return Err(missing(Stage::Measure, &matrix_path));
    }
    let stats_path = layout.stats(net_period);
    if !stats_path.is_file() {
        return Err(missing(Stage::Aggregate, &stats_path));
    }
    let net_prefix = layout.network_prefix(net_period, measure);
    for suffix in &NETWORK_SUFFIXES[..4] {
        let p = with_suffix(&net_prefix, suffix);
        if !p.is_file() {
            return Err(missing(Stage::Network, &p));
        }
    }

    let corpus = parse_corpus(&corpus_path, &Schema::default())?;
    let pm = read_matrix(&matrix_path, Some(net_period))?;
    let (su, stats) = read_class_stats(&stats_path)?;
    check_stats_universe(&pm.universe, &su)?;
    let build = NetworkBuild::new(
        &pm,
        &stats,
        config.network.backbone_multiplier,
        Some((config.network.community_seed, config.network.communities_on)),
    )?;
    let set = overlay(&build.network, &corpus, agent_id, agent_kind, period);

    let mut warnings = Vec::new();
    if !set.agent_found {
        warnings.push(format!("overlay: {agent_kind} `{agent_id}` not found in the corpus"));
    } else if set.is_empty() {
        warnings.push(format!("overlay: {agent_kind} `{agent_id}` has no patents in the universe during {period}"));
    }

    let prefix = layout.overlay_prefix(net_period, measure, agent_kind, agent_id, period);
    let mut files: Vec<(PathBuf, Vec<u8>)> = build
        .render_overlay(&set.highlighted)
        .into_iter()
        .map(|(s, b)| (with_suffix(&prefix, s), b))
        .collect();
    let codes: Vec<&str> = set.highlighted.iter().map(|&i| pm.universe.code(i)).collect();
    let mut json = serde_json::to_vec_pretty(&serde_json::json!({
        "agent_id": set.agent_id,
        "agent_kind": set.agent_kind,
        "period": set.period,
        "measure": measure,
        "network_period": net_period,
        "agent_found": set.agent_found,
        "highlighted": codes,
    }))
    .map_err(|e| Error::InvalidInput(e.to_string()))?;
    json.push(b'\n');
    files.push((with_suffix(&prefix, ".json"), json));
    let records = commit(&layout, files)?;

    let manifest_path = layout.manifest();
    if !warnings.is_empty() && manifest_path.is_file() {
        let mut manifest = RunManifest::read(&manifest_path)?;
        for w in &warnings {
            if !manifest.warnings.contains(w) {
                manifest.warnings.push(w.clone());
            }
        }
        manifest.write(&manifest_path)?;
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(OverlayExport {
        overlay: set,
        files: records.iter().map(|r| layout.root().join(&r.path)).collect(),
        warnings,
    })
}
