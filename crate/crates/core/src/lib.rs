//! Patent-class proximity measures, technology networks and cross-measure
//! comparison.
//!
//! The crate is organized along the processing chain:
//!
//! * [`corpus`]: records, schema, period slicing, class universe.
//! * [`aggregate`]: citation, co-classification and agent-class counts.
//! * [`measures`]: the twelve proximity matrices.
//! * [`network`]: graphs, backbone, centrality, communities, overlays, export.
//! * [`compare`]: temporal stability and cross-measure correlation tables.
//! * [`pipeline`]: config-driven staged runs with caching and a manifest.

pub mod aggregate;
pub mod compare;
pub mod corpus;
pub mod error;
pub mod io;
pub mod measures;
pub mod network;
pub mod numfmt;
pub mod pipeline;
pub mod synth;

pub use aggregate::{
    build_agent_class_matrix, build_agent_cooccurrence, build_citation_aggregate, build_class_stats,
    build_coclass_counts, compute_rta, AgentClassMatrix, AgentCooccurrence, Aggregates, CitationAggregate,
    ClassStats, CoClassCounts, CooccurrenceUniverse, RtaMatrix,
};
pub use compare::{
    compare, edge_vector, pearson, spearman, CompareOptions, ComparisonReport, CorrelationTable, EdgeVector,
    GraphScope, PairSelection,
};
pub use corpus::{
    build_class_universe, parse_corpus, AgentKind, ClassUniverse, Corpus, PatentRecord, PeriodSpec, Schema,
};
pub use error::{Error, Result};
pub use measures::{compute_measure, MeasureId, MeasureOptions, ProximityMatrix};
pub use network::{
    build_network, degree_centrality, detect_communities, eigenvector_centrality, filter_backbone,
    maximum_spanning_tree, overlay, Backbone, EigenOptions, Edge, OverlaySet, Partition, TechNetwork,
};
pub use pipeline::{export_overlay, run_pipeline, PipelineConfig, RunManifest, Stage};
