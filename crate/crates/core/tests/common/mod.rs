#![allow(dead_code)]

pub mod graphs;
pub mod oracle;
pub mod stats;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::array;
use rand::Rng;

use techmap::aggregate::{compute_rta, AgentClassMatrix, CitationAggregate, CooccurrenceUniverse};
use techmap::compare::{average_ranks, pearson, spearman};
use techmap::corpus::{AgentKind, Corpus, PeriodSpec};
use techmap::measures::{
    class_class_cosine, class_patent_cosine, compute_measure, normalized_co_reference, t_statistic, MeasureId,
    MeasureOptions,
};
use techmap::network::{
    eigenvector_centrality, filter_backbone, maximum_spanning_tree, modularity, EigenOptions, Edge,
};
use techmap::pipeline::{aggregate_corpus, run_pipeline, PipelineConfig};
use techmap::synth::{planted_blocks, random_corpus, PlantedSpec, RandomSpec};
use techmap::Error;

use oracle::Oracle;

pub type Check = Result<String, String>;

pub fn all_options() -> [MeasureOptions; 2] {
    [
        MeasureOptions::default(),
        MeasureOptions {
            cooccurrence_universe: CooccurrenceUniverse::All,
            d2_keep_diagonal: true,
        },
    ]
}

/// Compares all 12 measures with the brute-force oracle on one corpus, for
/// the whole corpus and for a sub-period, under both switch settings.
pub fn oracle_agrees(corpus: &Corpus, tol: f64) -> Result<usize, String> {
    let exclude = vec!["*99".to_string()];
    let mut cells = 0;
    let half = PeriodSpec::new(1990, 1994).unwrap();
    for period in [None, Some(half)] {
        let sliced = match period {
            Some(p) => corpus.slice_period(p),
            None => corpus.clone(),
        };
        let oracle = Oracle::new(corpus.records(), sliced.records());
        let agg = match aggregate_corpus(corpus, &exclude, period) {
            Ok(a) => a,
            Err(Error::EmptyUniverse) if oracle.n() == 0 => return Ok(0),
            Err(e) => return Err(format!("aggregate failed: {e}")),
        };
        if agg.universe.codes() != oracle.classes.as_slice() {
            return Err("class universe differs from oracle".into());
        }
        for opts in all_options() {
            for id in MeasureId::ALL {
                let pm = compute_measure(id, &agg, &opts).map_err(|e| format!("{id}: {e}"))?;
                let want = oracle.measure(
                    id,
                    opts.cooccurrence_universe == CooccurrenceUniverse::All,
                    opts.d2_keep_diagonal,
                );
                for (i, row) in want.iter().enumerate() {
                    for (j, &w) in row.iter().enumerate() {
                        let got = pm.values[[i, j]];
                        if (got - w).abs() > tol || got.is_nan() {
                            return Err(format!("{id} {period:?} {opts:?} cell ({i},{j}): got {got}, oracle {w}"));
                        }
                        cells += 1;
                    }
                }
            }
        }
    }
    Ok(cells)
}

pub fn check_oracle_equivalence(corpora: u64) -> Check {
    let mut cells = 0;
    for seed in 0..corpora {
        let corpus = random_corpus(seed, RandomSpec::default());
        cells += oracle_agrees(&corpus, 1e-12).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{corpora} corpora, {cells} cells within 1e-12"))
}

fn close(name: &str, got: f64, want: f64, tol: f64, out: &mut Vec<String>) {
    if (got - want).abs() > tol || got.is_nan() {
        out.push(format!("{name}: got {got}, want {want}"));
    }
}

pub fn check_spot_values() -> Check {
    let mut bad = Vec::new();
    let tol = 1e-9;
    let ids = |n: usize| (0..n).map(|k| format!("q{k}")).collect::<Vec<_>>();

    // Jaccard of {q1,q2,q3} and {q2,q3,q4,q5}
    let agg = CitationAggregate::from_parts(
        ndarray::Array2::zeros((2, 2)),
        ids(5),
        vec![vec![(0, 1), (1, 1), (2, 1)], vec![(1, 1), (2, 1), (3, 1), (4, 1)]],
    )
    .unwrap();
    close("jaccard", normalized_co_reference(&agg)[[0, 1]], 0.4, tol, &mut bad);

    // class-class cosine of (1,1,0) and (1,0,1)
    let agg = CitationAggregate::from_parts(array![[1, 1, 0], [1, 0, 1], [0, 0, 0]], vec![], vec![vec![]; 3]).unwrap();
    close("cosine 0.5", class_class_cosine(&agg)[[0, 1]], 0.5, tol, &mut bad);

    // sparse cosine of {q1:1, q2:1} and {q2:2}
    let agg = CitationAggregate::from_parts(
        ndarray::Array2::zeros((2, 2)),
        ids(3),
        vec![vec![(1, 1), (2, 1)], vec![(2, 2)]],
    )
    .unwrap();
    close("cosine 1/sqrt2", class_patent_cosine(&agg)[[0, 1]], std::f64::consts::FRAC_1_SQRT_2, tol, &mut bad);

    // RTA (2/2)/(2/4)
    let acm = AgentClassMatrix::from_entries(
        AgentKind::Inventor,
        2,
        vec![("A".to_string(), 0, 2), ("B".to_string(), 1, 2)],
    )
    .unwrap();
    close("rta", compute_rta(&acm).unwrap().get(0, 0), 2.0, tol, &mut bad);

    close("t-statistic", t_statistic(3.0, 4.0, 5.0, 10.0), 1.5f64.sqrt(), tol, &mut bad);
    close("t-statistic at mean", t_statistic(2.0, 4.0, 5.0, 10.0), 0.0, tol, &mut bad);

    let triangles = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)].map(|(a, b)| Edge::new(a, b, 1.0));
    close("modularity", modularity(6, &triangles, &[0, 0, 0, 1, 1, 1]), 0.5, tol, &mut bad);

    let path = graphs::network(3, vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0)]);
    let ev = eigenvector_centrality(&path, EigenOptions::default()).unwrap();
    let s = std::f64::consts::SQRT_2;
    for (k, want) in [0.5, s / 2.0, 0.5].into_iter().enumerate() {
        close(&format!("path eigenvector[{k}]"), ev[k], want, tol, &mut bad);
    }

    close("spearman -0.5", spearman(&[1., 2., 3.], &[30., 10., 20.]).unwrap().unwrap(), -0.5, tol, &mut bad);
    close("spearman ties", spearman(&[1., 1., 2.], &[5., 5., 9.]).unwrap().unwrap(), 1.0, tol, &mut bad);
    if average_ranks(&[1., 1., 2.]) != [1.5, 1.5, 3.0] {
        bad.push("average ranks of (1,1,2)".into());
    }
    close("pearson 0.5", pearson(&[1., 2., 3.], &[1., 3., 2.]).unwrap().unwrap(), 0.5, tol, &mut bad);

    if bad.is_empty() {
        Ok("16 worked values".into())
    } else {
        Err(bad.join("; "))
    }
}

/// Symmetry, zero diagonal and range of every measure on random corpora.
pub fn check_invariants(corpora: u64) -> Check {
    let mut matrices = 0;
    for seed in 0..corpora {
        let spec = RandomSpec {
            max_patents: 40 + (seed as usize % 3) * 20,
            ..RandomSpec::default()
        };
        let corpus = random_corpus(10_000 + seed, spec);
        for period in [None, Some(PeriodSpec::new(1993, 1997).unwrap())] {
            let agg = match aggregate_corpus(&corpus, &["*99".to_string()], period) {
                Ok(a) => a,
                Err(Error::EmptyUniverse) => continue,
                Err(e) => return Err(format!("seed {seed}: {e}")),
            };
            for opts in all_options() {
                for id in MeasureId::ALL {
                    let pm = compute_measure(id, &agg, &opts).map_err(|e| format!("seed {seed} {id}: {e}"))?;
                    pm.check_invariants().map_err(|e| format!("seed {seed} {id}: {e}"))?;
                    matrices += 1;
                }
            }
        }
    }
    Ok(format!("{matrices} matrices from {corpora} corpora"))
}

pub fn check_graph_algorithms(mst_graphs: u64, eigen_graphs: u64) -> Check {
    let mut r = graphs::rng(4242);
    for g in 0..mst_graphs {
        let n = r.random_range(1..=7);
        let density = r.random_range(0.2..1.0);
        let net = graphs::random_network(&mut r, n, density, g % 3 == 0);
        let tree = maximum_spanning_tree(&net);
        let got: f64 = tree.iter().map(|e| e.weight).sum();
        let best = graphs::best_spanning_weight(&net);
        if (got - best).abs() > 1e-9 {
            return Err(format!("graph {g}: spanning weight {got}, optimum {best}"));
        }
    }
    for g in 0..mst_graphs {
        let n = r.random_range(1..=40);
        let density = r.random_range(0.02..1.0);
        let net = graphs::random_network(&mut r, n, density, g % 4 == 0);
        let bb = filter_backbone(&net, 2);
        let want = (2 * n).min(net.edges().len());
        if bb.kept_edges().len() != want {
            return Err(format!("backbone {g}: {} edges, want {want}", bb.kept_edges().len()));
        }
        if graphs::is_connected(n, net.edges()) && !graphs::is_connected(n, bb.kept_edges()) {
            return Err(format!("backbone {g}: parent connected, backbone not"));
        }
    }
    let mut compared = 0;
    let mut attempts = 0;
    while compared < eigen_graphs {
        attempts += 1;
        let n = r.random_range(2..=10);
        let density = r.random_range(0.3..1.0);
        let net = graphs::random_network(&mut r, n, density, false);
        if net.edges().is_empty() {
            continue;
        }
        let (want, gap) = graphs::dominant_eigenvector(&net);
        // a repeated top eigenvalue has no unique eigenvector to compare with
        if gap < 1e-3 {
            continue;
        }
        let got = eigenvector_centrality(&net, EigenOptions::default()).map_err(|e| format!("eigen: {e}"))?;
        for k in 0..n {
            if (got[k] - want[k]).abs() > 1e-8 {
                return Err(format!("eigen graph {attempts}: vertex {k} got {}, oracle {}", got[k], want[k]));
            }
        }
        compared += 1;
    }
    Ok(format!(
        "{mst_graphs} spanning-tree graphs, {mst_graphs} backbones, {compared} eigenvector graphs ({} skipped as degenerate)",
        attempts - compared
    ))
}

pub fn check_statistics(pairs: u64) -> Check {
    let mut r = graphs::rng(777);
    let mut undefined = 0;
    for k in 0..pairs {
        let n = r.random_range(2..=40);
        // continuous, heavily tied, lightly tied, constant
        let mut draw = |kind: u64| -> Vec<f64> {
            match kind {
                0 => (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
                1 => (0..n).map(|_| r.random_range(0..4) as f64).collect(),
                2 => (0..n).map(|_| r.random_range(0..100) as f64 / 10.0).collect(),
                _ => vec![r.random_range(0..3) as f64; n],
            }
        };
        let x = draw(if k % 10 == 9 { 3 } else { k % 3 });
        let y = draw(if k % 13 == 12 { 3 } else { (k / 3) % 3 });
        for (name, got, want) in [
            ("pearson", pearson(&x, &y).unwrap(), stats::pearson(&x, &y)),
            ("spearman", spearman(&x, &y).unwrap(), stats::spearman(&x, &y)),
        ] {
            match (got, want) {
                (None, None) => undefined += 1,
                (Some(g), Some(w)) if (g - w).abs() <= 1e-12 => {}
                _ => return Err(format!("pair {k} {name}: got {got:?}, oracle {want:?}")),
            }
        }
    }
    Ok(format!("{pairs} pairs, {undefined} undefined results agreed"))
}

/// Mean proximity inside blocks and across blocks.
pub fn block_means(values: &ndarray::Array2<f64>, blocks: &[usize]) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            if blocks[i] == blocks[j] {
                intra += values[[i, j]];
                ni += 1;
            } else {
                inter += values[[i, j]];
                nx += 1;
            }
        }
    }
    (intra / ni as f64, inter / nx as f64)
}

pub fn check_planted(seeds: u64) -> Check {
    let mut worst = f64::INFINITY;
    for seed in 0..seeds {
        let (corpus, blocks) = planted_blocks(seed, PlantedSpec::default());
        let agg = aggregate_corpus(&corpus, &[], None).map_err(|e| e.to_string())?;
        for id in [MeasureId::A1, MeasureId::B1, MeasureId::C1, MeasureId::D1] {
            let pm = compute_measure(id, &agg, &MeasureOptions::default()).map_err(|e| e.to_string())?;
            let (intra, inter) = block_means(&pm.values, &blocks);
            if intra <= inter {
                return Err(format!("seed {seed} {id}: intra {intra} <= inter {inter}"));
            }
            worst = worst.min(intra - inter);
        }
    }
    Ok(format!("{seeds} seeds x 4 measures, smallest margin {worst:.4}"))
}

/// Every file under `root` except the manifest, by relative path.
pub fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    out.insert(rel, std::fs::read(&p).unwrap());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn check_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = PlantedSpec {
        patents: 300,
        first_year: 1976,
        last_year: 2006,
        ..PlantedSpec::default()
    };
    let (corpus, _) = planted_blocks(5, spec);
    let input = dir.path().join("patents.csv");
    let mut buf = Vec::new();
    techmap::corpus::write_corpus(&corpus, &mut buf).map_err(|e| e.to_string())?;
    std::fs::write(&input, buf).map_err(|e| e.to_string())?;

    let mut trees = Vec::new();
    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let config = PipelineConfig::new(&input, dir.path().join(run));
        let m = run_pipeline(&config).map_err(|e| format!("run {run}: {e}"))?;
        trees.push(tree_bytes(&config.output_dir));
        manifests.push((m.config_digest, m.input_digest, m.stages, m.warnings));
    }
    if trees[0].keys().ne(trees[1].keys()) {
        return Err("runs wrote different file sets".into());
    }
    for (k, v) in &trees[0] {
        if &trees[1][k] != v {
            return Err(format!("{k} differs between runs"));
        }
    }
    if manifests[0] != manifests[1] {
        return Err("manifests differ beyond timestamps".into());
    }
    Ok(format!("{} files byte-identical across two cold runs", trees[0].len()))
}

/// Cell of a written table by row and column label.
fn table_cell(path: &Path, row: &str, col: &str) -> Result<f64, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    let c = header
        .iter()
        .position(|h| h == col)
        .ok_or_else(|| format!("{}: no column {col}", path.display()))?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if &rec[0] == row {
            return rec[c].parse().map_err(|_| format!("{}: cell {row}/{col} is {:?}", path.display(), &rec[c]));
        }
    }
    Err(format!("{}: no row {row}", path.display()))
}

pub const DATA_ENV: &str = "TECHMAP_USPTO_CONFIG";

/// Headline figures on the full patent data. `None` when no config is given.
pub fn check_real_data() -> Option<Check> {
    let path = std::env::var_os(DATA_ENV)?;
    Some((|| {
        let config = PipelineConfig::from_file(&path).map_err(|e| e.to_string())?;
        run_pipeline(&config).map_err(|e| e.to_string())?;
        let report = config.layout().report_dir();
        let mut checks = vec![
            ("A1 x B1 edge weights", table_cell(&report.join("table3.csv"), "A1", "B1")?, 0.915),
            ("A1 degree vs patents", table_cell(&report.join("table5.csv"), "A1", "degree_vs_patents")?, 0.857),
        ];
        let t2 = report.join("table2_A1.csv");
        for (row, col, want) in [
            ("1987-1996", "1977-1986", 0.952),
            ("1997-2006", "1977-1986", 0.894),
            ("1976-2006", "1977-1986", 0.937),
            ("1997-2006", "1987-1996", 0.951),
            ("1976-2006", "1987-1996", 0.977),
            ("1976-2006", "1997-2006", 0.987),
        ] {
            checks.push(("A1 temporal", table_cell(&t2, row, col)?, want));
        }
        let off: Vec<String> = checks
            .iter()
            .filter(|(_, got, want)| (got - want).abs() > 0.02)
            .map(|(name, got, want)| format!("{name}: {got} vs {want}"))
            .collect();
        if off.is_empty() {
            Ok(format!("{} figures within 0.02", checks.len()))
        } else {
            Err(off.join("; "))
        }
    })())
}
