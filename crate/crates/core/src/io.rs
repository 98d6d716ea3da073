//! On-disk formats for intermediate artifacts.
//!
//! * Matrix file: `,`-delimited; the header row and first column list class
//!   codes, the corner cell holds the measure id; values use 12 significant
//!   digits.
//! * Aggregate directory: one delimited file with header per structure
//!   (see [`AGGREGATE_FILES`]).
//! * Class stats file: `class,patent_count,forward_citations`.
//!
//! Renderers return bytes so callers decide where and how to write them;
//! [`write_atomic`] writes through a temporary file and a rename.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;

use crate::aggregate::{AgentClassMatrix, Aggregates, CitationAggregate, ClassStats, CoClassCounts};
use crate::corpus::{AgentKind, ClassUniverse, PeriodSpec};
use crate::error::{Error, Result};
use crate::measures::{MeasureId, ProximityMatrix};
use crate::numfmt::format_sig;

pub const AGGREGATE_FILES: [&str; 10] = [
    "universe.csv",
    "citations_class.csv",
    "citations_patent.csv",
    "coclass.csv",
    "coclass_multi.csv",
    "agents_inventor.csv",
    "agents_organization.csv",
    "agents_country.csv",
    "class_stats.csv",
    "totals.csv",
];

/// Writes `bytes` to `path` via a sibling temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

struct Table {
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<const K: usize>(header: [&str; K]) -> Table {
        Table {
            rows: vec![header.iter().map(|s| s.to_string()).collect()],
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn into_bytes(self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.write_record(row).expect("writing to memory");
        }
        w.into_inner().expect("flushing to memory")
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            stage: "aggregate".into(),
            path: path.to_path_buf(),
        });
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let got = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Schema(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            header,
            got.iter().collect::<Vec<_>>()
        )));
    }
    rdr.records()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

fn parse_num<T: std::str::FromStr>(path: &Path, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::Schema(format!("{}: cannot parse `{field}`", path.display())))
}

fn class_index(universe: &ClassUniverse, path: &Path, code: &str) -> Result<usize> {
    universe
        .index_of(code)
        .ok_or_else(|| Error::UniverseMismatch(format!("{}: unknown class `{code}`", path.display())))
}

pub fn render_matrix(pm: &ProximityMatrix) -> Vec<u8> {
    let n = pm.len();
    let codes = pm.universe.codes();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![pm.measure.to_string()];
    header.extend(codes.iter().cloned());
    w.write_record(&header).expect("writing to memory");
    for (i, code) in codes.iter().enumerate() {
        let mut row = Vec::with_capacity(n + 1);
        row.push(code.clone());
        row.extend((0..n).map(|j| format_sig(pm.values[[i, j]], 12)));
        w.write_record(&row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

pub fn read_matrix(path: &Path, period: Option<PeriodSpec>) -> Result<ProximityMatrix> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            stage: "measure".into(),
            path: path.to_path_buf(),
        });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: empty matrix file", path.display())))?
        .map_err(|e| Error::csv(path, e))?;
    let measure: MeasureId = header.get(0).unwrap_or("").parse()?;
    let codes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let universe = ClassUniverse::from_codes(codes.clone())?;
    if universe.codes() != codes.as_slice() {
        return Err(Error::Schema(format!("{}: class codes must be sorted and unique", path.display())));
    }
    let n = codes.len();
    let mut values = Array2::zeros((n, n));
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if i >= n || rec.get(0) != Some(codes[i].as_str()) || rec.len() != n + 1 {
            return Err(Error::Schema(format!("{}: malformed row {}", path.display(), i + 2)));
        }
        for j in 0..n {
            values[[i, j]] = parse_num(path, &rec[j + 1])?;
        }
    }
    ProximityMatrix::new(measure, period, universe, values)
}

pub fn render_class_stats(universe: &ClassUniverse, stats: &ClassStats) -> Vec<u8> {
    let mut t = Table::new(["class", "patent_count", "forward_citations"]);
    for (i, code) in universe.codes().iter().enumerate() {
        t.push(vec![
            code.clone(),
            stats.patent_count[i].to_string(),
            stats.forward_citations[i].to_string(),
        ]);
    }
    t.into_bytes()
}

pub fn read_class_stats(path: &Path) -> Result<(ClassUniverse, ClassStats)> {
    let rows = read_rows(path, &["class", "patent_count", "forward_citations"])?;
    let codes: Vec<String> = rows.iter().map(|r| r[0].to_string()).collect();
    let universe = ClassUniverse::from_codes(codes.clone())?;
    if universe.codes() != codes.as_slice() {
        return Err(Error::Schema(format!("{}: classes must be sorted and unique", path.display())));
    }
    let mut stats = ClassStats {
        patent_count: Vec::with_capacity(rows.len()),
        forward_citations: Vec::with_capacity(rows.len()),
    };
    for r in &rows {
        stats.patent_count.push(parse_num(path, &r[1])?);
        stats.forward_citations.push(parse_num(path, &r[2])?);
    }
    Ok((universe, stats))
}

/// File name and contents of every aggregate file.
pub fn render_aggregates(agg: &Aggregates) -> Vec<(String, Vec<u8>)> {
    let codes = agg.universe.codes();
    let n = codes.len();
    let mut files = Vec::new();

    let mut t = Table::new(["index", "code"]);
    for (i, c) in codes.iter().enumerate() {
        t.push(vec![i.to_string(), c.clone()]);
    }
    files.push((AGGREGATE_FILES[0].to_string(), t.into_bytes()));

    let mut t = Table::new(["citing_class", "cited_class", "count"]);
    let c2c = agg.citations.class_to_class();
    for i in 0..n {
        for j in 0..n {
            if c2c[[i, j]] > 0 {
                t.push(vec![codes[i].clone(), codes[j].clone(), c2c[[i, j]].to_string()]);
            }
        }
    }
    files.push((AGGREGATE_FILES[1].to_string(), t.into_bytes()));

    let mut t = Table::new(["citing_class", "cited_patent", "count"]);
    let ids = agg.citations.cited_ids();
    for (i, code) in codes.iter().enumerate() {
        for &(q, x) in agg.citations.class_to_patent(i) {
            t.push(vec![code.clone(), ids[q as usize].clone(), x.to_string()]);
        }
    }
    files.push((AGGREGATE_FILES[2].to_string(), t.into_bytes()));

    let mut t = Table::new(["class_a", "class_b", "shared"]);
    for i in 0..n {
        for j in i..n {
            let s = agg.coclass.shared[[i, j]];
            if s > 0 {
                t.push(vec![codes[i].clone(), codes[j].clone(), s.to_string()]);
            }
        }
    }
    files.push((AGGREGATE_FILES[3].to_string(), t.into_bytes()));

    let mut t = Table::new(["class", "patents"]);
    for (i, code) in codes.iter().enumerate() {
        t.push(vec![code.clone(), agg.coclass.multi_class_counts[i].to_string()]);
    }
    files.push((AGGREGATE_FILES[4].to_string(), t.into_bytes()));

    for (k, kind) in AgentKind::ALL.into_iter().enumerate() {
        let mut t = Table::new(["agent", "class", "count"]);
        for (agent, i, x) in agg.agents(kind).entries() {
            t.push(vec![agent.to_string(), codes[i].clone(), x.to_string()]);
        }
        files.push((AGGREGATE_FILES[5 + k].to_string(), t.into_bytes()));
    }

    files.push((AGGREGATE_FILES[8].to_string(), render_class_stats(&agg.universe, &agg.stats)));

    let mut t = Table::new(["name", "value"]);
    t.push(vec!["period".into(), agg.period.map(|p| p.to_string()).unwrap_or_default()]);
    t.push(vec!["records".into(), agg.records.to_string()]);
    t.push(vec!["unclassified".into(), agg.unclassified.to_string()]);
    t.push(vec!["multi_class_total".into(), agg.coclass.multi_class_total.to_string()]);
    files.push((AGGREGATE_FILES[9].to_string(), t.into_bytes()));
    files
}

pub fn read_aggregates(dir: &Path) -> Result<Aggregates> {
    let path = dir.join(AGGREGATE_FILES[0]);
    let rows = read_rows(&path, &["index", "code"])?;
    let codes: Vec<String> = rows.iter().map(|r| r[1].to_string()).collect();
    let universe = ClassUniverse::from_codes(codes.clone())?;
    if universe.codes() != codes.as_slice() {
        return Err(Error::Schema(format!("{}: classes must be sorted and unique", path.display())));
    }
    let n = universe.len();

    let path = dir.join(AGGREGATE_FILES[1]);
    let mut c2c = Array2::<u64>::zeros((n, n));
    for r in read_rows(&path, &["citing_class", "cited_class", "count"])? {
        let i = class_index(&universe, &path, &r[0])?;
        let j = class_index(&universe, &path, &r[1])?;
        c2c[[i, j]] = parse_num(&path, &r[2])?;
    }

    let path = dir.join(AGGREGATE_FILES[2]);
    let patent_rows = read_rows(&path, &["citing_class", "cited_patent", "count"])?;
    let cited: BTreeSet<&str> = patent_rows.iter().map(|r| r.get(1).unwrap_or("")).collect();
    let cited_ids: Vec<String> = cited.iter().map(|s| s.to_string()).collect();
    let cited_index: HashMap<&str, u32> = cited.iter().enumerate().map(|(k, s)| (*s, k as u32)).collect();
    let mut c2p: Vec<Vec<(u32, u64)>> = vec![Vec::new(); n];
    for r in &patent_rows {
        let i = class_index(&universe, &path, &r[0])?;
        c2p[i].push((cited_index[&r[1]], parse_num(&path, &r[2])?));
    }
    for row in &mut c2p {
        row.sort_unstable();
    }
    let citations = CitationAggregate::from_parts(c2c, cited_ids, c2p)?;

    let path = dir.join(AGGREGATE_FILES[3]);
    let mut shared = Array2::<u64>::zeros((n, n));
    for r in read_rows(&path, &["class_a", "class_b", "shared"])? {
        let i = class_index(&universe, &path, &r[0])?;
        let j = class_index(&universe, &path, &r[1])?;
        let s: u64 = parse_num(&path, &r[2])?;
        shared[[i, j]] = s;
        shared[[j, i]] = s;
    }
    let path = dir.join(AGGREGATE_FILES[4]);
    let mut multi_class_counts = vec![0u64; n];
    for r in read_rows(&path, &["class", "patents"])? {
        let i = class_index(&universe, &path, &r[0])?;
        multi_class_counts[i] = parse_num(&path, &r[1])?;
    }

    let mut agents = Vec::with_capacity(3);
    for (k, kind) in AgentKind::ALL.into_iter().enumerate() {
        let path = dir.join(AGGREGATE_FILES[5 + k]);
        let entries = read_rows(&path, &["agent", "class", "count"])?
            .iter()
            .map(|r| Ok((r[0].to_string(), class_index(&universe, &path, &r[1])?, parse_num(&path, &r[2])?)))
            .collect::<Result<Vec<_>>>()?;
        agents.push(AgentClassMatrix::from_entries(kind, n, entries)?);
    }

    let (stats_universe, stats) = read_class_stats(&dir.join(AGGREGATE_FILES[8]))?;
    if stats_universe != universe {
        return Err(Error::UniverseMismatch("class_stats.csv differs from universe.csv".into()));
    }

    let path = dir.join(AGGREGATE_FILES[9]);
    let totals: HashMap<String, String> = read_rows(&path, &["name", "value"])?
        .iter()
        .map(|r| (r[0].to_string(), r[1].to_string()))
        .collect();
    let total = |key: &str| -> Result<u64> {
        let v = totals
            .get(key)
            .ok_or_else(|| Error::Schema(format!("{}: missing `{key}`", path.display())))?;
        parse_num(&path, v)
    };
    let period = match totals.get("period").map(String::as_str) {
        None | Some("") => None,
        Some(p) => Some(p.parse()?),
    };
    let coclass = CoClassCounts {
        class_patent_counts: (0..n).map(|i| shared[[i, i]]).collect(),
        shared,
        multi_class_counts,
        multi_class_total: total("multi_class_total")?,
    };
    let mut agents = agents.into_iter();
    Ok(Aggregates {
        universe,
        period,
        citations,
        coclass,
        inventors: agents.next().expect("three agent kinds"),
        organizations: agents.next().expect("three agent kinds"),
        countries: agents.next().expect("three agent kinds"),
        stats,
        records: total("records")?,
        unclassified: total("unclassified")?,
    })
}

/// Writes every aggregate file into `dir`.
pub fn write_aggregates(agg: &Aggregates, dir: &Path) -> Result<()> {
    for (name, bytes) in render_aggregates(agg) {
        write_atomic(&dir.join(name), &bytes)?;
    }
    Ok(())
}
