//! Patent records, reading and writing corpus files, period slicing and the
//! class universe.
//!
//! A corpus file is delimited text with a header row. Multi-valued cells
//! (classes, references, agents) are split on a sub-delimiter. The normalized
//! form written by [`write_corpus`] uses `,` between columns, `|` inside
//! cells, sorted cell values and the canonical column names of
//! [`Schema::default`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One granted patent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentRecord {
    pub patent_id: String,
    pub grant_year: i32,
    pub classes: BTreeSet<String>,
    pub references: BTreeSet<String>,
    pub inventors: BTreeSet<String>,
    pub organizations: BTreeSet<String>,
    pub countries: BTreeSet<String>,
}

impl PatentRecord {
    pub fn new(patent_id: impl Into<String>, grant_year: i32) -> Self {
        PatentRecord {
            patent_id: patent_id.into(),
            grant_year,
            classes: BTreeSet::new(),
            references: BTreeSet::new(),
            inventors: BTreeSet::new(),
            organizations: BTreeSet::new(),
            countries: BTreeSet::new(),
        }
    }

    pub fn with_classes<I, S>(mut self, classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.classes.extend(classes.into_iter().map(Into::into));
        self
    }

    pub fn with_references<I, S>(mut self, refs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.references.extend(refs.into_iter().map(Into::into));
        self
    }

    pub fn with_agents<I, S>(mut self, kind: AgentKind, agents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set = match kind {
            AgentKind::Inventor => &mut self.inventors,
            AgentKind::Organization => &mut self.organizations,
            AgentKind::Country => &mut self.countries,
        };
        set.extend(agents.into_iter().map(Into::into));
        self
    }

    pub fn agents(&self, kind: AgentKind) -> &BTreeSet<String> {
        match kind {
            AgentKind::Inventor => &self.inventors,
            AgentKind::Organization => &self.organizations,
            AgentKind::Country => &self.countries,
        }
    }
}

/// The three kinds of innovation agent that carry diversification measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Inventor,
    Organization,
    Country,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Inventor, AgentKind::Organization, AgentKind::Country];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Inventor => "inventor",
            AgentKind::Organization => "organization",
            AgentKind::Country => "country",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inventor" | "inventors" => Ok(AgentKind::Inventor),
            "organization" | "organizations" | "assignee" => Ok(AgentKind::Organization),
            "country" | "countries" => Ok(AgentKind::Country),
            other => Err(Error::Config(format!("unknown agent kind `{other}`"))),
        }
    }
}

/// Inclusive range of grant years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PeriodSpec {
    start_year: i32,
    end_year: i32,
}

impl PeriodSpec {
    pub fn new(start_year: i32, end_year: i32) -> Result<Self> {
        if start_year > end_year {
            return Err(Error::InvalidPeriod {
                start: start_year,
                end: end_year,
            });
        }
        Ok(PeriodSpec {
            start_year,
            end_year,
        })
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.end_year
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start_year <= year && year <= self.end_year
    }

    pub fn span(&self) -> i64 {
        i64::from(self.end_year) - i64::from(self.start_year)
    }

    pub fn covers(&self, other: &PeriodSpec) -> bool {
        self.start_year <= other.start_year && other.end_year <= self.end_year
    }
}

impl fmt::Display for PeriodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start_year, self.end_year)
    }
}

impl FromStr for PeriodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("period `{s}` is not of the form START-END"));
        let (a, b) = s.trim().split_once('-').ok_or_else(bad)?;
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = b.trim().parse().map_err(|_| bad())?;
        PeriodSpec::new(start, end)
    }
}

impl TryFrom<String> for PeriodSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PeriodSpec> for String {
    fn from(p: PeriodSpec) -> String {
        p.to_string()
    }
}

/// Column names for each record field in an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Columns {
    pub id: String,
    pub year: String,
    pub classes: String,
    pub references: String,
    pub inventors: String,
    pub organizations: String,
    pub countries: String,
}

impl Default for Columns {
    fn default() -> Self {
        Columns {
            id: "patent_id".into(),
            year: "grant_year".into(),
            classes: "classes".into(),
            references: "references".into(),
            inventors: "inventors".into(),
            organizations: "organizations".into(),
            countries: "countries".into(),
        }
    }
}

/// How to read a delimited patent file. The default is the normalized corpus layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub delimiter: char,
    pub sub_delimiter: char,
    pub columns: Columns,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            delimiter: ',',
            sub_delimiter: '|',
            columns: Columns::default(),
        }
    }
}

impl Schema {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(Error::Schema("delimiter must be a single ASCII character".into()));
        }
        if self.delimiter == self.sub_delimiter {
            return Err(Error::Schema("delimiter and sub_delimiter must differ".into()));
        }
        Ok(())
    }
}

/// An in-memory, validated collection of patent records in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<PatentRecord>,
}

impl Corpus {
    /// Validates id uniqueness and nonempty class sets.
    pub fn from_records(records: Vec<PatentRecord>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.classes.is_empty()) {
            return Err(Error::Schema(format!("patent `{}` has no classes", r.patent_id)));
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        for r in &records {
            *seen.entry(r.patent_id.as_str()).or_default() += 1;
        }
        let mut dups: Vec<String> = seen
            .into_iter()
            .filter(|&(_, n)| n > 1)
            .map(|(id, _)| id.to_string())
            .collect();
        if !dups.is_empty() {
            dups.sort();
            return Err(Error::DuplicateIds(dups));
        }
        Ok(Corpus { records })
    }

    pub fn records(&self) -> &[PatentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PatentRecord> {
        self.records.iter()
    }

    /// Records granted within `period`, in their original order.
    pub fn slice_period(&self, period: PeriodSpec) -> Corpus {
        Corpus {
            records: self
                .records
                .iter()
                .filter(|r| period.contains(r.grant_year))
                .cloned()
                .collect(),
        }
    }

    /// Number of records none of whose classes are admitted by `universe`.
    pub fn count_unclassified(&self, universe: &ClassUniverse) -> usize {
        self.records
            .iter()
            .filter(|r| r.classes.iter().all(|c| universe.index_of(c).is_none()))
            .count()
    }

    pub fn year_range(&self) -> Option<PeriodSpec> {
        let min = self.records.iter().map(|r| r.grant_year).min()?;
        let max = self.records.iter().map(|r| r.grant_year).max()?;
        PeriodSpec::new(min, max).ok()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a PatentRecord;
    type IntoIter = std::slice::Iter<'a, PatentRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn split_cell(cell: &str, sub: char) -> BTreeSet<String> {
    cell.split(sub)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses a corpus from any reader. `source` labels errors.
pub fn parse_corpus_from_reader<R: Read>(reader: R, schema: &Schema, source: &Path) -> Result<Corpus> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::csv(source, e))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let c = &schema.columns;
    let idx_id = col(&c.id)?;
    let idx_year = col(&c.year)?;
    let idx_classes = col(&c.classes)?;
    let idx_refs = col(&c.references)?;
    let idx_inv = col(&c.inventors)?;
    let idx_org = col(&c.organizations)?;
    let idx_cty = col(&c.countries)?;

    let sub = schema.sub_delimiter;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(source, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");

        let patent_id = field(idx_id).to_string();
        if patent_id.is_empty() {
            return Err(Error::Row {
                line,
                message: "empty patent id".into(),
            });
        }
        let year_cell = field(idx_year);
        let grant_year: i32 = year_cell.parse().map_err(|_| Error::Row {
            line,
            message: format!("unparseable year `{year_cell}`"),
        })?;
        let classes = split_cell(field(idx_classes), sub);
        if classes.is_empty() {
            return Err(Error::Row {
                line,
                message: format!("patent `{patent_id}` has no classes"),
            });
        }
        records.push(PatentRecord {
            patent_id,
            grant_year,
            classes,
            references: split_cell(field(idx_refs), sub),
            inventors: split_cell(field(idx_inv), sub),
            organizations: split_cell(field(idx_org), sub),
            countries: split_cell(field(idx_cty), sub),
        });
    }
    Corpus::from_records(records)
}

pub fn parse_corpus(path: impl AsRef<Path>, schema: &Schema) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_from_reader(std::io::BufReader::new(file), schema, path)
}

/// Writes the normalized corpus layout.
pub fn write_corpus<W: Write>(corpus: &Corpus, writer: W) -> Result<()> {
    let schema = Schema::default();
    let label = Path::new("<corpus output>");
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter as u8)
        .from_writer(writer);
    let c = &schema.columns;
    w.write_record([
        &c.id,
        &c.year,
        &c.classes,
        &c.references,
        &c.inventors,
        &c.organizations,
        &c.countries,
    ])
    .map_err(|e| Error::csv(label, e))?;
    let join = |s: &BTreeSet<String>| s.iter().map(String::as_str).collect::<Vec<_>>().join("|");
    for r in corpus {
        w.write_record([
            r.patent_id.clone(),
            r.grant_year.to_string(),
            join(&r.classes),
            join(&r.references),
            join(&r.inventors),
            join(&r.organizations),
            join(&r.countries),
        ])
        .map_err(|e| Error::csv(label, e))?;
    }
    w.flush().map_err(|e| Error::io(label, e))?;
    Ok(())
}

/// Sorted, unique class codes admitted as network vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassUniverse {
    codes: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassUniverse {
    /// Builds a universe from arbitrary codes (sorted and deduplicated here).
    pub fn from_codes<I, S>(codes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = codes.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::EmptyUniverse);
        }
        let codes: Vec<String> = set.into_iter().collect();
        let index = codes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(ClassUniverse { codes, index })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn code(&self, i: usize) -> &str {
        &self.codes[i]
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Admitted class indices of a record, ascending.
    pub fn admitted(&self, record: &PatentRecord) -> Vec<usize> {
        // BTreeSet iteration is sorted and so is the universe, so indices ascend.
        record
            .classes
            .iter()
            .filter_map(|c| self.index_of(c))
            .collect()
    }
}

/// Observed class codes minus those matching any glob-style exclusion pattern.
pub fn build_class_universe(corpus: &Corpus, exclusion_patterns: &[String]) -> Result<ClassUniverse> {
    let patterns = exclusion_patterns
        .iter()
        .map(|p| {
            glob::Pattern::new(p).map_err(|e| Error::Pattern {
                pattern: p.clone(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let observed: BTreeSet<&str> = corpus
        .iter()
        .flat_map(|r| r.classes.iter().map(String::as_str))
        .filter(|code| !patterns.iter().any(|p| p.matches(code)))
        .collect();
    ClassUniverse::from_codes(observed)
}
