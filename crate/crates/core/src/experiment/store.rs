//! CSV persistence. Every file starts with a `# gaitevo <kind> v<N>` line,
//! followed by a header row. Files are replaced atomically.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};

use crate::fitness::{Fitness, Outcome};
use crate::nsga2::EvalRecord;
use crate::params::{Genome, GENOME_LEN};

pub const RUNLOG_SCHEMA: &str = "# gaitevo runlog v1";
pub const REEVAL_SCHEMA: &str = "# gaitevo reeval v1";

/// In-memory table with a schema line and header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(kind: &str, header: &[&str]) -> Self {
        Self {
            schema: format!("# gaitevo {kind} v1"),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        writeln!(out, "{}", self.schema).expect("writing to memory");
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path, schema: &str, header: &[&str]) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, schema, header).with_context(|| format!("parsing {}", path.display()))
    }

    /// Reads any gaitevo table without checking its schema or header.
    pub fn read_any(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let first = text.lines().next().unwrap_or_default();
        if !first.starts_with("# gaitevo ") {
            bail!("{}: line 1: missing schema line", path.display());
        }
        let rest = text.split_once('\n').map_or("", |(_, r)| r);
        let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| anyhow!("{}: line 2: {e}", path.display()))?
            .iter()
            .map(String::from)
            .collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        Self::parse(&text, first, &header_refs)
            .with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str, schema: &str, header: &[&str]) -> anyhow::Result<Self> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim_end() != schema {
            bail!("line 1: expected schema line {schema:?}, found {first:?}");
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(rest.as_bytes());
        let found: Vec<String> = rdr
            .headers()
            .map_err(|e| anyhow!("line 2: {e}"))?
            .iter()
            .map(String::from)
            .collect();
        if found != header {
            bail!("line 2: unexpected header {found:?}");
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() + 1);
                anyhow!("line {line}: {e}")
            })?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self {
            schema: schema.to_string(),
            header: found,
            rows,
        })
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

/// Row accessor that reports the file line on failure. Data rows start on
/// line 3.
pub struct Row<'a> {
    pub line: usize,
    cells: &'a [String],
    header: &'a [String],
}

impl<'a> Row<'a> {
    pub fn iter(table: &'a Table) -> impl Iterator<Item = Row<'a>> {
        table.rows.iter().enumerate().map(move |(i, cells)| Row {
            line: i + 3,
            cells,
            header: &table.header,
        })
    }

    pub fn str(&self, col: usize) -> &'a str {
        &self.cells[col]
    }

    pub fn parse<T: FromStr>(&self, col: usize) -> anyhow::Result<T>
    where
        T::Err: Display,
    {
        self.cells[col].parse().map_err(|e| {
            anyhow!(
                "line {}: column {} ({:?}): {e}",
                self.line,
                self.header[col],
                self.cells[col]
            )
        })
    }

    pub fn genome(&self, first_col: usize) -> anyhow::Result<Genome> {
        let mut v = [0.0; GENOME_LEN];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = self.parse(first_col + i)?;
        }
        Genome::new(v).map_err(|e| anyhow!("line {}: {e}", self.line))
    }

    pub fn outcome(&self, col: usize) -> anyhow::Result<Outcome> {
        Outcome::parse(self.str(col))
            .ok_or_else(|| anyhow!("line {}: unknown outcome {:?}", self.line, self.str(col)))
    }
}

pub fn genome_columns() -> Vec<String> {
    (0..GENOME_LEN).map(|i| format!("g{i}")).collect()
}

pub fn genome_cells(g: &Genome) -> impl Iterator<Item = String> + '_ {
    g.values().iter().map(|v| v.to_string())
}

fn header_refs(cols: &[String]) -> Vec<&str> {
    cols.iter().map(String::as_str).collect()
}

pub fn runlog_header() -> Vec<String> {
    let mut h = vec!["generation".to_string(), "eval_index".to_string()];
    h.extend(genome_columns());
    h.extend(
        [
            "speed_m_per_min",
            "stability",
            "surface",
            "seed",
            "terminated_by",
        ]
        .map(String::from),
    );
    h
}

pub fn runlog_table(records: &[EvalRecord]) -> Table {
    let header = runlog_header();
    let mut t = Table::new("runlog", &header_refs(&header));
    for r in records {
        let mut row = vec![r.generation.to_string(), r.eval_index.to_string()];
        row.extend(genome_cells(&r.genome));
        row.push(r.fitness.speed.to_string());
        row.push(r.fitness.stability.to_string());
        row.push(r.surface.clone());
        row.push(r.seed.to_string());
        row.push(r.outcome.as_str().to_string());
        t.push(row);
    }
    t
}

pub fn write_runlog(path: &Path, records: &[EvalRecord]) -> anyhow::Result<()> {
    runlog_table(records).write(path)
}

pub fn parse_runlog(table: &Table) -> anyhow::Result<Vec<EvalRecord>> {
    let g = 2;
    let f = g + GENOME_LEN;
    Row::iter(table)
        .map(|row| {
            Ok(EvalRecord {
                generation: row.parse(0)?,
                eval_index: row.parse(1)?,
                genome: row.genome(g)?,
                fitness: Fitness::new(row.parse(f)?, row.parse(f + 1)?),
                surface: row.str(f + 2).to_string(),
                seed: row.parse(f + 3)?,
                outcome: row.outcome(f + 4)?,
            })
        })
        .collect()
}

pub fn read_runlog(path: &Path) -> anyhow::Result<Vec<EvalRecord>> {
    let header = runlog_header();
    let table = Table::read(path, RUNLOG_SCHEMA, &header_refs(&header))?;
    parse_runlog(&table).with_context(|| format!("parsing {}", path.display()))
}

/// One re-evaluation of a front individual.
#[derive(Debug, Clone, PartialEq)]
pub struct ReevalRow {
    pub individual: String,
    pub training_surface: String,
    pub run: usize,
    pub eval_index: usize,
    pub eval_surface: String,
    pub repeat: usize,
    pub seed: u64,
    pub fitness: Fitness,
    pub outcome: Outcome,
    pub genome: Genome,
}

pub fn reeval_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "individual",
        "training_surface",
        "run",
        "eval_index",
        "eval_surface",
        "repeat",
        "seed",
        "speed_m_per_min",
        "stability",
        "terminated_by",
    ]
    .map(String::from)
    .to_vec();
    h.extend(genome_columns());
    h
}

pub fn write_reeval(path: &Path, rows: &[ReevalRow]) -> anyhow::Result<()> {
    let header = reeval_header();
    let mut t = Table::new("reeval", &header_refs(&header));
    for r in rows {
        let mut row = vec![
            r.individual.clone(),
            r.training_surface.clone(),
            r.run.to_string(),
            r.eval_index.to_string(),
            r.eval_surface.clone(),
            r.repeat.to_string(),
            r.seed.to_string(),
            r.fitness.speed.to_string(),
            r.fitness.stability.to_string(),
            r.outcome.as_str().to_string(),
        ];
        row.extend(genome_cells(&r.genome));
        t.push(row);
    }
    t.write(path)
}

pub fn read_reeval(path: &Path) -> anyhow::Result<Vec<ReevalRow>> {
    let header = reeval_header();
    let table = Table::read(path, REEVAL_SCHEMA, &header_refs(&header))?;
    Row::iter(&table)
        .map(|row| {
            Ok(ReevalRow {
                individual: row.str(0).to_string(),
                training_surface: row.str(1).to_string(),
                run: row.parse(2)?,
                eval_index: row.parse(3)?,
                eval_surface: row.str(4).to_string(),
                repeat: row.parse(5)?,
                seed: row.parse(6)?,
                fitness: Fitness::new(row.parse(7)?, row.parse(8)?),
                outcome: row.outcome(9)?,
                genome: row.genome(10)?,
            })
        })
        .collect::<anyhow::Result<_>>()
        .with_context(|| format!("parsing {}", path.display()))
}
