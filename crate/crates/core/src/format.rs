//! Text formats for control tables, cost grids and CSV output.
//!
//! Table and cost files share a header of `key=value` lines terminated by a
//! line reading `data`:
//!
//! ```text
//! kind=control-table
//! version=0.1.0
//! eta=0.3
//! k=1
//! T=1.5
//! M=300
//! N=1001
//! dt=0.005
//! dr=0.001
//! sigma=0.001
//! seed=42
//! data
//! ```
//!
//! A control table body has `M` lines of `N` characters from `{0, 1}`. A
//! cost grid body has `M + 1` lines of `N` space-separated values with 17
//! significant digits. Header floats use the shortest round-trip form, so
//! reading a file back reproduces the matrices and metadata bit for bit.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::config::SolveConfig;
use crate::error::{Error, Result};
use crate::policy::{Control, ControlTable};
use crate::solver::CostGrid;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const TABLE_KIND: &str = "control-table";
const COST_KIND: &str = "cost-grid";
const HEADER_KEYS: [&str; 11] = ["kind", "version", "eta", "k", "T", "M", "N", "dt", "dr", "sigma", "seed"];

fn write_header<W: Write>(w: &mut W, kind: &str, cfg: &SolveConfig) -> std::io::Result<()> {
    writeln!(w, "kind={kind}")?;
    writeln!(w, "version={VERSION}")?;
    writeln!(w, "eta={:?}", cfg.eta())?;
    writeln!(w, "k={:?}", cfg.k())?;
    writeln!(w, "T={:?}", cfg.horizon())?;
    writeln!(w, "M={}", cfg.steps())?;
    writeln!(w, "N={}", cfg.points())?;
    writeln!(w, "dt={:?}", cfg.dt())?;
    writeln!(w, "dr={:?}", cfg.dr())?;
    writeln!(w, "sigma={:?}", cfg.sigma_delta())?;
    writeln!(w, "seed={}", cfg.seed())?;
    writeln!(w, "data")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(line) => {
                self.number += 1;
                Ok(Some(line?))
            }
        }
    }

    fn expect_line(&mut self, what: &str) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| parse_err(self.number + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn field<T: std::str::FromStr>(fields: &HashMap<String, (usize, String)>, key: &str) -> Result<T> {
    let (line, raw) = &fields[key];
    raw.parse()
        .map_err(|_| parse_err(*line, format!("invalid value for {key}: {raw:?}")))
}

fn read_header<R: BufRead>(lines: &mut Lines<R>, kind: &str) -> Result<SolveConfig> {
    let mut fields: HashMap<String, (usize, String)> = HashMap::new();
    loop {
        let line = lines.expect_line("header or data marker")?;
        let line = line.trim();
        if line == "data" {
            break;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(lines.number, format!("expected key=value, got {line:?}")))?;
        if !HEADER_KEYS.contains(&key) {
            return Err(parse_err(lines.number, format!("unknown header key {key:?}")));
        }
        if fields.insert(key.to_string(), (lines.number, value.to_string())).is_some() {
            return Err(parse_err(lines.number, format!("duplicate header key {key:?}")));
        }
    }
    let end = lines.number;
    for key in HEADER_KEYS {
        if !fields.contains_key(key) {
            return Err(parse_err(end, format!("missing header key {key:?}")));
        }
    }
    let found: String = field(&fields, "kind")?;
    if found != kind {
        return Err(parse_err(fields["kind"].0, format!("expected kind {kind}, found {found}")));
    }
    let cfg = SolveConfig::new(
        field(&fields, "eta")?,
        field(&fields, "k")?,
        field(&fields, "T")?,
        field(&fields, "M")?,
        field(&fields, "N")?,
    )
    .and_then(|c| c.with_sigma_delta(field(&fields, "sigma")?))
    .map_err(|e| parse_err(end, e.to_string()))?
    .with_seed(field(&fields, "seed")?);
    for (key, derived) in [("dt", cfg.dt()), ("dr", cfg.dr())] {
        let stated: f64 = field(&fields, key)?;
        if (stated - derived).abs() > 1e-12 * derived {
            return Err(parse_err(
                fields[key].0,
                format!("{key}={stated} is inconsistent with the grid size ({derived})"),
            ));
        }
    }
    Ok(cfg)
}

fn expect_end<R: BufRead>(lines: &mut Lines<R>) -> Result<()> {
    while let Some(line) = lines.next_line()? {
        if !line.trim().is_empty() {
            return Err(parse_err(lines.number, "trailing data after the last row"));
        }
    }
    Ok(())
}

pub fn write_table<W: Write>(w: &mut W, table: &ControlTable) -> std::io::Result<()> {
    write_header(w, TABLE_KIND, table.meta())?;
    let mut line = String::with_capacity(table.points() + 1);
    for j in 0..table.steps() {
        line.clear();
        line.extend(table.row(j).iter().map(|u| if *u == Control::Feedback { '0' } else { '1' }));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_table<R: BufRead>(r: R) -> Result<ControlTable> {
    let mut lines = Lines {
        inner: r.lines(),
        number: 0,
    };
    let cfg = read_header(&mut lines, TABLE_KIND)?;
    let mut bits = Vec::with_capacity(cfg.steps() * cfg.points());
    for j in 0..cfg.steps() {
        let line = lines.expect_line(&format!("table row {j}"))?;
        let row = line.trim_end();
        if row.len() != cfg.points() {
            return Err(parse_err(
                lines.number,
                format!("row {j} has {} entries, expected {}", row.len(), cfg.points()),
            ));
        }
        for c in row.chars() {
            bits.push(match c {
                '0' => Control::Feedback,
                '1' => Control::NoFeedback,
                other => return Err(parse_err(lines.number, format!("invalid control {other:?}"))),
            });
        }
    }
    expect_end(&mut lines)?;
    ControlTable::new(cfg, bits)
}

pub fn write_costs<W: Write>(w: &mut W, costs: &CostGrid) -> std::io::Result<()> {
    let cfg = costs.meta();
    write_header(w, COST_KIND, cfg)?;
    for j in 0..=cfg.steps() {
        let row: Vec<String> = costs.row(j).iter().map(|v| sci(*v)).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_costs<R: BufRead>(r: R) -> Result<CostGrid> {
    let mut lines = Lines {
        inner: r.lines(),
        number: 0,
    };
    let cfg = read_header(&mut lines, COST_KIND)?;
    let mut values = Vec::with_capacity((cfg.steps() + 1) * cfg.points());
    for j in 0..=cfg.steps() {
        let line = lines.expect_line(&format!("cost row {j}"))?;
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lines.number, format!("invalid number {tok:?}")))?;
            values.push(v);
        }
        if values.len() - before != cfg.points() {
            return Err(parse_err(
                lines.number,
                format!("row {j} has {} entries, expected {}", values.len() - before, cfg.points()),
            ));
        }
    }
    expect_end(&mut lines)?;
    CostGrid::new(cfg, values)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn save_table(path: &Path, table: &ControlTable) -> Result<()> {
    let mut w = create(path)?;
    write_table(&mut w, table)?;
    w.flush()?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<ControlTable> {
    read_table(BufReader::new(File::open(path)?))
}

pub fn save_costs(path: &Path, costs: &CostGrid) -> Result<()> {
    let mut w = create(path)?;
    write_costs(&mut w, costs)?;
    w.flush()?;
    Ok(())
}

pub fn load_costs(path: &Path) -> Result<CostGrid> {
    read_costs(BufReader::new(File::open(path)?))
}

/// Ordered `key: value` lines written as `# ` comments at the top of a CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("version", VERSION);
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with_config(&mut self, cfg: &SolveConfig) -> &mut Self {
        self.push("eta", format!("{:?}", cfg.eta()))
            .push("k", format!("{:?}", cfg.k()))
            .push("T", format!("{:?}", cfg.horizon()))
            .push("dt", format!("{:?}", cfg.dt()))
            .push("dr", format!("{:?}", cfg.dr()))
            .push("M", cfg.steps())
            .push("N", cfg.points())
            .push("sigma", format!("{:?}", cfg.sigma_delta()))
            .push("seed", cfg.seed())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}
