use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::{IOTable, Panel};
use crate::error::{Error, Result};

pub const LONG_FORMAT_HEADER: &str = "record_type,country,year,row_sector,col_sector_or_dest,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RecordType {
    Flow,
    Final,
    Output,
}

struct Record {
    kind: RecordType,
    country: String,
    year: i32,
    row: String,
    col: String,
    value: f64,
    line: usize,
}

#[derive(Default)]
struct TableBuilder {
    codes: Vec<String>,
    index: HashMap<String, usize>,
    outputs: Vec<f64>,
    flows: Vec<(String, String, f64, usize)>,
    finals: Vec<(String, String, f64, usize)>,
}

impl TableBuilder {
    fn push(&mut self, rec: Record) -> Result<()> {
        match rec.kind {
            RecordType::Output => {
                if self.index.contains_key(&rec.row) {
                    return Err(malformed(
                        rec.line,
                        format!("duplicate OUTPUT record for sector {}", rec.row),
                    ));
                }
                if rec.value < 0.0 {
                    return Err(malformed(rec.line, "negative gross output".into()));
                }
                self.index.insert(rec.row.clone(), self.codes.len());
                self.codes.push(rec.row);
                self.outputs.push(rec.value);
            }
            RecordType::Flow => {
                if rec.value < 0.0 {
                    return Err(malformed(rec.line, "negative intermediate flow".into()));
                }
                self.flows.push((rec.row, rec.col, rec.value, rec.line));
            }
            RecordType::Final => self.finals.push((rec.row, rec.col, rec.value, rec.line)),
        }
        Ok(())
    }

    fn sector(&self, code: &str, line: usize) -> Result<usize> {
        self.index
            .get(code)
            .copied()
            .ok_or_else(|| malformed(line, format!("sector {code} has no OUTPUT record")))
    }

    fn build(self, country: &str, year: i32) -> Result<IOTable> {
        let n = self.codes.len();
        let mut flows = DMatrix::zeros(n, n);
        let mut seen = HashMap::new();
        for (row, col, value, line) in &self.flows {
            let i = self.sector(row, *line)?;
            let j = self.sector(col, *line)?;
            if let Some(prev) = seen.insert((i, j), *line) {
                return Err(malformed(
                    *line,
                    format!("duplicate FLOW {row}->{col} (first at line {prev})"),
                ));
            }
            flows[(i, j)] = *value;
        }

        let mut domestic = DVector::zeros(n);
        let mut destinations: Vec<String> = Vec::new();
        let mut dest_index: HashMap<String, usize> = HashMap::new();
        let mut export_cells: Vec<(usize, usize, f64)> = Vec::new();
        // several final-demand categories per destination are summed
        for (row, dest, value, line) in &self.finals {
            let i = self.sector(row, *line)?;
            if dest.is_empty() {
                return Err(malformed(*line, "FINAL record without destination".into()));
            }
            if dest == country {
                domestic[i] += *value;
            } else {
                let c = *dest_index.entry(dest.clone()).or_insert_with(|| {
                    destinations.push(dest.clone());
                    destinations.len() - 1
                });
                export_cells.push((i, c, *value));
            }
        }
        let mut exports = DMatrix::zeros(n, destinations.len());
        for (i, c, v) in export_cells {
            exports[(i, c)] += v;
        }

        let table = IOTable::from_flows(
            country,
            year,
            &self.codes,
            flows,
            DVector::from_vec(self.outputs),
            domestic,
            destinations,
            exports,
        )?;
        let gap = table.final_demand_discrepancy();
        if gap > super::ACCOUNTING_TOLERANCE {
            log::warn!(
                "{country}/{year}: recorded final demand deviates from residual demand by {gap:.3e} (relative)"
            );
        }
        Ok(table)
    }
}

fn malformed(line: usize, reason: String) -> Error {
    Error::MalformedRow { line, reason }
}

fn read_records<R: Read>(reader: R, mut sink: impl FnMut(Record) -> Result<()>) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut first = true;
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if first {
            first = false;
            let header: Vec<String> = record.iter().map(|f| f.to_ascii_lowercase()).collect();
            let expected: Vec<&str> = LONG_FORMAT_HEADER.split(',').collect();
            if header != expected {
                return Err(malformed(
                    line,
                    format!("expected header `{LONG_FORMAT_HEADER}`"),
                ));
            }
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 6 {
            return Err(malformed(
                line,
                format!("expected 6 fields, found {}", record.len()),
            ));
        }
        let kind = match &record[0] {
            "FLOW" => RecordType::Flow,
            "FINAL" => RecordType::Final,
            "OUTPUT" => RecordType::Output,
            other => return Err(malformed(line, format!("unknown record type `{other}`"))),
        };
        let country = record[1].to_string();
        if country.is_empty() {
            return Err(malformed(line, "empty country code".into()));
        }
        let year: i32 = record[2]
            .parse()
            .map_err(|_| malformed(line, format!("invalid year `{}`", &record[2])))?;
        let row = super::sectors::canonical_code(&record[3]);
        if row.is_empty() {
            return Err(malformed(line, "empty row sector".into()));
        }
        let col = match kind {
            RecordType::Flow => super::sectors::canonical_code(&record[4]),
            _ => record[4].to_string(),
        };
        if kind == RecordType::Flow && col.is_empty() {
            return Err(malformed(line, "FLOW record without column sector".into()));
        }
        if kind == RecordType::Output && !col.is_empty() {
            return Err(malformed(line, "OUTPUT record must leave column empty".into()));
        }
        let value: f64 = record[5]
            .parse()
            .map_err(|_| malformed(line, format!("invalid value `{}`", &record[5])))?;
        if !value.is_finite() {
            return Err(malformed(line, "non-finite value".into()));
        }
        sink(Record {
            kind,
            country,
            year,
            row,
            col,
            value,
            line,
        })?;
    }
    if first {
        return Err(malformed(1, "empty input".into()));
    }
    Ok(())
}

/// Parse one country-year table out of a long-format stream.
pub fn parse_io_table<R: Read>(reader: R, country: &str, year: i32) -> Result<IOTable> {
    let mut builder = TableBuilder::default();
    let mut found = false;
    read_records(reader, |rec| {
        if rec.country == country && rec.year == year {
            found = true;
            builder.push(rec)?;
        }
        Ok(())
    })?;
    if !found {
        return Err(Error::MissingCountryYear {
            country: country.to_string(),
            year,
        });
    }
    builder.build(country, year)
}

/// Parse every country-year table in a long-format stream.
pub fn parse_panel<R: Read>(reader: R) -> Result<Panel> {
    let mut builders: BTreeMap<(String, i32), TableBuilder> = BTreeMap::new();
    read_records(reader, |rec| {
        builders
            .entry((rec.country.clone(), rec.year))
            .or_default()
            .push(rec)
    })?;
    let mut panel = Panel::new();
    for ((country, year), b) in builders {
        panel.insert(b.build(&country, year)?);
    }
    Ok(panel)
}

/// Write tables in the canonical long format. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_long_format<'a, W: Write>(
    tables: impl IntoIterator<Item = &'a IOTable>,
    mut w: W,
) -> Result<()> {
    writeln!(w, "{LONG_FORMAT_HEADER}")?;
    for t in tables {
        let (c, y) = (t.country(), t.year());
        for (i, s) in t.sectors().iter().enumerate() {
            writeln!(w, "OUTPUT,{c},{y},{},,{}", s.code, t.output()[i])?;
        }
        for (i, si) in t.sectors().iter().enumerate() {
            for (j, sj) in t.sectors().iter().enumerate() {
                let v = t.flows()[(i, j)];
                if v != 0.0 {
                    writeln!(w, "FLOW,{c},{y},{},{},{v}", si.code, sj.code)?;
                }
            }
        }
        for (i, s) in t.sectors().iter().enumerate() {
            writeln!(w, "FINAL,{c},{y},{},{c},{}", s.code, t.domestic_final()[i])?;
            for (k, dest) in t.destinations().iter().enumerate() {
                writeln!(w, "FINAL,{c},{y},{},{dest},{}", s.code, t.export_demand()[(i, k)])?;
            }
        }
    }
    Ok(())
}
