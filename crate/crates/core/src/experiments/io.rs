//! CSV readers and writers for covariance tables, sample paths and lifts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gaussian::TableKernel;
use crate::lift::{GroupPath, SamplePath, TimeGrid};

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::input(format!("cannot parse {what} `{field}`")))
}

/// Reads a covariance table. Two layouts are accepted:
///
/// * long: header `s,t,value`, one row per node pair (a single triangle is
///   enough, the other is mirrored);
/// * matrix: the header row holds a label followed by the grid times, each
///   following row holds a time followed by one covariance row.
pub fn read_table_kernel(path: &Path) -> Result<TableKernel> {
    let text = std::fs::read_to_string(path)?;
    parse_table_kernel(&text)
}

pub fn parse_table_kernel(text: &str) -> Result<TableKernel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let header = rows.first().ok_or_else(|| Error::input("empty covariance table"))?;
    let long = header.len() == 3
        && header.iter().map(str::to_ascii_lowercase).eq(["s", "t", "value"].iter().map(|s| s.to_string()));
    if long {
        parse_long(&rows[1..])
    } else {
        parse_matrix(&rows)
    }
}

fn parse_long(rows: &[csv::StringRecord]) -> Result<TableKernel> {
    let mut cells: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut times: Vec<f64> = Vec::new();
    for row in rows {
        if row.len() != 3 {
            return Err(Error::input("long covariance table rows need 3 fields"));
        }
        let s = parse_f64(&row[0], "time")?;
        let t = parse_f64(&row[1], "time")?;
        let v = parse_f64(&row[2], "covariance")?;
        times.push(s);
        times.push(t);
        cells.insert((s.to_bits(), t.to_bits()), v);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let n = times.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let key = (times[i].to_bits(), times[j].to_bits());
            let mirror = (key.1, key.0);
            values[i * n + j] = *cells
                .get(&key)
                .or_else(|| cells.get(&mirror))
                .ok_or_else(|| Error::input(format!("missing covariance at ({}, {})", times[i], times[j])))?;
        }
    }
    TableKernel::new(TimeGrid::new(times)?, values)
}

fn parse_matrix(rows: &[csv::StringRecord]) -> Result<TableKernel> {
    let times = rows[0].iter().skip(1).map(|f| parse_f64(f, "time")).collect::<Result<Vec<_>>>()?;
    let n = times.len();
    if rows.len() != n + 1 {
        return Err(Error::input(format!("matrix table needs {} rows, got {}", n, rows.len() - 1)));
    }
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in rows[1..].iter().enumerate() {
        if row.len() != n + 1 {
            return Err(Error::input(format!("matrix table row {i} has {} fields", row.len())));
        }
        let t = parse_f64(&row[0], "time")?;
        if t != times[i] {
            return Err(Error::input(format!("row time {t} does not match column time {}", times[i])));
        }
        for f in row.iter().skip(1) {
            values.push(parse_f64(f, "covariance")?);
        }
    }
    TableKernel::new(TimeGrid::new(times)?, values)
}

/// Long format `sample,component,node,time,value`.
pub fn write_samples<W: Write>(paths: &[SamplePath], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["sample", "component", "node", "time", "value"])?;
    for (k, path) in paths.iter().enumerate() {
        let times = path.grid().times();
        for (i, comp) in path.components().iter().enumerate() {
            for (l, v) in comp.iter().enumerate() {
                wtr.serialize((k, i, l, times[l], v))?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<SamplePath>> {
    let text = std::fs::read_to_string(path)?;
    parse_samples(&text)
}

pub fn parse_samples(text: &str) -> Result<Vec<SamplePath>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let rows: Vec<(usize, usize, usize, f64, f64)> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    let mut by_sample: BTreeMap<usize, BTreeMap<(usize, usize), (f64, f64)>> = BTreeMap::new();
    for (k, i, l, t, v) in rows {
        if by_sample.entry(k).or_default().insert((i, l), (t, v)).is_some() {
            return Err(Error::input(format!("duplicate entry for sample {k}, component {i}, node {l}")));
        }
    }
    let mut out = Vec::with_capacity(by_sample.len());
    let mut grid: Option<TimeGrid> = None;
    for (k, cells) in by_sample {
        let d = cells.keys().map(|&(i, _)| i).max().map_or(0, |i| i + 1);
        let n = cells.keys().map(|&(_, l)| l).max().map_or(0, |l| l + 1);
        if cells.len() != d * n {
            return Err(Error::input(format!("sample {k} is not a full component x node table")));
        }
        let times: Vec<f64> = (0..n).map(|l| cells[&(0, l)].0).collect();
        for (&(i, l), &(t, _)) in &cells {
            if t != times[l] {
                return Err(Error::input(format!("sample {k}, component {i}: time mismatch at node {l}")));
            }
        }
        let g = match &grid {
            Some(g) if g.times() == times.as_slice() => g.clone(),
            Some(_) => return Err(Error::GridMismatch),
            None => {
                let g = TimeGrid::new(times)?;
                grid = Some(g.clone());
                g
            }
        };
        let values = (0..d).map(|i| (0..n).map(|l| cells[&(i, l)].1).collect()).collect();
        out.push(SamplePath::new(g, values)?);
    }
    Ok(out)
}

/// Word label of a tensor coordinate with 1-based letters, e.g. `"12"`.
pub fn word_label(dim: usize, level: usize, index: usize) -> String {
    let mut letters = vec![0usize; level];
    let mut rest = index;
    for slot in letters.iter_mut().rev() {
        *slot = rest % dim + 1;
        rest /= dim;
    }
    letters.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(if dim > 9 { "-" } else { "" })
}

/// Long format `sample,node,time,word,value` for levels 1 to N.
pub fn write_lifts<W: Write>(lifts: &[GroupPath], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["sample", "node", "time", "word", "value"])?;
    for (k, lift) in lifts.iter().enumerate() {
        let times = lift.grid().times();
        for (l, g) in lift.points().iter().enumerate() {
            for level in 1..=g.depth() {
                for (idx, v) in g.level(level).iter().enumerate() {
                    wtr.serialize((k, l, times[l], word_label(g.dim(), level, idx), v))?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
