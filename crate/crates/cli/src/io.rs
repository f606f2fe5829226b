//! CSV datasets and draw files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qlbart::summaries::Draws;
use qlbart::{Dataset, Error, Result};

use crate::config::FamilyName;

fn parse_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, message: e.to_string() }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(f))
}

fn number(field: &str, line: usize, column: &str) -> Result<f64> {
    field.parse().map_err(|_| Error::Parse { line, message: format!("column `{column}`: bad number `{field}`") })
}

/// Column roles in a dataset header.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub outcomes: Vec<usize>,
    pub count: Option<usize>,
    pub weight: Option<usize>,
    pub features: Vec<usize>,
}

/// Outcome `y` (or `y1..yK` for the multinomial), optional counts `n`
/// (binomial and multinomial), optional weights `w`; every other column is
/// a feature.
pub fn layout(header: &[String], family: FamilyName) -> Result<Layout> {
    let find = |name: &str| header.iter().position(|h| h == name);
    let mut outcomes = Vec::new();
    if family == FamilyName::Multinomial {
        let mut k = 1;
        while let Some(j) = find(&format!("y{k}")) {
            outcomes.push(j);
            k += 1;
        }
        if outcomes.len() < 2 {
            return Err(Error::Schema("multinomial data need outcome columns y1, y2, ..., yK with K >= 2".into()));
        }
        if find("y").is_some() {
            return Err(Error::Schema("multinomial data use y1..yK, not y".into()));
        }
    } else {
        outcomes.push(find("y").ok_or_else(|| Error::Schema("missing outcome column `y`".into()))?);
    }
    let count = find("n");
    if count.is_some() && !family.is_categorical() {
        return Err(Error::Schema(format!("count column `n` is only used by binomial and multinomial data, not {}", family.name())));
    }
    let weight = find("w");
    let features = (0..header.len())
        .filter(|j| !outcomes.contains(j) && Some(*j) != count && Some(*j) != weight)
        .collect();
    Ok(Layout { outcomes, count, weight, features })
}

/// Reads a training dataset. Row indices in data errors are 0-based data
/// rows (the header is not counted).
pub fn read_dataset(path: &Path, family: FamilyName) -> Result<Dataset> {
    let mut rdr = open(path)?;
    let header: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(String::from).collect();
    let lay = layout(&header, family)?;
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for &j in &lay.features {
            x.push(number(&rec[j], line, &header[j])?);
        }
        for &j in &lay.outcomes {
            y.push(number(&rec[j], line, &header[j])?);
        }
        let n = match lay.count {
            Some(j) => number(&rec[j], line, "n")?,
            None => 1.0,
        };
        let wt = match lay.weight {
            Some(j) => number(&rec[j], line, "w")?,
            None => 1.0,
        };
        w.push(n * wt);
    }
    let names = lay.features.iter().map(|&j| header[j].clone()).collect();
    Dataset::new(x, lay.features.len(), y, lay.outcomes.len(), Some(w), Some(names))
}

/// Reads the named feature columns (in that order) from a CSV; other
/// columns are ignored. Returns the row-major N × P matrix.
pub fn read_features(path: &Path, names: &[String]) -> Result<Vec<f64>> {
    let mut rdr = open(path)?;
    let header: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(String::from).collect();
    let cols = names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| Error::Schema(format!("missing feature column `{n}` in {}", path.display())))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut x = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for (&j, n) in cols.iter().zip(names) {
            x.push(number(&rec[j], line, n)?);
        }
    }
    Ok(x)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::Numerical(format!("csv writer: {k:?}")),
    }
}

/// Writes a dataset in the layout `read_dataset` expects: features, then
/// outcomes, then `n` (categorical families) or `w`.
pub fn write_dataset(path: &Path, data: &Dataset, family: FamilyName) -> Result<()> {
    let mut wtr = csv_writer(path)?;
    let mut header: Vec<String> = data.feature_names().to_vec();
    if family == FamilyName::Multinomial {
        header.extend((1..=data.k()).map(|k| format!("y{k}")));
    } else {
        header.push("y".into());
    }
    header.push(if family.is_categorical() { "n" } else { "w" }.into());
    wtr.write_record(&header).map_err(csv_io)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        row.extend(data.outcome(i).iter().map(|v| v.to_string()));
        row.push(data.weights()[i].to_string());
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `iter, phi, kappa, sigma_lambda, split_count_1..P`.
pub fn write_draws(path: &Path, d: &Draws) -> Result<()> {
    let mut wtr = csv_writer(path)?;
    let p = d.num_features();
    let mut header: Vec<String> = ["iter", "phi", "kappa", "sigma_lambda"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|j| format!("split_count_{j}")));
    wtr.write_record(&header).map_err(csv_io)?;
    for s in 0..d.len() {
        let mut row = vec![d.iteration[s].to_string(), d.phi[s].to_string(), d.kappa[s].to_string(), d.sigma_lambda[s].to_string()];
        row.extend(d.split_counts[s].iter().map(|c| c.to_string()));
        wtr.write_record(&row).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Scalar draws read back from a draw file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DrawTable {
    pub iteration: Vec<usize>,
    pub phi: Vec<f64>,
    pub kappa: Vec<f64>,
    pub sigma_lambda: Vec<f64>,
    pub split_counts: Vec<Vec<usize>>,
}

pub fn read_draws(path: &Path) -> Result<DrawTable> {
    let mut rdr = open(path)?;
    let header: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(String::from).collect();
    if header.len() < 4 || header[..4] != ["iter", "phi", "kappa", "sigma_lambda"] {
        return Err(Error::Schema(format!("{} is not a draw file", path.display())));
    }
    let mut t = DrawTable::default();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        t.iteration.push(number(&rec[0], line, "iter")? as usize);
        t.phi.push(number(&rec[1], line, "phi")?);
        t.kappa.push(number(&rec[2], line, "kappa")?);
        t.sigma_lambda.push(number(&rec[3], line, "sigma_lambda")?);
        t.split_counts.push((4..rec.len()).map(|j| number(&rec[j], line, &header[j]).map(|v| v as usize)).collect::<Result<_>>()?);
    }
    Ok(t)
}

/// One row per retained draw: `iter` then the N × K matrix flattened
/// row-major, columns `mu_<row>` (K = 1) or `mu_<row>_<k>`.
pub fn write_matrix(path: &Path, iteration: &[usize], rows: &[Vec<f64>], n: usize, k: usize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = vec!["iter".to_string()];
    for i in 1..=n {
        if k == 1 {
            header.push(format!("mu_{i}"));
        } else {
            header.extend((1..=k).map(|c| format!("mu_{i}_{c}")));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for (it, r) in iteration.iter().zip(rows) {
        write!(out, "{it}")?;
        for v in r {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a matrix file back as (iterations, rows).
pub fn read_matrix(path: &Path) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut rdr = open(path)?;
    rdr.headers().map_err(parse_err)?;
    let (mut its, mut rows) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        its.push(number(&rec[0], line, "iter")? as usize);
        rows.push((1..rec.len()).map(|j| number(&rec[j], line, "mu")).collect::<Result<Vec<f64>>>()?);
    }
    Ok((its, rows))
}
