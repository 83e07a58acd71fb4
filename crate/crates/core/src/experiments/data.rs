//! Point/label CSV ingestion, synthetic data, and small numeric helpers.

use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{norm2, DenseMatrix};

/// Standard-normal points rescaled so the largest norm is exactly 1.
pub fn synth_points(n: usize, d: usize, seed: u64) -> Result<DenseMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synthetic data needs n >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DenseMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let max = (0..n).map(|i| norm2(x.row(i))).fold(0.0, f64::max);
    if max > 0.0 {
        x.scale(1.0 / max);
    }
    Ok(x)
}

/// Uniform features on `[0, 1]^d` with a smooth response plus 0.1-scale noise.
pub fn synth_regression(n: usize, d: usize, seed: u64) -> Result<(DenseMatrix, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synthetic regression needs n >= 1 and d >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DenseMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let y = (0..n)
        .map(|i| {
            let r = x.row(i);
            let c = |j: usize| r[j % d];
            (2.0 * c(0) + c(1)).sin() + 0.5 * c(2) * c(3) - (c(4) + c(5)).cos() * c(6)
                + 0.1 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok((x, y))
}

/// Uniform `[-1, 1]` vector, reproducible from the seed.
pub fn seeded_vector(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Shortest exact text form used in every emitted CSV (17 significant digits).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Numeric CSV table; a first row with any non-numeric field is the header.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub values: DenseMatrix,
}

pub fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(f64::from_str).collect();
        match parsed {
            Ok(vals) => {
                if let Some(w) = width {
                    if vals.len() != w {
                        return Err(Error::Parse {
                            line,
                            message: format!("expected {w} fields, found {}", vals.len()),
                        });
                    }
                }
                if vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        line,
                        message: "non-finite value".into(),
                    });
                }
                width = Some(vals.len());
                rows.push(vals);
            }
            Err(_) if rows.is_empty() && header.is_none() => {
                width = Some(record.len());
                header = Some(record.iter().map(str::to_owned).collect());
            }
            Err(_) => {
                let bad = record.iter().find(|f| f64::from_str(f).is_err()).unwrap_or("");
                return Err(Error::Parse {
                    line,
                    message: format!("non-numeric field '{bad}'"),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let cols = rows[0].len();
    let values = DenseMatrix::from_vec(rows.len(), cols, rows.concat())?;
    Ok(Table { header, values })
}

pub fn read_points<R: Read>(input: R) -> Result<DenseMatrix> {
    Ok(read_table(input)?.values)
}

pub fn read_points_file(path: &std::path::Path) -> Result<DenseMatrix> {
    read_points(std::fs::File::open(path)?)
}

pub fn write_points<W: Write>(out: W, x: &DenseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..x.rows() {
        w.write_record(x.row(i).iter().map(|v| fmt_float(*v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("CSV error: {other:?}")),
    }
}

/// Label column selector: a zero-based index or a header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("empty label column"));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_owned()),
        })
    }
}

/// Splits a table into features and the label column.
pub fn split_labels(table: &Table, col: &LabelColumn) -> Result<(DenseMatrix, Vec<f64>)> {
    let cols = table.values.cols();
    let idx = match col {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::invalid(format!("label column '{name}' not found in header")))?,
    };
    if idx >= cols || cols < 2 {
        return Err(Error::invalid(format!("label column {idx} out of range for {cols} columns")));
    }
    let y = table.values.column(idx);
    let keep: Vec<usize> = (0..cols).filter(|&j| j != idx).collect();
    let x = DenseMatrix::from_fn(table.values.rows(), keep.len(), |i, j| table.values[(i, keep[j])]);
    Ok((x, y))
}

/// Min-max scales every column to `[0, 1]`; constant columns become 0.
pub fn minmax_scale(x: &DenseMatrix) -> DenseMatrix {
    let (n, d) = x.shape();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        for (j, &v) in x.row(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    DenseMatrix::from_fn(n, d, |i, j| {
        let span = hi[j] - lo[j];
        if span > 0.0 { (x[(i, j)] - lo[j]) / span } else { 0.0 }
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("power-law fit needs at least two paired samples"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("power-law fit needs positive samples"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs distinct x values"));
    }
    Ok(sxy / sxx)
}

/// Median, minimum and maximum.
pub fn median_min_max(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Some((med, v[0], v[n - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_scaled_and_deterministic() {
        let a = synth_points(50, 4, 7).unwrap();
        let b = synth_points(50, 4, 7).unwrap();
        assert_eq!(a.data(), b.data());
        let max = (0..50).map(|i| norm2(a.row(i))).fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        assert!(synth_points(0, 3, 1).is_err());
    }

    #[test]
    fn synth_mean_shrinks() {
        let x = synth_points(10_000, 3, 11).unwrap();
        let mean: Vec<f64> = (0..3).map(|j| x.column(j).iter().sum::<f64>() / 10_000.0).collect();
        assert!(norm2(&mean) <= 4.0 / 100.0);
    }

    #[test]
    fn csv_round_trip_and_header_detection() {
        let x = synth_points(5, 3, 2).unwrap();
        let mut buf = Vec::new();
        write_points(&mut buf, &x).unwrap();
        let t = read_table(buf.as_slice()).unwrap();
        assert_eq!(t.header.as_deref(), Some(&["x0".to_string(), "x1".into(), "x2".into()][..]));
        assert_eq!(t.values.data(), x.data());
        let no_header = read_points("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(no_header.shape(), (2, 3));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        match read_points("a,b\n1,2\n3,oops\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match read_points("1,2\n3\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_points("".as_bytes()).is_err());
    }

    #[test]
    fn labels_and_scaling() {
        let t = read_table("f1,f2,target\n0,10,1\n2,20,2\n4,30,3\n".as_bytes()).unwrap();
        let (x, y) = split_labels(&t, &"target".parse().unwrap()).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        assert_eq!(x.shape(), (3, 2));
        let (x0, y0) = split_labels(&t, &LabelColumn::Index(0)).unwrap();
        assert_eq!(y0, vec![0.0, 2.0, 4.0]);
        assert_eq!(x0.row(0), &[10.0, 1.0]);
        assert!(split_labels(&t, &LabelColumn::Index(3)).is_err());
        assert!(split_labels(&t, &"nope".parse().unwrap()).is_err());
        let s = minmax_scale(&x);
        assert_eq!(s.column(0), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn helpers() {
        let e = fit_power_law(&[1.0, 2.0, 4.0], &[3.0, 6.0, 12.0]).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        assert_eq!(median_min_max(&[3.0, 1.0, 2.0]), Some((2.0, 1.0, 3.0)));
        assert_eq!(median_min_max(&[4.0, 1.0]), Some((2.5, 1.0, 4.0)));
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(seeded_vector(4, 9), seeded_vector(4, 9));
    }
}
