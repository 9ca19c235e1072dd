//! Dataset and model files.
//!
//! Labeled sets are CSV with a mandatory header `x_1,…,x_n,label`, comma
//! separated, `.` decimal point, labels `-1` or `1`. Classifiers and nets are
//! JSON.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly::{Label, LabeledPoint, LabeledSet};

pub fn read_labeled_csv<R: Read>(reader: R) -> Result<LabeledSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 2 || cols.last() != Some(&"label") {
        return Err(Error::Parse("header must be x_1,...,x_n,label".into()));
    }
    let n = cols.len() - 1;
    for (i, c) in cols[..n].iter().enumerate() {
        if *c != format!("x_{}", i + 1) {
            return Err(Error::Parse(format!("header column {} is {c:?}, expected x_{}", i + 1, i + 1)));
        }
    }
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", row + 1)))?;
        if rec.len() != n + 1 {
            return Err(Error::Parse(format!("row {} has {} fields, expected {}", row + 1, rec.len(), n + 1)));
        }
        let mut x = Vec::with_capacity(n);
        for (i, f) in rec.iter().take(n).enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse(format!("row {} column x_{}: {f:?} is not a number", row + 1, i + 1)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {} column x_{}: non-finite value", row + 1, i + 1)));
            }
            x.push(v);
        }
        let y = match &rec[n] {
            "1" | "+1" | "1.0" => Label::Pos,
            "-1" | "-1.0" => Label::Neg,
            other => return Err(Error::Parse(format!("row {}: label {other:?} is not -1 or 1", row + 1))),
        };
        points.push(LabeledPoint { x, y });
    }
    LabeledSet::new(n, points)
}

pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledSet> {
    read_labeled_csv(File::open(path)?)
}

pub fn write_labeled_csv<W: Write>(set: &LabeledSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=set.dim()).map(|i| format!("x_{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for p in set.iter() {
        let mut rec: Vec<String> = p.x.iter().map(|v| format!("{v:?}")).collect();
        rec.push(if p.y == Label::Pos { "1" } else { "-1" }.into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_labeled_csv(set: &LabeledSet, path: impl AsRef<Path>) -> Result<()> {
    write_labeled_csv(set, File::create(path)?)
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let s = LabeledSet::from_pairs(2, vec![(vec![0.1, -2.0], Label::Pos), (vec![1e-17, 3.5], Label::Neg)]).unwrap();
        let mut buf = Vec::new();
        write_labeled_csv(&s, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x_1,x_2,label\n"));
        assert_eq!(read_labeled_csv(&buf[..]).unwrap(), s);
    }

    #[test]
    fn csv_rejects_malformed() {
        for text in [
            "0.1,0.2,1\n",
            "x_1,x_2,label\n0.1,1\n",
            "x_1,x_2,label\n0.1,abc,1\n",
            "x_1,x_2,label\n0.1,0.2,0\n",
            "x_2,x_1,label\n0.1,0.2,1\n",
            "x_1,label\nNaN,1\n",
        ] {
            assert!(matches!(read_labeled_csv(text.as_bytes()), Err(Error::Parse(_)) | Err(Error::Csv(_))), "{text:?}");
        }
    }
}
