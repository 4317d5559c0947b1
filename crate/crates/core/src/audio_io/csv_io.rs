use std::io::{Read, Write};

use super::{AudioError, BeatList};
use crate::Matrix;

fn csv_err(e: impl std::fmt::Display) -> AudioError {
    AudioError::Csv(e.to_string())
}

/// Reads beats from a CSV with a `time_s` header column.
pub fn read_beats_csv<R: Read>(reader: R) -> Result<BeatList, AudioError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let col = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .position(|h| h.trim() == "time_s")
        .ok_or_else(|| AudioError::Csv("missing `time_s` column".into()))?;
    let mut times = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = rec.get(col).unwrap_or("").trim();
        let t: f64 = field
            .parse()
            .map_err(|_| AudioError::Csv(format!("row {}: `{field}` is not a number", i + 2)))?;
        times.push(t);
    }
    BeatList::new(times)
}

pub fn write_beats_csv<W: Write>(writer: W, beats: &BeatList) -> Result<(), AudioError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time_s"]).map_err(csv_err)?;
    for t in beats.times() {
        w.write_record([t.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Reads a numeric feature track, one row per frame. A header row is
/// skipped when its first field is not numeric.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<Matrix, AudioError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(AudioError::Csv(format!("row {}: non-finite value", i + 1)));
                }
                rows.push(row);
            }
            Err(_) if i == 0 => {}
            Err(e) => return Err(AudioError::Csv(format!("row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(AudioError::Csv("no feature rows".into()));
    }
    let width = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(AudioError::Csv(format!(
            "data row {} has {} fields, expected {width}",
            i + 1,
            rows[i].len()
        )));
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn write_feature_csv<W: Write>(writer: W, track: &Matrix) -> Result<(), AudioError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in 0..track.rows() {
        w.write_record(track.row(r).iter().map(|v| v.to_string()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beats_round_trip() {
        let beats = BeatList::new(vec![0.1, 0.75, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_beats_csv(&mut buf, &beats).unwrap();
        assert_eq!(read_beats_csv(buf.as_slice()).unwrap(), beats);
        assert!(read_beats_csv("t\n0.1\n".as_bytes()).is_err());
        assert!(read_beats_csv("time_s\n0.3\n0.2\n".as_bytes()).is_err());
    }

    #[test]
    fn feature_round_trip() {
        let m = Matrix::from_fn(4, 3, |r, c| r as f64 * 0.5 - c as f64 / 3.0);
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &m).unwrap();
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), m);
        let with_header = "a,b\n1,2\n3,4\n";
        assert_eq!(read_feature_csv(with_header.as_bytes()).unwrap().rows(), 2);
        assert!(read_feature_csv("1,2\n3\n".as_bytes()).is_err());
    }
}
