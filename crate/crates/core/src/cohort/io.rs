use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{FeatureKind, Schema, EVENT_COLUMN, TIME_COLUMN};
use super::{Cohort, Record};
use crate::error::{Error, Result};

/// Maps each schema feature (and the outcome columns) to its header position.
struct HeaderMap {
    features: Vec<usize>,
    time: Option<usize>,
    event: Option<usize>,
}

fn map_header(header: &csv::StringRecord, schema: &Schema, outcome: bool) -> Result<HeaderMap> {
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if pos.insert(h.trim(), i).is_some() {
            return Err(Error::Parse {
                line: 1,
                message: format!("duplicate header column `{h}`"),
            });
        }
    }
    let mut features = Vec::with_capacity(schema.features().len());
    for f in schema.features() {
        let i = pos.remove(f.name.as_str()).ok_or_else(|| {
            Error::Schema(format!("header is missing feature column `{}`", f.name))
        })?;
        features.push(i);
    }
    let time = pos.remove(TIME_COLUMN);
    let event = pos.remove(EVENT_COLUMN);
    if outcome && (time.is_none() || event.is_none()) {
        return Err(Error::Schema(format!(
            "header must contain reserved columns `{TIME_COLUMN}` and `{EVENT_COLUMN}`"
        )));
    }
    if let Some(extra) = pos.keys().next() {
        return Err(Error::Schema(format!(
            "header column `{extra}` is not in the schema"
        )));
    }
    Ok(HeaderMap {
        features,
        time,
        event,
    })
}

fn encode_row(
    row: &csv::StringRecord,
    schema: &Schema,
    map: &HeaderMap,
    line: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; schema.width()];
    for (fi, f) in schema.features().iter().enumerate() {
        let cell = row.get(map.features[fi]).unwrap_or("");
        let range = schema.column_range(fi);
        f.encode(cell, &mut out[range]).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("line {line}: {msg}")),
            other => other,
        })?;
    }
    Ok(out)
}

fn parse_outcome(row: &csv::StringRecord, map: &HeaderMap, line: usize) -> Result<(f64, bool)> {
    let time_raw = row.get(map.time.unwrap_or(usize::MAX)).unwrap_or("").trim();
    let time: f64 = time_raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{TIME_COLUMN}` must be a number, got `{time_raw}`"),
    })?;
    if !time.is_finite() || time < 0.0 {
        return Err(Error::Parse {
            line,
            message: format!("`{TIME_COLUMN}` must be finite and >= 0, got {time}"),
        });
    }
    let event_raw = row.get(map.event.unwrap_or(usize::MAX)).unwrap_or("").trim();
    let event = match event_raw {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::Parse {
                line,
                message: format!("`{EVENT_COLUMN}` must be 0 or 1, got `{other}`"),
            })
        }
    };
    Ok((time, event))
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn read_cohort<R: Read>(reader: R, schema: &Schema) -> Result<Cohort> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let map = map_header(&header, schema, true)?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let features = encode_row(&row, schema, &map, line)?;
        let (time, event) = parse_outcome(&row, &map, line)?;
        records.push(Record {
            features,
            time,
            event,
        });
    }
    if records.is_empty() {
        return Err(Error::Domain("cohort file has no records".into()));
    }
    Cohort::new(schema.clone(), records)
}

pub fn load_cohort(path: &Path, schema: &Schema) -> Result<Cohort> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cohort(std::io::BufReader::new(file), schema)
}

/// Reads encoded feature rows only; `time`/`event` columns are ignored when
/// present. An empty input yields no rows.
pub fn read_feature_rows<R: Read>(mut reader: R, schema: &Schema) -> Result<Vec<Vec<f64>>> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut rdr = csv_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_error)?.clone();
    let map = map_header(&header, schema, false)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        rows.push(encode_row(&row, schema, &map, line)?);
    }
    Ok(rows)
}

pub fn load_feature_rows(path: &Path, schema: &Schema) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_rows(std::io::BufReader::new(file), schema)
}

/// Raw CSV form of feature `fi` from its encoded columns; empty when missing.
pub fn decode_feature(schema: &Schema, fi: usize, cells: &[f64]) -> String {
    if cells.iter().any(|v| v.is_nan()) {
        return String::new();
    }
    let f = &schema.features()[fi];
    match f.kind {
        FeatureKind::Binary => format!("{}", cells[0] as u8),
        FeatureKind::Continuous => format!("{}", cells[0]),
        FeatureKind::Categorical => {
            let cats = f.categories.as_deref().unwrap_or_default();
            cells
                .iter()
                .position(|&v| v == 1.0)
                .map(|i| cats[i].clone())
                .unwrap_or_default()
        }
    }
}

/// Writes the cohort in the same CSV layout `read_cohort` accepts.
pub fn write_cohort<W: Write>(cohort: &Cohort, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = cohort
        .schema
        .features()
        .iter()
        .map(|f| f.name.clone())
        .collect();
    header.push(TIME_COLUMN.into());
    header.push(EVENT_COLUMN.into());
    w.write_record(&header).map_err(csv_error)?;
    for r in &cohort.records {
        let mut row: Vec<String> = (0..cohort.schema.features().len())
            .map(|fi| decode_feature(&cohort.schema, fi, &r.features[cohort.schema.column_range(fi)]))
            .collect();
        row.push(format!("{}", r.time));
        row.push(if r.event { "1" } else { "0" }.into());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::FeatureSpec;

    fn schema() -> Schema {
        Schema::new(vec![FeatureSpec::binary("male")]).unwrap()
    }

    #[test]
    fn parses_three_rows() {
        let csv = "male,time,event\n1,10.5,1\n0,200,0\n1,3,1\n";
        let c = read_cohort(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.records[1].features, vec![0.0]);
        assert_eq!(c.records[1].time, 200.0);
        assert!(!c.records[1].event);
    }

    #[test]
    fn bad_event_names_line() {
        let csv = "male,time,event\n1,10,1\n0,20,2\n";
        match read_cohort(csv.as_bytes(), &schema()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("event"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_cells_are_nan_not_zero() {
        let s = Schema::new(vec![
            FeatureSpec::continuous("x"),
            FeatureSpec::categorical("bt", &["A", "B"]),
        ])
        .unwrap();
        let csv = "bt,x,time,event\n,,5,0\nB,2.5,6,1\n";
        let c = read_cohort(csv.as_bytes(), &s).unwrap();
        assert!(c.records[0].features.iter().all(|v| v.is_nan()));
        assert_eq!(c.records[1].features, vec![2.5, 0.0, 1.0]);
    }

    #[test]
    fn unknown_category_is_schema_error() {
        let s = Schema::new(vec![FeatureSpec::categorical("bt", &["A", "B"])]).unwrap();
        let csv = "bt,time,event\nZ,5,0\n";
        assert!(matches!(read_cohort(csv.as_bytes(), &s), Err(Error::Schema(_))));
    }

    #[test]
    fn header_must_match_schema() {
        let csv = "female,time,event\n1,1,1\n";
        assert!(matches!(read_cohort(csv.as_bytes(), &schema()), Err(Error::Schema(_))));
        let csv = "male,time\n1,1\n";
        assert!(matches!(read_cohort(csv.as_bytes(), &schema()), Err(Error::Schema(_))));
    }

    #[test]
    fn write_then_read_preserves_records() {
        let s = Schema::new(vec![
            FeatureSpec::continuous("x"),
            FeatureSpec::categorical("bt", &["A", "B"]),
        ])
        .unwrap();
        let csv = "x,bt,time,event\n1.25,A,5,0\n,B,6,1\n";
        let c = read_cohort(csv.as_bytes(), &s).unwrap();
        let mut buf = Vec::new();
        write_cohort(&c, &mut buf).unwrap();
        let back = read_cohort(buf.as_slice(), &s).unwrap();
        assert_eq!(back.records[0], c.records[0]);
        assert!(back.records[1].features[0].is_nan());
    }

    #[test]
    fn feature_rows_tolerate_empty_input_and_missing_outcome() {
        assert!(read_feature_rows("".as_bytes(), &schema()).unwrap().is_empty());
        let rows = read_feature_rows("male\n1\n0\n".as_bytes(), &schema()).unwrap();
        assert_eq!(rows, vec![vec![1.0], vec![0.0]]);
    }
}
