//! Flat CSV form of [`RoundRecord`] streams.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hilbert::BoxLabel;
use crate::protocol::{BobOutcome, Context, EngineKind, RoundRecord};

pub const COLUMNS: [&str; 11] = [
    "round_id",
    "engine",
    "context",
    "bob_outcome",
    "alice_m3",
    "alice_bets",
    "alice_wins",
    "gt_box_t1",
    "gt_box_t2",
    "gt_box_t3",
    "seed_path",
];

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    } else {
        Error::Format(e.to_string())
    }
}

fn to_row(r: &RoundRecord) -> [String; 11] {
    let gt = |t: usize| r.ground_truth_boxes.map(|g| g[t].number().to_string()).unwrap_or_default();
    [
        r.round_id.to_string(),
        r.engine.as_str().to_string(),
        r.context.as_str().to_string(),
        r.bob_outcome.map(|o| o.as_str().to_string()).unwrap_or_default(),
        r.alice_m3.to_string(),
        r.alice_bets.to_string(),
        r.alice_wins.map(|w| w.to_string()).unwrap_or_default(),
        gt(0),
        gt(1),
        gt(2),
        r.seed_path.clone(),
    ]
}

pub fn write_records<W: Write>(out: W, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record(to_row(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[RoundRecord]) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn write_records_file(path: &Path, records: &[RoundRecord]) -> Result<()> {
    write_records(File::create(path)?, records)
}

fn parse_bool(s: &str, line: u64, col: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Format(format!("line {line}: {col} must be true or false, got {s:?}"))),
    }
}

fn parse_box(s: &str, line: u64, col: &str) -> Result<Option<BoxLabel>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<usize>()
        .ok()
        .filter(|n| (1..=3).contains(n))
        .map(|n| Some(BoxLabel::ALL[n - 1]))
        .ok_or_else(|| Error::Format(format!("line {line}: {col} must be 1, 2, 3 or empty, got {s:?}")))
}

fn from_row(row: &csv::StringRecord) -> Result<RoundRecord> {
    let line = row.position().map_or(0, |p| p.line());
    if row.len() != COLUMNS.len() {
        return Err(Error::Format(format!("line {line}: expected {} fields, got {}", COLUMNS.len(), row.len())));
    }
    let f = |i: usize| &row[i];
    let bad = |col: &str, v: &str| Error::Format(format!("line {line}: invalid {col} {v:?}"));

    let round_id = f(0).parse().map_err(|_| bad("round_id", f(0)))?;
    let engine = EngineKind::parse(f(1)).ok_or_else(|| bad("engine", f(1)))?;
    let context = Context::parse(f(2)).ok_or_else(|| bad("context", f(2)))?;
    let bob_outcome = match f(3) {
        "" => None,
        s => Some(BobOutcome::parse(s).ok_or_else(|| bad("bob_outcome", s))?),
    };
    let alice_wins = match f(6) {
        "" => None,
        s => Some(parse_bool(s, line, "alice_wins")?),
    };
    let gt =
        [parse_box(f(7), line, "gt_box_t1")?, parse_box(f(8), line, "gt_box_t2")?, parse_box(f(9), line, "gt_box_t3")?];
    let ground_truth_boxes = match gt {
        [Some(a), Some(b), Some(c)] => Some([a, b, c]),
        [None, None, None] => None,
        _ => return Err(Error::Format(format!("line {line}: ground-truth boxes must be all present or all empty"))),
    };
    Ok(RoundRecord {
        round_id,
        engine,
        context,
        bob_outcome,
        alice_m3: parse_bool(f(4), line, "alice_m3")?,
        alice_bets: parse_bool(f(5), line, "alice_bets")?,
        alice_wins,
        ground_truth_boxes,
        seed_path: f(10).to_string(),
    })
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(COLUMNS) {
        return Err(Error::Format(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    rdr.records().map(|row| from_row(&row.map_err(csv_err)?)).collect()
}

pub fn read_records_file(path: &Path) -> Result<Vec<RoundRecord>> {
    read_records(File::open(path)?)
}
