use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::ReturnPanel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRow {
    pub date: String,
    pub ticker: String,
    pub close: f64,
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

/// Reads `date,ticker,close` rows and returns simple returns of `tickers`
/// (in the given column order) over the dates where every ticker trades.
pub fn load_etf_csv(path: &Path, tickers: &[String]) -> Result<ReturnPanel> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => parse_err(0, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["date", "ticker", "close"] {
        return Err(parse_err(
            1,
            format!("expected header `date,ticker,close`, got `{}`", cols.join(",")),
        ));
    }

    let wanted: HashMap<&str, usize> = tickers.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut series: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); tickers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, got {}", record.len())));
        }
        let date = &record[0];
        if !is_iso_date(date) {
            return Err(parse_err(line, format!("`{date}` is not an ISO-8601 date")));
        }
        let close: f64 = record[2]
            .parse()
            .map_err(|_| parse_err(line, format!("unparsable close `{}`", &record[2])))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(parse_err(
                line,
                format!("close must be positive and finite, got {close}"),
            ));
        }
        if let Some(&col) = wanted.get(&record[1]) {
            if series[col].insert(date.to_string(), close).is_some() {
                return Err(parse_err(line, format!("duplicate row for ({date}, {})", &record[1])));
            }
        }
    }
    for (t, s) in tickers.iter().zip(&series) {
        if s.is_empty() {
            return Err(Error::MissingTicker(t.clone()));
        }
    }

    let mut common: BTreeSet<&String> = series[0].keys().collect();
    for s in &series[1..] {
        common.retain(|d| s.contains_key(*d));
    }
    if common.len() < 2 {
        return Err(Error::TooFewDates);
    }
    let dates: Vec<&String> = common.into_iter().collect();
    let d = tickers.len();
    let mut returns = DMatrix::zeros(dates.len() - 1, d);
    for (row, pair) in dates.windows(2).enumerate() {
        for (col, s) in series.iter().enumerate() {
            returns[(row, col)] = s[pair[1]] / s[pair[0]] - 1.0;
        }
    }
    let out_dates = dates[1..].iter().map(|s| (*s).clone()).collect();
    ReturnPanel::new(returns, Some(out_dates))
}

pub fn write_etf_csv<W: Write>(mut w: W, rows: &[PriceRow]) -> Result<()> {
    writeln!(w, "date,ticker,close")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.date, r.ticker, r.close)?;
    }
    Ok(())
}

/// `date,r_1..r_d`; simulated panels without dates use the row index.
pub fn write_panel_csv<W: Write>(mut w: W, panel: &ReturnPanel) -> Result<()> {
    let header: Vec<String> = (1..=panel.assets()).map(|i| format!("r_{i}")).collect();
    writeln!(w, "date,{}", header.join(","))?;
    for t in 0..panel.len() {
        let date = panel.dates().map_or_else(|| t.to_string(), |d| d[t].clone());
        write!(w, "{date}")?;
        for a in 0..panel.assets() {
            write!(w, ",{}", panel.returns()[(t, a)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_panel_csv(path: &Path) -> Result<ReturnPanel> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.get(0) != Some("date") || headers.len() < 2 {
        return Err(parse_err(1, "expected header `date,r_1..r_d`".into()));
    }
    let d = headers.len() - 1;
    let mut dates = Vec::new();
    let mut flat = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        dates.push(record[0].to_string());
        for field in record.iter().skip(1) {
            flat.push(
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("unparsable return `{field}`")))?,
            );
        }
    }
    let t = dates.len();
    let numeric_index = dates.iter().enumerate().all(|(i, s)| s == &i.to_string());
    let dates = if numeric_index { None } else { Some(dates) };
    ReturnPanel::new(DMatrix::from_row_slice(t, d, &flat), dates)
}
