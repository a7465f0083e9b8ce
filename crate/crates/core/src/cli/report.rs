//! CSV emission.

use std::io::Write;

use crate::channel::StackedChannel;
use crate::engine::{Cell, ExperimentResult};
use crate::error::Result;

/// Nine significant digits, trailing zeros trimmed. Plain notation for
/// magnitudes in `[1e-5, 1e9)`, scientific otherwise.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(f) => format_sig9(*f),
        Cell::Text(s) => s.clone(),
        Cell::Bool(b) => b.to_string(),
        Cell::Na => "NA".into(),
    }
}

/// Header row, then one line per result row; every row ends with the
/// scenario fingerprint.
pub fn write_csv(out: &mut impl Write, result: &ExperimentResult) -> Result<()> {
    let mut header: Vec<&str> = result.columns().to_vec();
    header.push("fingerprint");
    writeln!(out, "{}", header.join(","))?;
    for row in &result.rows {
        let mut line: Vec<String> = row.iter().map(cell_text).collect();
        line.push(result.fingerprint.clone());
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub const CHANNEL_DUMP_HEADER: &str = "slot,fleet,sat,lav,element,re,im";

/// Long-format dump of the stacked channel coefficients of one slot.
pub fn write_channel_dump(
    out: &mut impl Write,
    slot: usize,
    channels: &[StackedChannel],
) -> Result<()> {
    writeln!(out, "{CHANNEL_DUMP_HEADER}")?;
    for ch in channels {
        let per_sat = ch.h.nrows() / ch.sats.len().max(1);
        for (row, sat) in (0..ch.h.nrows()).map(|r| (r, ch.sats[r / per_sat])) {
            for lav in 0..ch.h.ncols() {
                let z = ch.h[(row, lav)];
                writeln!(
                    out,
                    "{slot},{},{sat},{lav},{},{},{}",
                    ch.fleet + 1,
                    row % per_sat,
                    format_sig9(z.re),
                    format_sig9(z.im)
                )?;
            }
        }
    }
    Ok(())
}
