//! Text serialization shared by the CSV and JSON writers.
//!
//! Every number is written with 17 significant digits, enough to read back
//! the identical double.

use std::fmt::Write as _;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Appends one comma-separated row of numbers and a newline.
pub fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// Header line followed by one row per record.
pub fn csv_table<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut out = String::with_capacity(header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        push_row(&mut out, r);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MAX,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_layout() {
        let t = csv_table("a,b", [[1.0, 2.0], [3.0, 4.0]]);
        let lines: Vec<_> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines[2], "3.0000000000000000e0,4.0000000000000000e0");
    }
}
