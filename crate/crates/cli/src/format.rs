//! CSV output: 12 significant digits, `#` metadata lines, LF endings.

use std::fmt::Write;

/// `%#.12g`-style rendering: 12 significant digits, trailing zeros kept.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000000000".into();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci
        .split_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp) as usize, v)
    } else {
        sci
    }
}

#[derive(Debug, Default)]
pub struct Table {
    buf: String,
}

impl Table {
    pub fn new(header: &str) -> Self {
        let mut t = Self::default();
        t.line(header);
        t
    }

    pub fn line(&mut self, s: &str) {
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    pub fn row(&mut self, cells: &[String]) {
        self.line(&cells.join(","));
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.buf, "# {key}={value}");
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn significant_digits() {
        assert_eq!(num(100.0), "100.000000000");
        assert_eq!(num(400.0 / 3.0), "133.333333333");
        assert_eq!(num(10000.0 / 3.0), "3333.33333333");
        assert_eq!(num(0.5), "0.500000000000");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(-0.01), "-0.0100000000000");
        assert_eq!(num(0.0), "0.00000000000");
        assert_eq!(num(99.99999999999999), "100.000000000");
        assert_eq!(num(1.5e-7), "1.50000000000e-7");
        assert_eq!(num(2.0e13), "2.00000000000e13");
    }
}
