//! CSV output: `#` metadata lines, a header, and floats at 9 significant digits.

use std::fs;
use std::io::{self, Write};

use crate::CliError;

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros trimmed,
/// exponent form outside `[1e-4, 1e9)`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.unsigned_abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Buffers a report and writes it to stdout or a file in one go.
pub struct Csv {
    text: String,
}

impl Csv {
    /// Starts a report with the resolved-settings comment line.
    pub fn new(describe: &str) -> Self {
        let mut csv = Self { text: String::new() };
        csv.comment(describe);
        csv
    }

    pub fn header(&mut self, header: &str) {
        self.text.push_str(header);
        self.text.push('\n');
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        self.text.push_str("# ");
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn write_to(&self, output: &str) -> Result<(), CliError> {
        if output == "-" {
            let mut out = io::stdout().lock();
            out.write_all(self.text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::new(format!("stdout: {e}")))
        } else {
            fs::write(output, &self.text).map_err(|e| CliError::new(format!("{output}: {e}")))
        }
    }
}
