//! Number and CSV formatting with output that is stable byte for byte.

use csv::{Terminator, WriterBuilder};

const SIG_DIGITS: i32 = 9;

/// `%.9g`-style rendering: nine significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-5, 1e9)`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS).contains(&exp) {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Renders a CSV table with LF line endings.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?)
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn general_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(0.7), "0.7");
        assert_eq!(num(54.4), "54.4");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(21.5 / 36.0), "0.597222222");
        assert_eq!(num(123456789.0), "123456789");
        assert_eq!(num(1234567890.0), "1.23456789e+09");
        assert_eq!(num(1.5e-7), "1.5e-07");
        assert_eq!(num(0.0001), "0.0001");
        assert_eq!(num(-2.5), "-2.5");
        assert_eq!(num(9.9999999999), "10");
        assert_eq!(num(f64::NAN), "nan");
    }
}
