//! Numeric formatting for report files.
//!
//! Report CSVs are formatted with a fixed six significant digits so runs are
//! byte-diffable across platforms. Data carriers (rasters, panel CSVs) instead
//! use Rust's shortest round-trip `Display` so re-reading them is lossless.

/// Format `x` with six significant digits.
///
/// Uses fixed notation when the decimal exponent lies in `[-4, 5]` and
/// scientific notation otherwise, with trailing zeros trimmed. Zero prints
/// as `0`; non-finite values print as `nan`, `inf`, `-inf`.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }

    // Round to 6 significant digits via the exact decimal conversion.
    let sci = format!("{:.5e}", x);
    let (mantissa, exp_str) = sci.split_once('e').expect("{:.5e} always has an exponent");
    let exp: i32 = exp_str.parse().expect("exponent is an integer");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    let body = if (-4..=5).contains(&exp) {
        if exp >= 0 {
            let split = (exp + 1) as usize;
            let int_part = &digits[..split];
            let frac_part = digits[split..].trim_end_matches('0');
            if frac_part.is_empty() {
                int_part.to_string()
            } else {
                format!("{int_part}.{frac_part}")
            }
        } else {
            let frac = format!("{}{}", "0".repeat((-exp - 1) as usize), digits);
            format!("0.{}", frac.trim_end_matches('0'))
        }
    } else {
        let head = &digits[..1];
        let tail = digits[1..].trim_end_matches('0');
        if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        }
    };

    if negative {
        format!("-{body}")
    } else {
        body
    }
}
