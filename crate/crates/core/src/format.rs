//! Number formatting shared by every text output.

/// Formats `x` with 9 significant digits, dropping trailing zeros.
///
/// ```
/// assert_eq!(dnbv::format::sig9(0.1 + 0.2), "0.3");
/// assert_eq!(dnbv::format::sig9(2.199114857512855), "2.19911486");
/// assert_eq!(dnbv::format::sig9(-1.0e-12), "-1e-12");
/// assert_eq!(dnbv::format::sig9(44.0), "44");
/// ```
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding may carry into a new digit (9.999999999 -> 10.0000000)
        trim_zeros(&s)
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, exponent) = s.split_once('e').expect("scientific format");
        format!("{}e{}", trim_zeros(mantissa), exponent)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
