//! Number formatting shared by every CSV writer.

/// Formats with 17 significant digits so that parsing returns the same
/// `f64`. Positional notation for magnitudes in `[1e-5, 1e15)`, scientific
/// otherwise.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exponent) {
        let decimals = (16 - exponent).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.16e}")
    }
}
