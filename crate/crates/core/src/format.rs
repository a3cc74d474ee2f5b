//! Shared number formatting for CSV output.

/// Formats `x` with 17 significant digits, enough to reproduce any `f64`
/// exactly when parsed back.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}
