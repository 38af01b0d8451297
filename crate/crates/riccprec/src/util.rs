//! Small shared helpers.

/// Formats a float with 17 significant digits so the text round-trips to
/// the exact same f64.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}
