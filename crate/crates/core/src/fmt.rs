//! Float rounding for serialized output.

/// Significant digits kept in JSON output.
pub const JSON_SIG_DIGITS: usize = 10;
/// Significant digits kept in CSV output.
pub const CSV_SIG_DIGITS: usize = 6;

/// Rounds to `digits` significant decimal digits. Non-finite values pass through.
pub fn round_to(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Rounds to the JSON precision.
pub fn round_sig(x: f64) -> f64 {
    round_to(x, JSON_SIG_DIGITS)
}

pub fn round_sig_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| round_sig(x)).collect()
}

/// Formats a value for CSV with six significant digits and no exponent for
/// ordinary magnitudes.
pub fn csv_float(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let r = round_to(x, CSV_SIG_DIGITS);
    format!("{r}")
}

/// Serde helper for `f64` fields that may be infinite (written as `null`).
pub mod opt_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(super::round_sig(*v))
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Serde helper rounding an `f64` field to the JSON precision.
pub mod sig {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::round_sig(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }
}
