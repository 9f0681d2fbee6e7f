//! Serialization helpers: JSON with 17-significant-digit decimal floats
//! (bit-exact round trips), CSV formatting, and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{}", format_float(value))
    }
}

/// 17 significant digits: enough to reconstruct any finite f64 exactly.
pub fn format_float(value: f64) -> String {
    if value == 0.0 {
        // Avoid "-0e0" noise; -0.0 round-trips as 0.0 for our purposes.
        return "0.0".to_string();
    }
    format!("{:.16e}", value)
}

/// Serialize to JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

/// Write a file atomically (temp file in the same directory, then rename).
pub fn atomic_write(path: &Path, data: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".tmp_{}_{}",
        std::process::id(),
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// FNV-1a hash of a canonical config string, as a hex tag for output metadata.
pub fn config_hash(canonical: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_bit_exact() {
        for &x in &[
            0.1,
            -3.75e-7,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            -0.0,
            5e-324,
        ] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            if x == 0.0 {
                assert_eq!(back, 0.0);
            } else {
                assert_eq!(back.to_bits(), x.to_bits(), "{s}");
            }
        }
    }

    #[test]
    fn json_floats_round_trip_through_text() {
        #[derive(serde::Serialize, serde::Deserialize)]
        struct Blob {
            xs: Vec<f64>,
        }
        let blob = Blob { xs: vec![0.1 + 0.2, 1e-300, 987654321.123456789] };
        let text = to_json_string(&blob).unwrap();
        let back: Blob = serde_json::from_str(&text).unwrap();
        for (a, b) in blob.xs.iter().zip(&back.xs) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
