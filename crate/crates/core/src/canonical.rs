//! Canonical JSON: object keys sorted, every float written as `{:.16e}`
//! (17 significant digits, exact round trip), non-finite floats as `null`.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};

struct Canonical;

impl Formatter for Canonical {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        // -0.0 prints as 0 so equal values print identically
        let v = if value == 0.0 { 0.0 } else { value };
        write!(writer, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Canonical single-line JSON for `value`.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // going through `Value` sorts the keys (its map is a BTreeMap)
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Canonical);
    v.serialize(&mut ser).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(out).expect("serde_json writes utf-8"))
}
