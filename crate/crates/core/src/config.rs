//! TOML configuration files with command-line overrides layered on top.

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::manifold::Family;

pub fn load_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<Table>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Recursively overwrites `base` with `overlay`; nested tables merge, any
/// other value replaces.
pub fn merge(base: &mut Table, overlay: Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Deserializes one section, naming it in errors.
pub fn section<T: DeserializeOwned>(table: &Table, key: &str) -> Result<T> {
    let v = table
        .get(key)
        .cloned()
        .ok_or_else(|| Error::Config(format!("missing [{key}] section")))?;
    v.try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{key}]: {}", e.message())))
}

/// Fills `intrinsic_dim` and `ambient_dim` from the family when absent.
pub fn fill_manifold_defaults(m: &mut Table) -> Result<()> {
    let family: Family = match m.get("family") {
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| {
            Error::Config(format!("[manifold] family: {}", e.message()))
        })?,
        None => return Err(Error::Config("[manifold] needs a family".into())),
    };
    let d = match m.get("intrinsic_dim").and_then(Value::as_integer) {
        Some(d) => d,
        None => {
            let d = match family {
                Family::Circle | Family::M1 | Family::M2 => 1,
                Family::Sphere | Family::Torus => 2,
            };
            m.insert("intrinsic_dim".into(), Value::Integer(d));
            d
        }
    };
    if !m.contains_key("ambient_dim") {
        m.insert("ambient_dim".into(), Value::Integer(d + 1));
    }
    Ok(())
}
