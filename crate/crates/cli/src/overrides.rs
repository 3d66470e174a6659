//! Dotted-path `--set key=value` edits applied to the scenario JSON before
//! it is deserialized. Values parse as JSON when they can (numbers, bools,
//! arrays) and fall back to strings, so `--set stimulus.kind=ofdm` works
//! without quoting.

use beamrx::{Error, Result};
use serde_json::Value;

pub fn apply(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("--set '{spec}' is not KEY=VALUE")))?;
    if path.is_empty() {
        return Err(Error::invalid("--set key is empty"));
    }
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let mut value = Some(parsed);
    let segments: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = cur.as_array_mut().ok_or_else(|| {
                Error::invalid(format!("'{}' is not an array", segments[..i].join(".")))
            })?;
            if idx >= arr.len() {
                return Err(Error::invalid(format!(
                    "index {idx} out of range for '{}' (len {})",
                    segments[..i].join("."),
                    arr.len()
                )));
            }
            if last {
                arr[idx] = value.take().unwrap();
                return Ok(());
            }
            cur = &mut arr[idx];
        } else {
            let obj = cur.as_object_mut().ok_or_else(|| {
                Error::invalid(format!("'{}' is not an object", segments[..i].join(".")))
            })?;
            if last {
                obj.insert(seg.to_string(), value.take().unwrap());
                return Ok(());
            }
            cur = obj.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()));
        }
    }
    unreachable!("loop always returns on the last segment")
}

/// True when `spec`'s dotted path still resolves after the scenario has
/// round-tripped through its typed form. A path the schema does not know is
/// dropped by deserialization, turning the override into a silent no-op;
/// the caller turns that into an error naming the path. Explicit `null`
/// assignments are exempt: they unset optional fields, which legitimately
/// disappear from the round-trip.
pub fn survives(root: &Value, spec: &str) -> bool {
    let Some((path, raw)) = spec.split_once('=') else {
        return true;
    };
    let parsed: Value = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    if parsed.is_null() {
        return true;
    }
    let mut cur = root;
    for seg in path.split('.') {
        let next = match seg.parse::<usize>() {
            Ok(idx) => cur.as_array().and_then(|a| a.get(idx)),
            Err(_) => cur.as_object().and_then(|o| o.get(seg)),
        };
        match next {
            Some(v) => cur = v,
            None => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sets_nested_values_creating_missing_maps() {
        let mut v = json!({});
        apply(&mut v, "frontend.chain.vga_setting_db=-15").unwrap();
        apply(&mut v, "seed=9").unwrap();
        apply(&mut v, "stimulus.kind=ofdm").unwrap();
        assert_eq!(v["frontend"]["chain"]["vga_setting_db"], json!(-15));
        assert_eq!(v["seed"], json!(9));
        assert_eq!(v["stimulus"]["kind"], json!("ofdm"));
    }

    #[test]
    fn indexes_into_arrays() {
        let mut v = json!({"mismatch": [{"gain_err_db": 0.0}, {"gain_err_db": 0.0}]});
        apply(&mut v, "mismatch.1.gain_err_db=2.5").unwrap();
        assert_eq!(v["mismatch"][1]["gain_err_db"], json!(2.5));
        assert!(apply(&mut v, "mismatch.7.gain_err_db=1").is_err());
    }

    #[test]
    fn whole_json_values_pass_through() {
        let mut v = json!({});
        apply(&mut v, r#"taper={"kind":"linear_pedestal","pedestal_db":-6.0}"#).unwrap();
        assert_eq!(v["taper"]["pedestal_db"], json!(-6.0));
    }

    #[test]
    fn malformed_specs_are_rejected() {
        let mut v = json!({});
        assert!(apply(&mut v, "no-equals-sign").is_err());
        assert!(apply(&mut v, "=5").is_err());
        v = json!({"seed": 3});
        assert!(apply(&mut v, "seed.nested=1").is_err());
    }

    #[test]
    fn survives_tracks_what_the_round_trip_kept() {
        let v = json!({"seed": 3, "frontend": {"chain": {"vga_setting_db": -15.0}},
            "stages": [{"nf_db": 2.5}]});
        assert!(survives(&v, "seed=3"));
        assert!(survives(&v, "frontend.chain.vga_setting_db=-15"));
        assert!(survives(&v, "stages.0.nf_db=2.5"));
        assert!(!survives(&v, "frontend.chain.vga_settng_db=-15"));
        assert!(!survives(&v, "no_such_key=1"));
        assert!(!survives(&v, "stages.3.nf_db=2.5"));
        // null unsets an optional field, so its key may vanish.
        assert!(survives(&v, "frontend.chain.absent=null"));
    }
}
