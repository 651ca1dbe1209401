//! One-parameter sweeps over a scenario.

use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, Result};
use crate::output::write_bundle;
use crate::runner::{ReportBundle, Runner};
use crate::scenario::Scenario;

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub value: Value,
    pub bundle: ReportBundle,
}

/// Replaces the value at a dotted path. The key must already exist in the
/// resolved scenario.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let unknown = || CliError::config(path, "unknown parameter");
    let mut node = root;
    let mut keys = path.split('.').peekable();
    while let Some(key) = keys.next() {
        let obj = node.as_object_mut().ok_or_else(unknown)?;
        let slot = obj.get_mut(key).ok_or_else(unknown)?;
        if keys.peek().is_none() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err(unknown())
}

/// Parses `--values`: comma separated, each item JSON if it parses and a
/// plain string otherwise.
pub fn parse_values(list: &str) -> Vec<Value> {
    list.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
        .collect()
}

/// The scenario for point `index`: `parameter` set to `value` and the seed
/// advanced to `base.seed + index`.
pub fn point_scenario(base: &Scenario, parameter: &str, value: &Value, index: usize) -> Result<Scenario> {
    if parameter == "seed" || parameter == "schema_version" {
        return Err(CliError::config(parameter, "cannot be swept"));
    }
    let mut json = serde_json::to_value(base).map_err(otdm_core::Error::from)?;
    set_path(&mut json, parameter, value.clone())?;
    json["seed"] = Value::from(base.seed.wrapping_add(index as u64));
    Scenario::from_value(json)
}

pub fn sweep(base: &Scenario, parameter: &str, values: &[Value]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(CliError::Usage("no sweep values given".into()));
    }
    // resolve every point first so a bad value fails before any run
    let scenarios = values
        .iter()
        .enumerate()
        .map(|(i, v)| point_scenario(base, parameter, v, i))
        .collect::<Result<Vec<_>>>()?;
    let mut runner = Runner::default();
    scenarios
        .iter()
        .zip(values)
        .enumerate()
        .map(|(index, (s, v))| {
            Ok(SweepPoint {
                index,
                value: v.clone(),
                bundle: runner.run(s)?,
            })
        })
        .collect()
}

/// Per-point bundles in `point_NNN/` plus a `sweep.csv` summary.
pub fn write_sweep(points: &[SweepPoint], parameter: &str, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join("sweep.csv");
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "index",
        "parameter",
        "value",
        "seed",
        "branch",
        "evm_percent",
        "q_i_db",
        "q_q_db",
        "ber_estimated",
        "ber_counted",
        "flatness_db",
        "sideband_suppression_db",
        "rmse_percent",
    ])?;
    for p in points {
        write_bundle(&p.bundle, &dir.join(format!("point_{:03}", p.index)))?;
        let head = [
            p.index.to_string(),
            parameter.to_string(),
            p.value.to_string(),
            p.bundle.scenario.seed.to_string(),
        ];
        if let Some(c) = &p.bundle.comb {
            let r = &c.calibration.report;
            let mut row = head.to_vec();
            row.extend(["".into(), "".into(), "".into(), "".into(), "".into(), "".into()]);
            row.extend([
                r.flatness_db.to_string(),
                r.sideband_suppression_db.to_string(),
                c.rmse_percent.to_string(),
            ]);
            w.write_record(&row)?;
        }
        for b in &p.bundle.branches {
            let m = &b.metrics;
            let mut row = head.to_vec();
            row.extend([
                b.branch.to_string(),
                m.evm_percent.mean.to_string(),
                m.q_i_db.mean.to_string(),
                m.q_q_db.mean.to_string(),
                m.ber_estimated.to_string(),
                m.ber_counted.to_string(),
                "".into(),
                "".into(),
                "".into(),
            ]);
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn paths_must_exist() {
        let mut v = json!({"a": {"b": 1}, "c": 2});
        set_path(&mut v, "a.b", json!(5)).unwrap();
        assert_eq!(v["a"]["b"], 5);
        assert!(set_path(&mut v, "a.x", json!(1)).is_err());
        assert!(set_path(&mut v, "c.d", json!(1)).is_err());
    }

    #[test]
    fn values_list() {
        assert_eq!(parse_values("15, 20,null,qpsk"), vec![json!(15), json!(20), Value::Null, json!("qpsk")]);
    }

    #[test]
    fn seeds_advance() {
        let base = Scenario {
            seed: 40,
            ..Scenario::default()
        };
        let s = point_scenario(&base, "fiber.length_km", &json!(10), 2).unwrap();
        assert_eq!(s.seed, 42);
        assert_eq!(s.fiber.length_km, 10.0);
        assert!(point_scenario(&base, "fiber.lenght", &json!(1), 0).is_err());
        assert!(point_scenario(&base, "seed", &json!(1), 0).is_err());
        assert!(point_scenario(&base, "n_branches", &json!(4), 0).is_err());
    }
}
