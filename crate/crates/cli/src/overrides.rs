//! `key=value` overrides applied to a scenario through its TOML form.

use anyhow::{anyhow, bail, Context, Result};
use toml::Value;

use telehaptic::netsim::Scenario;

/// Sets every backward CBR source's rate.
pub const R_CBR: &str = "r_cbr";

pub fn parse_pair(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("override {s:?} is not key=value"))?;
    let k = k.trim();
    if k.is_empty() {
        bail!("override {s:?} has an empty key");
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// TOML literal if `raw` parses as one, otherwise a bare string.
fn literal(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Matches the new value to the type already stored, so `mu_kbps=2000`
/// stays a float and `name=42` stays a string.
fn coerce(old: &Value, new: Value, raw: &str) -> Value {
    match (old, new) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::String(_), n) if !n.is_str() => Value::String(raw.to_string()),
        (_, n) => n,
    }
}

fn slot<'a>(root: &'a mut Value, path: &str) -> Result<&'a mut Value> {
    let mut cur = root;
    for part in path.split('.') {
        cur = match cur {
            Value::Table(t) => t.get_mut(part).ok_or_else(|| anyhow!("no parameter {path:?}"))?,
            Value::Array(a) => {
                let i: usize = part
                    .parse()
                    .with_context(|| format!("{path:?}: {part:?} is not an index"))?;
                let len = a.len();
                a.get_mut(i)
                    .ok_or_else(|| anyhow!("{path:?}: index {i} out of range (len {len})"))?
            }
            _ => bail!("no parameter {path:?}"),
        };
    }
    Ok(cur)
}

fn set_one(root: &mut Value, key: &str, raw: &str) -> Result<()> {
    if key == R_CBR {
        let rate: f64 = raw.parse().with_context(|| format!("{R_CBR}={raw:?}"))?;
        let sources = slot(root, "cross_bwd")?
            .as_array_mut()
            .ok_or_else(|| anyhow!("cross_bwd is not a list"))?;
        let mut hit = false;
        for s in sources.iter_mut() {
            if s.get("kind").and_then(Value::as_str) == Some("cbr") {
                s.as_table_mut()
                    .expect("sources are tables")
                    .insert("rate_kbps".into(), Value::Float(rate));
                hit = true;
            }
        }
        if !hit {
            bail!("{R_CBR}: scenario has no backward CBR source");
        }
        return Ok(());
    }
    let target = slot(root, key)?;
    let new = coerce(target, literal(raw), raw);
    *target = new;
    Ok(())
}

/// Applies overrides in order and validates the result.
pub fn apply(sc: &Scenario, sets: &[(String, String)]) -> Result<Scenario> {
    if sets.is_empty() {
        return Ok(sc.clone());
    }
    let mut v = Value::try_from(sc).context("serializing scenario")?;
    for (k, raw) in sets {
        set_one(&mut v, k, raw)?;
    }
    let out: Scenario = v.try_into().context("override produced an invalid scenario")?;
    out.validate()?;
    Ok(out)
}

pub fn load(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let sc: Scenario = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    sc.validate()?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use telehaptic::netsim::{Protocol, TrafficSource};

    fn pairs(xs: &[&str]) -> Vec<(String, String)> {
        xs.iter().map(|s| parse_pair(s).unwrap()).collect()
    }

    #[test]
    fn nested_and_typed() {
        let base = Scenario {
            cross_bwd: vec![
                TrafficSource::vbr("v", 320.0, 480.0, 0.0, f64::INFINITY),
                TrafficSource::cbr("c", 400.0, 500.0, f64::INFINITY),
            ],
            ..Default::default()
        };
        let sc = apply(
            &base,
            &pairs(&[
                "protocol=no_merge",
                "mu_kbps=2000",
                "feedback.window=6",
                "cross_bwd.1.rate_kbps=350",
                "name=42",
            ]),
        )
        .unwrap();
        assert_eq!(sc.protocol, Protocol::NoMerge);
        assert_eq!(sc.mu_kbps, 2000.0);
        assert_eq!(sc.feedback.window, 6);
        assert_eq!(sc.cross_bwd[1].rate_kbps, 350.0);
        assert_eq!(sc.name, "42");

        let sc = apply(&base, &pairs(&["r_cbr=123.5"])).unwrap();
        assert_eq!(sc.cross_bwd[1].rate_kbps, 123.5);
        assert_eq!(sc.cross_bwd[0].lo_kbps, 320.0);
    }

    #[test]
    fn rejects_bad_overrides() {
        let base = Scenario::default();
        assert!(parse_pair("novalue").is_err());
        assert!(apply(&base, &pairs(&["nope=1"])).is_err());
        assert!(apply(&base, &pairs(&["protocol=carrier_pigeon"])).is_err());
        assert!(apply(&base, &pairs(&["feedback.alpha=2"])).is_err());
        assert!(apply(&base, &pairs(&["r_cbr=100"])).is_err());
        assert!(apply(&base, &pairs(&["cross_bwd.0.rate_kbps=1"])).is_err());
    }
}
