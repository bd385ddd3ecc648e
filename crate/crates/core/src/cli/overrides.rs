use serde_json::Value;

use crate::clt_harness::ExperimentConfig;
use crate::error::{Error, Result};

/// Every dotted path addressable by `--set`, objects included.
pub fn valid_keys(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    collect(v, "", &mut out);
    out
}

fn collect(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            out.push(path.clone());
            collect(child, &path, out);
        }
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `KEY=VALUE` pairs to a configuration, rejecting unknown keys.
pub fn apply(cfg: ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig> {
    if overrides.is_empty() {
        return Ok(cfg);
    }
    let mut root = serde_json::to_value(&cfg)?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::config("--set", format!("expected KEY=VALUE, got `{item}`")))?;
        let keys = valid_keys(&root);
        if !keys.iter().any(|k| k == key) {
            return Err(Error::config(
                key,
                format!("unknown override key; valid keys are: {}", keys.join(", ")),
            ));
        }
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot.get_mut(part).expect("key listed as valid");
        }
        *slot = parse_value(raw);
    }
    serde_json::from_value(root).map_err(|e| Error::config("--set", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_override() {
        let c = apply(
            ExperimentConfig::default(),
            &["n=500".into(), "tolerances.eta_probe=1e-6".into(), "beta=1".into()],
        )
        .unwrap();
        assert_eq!(c.n, 500);
        assert_eq!(c.tolerances.eta_probe, 1e-6);
        assert_eq!(c.beta, crate::Beta::Orthogonal);
    }

    #[test]
    fn variant_switch() {
        let c = apply(ExperimentConfig::default(), &[r#"mu_a={"atoms":[-1,1]}"#.into()]).unwrap();
        assert_eq!(c.mu_a.resolve(2).unwrap().atoms(), &[-1.0, 1.0]);
    }

    #[test]
    fn unknown_key_lists_valid_ones() {
        match apply(ExperimentConfig::default(), &["nsamples=3".into()]) {
            Err(Error::ConfigInvalid { field, message }) => {
                assert_eq!(field, "nsamples");
                assert!(message.contains("n_samples") && message.contains("tolerances.eta_probe"));
            }
            other => panic!("{other:?}"),
        }
    }
}
