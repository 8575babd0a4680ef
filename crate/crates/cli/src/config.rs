//! Layered training configuration: preset, then config file, then
//! environment, then flags.

use std::path::Path;

use oppmodel::corpus::Source;
use oppmodel::train::{ModelKind, TrainConfig};
use serde_json::Value;

use crate::{Failure, ModelArg, Preset, TrainSettings};

pub(crate) fn model_kind(arg: ModelArg) -> ModelKind {
    match arg {
        ModelArg::Ranker => ModelKind::Ranker,
        ModelArg::Bow => ModelKind::Bow,
        ModelArg::Random => ModelKind::Random,
    }
}

pub(crate) fn parse_mix(list: &str) -> Result<Vec<Source>, Failure> {
    let mix = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Source::parse)
        .collect::<oppmodel::Result<Vec<_>>>()?;
    if mix.is_empty() {
        return Err(Failure::usage(format!("empty mixture {list:?}")));
    }
    Ok(mix)
}

/// Reads a JSON or (by `.toml` extension) TOML file into a JSON value.
pub(crate) fn read_config_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let value = if path.extension().is_some_and(|e| e == "toml") {
        let t: toml::Value = toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t)?
    } else {
        serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?
    };
    if !value.is_object() {
        return Err(Failure::usage(format!(
            "{}: config must be a table of settings",
            path.display()
        )));
    }
    Ok(value)
}

/// Objects merge key by key; anything else is replaced.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Debug)]
pub(crate) struct Resolved {
    pub config: TrainConfig,
    pub seed_source: &'static str,
}

pub(crate) fn resolve(
    settings: &TrainSettings,
    file: Option<Value>,
    flag_seed: Option<u64>,
    env_seed: Option<u64>,
) -> Result<Resolved, Failure> {
    let file_model = file
        .as_ref()
        .and_then(|f| f.get("model"))
        .and_then(Value::as_str)
        .map(ModelKind::parse)
        .transpose()?;
    let kind = settings
        .model
        .map(model_kind)
        .or(file_model)
        .unwrap_or(ModelKind::Ranker);
    let base = match settings.preset {
        Preset::Standard => TrainConfig {
            model: kind,
            ..TrainConfig::default()
        },
        Preset::Desk => TrainConfig::desk(kind),
    };
    let mut value = serde_json::to_value(&base)?;
    let file_seed = file.as_ref().and_then(|f| f.get("seed")).is_some();
    if let Some(f) = file {
        merge(&mut value, f);
    }
    let mut config: TrainConfig =
        serde_json::from_value(value).map_err(|e| Failure::usage(format!("config: {e}")))?;
    config.model = kind;

    let seed_source = if let Some(s) = flag_seed {
        config.seed = s;
        "flag"
    } else if let Some(s) = env_seed {
        config.seed = s;
        "env"
    } else if file_seed {
        "config"
    } else {
        "default"
    };
    if let Some(mix) = &settings.mix {
        config.mixture = parse_mix(mix)?;
    }
    if let Some(e) = settings.epochs {
        config.epochs = e;
    }
    if let Some(lr) = settings.lr {
        config.lr = Some(lr);
    }
    if let Some(b) = settings.batch {
        config.batch = b;
    }
    config.validate()?;
    Ok(Resolved {
        config,
        seed_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn settings() -> TrainSettings {
        TrainSettings {
            model: None,
            config: None,
            preset: Preset::Standard,
            mix: None,
            epochs: None,
            lr: None,
            batch: None,
        }
    }

    #[test]
    fn flags_beat_env_beat_file() {
        let file = json!({"seed": 1, "epochs": 3, "model": "bow"});
        let r = resolve(&settings(), Some(file.clone()), None, None).unwrap();
        assert_eq!((r.config.seed, r.seed_source), (1, "config"));
        assert_eq!(r.config.model, ModelKind::Bow);
        assert_eq!(r.config.epochs, 3);

        let r = resolve(&settings(), Some(file.clone()), None, Some(2)).unwrap();
        assert_eq!((r.config.seed, r.seed_source), (2, "env"));

        let mut s = settings();
        s.epochs = Some(7);
        s.model = Some(ModelArg::Ranker);
        let r = resolve(&s, Some(file), Some(3), Some(2)).unwrap();
        assert_eq!((r.config.seed, r.seed_source), (3, "flag"));
        assert_eq!(r.config.epochs, 7);
        assert_eq!(r.config.model, ModelKind::Ranker);
    }

    #[test]
    fn nested_sections_merge() {
        let file = json!({"ranker": {"d": 32, "ff_hidden": 64}});
        let cfg = resolve(&settings(), Some(file), None, None).unwrap().config;
        assert_eq!(cfg.ranker.d, 32);
        assert_eq!(cfg.ranker.heads, TrainConfig::default().ranker.heads);
    }

    #[test]
    fn mix_parsing() {
        assert_eq!(
            parse_mix("cd,ca,dnd").unwrap(),
            vec![Source::Cd, Source::Ca, Source::Dnd]
        );
        assert_eq!(parse_mix("").unwrap_err().code, 1);
        assert_eq!(parse_mix("cd,xx").unwrap_err().code, 1);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let file = json!({"batch": 0});
        assert_eq!(
            resolve(&settings(), Some(file), None, None)
                .unwrap_err()
                .code,
            1
        );
    }
}
