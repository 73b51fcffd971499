//! Session configuration with environment overrides.

use mission_core::model::SessionConfig;

use crate::ServiceError;

pub const ENV_W_PROGRESS: &str = "MISSION_W_PROGRESS";
pub const ENV_W_RELEVANCE: &str = "MISSION_W_RELEVANCE";
pub const ENV_W_EXTERNAL: &str = "MISSION_W_EXTERNAL";
pub const ENV_TAU: &str = "MISSION_TAU";

/// Applies any overrides found through `lookup` and validates the result.
///
/// Weight overrides replace individual weights, so a partial override must
/// still leave the three weights summing to one.
pub fn apply_overrides(
    mut config: SessionConfig,
    lookup: impl Fn(&str) -> Option<String>,
) -> Result<SessionConfig, ServiceError> {
    let read = |key: &str| -> Result<Option<f64>, ServiceError> {
        match lookup(key) {
            None => Ok(None),
            Some(raw) => raw
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ServiceError::Config(format!("{key}={raw:?} is not a number"))),
        }
    };
    if let Some(v) = read(ENV_W_PROGRESS)? {
        config.weights.progress = v;
    }
    if let Some(v) = read(ENV_W_RELEVANCE)? {
        config.weights.relevance = v;
    }
    if let Some(v) = read(ENV_W_EXTERNAL)? {
        config.weights.external = v;
    }
    if let Some(v) = read(ENV_TAU)? {
        config.tau = v;
    }
    config.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
    Ok(config)
}

/// [`apply_overrides`] reading the process environment.
pub fn from_env(config: SessionConfig) -> Result<SessionConfig, ServiceError> {
    apply_overrides(config, |k| std::env::var(k).ok())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn lookup(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn no_overrides_keeps_defaults() {
        assert_eq!(apply_overrides(SessionConfig::default(), lookup(&[])).unwrap(), SessionConfig::default());
    }

    #[test]
    fn full_weight_override_applies() {
        let c = apply_overrides(
            SessionConfig::default(),
            lookup(&[(ENV_W_PROGRESS, "0.5"), (ENV_W_RELEVANCE, "0.3"), (ENV_W_EXTERNAL, "0.2"), (ENV_TAU, "0.7")]),
        )
        .unwrap();
        assert_eq!((c.weights.progress, c.weights.relevance, c.weights.external, c.tau), (0.5, 0.3, 0.2, 0.7));
    }

    #[test]
    fn weights_not_summing_to_one_are_rejected() {
        let r = apply_overrides(SessionConfig::default(), lookup(&[(ENV_W_PROGRESS, "0.9")]));
        assert!(matches!(r, Err(ServiceError::Config(_))));
    }

    #[test]
    fn non_numeric_value_names_the_variable() {
        let err = apply_overrides(SessionConfig::default(), lookup(&[(ENV_TAU, "high")])).unwrap_err();
        assert!(err.to_string().contains(ENV_TAU));
    }
}
