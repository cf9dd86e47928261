use coldbend::{Config, ConfigError};
use proptest::prelude::*;
use serde_json::json;

#[test]
fn defaults_resolve_to_themselves() {
    assert_eq!(Config::resolve(None, &[]).unwrap(), Config::default());
}

#[test]
fn settings_apply_after_the_file() {
    let file = json!({ "seed": 4, "train": { "hidden": 64 } });
    let c = Config::resolve(Some(&file), &["seed=9".into(), "optimize.criterion=min_stress".into()]).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.train.hidden, 64);
    assert_eq!(serde_json::to_value(c.optimize.criterion).unwrap(), json!("min_stress"));
    assert_eq!(c.train().seed, 9);
    assert_eq!(c.generate().split_seed, 10);
}

#[test]
fn unknown_and_malformed_settings_are_rejected() {
    assert!(matches!(Config::resolve(None, &["panel.mesh.edges=3".into()]), Err(ConfigError::UnknownKey(k)) if k == "panel.mesh.edges"));
    assert!(matches!(Config::resolve(None, &["seed".into()]), Err(ConfigError::Setting(_))));
    assert!(matches!(Config::resolve(None, &["panel=3".into()]), Err(ConfigError::BadValue { .. })));
    assert!(matches!(Config::resolve(None, &["seed=\"x\"".into()]), Err(ConfigError::Invalid(_))));
    assert!(matches!(Config::resolve(None, &["dataset.validation_fraction=1.5".into()]), Err(ConfigError::BadValue { .. })));
    assert!(matches!(Config::resolve(Some(&json!([1])), &[]), Err(ConfigError::Invalid(_))));
}

proptest! {
    #[test]
    fn a_resolved_config_is_a_fixed_point(seed in any::<u32>(), hidden in 1usize..1024, fraction in 0.0f64..0.99, edges in 8usize..200) {
        let settings = vec![
            format!("seed={seed}"),
            format!("train.hidden={hidden}"),
            format!("dataset.validation_fraction={fraction}"),
            format!("panel.mesh.boundary_edges={edges}"),
        ];
        let c = Config::resolve(None, &settings).unwrap();
        prop_assert_eq!(c.seed, seed as u64);
        prop_assert_eq!(c.train.hidden, hidden);
        prop_assert_eq!(c.dataset.validation_fraction, fraction);
        let again = Config::resolve(Some(&serde_json::to_value(&c).unwrap()), &[]).unwrap();
        prop_assert_eq!(again, c);
    }
}
