use proptest::prelude::*;
use xfdl_cli::ExperimentConfig;

/// (key, generator of out-of-range values, field named in the error)
fn bad_entry() -> impl Strategy<Value = (String, String)> {
    prop_oneof![
        (1.0001f64..1e6).prop_map(|v| (format!("alpha = {v}"), "alpha".to_string())),
        (-1e6f64..=0.0).prop_map(|v| (format!("alpha = {v}"), "alpha".to_string())),
        (100.0001f64..1e6).prop_map(|v| (format!("top_p = {v}"), "top_p".to_string())),
        (-1e6f64..-0.0001).prop_map(|v| (format!("top_p = {v}"), "top_p".to_string())),
        (1.0001f64..10.0).prop_map(|v| (format!("skew = {v}"), "skew".to_string())),
        (1.0f64..10.0).prop_map(|v| (format!("tau = {v}"), "tau".to_string())),
        (-10.0f64..=0.0).prop_map(|v| (format!("tau = {v}"), "tau".to_string())),
        (-10.0f64..-0.0001).prop_map(|v| (format!("lr = {v}"), "lr".to_string())),
        (-10.0f64..=0.0).prop_map(|v| (format!("eta_lambda = {v}"), "eta_lambda".to_string())),
        (-10.0f64..-0.0001).prop_map(|v| (format!("r_lambda = {v}"), "r_lambda".to_string())),
        (1.0f64..10.0).prop_map(|v| (format!("train_fraction = {v}"), "train_fraction".to_string())),
        (0usize..2).prop_map(|v| (format!("size = {v}"), "size".to_string())),
        Just(("clients = 0".to_string(), "clients".to_string())),
        Just(("rounds = 0".to_string(), "rounds".to_string())),
        Just(("local_epochs = 0".to_string(), "local_epochs".to_string())),
        Just(("batch_size = 0".to_string(), "batch_size".to_string())),
        Just(("probe_size = 0".to_string(), "probe_size".to_string())),
        Just(("train_ig_steps = 0".to_string(), "train_ig_steps".to_string())),
        (0.5f64..0.99).prop_map(|v| (format!("eMBB.label_noise = {v}"), "eMBB.label_noise".to_string())),
        (1.0f64..5.0).prop_map(|v| (format!("mMTC.loadings = 0.1,{v},0.1"), "mMTC.factor_loadings".to_string())),
        "zz[a-z]{1,6}_[a-z]{2,5}".prop_map(|k| (format!("{k} = 1"), k)),
    ]
}

proptest! {
    #[test]
    fn out_of_range_fields_are_named(
        (line, field) in bad_entry(),
        seed in 0u64..1000,
    ) {
        let text = format!("seed = {seed}\n{line}\n");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        prop_assert!(err.contains(&format!("`{field}`")), "{} -> {}", line, err);
    }

    #[test]
    fn in_range_values_are_accepted(
        alpha in 0.01f64..=1.0,
        top_p in 0.0f64..=100.0,
        skew in 0.0f64..=1.0,
        clients in 1u32..100,
    ) {
        let text = format!("alpha = {alpha}\ntop_p = {top_p}\nskew = {skew}\nclients = {clients}\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(c.alpha, vec![alpha; 3]);
        prop_assert_eq!(c.clients, clients);
    }
}
