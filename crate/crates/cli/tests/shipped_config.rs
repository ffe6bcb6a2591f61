use toponet_cli::RunConfig;

fn shipped() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml")
}

#[test]
fn shipped_default_config_matches_code() {
    if std::env::var_os("TOPONET_WRITE_DEFAULT_CONFIG").is_some() {
        std::fs::write(shipped(), RunConfig::default().to_toml().unwrap()).unwrap();
    }
    let text = std::fs::read_to_string(shipped()).unwrap();
    let config = RunConfig::from_toml(&text).unwrap();
    assert_eq!(config, RunConfig::default());
    let orders: Vec<usize> = config.chart.schedules.iter().map(|s| s.order).collect();
    assert_eq!(orders, [1, 2, 3, 4, 5]);
    assert_eq!(config.chart.schedule(3).unwrap().windows[..3], [7, 9, 11]);
}
