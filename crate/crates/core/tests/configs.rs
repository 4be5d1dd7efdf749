use sasn::trainer::TrainConfig;

fn shipped(name: &str) -> TrainConfig {
    TrainConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/").to_string() + name)
        .unwrap()
}

#[test]
fn default_file_matches_defaults() {
    assert_eq!(shipped("default.cfg"), TrainConfig::default());
}

#[test]
fn desk_file_is_small() {
    let cfg = shipped("desk.cfg");
    assert_eq!((cfg.d_a, cfg.d_r), (16, 3));
}
