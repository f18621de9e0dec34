//! Every bundled scenario must survive parse -> serialize -> reparse with
//! nothing lost: the serialized form is the canonical on-disk format.

use evodyn_cli::config::ScenarioConfig;
use std::path::PathBuf;

fn bundled(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

#[test]
fn bundled_scenarios_round_trip_exactly() {
    for name in [
        "paper_sec5.cfg",
        "skew_rps.cfg",
        "fox83_remark5.cfg",
        "coordination_remark5.cfg",
    ] {
        let first = bundled(name);
        let text = first.serialize();
        let second = ScenarioConfig::parse(&text)
            .unwrap_or_else(|e| panic!("reparsing serialized {name}: {e}"));
        assert_eq!(first, second, "{name} changed across a round trip");
        let third = ScenarioConfig::parse(&second.serialize()).unwrap();
        assert_eq!(second, third, "{name} serialization is not a fixed point");
    }
}

#[test]
fn bundled_scenarios_build_their_objects() {
    for name in [
        "paper_sec5.cfg",
        "skew_rps.cfg",
        "fox83_remark5.cfg",
        "coordination_remark5.cfg",
    ] {
        let cfg = bundled(name);
        cfg.build_mechanism()
            .unwrap_or_else(|e| panic!("{name} mechanism: {e}"));
        let rules = cfg
            .build_rules(false)
            .unwrap_or_else(|e| panic!("{name} rules: {e}"));
        assert!(!rules.is_empty());
        let starts = cfg
            .build_initials()
            .unwrap_or_else(|e| panic!("{name} starts: {e}"));
        assert!(!starts.is_empty());
        cfg.build_integrator()
            .unwrap_or_else(|e| panic!("{name} integrator: {e}"));
    }
}
