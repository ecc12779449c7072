mod common;

use common::strategy::{case, renaming};
use common::*;
use popver_core::config::{AgentId, IdConfig};
use popver_core::protocol::ProtocolSpec;
use popver_core::protocol::StateId;
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn fixtures() -> &'static [ProtocolSpec] {
    static FIXTURES: OnceLock<Vec<ProtocolSpec>> = OnceLock::new();
    FIXTURES.get_or_init(axiom_fixtures)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn step_axioms_hold((f, agents, packets, targets, flip) in case(22)) {
        let spec = &fixtures()[f];
        let c = id_config(spec, &agents, &packets);
        let r = renaming(&agents, &packets, &targets, flip);
        if let Err(e) = all_axioms(spec, &c, &r) {
            prop_assert!(false, "{}", e);
        }
    }
}

#[test]
fn fixture_count_matches_the_strategy() {
    assert_eq!(axiom_fixtures().len(), 22);
}

#[test]
fn exhaustive_small_configurations() {
    let n = exhaustive_axioms(&axiom_fixtures()).unwrap();
    assert!(n > 1000, "{n}");
}

#[test]
fn broadcast_with_gapped_ids() {
    let spec = popver_core::corpus::eq_bcast();
    let c = IdConfig {
        agents: BTreeMap::from([
            (AgentId(2), StateId(0)),
            (AgentId(5), StateId(1)),
            (AgentId(7), StateId(2)),
        ]),
        packets: BTreeMap::new(),
    };
    let r = Renaming {
        agents: BTreeMap::from([
            (AgentId(2), AgentId(0)),
            (AgentId(5), AgentId(2)),
            (AgentId(7), AgentId(5)),
        ]),
        packets: BTreeMap::new(),
    };
    all_axioms(&spec, &c, &r).unwrap();
    all_axioms(&spec.with_unreliable(true), &c, &r).unwrap();
}

#[test]
fn merging_renaming_is_caught() {
    // Merging two agents into one id is not a renaming; the check must say so.
    let spec = popver_core::corpus::eq_pp();
    let c = id_config(&spec, &[(0, 0), (1, 1)], &[]);
    let wrong = Renaming {
        agents: BTreeMap::from([(AgentId(0), AgentId(0)), (AgentId(1), AgentId(0))]),
        packets: BTreeMap::new(),
    };
    assert!(anonymity(&spec, &c, &wrong).is_err());
}
