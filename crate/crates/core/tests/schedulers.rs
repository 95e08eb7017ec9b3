//! Scheduler fairness and determinism.

use std::collections::HashSet;

use proptest::prelude::*;

use popcount::engine::{Configuration, Execution, InteractionPair, MobileState};
use popcount::protocols::{ProtocolId, SINK};
use popcount::schedulers::{pair_count, Scheduler, SchedulerKind};

proptest! {
    #[test]
    fn round_robin_window_covers_every_pair_once(n in 1usize..9, offset in 0u64..200) {
        let config = Configuration::with_marks(ProtocolId::Flip, &vec![0; n]).unwrap();
        let mut s = Scheduler::new(SchedulerKind::RoundRobin, 0);
        for _ in 0..offset {
            s.next_pair(&config).unwrap();
        }
        let window = pair_count(n) as usize;
        let seen: HashSet<InteractionPair> = (0..window).map(|_| s.next_pair(&config).unwrap()).collect();
        prop_assert_eq!(seen.len(), window);
    }

    #[test]
    fn seeded_schedulers_repeat(seed in any::<u64>(), n in 1usize..10) {
        let config = Configuration::with_marks(ProtocolId::TimeOpt, &vec![1; n]).unwrap();
        for kind in [SchedulerKind::UniformPair, SchedulerKind::BstOnly] {
            let mut a = Scheduler::new(kind, seed);
            let mut b = Scheduler::new(kind, seed);
            for _ in 0..50 {
                prop_assert_eq!(a.next_pair(&config).unwrap(), b.next_pair(&config).unwrap());
            }
        }
    }

    #[test]
    fn adversary_never_feeds_named_agents_while_work_remains(names in prop::collection::vec(0u32..6, 1..6)) {
        let n = names.len();
        let p = n as u32 + 1;
        let names: Vec<u32> = names.into_iter().map(|s| s % p).collect();
        let config = Configuration::with_names(p, &names).unwrap();
        let mut exec = Execution::new(ProtocolId::GrosNaming, config).unwrap();
        let mut s = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
        for _ in 0..(8usize << n) {
            let current: Vec<u32> = exec.config().names().unwrap();
            let has_sink = current.contains(&SINK);
            let mut sorted: Vec<u32> = current.iter().copied().filter(|&x| x != SINK).collect();
            sorted.sort_unstable();
            let has_homonym = sorted.windows(2).any(|w| w[0] == w[1]);
            if !has_sink && !has_homonym {
                break;
            }
            let pair = s.next_pair(exec.config()).unwrap();
            if let InteractionPair::Bst(i) = pair {
                prop_assert_eq!(exec.config().mobiles()[i], MobileState::Name(SINK));
            }
            if exec.step(pair).is_err() {
                break;
            }
        }
    }
}

#[test]
fn adversary_reduces_homonyms_when_no_sink_agent_is_left() {
    let config = Configuration::with_names(4, &[1, 1, 2]).unwrap();
    let mut s = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
    assert_eq!(s.next_pair(&config).unwrap(), InteractionPair::Mobiles(0, 1));
}

#[test]
fn adversary_rejects_bit_protocols() {
    let s = Scheduler::new(SchedulerKind::WeakAdversarial, 0);
    assert!(s.check_compatible(ProtocolId::Flip).is_err());
    assert!(s.check_compatible(ProtocolId::GrosNaming).is_ok());
}
