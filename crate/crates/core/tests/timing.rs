mod common;

use common::timing::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn late_scheduled_frames_are_never_sent(case in late_strategy()) {
        late_frames_are_discarded(case)?;
    }

    #[test]
    fn unscheduled_frames_leave_no_gap_or_overlap(case in tiling_strategy()) {
        unscheduled_frames_tile(case)?;
    }

    #[test]
    fn overflow_is_latched_and_reported_once(case in overflow_strategy()) {
        overflow_latches(case)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn receiver_without_transmitters_returns_seeded_noise(case in noise_strategy()) {
        noise_only_fill(case)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn backpressure_holds_the_caller_for_the_excess(case in backpressure_strategy()) {
        backpressure_blocks_for_the_excess(case)?;
    }
}
