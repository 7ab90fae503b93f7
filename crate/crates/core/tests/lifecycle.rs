mod common;

#[test]
fn channels_follow_their_streams() {
    for n in [1, 3] {
        let r = common::lifecycle::check_lifecycle(n);
        assert!(r.is_ok(), "n={n}: {r:?}");
    }
}
