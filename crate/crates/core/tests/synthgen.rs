use gaze_ident::preprocess::smooth;
use gaze_ident::segmentation::ivt_segment;
use gaze_ident::synthgen::{fixation_recall_precision, generate_full, MIN_FIXATION_S};
use gaze_ident::{IvtConfig, SegmentKind, SgConfig, SynthConfig};
use proptest::prelude::*;

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_users: 4,
        duration_s: 60.0,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_same_output() {
    assert_eq!(
        generate_full(&small(3)).unwrap(),
        generate_full(&small(3)).unwrap()
    );
    let a = generate_full(&small(3)).unwrap();
    let b = generate_full(&small(4)).unwrap();
    assert_ne!(a.dataset, b.dataset);
    assert_ne!(a.profiles, b.profiles);
}

#[test]
fn sessions_differ_but_share_profile() {
    let s = generate_full(&small(0)).unwrap();
    let users = s.dataset.users();
    for u in &users {
        let r1 = s.dataset.recording(u, gaze_ident::Session::S1).unwrap();
        let r2 = s.dataset.recording(u, gaze_ident::Session::S2).unwrap();
        assert_ne!(r1.trajectory, r2.trajectory);
        assert_eq!(r1.trajectory.len(), 12_000);
    }
    assert_eq!(s.profiles.len(), 4);
    assert!(s.dataset.manifest().extra.contains_key("generator"));
}

#[test]
fn ground_truth_is_well_formed() {
    let s = generate_full(&small(1)).unwrap();
    for ((_, _), events) in &s.truth {
        assert_eq!(events[0].start_idx, 0);
        assert_eq!(events.last().unwrap().end_idx, 12_000);
        for w in events.windows(2) {
            assert_eq!(w[0].end_idx, w[1].start_idx);
            assert_ne!(w[0].kind, w[1].kind);
        }
        let last = events.len() - 1;
        for e in &events[..last] {
            if e.kind == SegmentKind::Fixation {
                assert!(e.end_t - e.start_t >= MIN_FIXATION_S - 1e-12);
            }
        }
    }
}

#[test]
fn detector_recovers_ground_truth() {
    let s = generate_full(&small(2)).unwrap();
    let sg = SgConfig::default();
    let ivt = IvtConfig::default();
    for r in s.dataset.recordings() {
        let truth = &s.truth[&(r.user_id.clone(), r.session)];
        let seg = ivt_segment(&smooth(&r.trajectory, &sg).unwrap(), &ivt).unwrap();
        let expected = truth
            .iter()
            .filter(|e| e.kind == SegmentKind::Fixation)
            .count() as f64;
        let got = seg.count(SegmentKind::Fixation) as f64;
        assert!(
            (got - expected).abs() <= 0.15 * expected,
            "{got} vs {expected}"
        );
        let (recall, precision) = fixation_recall_precision(truth, &seg.segments);
        assert!(recall >= 0.9 && precision >= 0.9, "{recall} {precision}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn output_is_finite_and_sized(seed in any::<u64>(), users in 2usize..5, secs in 10u32..25) {
        let cfg = SynthConfig { n_users: users, duration_s: secs as f64, seed, ..SynthConfig::default() };
        let s = generate_full(&cfg).unwrap();
        prop_assert_eq!(s.dataset.recordings().len(), 2 * users);
        for r in s.dataset.recordings() {
            prop_assert_eq!(r.trajectory.len(), secs as usize * 200);
            prop_assert!(r.trajectory.x().iter().chain(r.trajectory.y()).all(|v| v.is_finite()));
        }
    }
}

#[test]
fn rejects_bad_configs() {
    for cfg in [
        SynthConfig {
            n_users: 1,
            ..small(0)
        },
        SynthConfig {
            duration_s: 1.0,
            ..small(0)
        },
        SynthConfig {
            session_noise_scale: -1.0,
            ..small(0)
        },
        SynthConfig {
            dataset_id: String::new(),
            ..small(0)
        },
    ] {
        assert!(generate_full(&cfg).is_err());
    }
}
