use proptest::prelude::*;
use stackplay::policy::*;
use stackplay::simworld::{ClassName, EpisodeOutcome, Outcome, MAX_ATTEMPTS};

/// Independent table of the reward schedule.
fn expected_reward(outcome: Outcome, k: u32) -> f64 {
    match outcome {
        Outcome::Miss => -1.0,
        Outcome::Touch => 9.0,
        Outcome::Stacked => [1000.0, 900.0, 800.0, 700.0, 600.0, 500.0, 400.0, 300.0, 200.0, 100.0][k as usize - 1],
    }
}

#[test]
fn reward_table_is_exact() {
    for k in 1..=10 {
        for o in [Outcome::Miss, Outcome::Touch, Outcome::Stacked] {
            assert_eq!(reward(o, k), expected_reward(o, k), "{o:?} at attempt {k}");
        }
    }
    assert_eq!(reward(Outcome::Stacked, 2), 900.0);
    assert_eq!(reward(Outcome::Stacked, 10), 100.0);
    assert_eq!(reward(Outcome::Miss, 1), -1.0);
}

#[test]
#[should_panic]
fn reward_rejects_attempt_zero() {
    reward(Outcome::Miss, 0);
}

#[test]
#[should_panic]
fn reward_rejects_attempt_eleven() {
    reward(Outcome::Stacked, 11);
}

#[test]
fn centre_action_maps_to_destination_centre() {
    let a = RlAction([500.0, 500.0]);
    assert_eq!(a.to_placement().coord(), [0.0, 0.0]);
    assert_eq!(RlAction::from_normalized([0.0, 0.0]), a);
    let edge = RlAction([1000.0, 0.0]).to_placement().coord();
    assert_eq!(edge, [0.999, -0.999]);
}

proptest! {
    #[test]
    fn any_actor_output_is_clamped(u in prop::array::uniform2(prop_oneof![any::<f64>(), -5.0f64..5.0])) {
        let a = RlAction::from_normalized(u);
        prop_assert!(a.0.iter().all(|v| (0.0..=1000.0).contains(v)));
        let p = a.to_placement().coord();
        prop_assert!(p.iter().all(|v| *v > -1.0 && *v < 1.0));
    }
}

fn tiny_config(seed: u64) -> Td3Config {
    Td3Config { max_steps: 1500, warmup_steps: 200, batch_size: 32, hidden: 16, window: 20, seed, ..Td3Config::default() }
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let a = td3_train(&tiny_config(3)).unwrap();
    let b = td3_train(&tiny_config(3)).unwrap();
    assert_eq!(a.imprecise, b.imprecise);
    assert_eq!(a.accurate, b.accurate);
    assert_eq!(a.curve, b.curve);
    let ck = &a.imprecise;
    ck.validate().unwrap();
    assert_eq!(ck.quality, PolicyQuality::Imprecise);
    let back = PolicyCheckpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(&back, ck);
    assert!(ck.replay.len <= ck.replay.capacity);
    // the curve is logged per episode with non-decreasing timesteps
    assert!(a.curve.windows(2).all(|w| w[0].timestep <= w[1].timestep));
}

#[test]
fn evaluation_respects_episode_rules() {
    let policy = td3_train(&tiny_config(5)).unwrap().imprecise;
    for class in EVAL_CLASSES {
        let r = evaluate_policy(&policy, class, 300, 9).unwrap();
        let again = evaluate_policy(&policy, class, 300, 9).unwrap();
        assert_eq!(r, again);
        let used: usize = r.episodes.iter().map(|e| e.records.len()).sum();
        assert!(used <= 300);
        for e in &r.episodes {
            e.validate().unwrap();
            assert!(e.records.len() <= MAX_ATTEMPTS);
            let first_success = e.records.iter().position(|x| x.supported);
            match first_success {
                Some(i) => {
                    assert_eq!(i, e.records.len() - 1, "episode continues after success");
                    assert_eq!(e.outcome, EpisodeOutcome::Stacked);
                }
                None => assert_eq!(e.records.len(), MAX_ATTEMPTS),
            }
            for rec in &e.records {
                assert_eq!(rec.reward, expected_reward(rec.outcome(), rec.attempt_idx));
            }
            let total: f64 = e.records.iter().map(|x| x.reward).sum();
            assert_eq!(e.records.last().unwrap().cum_reward, total);
        }
        if class == ClassName::Sphere {
            assert_eq!(r.successes(), 0);
        }
    }
}

#[test]
fn incomplete_final_episode_is_dropped() {
    let policy = td3_train(&tiny_config(6)).unwrap().imprecise;
    // sphere episodes always use all ten attempts
    let r = evaluate_policy(&policy, ClassName::Sphere, 95, 1).unwrap();
    assert_eq!(r.episodes.len(), 9);
    assert!(r.episodes.iter().all(|e| e.records.len() == 10));
}

#[test]
fn config_validation() {
    assert!(td3_train(&Td3Config { batch_size: 0, ..Td3Config::default() }).is_err());
    assert!(td3_train(&Td3Config { polyak: 1.0, ..Td3Config::default() }).is_err());
    assert!(td3_train(&Td3Config { imprecise_band: (0.7, 0.5), ..Td3Config::default() }).is_err());
}

#[test]
fn curve_exports_are_deterministic() {
    let out = td3_train(&tiny_config(7)).unwrap();
    let csv = curve_csv(&out.curve);
    assert_eq!(csv.lines().count(), out.curve.len() + 1);
    assert_eq!(curve_svg(&out.curve), curve_svg(&out.curve));
    assert_eq!(csv, curve_csv(&out.curve));
}
