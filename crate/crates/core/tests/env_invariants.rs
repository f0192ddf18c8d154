use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsltl::env::{
    Action, EnvConfig, Environment, LetterWorld, LetterWorldConfig, Observation, ZoneSim, ZoneSimConfig,
};
use zsltl::ltl::Assignment;

#[test]
fn letterworld_label_is_the_letter_under_the_agent() {
    let mut env = LetterWorld::new(LetterWorldConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let obs = env.reset(&mut rng).unwrap();
        assert!(env.label().is_empty(), "agent spawns on an empty cell");
        let Observation::Grid { size, cells } = obs else { panic!() };
        assert_eq!(size, 7);
        let counts = (0..12).map(|l| cells.iter().filter(|c| c.contains(l)).count());
        assert!(counts.into_iter().all(|c| c == 2));
        for t in 1..=env.max_steps() {
            let res = env.step(&Action::Discrete(rng.random_range(0..4)));
            let (r, c) = env.agent();
            let expected = env.letter_at(r, c).map_or(Assignment::EMPTY, Assignment::singleton);
            assert_eq!(res.label, expected);
            let Observation::Grid { size, cells } = &res.observation else { panic!() };
            assert_eq!(cells[(size / 2) * size + size / 2], expected);
            assert_eq!(res.done, t == env.max_steps());
        }
    }
}

#[test]
fn letterworld_wraps_around_the_torus() {
    let mut env = LetterWorld::new(LetterWorldConfig { grid_size: 5, letters: vec!["a".into()], ..Default::default() }).unwrap();
    env.set_layout(vec![None; 25], (0, 0));
    env.step(&Action::Discrete(0));
    assert_eq!(env.agent(), (4, 0));
    env.step(&Action::Discrete(2));
    assert_eq!(env.agent(), (4, 4));
    env.step(&Action::Discrete(1));
    env.step(&Action::Discrete(3));
    assert_eq!(env.agent(), (0, 0));
}

#[test]
fn zonesim_readings_and_labels_are_consistent() {
    for overlap in [false, true] {
        let mut env = ZoneSim::new(ZoneSimConfig {
            overlap_mode: overlap,
            ..Default::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            env.reset(&mut rng).unwrap();
            if !overlap {
                for (i, a) in env.zones().iter().enumerate() {
                    for b in &env.zones()[i + 1..] {
                        let d = (a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]);
                        assert!(d > a.radius + b.radius);
                    }
                }
            }
            for _ in 0..200 {
                let a = Action::Continuous(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                let res = env.step(&a);
                let p = env.state().position;
                let h = env.config().half_extent;
                assert!(p[0].abs() <= h && p[1].abs() <= h);
                assert!(env.state().speed >= 0.0 && env.state().speed <= env.config().max_speed);
                let Observation::Lidar { ego, lidar } = &res.observation else { panic!() };
                assert_eq!(ego.len(), 3);
                for (color, l) in lidar.iter().enumerate() {
                    assert_eq!(l.len(), env.config().lidar_beams);
                    assert!(l.iter().all(|&v| (0.0..=1.0).contains(&v)));
                    let inside = res.label.contains(color);
                    assert_eq!(inside, env.zones().iter().any(|z| z.color == color && z.contains(p)));
                    if inside {
                        assert!(l.iter().all(|&v| v == 1.0));
                    }
                }
                if !overlap {
                    assert!(res.label.len() <= 1);
                }
            }
        }
    }
}

#[test]
fn resets_are_reproducible_per_seed() {
    for cfg in [
        EnvConfig::Letterworld(LetterWorldConfig::default()),
        EnvConfig::Zonesim(ZoneSimConfig::default()),
    ] {
        let mut a = cfg.build().unwrap();
        let mut b = cfg.build().unwrap();
        let oa = a.reset(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let ob = b.reset(&mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(oa, ob);
        assert_eq!(a.layout_json(), b.layout_json());
        assert!(a.layout_json().is_object());
    }
}
