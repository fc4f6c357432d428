//! Property suites over whole paths: admissibility, ledgers, determinism and
//! independence from the worker count.

use proptest::prelude::*;
use stirring::contact::{
    advance, random_configuration, run_path, run_path_with, step, FarField, Mode, SimConfig, SystemState,
};
use stirring::geometry::{Space, Vector};
use stirring::rng::{replica_rng, run_replicas};

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Pushing), Just(Mode::Frozen)]
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_steps_keep_constraints(
        seed in any::<u64>(),
        m in mode(),
        noise in prop::array::uniform3(-0.3..0.3f64),
        r in 6.0..12.0f64,
    ) {
        let sp = Space::<3>::torus(r).unwrap();
        let mut rng = replica_rng(seed, 0);
        let s = random_configuration(&sp, 2.2, &mut rng).unwrap();
        let cfg = SimConfig::new(sp, 1e-3, 1.0, seed, m).unwrap();
        let (next, rep) = step(&s, &cfg, Vector(noise)).unwrap();
        prop_assert!(next.constraints_hold(&sp, 1e-9));
        prop_assert!(rep.d_lx >= 0.0 && rep.d_ly >= 0.0);
        prop_assert!(next.lx() >= s.lx() && next.ly() >= s.ly());
        if m == Mode::Frozen {
            prop_assert_eq!(next.x.center(), s.x.center());
            prop_assert_eq!(next.y.unwrap().center(), s.y.unwrap().center());
        }
    }

    #[test]
    fn paths_stay_admissible(seed in any::<u64>(), m in mode()) {
        let sp = Space::<2>::torus(8.0).unwrap();
        let mut rng = replica_rng(seed, 1);
        let init = random_configuration(&sp, 2.5, &mut rng).unwrap();
        let cfg = SimConfig::new(sp, 1e-3, 5.0, seed, m).unwrap();
        let mut prev_l = 0.0;
        let mut ok = true;
        let rec = run_path_with(&cfg, &init, 0, |s, _| {
            ok &= s.constraints_hold(&sp, 1e-9) && s.local_time() >= prev_l;
            prev_l = s.local_time();
        }).unwrap();
        prop_assert!(ok);
        // the inverse clock undoes the ledger
        let top = rec.ledger.final_level();
        for k in 0..=10 {
            let level = top * (k as f64 / 10.0);
            let t = rec.ledger.sigma(level).unwrap();
            prop_assert!((rec.ledger.level_at(t) - level).abs() <= 1e-9 * (1.0 + level));
        }
    }

    #[test]
    fn single_ball_displacement_is_minus_vector_local_time(seed in any::<u64>()) {
        let sp = Space::<2>::euclidean();
        let init = SystemState::new(&sp, sp.point([1.0, 0.0]), sp.point([0.0, 0.0]), None).unwrap();
        let cfg = SimConfig::new(sp, 1e-3, 3.0, seed, Mode::Pushing).unwrap();
        let rec = run_path(&cfg, &init).unwrap();
        let s = rec.final_state;
        let moved = s.x.lifted.coords - init.x.lifted.coords;
        prop_assert!((moved + s.x.vector_local_time).norm() < 1e-9);
        prop_assert!(s.x.vector_local_time.norm() <= s.lx() + 1e-12);
    }

    #[test]
    fn identical_seeds_give_identical_paths(seed in any::<u64>(), m in mode()) {
        let sp = Space::<2>::torus(10.0).unwrap();
        let mut rng = replica_rng(seed, 2);
        let init = random_configuration(&sp, 2.5, &mut rng).unwrap();
        let mut cfg = SimConfig::new(sp, 1e-3, 2.0, seed, m).unwrap();
        cfg.snapshot_stride = 50;
        let a = run_path(&cfg, &init).unwrap();
        let b = run_path(&cfg, &init).unwrap();
        prop_assert_eq!(a.final_state, b.final_state);
        prop_assert_eq!(a.snapshots, b.snapshots);
        prop_assert_eq!(a.ledger.entries(), b.ledger.entries());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn replica_results_ignore_worker_count(seed in any::<u64>(), threads in 2usize..6) {
        let sp = Space::<2>::torus(10.0).unwrap();
        let mut rng = replica_rng(seed, 3);
        let init = random_configuration(&sp, 2.5, &mut rng).unwrap();
        let cfg = SimConfig::new(sp, 1e-3, 0.0, seed, Mode::Pushing).unwrap();
        let far = FarField::new(0.1);
        let job = || {
            run_replicas(7, seed, |_, rng| {
                let mut s = init;
                while s.t < 20.0 {
                    advance(&mut s, &cfg, Some(&far), rng).unwrap();
                }
                s
            })
        };
        let one = in_pool(1, job);
        let many = in_pool(threads, job);
        prop_assert_eq!(one, many);
    }
}
