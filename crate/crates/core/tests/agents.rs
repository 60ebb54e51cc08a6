use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hrlab::agents::{
    select_action, smdp_q_update, Agent, AgentConfig, AgentError, QTable, Transition, Variant,
};
use hrlab::envs::{ArmConfig, GeneratorConfig, SmdpEnvironment, TwoStateConfig, TwoStateEnv};

fn constant_arms(a: (f64, f64), b: (f64, f64)) -> TwoStateConfig {
    let arm = |(r, t): (f64, f64)| ArmConfig {
        reward: GeneratorConfig::Constant { value: r },
        sojourn: GeneratorConfig::Constant { value: t },
    };
    TwoStateConfig {
        arm_a: arm(a),
        arm_b: arm(b),
        generator_seed: 0,
    }
}

#[test]
fn rho_updates_only_on_greedy_steps() {
    for variant in Variant::ALL {
        let mut agent = Agent::new(AgentConfig::new(variant, 0.05, 0.01, 0.3), 2, 2).unwrap();
        let mut env = TwoStateEnv::new(TwoStateConfig::standard(1e-3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut greedy = 0;
        for _ in 0..5_000 {
            if !agent.step(&mut env, &mut rng).unwrap().exploratory {
                greedy += 1;
            }
        }
        assert_eq!(agent.rho_updates(), greedy, "{variant}");
        assert_eq!(agent.steps(), 5_000);
        assert!(greedy > 3_000 && greedy < 5_000);
    }
}

fn rho_after_stream(variant: Variant, stream: &[(f64, f64)]) -> f64 {
    let mut agent = Agent::new(AgentConfig::new(variant, 0.01, 1e-3, 0.0), 1, 1).unwrap();
    for &(reward, sojourn) in stream {
        agent
            .learn(&Transition {
                state: 0,
                action: 0,
                reward,
                sojourn,
                next_state: 0,
                exploratory: false,
            })
            .unwrap();
    }
    agent.rho()
}

#[test]
fn rho_agrees_without_coupling_and_diverges_with_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let independent: Vec<(f64, f64)> = (0..100_000)
        .map(|_| {
            let r = rng.gen_range(0.5..3.0);
            (r, r * rng.gen_range(0.5..1.5))
        })
        .collect();
    let coupled: Vec<(f64, f64)> = (0..100_000)
        .map(|_| {
            let t: f64 = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
            (t * t, t)
        })
        .collect();
    let spread = |stream: &[(f64, f64)]| {
        let rhos: Vec<f64> = Variant::SMDP
            .iter()
            .map(|&v| rho_after_stream(v, stream))
            .collect();
        let lo = rhos.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rhos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo) / lo
    };
    assert!(spread(&independent) < 0.02);
    assert!(spread(&coupled) > 0.02);
}

#[test]
fn q_stays_bounded_with_the_true_rate() {
    // B pays 10 per unit time then returns with 0 over 1: ρ* = 5.
    let mut env = TwoStateEnv::new(constant_arms((1.0, 1.0), (10.0, 1.0))).unwrap();
    let rho = 5.0;
    let span = [1.0f64 - rho, 10.0 - rho, 0.0 - rho]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = 10.0 * span / (1.0 - 0.9);
    let mut q = QTable::new(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100_000 {
        let state = env.current_state();
        let (action, exploratory) = select_action(&q, state, 0.2, &mut rng);
        let obs = env.step(action).unwrap();
        let t = Transition {
            state,
            action,
            reward: obs.reward,
            sojourn: obs.sojourn,
            next_state: obs.next_state,
            exploratory,
        };
        smdp_q_update(&mut q, &t, rho, 0.1);
        assert!(q.values().iter().all(|v| v.abs() <= bound));
    }
    assert_eq!(q.argmax(TwoStateEnv::S1), TwoStateEnv::ACTION_B);
}

#[test]
fn equal_seeds_give_equal_agents() {
    let run = || {
        let mut cfg = AgentConfig::new(Variant::Harmonic, 0.01, 0.01, 0.2);
        cfg.epsilon_decay = 0.999;
        let mut agent = Agent::new(cfg, 2, 2).unwrap();
        let mut env = TwoStateEnv::new(TwoStateConfig::standard(1e-3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..2_000 {
            agent.step(&mut env, &mut rng).unwrap();
        }
        agent.snapshot()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!((a.epsilon - 0.2 * 0.999f64.powi(2_000)).abs() < 1e-12);
}

#[test]
fn every_variant_learns_the_easy_case() {
    for variant in Variant::ALL {
        let mut agent = Agent::new(AgentConfig::new(variant, 0.05, 0.01, 0.2), 2, 2).unwrap();
        let mut env = TwoStateEnv::new(constant_arms((1.0, 1.0), (10.0, 1.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            agent.step(&mut env, &mut rng).unwrap();
        }
        assert_eq!(
            agent.greedy_policy()[TwoStateEnv::S1],
            TwoStateEnv::ACTION_B,
            "{variant}"
        );
    }
}

#[test]
fn rejects_bad_configs_and_states() {
    assert!(matches!(
        Agent::new(AgentConfig::new(Variant::Smart, 0.0, 0.1, 0.1), 2, 2),
        Err(AgentError::InvalidConfig(_))
    ));
    assert!(Agent::new(AgentConfig::new(Variant::Harmonic, 0.1, 1.0, 0.1), 2, 2).is_err());
    assert!(Agent::new(AgentConfig::new(Variant::Harmonic, 0.1, 0.1, 1.5), 2, 2).is_err());
    let mut agent = Agent::new(AgentConfig::new(Variant::Smart, 0.1, 0.1, 0.1), 2, 2).unwrap();
    let t = Transition {
        state: 5,
        action: 0,
        reward: 1.0,
        sojourn: 1.0,
        next_state: 0,
        exploratory: false,
    };
    assert!(matches!(
        agent.learn(&t),
        Err(AgentError::StateOutOfRange { .. })
    ));
    for s in [
        "smart",
        "relaxed-smart",
        "relaxed_smart",
        "harmonic",
        "r_learning",
    ] {
        assert!(s.parse::<Variant>().is_ok(), "{s}");
    }
    assert!("sarsa".parse::<Variant>().is_err());
}
