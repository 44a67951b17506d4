//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if a blocking criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use curvo::curriculum::{
    baseline_total_loss, hierarchical_total_loss, self_paced_progress, self_paced_weights, BaseScales, CurriculumWeights,
    LossBreakdown, LossParts, Scheduler, SchedulerMode, WeightBounds,
};
use curvo::ddpg::{
    actor_forward, critic_forward, exploration_noise, update_gradients, AgentHyperparams, AgentState, DdpgScheduler,
    PoseAgentInput, ReplayBuffer, Transition,
};
use curvo::difficulty::{difficulty_score, motion_profile, partition_levels, DatasetStats, UNIFORM_WEIGHTS};
use curvo::geometry::{se3_exp, se3_log, so3_exp, so3_log, Twist};
use curvo::metrics::{aligned_rmse, ate, umeyama_align, SimilarityTransform};
use curvo::nn::{Activation, Mlp};
use curvo::surrogate::{generate_dataset, run_training, DatasetSpec, TrainConfig, TrainingOutcome};
use curvo::{Execution, RigidPose, Trajectory};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn vec3<R: Rng>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Rotation vector with angle uniform in `[0, max_angle)`.
fn rotvec<R: Rng>(rng: &mut R, max_angle: f64) -> Vector3<f64> {
    let axis = loop {
        let v = vec3(rng, 1.0);
        if v.norm() > 1e-3 {
            break v.normalize();
        }
    };
    axis * rng.random_range(0.0..max_angle)
}

fn pose<R: Rng>(rng: &mut R) -> RigidPose {
    RigidPose::from_rotation_vector(rotvec(rng, PI - 1e-3), vec3(rng, 5.0))
}

fn geometry() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 10_000;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (a, b, c) = (pose(&mut rng), pose(&mut rng), pose(&mut rng));
        worst = worst.max(a.compose(&b).compose(&c).max_abs_diff(&a.compose(&b.compose(&c))));
        worst = worst.max(a.compose(&a.inverse()).max_abs_diff(&RigidPose::identity()));
        worst = worst.max(a.inverse().compose(&a).max_abs_diff(&RigidPose::identity()));
        worst = worst.max(a.compose(&b).inverse().max_abs_diff(&b.inverse().compose(&a.inverse())));

        let w = rotvec(&mut rng, PI - 1e-3);
        worst = worst.max((so3_log(&so3_exp(&w)) - w).amax());
        let xi = Twist::new(w, vec3(&mut rng, 5.0));
        let back = se3_log(&se3_exp(&xi)).expect("angle below pi");
        worst = worst.max((back.omega - xi.omega).amax()).max((back.v - xi.v).amax());
        let round = se3_exp(&se3_log(&a).expect("angle below pi"));
        worst = worst.max(round.max_abs_diff(&a));
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && secs < 5.0,
        format!("{n} cases, worst deviation {worst:.2e} (tol 1e-9), {secs:.2}s (limit 5s)"),
    )
}

fn umeyama() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 1000;
    let mut worst = 0.0f64;
    let mut worst_ate = 0.0f64;
    for k in 0..n {
        let len = rng.random_range(5..60);
        let gt = Trajectory::new(format!("t{k}"), (0..len).map(|_| pose(&mut rng)).collect()).unwrap();
        let sim = SimilarityTransform {
            scale: rng.random_range(0.2..5.0),
            rotation: UnitQuaternion::from_scaled_axis(rotvec(&mut rng, PI - 1e-3)),
            translation: vec3(&mut rng, 10.0),
        };
        let est = sim.apply_trajectory(&gt);
        let found = umeyama_align(&est, &gt).unwrap();
        worst = worst.max(aligned_rmse(&est, &gt, &found).unwrap());
        worst_ate = worst_ate.max(ate(&est, &gt, true).unwrap());
    }

    let grid: Vec<RigidPose> = (0..12)
        .map(|i| RigidPose::from_translation(Vector3::new(i as f64, (i * i % 7) as f64, -(i as f64))))
        .collect();
    let gt = Trajectory::new("g", grid.clone()).unwrap();
    let mut exact = true;
    for (offset, expected) in [
        (Vector3::new(3.0, 4.0, 0.0), 5.0),
        (Vector3::new(0.0, -2.0, 0.0), 2.0),
        (Vector3::new(1.0, 2.0, 2.0), 3.0),
    ] {
        let est = gt.transformed(&RigidPose::from_translation(offset));
        exact &= ate(&est, &gt, false).unwrap() == expected;
        exact &= ate(&est, &gt, true).unwrap() < 1e-12;
    }
    outcome(
        worst < 1e-9 && worst_ate < 1e-9 && exact,
        format!(
            "{n} similarity recoveries, worst post-alignment RMSE {worst:.2e} (tol 1e-9); constant offsets exact: {exact}"
        ),
    )
}

fn loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10_000;
    let mut identical = 0;
    let mut closed_form = 0.0f64;
    let bounds = WeightBounds::default();
    for _ in 0..n {
        let mag = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-6.0..4.0)) * rng.random_range(0.0..1.0);
        let parts = LossParts {
            flow: mag(&mut rng),
            translation: mag(&mut rng),
            rotation: mag(&mut rng),
        };
        let h = hierarchical_total_loss(&parts, &CurriculumWeights::UNIT, &BaseScales::default()).total;
        identical += (h.to_bits() == baseline_total_loss(&parts).to_bits()) as usize;

        let l = mag(&mut rng);
        let lambda = rng.random_range(0.0..2.0);
        let phi = self_paced_progress(l, lambda).unwrap();
        closed_form = closed_form.max(rel_err(phi, (-lambda * l).exp()));
        let w = self_paced_weights(phi, &bounds);
        let expected = 0.1 + 0.9 * (-lambda * l).exp();
        for x in w.as_array() {
            closed_form = closed_form.max(((x - expected) / expected).abs());
        }
    }
    let phi0 = self_paced_progress(0.0, 0.1).unwrap() == 1.0;
    let e1 = (self_paced_progress(10.0, 0.1).unwrap() - (-1.0f64).exp()).abs() <= f64::EPSILON;
    let w_l0 = self_paced_weights(1.0, &bounds) == CurriculumWeights::UNIT;
    outcome(
        identical == n && closed_form < 1e-15 && phi0 && e1 && w_l0,
        format!(
            "unit weights bit-identical to the fixed baseline in {identical}/{n}; closed-form rel err {closed_form:.1e}; \
             phi(0)=1: {phi0}; lambda=0.1, L=10 -> e^-1: {e1}"
        ),
    )
}

fn difficulty() -> Outcome {
    let spec = DatasetSpec {
        n_sequences: 300,
        windows_per_sequence: 1,
        ..Default::default()
    };
    let ds = generate_dataset(&spec, 11, Execution::default()).unwrap();
    let sizes = ds.manifest.level_sizes(3);
    let scored: Vec<(String, f64)> = ds
        .manifest
        .entries
        .iter()
        .map(|e| (e.sequence_id.clone(), e.normalized))
        .collect();
    let p = partition_levels(&scored, 3).unwrap();
    let mut again = [0usize; 3];
    for l in &p.levels {
        again[*l as usize - 1] += 1;
    }
    let balanced = sizes.iter().chain(&again).all(|s| (99..=101).contains(s));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let stats = DatasetStats::new([0.0; 6], [2.0, 2.0, 2.0, 0.5, 0.5, 0.5], UNIFORM_WEIGHTS).unwrap();
    let pairs = 1000;
    let mut monotone = 0;
    for k in 0..pairs {
        let mut p = RigidPose::identity();
        let mut poses = Vec::new();
        for _ in 0..20 {
            poses.push(p);
            p = p.compose(&RigidPose::from_rotation_vector(rotvec(&mut rng, 0.3), vec3(&mut rng, 0.5)));
        }
        let t = Trajectory::new(format!("m{k}"), poses).unwrap();
        let factor = rng.random_range(1.0..4.0);
        let a = motion_profile(&t).unwrap();
        let b = motion_profile(&t.scaled(factor)).unwrap();
        let comps_ok = a.components().iter().zip(b.components()).all(|(x, y)| y >= *x - 1e-12);
        monotone += (comps_ok && difficulty_score(&b, &stats) >= difficulty_score(&a, &stats) - 1e-12) as usize;
    }
    outcome(
        balanced && monotone == pairs,
        format!("tri-modal 300-sequence tertiles {sizes:?} (partition {again:?}); monotone in {monotone}/{pairs} scaled pairs"),
    )
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| {
            let s = AgentState {
                progress: rng.random_range(0.0..1.0),
                loss: rng.random_range(0.0..5.0),
            };
            let s2 = AgentState {
                progress: (s.progress + 0.01).min(1.0),
                loss: rng.random_range(0.0..5.0),
            };
            Transition {
                state: s,
                action: rng.random_range(0.0..1.0),
                reward: -s2.loss,
                next_state: s2,
            }
        })
        .collect()
}

fn fd_check(rng: &mut ChaCha8Rng) -> f64 {
    let actor = |rng: &mut ChaCha8Rng| Mlp::random(&[2, 4, 4, 1], Activation::Relu, Activation::Sigmoid, 1.0, rng);
    let critic = |rng: &mut ChaCha8Rng| Mlp::random(&[3, 4, 4, 1], Activation::Relu, Activation::Identity, 1.0, rng);
    let (a, c, ta, tc) = (actor(rng), critic(rng), actor(rng), critic(rng));
    let batch = random_batch(rng, 8);
    let gamma = rng.random_range(0.5..0.99);
    let g = update_gradients(&a, &c, &ta, &tc, gamma, &batch);
    let n = batch.len() as f64;
    let critic_loss = |net: &Mlp| {
        batch
            .iter()
            .map(|t| {
                let y = t.reward + gamma * critic_forward(&tc, &t.next_state, actor_forward(&ta, &t.next_state));
                (critic_forward(net, &t.state, t.action) - y).powi(2)
            })
            .sum::<f64>()
            / n
    };
    let actor_obj = |net: &Mlp| -batch.iter().map(|t| critic_forward(&c, &t.state, actor_forward(net, &t.state))).sum::<f64>() / n;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut check = |net: &Mlp, grad: &[f64], f: &dyn Fn(&Mlp) -> f64| {
        for k in 0..net.num_params() {
            let (mut p, mut m) = (net.clone(), net.clone());
            p.params_mut()[k] += h;
            m.params_mut()[k] -= h;
            worst = worst.max(rel_err(grad[k], (f(&p) - f(&m)) / (2.0 * h)));
        }
    };
    check(&c, &g.critic, &critic_loss);
    check(&a, &g.actor, &actor_obj);

    for net in [&a, &c] {
        let x: Vec<f64> = (0..net.input_size()).map(|_| rng.random_range(0.0..1.0)).collect();
        let cache = net.forward_cached(&x);
        let mut scratch = vec![0.0; net.num_params()];
        let gx = net.backward(&cache, &[1.0], &mut scratch);
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            worst = worst.max(rel_err(gx[k], (net.forward(&xp)[0] - net.forward(&xm)[0]) / (2.0 * h)));
        }
    }
    worst
}

fn breakdown(k: u64) -> LossBreakdown {
    let x = 1.0 / (1.0 + k as f64 * 0.01);
    LossBreakdown {
        flow: 2.0 * x,
        translation: x,
        rotation: 0.3 * x,
        total: 3.0 * x,
    }
}

fn ddpg() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let configs = 100;
    let worst = (0..configs).map(|_| fd_check(&mut rng)).fold(0.0, f64::max);

    let cap = 1000;
    let mut buf = ReplayBuffer::new(cap);
    let mut naive: Vec<Transition> = Vec::new();
    let mut buffer_ok = true;
    for k in 0..100_000u64 {
        if rng.random_bool(0.7) {
            let t = Transition {
                state: AgentState { progress: k as f64, loss: 0.0 },
                action: 0.5,
                reward: -(k as f64),
                next_state: AgentState { progress: k as f64 + 1.0, loss: 0.0 },
            };
            buf.push(t);
            naive.push(t);
            if naive.len() > cap {
                naive.remove(0);
            }
        } else if buf.len() >= 64 {
            let idx = buf.sample_indices(64, &mut rng).unwrap();
            let mut u = idx.clone();
            u.sort();
            u.dedup();
            buffer_ok &= u.len() == 64 && idx.iter().all(|i| *i < naive.len());
        }
        buffer_ok &= buf.len() == naive.len();
    }
    buffer_ok &= buf.iter().eq(naive.iter());

    let draws = 100_000;
    let xs: Vec<f64> = (0..draws).map(|_| exploration_noise(0.5, 0.1, &mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / draws as f64;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
    let noise_ok = (std - 0.1).abs() <= 0.005;

    let mut s = DdpgScheduler::new(AgentHyperparams::default(), WeightBounds::default(), 500, PoseAgentInput::Subtotal, 1).unwrap();
    let mut cadence_ok = true;
    let mut fired = Vec::new();
    let mut prev = 0;
    for i in 0..=400u64 {
        s.observe_step(i, &breakdown(i)).unwrap();
        let u = s.agents()[0].updates();
        cadence_ok &= s.agents().iter().all(|a| a.updates() == u);
        if u != prev {
            cadence_ok &= i % 50 == 0 && u - prev == 10;
            fired.push(i);
            prev = u;
        }
    }
    cadence_ok &= fired == [100, 150, 200, 250, 300, 350, 400];
    outcome(
        worst < 1e-4 && buffer_ok && noise_ok && cadence_ok,
        format!(
            "FD worst rel err {worst:.2e} over {configs} width-4 configs (tol 1e-4); buffer vs naive list: {buffer_ok}; \
             noise std at a=0.5 {std:.5} (0.1 +-5%); cadence fires at {fired:?} with 10 iterations: {cadence_ok}"
        ),
    )
}

struct Trend {
    blocking: Outcome,
    ddpg: Outcome,
}

fn trend() -> Trend {
    let t0 = Instant::now();
    let seeds: Vec<u64> = (0..5).collect();
    let jobs: Vec<(u64, SchedulerMode)> = seeds.iter().flat_map(|&s| SchedulerMode::ALL.map(|m| (s, m))).collect();
    let runs: Vec<TrainingOutcome> = Execution::default().map(&jobs, |&(seed, mode)| {
        let mut cfg = TrainConfig::default();
        cfg.seed = seed;
        cfg.scheduler.mode = mode;
        run_training(&cfg, Execution::Sequential).unwrap()
    });
    let secs = t0.elapsed().as_secs_f64();
    let get = |seed: u64, mode: SchedulerMode| {
        let k = jobs.iter().position(|j| *j == (seed, mode)).unwrap();
        runs[k].validations()
    };
    let mut wins = [0usize; 4];
    let mut reach = 0;
    let mut strict = 0;
    for &seed in &seeds {
        let base = get(seed, SchedulerMode::Baseline);
        let (base_last, base_final) = (base.last().unwrap().0, base.last().unwrap().1.ate);
        let base_first = base.iter().find(|(_, v)| v.ate <= base_final).unwrap().0;
        let mut line = format!("    seed {seed}: baseline {base_final:.4} (last validation at step {base_last})");
        for (m, mode) in SchedulerMode::ALL.iter().enumerate().skip(1) {
            let v = get(seed, *mode);
            let fin = v.last().unwrap().1.ate;
            if fin <= base_final {
                wins[m] += 1;
            }
            line.push_str(&format!(", {} {fin:.4}", mode.name()));
            if *mode == SchedulerMode::SelfPaced {
                let t = v.iter().find(|(_, p)| p.ate <= base_final).map(|x| x.0);
                reach += t.is_some_and(|t| t < base_last) as usize;
                strict += t.is_some_and(|t| t < base_first) as usize;
                match t {
                    Some(t) => line.push_str(&format!(" (reaches baseline final at step {t})")),
                    None => line.push_str(" (never reaches baseline final)"),
                }
            }
        }
        println!("{line}");
    }
    println!(
        "    self_paced reaches the baseline's final ATE before the baseline's own first crossing in {strict}/5 seeds (informational)"
    );
    let [_, staged, self_paced, ddpg] = wins;
    let blocking = outcome(
        staged >= 3 && self_paced >= 3 && reach >= 3 && secs < 600.0,
        format!(
            "final val ATE <= baseline: staged {staged}/5, self_paced {self_paced}/5 (need 3); self_paced reaches baseline \
             final ATE in fewer steps {reach}/5 (need 3); 20 runs in {secs:.1}s (limit 600s)"
        ),
    );
    let ddpg = outcome(ddpg >= 3, format!("ddpg final val ATE <= baseline in {ddpg}/5 seeds"));
    Trend { blocking, ddpg }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("inputs");
    common::write_walks(&inputs, 9, 23);
    let out = dir.path().join("out");
    let (a, ra) = common::run_every_command(&inputs, &out);
    let (b, rb) = common::run_every_command(&inputs, &out);
    let differing: Vec<String> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let same = differing.is_empty() && a.len() == b.len() && ra == rb;
    outcome(
        same,
        format!(
            "difficulty, train, evaluate, plot x4, agent-inspect: {} output files byte-identical across two runs: {same}{}",
            a.len(),
            if differing.is_empty() { String::new() } else { format!(" (differ: {})", differing.join(", ")) }
        ),
    )
}

fn main() {
    let mut failed = false;
    let mut report = |id: &str, o: Outcome, blocking: bool| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let note = if blocking { "" } else { " [non-blocking]" };
        println!("{tag} criterion {id}{note}: {}", o.detail);
        failed |= blocking && !o.pass;
    };
    report("1 geometry", geometry(), true);
    report("2 umeyama", umeyama(), true);
    report("3 loss identities", loss_identities(), true);
    report("4 difficulty", difficulty(), true);
    report("5 ddpg numerics", ddpg(), true);
    let t = trend();
    report("6 trend", t.blocking, true);
    report("6 trend ddpg", t.ddpg, false);
    report("7 determinism", determinism(), true);
    if failed {
        std::process::exit(1);
    }
}
