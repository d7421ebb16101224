mod common;

use common::random_scene;
use lgca::bench::OpCounters;
use lgca::{baseline_q_similarity, lgca_similarity, Lgca, LgcaConfig, ScheduleMode};

fn e1(config: &LgcaConfig) -> LgcaConfig {
    let steps = config.schedule().unwrap().steps();
    let mut alphas = vec![0.0; steps];
    alphas[0] = 1.0;
    LgcaConfig {
        step_weights: Some(alphas),
        ..config.clone()
    }
}

#[test]
fn first_step_weight_only_reproduces_baseline_bit_for_bit() {
    for seed in 0..50 {
        let s = random_scene(seed);
        let cfg = e1(&s.config);
        let lgca = Lgca::new(cfg.clone(), &s.encoder).unwrap();
        let descs = lgca.describe(&s.label, &s.descriptions, &mut OpCounters::default()).unwrap();
        let sim = lgca_similarity(&s.image, &s.label, &descs, &cfg, &s.encoder).unwrap().sim;
        let q = baseline_q_similarity(&s.image, &descs, &cfg, &s.encoder).unwrap();
        assert_eq!(sim.to_bits(), q.to_bits(), "seed {seed}: {sim} vs {q}");
    }
}

#[test]
fn single_step_schedule_equals_baseline() {
    for seed in 0..20 {
        let mut s = random_scene(seed);
        s.config.crop.n_crops = 2 + (seed as usize % 2);
        let lgca = Lgca::new(s.config.clone(), &s.encoder).unwrap();
        assert_eq!(lgca.schedule().steps(), 1);
        let descs = lgca.describe(&s.label, &s.descriptions, &mut OpCounters::default()).unwrap();
        let sim = lgca_similarity(&s.image, &s.label, &descs, &s.config, &s.encoder).unwrap().sim;
        let q = baseline_q_similarity(&s.image, &descs, &s.config, &s.encoder).unwrap();
        assert_eq!(sim.to_bits(), q.to_bits(), "seed {seed}");
    }
}

#[test]
fn traces_follow_the_schedule() {
    for seed in 0..30 {
        let s = random_scene(seed);
        let lgca = Lgca::new(s.config.clone(), &s.encoder).unwrap();
        let mut counters = OpCounters::default();
        let prepared = lgca.prepare(&s.image, &mut counters).unwrap();
        let descs = lgca.describe(&s.label, &s.descriptions, &mut counters).unwrap();
        let score = lgca.similarity(&prepared, &s.label, &descs, &mut counters).unwrap();
        let schedule = lgca.schedule();
        let m = s.descriptions.len();
        assert_eq!(score.steps.len(), schedule.steps());
        assert_eq!(score.steps[0].crops_in, s.config.crop.n_crops);
        let mut entries = 0;
        for (j, step) in score.steps.iter().enumerate() {
            assert_eq!(step.step, j + 1);
            assert_eq!(step.topk, schedule.topk_per_step[j]);
            assert_eq!(step.entries_computed as usize, step.crops_in * m);
            assert_eq!(step.selected.len(), step.topk.min(step.crops_in * m));
            assert!(step.crops_out >= 1 && step.crops_out <= step.topk.min(step.crops_in));
            assert_eq!(step.expanded.len(), step.crops_out);
            if j + 1 < score.steps.len() {
                assert_eq!(score.steps[j + 1].crops_in, step.crops_out);
            }
            entries += step.entries_computed;
        }
        let n = s.config.crop.n_crops as u64;
        assert!(entries <= 2 * n * m as u64, "seed {seed}");
        let sim: f64 = score.steps.iter().map(|st| st.score).sum::<f64>() / score.steps.len() as f64;
        assert!((score.sim - sim).abs() <= 1e-12);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let s = random_scene(7);
    let run = || {
        let lgca = Lgca::new(s.config.clone(), &s.encoder).unwrap();
        let descs = lgca.describe(&s.label, &s.descriptions, &mut OpCounters::default()).unwrap();
        lgca_similarity(&s.image, &s.label, &descs, &s.config, &s.encoder).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn fixed_initial_schedule_runs() {
    let mut s = random_scene(3);
    s.config.crop.n_crops = 50;
    s.config.schedule = ScheduleMode::FixedInitial;
    s.config.fixed_topk = 10;
    let lgca = Lgca::new(s.config.clone(), &s.encoder).unwrap();
    let descs = lgca.describe(&s.label, &s.descriptions, &mut OpCounters::default()).unwrap();
    let score = lgca_similarity(&s.image, &s.label, &descs, &s.config, &s.encoder).unwrap();
    let topks: Vec<usize> = score.steps.iter().map(|s| s.topk).collect();
    assert_eq!(topks, vec![10, 5, 2, 1]);
}

#[test]
fn empty_descriptions_rejected() {
    let s = random_scene(1);
    let lgca = Lgca::new(s.config.clone(), &s.encoder).unwrap();
    assert!(lgca.describe(&s.label, &[], &mut OpCounters::default()).is_err());
}
