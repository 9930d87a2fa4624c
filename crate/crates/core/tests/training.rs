//! Short training runs on the length-2 repetition code.

use eccfm::backbone::{BackboneConfig, BackboneKind};
use eccfm::channel::ebn0_to_sigma;
use eccfm::codes::Code;
use eccfm::diffusion::default_steps;
use eccfm::harness::covering_beta_step;
use eccfm::trainer::{TrainConfig, Trainer};

fn rep2_run(seed: u64) -> Vec<f64> {
    let code = Code::builtin("rep2").unwrap();
    let sigma = ebn0_to_sigma(4.0, 0.5).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        steps_per_epoch: 200,
        batch_size: 64,
        lr_init: 1e-3,
        lr_final: 1e-3,
        beta_step: covering_beta_step(sigma, default_steps(&code.h)),
        seed,
        ..TrainConfig::default()
    };
    let bc = BackboneConfig::for_code(BackboneKind::Mlp, &code.h).with_head(cfg.objective.head());
    let mut tr = Trainer::new(&code, bc, cfg).unwrap();
    tr.fit().unwrap();
    tr.state().history.iter().map(|r| r.loss).collect()
}

// 50-step means over consecutive blocks.
fn window_means(losses: &[f64]) -> Vec<f64> {
    losses.chunks(50).map(|w| w.iter().sum::<f64>() / w.len() as f64).collect()
}

#[test]
fn rep2_loss_falls_across_windows() {
    for seed in [0, 1, 2] {
        let means = window_means(&rep2_run(seed));
        println!("seed {seed}: {means:?}");
        assert_eq!(means.len(), 4);
        assert!(means.windows(2).all(|p| p[1] < p[0]), "seed {seed}: {means:?}");
    }
}
