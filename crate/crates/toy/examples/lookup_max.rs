//! Trains the toy policy on the lookup + max curriculum and prints progress.
//! Arguments are `key=value` overrides of the training config.
//!
//! cargo run --release -p tablerl-toy --example lookup_max -- seed=1 eval_every=100

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tablerl_core::config::parse_flat;
use tablerl_core::{ClipConfig, RewardConfig};
use tablerl_toy::sampler::sample_one;
use tablerl_toy::{generate_task, train, Policy, TrainConfig};

fn main() {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let cfg: TrainConfig = parse_flat(&overrides.join("\n")).expect("config overrides");
    let start = Instant::now();
    let out = train(&cfg, &RewardConfig::default(), &ClipConfig::default(), |s| {
        if s.step % 25 == 0 {
            println!(
                "step {:5} reward {:.3} acc {:.3} fmt {:.3} len {:5.1} J {:+.4} eval {:?} ({:.0?})",
                s.step,
                s.mean_reward,
                s.mean_accuracy,
                s.mean_format,
                s.mean_response_len,
                s.objective,
                s.eval_accuracy,
                start.elapsed()
            );
        }
    })
    .expect("training");
    println!("initial eval accuracy {:.3}", out.initial_eval.accuracy);
    println!("final eval {:?}", out.final_eval);
    let params = cfg.eval_sampling();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for seed in 0..4 {
        let task = generate_task(seed, &cfg.template_mix);
        let prompt = out.policy.prepare(&task);
        let r = sample_one(&out.policy, &prompt, &params, &mut rng);
        println!("{} gold {:?} -> {}", task.instance.query, task.gold(), r.text());
    }
}
