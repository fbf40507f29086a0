// Scratch harness for calibrating the synthetic task and defaults.
use twophase::models::{synthetic_digits, Activation, MlpModel};
use twophase::objective::MlpObjective;
use twophase::optim::AdamConfig;
use twophase::{
    run_baseline, run_two_phase, BaselineMode, CostMeter, Phase, TwoPhaseConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let budget: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(240.0);
    let init_scale: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1.0);

    let full = synthetic_digits(seed, 6000);
    let train = full.subset(&(0..5000).collect::<Vec<_>>());
    let mut model = MlpModel::seeded(vec![784, 32, 10], Activation::Tanh, seed.wrapping_add(100));
    model.weights.scale(init_scale);
    let objective = MlpObjective::new(&model, &train);

    let config = TwoPhaseConfig {
        total_epochs: 400,
        cost_budget: Some(budget),
        adam: AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        seed,
        ..TwoPhaseConfig::default()
    };

    let t0 = std::time::Instant::now();
    let meter = CostMeter::new(train.len());
    let two = run_two_phase(&objective, model.weights.clone(), &config, &meter).unwrap();
    println!("two-phase done in {:?}", t0.elapsed());
    for r in &two.rows {
        println!(
            "  epoch {:3} {:4} loss {:.6e} gn {:.6e} gnmax {:.6e} cost {:7.2} {}",
            r.epoch, r.phase.to_string(), r.loss, r.grad_norm, r.gnmax, r.cost_units, r.flags
        );
    }
    println!("swap at {:?}", two.swap_epoch);

    let t0 = std::time::Instant::now();
    let meter = CostMeter::new(train.len());
    let adam = run_baseline(BaselineMode::AdamOnly, &objective, model.weights.clone(), &config, &meter).unwrap();
    println!("adam-only done in {:?} ({} epochs)", t0.elapsed(), adam.rows.len());
    for r in &adam.rows {
        println!(
            "  adam epoch {:3} loss {:.6e} gn {:.6e} gnmax {:.6e}",
            r.epoch, r.loss, r.grad_norm, r.gnmax
        );
    }

    let t0 = std::time::Instant::now();
    let meter = CostMeter::new(train.len());
    let cg = run_baseline(BaselineMode::CgOnly, &objective, model.weights.clone(), &config, &meter).unwrap();
    println!("cg-only done in {:?} ({} epochs)", t0.elapsed(), cg.rows.len());
    for r in cg.rows.iter().take(8) {
        println!(
            "  cg epoch {:3} loss {:.6e} gn {:.6e} cost {:7.2}",
            r.epoch, r.loss, r.grad_norm, r.cost_units
        );
    }

    let adam_cg_epochs = two.rows.iter().filter(|r| r.phase == Phase::Cg).count();
    println!("\nsummary (seed {seed}, lr {lr}, budget {budget}):");
    println!("  two-phase final {:.6e} (cg epochs {})", two.final_loss().unwrap(), adam_cg_epochs);
    println!("  adam-only final {:.6e}", adam.final_loss().unwrap());
    println!("  cg-only   final {:.6e}", cg.final_loss().unwrap());
}
