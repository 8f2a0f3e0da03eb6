// Temporary tuning probe; removed before finalization.
use distwatch_core::eval::{run_seed, ExperimentSpec, Scenario};
use distwatch_core::synth::Malfunction;
use std::time::Instant;

fn probe(scenario: Scenario, malfunction: Malfunction, seed: u64) {
    let spec = ExperimentSpec::new(scenario, malfunction, 1);
    let t0 = Instant::now();
    match run_seed(&spec, seed) {
        Ok(o) => println!(
            "{:?}/{:?} seed {}: fpr={:.2}% recall={:?} auc={:?} nll={:.3} ({:.1}s)",
            scenario,
            malfunction,
            seed,
            o.fpr,
            o.recall.map(|r| format!("{r:.1}")),
            o.auc.map(|a| format!("{a:.4}")),
            o.final_nll,
            t0.elapsed().as_secs_f64()
        ),
        Err(e) => println!("{scenario:?}/{malfunction:?} seed {seed}: ERROR {e} ({:.1}s)", t0.elapsed().as_secs_f64()),
    }
}

#[test]
fn probe_asymp() {
    probe(Scenario::AsympDs1, Malfunction::None, 0);
    probe(Scenario::AsympDs1, Malfunction::MuShift, 0);
}

#[test]
fn probe_asymp_epochs() {
    use distwatch_core::dynamics::TrainingConfig;
    use rayon::prelude::*;
    // (epochs, decay, hidden, layers)
    let configs: [(usize, f64, usize, usize); 3] =
        [(120, 1.0, 20, 2), (200, 0.995, 20, 2), (200, 1.0, 40, 2)];
    let grid: Vec<(usize, f64, usize, usize, Scenario, u64)> = configs
        .iter()
        .flat_map(|&(e, d, h, l)| {
            [Scenario::AsympDs1, Scenario::AsympDs2]
                .iter()
                .flat_map(move |&s| {
                    [0u64, 1].iter().map(move |&sd| (e, d, h, l, s, sd)).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let results: Vec<String> = grid
        .par_iter()
        .map(|&(epochs, decay, hidden, layers, scenario, seed)| {
            let mut spec = ExperimentSpec::new(scenario, Malfunction::None, 1);
            spec.hidden = hidden;
            spec.lstm_layers = layers;
            spec.training = Some(TrainingConfig {
                epochs,
                learning_rate: 1e-2,
                lr_decay: decay,
                clip_norm: 10.0,
                batch_size: 4,
                context_length: 48,
                seed,
            });
            let t0 = Instant::now();
            let o = run_seed(&spec, seed).unwrap();
            format!(
                "{scenario:?} seed={seed} epochs={epochs} decay={decay} h={hidden}x{layers}: fpr={:.2}% nll={:.3} ({:.0}s)",
                o.fpr,
                o.final_nll,
                t0.elapsed().as_secs_f64()
            )
        })
        .collect();
    for r in results {
        println!("{r}");
    }
}

#[test]
fn probe_finite() {
    probe(Scenario::FiniteDs1, Malfunction::MuShift, 0);
    probe(Scenario::FiniteDs2, Malfunction::SigmaCollapse, 0);
}

#[test]
fn probe_single() {
    probe(Scenario::SingleDs1, Malfunction::MuShift, 0);
}
