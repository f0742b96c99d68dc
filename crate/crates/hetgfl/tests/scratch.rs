// temporary exploration harness, removed before finishing
use hetgfl::graph::{make_split, synth_planted, SplitSpec};
use hetgfl::model::{AggMode, ModelConfig};
use hetgfl::train::{report_on_mask, train, TrainConfig};
use hetgfl::{model, Tape};

fn run(seed: u64, agg: AggMode, ablate: &str, lr: f64, epochs: usize, dim: usize) -> (f64, usize) {
    let mut g = synth_planted(300, 2, 4, 3, 0.9, 1).unwrap();
    let spec = SplitSpec::new(0.24, 0.06, 0.70, seed + 1).unwrap();
    let masks = make_split(&g, &spec).unwrap();
    g.set_masks(masks).unwrap();
    let mut mcfg = ModelConfig {
        edge_dim: dim,
        agg,
        seed: seed + 2,
        ..ModelConfig::uniform(2, dim)
    };
    if !ablate.is_empty() {
        mcfg.ablations.set(ablate).unwrap();
    }
    let tcfg = TrainConfig {
        lr,
        max_epochs: epochs,
        patience: 30,
        seed,
        ..TrainConfig::default()
    };
    let (params, hist) = train(&g, &mcfg, &tcfg).unwrap();
    let mut tape = Tape::new();
    let pass = model::forward(&mut tape, &g, &params, &mcfg).unwrap();
    let rep = report_on_mask(tape.values(pass.probs), &g, &g.masks().test, mcfg.loss).unwrap();
    (rep.micro_f1, hist.epochs.len())
}

#[test]
#[ignore]
fn explore() {
    for agg in [AggMode::EdgeResidual, AggMode::PlainSum, AggMode::NodeResidual] {
        for lr in [0.01, 0.005] {
            for dim in [32usize] {
                let t0 = std::time::Instant::now();
                let mut line = format!("agg={agg:?} lr={lr} dim={dim}:");
                for ablate in ["", "no-fgl", "no-ei"] {
                    let mut scores = vec![];
                    let mut eps = vec![];
                    for seed in [1u64, 2, 3, 4, 5] {
                        let (f1, ne) = run(seed, agg, ablate, lr, 200, dim);
                        scores.push(f1);
                        eps.push(ne);
                    }
                    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                    line += &format!(
                        " {}={mean:.3}{scores:.2?}(ep{:?})",
                        if ablate.is_empty() { "full" } else { ablate },
                        eps
                    );
                }
                println!("{line}  [{:?}]", t0.elapsed());
            }
        }
    }
}
