use std::time::Instant;

use exmlds::{evaluate, train, Algorithm, HyperParams, Predictor, TrainOptions};
use exmlds_bench::{generate, split, SyntheticSpec};

fn main() {
    let algo: Algorithm = std::env::args()
        .nth(1)
        .unwrap_or("exmlds1".into())
        .parse()
        .unwrap();
    let data = generate(&SyntheticSpec::bibtex_like(), 7);
    let (tr, te) = split(&data, 1000);
    let mut params = HyperParams {
        algo,
        ..HyperParams::default()
    };
    if let Some(lr) = std::env::args().nth(2) {
        params.learning_rate = lr.parse().unwrap();
    }
    let t = Instant::now();
    let (model, _) = train(&tr, &params, None, &TrainOptions::default()).unwrap();
    println!("{algo}: trained in {:.2?}", t.elapsed());
    let (report, _) = evaluate(&Predictor::new(&model), &te.features, &te.labels).unwrap();
    print!("{report}");
}
