//! Named experiments on the public benchmark files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::bail;
use clap::{Args, ValueEnum};
use exmlds::data::build_label_cooccurrence;
use exmlds::{
    evaluate, mask_labels, train, Algorithm, Dataset, EvalReport, HyperParams, Predictor,
};

use crate::{read_data, Exec};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Experiment {
    /// Full Bibtex with exmlds1.
    BibtexExmlds1,
    /// Full Mediamill with exmlds1.
    MediamillExmlds1,
    /// Bibtex with 80% of training labels hidden: exmlds3 with correlations
    /// from the full labels against exmlds1 without them.
    BibtexMissing80,
    /// Same protocol on EURLex-4K.
    EurlexMissing80,
    /// Same protocol on rcv1v2.
    Rcv1v2Missing80,
}

impl Experiment {
    fn dataset(self) -> &'static str {
        match self {
            Experiment::BibtexExmlds1 | Experiment::BibtexMissing80 => "bibtex",
            Experiment::MediamillExmlds1 => "mediamill",
            Experiment::EurlexMissing80 => "eurlex",
            Experiment::Rcv1v2Missing80 => "rcv1v2",
        }
    }

    /// Published precision targets (`P@1`, `P@3`, `P@5`; 0 = not checked)
    /// and the tolerance in points.
    fn targets(self) -> ([f64; 3], f64) {
        match self {
            Experiment::BibtexExmlds1 => ([63.38, 38.00, 27.64], 2.0),
            Experiment::MediamillExmlds1 => ([87.49, 0.0, 0.0], 2.0),
            Experiment::BibtexMissing80 => ([48.51, 0.0, 0.0], 3.0),
            Experiment::EurlexMissing80 => ([60.28, 0.0, 0.0], 3.0),
            Experiment::Rcv1v2Missing80 => ([81.67, 0.0, 0.0], 4.0),
        }
    }

    fn masked(self) -> bool {
        matches!(
            self,
            Experiment::BibtexMissing80 | Experiment::EurlexMissing80 | Experiment::Rcv1v2Missing80
        )
    }
}

#[derive(Args)]
pub struct ReproCmd {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Directory holding `<name>_train.txt` and `<name>_test.txt`
    /// (defaults to $EXMLDS_DATA_DIR, then ./data).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Fraction of training labels hidden in the missing-label protocol.
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

pub fn data_files(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{name}_train.txt")),
        dir.join(format!("{name}_test.txt")),
    )
}

fn run_one(
    label: &str,
    train_set: &Dataset,
    test: &Dataset,
    params: &HyperParams,
    side: Option<&exmlds::CooccurrenceMatrix>,
    exec: &Exec,
) -> anyhow::Result<EvalReport> {
    let start = Instant::now();
    let (model, _) = train(train_set, params, side, &exec.train_options())?;
    let secs = start.elapsed().as_secs_f64();
    let (report, _) = evaluate(&Predictor::new(&model), &test.features, &test.labels)?;
    println!("run {label} train_seconds {secs:.3}");
    print!("{report}");
    Ok(report)
}

fn check(name: &str, measured: f64, target: f64, tol: f64) -> bool {
    let ok = (measured - target).abs() <= tol;
    println!(
        "target {name} {target:.2} ± {tol:.2} measured {measured:.2} {}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

pub fn run(c: ReproCmd, exec: &Exec) -> anyhow::Result<()> {
    let dir = c
        .data_dir
        .or_else(|| std::env::var_os("EXMLDS_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    let (train_path, test_path) = data_files(&dir, c.experiment.dataset());
    for p in [&train_path, &test_path] {
        if !p.exists() {
            bail!(exmlds::Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} not found", p.display())
            )));
        }
    }
    let full = read_data(&train_path)?;
    let test = read_data(&test_path)?;
    println!("experiment {:?}", c.experiment);
    let (targets, tol) = c.experiment.targets();
    let mut ok = true;
    if c.experiment.masked() {
        let mask = mask_labels(&full.labels, c.fraction, c.seed)?;
        println!(
            "masked {} of {} training label entries",
            mask.hidden.len(),
            full.labels.nnz()
        );
        let masked = full.with_labels(mask.masked)?;
        let corr = build_label_cooccurrence(&full.labels);
        let joint = run_one(
            "exmlds3-with-correlations",
            &masked,
            &test,
            &HyperParams::for_algorithm(Algorithm::Exmlds3),
            Some(&corr),
            exec,
        )?;
        let base = run_one(
            "exmlds1-without-correlations",
            &masked,
            &test,
            &HyperParams::for_algorithm(Algorithm::Exmlds1),
            None,
            exec,
        )?;
        ok &= check("P@1", 100.0 * joint.precision[0], targets[0], tol);
        let lift = 100.0 * (joint.precision[0] - base.precision[0]);
        let lift_ok = lift >= 10.0;
        println!(
            "target P@1-lift >= 10.00 measured {lift:.2} {}",
            if lift_ok { "PASS" } else { "FAIL" }
        );
        ok &= lift_ok;
    } else {
        let r = run_one(
            "exmlds1",
            &full,
            &test,
            &HyperParams::for_algorithm(Algorithm::Exmlds1),
            None,
            exec,
        )?;
        for (i, &t) in targets.iter().enumerate() {
            if t > 0.0 {
                ok &= check(
                    &format!("P@{}", [1, 3, 5][i]),
                    100.0 * r.precision[i],
                    t,
                    tol,
                );
            }
        }
    }
    println!("overall {}", if ok { "PASS" } else { "FAIL" });
    Ok(())
}
