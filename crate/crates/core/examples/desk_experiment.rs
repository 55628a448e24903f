//! The full fixed-seed desk experiment: pretraining, separate training of
//! the appearance branch and four semantic heads, lambda selection on the
//! validation suite, the ablation table on the benchmark suite, and the
//! separate-versus-joint comparison. Takes several minutes on one core.
//!
//!     RUST_LOG=info cargo run --release --example desk_experiment
use twinbranch::experiment::{run_experiment, ExperimentConfig};
use twinbranch::Result;

fn main() -> Result<()> {
    env_logger::init();
    let (models, report) = run_experiment(&ExperimentConfig::desk())?;
    println!("backbone held-out accuracy {:.3}", models.pretrain_accuracy);
    print!("{}", report.lambda_search.to_csv());
    println!("selected lambda {}", report.lambda_search.best);
    print!("{}", report.ablation.to_csv());
    if let Some(j) = &report.joint {
        println!(
            "separate {:.4} vs joint {:.4} at lambda {}",
            j.separate_auc, j.joint_auc, j.lambda
        );
    }
    println!(
        "combined beats both singles: {}, full beats appearance: {}",
        report.combined_beats_singles(),
        report.full_beats_appearance()
    );
    println!("{:.0} s", report.seconds);
    Ok(())
}
