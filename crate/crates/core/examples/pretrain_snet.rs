//! Pretrains the semantic backbone on the synthetic shape-classification
//! task and saves it.
//!
//!     cargo run --release --example pretrain_snet -- /tmp/snet.twb
use twinbranch::data::classification_set;
use twinbranch::data::weights::save_snet;
use twinbranch::experiment::ExperimentConfig;
use twinbranch::networks::NetworkProfile;
use twinbranch::train::pretrain_snet_classifier;
use twinbranch::Result;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "snet.twb".into());
    let profile = NetworkProfile::desk();
    let cfg = ExperimentConfig::desk().classification;
    let images: Vec<_> = classification_set(cfg.images, profile.classify_size, cfg.seed)
        .into_iter()
        .map(|(t, k)| (t, k.index()))
        .collect();
    let (snet, report) = pretrain_snet_classifier(&images, &profile, &cfg.sgd, cfg.holdout)?;
    for (epoch, loss) in report.log.epoch_means().iter().enumerate() {
        println!("epoch {:>2}: cross-entropy {loss:.4}", epoch + 1);
    }
    println!(
        "accuracy: train {:.3}, held out {:.3}",
        report.train_accuracy, report.heldout_accuracy
    );
    save_snet(&snet, &profile, &out)?;
    println!("saved {out}");
    Ok(())
}
