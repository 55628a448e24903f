//! Trains the appearance branch on a synthetic training suite with the
//! two-phase step schedule and prints the per-epoch logistic loss.
//!
//!     cargo run --release --example train_appearance -- /tmp/anet.twb
use twinbranch::data::weights::save_anet;
use twinbranch::experiment::{generate_suite, ExperimentConfig};
use twinbranch::networks::NetworkProfile;
use twinbranch::train::train_appearance;
use twinbranch::Result;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "anet.twb".into());
    let cfg = ExperimentConfig::desk();
    let mut sgd = cfg.appearance.clone();
    // a third of the desk budget: same rates, fewer steps
    sgd.phases[0].epochs = 8;
    sgd.phases[1].epochs = 2;
    let train = generate_suite(&cfg.train_suite)?;
    let (anet, log) = train_appearance(&train, &NetworkProfile::desk(), &sgd)?;
    for (epoch, loss) in log.epoch_means().iter().enumerate() {
        println!(
            "epoch {:>2} (lr {}): {loss:.4}",
            epoch + 1,
            sgd.lr_at(epoch + 1)
        );
    }
    save_anet(&anet, &NetworkProfile::desk(), &out)?;
    println!("saved {out}");
    Ok(())
}
