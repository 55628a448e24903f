//! Trains the fusion and attention head of the semantic branch on top of a
//! frozen, pretrained backbone.
use twinbranch::experiment::{generate_suite, pretrain, ExperimentConfig};
use twinbranch::networks::{NetworkProfile, Parameterized, SemanticVariant};
use twinbranch::train::train_semantic;
use twinbranch::Result;

fn main() -> Result<()> {
    let profile = NetworkProfile::desk();
    let cfg = ExperimentConfig::desk();
    let (snet, accuracy) = pretrain(&cfg, &profile)?;
    println!("backbone held-out accuracy {accuracy:.3}");

    let train = generate_suite(&cfg.train_suite)?;
    let mut sgd = cfg.semantic.clone();
    sgd.phases[0].epochs = 5;
    sgd.phases[1].epochs = 1;
    for variant in [SemanticVariant::BASIC, SemanticVariant::FULL] {
        let before = snet.fingerprint();
        let (head, log) = train_semantic(&train, &snet, variant, &profile, &sgd)?;
        assert_eq!(snet.fingerprint(), before);
        let means = log.epoch_means();
        println!(
            "{}: loss {:.4} -> {:.4}, attention {}",
            variant.label(),
            means[0],
            means[means.len() - 1],
            if head.attention.is_some() {
                "on"
            } else {
                "off"
            }
        );
    }
    Ok(())
}
