//! Selects the mixing weight between the two branch responses by grid
//! search on a validation suite, with briefly trained branches.
use twinbranch::eval::grid_search_lambda;
use twinbranch::experiment::{generate_suite, pretrain, ExperimentConfig};
use twinbranch::networks::{NetworkProfile, SemanticVariant};
use twinbranch::tracker::TrackerModels;
use twinbranch::train::{train_appearance, train_semantic, SgdConfig};
use twinbranch::Result;

fn main() -> Result<()> {
    let profile = NetworkProfile::desk();
    let cfg = ExperimentConfig::desk();
    let train = generate_suite(&cfg.train_suite)?;
    let shorten = |s: &SgdConfig| {
        let mut s = s.clone();
        s.phases[0].epochs = 8;
        s.phases[1].epochs = 2;
        s
    };
    let (anet, _) = train_appearance(&train, &profile, &shorten(&cfg.appearance))?;
    let (snet, _) = pretrain(&cfg, &profile)?;
    let (head, _) = train_semantic(
        &train,
        &snet,
        SemanticVariant::FULL,
        &profile,
        &shorten(&cfg.semantic),
    )?;
    let models = TrackerModels::new(profile, Some(anet), Some((snet, head)))?;

    let validation = generate_suite(&cfg.validation_suite)?;
    let search = grid_search_lambda(&models, &cfg.track, &validation, 1)?;
    print!("{}", search.to_csv());
    println!("selected lambda {}", search.best);
    Ok(())
}
