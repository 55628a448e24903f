//! One-pass evaluation on a small benchmark: ground-truth replay (the upper
//! bound), a tracker that never moves, and the appearance-only tracker.
//! Writes the success and precision curves of the latter to curves.csv.
use twinbranch::data::SuiteConfig;
use twinbranch::eval::{
    run_ope, Averaging, Dataset, GroundTruthReplay, SiameseTracker, StaticTracker,
};
use twinbranch::experiment::{generate_suite, ExperimentConfig};
use twinbranch::networks::NetworkProfile;
use twinbranch::tracker::{TrackConfig, TrackerModels};
use twinbranch::train::train_appearance;
use twinbranch::Result;

fn main() -> Result<()> {
    let profile = NetworkProfile::desk();
    let cfg = ExperimentConfig::desk();
    let mut sgd = cfg.appearance.clone();
    sgd.phases[0].epochs = 8;
    sgd.phases[1].epochs = 2;
    let (anet, _) = train_appearance(&generate_suite(&cfg.train_suite)?, &profile, &sgd)?;
    let models = TrackerModels::new(profile, Some(anet), None)?;
    let siamese = SiameseTracker::new("appearance", models, TrackConfig::default());

    let bench = generate_suite(&SuiteConfig {
        count: 8,
        ..SuiteConfig::benchmark()
    })?;
    let data = Dataset::Loaded(&bench);
    let replay = run_ope(&GroundTruthReplay, data, Averaging::PerFrame, 1)?;
    let still = run_ope(
        &StaticTracker,
        Dataset::Loaded(&bench),
        Averaging::PerFrame,
        1,
    )?;
    let app = run_ope(&siamese, Dataset::Loaded(&bench), Averaging::PerFrame, 1)?;
    for r in [&replay, &still, &app] {
        println!(
            "{:<14} AUC {:.4}  precision@20 {:.4}",
            r.tracker, r.auc, r.precision_20
        );
    }
    for s in &app.sequences {
        let mean = s.ious.iter().sum::<f32>() / s.ious.len() as f32;
        println!("  {}: mean IoU {mean:.3}", s.name);
    }
    std::fs::write("curves.csv", app.curves_csv())?;
    Ok(())
}
