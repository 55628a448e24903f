//! Tracks one synthetic sequence with a quickly trained appearance branch,
//! printing the box, IoU and chosen scale per frame and writing the combined
//! response maps to a binary dump.
use std::fs::File;
use std::io::BufWriter;
use twinbranch::data::SuiteConfig;
use twinbranch::eval::iou;
use twinbranch::experiment::{generate_suite, ExperimentConfig};
use twinbranch::networks::NetworkProfile;
use twinbranch::tracker::{ResponseDumpWriter, TrackConfig, TrackerModels, TrackerState};
use twinbranch::train::train_appearance;
use twinbranch::Result;

fn main() -> Result<()> {
    let profile = NetworkProfile::desk();
    let cfg = ExperimentConfig::desk();
    let mut sgd = cfg.appearance.clone();
    sgd.phases[0].epochs = 8;
    sgd.phases[1].epochs = 2;
    let train = generate_suite(&cfg.train_suite)?;
    let (anet, _) = train_appearance(&train, &profile, &sgd)?;
    let models = TrackerModels::new(profile, Some(anet), None)?;

    let seq = generate_suite(&SuiteConfig {
        count: 1,
        ..SuiteConfig::benchmark()
    })?
    .remove(0);
    let mut state = TrackerState::init(
        &*seq.frame(0)?,
        seq.first_box(),
        &models,
        TrackConfig::with_lambda(1.0),
    )?;
    let mut dump = ResponseDumpWriter::new(BufWriter::new(File::create("responses.bin")?));
    for i in 1..seq.len() {
        let b = state.track_frame(&*seq.frame(i)?)?;
        let r = state.last_responses().expect("tracked at least one frame");
        dump.write_frame(i, r)?;
        println!(
            "frame {i:>2}: centre ({:6.1}, {:6.1}) size {:4.1}x{:4.1} IoU {:.2} scale {}",
            b.cx,
            b.cy,
            b.w,
            b.h,
            iou(&b, &seq.groundtruth[i]),
            r.best_scale
        );
    }
    println!("response maps in responses.bin");
    Ok(())
}
