//! Channel weights the attention module assigns to one target, computed once
//! at initialisation. Untrained attention MLPs start near the identity, so
//! the spread grows after training.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twinbranch::data::SuiteConfig;
use twinbranch::experiment::generate_suite;
use twinbranch::networks::{NetworkProfile, SNet, SemanticHead, SemanticVariant};
use twinbranch::tracker::{dump_attention, TrackConfig, TrackerModels, TrackerState};
use twinbranch::Result;

fn main() -> Result<()> {
    let profile = NetworkProfile::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let snet = SNet::init(&profile, &mut rng)?;
    let head = SemanticHead::init(&profile, SemanticVariant::FULL, &mut rng);
    let models = TrackerModels::new(profile, None, Some((snet, head)))?;
    let seq = generate_suite(&SuiteConfig {
        count: 1,
        ..SuiteConfig::benchmark()
    })?
    .remove(0);
    let state = TrackerState::init(
        &*seq.frame(0)?,
        seq.first_box(),
        &models,
        TrackConfig::default(),
    )?;
    let rows = dump_attention(&state);
    for layer in 0..2 {
        let w: Vec<f32> = rows
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| r.weight)
            .collect();
        let top: Vec<usize> = rows
            .iter()
            .filter(|r| r.layer == layer)
            .take(5)
            .map(|r| r.channel)
            .collect();
        println!(
            "layer {layer}: {} channels, weights {:.4}..{:.4}, strongest {top:?}",
            w.len(),
            w[w.len() - 1],
            w[0]
        );
    }
    println!("attention evaluations: {}", state.attention_evaluations());
    Ok(())
}
