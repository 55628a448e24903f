//! Saves an appearance network, inspects the self-describing header, loads
//! it back, and shows the error for a mismatched profile.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twinbranch::data::load_weights;
use twinbranch::data::weights::{load_anet, save_anet};
use twinbranch::networks::{ANet, NetworkProfile};
use twinbranch::Result;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("twinbranch-weights-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("anet.twb");
    let profile = NetworkProfile::desk();
    let anet = ANet::init(&profile, &mut ChaCha8Rng::seed_from_u64(1));
    save_anet(&anet, &profile, &path)?;

    let file = load_weights(&path)?;
    println!(
        "{} v{} for profile {}, {} {}",
        file.header.format,
        file.header.version,
        file.header.profile,
        file.header.endianness,
        file.header.dtype
    );
    for t in &file.header.tensors {
        println!("  {:<14} {:?}", t.name, t.shape);
    }
    assert_eq!(load_anet(&profile, &path)?, anet);
    match load_anet(&NetworkProfile::paper(), &path) {
        Ok(_) => println!("unexpectedly loaded into the paper profile"),
        Err(e) => println!("paper profile: {e}"),
    }
    Ok(())
}
