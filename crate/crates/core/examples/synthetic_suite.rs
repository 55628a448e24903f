//! Renders the desk benchmark suite and a small classification set to disk.
//!
//!     cargo run --release --example synthetic_suite -- /tmp/suite
use std::path::PathBuf;
use twinbranch::data::{classification_set, write_classification_set, write_sequence, SuiteConfig};
use twinbranch::experiment::generate_suite;
use twinbranch::Result;

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "suite".into()));
    let cfg = SuiteConfig {
        count: 5,
        ..SuiteConfig::benchmark()
    };
    for seq in generate_suite(&cfg)? {
        let gt = &seq.groundtruth;
        let path: f32 = gt
            .windows(2)
            .map(|w| (w[1].cx - w[0].cx).hypot(w[1].cy - w[0].cy))
            .sum();
        println!(
            "{}: {} frames, first box {:.0}x{:.0}, centre travels {:.0} px",
            seq.name,
            seq.len(),
            gt[0].w,
            gt[0].h,
            path
        );
        write_sequence(&seq, out.join(&seq.name))?;
    }
    let images = classification_set(32, 63, 7);
    write_classification_set(out.join("classification"), &images)?;
    println!("wrote {}", out.display());
    Ok(())
}
