//! Feature and response shapes of both network profiles, from the layer
//! recurrence and from an actual forward pass.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twinbranch::networks::{
    appearance_response, semantic_response, shape_chain, ANet, NetworkProfile, SNet, SemanticHead,
    SemanticVariant,
};
use twinbranch::{Result, Tensor};

fn image(side: usize) -> Tensor {
    Tensor::from_fn3(side, side, 3, |y, x, c| {
        ((y * 7 + x * 3 + c) % 11) as f32 / 10.0
    })
}

fn main() -> Result<()> {
    for p in [NetworkProfile::desk(), NetworkProfile::paper()] {
        println!("profile {}", p.name);
        for (input, label) in [(p.target_size, "z"), (p.search_size, "X")] {
            let chain = shape_chain(&p.anet, input, p.input_channels)?;
            println!("  A-Net on {label} ({input}x{input}): {chain:?}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let anet = ANet::init(&p, &mut rng);
        let snet = SNet::init(&p, &mut rng)?;
        let head = SemanticHead::init(&p, SemanticVariant::FULL, &mut rng);
        let fz = anet.forward(&image(p.target_size), &p)?;
        let fx = anet.forward(&image(p.search_size), &p)?;
        let taps = snet.forward(&image(p.search_size))?;
        let ha = appearance_response(&fz, &fx, p.total_stride)?;
        let hs = semantic_response(&taps, &taps, &head, &p)?;
        println!(
            "  f(z) {:?}  f(X) {:?}  taps {:?} {:?}",
            fz.shape(),
            fx.shape(),
            taps[0].shape(),
            taps[1].shape()
        );
        println!(
            "  responses {:?} and {:?}",
            ha.scores.shape(),
            hs.scores.shape()
        );
    }
    Ok(())
}
