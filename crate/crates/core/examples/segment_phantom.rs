//! Generate a noisy thorax phantom, segment it from automatic seeds and
//! score each lung against its ground truth.
//!
//! cargo run --release -p lungseg --example segment_phantom -- [size] [noise_sd] [rng_seed]

use std::time::Instant;

use lungseg::fc::{segment_auto, AffinityParams, DEFAULT_THETA};
use lungseg::metrics::{dice_coefficient, overlap_coefficient, volume_ml};
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::Side;

fn main() -> lungseg::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let size = args.first().and_then(|s| s.parse().ok()).unwrap_or(128);
    let noise = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(50.0);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let t0 = Instant::now();
    let phantom = generate_thorax_phantom(&PhantomSpec::cube(size, noise, seed))?;
    let t1 = Instant::now();
    let result = segment_auto(&phantom.volume, &AffinityParams::default(), DEFAULT_THETA)?;
    let t2 = Instant::now();

    for side in [Side::Left, Side::Right] {
        let truth = phantom.truth(side);
        let mask = result.mask(side);
        let seeds_inside = result.seeds.side(side).iter().all(|v| truth.get(*v));
        println!(
            "{side:>5}: {:>4} seed(s) inside truth: {seeds_inside}  volume {:.1} mL (truth {:.1})  dice {:.4}  overlap {:.4}",
            result.seeds.side(side).len(),
            volume_ml(mask),
            volume_ml(truth),
            dice_coefficient(mask, truth)?,
            overlap_coefficient(mask, truth)?,
        );
    }
    println!(
        "phantom {:.2}s, segmentation {:.2}s",
        (t1 - t0).as_secs_f64(),
        (t2 - t1).as_secs_f64()
    );
    Ok(())
}
