use scatterlab::dynamics::causality_map;
use scatterlab::ergodic::hear_volume;
use scatterlab::geometry::presets;
use scatterlab::measure::{domain_volumes, sample_mu_theta};
use scatterlab::{Error, Estimate};

#[test]
fn chord_lengths_recover_the_volume() {
    let names = [
        "disk",
        "ball3",
        "ellipse",
        "torus-two-balls",
        "hyperbolic-disk-0.5",
        "hyperbolic-disk-1",
        "hyperbolic-disk-2",
        "spherical-cap-pi6",
        "spherical-cap-pi4",
    ];
    for (k, name) in names.iter().enumerate() {
        let t = presets::by_name(name).unwrap();
        let vols = domain_volumes(&t).unwrap();
        let starts = sample_mu_theta(&t, 40_000, 77 + k as u64).unwrap().points;
        let mut lengths = Vec::with_capacity(starts.len());
        for z in &starts {
            match causality_map(&t, z) {
                Ok(c) => lengths.push(c.length),
                Err(Error::GrazingExit(_)) => {}
                Err(e) => panic!("{name}: {e}"),
            }
        }
        assert!(lengths.len() as f64 > 0.999 * starts.len() as f64, "{name}");
        let heard = *hear_volume(&lengths, vols.vol_dm, t.dim()).unwrap().last().unwrap();
        let e = Estimate::from_values(lengths.iter().copied());
        // the volume estimate is linear in the mean chord
        let sigma = heard * e.stderr() / e.mean();
        assert!(
            (heard - vols.vol_m).abs() < 3.0 * sigma,
            "{name}: heard {heard} vs {} (σ {sigma})",
            vols.vol_m
        );
    }
}
