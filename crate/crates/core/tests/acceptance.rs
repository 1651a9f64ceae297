//! Acceptance suite. Runs every criterion in sequence, prints one line per
//! criterion and exits nonzero if any fails. Runs without the test harness
//! so the lines always appear and runtimes are measured without contention.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scatterlab::dynamics::{causality_map, reflect, ReflectionLaw};
use scatterlab::ergodic::{self, Observable};
use scatterlab::geometry::{presets, Table};
use scatterlab::holography::{self, Isometry};
use scatterlab::lyapunov::{self, EnclosingBody};
use scatterlab::measure::{self, entry_from_coords, BoundaryCoords, Estimate, PhaseBox};
use scatterlab::{parallel, Result};

const MILLION: usize = 1_000_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

/// `|mean − want| < 3·stderr`, as a detail string.
fn within_3se(est: &measure::EstimateSummary, want: f64) -> (bool, String) {
    let z = (est.mean - want) / est.stderr;
    (z.abs() < 3.0, format!("mean {:.6} vs {want:.6}, stderr {:.2e}, z {z:+.2}", est.mean, est.stderr))
}

fn mfp_check(table: &Table, want: f64, seed: u64) -> Result<(bool, String)> {
    let r = ergodic::mean_free_path(table, MILLION, seed)?;
    let (ok, s) = within_3se(&r.space, want);
    let pred_ok = (r.prediction - want).abs() < 1e-12;
    Ok((ok && pred_ok, format!("{s}, prediction {:.6}", r.prediction)))
}

fn c1() -> Result<Outcome> {
    let (ok, s) = mfp_check(&presets::unit_disk(), PI / 2.0, 101)?;
    outcome(ok, s)
}

fn c2() -> Result<Outcome> {
    let (ok, s) = mfp_check(&presets::unit_ball(), 4.0 / 3.0, 102)?;
    outcome(ok, s)
}

fn c3() -> Result<Outcome> {
    let eps = 0.1;
    let want = PI * (1.0 - PI * eps * eps) / (2.0 * PI * eps);
    let r = ergodic::mean_free_path(&presets::torus_one_ball(eps), MILLION, 103)?;
    let rel = (r.space.mean - want).abs() / want;
    let noted = r.note.as_deref().is_some_and(|n| n.contains("infinite horizon"));
    let ok = (r.prediction - 4.8429).abs() < 5e-5 && rel < 0.01 && r.excluded_fraction < 1e-3 && noted;
    outcome(
        ok,
        format!(
            "prediction {:.4}, mean {:.4} (rel {:.2e} < 1e-2), excluded {:.1e} < 1e-3, caveat noted {noted}",
            r.prediction, r.space.mean, rel, r.excluded_fraction
        ),
    )
}

fn c4() -> Result<Outcome> {
    let limit = Duration::from_secs(180);
    let start = Instant::now();
    let (a, sa) = mfp_check(&presets::hyperbolic_disk(1.0), PI * 0.5f64.tanh(), 104)?;
    let ta = start.elapsed();
    let (b, sb) = mfp_check(&presets::spherical_cap(PI / 4.0), PI * (PI / 8.0).tan(), 105)?;
    let tb = start.elapsed() - ta;
    outcome(
        a && b && ta <= limit && tb <= limit,
        format!("hyperbolic: {sa} ({:.1} s); cap: {sb} ({:.1} s)", ta.as_secs_f64(), tb.as_secs_f64()),
    )
}

fn c5() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (table, seed) in [(presets::unit_disk(), 201), (presets::torus_two_balls(), 202)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes: Vec<PhaseBox> = (0..20).map(|_| PhaseBox::random(&table, &mut rng)).collect();
        let r = measure::measure_preservation_test(&table, &ReflectionLaw::Elastic, &boxes, MILLION, seed)?;
        ok &= r.boxes.len() == 20 && r.max_abs_z() < 4.0;
        parts.push(format!("{} max|z| {:.2}", table.name(), r.max_abs_z()));
    }
    outcome(ok, format!("{} (tol 4, 20 boxes, N = 1e6)", parts.join(", ")))
}

fn c6() -> Result<Outcome> {
    let t = presets::torus_two_balls();
    let r = ergodic::birkhoff_report(&t, &ReflectionLaw::Elastic, Observable::ChordLength, 10, 100_000, MILLION, 301)?;
    let agree = r.agreeing(0.02);
    let worst = r.agreement.iter().cloned().fold(0.0, f64::max);
    outcome(
        agree >= 9,
        format!("space mean {:.5}; {agree}/10 orbits within 2% (worst gap {worst:.2e})", r.space_avg.mean),
    )
}

fn c7() -> Result<Outcome> {
    let t = presets::unit_disk();
    let f = lyapunov::build_well_balanced_f(&t, EnclosingBody::default_for(&t)?, 10_000, 401)?;
    let set = measure::sample_mu_theta(&t, 10_000, 402)?;
    let mut worst = 0.0f64;
    for z in &set.points {
        let c = causality_map(&t, z)?;
        worst = worst.max((lyapunov::delta_f(&t, &f, z)? - c.length).abs());
    }
    outcome(worst < 1e-9, format!("max |ΔF − ℓ| = {worst:.2e} over 1e4 chords (tol 1e-9)"))
}

fn c8() -> Result<Outcome> {
    let t = presets::unit_disk();
    let closed = measure::trajectory_space_volume(&t)?;
    // periodic trapezoid in position, composite Simpson in direction
    let (np, nd) = (64, 2000);
    let mut quad = 0.0;
    for i in 0..np {
        let pos = 2.0 * PI * i as f64 / np as f64;
        let mut inner = 0.0;
        for j in 0..=nd {
            let dir = -PI / 2.0 + PI * j as f64 / nd as f64;
            let w = if j == 0 || j == nd { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            let z = entry_from_coords(&t, &BoundaryCoords { piece: 0, pos: [pos, 0.0], dir: [dir, 0.0] })?;
            let density = if j == 0 || j == nd { 0.0 } else { measure::mu_theta_density(&t, &z)? };
            inner += w * density;
        }
        quad += inner * (PI / nd as f64) / 3.0 * (2.0 * PI / np as f64);
    }
    // uniform (position, direction) sampling of the density
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut est = Estimate::new();
    for _ in 0..200_000 {
        let c = BoundaryCoords { piece: 0, pos: [rng.random::<f64>() * 2.0 * PI, 0.0], dir: [(rng.random::<f64>() - 0.5) * PI, 0.0] };
        est.push(measure::mu_theta_density(&t, &entry_from_coords(&t, &c)?)? * 2.0 * PI * PI);
    }
    let z = (est.mean() - 4.0 * PI) / est.stderr();
    let ok = (closed - 4.0 * PI).abs() < 1e-12 && (quad - 4.0 * PI).abs() < 1e-9 && z.abs() < 3.0;
    outcome(
        ok,
        format!(
            "closed form {closed:.12}, quadrature gap {:.1e} (tol 1e-9), sampled {:.5} z {z:+.2}",
            (quad - 4.0 * PI).abs(),
            est.mean()
        ),
    )
}

fn c9() -> Result<Outcome> {
    let t = presets::unit_disk();
    let f = lyapunov::build_well_balanced_f(&t, EnclosingBody::default_for(&t)?, 10_000, 601)?;
    let var = lyapunov::var_f_boundary(&t, &f, 100_000, 602)?;
    let pad = 0.05 * var.var;
    let ts = lyapunov::grid(var.f_min - pad, var.f_max + pad, 100);
    let curve = lyapunov::slice_curve(&t, &f, &ts, 100_000, 603)?;
    let integral = curve.integral();
    let target = 2.0 * PI * PI;
    let rel = (integral - target).abs() / target;
    let max_a = curve.areas.iter().map(Estimate::mean).fold(0.0, f64::max);
    outcome(
        rel < 0.02 && max_a <= 4.0 * PI,
        format!("∫A = {integral:.4} vs 2π² = {target:.4} (rel {rel:.2e} < 2e-2), max A {max_a:.4} ≤ 4π"),
    )
}

fn c10() -> Result<Outcome> {
    let disk = ergodic::inequality_report(&presets::unit_disk(), None, 20_000, 701)?;
    let ball = ergodic::inequality_report(&presets::unit_ball(), None, 20_000, 702)?;
    let d = disk.check("diameter").expect("diameter check");
    let b = ball.check("diameter").expect("diameter check");
    let ok = d.passed
        && b.passed
        && (d.rhs - 4.0).abs() < 1e-12
        && (d.margin - 4.0 / PI).abs() < 1e-12
        && (b.rhs - 2.0 * PI).abs() < 1e-12
        && (b.margin - 1.5).abs() < 1e-12;
    outcome(
        ok,
        format!(
            "disk {:.6} ≤ {:.6} (margin {:.6}), ball {:.6} ≤ {:.6} (margin {:.6})",
            d.lhs, d.rhs, d.margin, b.lhs, b.rhs, b.margin
        ),
    )
}

fn c11() -> Result<Outcome> {
    let u = PhaseBox::new(None, [0.0, 0.1], [0.4, 0.6]);
    let r = ergodic::recurrence_test(&presets::unit_disk(), &ReflectionLaw::Elastic, &u, 200, 10_000, 801)?;
    outcome(
        r.returned_fraction > 0.99,
        format!("returned fraction {:.3} (> 0.99), mean returns {:.1}", r.returned_fraction, r.mean_return_count),
    )
}

fn c12() -> Result<Outcome> {
    let disk = presets::unit_disk();
    let mut worst = 0.0f64;
    for iso in [Isometry::Rotation { angle: 1.0 }, Isometry::Reflection] {
        let image = iso.apply_table(&disk)?;
        let r = holography::conjugacy_residual(&disk, &image, |c| iso.apply_coords(c), 10_000, 901)?;
        worst = worst.max(r.max_residual);
    }
    let data = holography::scattering_dataset(&disk, None, 64)?;
    let rec = holography::reconstruct_chords(&data, disk.space(), 0.01)?;
    let reference = holography::reference_points(&disk, 20_000, 902)?;
    let hd = holography::hausdorff_to_cloud(disk.space(), &reference, &rec.cloud, 0.04);
    outcome(
        worst < 1e-9 && hd < 0.05,
        format!("max conjugacy residual {worst:.1e} (tol 1e-9), Hausdorff {hd:.4} (tol 0.05)"),
    )
}

fn c13() -> Result<Outcome> {
    let tables = [
        presets::unit_disk(),
        presets::unit_ball(),
        presets::ellipse(),
        presets::torus_two_balls(),
        presets::hyperbolic_disk(1.0),
        presets::spherical_cap(PI / 4.0),
    ];
    let law = ReflectionLaw::Elastic;
    let mut worst = [0.0f64; 5];
    for (k, t) in tables.iter().enumerate() {
        let set = measure::sample_mu_theta(t, 500, 1000 + k as u64)?;
        let space = t.space();
        for z in &set.points {
            // reflection involution
            let r2 = reflect(&law, t, &reflect(&law, t, z)?)?;
            worst[0] = worst[0].max((r2.v - z.v).norm());
            let c = causality_map(t, z)?;
            // chord replay
            let replay = space.geodesic_flow(z, c.length);
            worst[1] = worst[1].max(space.chart_distance(&replay.q, &c.exit.q));
            // time reversal
            let back = causality_map(t, &c.exit.reversed())?;
            worst[2] = worst[2].max(space.chart_distance(&back.exit.q, &z.q)).max((back.length - c.length).abs());
            // flow composition
            let (s1, s2) = (0.37 * c.length, 0.41 * c.length);
            let a = space.geodesic_flow(&space.geodesic_flow(z, s1), s2);
            let b = space.geodesic_flow(z, s1 + s2);
            worst[3] = worst[3].max(space.chart_distance(&a.q, &b.q)).max((a.v - b.v).norm());
        }
        // ΔF additivity along the chord
        if let Ok(body) = EnclosingBody::default_for(t) {
            let f = lyapunov::LyapunovF::unchecked(t, body)?;
            for z in set.points.iter().take(200) {
                let c = causality_map(t, z)?;
                let mid = space.geodesic_flow(z, 0.5 * c.length);
                let split = (f.eval(&mid)? - f.eval(z)?) + (f.eval(&c.exit)? - f.eval(&mid)?);
                worst[4] = worst[4].max((split - c.length).abs());
            }
        }
    }
    // estimate merge exactness
    let mut rng = ChaCha8Rng::seed_from_u64(1100);
    let values: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8))).collect();
    let parts: Vec<Estimate> = values.chunks(997).map(|c| Estimate::from_values(c.iter().copied())).collect();
    let forward = Estimate::merged(parts.iter());
    let backward = Estimate::merged(parts.iter().rev());
    let merge_exact = forward.sum().to_bits() == backward.sum().to_bits()
        && forward.variance().to_bits() == backward.variance().to_bits()
        && forward.sum().to_bits() == Estimate::from_values(values.iter().copied()).sum().to_bits();
    // determinism across worker counts
    let disk = presets::unit_disk();
    let one = parallel::with_workers(Some(1), || ergodic::space_average(&disk, Observable::ChordLength, 50_000, 1200))??;
    let eight = parallel::with_workers(Some(8), || ergodic::space_average(&disk, Observable::ChordLength, 50_000, 1200))??;
    let deterministic = one.estimate.mean().to_bits() == eight.estimate.mean().to_bits()
        && one.estimate.stderr().to_bits() == eight.estimate.stderr().to_bits();
    let tol = [1e-12, 1e-9, 1e-9, 1e-9, 1e-9];
    let ok = worst.iter().zip(tol).all(|(w, t)| *w < t) && merge_exact && deterministic;
    outcome(
        ok,
        format!(
            "involution {:.1e}, replay {:.1e}, reversal {:.1e}, composition {:.1e}, ΔF additivity {:.1e}, merge exact {merge_exact}, worker-independent {deterministic}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 13] = [
        ("mean free path, disk", Duration::from_secs(60), c1),
        ("mean free path, ball n=3", Duration::from_secs(120), c2),
        ("torus minus ball eps=0.1", Duration::from_secs(180), c3),
        ("curved mean free path", Duration::from_secs(360), c4),
        ("measure preservation", Duration::from_secs(180), c5),
        ("Birkhoff agreement, Sinai table", Duration::from_secs(300), c6),
        ("well-balanced identity", Duration::from_secs(10), c7),
        ("trajectory-space volume", Duration::from_secs(60), c8),
        ("slice identity", Duration::from_secs(300), c9),
        ("diameter inequality", Duration::from_secs(60), c10),
        ("recurrence", Duration::from_secs(60), c11),
        ("holography", Duration::from_secs(120), c12),
        ("property suite", Duration::from_secs(60), c13),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && elapsed <= *limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {n:>2} [{}] {name}: {detail} ({:.1} s, limit {} s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
