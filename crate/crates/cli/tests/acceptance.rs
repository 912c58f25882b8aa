//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs under `cargo test` (harness disabled).

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{header, Request};
use common::*;
use http_body_util::BodyExt;
use lungseg::edit::{EditHistory, Stroke, StrokeMode};
use lungseg::fc::{
    affinity, compute_connectivity, segment_auto, threshold_scene, AffinityParams, DEFAULT_THETA,
};
use lungseg::io::{decode_volume, load_mask, save_mask};
use lungseg::metrics::{dice_coefficient, overlap_coefficient, pearson};
use lungseg::phantom::{generate_thorax_phantom, PhantomSpec};
use lungseg::seeds::{auto_seeds, candidate_regions, extract_body_mask, extract_rib_cage, most_robust_region};
use lungseg::{BinaryMask, HuVolume, Plane, Side, VolumeGeometry};
use rand::Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fc_oracle_equivalence() -> Outcome {
    let mut r = rng(0xFC);
    let p = AffinityParams::default();
    let started = Instant::now();
    for case in 0..20 {
        let vol = random_volume(&mut r, [4, 4, 3], -1000.0, 0.0);
        let full = BinaryMask::full(vol.geometry().clone());
        let seed = random_voxel(&mut r, [4, 4, 3]);
        let scene = compute_connectivity(&vol, &[seed], &p, &full).map_err(|e| e.to_string())?;
        let oracle = fc_simple_paths_bounded(&vol, &[seed], &p, &full);
        ensure(scene.strength() == &oracle[..], || format!("volume {case} differs from oracle"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("20/20 volumes bit-identical, {:.3} s", elapsed.as_secs_f64()))
}

fn affinity_spot_values() -> Outcome {
    let p = AffinityParams::default();
    let g = VolumeGeometry::new([2, 1, 1], [1.0; 3]);
    let at = |a: f32, b: f32| {
        let vol = HuVolume::new(g.clone(), vec![a, b]).unwrap();
        affinity(&vol, &p, [0, 0, 0], [1, 0, 0])
    };
    let k1 = at(-550.0, -550.0);
    let k2 = at(-400.0, -400.0);
    ensure(k1 == 1.0, || format!("affinity(-550,-550) = {k1}"))?;
    let err = (k2 - (-0.5f64).exp()).abs();
    ensure(err <= 1e-12, || format!("affinity(-400,-400) off by {err}"))?;
    Ok(format!("1.0 exact; exp(-0.5) within {err:.1e}"))
}

fn phantom_pipeline() -> Outcome {
    let (mut min_dice, mut min_overlap, mut max_secs) = (1.0f64, 1.0f64, 0.0f64);
    for rng_seed in 0..20 {
        let started = Instant::now();
        let p = generate_thorax_phantom(&PhantomSpec::cube(128, 50.0, 1000 + rng_seed))
            .map_err(|e| e.to_string())?;
        let result = segment_auto(&p.volume, &AffinityParams::default(), DEFAULT_THETA)
            .map_err(|e| format!("phantom {rng_seed}: {e}"))?;
        let secs = started.elapsed().as_secs_f64();
        max_secs = max_secs.max(secs);
        ensure(secs < 30.0, || format!("phantom {rng_seed} took {secs:.1} s"))?;
        for side in [Side::Left, Side::Right] {
            let truth = p.truth(side);
            let seeds = result.seeds.side(side);
            ensure(!seeds.is_empty() && seeds.iter().all(|v| truth.get(*v)), || {
                format!("phantom {rng_seed}: {side} seeds outside the {side} truth")
            })?;
            let d = dice_coefficient(result.mask(side), truth).unwrap();
            let o = overlap_coefficient(result.mask(side), truth).unwrap();
            min_dice = min_dice.min(d);
            min_overlap = min_overlap.min(o);
            ensure(d >= 0.98 && o >= 0.96, || {
                format!("phantom {rng_seed} {side}: dice {d:.4} overlap {o:.4}")
            })?;
        }
    }
    Ok(format!(
        "seeds 20/20 inside truth; min dice {min_dice:.4}, min overlap {min_overlap:.4}, slowest run {max_secs:.2} s"
    ))
}

fn monotonicity() -> Outcome {
    let mut r = rng(0x40);
    for case in 0..10 {
        let dims = [16; 3];
        let vol = random_volume(&mut r, dims, -1000.0, 0.0);
        let full = BinaryMask::full(vol.geometry().clone());
        let a = random_voxel(&mut r, dims);
        let b = random_voxel(&mut r, dims);
        let base = compute_connectivity(&vol, &[a], &AffinityParams::default(), &full).unwrap();

        let mut thetas = [r.random_range(0.01..1.0), r.random_range(0.01..1.0)];
        thetas.sort_by(f64::total_cmp);
        let loose = threshold_scene(&base, thetas[0]).unwrap();
        let tight = threshold_scene(&base, thetas[1]).unwrap();
        ensure(tight.is_subset_of(&loose).unwrap(), || format!("volume {case}: theta nesting"))?;

        let mut sigmas = [r.random_range(20.0..400.0), r.random_range(20.0..400.0)];
        sigmas.sort_by(f64::total_cmp);
        let with = |s: f64| AffinityParams { sigma_hu: s, ..AffinityParams::default() };
        let narrow = compute_connectivity(&vol, &[a], &with(sigmas[0]), &full).unwrap();
        let wide = compute_connectivity(&vol, &[a], &with(sigmas[1]), &full).unwrap();
        ensure(
            narrow.strength().iter().zip(wide.strength()).all(|(x, y)| x <= y),
            || format!("volume {case}: sigma monotonicity"),
        )?;

        let more = compute_connectivity(&vol, &[a, b], &AffinityParams::default(), &full).unwrap();
        ensure(
            base.strength().iter().zip(more.strength()).all(|(x, y)| x <= y),
            || format!("volume {case}: seed-set monotonicity"),
        )?;
    }
    Ok("theta, sigma and seed-set inclusion hold on 10/10 volumes".into())
}

fn seed_determinism() -> Outcome {
    for rng_seed in [7, 8, 9] {
        let p = generate_thorax_phantom(&PhantomSpec::cube(128, 50.0, rng_seed)).unwrap();
        let (first, _) = auto_seeds(&p.volume).map_err(|e| e.to_string())?;
        let (second, _) = auto_seeds(&p.volume).map_err(|e| e.to_string())?;
        ensure(first == second, || format!("phantom {rng_seed}: seeds differ between runs"))?;
        let body = extract_body_mask(&p.volume).unwrap();
        let ribs = extract_rib_cage(&p.volume, &body);
        let regions = candidate_regions(&p.volume, &body, &ribs).unwrap();
        for side in [Side::Left, Side::Right] {
            let region = most_robust_region(&regions, side).unwrap();
            let brute = region
                .mask
                .iter_set()
                .map(|i| p.volume.values()[i])
                .fold(f32::INFINITY, f32::min);
            for &s in first.side(side) {
                ensure(p.volume.at(s) == brute, || {
                    format!("phantom {rng_seed} {side}: seed HU {} vs minimum {brute}", p.volume.at(s))
                })?;
            }
        }
    }
    Ok("identical coordinates across runs; seed HU = region minimum on 3/3 phantoms".into())
}

fn metrics_identities() -> Outcome {
    let mut r = rng(0x3E);
    let g = VolumeGeometry::new([32; 3], [1.0; 3]);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let (da, db) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let a = random_mask(&mut r, &g, da);
        let b = random_mask(&mut r, &g, db);
        let j = overlap_coefficient(&a, &b).unwrap();
        let d = dice_coefficient(&a, &b).unwrap();
        let err = (d - 2.0 * j / (1.0 + j)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("pair {case}: dice identity off by {err}"))?;
        let u = a.union(&b).unwrap().count();
        let i = a.intersection(&b).unwrap().count();
        ensure(u + i == a.count() + b.count(), || format!("pair {case}: volume additivity"))?;
    }
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let r1 = pearson(&x, &x.map(|v| 2.0 * v + 3.0)).unwrap();
    ensure((r1 - 1.0).abs() <= 1e-12, || format!("r(x, 2x+3) = {r1}"))?;
    // deviations (-1,0,1) and (-1,1,0): cross sum 1, squared sums 2 and 2
    let r2 = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    ensure((r2 - 0.5).abs() <= 1e-12, || format!("hand-computed r = {r2}"))?;
    Ok(format!("100 pairs, dice identity within {worst:.1e}; counts additive; r = {r1}, {r2}"))
}

fn random_stroke(r: &mut impl Rng, g: &VolumeGeometry) -> Stroke {
    let plane = Plane::ALL[r.random_range(0..3)];
    let (w, h) = g.slice_shape(plane);
    let points = (0..r.random_range(1..5))
        .map(|_| [r.random_range(-2.0..w as f64 + 2.0), r.random_range(-2.0..h as f64 + 2.0)])
        .collect();
    Stroke {
        plane,
        slice_index: r.random_range(0..g.slice_count(plane)),
        points,
        radius_px: r.random_range(0..4),
        mode: if r.random_bool(0.5) { StrokeMode::Add } else { StrokeMode::Delete },
    }
}

fn edit_algebra() -> Outcome {
    let mut r = rng(0xED);
    let g = VolumeGeometry::new([20, 18, 12], [1.0; 3]);
    let mut strokes = 0;
    for case in 0..50 {
        let density = r.random_range(0.0..0.8);
        let initial = random_mask(&mut r, &g, density);
        let mut mask = initial.clone();
        let mut history = EditHistory::new();
        for _ in 0..r.random_range(1..25) {
            let s = random_stroke(&mut r, &g);
            history.apply(&mut mask, &s).unwrap();
            let before = mask.clone();
            let (_, again) = history.apply(&mut mask, &s).unwrap();
            ensure(again.changed() == 0 && mask == before, || {
                format!("sequence {case}: stroke not idempotent")
            })?;
            strokes += 1;
        }
        while history.undo(&mut mask, None).unwrap().is_some() {}
        ensure(mask.bits() == initial.bits(), || format!("sequence {case}: undo replay differs"))?;
    }
    Ok(format!("50/50 sequences restored bitwise; {strokes} strokes idempotent"))
}

fn io_round_trip() -> Outcome {
    let mut r = rng(0x10);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for case in 0..20 {
        let g = VolumeGeometry::new(
            [0, 1, 2].map(|_| r.random_range(1..40)),
            [0, 1, 2].map(|_| r.random_range(0.2..4.0)),
        );
        let density = r.random_range(0.0..1.0);
        let mask = random_mask(&mut r, &g, density);
        for name in ["m.nii", "m.nii.gz"] {
            let path = dir.path().join(format!("{case}_{name}"));
            save_mask(&mask, &path).map_err(|e| e.to_string())?;
            let back = load_mask(&path, None).map_err(|e| e.to_string())?;
            let spacing_ok = (0..3).all(|a| (back.geometry().spacing[a] - g.spacing[a]).abs() < 1e-6);
            ensure(back.geometry().dims == g.dims && spacing_ok && back.bits() == mask.bits(), || {
                format!("mask {case} ({name}) did not round-trip")
            })?;
        }
    }
    Ok("20 masks x {plain, gzip}: bits, dims and spacing preserved".into())
}

fn cli_service_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = generate_thorax_phantom(&PhantomSpec::cube(128, 50.0, 77)).unwrap();
    let input = dir.path().join("phantom.nii.gz");
    lungseg::io::save_volume(&p.volume, &input).unwrap();

    let cli_out = dir.path().join("cli_mask.nii.gz");
    let o = Command::new(env!("CARGO_BIN_EXE_lungseg"))
        .args(["segment", input.to_str().unwrap(), "-o", cli_out.to_str().unwrap(), "--sigma", "150", "--theta", "0.5"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || String::from_utf8_lossy(&o.stderr).into_owned())?;
    let cli_mask = load_mask(&cli_out, None).unwrap();

    let rt = tokio::runtime::Runtime::new().unwrap();
    let service_mask = rt.block_on(async {
        let app = lungseg_server::router(lungseg_server::AppState::new(Default::default()));
        let call = |req: Request<Body>| {
            let app = app.clone();
            async move {
                let resp = app.oneshot(req).await.unwrap();
                resp.into_body().collect().await.unwrap().to_bytes()
            }
        };
        let created = call(
            Request::post("/api/sessions")
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(serde_json::json!({ "path": input }).to_string()))
                .unwrap(),
        )
        .await;
        let id = serde_json::from_slice::<serde_json::Value>(&created).unwrap()["session_id"]
            .as_str()
            .unwrap()
            .to_string();
        call(
            Request::post(format!("/api/sessions/{id}/segment"))
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(r#"{"mode":"auto","params":{"mean":-550,"sigma":150,"theta":0.5,"adjacency":6}}"#))
                .unwrap(),
        )
        .await;
        let bytes = call(Request::get(format!("/api/sessions/{id}/mask")).body(Body::empty()).unwrap()).await;
        BinaryMask::from_volume(&decode_volume(&bytes).unwrap(), None)
    });
    ensure(!cli_mask.is_empty(), || "CLI mask is empty".into())?;
    ensure(cli_mask.bits() == service_mask.bits(), || {
        let (i, a, b) = cli_mask.overlap_counts(&service_mask).unwrap();
        format!("masks differ: |cli| {a}, |service| {b}, common {i}")
    })?;
    Ok(format!("{} voxels, bitwise identical", cli_mask.count()))
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("fc-oracle-equivalence", fc_oracle_equivalence),
        ("affinity-spot-values", affinity_spot_values),
        ("phantom-pipeline", phantom_pipeline),
        ("connectivity-monotonicity", monotonicity),
        ("seed-determinism", seed_determinism),
        ("metrics-identities", metrics_identities),
        ("edit-algebra", edit_algebra),
        ("io-round-trip", io_round_trip),
        ("cli-service-parity", cli_service_parity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS  {name:<28} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<28} {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
