//! Acceptance suite: one test per criterion, each printing a pass line with
//! its runtime. The heavyweight demo training run is shared between the
//! criteria that need it.

use std::path::PathBuf;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use compose_motion::config::RunConfig;
use compose_motion::coupling::{
    couple_sequences_eps, sample_lambda, MixingRateDist, PairingPolicy, DEFAULT_DENOM_EPS,
};
use compose_motion::cvae::{
    grad_check, kl_divergence, CvaeLossProbe, DiagonalGaussian, ItemNoise, ModelConfig, TrainState,
};
use compose_motion::decouple::{attention_map, top_fraction_mask, RegionGrid};
use compose_motion::energy::compute_part_energy;
use compose_motion::error::Result;
use compose_motion::eval::{fid, gaussian_stats, matrix_sqrt_psd, run_ablation, GaussianStats};
use compose_motion::motion::{ActionLabel, BodyPartition, MotionSequence, Pose, SubActionKind, NUM_JOINTS};
use compose_motion::pipeline::{ablation_config, run_command, Command, RunContext};
use compose_motion::refine::dr_loss;
use compose_motion::render::Image;

fn demo_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json")
}

fn demo_config_value() -> serde_json::Value {
    let text = std::fs::read_to_string(demo_config_path()).expect("bundled demo config");
    serde_json::from_str(&text).expect("demo config parses")
}

fn pass(criterion: &str, detail: String, elapsed: Duration) {
    println!("PASS {criterion}: {detail} [{:.2?}]", elapsed);
}

// ---------------------------------------------------------------------------
// 1. Part-energy oracle equivalence
// ---------------------------------------------------------------------------

fn random_partition<R: Rng>(rng: &mut R) -> BodyPartition {
    let mut joints: Vec<usize> = (0..NUM_JOINTS).collect();
    for i in (1..joints.len()).rev() {
        let j = rng.gen_range(0..=i);
        joints.swap(i, j);
    }
    let parts = rng.gen_range(2..=6);
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (k, j) in joints.into_iter().enumerate() {
        sets[k % parts].push(j);
    }
    BodyPartition { parts: sets.into_iter().enumerate().map(|(i, s)| (format!("part-{i}"), s)).collect() }
}

fn random_sequence<R: Rng>(t: usize, rng: &mut R) -> MotionSequence {
    let frames = (0..t)
        .map(|_| {
            let mut joints = [[0.0; 3]; NUM_JOINTS];
            for j in joints.iter_mut() {
                for c in j.iter_mut() {
                    *c = rng.gen::<f64>() * 2.0 - 1.0;
                }
            }
            Pose { joints }
        })
        .collect();
    MotionSequence { frames, label: ActionLabel::new(0, 2).unwrap(), fps: 20.0 }
}

#[test]
fn c01_energy_matches_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let mut max_err = 0.0f64;
    for _ in 0..100 {
        let t = rng.gen_range(2..=10);
        let seq = random_sequence(t, &mut rng);
        let partition = random_partition(&mut rng);
        let energy = compute_part_energy(&seq, &partition).unwrap();
        for (p, (_, joints)) in partition.parts.iter().enumerate() {
            // brute-force double loop, frame-major accumulation order
            let mut acc = 0.0;
            for k in 1..seq.len() {
                for &n in joints {
                    for c in 0..3 {
                        let d = seq.frames[k].joints[n][c] - seq.frames[k - 1].joints[n][c];
                        acc += d * d;
                    }
                }
            }
            let oracle = acc / (joints.len() as f64 * (seq.len() - 1) as f64);
            max_err = max_err.max((oracle - energy.per_part[p]).abs());
        }
    }
    let elapsed = start.elapsed();
    assert!(max_err <= 1e-12, "max abs deviation {max_err}");
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("criterion-01", format!("energy oracle deviation {max_err:.2e} over 100 sequences"), elapsed);
}

// ---------------------------------------------------------------------------
// 2. Coupling properties
// ---------------------------------------------------------------------------

fn couple_single(yi: [f64; 3], yj: [f64; 3], ei: f64, ej: f64, lambda: f64) -> [f64; 3] {
    let make = |v: [f64; 3]| {
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for j in joints.iter_mut() {
            *j = v;
        }
        MotionSequence {
            frames: vec![Pose { joints }, Pose { joints }],
            label: ActionLabel::new(0, 2).unwrap(),
            fps: 20.0,
        }
    };
    let frames = couple_sequences_eps(
        &make(yi),
        &make(yj),
        &[ei; NUM_JOINTS],
        &[ej; NUM_JOINTS],
        lambda,
        DEFAULT_DENOM_EPS,
    )
    .unwrap();
    frames[0].joints[0]
}

fn dist_to_segment(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab: Vec<f64> = (0..3).map(|c| b[c] - a[c]).collect();
    let ap: Vec<f64> = (0..3).map(|c| p[c] - a[c]).collect();
    let denom: f64 = ab.iter().map(|v| v * v).sum();
    let t = if denom > 0.0 {
        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..3).map(|c| (p[c] - (a[c] + t * ab[c])).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn c02_coupling_properties_hold() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(202);
    for _ in 0..1000 {
        let yi = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
        let yj = [rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0];
        let ei = rng.gen::<f64>() * 3.0 + 1e-3;
        let ej = rng.gen::<f64>() * 3.0 + 1e-3;
        let lambda = rng.gen::<f64>();

        // convexity: on the segment between the sources
        let out = couple_single(yi, yj, ei, ej, lambda);
        assert!(dist_to_segment(out, yi, yj) <= 1e-12);

        // boundary recovery at lambda in {0, 1} with nonzero opposing energy
        assert_eq!(couple_single(yi, yj, ei, ej, 1.0), yi);
        assert_eq!(couple_single(yi, yj, ei, ej, 0.0), yj);

        // symmetric midpoint
        let mid = couple_single(yi, yj, ei, ei, 0.5);
        for c in 0..3 {
            assert!((mid[c] - 0.5 * (yi[c] + yj[c])).abs() <= 1e-12);
        }

        // unit energies degenerate to the plain mix
        let plain = couple_single(yi, yj, 1.0, 1.0, lambda);
        for c in 0..3 {
            let want = lambda * yi[c] + (1.0 - lambda) * yj[c];
            assert!((plain[c] - want).abs() <= 1e-12);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("criterion-02", "coupling convexity/boundary/midpoint/unit-mask over 1000 instances".into(), elapsed);
}

// ---------------------------------------------------------------------------
// 3. Mixing-rate sampler
// ---------------------------------------------------------------------------

#[test]
fn c03_mixing_rate_sampler() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(303);
    let gaussian = MixingRateDist::Gaussian { std: 0.1 };
    let n = 100_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let l = sample_lambda(&gaussian, &mut rng);
        assert!((0.0..=1.0).contains(&l), "support violation: {l}");
        sum += l;
    }
    let mean = sum / n as f64;
    assert!((0.49..=0.51).contains(&mean), "empirical mean {mean}");

    for _ in 0..100 {
        assert_eq!(sample_lambda(&MixingRateDist::Fixed { value: 0.3 }, &mut rng), 0.3);
    }
    let l = sample_lambda(&MixingRateDist::Gaussian { std: 1e-9 }, &mut rng);
    assert!((l - 0.5).abs() <= 1e-6, "concentration failure: {l}");

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("criterion-03", format!("gaussian mean {mean:.5} over 1e5 draws, support in [0,1]"), elapsed);
}

// ---------------------------------------------------------------------------
// 4. Attention analytics
// ---------------------------------------------------------------------------

#[test]
fn c04_attention_projection_analytics() {
    let start = Instant::now();

    let a = attention_map(&[(10.0, 10.0)], &[1.0], 32, 32, 1.0).unwrap();
    assert_eq!(a.values.get(12, 10), 0.25, "inverse square at distance 2");
    assert_eq!(a.values.get(10, 10), 1.0, "clamp at coincident pixel");

    let two = attention_map(&[(5.0, 4.0), (5.0, 7.0)], &[1.0, 1.0], 16, 16, 1.0).unwrap();
    assert_eq!(two.values.get(5, 5), 1.25, "two-joint superposition");

    let line = attention_map(&[(0.0, 0.0)], &[2.0], 64, 1, 1.0).unwrap();
    for row in 1..63 {
        assert!(line.values.get(row + 1, 0) < line.values.get(row, 0), "monotone decay at {row}");
    }

    // top-k cardinality and tie-break
    let equal = RegionGrid { rows: 3, cols: 3, patch: 8, values: vec![1.0; 9] };
    let mask = top_fraction_mask(&equal, 1.0 / 3.0).unwrap();
    assert_eq!(mask.kept_indices(), vec![0, 1, 2]);
    for (r, c, rho) in [(3usize, 3usize, 0.5), (8, 8, 1.0 / 3.0), (4, 7, 0.2)] {
        let values: Vec<f64> = (0..r * c).map(|k| ((k * 13) % 29) as f64).collect();
        let g = RegionGrid { rows: r, cols: c, patch: 8, values };
        let m = top_fraction_mask(&g, rho).unwrap();
        assert_eq!(m.kept_count(), (rho * (r * c) as f64).ceil() as usize);
    }

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("criterion-04", "inverse-square values, clamp, superposition, decay, top-k".into(), elapsed);
}

// ---------------------------------------------------------------------------
// 5. Refinement loss analytics
// ---------------------------------------------------------------------------

#[test]
fn c05_refinement_loss_analytics() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(505);

    let mut img = Image::zeros(64, 64);
    for v in img.data.iter_mut() {
        *v = rng.gen();
    }
    assert_eq!(dr_loss(&img, &img, &img, &img).unwrap(), 0.0, "zero loss on identical images");

    let mut off = img.clone();
    off.data[1234] += 1.0;
    assert!((dr_loss(&off, &img, &img, &img).unwrap() - 1.0).abs() < 1e-12, "single-pixel unit residual");

    let mut max_err = 0.0f64;
    for _ in 0..10 {
        let mut a = Image::zeros(64, 64);
        let mut b = Image::zeros(64, 64);
        let mut c = Image::zeros(64, 64);
        let mut d = Image::zeros(64, 64);
        for v in a.data.iter_mut().chain(b.data.iter_mut()).chain(c.data.iter_mut()).chain(d.data.iter_mut()) {
            *v = rng.gen();
        }
        let got = dr_loss(&a, &b, &c, &d).unwrap();
        let mut want = 0.0;
        for row in 0..64 {
            for col in 0..64 {
                want += (a.get(row, col) - b.get(row, col)).powi(2);
                want += (c.get(row, col) - d.get(row, col)).powi(2);
            }
        }
        max_err = max_err.max((got - want).abs());
    }
    assert!(max_err <= 1e-9, "oracle deviation {max_err}");

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    pass("criterion-05", format!("refinement loss oracle deviation {max_err:.2e}"), elapsed);
}

// ---------------------------------------------------------------------------
// 6. KL closed form vs Monte Carlo
// ---------------------------------------------------------------------------

#[test]
fn c06_kl_closed_form_and_monte_carlo() {
    let start = Instant::now();

    let g = DiagonalGaussian { mean: vec![0.2, -1.0], log_std: vec![0.3, -0.2] };
    assert_eq!(kl_divergence(&g, &g).unwrap(), 0.0);
    let q = DiagonalGaussian { mean: vec![1.0], log_std: vec![0.0] };
    let p = DiagonalGaussian { mean: vec![0.0], log_std: vec![0.0] };
    assert!((kl_divergence(&q, &p).unwrap() - 0.5).abs() < 1e-15);

    let mut rng = ChaCha20Rng::seed_from_u64(606);
    let mut worst_rel = 0.0f64;
    for trial in 0..10 {
        let d = rng.gen_range(2..=6);
        let q = DiagonalGaussian {
            mean: (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect(),
            log_std: (0..d).map(|_| rng.gen::<f64>() * 0.6 - 0.3).collect(),
        };
        let p = DiagonalGaussian {
            mean: (0..d).map(|_| rng.gen::<f64>() * 2.0 + 1.5).collect(),
            log_std: (0..d).map(|_| rng.gen::<f64>() * 0.6 - 0.3).collect(),
        };
        let exact = kl_divergence(&q, &p).unwrap();
        assert!(exact > 0.5, "trial {trial}: KL {exact} too small for a tight MC check");
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let mut log_ratio = 0.0;
            for i in 0..d {
                let e: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                let z = q.mean[i] + q.log_std[i].exp() * e;
                let u = (z - p.mean[i]) / p.log_std[i].exp();
                log_ratio += -q.log_std[i] - 0.5 * e * e - (-p.log_std[i] - 0.5 * u * u);
            }
            acc += log_ratio;
        }
        let mc = acc / n as f64;
        worst_rel = worst_rel.max((mc - exact).abs() / exact);
    }
    assert!(worst_rel < 0.01, "worst MC relative error {worst_rel}");

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass("criterion-06", format!("KL closed form exact; MC worst rel err {worst_rel:.4}"), elapsed);
}

// ---------------------------------------------------------------------------
// 7. Gradient verification
// ---------------------------------------------------------------------------

#[test]
fn c07_gradient_verification() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(707);
    let config = ModelConfig::grad_check_scale(4);
    let (model, mut params) = compose_motion::cvae::Cvae::new(config, &mut rng).unwrap();
    assert!(params.total_len() <= 5000, "{} params", params.total_len());

    let items = gradcheck_items(model.config.frames);
    let noise: Vec<ItemNoise> = (0..items.len())
        .map(|k| ItemNoise {
            eps: (0..model.config.latent_dim).map(|d| ((k * 5 + d) as f64 * 0.41).sin()).collect(),
            dr_frame: None,
        })
        .collect();
    let probe = CvaeLossProbe { model: &model, items: &items, noise: &noise, dr: None };
    let report = grad_check(&mut params, &probe, 1e-5).unwrap();
    assert!(
        report.max_rel_err < 1e-4,
        "CVAE-only max rel err {} at {}",
        report.max_rel_err,
        report.worst_param
    );
    let cvae_err = report.max_rel_err;

    // with the smoothed-render refinement term
    let cam = compose_motion::render::CameraConfig { height: 32, width: 32, scale: 16.0, principal: (16.0, 16.0) };
    let dcfg = compose_motion::decouple::DecoupleConfig { patch: 8, ..Default::default() };
    let inpainter = compose_motion::refine::MeanFill;
    let ctx = compose_motion::refine::DrContext { cam: &cam, decouple: &dcfg, sigma_px: 1.0, inpainter: &inpainter };
    let noise_dr: Vec<ItemNoise> = (0..items.len())
        .map(|k| ItemNoise {
            eps: (0..model.config.latent_dim).map(|d| ((k * 3 + d) as f64 * 0.53).cos()).collect(),
            dr_frame: Some(k % model.config.frames),
        })
        .collect();
    let probe_dr = CvaeLossProbe { model: &model, items: &items, noise: &noise_dr, dr: Some(&ctx) };
    let report_dr = grad_check(&mut params, &probe_dr, 1e-5).unwrap();
    assert!(
        report_dr.max_rel_err < 1e-3,
        "with-DR max rel err {} at {}",
        report_dr.max_rel_err,
        report_dr.worst_param
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    pass(
        "criterion-07",
        format!(
            "grad check over {} params: cvae {cvae_err:.2e}, with refinement {:.2e}",
            report.params_checked, report_dr.max_rel_err
        ),
        elapsed,
    );
}

fn gradcheck_items(t: usize) -> Vec<compose_motion::cvae::TrainItem> {
    use compose_motion::coupling::{couple_labels, couple_sequences};
    use compose_motion::motion::{generate_sub_action_with, GenParams};
    use compose_motion::render::normalize_frontal;
    let kinds = [SubActionKind::ArmWaveLeft, SubActionKind::LegMarch, SubActionKind::ArmWaveRight, SubActionKind::LegKick];
    let mut rng = ChaCha20Rng::seed_from_u64(7007);
    let partition = BodyPartition::default_five();
    let mut items = Vec::new();
    for k in 0..2 {
        let (ci, cj) = ((k * 2) % 4, (k * 2 + 1) % 4);
        let li = ActionLabel::new(ci, 4).unwrap();
        let lj = ActionLabel::new(cj, 4).unwrap();
        let a = generate_sub_action_with(kinds[ci], &GenParams::default(), t, 20.0, li, &mut rng).unwrap();
        let b = generate_sub_action_with(kinds[cj], &GenParams::default(), t, 20.0, lj, &mut rng).unwrap();
        let (a, _) = normalize_frontal(&a);
        let (b, _) = normalize_frontal(&b);
        let ea = compute_part_energy(&a, &partition).unwrap();
        let eb = compute_part_energy(&b, &partition).unwrap();
        let frames = couple_sequences(&a, &b, &ea, &eb, 0.5).unwrap();
        let label = couple_labels(&a.label, &b.label, 0.5).unwrap();
        items.push(compose_motion::cvae::TrainItem {
            id: format!("gc-{k}"),
            frames,
            label,
            source_i: a,
            source_j: b,
            e_i: ea.per_joint,
            e_j: eb.per_joint,
        });
    }
    items
}

// ---------------------------------------------------------------------------
// 8. Frechet distance analytics
// ---------------------------------------------------------------------------

#[test]
fn c08_frechet_distance_analytics() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(808);

    let fs: Vec<Vec<f64>> = (0..40).map(|_| (0..6).map(|_| rng.gen::<f64>()).collect()).collect();
    let s = gaussian_stats(&fs).unwrap();
    let self_fid = fid(&s, &s).unwrap();
    assert!(self_fid <= 1e-9, "self distance {self_fid}");

    use nalgebra::{DMatrix, DVector};
    let make = |mean: &[f64], diag: &[f64]| GaussianStats {
        mean: DVector::from_vec(mean.to_vec()),
        cov: DMatrix::from_diagonal(&DVector::from_vec(diag.to_vec())),
    };
    let shifted = fid(&make(&[0.0, 0.0], &[1.0, 1.0]), &make(&[3.0, 4.0], &[1.0, 1.0])).unwrap();
    assert!((shifted - 25.0).abs() <= 1e-9, "shifted-mean case {shifted}");
    let scalar = fid(&make(&[0.3], &[4.0]), &make(&[0.3], &[1.0])).unwrap();
    assert!((scalar - 1.0).abs() <= 1e-9, "scalar covariance case {scalar}");

    let mut worst = 0.0f64;
    for trial in 0..50 {
        let d = 2 + (trial * 62) / 49; // spans 2..=64
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let m = &a * a.transpose();
        let r = matrix_sqrt_psd(&m).unwrap();
        worst = worst.max((&r * &r - &m).norm() / m.norm());
    }
    assert!(worst < 1e-8, "sqrt reconstruction {worst}");

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    pass("criterion-08", format!("FID analytics exact; sqrt reconstruction worst {worst:.2e}"), elapsed);
}

// ---------------------------------------------------------------------------
// 9-11. Demo end-to-end regression, ablation ordering, conditioning
// ---------------------------------------------------------------------------

struct DemoRun {
    state: TrainState,
    train_elapsed: Duration,
    rerun_matches: bool,
    config: RunConfig,
}

static DEMO: LazyLock<DemoRun> = LazyLock::new(|| run_demo().expect("demo training run"));

fn run_demo() -> Result<DemoRun> {
    let out = tempfile::tempdir().expect("tempdir");
    let value = demo_config_value();
    let ctx = RunContext::new(value.clone(), Some(out.path()), false)?;
    let config = ctx.config.clone();

    let start = Instant::now();
    let dir = run_command(&ctx, Command::Train)?;
    let train_elapsed = start.elapsed();
    let state = TrainState::load(&dir.join("checkpoint.json"))?;

    // rerun with the same seed into a fresh directory
    let out2 = tempfile::tempdir().expect("tempdir");
    let ctx2 = RunContext::new(value, Some(out2.path()), false)?;
    let dir2 = run_command(&ctx2, Command::Train)?;
    let state2 = TrainState::load(&dir2.join("checkpoint.json"))?;

    let rerun_matches = state.loss_history == state2.loss_history
        && state
            .loss_history
            .iter()
            .zip(&state2.loss_history)
            .all(|(a, b)| a.total.to_bits() == b.total.to_bits() && a.recon.to_bits() == b.recon.to_bits());
    Ok(DemoRun { state, train_elapsed, rerun_matches, config })
}

#[test]
fn c09_demo_training_regression() {
    let demo = &*DEMO;
    assert!(
        demo.train_elapsed < Duration::from_secs(600),
        "training took {:?}",
        demo.train_elapsed
    );
    let history = &demo.state.loss_history;
    assert_eq!(history.len(), demo.config.model.epochs);
    let initial = history[0].recon;
    let window = 10.min(history.len());
    let final_smoothed: f64 =
        history[history.len() - window..].iter().map(|e| e.recon).sum::<f64>() / window as f64;
    assert!(
        final_smoothed < 0.5 * initial,
        "smoothed final recon {final_smoothed} vs initial {initial}"
    );
    assert!(demo.rerun_matches, "same-seed rerun diverged from the first loss history");
    pass(
        "criterion-09",
        format!(
            "demo trained in {:?}; recon {initial:.4} -> {final_smoothed:.4}; rerun bit-exact",
            demo.train_elapsed
        ),
        demo.train_elapsed,
    );
}

#[test]
fn c10_ablation_ordering_across_seeds() {
    LazyLock::force(&DEMO);
    let start = Instant::now();
    let mut value = demo_config_value();
    compose_motion::config::apply_override(&mut value, "eval.arms=[\"ours-wo-dr\",\"wo-mask\"]").unwrap();
    let mut holds = 0;
    let mut detail = Vec::new();
    for seed in 1..=5u64 {
        compose_motion::config::apply_override(&mut value, &format!("seed={seed}")).unwrap();
        let ctx = RunContext::new(value.clone(), None, false).unwrap();
        let cfg = ablation_config(&ctx).unwrap();
        let reports = run_ablation(&cfg).unwrap();
        let full = reports.iter().find(|r| r.name == "ours-wo-dr").unwrap().metrics.fid;
        let wo_mask = reports.iter().find(|r| r.name == "wo-mask").unwrap().metrics.fid;
        if wo_mask > full {
            holds += 1;
        }
        detail.push(format!("seed {seed}: wo-mask {wo_mask:.3} vs full {full:.3}"));
    }
    let elapsed = start.elapsed();
    assert!(holds >= 4, "ordering held in {holds}/5 seeds: {}", detail.join("; "));
    assert!(elapsed < Duration::from_secs(3600), "took {elapsed:?}");
    pass("criterion-10", format!("FID(wo-mask) > FID(full) in {holds}/5 seeds ({})", detail.join("; ")), elapsed);
}

#[test]
fn c11_conditioning_dominant_parts() {
    let demo = &*DEMO;
    let start = Instant::now();
    let model = demo.state.model().unwrap();
    let kinds: Vec<SubActionKind> =
        demo.config.data.kinds.iter().map(|n| SubActionKind::from_name(n).unwrap()).collect();
    let partition = BodyPartition::default_five();
    let num_classes = kinds.len();
    let pairs = PairingPolicy::FullClass.resolve(&(0..num_classes).collect::<Vec<_>>()).unwrap();

    let mut matched = 0;
    let mut detail = Vec::new();
    for &(a, b) in &pairs {
        let xa = ActionLabel::new(a, num_classes).unwrap();
        let xb = ActionLabel::new(b, num_classes).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1100 + (a * 7 + b) as u64);
        let mut mean_energy = vec![0.0; partition.num_parts()];
        for _ in 0..32 {
            let generated =
                compose_motion::cvae::generate(&model, &demo.state, &xa, &xb, 0.5, &mut rng).unwrap();
            let seq = MotionSequence {
                frames: generated.frames,
                label: xa,
                fps: generated.fps,
            };
            let e = compute_part_energy(&seq, &partition).unwrap();
            for (acc, v) in mean_energy.iter_mut().zip(&e.per_part) {
                *acc += v;
            }
        }
        let argmax = mean_energy
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i)
            .unwrap();
        let dom_a = partition.part_index(kinds[a].dominant_part().name()).unwrap();
        let dom_b = partition.part_index(kinds[b].dominant_part().name()).unwrap();
        let ok = argmax == dom_a || argmax == dom_b;
        if ok {
            matched += 1;
        }
        detail.push(format!(
            "({},{}) -> {} [{}]",
            kinds[a].name(),
            kinds[b].name(),
            partition.parts[argmax].0,
            if ok { "ok" } else { "MISS" }
        ));
    }
    let frac = matched as f64 / pairs.len() as f64;
    let elapsed = start.elapsed();
    assert!(frac >= 0.7, "conditioning match {frac:.2} ({})", detail.join("; "));
    pass(
        "criterion-11",
        format!("generated dominant part matched in {matched}/{} pairs", pairs.len()),
        elapsed,
    );
}
