//! Acceptance checks: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the console.
//! A criterion listed as a known failure still runs in full and prints its
//! measured numbers; it only stops failing the process as a whole.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uapg::attack::{madc_attack, train_uap, train_uap_observed, MadcConfig, TrainConfig};
use uapg::codec::CodecSpec;
use uapg::imaging::{
    apply_perturbation, mse, scale_to_amplitude, synthetic_image, synthetic_video, Field, ImageTensor,
    Perturbation, Shape,
};
use uapg::metrics::{builtin, builtin_registry, finite_diff_gradient, LinearScorer};
use uapg::stability::{
    assemble_report, curve_area, gain, normalize_curves, run_stability_pipeline, stability_score, DependencePoint,
    EvalConfig, EvalVideo, RDCurve, RdPoint, ScoreCache, StabilityReport, TargetMetric,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

struct Criterion {
    name: &'static str,
    /// Known to be unattainable as stated; see the project notes.
    known_failure: bool,
    check: fn() -> Verdict,
}

fn main() {
    let criteria = [
        Criterion { name: "gradient-correctness", known_failure: false, check: gradient_correctness },
        Criterion { name: "training-analytic-targets", known_failure: true, check: training_analytic_targets },
        Criterion { name: "clip-invariant", known_failure: false, check: clip_invariant },
        Criterion { name: "madc-contract", known_failure: false, check: madc_contract },
        Criterion { name: "attack-cost-accounting", known_failure: false, check: attack_cost_accounting },
        Criterion { name: "area-oracles", known_failure: false, check: area_oracles },
        Criterion { name: "stability-hand-case", known_failure: false, check: stability_hand_case },
        Criterion { name: "desk-pipeline", known_failure: false, check: desk_pipeline },
        Criterion { name: "normalization-invariance", known_failure: false, check: normalization_invariance },
        Criterion { name: "determinism", known_failure: false, check: determinism },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut unexpected = 0;
    for c in &criteria {
        let started = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            verdict(false, format!("aborted: {msg}"))
        });
        let status = match (v.pass, c.known_failure) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{status:<12} {:<26} {} [{:.2}s]", c.name, v.detail, started.elapsed().as_secs_f64());
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}

fn seeded_field(seed: u64, shape: Shape, lo: f64, hi: f64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(shape, |_, _, _| rng.random_range(lo..hi))
}

fn max_relative_error(analytic: &Field, reference: &Field) -> f64 {
    analytic
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).abs() / a.abs().max(1e-6))
        .fold(0.0, f64::max)
}

fn gradient_correctness() -> Verdict {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut names = vec![];
    for m in builtin_registry().into_iter().filter(|m| m.descriptor().supports_gradient) {
        names.push(m.name().to_string());
        for seed in 0..10 {
            let x = seeded_field(1000 + seed, Shape::new(16, 16, 3), 0.05, 0.95);
            let g = m.gradient(&x).unwrap();
            let fd = finite_diff_gradient(&m, &x, 1e-4).unwrap();
            worst = worst.max(max_relative_error(&g, &fd));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-4 && secs < 10.0,
        format!("{} metrics, max rel err {worst:.3e} (<= 1e-4), {secs:.2}s (< 10s)", names.len()),
    )
}

fn reference_recipe() -> TrainConfig {
    TrainConfig { epochs: 5, batch_size: 8, learning_rate: 0.001, clip_bound: 0.1, tile: 256, ..TrainConfig::default() }
}

fn training_analytic_targets() -> Verdict {
    let started = Instant::now();
    let images: Vec<ImageTensor> = (0..64).map(|i| synthetic_image(i, 256, 256).unwrap()).collect();
    let cfg = reference_recipe();

    let mean = train_uap(&builtin("mean").unwrap(), &images, &cfg).unwrap().perturbation;
    let mean_dev = mean.data().iter().map(|v| (v - 0.1).abs()).fold(0.0, f64::max);

    let linear = train_uap(&builtin("linear").unwrap(), &images, &cfg).unwrap().perturbation;
    let w = LinearScorer::new().weights(Shape::new(256, 256, 3));
    let linear_dev = linear
        .data()
        .iter()
        .zip(w.data())
        .map(|(p, w)| (p - 0.1 * w.signum()).abs())
        .fold(0.0, f64::max);
    let secs = started.elapsed().as_secs_f64();
    verdict(
        mean_dev <= 1e-6 && linear_dev <= 1e-6 && secs < 60.0,
        format!(
            "5 epochs x 8 batches: mean max|p-0.1| {mean_dev:.3e}, linear max|p-0.1 sign(w)| {linear_dev:.3e} \
             (<= 1e-6; reached max|p| {:.4}), {secs:.2}s (< 60s)",
            mean.max_abs()
        ),
    )
}

fn clip_invariant() -> Verdict {
    let images: Vec<ImageTensor> = (0..24).map(|i| synthetic_image(50 + i, 32, 32).unwrap()).collect();
    let mut steps = 0usize;
    let mut violations = 0usize;
    let mut at_bound = 0usize;
    // A large step makes the projection bind on every metric.
    for name in ["mean", "linear", "tinyconv", "noiseguard"] {
        let cfg = TrainConfig { epochs: 4, learning_rate: 0.05, tile: 32, seed: 7, ..TrainConfig::default() };
        train_uap_observed(&builtin(name).unwrap(), &images, &cfg, |_, p| {
            steps += 1;
            violations += p.data().iter().filter(|v| v.abs() > cfg.clip_bound).count();
            at_bound += p.data().iter().filter(|v| v.abs() == cfg.clip_bound).count();
        })
        .unwrap();
    }
    verdict(
        violations == 0 && at_bound > 0,
        format!("{steps} steps, {violations} violations, {at_bound} entries held at the bound"),
    )
}

fn madc_contract() -> Verdict {
    let tiny = builtin("tinyconv").unwrap();
    let cfg = MadcConfig { steps: 200, ..MadcConfig::new(0.0004) };
    let mut held = 0;
    let mut worst_mse = 0.0f64;
    for seed in 0..20 {
        let img = synthetic_image(200 + seed, 32, 32).unwrap();
        let out = madc_attack(&tiny, &img, &cfg).unwrap();
        let used = mse(&out.image, &img).unwrap();
        worst_mse = worst_mse.max(used);
        if out.final_score >= out.initial_score && used <= 0.0004 + 1e-9 {
            held += 1;
        }
    }
    let img = synthetic_image(300, 64, 64).unwrap();
    let out = madc_attack(&builtin("mean").unwrap(), &img, &cfg).unwrap();
    let mean_gain = out.final_score - out.initial_score;
    verdict(
        held == 20 && (mean_gain - 2.0).abs() <= 1e-6,
        format!("tinyconv contract held {held}/20 (worst mse {worst_mse:.3e}), mean gain {mean_gain:.9} (2 +- 1e-6)"),
    )
}

fn attack_cost_accounting() -> Verdict {
    let m = builtin("tinyconv").unwrap();
    let p = Perturbation::new(seeded_field(3, Shape::new(16, 16, 3), -0.1, 0.1), 0.1).unwrap();
    let p = scale_to_amplitude(&p, 0.05).unwrap();
    let before = m.evaluations();
    for seed in 0..20 {
        apply_perturbation(&synthetic_image(400 + seed, 48, 48).unwrap(), &p, None).unwrap();
    }
    let apply_evals = m.evaluations().total() - before.total();

    let mut madc_ok = 0;
    let steps_list = [0usize, 1, 17, 200];
    for &steps in &steps_list {
        let img = synthetic_image(500 + steps as u64, 24, 24).unwrap();
        let out = madc_attack(&m, &img, &MadcConfig { steps, ..MadcConfig::new(0.0004) }).unwrap();
        if out.evaluations.total() == 2 * steps as u64 + 1 {
            madc_ok += 1;
        }
    }
    verdict(
        apply_evals == 0 && madc_ok == steps_list.len(),
        format!(
            "apply: {apply_evals} evaluations over 20 images; madc 2*steps+1 exact for {madc_ok}/{} step counts",
            steps_list.len()
        ),
    )
}

fn random_curve(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let mut b = rng.random_range(1e4..1e5);
    (0..n)
        .map(|_| {
            b += rng.random_range(1e3..5e5);
            (b, rng.random_range(-1.0..2.0))
        })
        .collect()
}

fn to_curve(points: &[(f64, f64)]) -> RDCurve {
    RDCurve::new("v", "m", None, points.iter().map(|&(bitrate, score)| RdPoint { bitrate, score }).collect()).unwrap()
}

/// Midpoint rule with 10⁵ cells on the linear interpolant over [lo, hi],
/// the interval mapped onto [0, 1].
fn fine_grid_area(points: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    const CELLS: usize = 100_000;
    let at = |x: f64| {
        let i = points.iter().position(|p| p.0 > x).unwrap_or(points.len() - 1).max(1);
        let (x0, y0) = points[i - 1];
        let (x1, y1) = points[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    (0..CELLS).map(|k| at(lo + (hi - lo) * (k as f64 + 0.5) / CELLS as f64)).sum::<f64>() / CELLS as f64
}

fn area_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut area_err = 0.0f64;
    let mut gain_err = 0.0f64;
    let mut self_gain_exact = true;
    for _ in 0..100 {
        let a = random_curve(&mut rng, 6);
        let ca = to_curve(&a);
        area_err = area_err.max((curve_area(&ca) - fine_grid_area(&a, a[0].0, a[5].0)).abs());
        self_gain_exact &= gain(&ca, &ca).unwrap() == 0.0;

        // a second curve overlapping the first
        let mut b = random_curve(&mut rng, 4);
        let shift = a[1].0 - b[0].0;
        b.iter_mut().for_each(|p| p.0 += shift);
        let (lo, hi) = (a[0].0.max(b[0].0), a[5].0.min(b[3].0));
        let oracle = fine_grid_area(&a, lo, hi) - fine_grid_area(&b, lo, hi);
        gain_err = gain_err.max((gain(&ca, &to_curve(&b)).unwrap() - oracle).abs());
    }

    let mut extrema_exact = true;
    for _ in 0..100 {
        let set: Vec<RDCurve> = (0..4).map(|_| to_curve(&random_curve(&mut rng, 5))).collect();
        let (normalized, _) = normalize_curves(&set, "acceptance").unwrap();
        let scores: Vec<f64> = normalized.iter().flat_map(|c| c.points().iter().map(|p| p.score)).collect();
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        extrema_exact &= lo == 0.0 && hi == 1.0;
    }
    verdict(
        area_err <= 1e-6 && gain_err <= 1e-6 && extrema_exact && self_gain_exact,
        format!(
            "area err {area_err:.2e}, gain err {gain_err:.2e} (<= 1e-6, 100 curves); extrema -> {{0,1}} exact: \
             {extrema_exact}; gain(c,c) = 0 exact: {self_gain_exact}"
        ),
    )
}

fn points(pairs: &[(f64, f64)]) -> Vec<DependencePoint> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(proxy_loss, target_gain))| DependencePoint { amplitude: (i + 1) as f64, proxy_loss, target_gain })
        .collect()
}

fn stability_hand_case() -> Verdict {
    let hand = stability_score(&[("m".into(), points(&[(0.1, 0.05), (0.2, 0.10)]))]).unwrap().scores[0];
    let zero = stability_score(&[("z".into(), points(&[(0.1, 0.0), (0.3, 0.0)]))]).unwrap().scores[0];

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut sign_ok = 0;
    for _ in 0..200 {
        let k = rng.random_range(2..7);
        let mut loss = rng.random_range(0.0..0.1);
        let mut g = 0.0;
        let pairs: Vec<(f64, f64)> = (0..k)
            .map(|_| {
                loss += rng.random_range(0.01..0.2);
                g += rng.random_range(0.001..0.3);
                (loss, g)
            })
            .collect();
        let s = stability_score(&[("r".into(), points(&pairs))]).unwrap().scores[0];
        if s < 0.0 {
            sign_ok += 1;
        }
    }
    verdict(
        hand == -0.75 && zero.to_bits() == 0.0f64.to_bits() && sign_ok == 200,
        format!("hand case {hand} (-0.75 exact), zero-gain {zero} (0 exact), negative for positive gains {sign_ok}/200"),
    )
}

fn desk_videos() -> Vec<EvalVideo> {
    (0..2)
        .map(|i| EvalVideo {
            id: format!("synthetic-{i}"),
            source: format!("synthetic:seed={},frames=8,size=128x128", 100 + i),
            video: synthetic_video(100 + i, 8, 128, 128, 25.0).unwrap(),
        })
        .collect()
}

fn desk_metrics(p: &Perturbation) -> Vec<TargetMetric> {
    ["mean", "noiseguard"]
        .iter()
        .map(|name| TargetMetric { id: format!("builtin:{name}"), handle: builtin(name).unwrap(), perturbation: p.clone() })
        .collect()
}

fn desk_config() -> EvalConfig {
    EvalConfig::new(vec![0.02, 0.08], [0.2, 0.4, 0.6, 0.8].iter().map(|&quality| CodecSpec::Mock { quality }).collect())
}

/// The MeanScorer perturbation, trained until it saturates at the clip.
fn trained_mean_uap() -> Perturbation {
    let images: Vec<ImageTensor> = (0..16).map(|i| synthetic_image(i, 32, 32).unwrap()).collect();
    let cfg = TrainConfig { epochs: 60, tile: 32, ..TrainConfig::default() };
    train_uap(&builtin("mean").unwrap(), &images, &cfg).unwrap().perturbation
}

fn desk_report() -> StabilityReport {
    run_stability_pipeline(&desk_config(), &desk_videos(), &desk_metrics(&trained_mean_uap()), None)
        .unwrap()
        .report
}

fn desk_pipeline() -> Verdict {
    let started = Instant::now();
    let p = trained_mean_uap();
    let cache_dir = tempfile::tempdir().unwrap();
    let run = || {
        let cache = ScoreCache::open(cache_dir.path()).unwrap();
        run_stability_pipeline(&desk_config(), &desk_videos(), &desk_metrics(&p), Some(&cache)).unwrap()
    };
    let cold = run();
    let secs = started.elapsed().as_secs_f64();
    let warm = run();
    let mean = cold.report.metric("builtin:mean").unwrap();
    let guard = cold.report.metric("builtin:noiseguard").unwrap();
    let gains: Vec<f64> = mean.dependence.iter().map(|d| d.target_gain).collect();
    let increasing = gains.windows(2).all(|w| w[1] > w[0]);
    let identical = cold.report.to_json().unwrap() == warm.report.to_json().unwrap();
    verdict(
        increasing && mean.stability_score < 0.0 && guard.stability_score >= 0.0 && secs < 300.0 && identical,
        format!(
            "mean gains {gains:?} increasing: {increasing}, mean score {:.4} (< 0), noiseguard score {:.4} (>= 0), \
             cold run {secs:.2}s (< 300s), warm-cache report identical: {identical} ({} evaluations)",
            mean.stability_score, guard.stability_score, warm.stats.metric_evaluations
        ),
    )
}

fn normalization_invariance() -> Verdict {
    let report = desk_report();
    let mut inputs = report.inputs();
    for run in &mut inputs.metrics[0].runs {
        for s in &mut run.samples {
            s.target_score = 3.0 * s.target_score + 7.0;
        }
    }
    let moved = assemble_report(inputs).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in report.metrics.iter().zip(&moved.metrics) {
        for (ra, rb) in a.normalized.iter().zip(&b.normalized) {
            for (sa, sb) in ra.samples.iter().zip(&rb.samples) {
                worst = worst.max((sa.target - sb.target).abs()).max((sa.proxy - sb.proxy).abs());
            }
        }
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            worst = worst.max((ca.target_gain - cb.target_gain).abs()).max((ca.proxy_loss - cb.proxy_loss).abs());
        }
        worst = worst.max((a.stability_score - b.stability_score).abs());
    }
    verdict(worst <= 1e-9, format!("score' = 3*score + 7 on {}: max change {worst:.2e} (<= 1e-9)", report.metrics[0].id))
}

fn uapg(cwd: &Path, args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_uapg")).current_dir(cwd).args(args).output().unwrap();
    assert!(o.status.success(), "uapg {args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn same_bytes(dir: &Path, a: &str, b: &str, files: &[&str]) -> usize {
    files
        .iter()
        .filter(|f| fs::read(dir.join(a).join(f)).unwrap() == fs::read(dir.join(b).join(f)).unwrap())
        .count()
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = |out: &str| {
        uapg(
            d,
            &[
                "--seed", "11", "--out", out, "--timing-log", "timing.log", "train-uap", "--metric",
                "builtin:tinyconv", "--images", "synthetic:seed=5,count=20,size=32", "--tile", "32", "--epochs", "3",
            ],
        )
    };
    train("t1");
    train("t2");
    let train_files = ["uap.uapp", "uap.log.csv"];
    let train_same = same_bytes(d, "t1", "t2", &train_files);

    fs::write(
        d.join("eval.toml"),
        "seed = 11\n[eval]\nvideos = [\"synthetic:seed=100,frames=4,size=64x64\", \"synthetic:seed=101,frames=4,size=64x64\"]\n\
         amplitudes = [0.02, 0.05, 0.08]\n[[eval.metrics]]\nspec = \"builtin:tinyconv\"\nperturbation = \"t1/uap.uapp\"\n\
         [[eval.metrics]]\nspec = \"builtin:noiseguard\"\nperturbation = \"t1/uap.uapp\"\n",
    )
    .unwrap();
    let eval = |out: &str| uapg(d, &["--config", "eval.toml", "--out", out, "--timing-log", "timing.log", "eval-stability"]);
    eval("e1");
    eval("e2");
    let eval_files = ["report.json", "rd_points.csv", "dependence.csv", "stability.csv"];
    let eval_same = same_bytes(d, "e1", "e2", &eval_files);
    verdict(
        train_same == train_files.len() && eval_same == eval_files.len(),
        format!(
            "train artifacts identical {train_same}/{}, eval artifacts identical {eval_same}/{}",
            train_files.len(),
            eval_files.len()
        ),
    )
}
