//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use vblab_core::asymptotics::{
    check_c1_c2_c3, normality_distance, verify_large_sample_limits, verify_psd_inequality,
    GridPlan, NormalLimit, DEFAULT_MC_SAMPLES,
};
use vblab_core::laplace::{
    laplace_expand, laplace_integral, moment4, moment6, posterior_mean_laplace, TiltedObjective,
    Weight,
};
use vblab_core::linalg::{self, Matrix};
use vblab_core::models::{
    generic_gaussian_convolution, generic_scalar_gaussian, simulate, GaussianConvolution,
    PoissonCounts, ScalarGaussian,
};
use vblab_core::rng::substream;
use vblab_core::special::digamma;
use vblab_core::tensor::permutations;
use vblab_core::vb::{
    e_step_all, jacobian_phi, posterior_quadrature, run_vb, update_hyperparams, VbConfig,
};
use vblab_core::{ExpFamily, Hyperparams};

use common::{out, run};

const SEED: u64 = 20261016;
/// TV(qₙ, 𝒩) for the Poisson posterior with α = 1001, β = 1016, from an
/// independent 30-digit quadrature.
const POISSON_TV_GOLDEN: f64 = 0.004_178_104_05;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);
type Case<'a> = (&'a dyn ExpFamily, Vec<f64>, Vec<Vec<f64>>);

fn prior(alpha: f64, beta: Vec<f64>) -> Hyperparams {
    Hyperparams::new(alpha, beta).unwrap()
}

fn tight(
    model: &dyn ExpFamily,
    ys: &[f64],
    init: Vec<f64>,
    hp: Hyperparams,
) -> vblab_core::vb::VbTrace {
    run_vb(
        model,
        ys,
        &VbConfig::new(init, hp).with_tol(1e-12).with_max_iter(2000),
    )
    .unwrap()
}

fn fixed_point_correctness() -> Outcome {
    let tr = tight(
        &ScalarGaussian,
        &[1.0, 3.0, 2.0, 2.0],
        vec![0.0],
        prior(1.0, vec![0.0]),
    );
    let b_err = (tr.fixed_point()[0] - 4.0 / 3.0).abs();
    let ys = [2.0, 0.0, 3.0, 1.0, 4.0];
    let tr_c = tight(&PoissonCounts, &ys, vec![0.7], prior(1.0, vec![1.0]));
    let closed = digamma(11.0) - 6f64.ln();
    let quad = posterior_quadrature(&PoissonCounts, &prior(6.0, vec![11.0]), 4097, 401).unwrap();
    let c_err = (tr_c.fixed_point()[0] - quad.mean[0]).abs();
    let ok = tr.converged
        && b_err <= 1e-8
        && tr_c.iterations == 1
        && (tr_c.fixed_point()[0] - closed).abs() <= 1e-12
        && c_err <= 1e-6;
    (
        ok,
        format!(
            "B |θ-4/3| = {b_err:.1e}; C steps = {}, |θ-quadrature| = {c_err:.1e}",
            tr_c.iterations
        ),
    )
}

fn contraction() -> Outcome {
    let mut worst = 0.0f64;
    let mut at_1000 = f64::NAN;
    for n in [10usize, 100, 1000] {
        let ys = simulate(&ScalarGaussian, &[1.0], n, SEED).unwrap();
        let hp = prior(1.0, vec![0.0]);
        let target = ScalarGaussian::fixed_point(&ys, &hp);
        let tr = tight(&ScalarGaussian, &ys, vec![target + 0.09], hp);
        let lambda = (n as f64 / 2.0) / (n as f64 + 1.0);
        let errs: Vec<f64> = tr.iterates.iter().map(|t| (t[0] - target).abs()).collect();
        for w in errs.windows(2).take(5) {
            worst = worst.max((w[1] / w[0] / lambda - 1.0).abs());
        }
        if n == 1000 {
            at_1000 = errs[1] / errs[0];
        }
    }
    let n = 10_000;
    let ys = simulate(&GaussianConvolution, &[0.5, 0.5], n, SEED).unwrap();
    let hp = prior(1.0, vec![0.0, 0.0]);
    let tr = tight(&GaussianConvolution, &ys, vec![0.0, 0.0], hp.clone());
    let (jac, norm) = jacobian_phi(&GaussianConvolution, tr.fixed_point(), &ys, &hp).unwrap();
    let c = n as f64 / (n as f64 + 1.0);
    let exact = Matrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]) * c;
    let jac_err = linalg::max_abs(&(jac - exact));
    let ok = worst < 0.01
        && (at_1000 - 0.4995).abs() <= 0.005
        && jac_err < 1e-8
        && (norm - c).abs() < 1e-8;
    (
        ok,
        format!(
            "B ratio rel. dev {worst:.1e}, n=1000 ratio {at_1000:.4}; A |J - exact| = {jac_err:.1e}, norm {norm:.6} vs n/(n+α₀) {c:.6}"
        ),
    )
}

fn sweep_slope(dir: &Path, model: &str, star: &str) -> f64 {
    let seeds: Vec<String> = (1..=20).map(|s| s.to_string()).collect();
    let seeds = seeds.join(",");
    let o = out(dir);
    run(&[
        "sweep",
        "--model",
        model,
        "--theta-star",
        star,
        "--n",
        "100,1000,10000,100000",
        "--seeds",
        &seeds,
        "--out",
        &o,
    ])
    .unwrap();
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sweep_report.json")).unwrap())
            .unwrap();
    r["aggregate"]["slope"].as_f64().unwrap()
}

fn consistency_sweep() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let b = sweep_slope(dir.path(), "B", "1");
    let c = sweep_slope(dir.path(), "C", "0.5");
    let secs = start.elapsed().as_secs_f64();
    let band = -0.65..=-0.35;
    let ok = band.contains(&b) && band.contains(&c) && secs <= 120.0;
    (
        ok,
        format!("slopes B {b:.3}, C {c:.3}; runtime {secs:.1} s"),
    )
}

fn free_energy_monotonicity() -> Outcome {
    let gb = generic_scalar_gaussian();
    let ga = generic_gaussian_convolution();
    let cases: Vec<Case> = vec![
        (&ScalarGaussian, vec![1.0], vec![vec![-2.0], vec![3.0]]),
        (
            &GaussianConvolution,
            vec![0.5, 1.0],
            vec![vec![0.0, 0.0], vec![2.0, -1.0]],
        ),
        (&PoissonCounts, vec![0.5], vec![vec![-1.0], vec![2.0]]),
        (&gb, vec![0.3], vec![vec![2.0]]),
        (&ga, vec![0.2, 0.4], vec![vec![1.0, -1.0]]),
    ];
    let (mut sequences, mut violations) = (0, 0);
    for (model, star, inits) in cases {
        for n in [4usize, 100, 1000] {
            for seed in [SEED, SEED + 1] {
                let ys = simulate(model, &star, n, seed).unwrap();
                let b0 = if model.name() == "C" { 1.0 } else { 0.0 };
                for init in &inits {
                    let cfg = VbConfig::new(init.clone(), prior(1.0, vec![b0; model.dim()]))
                        .with_tol(1e-10)
                        .with_max_iter(60);
                    violations += run_vb(model, &ys, &cfg)
                        .unwrap()
                        .monotonicity_violations()
                        .len();
                    sequences += 1;
                }
            }
        }
    }
    (
        violations == 0,
        format!("{violations} violations over {sequences} sequences"),
    )
}

fn laplace_engine() -> Outcome {
    let mean_err = |alpha: f64, beta: f64| {
        let obj = TiltedObjective::from_hyperparams(&prior(alpha, vec![beta]));
        (posterior_mean_laplace(&PoissonCounts, &obj).unwrap()[0] - (digamma(beta) - alpha.ln()))
            .abs()
    };
    let e11 = mean_err(11.0, 11.0);
    let e101 = mean_err(101.0, 201.0);
    let ybar = 2.0;
    let integral_err = |n: usize| {
        let hp = prior(n as f64 + 1.0, vec![n as f64 * ybar + 1.0]);
        let e = laplace_expand(
            &PoissonCounts,
            &TiltedObjective::from_hyperparams(&hp),
            &Weight::One,
        )
        .unwrap();
        let exact = vblab_core::special::ln_gamma(hp.beta[0]) - hp.beta[0] * hp.alpha.ln();
        (laplace_integral(&e).unwrap().ln_corrected().unwrap() - exact)
            .exp_m1()
            .abs()
    };
    let ratio = integral_err(100) / integral_err(200);
    let obj = TiltedObjective::new(7, 2.0, vec![0.4]).unwrap();
    let quad_err = (posterior_mean_laplace(&ScalarGaussian, &obj).unwrap()[0] - 0.4).abs();
    let ok = e11 <= 5e-3 && e101 <= 1e-5 && (2.5..=6.0).contains(&ratio) && quad_err <= 1e-12;
    (
        ok,
        format!("|err| {e11:.1e} at α=β=11, {e101:.1e} at α=101; n=100/200 ratio {ratio:.2}; quadratic ψ {quad_err:.1e}"),
    )
}

fn moment_assemblies() -> Outcome {
    let covs = [
        Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]),
        Matrix::from_row_slice(2, 2, &[2.0, -0.8, -0.8, 1.0]),
        Matrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 1.5]),
    ];
    let idx4 = [
        [0, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 1],
        [0, 1, 1, 1],
        [1, 1, 1, 1],
    ];
    let idx6 = [
        [0; 6],
        [0, 0, 0, 0, 0, 1],
        [0, 0, 0, 0, 1, 1],
        [0, 0, 0, 1, 1, 1],
        [0, 0, 1, 1, 1, 1],
        [1; 6],
    ];
    let samples = 1_000_000;
    let mut rng = substream(SEED, 0);
    let mut worst_z = 0.0f64;
    for cov in &covs {
        let l11 = cov[(0, 0)].sqrt();
        let l21 = cov[(1, 0)] / l11;
        let l22 = (cov[(1, 1)] - l21 * l21).sqrt();
        let mut acc = vec![(0.0, 0.0); idx4.len() + idx6.len()];
        for _ in 0..samples {
            let z: [f64; 2] = [
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ];
            let x = [l11 * z[0], l21 * z[0] + l22 * z[1]];
            let ids = idx4
                .iter()
                .map(|i| &i[..])
                .chain(idx6.iter().map(|i| &i[..]));
            for (a, id) in acc.iter_mut().zip(ids) {
                let v: f64 = id.iter().map(|&i| x[i]).product();
                a.0 += v;
                a.1 += v * v;
            }
        }
        let exact = idx4
            .iter()
            .map(|i| moment4(cov, i[0], i[1], i[2], i[3]).unwrap())
            .chain(idx6.iter().map(|i| moment6(cov, *i).unwrap()));
        let n = samples as f64;
        for (a, x) in acc.iter().zip(exact) {
            let mean = a.0 / n;
            let se = ((a.1 / n - mean * mean) / (n - 1.0)).sqrt();
            worst_z = worst_z.max((mean - x).abs() / se);
        }
    }
    let sigma = Matrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.2, 2.0, 0.5, -0.3, 0.5, 1.5]);
    let mut symmetric = true;
    for idx in [[0usize, 1, 2, 2], [0, 0, 1, 2], [1, 2, 0, 1]] {
        let base = moment4(&sigma, idx[0], idx[1], idx[2], idx[3]).unwrap();
        for p in permutations(&idx) {
            symmetric &= moment4(&sigma, p[0], p[1], p[2], p[3]).unwrap() == base;
        }
    }
    for idx in [[0usize, 0, 1, 1, 2, 2], [0, 1, 2, 2, 2, 1]] {
        let base = moment6(&sigma, idx).unwrap();
        for p in permutations(&idx) {
            symmetric &= moment6(&sigma, [p[0], p[1], p[2], p[3], p[4], p[5]]).unwrap() == base;
        }
    }
    (
        worst_z <= 3.0 && symmetric,
        format!("max |z| = {worst_z:.2} over 33 moments; exact symmetry {symmetric}"),
    )
}

fn asymptotic_normality() -> Outcome {
    let ys = simulate(&PoissonCounts, &[0.0], 1000, SEED).unwrap();
    let grid = GridPlan::default();
    let mut tvs = Vec::new();
    let mut c3 = f64::NAN;
    for n in [10usize, 100, 1000] {
        let r = e_step_all(&PoissonCounts, &[0.0], &ys[..n]).unwrap();
        let hp = update_hyperparams(&r, &prior(1.0, vec![1.0]));
        let lim = NormalLimit::for_posterior(&PoissonCounts, &hp).unwrap();
        tvs.push(
            normality_distance(&PoissonCounts, &hp, &lim, &grid)
                .unwrap()
                .tv,
        );
        if n == 1000 {
            c3 = check_c1_c2_c3(&PoissonCounts, &hp, &lim, 0.5, 0.1, &grid)
                .unwrap()
                .c3_mass;
        }
    }
    let decreasing = tvs[0] > tvs[1] && tvs[1] > tvs[2];
    let golden_dev = (tvs[2] / POISSON_TV_GOLDEN - 1.0).abs();
    let mut c1_dev = 0.0f64;
    let alpha0 = 1.0;
    for n in [10usize, 100, 1000] {
        let ys = simulate(&ScalarGaussian, &[0.2], n, SEED).unwrap();
        let hp = update_hyperparams(
            &e_step_all(&ScalarGaussian, &[0.2], &ys).unwrap(),
            &prior(alpha0, vec![0.0]),
        );
        let lim = NormalLimit::for_posterior(&ScalarGaussian, &hp).unwrap();
        let rep = check_c1_c2_c3(&ScalarGaussian, &hp, &lim, 0.5, 0.2, &grid).unwrap();
        c1_dev = c1_dev.max((rep.c1_top_eig - 1.0 / (n as f64 + alpha0)).abs());
    }
    for n in [10usize, 100] {
        let ys = simulate(&GaussianConvolution, &[0.3, 0.3], n, SEED).unwrap();
        let r = e_step_all(&GaussianConvolution, &[0.3, 0.3], &ys).unwrap();
        let hp = update_hyperparams(&r, &prior(alpha0, vec![0.0, 0.0]));
        let lim = NormalLimit::for_posterior(&GaussianConvolution, &hp).unwrap();
        let plan = GridPlan {
            half_width_sd: 8.0,
            points: 513,
        };
        let rep = check_c1_c2_c3(&GaussianConvolution, &hp, &lim, 0.5, 0.2, &plan).unwrap();
        c1_dev = c1_dev.max((rep.c1_top_eig - 1.0 / (n as f64 + alpha0)).abs());
    }
    let ok = decreasing && golden_dev <= 0.1 && c1_dev <= 1e-10 && c3 > 0.999;
    (
        ok,
        format!(
            "C TV {:.3e} > {:.3e} > {:.3e}, golden dev {:.1}%; C1 max dev {c1_dev:.1e}; C3 {c3:.6}",
            tvs[0],
            tvs[1],
            tvs[2],
            100.0 * golden_dev
        ),
    )
}

fn proof_objects() -> Outcome {
    let cases: [(&dyn ExpFamily, &[f64]); 3] = [
        (&GaussianConvolution, &[0.0, 0.0]),
        (&ScalarGaussian, &[1.0]),
        (&PoissonCounts, &[0.0]),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (model, theta) in cases {
        let psd = verify_psd_inequality(model, theta, DEFAULT_MC_SAMPLES, SEED).unwrap();
        let lim =
            verify_large_sample_limits(model, theta, 10_000, SEED, DEFAULT_MC_SAMPLES).unwrap();
        ok &= psd.passes && lim.passes();
        parts.push(format!(
            "{}: λmin {:.2e} (se {:.1e}), limits {}",
            model.name(),
            psd.min_eigenvalue,
            psd.standard_error,
            if lim.passes() { "ok" } else { "off" }
        ));
    }
    (ok, parts.join("; "))
}

fn vb_vs_exact() -> Outcome {
    let alpha0 = 2.0;
    let (mut ratio_dev, mut mean_dev, mut last) = (0.0f64, 0.0f64, 0.0);
    for n in [4usize, 100, 10_000, 100_000] {
        let ys = simulate(&ScalarGaussian, &[0.5], n, SEED).unwrap();
        let hp = prior(alpha0, vec![0.3]);
        let exact = ScalarGaussian.exact_posterior(&ys, &hp).unwrap();
        let tr = tight(&ScalarGaussian, &ys, vec![0.0], hp);
        let ratio = tr.final_hyperparams.alpha * exact.covariance().unwrap()[(0, 0)];
        let nf = n as f64;
        ratio_dev = ratio_dev.max((ratio - (nf + alpha0) / (nf / 2.0 + alpha0)).abs());
        mean_dev = mean_dev.max((tr.fixed_point()[0] - exact.mean()[0]).abs());
        last = ratio;
    }
    let ok = ratio_dev <= 1e-10 && mean_dev <= 1e-8 && (last - 2.0).abs() < 1e-3;
    (
        ok,
        format!("precision ratio dev {ratio_dev:.1e} (n=1e5: {last:.5}); mean dev {mean_dev:.1e}"),
    )
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let o = out(dir.path());
    let runs: Vec<_> = (0..2)
        .map(|_| {
            run(&[
                "simulate",
                "--model",
                "C",
                "--theta-star",
                "0.3",
                "--n",
                "500",
                "--seed",
                "11",
                "--out",
                &o,
            ])
            .unwrap();
            run(&["fit", "--model", "C", "--out", &o]).unwrap();
            run(&[
                "diagnose",
                "--model",
                "C",
                "--mc-samples",
                "20000",
                "--limits-n",
                "1000",
                "--out",
                &o,
            ])
            .unwrap();
            run(&[
                "normality",
                "--model",
                "C",
                "--theta-star",
                "0.3",
                "--n",
                "10,100",
                "--seed",
                "11",
                "--out",
                &o,
            ])
            .unwrap();
            run(&[
                "sweep",
                "--model",
                "B",
                "--theta-star",
                "1",
                "--n",
                "10,100,1000",
                "--seeds",
                "1,2,3,4,5,6,7,8,9,10",
                "--out",
                &o,
            ])
            .unwrap();
            let mut files: Vec<_> = std::fs::read_dir(dir.path())
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            files
                .into_iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_owned(),
                        std::fs::read(&p).unwrap(),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let same = runs[0] == runs[1];
    (
        same,
        format!("{} files compared byte for byte", runs[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fixed-point correctness", fixed_point_correctness),
        ("contraction", contraction),
        ("consistency sweep", consistency_sweep),
        ("free-energy monotonicity", free_energy_monotonicity),
        ("Laplace engine", laplace_engine),
        ("moment assemblies", moment_assemblies),
        ("asymptotic normality", asymptotic_normality),
        ("proof-object checks", proof_objects),
        ("VB vs exact posterior", vb_vs_exact),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        println!(
            "criterion {}: {} {name}: {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
