//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use neckglue::app::plant_and_recover;
use neckglue::export::{self, Format};
use neckglue::geometry::{Axis, ImmersionPatch};
use neckglue::glue::{self, GridSpec};
use neckglue::green::{balance_residual, GreenData};
use neckglue::harmonics::{self, ShExpansion};
use neckglue::interaction::{
    gamma_by_quadrature, gamma_entry, gamma_matrix, symmetric_pair_gamma, InteractionSystem,
};
use neckglue::jacobi::{jacobi_field, linearized_apply, neck_field_grid, JacobiKind};
use neckglue::neck::{self, NeckParams};
use neckglue::ode::OdeOptions;
use neckglue::quadrature::{omega_n, QuadratureRule};
use neckglue::spectrum::{self, End, ModeFamily, ModeSystem, SystemKind};
use neckglue::{Configuration, Result};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

/// Least-squares slope of ln y against ln x.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn orders(sups: &[f64]) -> Vec<f64> {
    sups.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn c1_gamma() -> Result<Outcome> {
    let cfg = Configuration::flagship();
    let g = gamma_entry(&cfg, 0, 1)?;
    let e = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    let sym = symmetric_pair_gamma(&cfg.rotations[0], &cfg.rotations[1], &e, 3)?;
    let mc = gamma_by_quadrature(&cfg, 0, 1, &QuadratureRule::monte_carlo(3, 1_000_000, 7)?);
    let sigmas = (mc.value - g).abs() / mc.std_error;
    outcome(
        (g + PI / 3.0).abs() < 1e-12 && (g - sym).abs() < 1e-12 && sigmas < 3.0,
        format!(
            "gamma12 = {g:.15}, symmetric form diff {:.1e}, MC {sigmas:.2} sigma",
            (g - sym).abs()
        ),
    )
}

fn c2_degenerate() -> Result<Outcome> {
    let f = Configuration::flagship();
    let cfg = Configuration::new(
        3,
        f.points.clone(),
        vec![DMatrix::identity(3, 3); 2],
        f.a0.clone(),
        f.epsilon,
        f.rho_star,
    )?;
    let g = gamma_matrix(&cfg)?;
    let exact = g.iter().all(|v| *v == 0.0);
    let rule = QuadratureRule::product_gauss(3, 32)?;
    let q = gamma_by_quadrature(&cfg, 0, 1, &rule)
        .value
        .abs()
        .max(gamma_by_quadrature(&cfg, 1, 0, &rule).value.abs());
    outcome(
        exact && q < 1e-6,
        format!("closed form max {:.1e}, quadrature max {q:.1e}", g.amax()),
    )
}

fn c3_h3() -> Result<Outcome> {
    let cfg = Configuration::flagship();
    let sys = InteractionSystem::compute(&cfg)?;
    let a = sys.alpha.clone().unwrap_or_default();
    let res = sys.solve_residual.unwrap_or(f64::INFINITY);
    let ok_plus = a.len() == 2
        && (a[0] - 4.0).abs() < 1e-12
        && (a[1] - 12.0).abs() < 1e-12
        && res < 1e-12
        && sys.all_hold();
    let neg = InteractionSystem::compute(&cfg.with_a0(-DMatrix::identity(3, 3))?)?;
    let b = neg.alpha.clone().unwrap_or_default();
    let flipped = b.len() == 2 && (b[0] + 4.0).abs() < 1e-12 && (b[1] + 12.0).abs() < 1e-12;
    let h3_fails = !neg.all_hold();
    outcome(
        ok_plus && flipped && h3_fails,
        format!("alpha = {a:?} (residual {res:.1e}); A0 = -I gives {b:?}, h3 fails: {h3_fails}"),
    )
}

/// Neck patch over a small parameter window with `m` intervals per axis.
fn neck_window(n: usize, m: usize) -> Result<ImmersionPatch> {
    let params = NeckParams::unit(n)?;
    let mut angles = Vec::new();
    for i in 0..n - 1 {
        let lo = 0.6 + 0.2 * i as f64;
        angles.push(Axis::closed(lo, lo + 0.4, m + 1));
    }
    neck::neck_patch_t(&params, Axis::closed(-0.3, 0.1, m + 1), angles)
}

fn c4_minimality() -> Result<Outcome> {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [2, 3, 4] {
        let sups: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&m| neck_window(n, m).map(|p| p.curvature_sweep().sup))
            .collect::<Result<_>>()?;
        let ord = orders(&sups);
        ok &= ord.iter().all(|o| (o - 2.0).abs() <= 0.2);
        detail.push(format!("n={n} orders {:.3}/{:.3}", ord[0], ord[1]));
    }
    outcome(ok, detail.join(", "))
}

fn c5_jacobi() -> Result<Outcome> {
    let kinds = [
        ("dilation", JacobiKind::Dilation(1.0)),
        (
            "translation",
            JacobiKind::Translation {
                angle: 0.0,
                a: vec![1.0, 0.0, 0.0],
            },
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, kind) in kinds {
        let mut sups = Vec::new();
        for m in [32usize, 64, 128] {
            let sphere = vec![Axis::closed(0.5, 1.3, m + 1), Axis::closed(0.2, 1.0, m + 1)];
            let grid = neck_field_grid(0.25, 0.8, m + 1, sphere);
            let field = jacobi_field(&kind, 3, grid)?;
            sups.push(linearized_apply(&field)?.sup_norm());
        }
        let ord = orders(&sups);
        let last = *sups.last().expect("three levels");
        ok &= ord.iter().all(|o| (o - 2.0).abs() <= 0.2) && last < 1e-4;
        detail.push(format!(
            "{name} orders {:.3}/{:.3} finest {last:.1e}",
            ord[0], ord[1]
        ));
    }
    outcome(ok, detail.join(", "))
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn c6_indicial() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in [3, 4, 5] {
        for k in [1, 2, 3] {
            let table = spectrum::indicial_roots(n, k)?;
            let nu = table.exact_nu.expect("k >= 1");
            let g = table.coexact_roots()?;
            let cases = [
                (
                    ModeFamily::Exact(k),
                    vec![table.exact_mu.minus, table.exact_mu.plus, nu.minus, nu.plus],
                ),
                (ModeFamily::Coexact(k), vec![g.minus, g.plus]),
            ];
            for (fam, mut expect) in cases {
                expect.sort_by(f64::total_cmp);
                for end in [End::Minus, End::Plus] {
                    let got = sorted_eigs(
                        &ModeSystem::new(n, fam, SystemKind::Interior)?.frozen_matrix(end),
                    );
                    for (a, b) in got.iter().zip(&expect) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    let t = spectrum::indicial_roots(3, 1)?;
    let nu = t.exact_nu.expect("k = 1");
    let quoted =
        t.exact_mu.plus == 2.5 && t.exact_mu.minus == -2.5 && nu.plus == 0.5 && nu.minus == -0.5;
    outcome(
        worst < 1e-12 && quoted,
        format!("max root deviation {worst:.1e}; n=3 k=1 roots ±5/2, ±1/2: {quoted}"),
    )
}

fn c7_explicit() -> Result<Outcome> {
    let grid: Vec<f64> = (0..=1000).map(|i| -5.0 + 0.01 * i as f64).collect();
    let f0 = [3, 4, 5]
        .iter()
        .map(|&n| spectrum::verify_f0(n, &grid))
        .collect::<Result<Vec<_>>>()?;
    let f0 = f0.into_iter().fold(0.0, f64::max);
    let res = spectrum::explicit_n3_residual(&grid, 1e-3)?;
    let wide: Vec<f64> = (0..=600).map(|i| -6.0 + 0.02 * i as f64).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = wide
        .iter()
        .map(|&t| spectrum::explicit_n3_solution(t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let sol = spectrum::ModeSolution::from_samples(
        3,
        ModeFamily::Exact(1),
        SystemKind::Interior,
        wide,
        a,
        Some(b),
    )?;
    let lo = spectrum::decay_rate(&sol, End::Minus)?.rate;
    let hi = spectrum::decay_rate(&sol, End::Plus)?.rate;
    outcome(
        f0 < 1e-12 && res < 1e-8 && (lo - 2.5).abs() < 1e-2 && (hi - 0.5).abs() < 1e-2,
        format!("f0 {f0:.1e}, (a1,b1) residual {res:.1e}, rates {lo:.5} at -inf, {hi:.5} at +inf"),
    )
}

fn c8_exterior() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let taus: Vec<f64> = (0..=500).map(|i| 0.01 * i as f64).collect();
    let opts = OdeOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(3..=5);
        let (a0, b0) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let ext = spectrum::exterior_mode_solve(n, a0, b0)?;
        let sol = spectrum::integrate_mode_system(
            n,
            ModeFamily::Exact(1),
            SystemKind::Asymptotic,
            0.0,
            ext.state(0.0),
            &taus,
            &opts,
        )?;
        let b = sol.b.as_ref().expect("coupled");
        for (i, &tau) in taus.iter().enumerate() {
            let st = ext.state(tau);
            worst = worst
                .max((sol.a[i] - st[0]).abs())
                .max((b[i] - st[2]).abs());
        }
    }
    outcome(
        worst < 1e-8,
        format!("max deviation over 20 pairs {worst:.1e}"),
    )
}

fn c9_dtn() -> Result<Outcome> {
    let mut eig: f64 = 0.0;
    for k in 0..=8usize {
        for m in -(k as i64)..=k as i64 {
            let mut e = ShExpansion::zeros(8);
            e.coeffs[1][harmonics::sh_index(k, m)] = 1.0;
            let d = harmonics::p_ext(&e).sub(&harmonics::p_int(&e))?;
            eig = eig.max((d.coeffs[1][harmonics::sh_index(k, m)] + (2 * k + 1) as f64).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut psi = ShExpansion::zeros(8);
    for c in psi.coeffs.iter_mut() {
        c.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let phi = harmonics::dtn_solve(&psi);
    let round = harmonics::p_ext(&phi)
        .sub(&harmonics::p_int(&phi))?
        .sub(&psi)?
        .max_abs();
    let cfg = Configuration::flagship();
    let mut plant: f64 = 0.0;
    for _ in 0..100 {
        plant = plant.max(plant_and_recover(&cfg, 8, &mut rng)?);
    }
    outcome(
        eig == 0.0 && round < 1e-12 && plant < 1e-9,
        format!(
            "eigenvalue deviation {eig:e}, round trip {round:.1e}, plant-and-recover {plant:.1e}"
        ),
    )
}

fn c10_balance() -> Result<Outcome> {
    let cfg = Configuration::flagship();
    let data = GreenData::balanced(cfg.clone())?;
    let at_star = balance_residual(&data)?.into_iter().fold(0.0, f64::max);
    let delta = &data.alpha * 0.1;
    let perturbed = GreenData::new(cfg.clone(), &data.alpha + &delta)?;
    let got = balance_residual(&perturbed)?;
    let predicted =
        (gamma_matrix(&cfg)? * &delta).map(|v| v.abs() / omega_n(3).unwrap_or(f64::NAN));
    let mut ok = at_star < 1e-8;
    let mut ratios = Vec::new();
    for (g, p) in got.iter().zip(predicted.iter()) {
        let r = g / p;
        ok &= *g > 0.0 && (r - 1.0).abs() < 0.1;
        ratios.push(format!("{r:.6}"));
    }
    outcome(
        ok,
        format!(
            "residual at alpha* {at_star:.1e}; perturbed/predicted = [{}]",
            ratios.join(", ")
        ),
    )
}

fn c11_glue() -> Result<Outcome> {
    let base = Configuration::flagship();
    let alpha = InteractionSystem::compute(&base)?.alpha.unwrap_or_default();
    let eps = [1e-3, 3e-4, 1e-4];
    let mut gaps = Vec::new();
    let mut curv = Vec::new();
    let mut lossless = true;
    let dir = tempfile::tempdir().map_err(|e| neckglue::Error::InvalidInput(e.to_string()))?;
    for (i, &e) in eps.iter().enumerate() {
        let cfg = base.with_epsilon(e)?;
        let surface = glue::assemble(&cfg, &alpha, &GridSpec::default())?;
        let gap = glue::boundary_gap(&surface)?;
        gaps.push(gap.iter().map(|g| g.position_sup).fold(0.0, f64::max));
        let report = glue::curvature_report(&surface);
        curv.push(
            report
                .iter()
                .find(|p| p.name == "outer")
                .map_or(f64::NAN, |p| p.sup),
        );
        if i == 0 {
            let path = dir.path().join("surface.ply");
            export::export_surface(&surface, Format::Ply, &path)?;
            let mut patches = vec![&surface.outer];
            patches.extend(surface.necks.iter().map(|nk| &nk.patch));
            lossless = export::read_point_cloud(&path)? == export::records(&patches);
        }
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let slope = loglog_slope(&eps, &curv);
    outcome(
        monotone && (slope - 3.0).abs() <= 0.3 && lossless,
        format!(
            "position gaps [{}], outer curvature slope {slope:.3}, PLY lossless: {lossless}",
            gaps.iter()
                .map(|g| format!("{g:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 11] = [
        ("gamma closed form", Duration::from_secs(5), c1_gamma),
        ("degenerate gamma", Duration::from_secs(60), c2_degenerate),
        ("flagship h3", Duration::from_secs(1), c3_h3),
        ("model minimality", Duration::from_secs(120), c4_minimality),
        ("jacobi kernel", Duration::from_secs(120), c5_jacobi),
        ("indicial roots", Duration::from_secs(60), c6_indicial),
        ("explicit solutions", Duration::from_secs(60), c7_explicit),
        ("exterior mode oracle", Duration::from_secs(60), c8_exterior),
        ("DtN witness", Duration::from_secs(60), c9_dtn),
        ("balancing", Duration::from_secs(30), c10_balance),
        ("glue end-to-end", Duration::from_secs(300), c11_glue),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = f();
        let took = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && took <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2}s of {}s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
