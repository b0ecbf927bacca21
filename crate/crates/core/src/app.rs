//! Command implementations behind the `neckglue` binary. Each command builds
//! a `RunReport`; the binary only parses arguments and prints.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::export::{self, Format};
use crate::geometry::{AmbientPoint, Axis};
use crate::glue::{self, GridSpec};
use crate::green::{balance_residual, GreenData};
use crate::harmonics::{self, ShExpansion, ShGrid};
use crate::interaction::{
    gamma_by_quadrature, gamma_entry, lambda_by_quadrature, InteractionSystem,
};
use crate::matching;
use crate::neck::{self, NeckParams};
use crate::ode::OdeOptions;
use crate::quadrature::QuadratureRule;
use crate::report::{Check, RunReport};
use crate::spectrum::{self, End, ModeFamily, SystemKind};
use crate::tolerances;

#[derive(Clone, Debug)]
pub enum Command {
    Validate {
        config: PathBuf,
    },
    Interaction {
        config: PathBuf,
    },
    Neck {
        n: usize,
        beta: f64,
        eps: f64,
        grid: Option<f64>,
        export: Option<PathBuf>,
    },
    Spectrum {
        n: usize,
        k: usize,
    },
    Glue {
        config: PathBuf,
        eps: Option<f64>,
        export: Option<PathBuf>,
    },
    Dtn {
        degree: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Interaction { .. } => "interaction",
            Command::Neck { .. } => "neck",
            Command::Spectrum { .. } => "spectrum",
            Command::Glue { .. } => "glue",
            Command::Dtn { .. } => "dtn",
        }
    }
}

/// Monte-Carlo agreement is judged at this many standard errors.
pub const MC_SIGMAS: f64 = 4.0;

struct Timer<'a> {
    report: &'a mut RunReport,
}

impl Timer<'_> {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.report
            .timings
            .insert(name.to_string(), t.elapsed().as_secs_f64());
        v
    }
}

pub fn run(cmd: &Command, seed: Option<u64>) -> Result<RunReport> {
    match cmd {
        Command::Validate { config } => validate(&load(config, seed)?),
        Command::Interaction { config } => interaction(&load(config, seed)?),
        Command::Neck {
            n,
            beta,
            eps,
            grid,
            export,
        } => neck_cmd(*n, *beta, *eps, *grid, export.as_deref()),
        Command::Spectrum { n, k } => spectrum_cmd(*n, *k),
        Command::Glue {
            config,
            eps,
            export,
        } => {
            let mut cfg = load(config, seed)?;
            if let Some(e) = eps {
                cfg = cfg.with_epsilon(*e)?;
            }
            glue_cmd(&cfg, export.as_deref())
        }
        Command::Dtn { degree } => dtn_cmd(*degree, seed.unwrap_or(0)),
    }
}

fn load(path: &std::path::Path, seed: Option<u64>) -> Result<Configuration> {
    let mut cfg = Configuration::load(path)?;
    if let Some(s) = seed {
        cfg.options.seed = s;
    }
    Ok(cfg)
}

fn hypothesis_checks(report: &mut RunReport, sys: &InteractionSystem) {
    let h1_min = sys
        .h1
        .iter()
        .map(|v| v.residual)
        .fold(f64::INFINITY, f64::min);
    report.check(Check::above(
        "h1 (min distance of xi to the image)",
        if sys.h1.is_empty() {
            f64::INFINITY
        } else {
            h1_min
        },
        tolerances::H1_RESIDUAL,
    ));
    report.check(Check::above(
        "h2 (reciprocal condition of gamma)",
        sys.rcond,
        tolerances::H2_RCOND,
    ));
    let amin = sys.alpha.as_ref().map_or(f64::NAN, |a| {
        a.iter().copied().fold(f64::INFINITY, f64::min)
    });
    report.check(Check::above("h3 (min alpha)", amin, 0.0));
    if let Some(r) = sys.solve_residual {
        report.check(Check::below(
            "alpha solve residual",
            r,
            tolerances::SOLVE_RESIDUAL,
        ));
    }
}

pub fn validate(cfg: &Configuration) -> Result<RunReport> {
    let mut report = RunReport::new("validate", cfg.options.seed);
    report.config_digest = Some(cfg.digest());
    let sys = Timer {
        report: &mut report,
    }
    .time("interaction", || InteractionSystem::compute(cfg))?;
    report.section(
        "configuration",
        &serde_json::json!({
            "n": cfg.n,
            "k": cfg.k(),
            "epsilon": cfg.epsilon,
            "rho_star": cfg.rho_star,
            "rho0": cfg.rho0(),
        }),
    );
    report.section("interaction", &sys);
    hypothesis_checks(&mut report, &sys);
    Ok(report)
}

#[derive(Serialize)]
struct QuadEntry {
    j: usize,
    jp: usize,
    closed_form: f64,
    product_gauss: f64,
    monte_carlo: f64,
    mc_std_error: f64,
}

pub fn interaction(cfg: &Configuration) -> Result<RunReport> {
    let mut report = validate(cfg)?;
    report.command = "interaction".into();
    let n = cfg.n;
    let pg = QuadratureRule::product_gauss(n, cfg.options.quadrature_nodes)?;
    let mc = QuadratureRule::monte_carlo(n, tolerances::MC_SAMPLES, cfg.options.seed)?;
    let t = Instant::now();
    let mut entries = Vec::new();
    let mut worst_pg: f64 = 0.0;
    let mut worst_mc: f64 = 0.0;
    for j in 0..cfg.k() {
        for jp in 0..cfg.k() {
            if j == jp {
                continue;
            }
            let cf = gamma_entry(cfg, j, jp)?;
            let a = gamma_by_quadrature(cfg, j, jp, &pg);
            let b = gamma_by_quadrature(cfg, j, jp, &mc);
            worst_pg = worst_pg.max((a.value - cf).abs());
            if b.std_error > 0.0 {
                worst_mc = worst_mc.max((b.value - cf).abs() / b.std_error);
            }
            entries.push(QuadEntry {
                j,
                jp,
                closed_form: cf,
                product_gauss: a.value,
                monte_carlo: b.value,
                mc_std_error: b.std_error,
            });
        }
    }
    let sys = InteractionSystem::compute(cfg)?;
    let lpg = lambda_by_quadrature(cfg, &pg);
    for (l, e) in sys.lambda.iter().zip(&lpg) {
        worst_pg = worst_pg.max((l - e.value).abs());
    }
    report
        .timings
        .insert("quadrature".into(), t.elapsed().as_secs_f64());
    report.section("gamma_quadrature", &entries);
    report.section(
        "lambda_quadrature",
        &lpg.iter().map(|e| e.value).collect::<Vec<_>>(),
    );
    report.check(Check::below(
        "product Gauss vs closed form",
        worst_pg,
        1e-10,
    ));
    report.check(Check::below(
        "Monte-Carlo deviation in standard errors",
        worst_mc,
        MC_SIGMAS,
    ));
    Ok(report)
}

#[derive(Serialize)]
struct NeckSummary {
    n: usize,
    beta: f64,
    epsilon: f64,
    scale: f64,
    grid_h: f64,
    t_window: [f64; 2],
    branch_minimum: (f64, f64),
    curvature_sup: f64,
    curvature_sup_coarse: f64,
    observed_order: f64,
    tangent_defect: f64,
    valid_nodes: usize,
    asymptote: Option<neck::AsymptoteResidual>,
}

fn neck_grid(n: usize, h: f64) -> (Axis, Vec<Axis>) {
    let polar = ((PI / h).round() as usize).max(4);
    let az = ((2.0 * PI / h).round() as usize).max(8);
    (
        Axis::with_step(-1.0, 1.0, h),
        neck::sphere_axes(n, polar, az),
    )
}

pub fn neck_cmd(
    n: usize,
    beta: f64,
    eps: f64,
    grid: Option<f64>,
    export_path: Option<&std::path::Path>,
) -> Result<RunReport> {
    let mut report = RunReport::new("neck", 0);
    let params = NeckParams::new(
        n,
        beta,
        eps,
        DMatrix::identity(n, n),
        AmbientPoint::zeros(n),
    )?;
    let h = grid.unwrap_or(0.1);
    if !(h > 0.0 && h <= 0.5) {
        return Err(Error::OutOfRange {
            what: "grid step",
            value: h,
            range: "(0, 0.5]".into(),
        });
    }
    let t0 = Instant::now();
    let (ta, sa) = neck_grid(n, h);
    let fine = neck::neck_patch_t(&params, ta, sa)?;
    let (tc, sc) = neck_grid(n, 2.0 * h);
    let coarse = neck::neck_patch_t(&params, tc, sc)?;
    let sf = fine.curvature_sweep();
    let scs = coarse.curvature_sweep();
    report
        .timings
        .insert("curvature".into(), t0.elapsed().as_secs_f64());
    let order = (scs.sup / sf.sup).log2();
    let s_min = neck::branch_minimum(&params);
    let rhos: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|m| m * params.scale())
        .collect();
    let angles: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let mut a = vec![PI / 2.0; n - 1];
            a[n - 2] = i as f64 * PI / 4.0;
            if n > 2 {
                a[0] = 0.3 + 0.3 * (i % 4) as f64;
            }
            a
        })
        .collect();
    let asymptote = neck::asymptote_residual(&params, &rhos, &angles).ok();
    report.section(
        "neck",
        &NeckSummary {
            n,
            beta,
            epsilon: eps,
            scale: params.scale(),
            grid_h: h,
            t_window: [-1.0, 1.0],
            branch_minimum: s_min,
            curvature_sup: sf.sup,
            curvature_sup_coarse: scs.sup,
            observed_order: order,
            tangent_defect: sf.tangent_defect,
            valid_nodes: sf.nodes.len(),
            asymptote,
        },
    );
    report.check(Check::above("mean-curvature refinement order", order, 1.5));
    if let Some(p) = export_path {
        let count = export::export_patch(&fine, Format::from_path(p), p)?;
        report.section(
            "export",
            &serde_json::json!({ "path": p.display().to_string(), "points": count }),
        );
    }
    Ok(report)
}

#[derive(Serialize)]
struct FrozenCheck {
    family: ModeFamily,
    end: End,
    numeric: Vec<f64>,
    table: Vec<f64>,
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn spectrum_cmd(n: usize, k: usize) -> Result<RunReport> {
    let mut report = RunReport::new("spectrum", 0);
    let table = spectrum::indicial_roots(n, k)?;
    report.section("indicial_roots", &table);
    let ts: Vec<f64> = (0..=1000).map(|i| -5.0 + 0.01 * i as f64).collect();
    let f0 = spectrum::verify_f0(n, &ts)?;
    report.check(Check::below("f0 residual", f0, 1e-12));

    let mut frozen = Vec::new();
    let mut worst: f64 = 0.0;
    let mut families = vec![];
    if k == 0 {
        families.push((
            ModeFamily::Radial,
            vec![table.exact_mu.minus, table.exact_mu.plus],
        ));
    } else {
        let nu = table.exact_nu.expect("k >= 1");
        let mut ex = vec![table.exact_mu.minus, table.exact_mu.plus, nu.minus, nu.plus];
        ex.sort_by(f64::total_cmp);
        families.push((ModeFamily::Exact(k), ex));
        let g = table.coexact_roots()?;
        families.push((ModeFamily::Coexact(k), vec![g.minus, g.plus]));
    }
    for (fam, mut expected) in families {
        expected.sort_by(f64::total_cmp);
        for end in [End::Minus, End::Plus] {
            let sys = spectrum::ModeSystem::new(n, fam, SystemKind::Interior)?;
            let numeric = sorted_eigs(&sys.frozen_matrix(end));
            for (a, b) in numeric.iter().zip(&expected) {
                worst = worst.max((a - b).abs());
            }
            frozen.push(FrozenCheck {
                family: fam,
                end,
                numeric,
                table: expected.clone(),
            });
        }
    }
    report.section("frozen_roots", &frozen);
    report.check(Check::below("frozen roots vs indicial table", worst, 1e-12));

    if n == 3 && k == 1 {
        let grid: Vec<f64> = (0..=600).map(|i| -3.0 + 0.01 * i as f64).collect();
        let res = spectrum::explicit_n3_residual(&grid, 1e-3)?;
        report.check(Check::below("explicit (a1, b1) residual", res, 1e-8));
        let init = spectrum::explicit_n3_state(0.0)?;
        let sol = spectrum::integrate_mode_system(
            3,
            ModeFamily::Exact(1),
            SystemKind::Interior,
            0.0,
            init,
            &grid,
            &OdeOptions::default(),
        )?;
        let mut dev: f64 = 0.0;
        for (i, &t) in grid.iter().enumerate() {
            let (a, b) = spectrum::explicit_n3_solution(t)?;
            dev = dev
                .max((sol.a[i] - a).abs())
                .max((sol.b.as_ref().expect("coupled")[i] - b).abs());
        }
        report.check(Check::below("integrated vs explicit (a1, b1)", dev, 1e-8));
        let wide: Vec<f64> = (0..=600).map(|i| -6.0 + 0.02 * i as f64).collect();
        let (a, b): (Vec<f64>, Vec<f64>) = wide
            .iter()
            .map(|&t| spectrum::explicit_n3_solution(t))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let ratio_minus = b[0] / a[0];
        let samples = spectrum::ModeSolution::from_samples(
            3,
            ModeFamily::Exact(1),
            SystemKind::Interior,
            wide,
            a,
            Some(b),
        )?;
        let lo = spectrum::decay_rate(&samples, End::Minus)?;
        let hi = spectrum::decay_rate(&samples, End::Plus)?;
        report.section(
            "explicit_n3",
            &serde_json::json!({
                "rate_minus": lo, "rate_plus": hi, "b_over_a_at_minus_6": ratio_minus,
            }),
        );
        report.check(Check::below(
            "rate at -inf minus 5/2",
            (lo.rate - 2.5).abs(),
            1e-2,
        ));
        report.check(Check::below(
            "rate at +inf minus 1/2",
            (hi.rate - 0.5).abs(),
            1e-2,
        ));
    }
    if n >= 3 && k == 1 {
        let ext = spectrum::exterior_mode_solve(n, 1.0, 0.0)?;
        report.section(
            "exterior_mode",
            &serde_json::json!({
                "a0": 1.0, "b0": 0.0, "mode": ext,
                "relation_defect": ext.relation_defect(1.0, 0.0),
            }),
        );
    }
    Ok(report)
}

#[derive(Serialize)]
struct GlueSummary {
    epsilon: f64,
    rho_star: f64,
    alpha: Vec<f64>,
    scales: Vec<(f64, f64)>,
    boundary_radius_error: f64,
    rescaling_defect: f64,
    hausdorff_to_planes: f64,
    balance_residual: Vec<f64>,
    gaps: Vec<glue::EndGap>,
    curvature: Vec<glue::PatchCurvature>,
}

pub fn glue_cmd(cfg: &Configuration, export_path: Option<&std::path::Path>) -> Result<RunReport> {
    let mut report = validate(cfg)?;
    report.command = "glue".into();
    let sys = InteractionSystem::compute(cfg)?;
    let alpha = match (&sys.alpha, sys.all_hold()) {
        (Some(a), true) => a.clone(),
        _ => return Ok(report),
    };
    let t = Instant::now();
    let surface = glue::assemble(cfg, &alpha, &GridSpec::default())?;
    report
        .timings
        .insert("assemble".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let gaps = glue::boundary_gap(&surface)?;
    let curvature = glue::curvature_report(&surface);
    let haus = glue::hausdorff_to_planes(&surface, 0.5 * cfg.rho0());
    let resc = glue::rescaling_defect(&surface)?;
    let radius_err = surface
        .necks
        .iter()
        .map(|nk| {
            neck::radius_of_s(&nk.params, nk.s_star)
                .map_or(f64::INFINITY, |r| (r - cfg.rho_star).abs())
        })
        .fold(0.0, f64::max);
    let balance = balance_residual(&GreenData::new(
        cfg.clone(),
        nalgebra::DVector::from_vec(alpha.clone()),
    )?)?;
    report
        .timings
        .insert("measure".into(), t.elapsed().as_secs_f64());
    report.check(Check::below(
        "neck boundary radius error",
        radius_err,
        1e-10,
    ));
    report.check(Check::below("rescaling identity defect", resc, 1e-10));
    report.check(Check::below(
        "balance residual",
        balance.iter().copied().fold(0.0, f64::max),
        tolerances::BALANCE,
    ));
    if cfg.n == 3 {
        let disc = glue::boundary_discrepancies(&surface)?;
        let corr = matching::match_boundaries(cfg, &alpha, &disc)?;
        report.check(Check::below(
            "matching solve residual",
            corr.residual_norm,
            1e-10,
        ));
        report.section("matching", &serde_json::json!({
            "delta_alpha": corr.delta_alpha,
            "delta_beta": corr.delta_beta,
            "alpha": corr.alpha,
            "residual_norm": corr.residual_norm,
            "collinear": corr.ends.iter().map(|e| (e.u, e.w)).collect::<Vec<_>>(),
            "phi_max": corr.ends.iter().map(|e| e.phi.max_abs()).collect::<Vec<_>>(),
            "phi_tilde_max": corr.ends.iter().map(|e| e.phi_tilde.max_abs()).collect::<Vec<_>>(),
        }));
    }
    report.section(
        "glue",
        &GlueSummary {
            epsilon: cfg.epsilon,
            rho_star: cfg.rho_star,
            alpha: alpha.clone(),
            scales: surface
                .necks
                .iter()
                .map(|nk| (nk.s_star, nk.t_star))
                .collect(),
            boundary_radius_error: radius_err,
            rescaling_defect: resc,
            hausdorff_to_planes: haus,
            balance_residual: balance,
            gaps,
            curvature,
        },
    );
    if let Some(p) = export_path {
        let t = Instant::now();
        let count = export::export_surface(&surface, Format::from_path(p), p)?;
        report
            .timings
            .insert("export".into(), t.elapsed().as_secs_f64());
        report.section(
            "export",
            &serde_json::json!({ "path": p.display().to_string(), "points": count }),
        );
    }
    Ok(report)
}

fn random_expansion(rng: &mut ChaCha8Rng, degree: usize) -> ShExpansion {
    let mut e = ShExpansion::zeros(degree);
    for c in e.coeffs.iter_mut() {
        for v in c.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    e
}

/// Random Θ-orthogonal expansion.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, degree: usize) -> Result<ShExpansion> {
    Ok(harmonics::split_theta(&random_expansion(rng, degree))?.1)
}

pub fn dtn_cmd(degree: usize, seed: u64) -> Result<RunReport> {
    let mut report = RunReport::new("dtn", seed);
    if degree == 0 || degree > tolerances::SH_DEGREE_MAX {
        return Err(Error::OutOfRange {
            what: "degree",
            value: degree as f64,
            range: format!("[1, {}]", tolerances::SH_DEGREE_MAX),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eig_err: f64 = 0.0;
    for k in 0..=degree {
        for m in -(k as i64)..=k as i64 {
            let mut e = ShExpansion::zeros(degree);
            e.coeffs[0][harmonics::sh_index(k, m)] = 1.0;
            let d = harmonics::p_ext(&e).sub(&harmonics::p_int(&e))?;
            let got = d.coeffs[0][harmonics::sh_index(k, m)];
            eig_err = eig_err.max((got - harmonics::dtn_eigenvalue(k)).abs());
        }
    }
    report.check(Check::equal("DtN eigenvalue deviation", eig_err, 0.0));

    let psi = random_expansion(&mut rng, degree);
    let phi = harmonics::dtn_solve(&psi);
    let back = harmonics::p_ext(&phi).sub(&harmonics::p_int(&phi))?;
    report.check(Check::below(
        "dtn_solve round trip",
        back.sub(&psi)?.max_abs(),
        1e-12,
    ));

    let grid = ShGrid::for_degree(degree);
    let samples = harmonics::sample_on(&grid, |t, p| harmonics::sh_synthesize(&psi, t, p));
    let again = harmonics::sh_analyze(&grid, &samples, degree)?;
    report.check(Check::below(
        "analyze/synthesize round trip",
        again.sub(&psi)?.max_abs(),
        1e-10,
    ));

    let cfg = Configuration::flagship();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let err = plant_and_recover(&cfg, degree, &mut rng)?;
        worst = worst.max(err);
    }
    report.check(Check::below("plant-and-recover error", worst, 1e-9));
    report.section(
        "dtn",
        &serde_json::json!({
            "degree": degree,
            "eigenvalues": (0..=degree).map(harmonics::dtn_eigenvalue).collect::<Vec<_>>(),
        }),
    );
    Ok(report)
}

/// Plants random unknowns, builds the discrepancies they cancel and solves
/// them back; returns the largest recovery error.
pub fn plant_and_recover(cfg: &Configuration, degree: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let k = cfg.k();
    let phi: Vec<ShExpansion> = (0..k)
        .map(|_| random_orthogonal(rng, degree))
        .collect::<Result<_>>()?;
    let tilde: Vec<ShExpansion> = (0..k)
        .map(|_| random_orthogonal(rng, degree))
        .collect::<Result<_>>()?;
    let da: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let db: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let disc = matching::forward_discrepancy(cfg, &phi, &tilde, &da, &db)?;
    let alpha_star = vec![1.0; k];
    let corr = matching::match_boundaries(cfg, &alpha_star, &disc)?;
    let mut err: f64 = 0.0;
    for j in 0..k {
        err = err
            .max(corr.ends[j].phi.sub(&phi[j])?.max_abs())
            .max(corr.ends[j].phi_tilde.sub(&tilde[j])?.max_abs())
            .max((corr.delta_alpha[j] - da[j]).abs())
            .max((corr.delta_beta[j] - db[j]).abs());
    }
    Ok(err)
}

/// Exit status for an error: input problems map to 2.
pub fn error_exit_code(_e: &Error) -> i32 {
    2
}
