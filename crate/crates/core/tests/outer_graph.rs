use approx::assert_relative_eq;
use nalgebra::DVector;

use neckglue::geometry::{Axis, Grid};
use neckglue::green::{
    default_radii, expansion_probe, graph_patch, translation_constant, GreenData,
};
use neckglue::Configuration;

fn box_grid(h: f64) -> Grid {
    Grid::new(vec![Axis::with_step(-2.0, 2.0, h); 3])
}

fn outer_sup(rho_star: f64) -> f64 {
    let data = GreenData::balanced(Configuration::flagship()).unwrap();
    graph_patch(&data, 1e-3, box_grid(0.05), rho_star)
        .unwrap()
        .curvature_sweep()
        .sup
}

// Frozen measurements of the flagship outer graph at ε = 1e−3, h = 0.05.
#[test]
fn outer_curvature_regression() {
    assert_relative_eq!(outer_sup(0.5), 3.0e-2, max_relative = 0.05);
    assert_relative_eq!(outer_sup(0.3), 1.84, max_relative = 0.05);
}

#[test]
fn unbalanced_expansion_coefficients() {
    let cfg = Configuration::flagship();
    let data = GreenData::new(cfg.clone(), DVector::from_vec(vec![1.0, 1.0])).unwrap();
    let p = expansion_probe(&data, 0, &default_radii(&cfg, 0)).unwrap();
    // (γ₁₂ − λ₁)/ω₃ = (−π/3 + 4π)/(4π)
    assert_relative_eq!(p.linear_coeff, 11.0 / 12.0, epsilon = 1e-9);
    assert_relative_eq!(p.singular_coeff, 1.0, epsilon = 1e-9);
    let c = translation_constant(&data, 0).unwrap();
    for i in 0..3 {
        assert_relative_eq!(p.constant_vec[i], c[i], epsilon = 1e-8);
    }
    assert!(p.fit_condition < 1e8);
}
