//! Acceptance criteria, one pass/fail line each.
//!
//! Runs without the libtest harness so the report is always printed. The process fails
//! when a criterion fails, except for those listed in `KNOWN_FAILURES`, which are
//! reported as FAIL and left visible.

mod common;

use std::time::Instant;

use bubblelab::dynamics::{
    extinction_time_lower, extinction_witness, ode_decay_check, parse_ladder, radial_lambda1, small_window_lambda1,
    DecayParams, EepConstant, OuterCondition,
};
use bubblelab::energy::{channel_fit_second_order, fit_relative, DeficitSource, EscobarBubble, GnModel};
use bubblelab::estimators::{
    estimated_surface_fields, exact_surface_fields, gauss_bonnet_recovery, hat_h_sweep, three_scale_sweep,
    ObservabilityConstants, Surface,
};
use bubblelab::fit::{dyadic_grid, loglog_slope};
use bubblelab::fixtures::{self, FixtureFile};
use bubblelab::geometry::{fermi_jet, ExactBall, InteriorPointData, ModelGeometry};
use bubblelab::moments::{escobar_constants, fde_exponents, weighted_moments, EscobarConstants};
use bubblelab::ode::OdeOptions;
use bubblelab::profiles::escobar_halfspace_optimizer;
use bubblelab::quadrature::QuadSpec;
use bubblelab::reduced::{
    critical_point_search, interaction_block, quantized_level, scale_jacobian, Configuration, Domain, Field,
    InteractionKernel, ReducedModel, SearchOptions,
};

/// Criteria that fail for reasons recorded with the project notes.
const KNOWN_FAILURES: [u32; 1] = [4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn constants(n: usize) -> EscobarConstants {
    let spec = QuadSpec::default();
    let u = escobar_halfspace_optimizer(n).unwrap();
    escobar_constants(n, &weighted_moments(&u, 25.0, &spec).unwrap(), 1e-6).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn moment_identities() -> Outcome {
    let spec = QuadSpec::default();
    let mut worst: f64 = 0.0;
    let mut worst_second: f64 = 0.0;
    for n in 4..=7 {
        let u = escobar_halfspace_optimizer(n).unwrap();
        let m = weighted_moments(&u, 25.0, &spec).unwrap().extrapolated;
        let theta = m.trace_l2;
        worst = worst.max((m.first - theta / 2.0).abs() / theta).max((m.first_tan - theta / 4.0).abs() / theta);
        if n >= 5 {
            let g2 = m.second.unwrap();
            worst_second = worst_second.max((m.second_tan.unwrap() - 0.5 * g2).abs() / g2);
        }
    }
    check(
        worst <= 1e-5 && worst_second <= 1e-5,
        format!(
            "first-moment identities max {worst:.2e}/Θ, second-moment identity max {worst_second:.2e}/𝔤⁽²⁾ (tol 1e-5)"
        ),
    )
}

fn coefficient_closed_forms() -> Outcome {
    let mut rho_worst: f64 = 0.0;
    let mut ratio_worst: f64 = 0.0;
    let mut negative = true;
    for n in 4..=8 {
        let c = constants(n);
        let nf = n as f64;
        if n <= 7 {
            rho_worst = rho_worst.max(rel(c.rho_conf_bracket, (nf - 2.0).powi(2) * c.theta / (2.0 * (nf - 1.0))));
        }
        if n >= 5 {
            let k3 = c.kappa3.unwrap();
            ratio_worst = ratio_worst.max(rel(k3 / c.second_moment.unwrap(), (4.0 - nf) / (2.0 * (nf - 1.0))));
            negative &= k3 < 0.0;
        }
    }
    check(
        rho_worst <= 1e-6 && ratio_worst <= 1e-14 && negative,
        format!("ρ bracket vs closed form {rho_worst:.2e}; κ₃/𝔤⁽²⁾ ratio error {ratio_worst:.2e}; κ₃ < 0 for n = 5..8: {negative}"),
    )
}

fn first_order_escobar() -> Outcome {
    let c = constants(5);
    let u = escobar_halfspace_optimizer(5).unwrap();
    let b = EscobarBubble::new(&u, 25.0, &QuadSpec::default()).unwrap();
    let jet = fermi_jet(&ModelGeometry::UmbilicSphereCap { mean_curvature: 1.0 }.boundary_data(5).unwrap(), 2)
        .unwrap()
        .averaged();
    let results: Vec<_> = dyadic_grid(1e-2, 6).iter().map(|&e| b.escobar_quotient(&jet, e, 1.0).unwrap()).collect();
    let slope = fit_relative(&results, &[1, 2]).unwrap().coeffs[0];
    let err = rel(slope, c.rho_conf);
    check(err <= 0.02, format!("slope {slope:.6} vs ρ₅^conf {:.6}: relative {err:.2e} (tol 2e-2)", c.rho_conf))
}

fn channel_fit() -> Outcome {
    let c = constants(5);
    let u = escobar_halfspace_optimizer(5).unwrap();
    let fit = channel_fit_second_order(&u, &c, &dyadic_grid(1e-2, 6), 0.25, &QuadSpec::default()).unwrap();
    let err = rel(fit.kappa3_fit, fit.kappa3_moment);
    let with_scal = rel(fit.kappa3_fit, fit.kappa3_with_scal);
    check(
        err <= 0.05 && fit.kappa2 > 0.0,
        format!(
            "κ₃ fit {:.5} vs moment {:.5}: relative {err:.2e} (tol 5e-2); κ₂ fit {:.3e} (> 0 required); \
             fit vs moment plus scalar-curvature weight {:.5}: relative {with_scal:.2e}",
            fit.kappa3_fit, fit.kappa3_moment, fit.kappa2, fit.kappa3_with_scal
        ),
    )
}

fn ball_observability() -> Outcome {
    let u = escobar_halfspace_optimizer(5).unwrap();
    let b = EscobarBubble::new(&u, 25.0, &QuadSpec::default()).unwrap();
    let c = ObservabilityConstants::for_bubble(&b).unwrap();
    let ball = ExactBall { n: 5, radius: 1.0 };
    let reports =
        hat_h_sweep(&DeficitSource::Escobar { bubble: &b, metric: &ball }, &dyadic_grid(1e-2, 6), &c, Some(4.0))
            .unwrap();
    let last = reports.last().unwrap();
    let order = last.empirical_order.unwrap();
    let err = rel(last.estimate, 4.0);
    check(
        (0.8..=1.2).contains(&order) && err <= 0.05,
        format!(
            "Ĥ order {order:.3} (band [0.8, 1.2]); finest Ĥ {:.5} vs 4: relative {err:.2e} (tol 5e-2)",
            last.estimate
        ),
    )
}

fn three_scale_debiasing() -> Outcome {
    let c = ObservabilityConstants { n: 7, s_star: 4.479, rho: 1.7 };
    let truth = [0.8, -0.3, 0.45];
    let cubic = vec![0.0, c.s_star * c.rho * truth[0], c.s_star * truth[1], c.s_star * truth[2]];
    let grid = dyadic_grid(1e-2, 6);
    // Θ̂ divides deficit roundoff by ε², so exactness is checked where that stays below 1e-12
    let coarse = dyadic_grid(0.1, 4);
    let exact = three_scale_sweep(
        &DeficitSource::Synthetic { reference: c.s_star, coefficients: cubic.clone() },
        &coarse,
        &c,
        Some(truth),
    )
    .unwrap();
    let exact_err = exact.iter().flatten().map(|r| r.error.unwrap()).fold(0.0, f64::max);
    let mut quartic = cubic;
    quartic.push(c.s_star * 2.5);
    let noisy = three_scale_sweep(
        &DeficitSource::Synthetic { reference: c.s_star, coefficients: quartic },
        &grid,
        &c,
        Some(truth),
    )
    .unwrap();
    let synth_orders: Vec<f64> = noisy.iter().map(|r| r[0].empirical_order.unwrap()).collect();
    let synth_ok = synth_orders.iter().zip([3.0, 2.0, 1.0]).all(|(o, want)| (o - want).abs() <= 0.3);

    let u = escobar_halfspace_optimizer(7).unwrap();
    let b = EscobarBubble::new(&u, 10.0, &QuadSpec::default()).unwrap();
    let oc = ObservabilityConstants::for_bubble(&b).unwrap();
    let jet = fermi_jet(&ModelGeometry::UmbilicSphereCap { mean_curvature: 1.0 }.boundary_data(7).unwrap(), 2)
        .unwrap()
        .averaged();
    let s = b.escobar_series(&jet, 3);
    let jet_reports = three_scale_sweep(
        &DeficitSource::Escobar { bubble: &b, metric: &jet },
        &grid,
        &oc,
        Some([1.0, s.relative[2], s.relative[3]]),
    )
    .unwrap();
    let jet_orders: Vec<f64> = jet_reports.iter().map(|r| r[0].empirical_order.unwrap()).collect();
    let jet_ok = jet_orders.iter().zip([2.7, 1.7, 0.7]).all(|(o, min)| *o >= min);
    check(
        exact_err <= 1e-12 && synth_ok && jet_ok,
        format!(
            "cubic recovery on ε ∈ [0.0125, 0.1] {exact_err:.2e} (tol 1e-12); ε⁴-remainder orders {:.3?} (±0.3 of [3, 2, 1]); n = 7 jet orders {:.3?} (≥ [2.7, 1.7, 0.7])",
            synth_orders, jet_orders
        ),
    )
}

fn plain_trace() -> Outcome {
    let c = constants(5);
    let u = escobar_halfspace_optimizer(5).unwrap();
    let b = EscobarBubble::new(&u, 25.0, &QuadSpec::default()).unwrap();
    let jet = fermi_jet(&ModelGeometry::UmbilicSphereCap { mean_curvature: 1.0 }.boundary_data(5).unwrap(), 2)
        .unwrap()
        .averaged();
    let results: Vec<_> =
        dyadic_grid(1e-2, 6).iter().map(|&e| b.plain_trace_quotient(&jet, e, 1.0, false).unwrap()).collect();
    let slope = fit_relative(&results, &[1, 2]).unwrap().coeffs[0];
    let err = rel(slope, c.theta / 2.0);
    check(err <= 0.02, format!("slope {slope:.6} vs Θ/2·H {:.6}: relative {err:.2e} (tol 2e-2)", c.theta / 2.0))
}

fn gn_expansions() -> Outcome {
    let grid = dyadic_grid(1e-2, 6);
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [2usize, 3] {
        let m = GnModel::build(n, 3.0, 0.05, 20.0, &QuadSpec::default()).unwrap();
        let jet = fermi_jet(&ModelGeometry::UmbilicSphereCap { mean_curvature: 1.0 }.boundary_data(n).unwrap(), 2)
            .unwrap()
            .averaged();
        let bdy: Vec<_> = grid.iter().map(|&e| m.bubble.boundary_quotient(&jet, e).unwrap()).collect();
        let slope = fit_relative(&bdy, &[1, 2, 3]).unwrap().coeffs[0];
        let point = InteriorPointData::round(n, 1.0 / (n as f64 * (n as f64 - 1.0)));
        let ij = point.jet(1.0).unwrap();
        let int: Vec<_> = grid.iter().map(|&e| m.bubble.interior_quotient(&ij, e).unwrap()).collect();
        // 1 - W/W₀ ≈ κ^int Scal ε²
        let c2 = -fit_relative(&int, &[2, 4]).unwrap().coeffs[0];
        let kb = m.coefficients.kappa_bdy;
        let ki = m.coefficients.kappa_int * point.scal();
        let (eb, ei) = (rel(slope, kb), rel(c2, ki));
        pass &= eb <= 0.02 && ei <= 0.05;
        detail.push(format!(
            "n={n}: boundary {slope:.6} vs κ^bdy {kb:.6} ({eb:.1e}), interior {c2:.6} vs κ^int·Scal {ki:.6} ({ei:.1e})"
        ));
    }
    check(pass, detail.join("; "))
}

fn gauss_bonnet() -> Outcome {
    let annulus = Surface::Annulus { inner_radius: 0.5 };
    let exact_disk = gauss_bonnet_recovery(&exact_surface_fields(&Surface::Disk, 32).unwrap()).unwrap().chi_hat;
    let exact_annulus = gauss_bonnet_recovery(&exact_surface_fields(&annulus, 32).unwrap()).unwrap().chi_hat;
    let model = GnModel::build(2, 3.0, 0.05, 20.0, &QuadSpec::default()).unwrap();
    let est_disk =
        gauss_bonnet_recovery(&estimated_surface_fields(&Surface::Disk, 32, &model, 1e-2).unwrap()).unwrap().chi_hat;
    let est_annulus =
        gauss_bonnet_recovery(&estimated_surface_fields(&annulus, 32, &model, 1e-2).unwrap()).unwrap().chi_hat;
    let pass = (exact_disk - 1.0).abs() <= 1e-10 && exact_annulus.abs() <= 1e-10 && (est_disk - 1.0).abs() <= 0.05;
    check(
        pass,
        format!(
            "exact disk {exact_disk:.12}, exact annulus {exact_annulus:.1e} (tol 1e-10); estimated disk {est_disk:.4} (tol 0.05); \
             estimated annulus r=0.5 {est_annulus:.4} (informational)"
        ),
    )
}

fn reduced_model() -> Outcome {
    let mut detail = Vec::new();
    // Gershgorin dominance
    let c6 = constants(6);
    let kernel = InteractionKernel::new(6, 1.0).unwrap();
    let mut dominant = true;
    for mass in [0.5, -0.5, 1.0, -2.0] {
        let model =
            ReducedModel::new(&c6, kernel.clone(), Field::Constant { value: mass }, Field::Constant { value: 0.0 });
        for sep in [0.5, 1.0, 2.0] {
            let centers = vec![vec![0.0], vec![sep], vec![2.0 * sep]];
            let config = Configuration::new(Domain::Circle, centers, vec![1e-3; 3]).unwrap();
            dominant &= scale_jacobian(&model, &config).unwrap().diagonally_dominant;
        }
    }
    detail.push(format!("Gershgorin dominance for k=3, n=6, |𝔯| ∈ {{0.5, 1, 2}}, separation ≥ 0.5: {dominant}"));
    // interaction scaling
    let mut slopes_ok = true;
    let mut slopes = Vec::new();
    for n in [4usize, 5, 6] {
        let model = ReducedModel::new(
            &constants(n),
            InteractionKernel::new(n, 1.0).unwrap(),
            Field::Constant { value: 1.0 },
            Field::Constant { value: 0.0 },
        );
        let eps = dyadic_grid(1e-2, 6);
        let values: Vec<f64> = eps
            .iter()
            .map(|&e| {
                interaction_block(
                    &model,
                    &Configuration::new(Domain::Circle, vec![vec![0.0], vec![1.0]], vec![e, e]).unwrap(),
                )
                .unwrap()
            })
            .collect();
        let s = loglog_slope(&eps, &values).unwrap();
        slopes_ok &= rel(s, n as f64 - 2.0) <= 0.05;
        slopes.push(s);
    }
    detail.push(format!("interaction slopes {:.6?} vs n-2 for n = 4, 5, 6", slopes));
    // cos 2θ critical points against a brute-force grid
    let search = critical_point_search(&Field::cos(2.0), Domain::Circle, 2, &SearchOptions::default()).unwrap();
    let grid = common::brute_force_pair_optima(|t| (2.0 * t).cos(), 1e-3, 0.05);
    let tol = 2.0 * grid.step;
    let pair = |c: &bubblelab::reduced::CriticalConfiguration| (c.centers[0][0], c.centers[1][0]);
    let found_min: Vec<_> = search.critical_points.iter().filter(|c| c.index == 0).collect();
    let found_max: Vec<_> = search.critical_points.iter().filter(|c| c.index == 2).collect();
    let matches = |grid_pts: &[(f64, f64, f64)], found: &[&bubblelab::reduced::CriticalConfiguration]| {
        grid_pts.len() == found.len()
            && grid_pts.iter().all(|g| {
                found.iter().any(|f| common::same_pair((g.0, g.1), pair(f), tol) && (f.value - g.2).abs() <= 1e-5)
            })
    };
    let grid_ok = matches(&grid.minima, &found_min) && matches(&grid.maxima, &found_max);
    detail.push(format!(
        "cos 2θ: grid minima {} / maxima {}, search minima {} / maxima {}, match up to relabeling: {grid_ok}",
        grid.minima.len(),
        grid.maxima.len(),
        found_min.len(),
        found_max.len()
    ));
    check(dominant && slopes_ok && grid_ok, detail.join("; "))
}

fn quantized_levels() -> Outcome {
    let mut increasing = true;
    for n in 4..=8 {
        let s = constants(n).s_star;
        let levels: Vec<f64> = (1..=12).map(|k| quantized_level(k, n, s).unwrap()).collect();
        increasing &= levels.windows(2).all(|w| w[1] > w[0]);
    }
    let s4 = constants(4).s_star;
    let err = rel(quantized_level(8, 4, s4).unwrap(), 2.0 * s4);
    check(
        increasing && err <= 1e-12,
        format!("strictly increasing in k for n = 4..8: {increasing}; (8, 4) vs 2S*: relative {err:.1e} (tol 1e-12)"),
    )
}

fn fast_diffusion() -> Outcome {
    let alpha_ok = (1..=9).all(|i| fde_exponents(2, i as f64 / 10.0).unwrap().alpha == 0.5);
    let opts = OdeOptions::default();
    let mut gap: f64 = 0.0;
    let mut excess: f64 = 0.0;
    let mut half: f64 = 0.0;
    for m in [0.1, 0.5, 0.9] {
        let eep = if m == 0.5 { EepConstant::EuclideanLeading } else { EepConstant::Value { value: 0.4 } };
        let p = DecayParams::new(2, m, eep, 1.0, 1.0).unwrap();
        let c = ode_decay_check(&p, 100.0, 201, &opts).unwrap();
        gap = gap.max(c.sup_gap);
        excess = excess.max(c.sup_excess);
        half = half.max(c.half_closed_form_error.unwrap());
    }
    let mut ext: f64 = 0.0;
    for m in [0.3, 0.5, 0.8] {
        let w = extinction_witness(1.7, m, 0.9, &opts).unwrap();
        let b = extinction_time_lower(1.7, m, 0.9).unwrap();
        ext = ext.max(rel(w, b));
    }
    check(
        alpha_ok && gap <= 1e-8 && excess <= 1e-8 && half <= 1e-8 && ext <= 1e-8,
        format!(
            "α₂,m = 1/2 for m = 0.1..0.9: {alpha_ok}; sup gap {gap:.1e}, sup excess {excess:.1e}, closed form {half:.1e}, extinction {ext:.1e} (tol 1e-8)"
        ),
    )
}

fn window_scaling() -> Outcome {
    let ladder = parse_ladder("1e-2:1e-5").unwrap();
    let w2 = small_window_lambda1(2, &ladder, OuterCondition::Neumann, 1e-8).unwrap();
    let w3 = small_window_lambda1(3, &ladder, OuterCondition::Neumann, 1e-8).unwrap();
    let j0 = common::bessel_j0_first_zero();
    let disk = radial_lambda1(2, 0.0, OuterCondition::Dirichlet, 1e-10).unwrap();
    let disk_err = rel(disk, j0 * j0);
    check(
        w2.last_relative_change <= 0.15 && w3.last_relative_change <= 0.15 && disk_err <= 1e-6,
        format!(
            "n=2 λ₁|log d| last change {:.2e}, n=3 λ₁/d last change {:.2e} (tol 0.15); disk λ₁ {disk:.10} vs j₀,₁² {:.10}: {disk_err:.1e} (tol 1e-6)",
            w2.last_relative_change,
            w3.last_relative_change,
            j0 * j0
        ),
    )
}

fn determinism_and_fixtures() -> Outcome {
    let path = fixtures::default_dir().join(fixtures::FILE_NAME);
    let stored: FixtureFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let report = fixtures::verify(&stored, &QuadSpec::default()).unwrap();
    let a = serde_json::to_string(&fixtures::compute(&QuadSpec::default()).unwrap()).unwrap();
    let b = serde_json::to_string(&fixtures::compute(&QuadSpec::default()).unwrap()).unwrap();
    let worst = report.checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
    check(
        report.pass && a == b,
        format!("{} fixture entries verified (worst deviation {worst:.1e}), failures {:?}; repeated computation byte-identical: {}", report.checks.len(), report.failures(), a == b),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        (1, "moment identities", moment_identities),
        (2, "coefficient closed forms", coefficient_closed_forms),
        (3, "first-order Escobar law", first_order_escobar),
        (4, "channel fit", channel_fit),
        (5, "ball observability", ball_observability),
        (6, "three-scale de-biasing", three_scale_debiasing),
        (7, "plain-trace coefficient", plain_trace),
        (8, "GN expansions", gn_expansions),
        (9, "Gauss-Bonnet", gauss_bonnet),
        (10, "reduced model", reduced_model),
        (11, "quantized levels", quantized_levels),
        (12, "fast diffusion", fast_diffusion),
        (13, "window scaling", window_scaling),
        (14, "determinism and fixtures", determinism_and_fixtures),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || id.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        let status = match (out.pass, KNOWN_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected.push(id);
                "FAIL"
            }
        };
        println!("criterion {id:>2} {status:<12} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), out.detail);
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
