//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use fracwave::harness::{self, ExperimentSpec, Setup};
use fracwave::mittag_leffler::{ml, ml_contour, ml_real, ml_series, MlParams};
use fracwave::operators::{
    invert_symbol, multiplier, subordination_residual, FamilyKind, Subordination,
};
use fracwave::solver::{solve, solve_picard_global, InitialGuess, NonlinearitySpec, SolverConfig};
use fracwave::special::gamma;
use fracwave::spectral::{admissibility, build_domain, DomainSpec, SpectralDomain, SpectralField};
use fracwave::Result;
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn worst(acc: &mut f64, err: f64) {
    // NaN must not vanish inside max()
    *acc = if err.is_nan() { f64::NAN } else { acc.max(err) };
}

fn identities() -> Result<Outcome> {
    let mut exp_err: f64 = 0.0;
    for i in 0..=350 {
        let x = -30.0 + 0.1 * i as f64;
        worst(
            &mut exp_err,
            (ml_real(1.0, 1.0, x)? - x.exp()).abs() / x.exp(),
        );
    }
    let mut trig_err: f64 = 0.0;
    for i in 1..=400 {
        let x = 0.05 * i as f64;
        worst(&mut trig_err, (ml_real(2.0, 1.0, -x * x)? - x.cos()).abs());
        worst(
            &mut trig_err,
            (ml_real(2.0, 2.0, -x * x)? - x.sin() / x).abs(),
        );
    }
    let mut zero_err: f64 = 0.0;
    let mut rec_err: f64 = 0.0;
    for alpha in [0.5, 1.0, 1.25, 1.5, 1.75, 2.0] {
        for beta in [0.5, 1.0, 1.5, 2.0, 2.5] {
            worst(
                &mut zero_err,
                (ml_real(alpha, beta, 0.0)? - 1.0 / gamma(beta)?).abs(),
            );
            for z in [
                Complex64::new(-12.0, 0.0),
                Complex64::new(-4.0, 2.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.5, -0.5),
                Complex64::new(2.0, 0.0),
                Complex64::new(-6.0, -6.0),
            ] {
                let lhs = ml(alpha, beta, z)?;
                let rhs = z * ml(alpha, alpha + beta, z)? + 1.0 / gamma(beta)?;
                worst(&mut rec_err, (lhs - rhs).norm());
            }
        }
    }
    Ok(Outcome {
        pass: exp_err <= 1e-9 && trig_err <= 1e-8 && zero_err <= 1e-12 && rec_err <= 1e-8,
        detail: format!(
            "exp rel {exp_err:.1e} (1e-9), cos/sinc {trig_err:.1e} (1e-8), E(0) {zero_err:.1e} (1e-12), recurrence {rec_err:.1e} (1e-8)"
        ),
    })
}

fn cross_validation() -> Result<Outcome> {
    let mut agree: f64 = 0.0;
    let mut radius: f64 = 0.0;
    for alpha in [1.25, 1.5, 1.75] {
        for beta in [1.0, alpha, 2.0] {
            let params = MlParams::new(alpha, beta);
            let wide = params.with_radius(2.0);
            for modulus in [3.0, 4.5, 6.0, 8.0] {
                for k in 0..=6 {
                    let arg = PI / 2.0 + k as f64 * PI / 12.0;
                    let z = Complex64::from_polar(modulus, arg);
                    let series = ml_series(alpha, beta, z, 1e-16)?;
                    let contour = ml_contour(&params, z)?;
                    let contour_2r = ml_contour(&wide, z)?;
                    worst(&mut agree, (series - contour).norm());
                    worst(&mut radius, (contour - contour_2r).norm());
                }
            }
        }
    }
    Ok(Outcome {
        pass: agree <= 1e-8 && radius <= 1e-9,
        detail: format!("series vs contour {agree:.1e} (1e-8), r vs 2r {radius:.1e} (1e-9)"),
    })
}

fn multiplier_consistency() -> Result<Outcome> {
    let mut err: f64 = 0.0;
    for alpha in [1.25, 1.5, 1.75] {
        for mu in [0.1, 1.0, 5.0, 20.0, 100.0] {
            for t in [0.05, 0.2, 0.5, 1.0, 2.0] {
                for family in FamilyKind::ALL {
                    let a = multiplier(family, alpha, mu, t)?;
                    let b = invert_symbol(family, alpha, mu, t)?;
                    worst(&mut err, (a - b).abs());
                }
            }
        }
    }
    Ok(Outcome {
        pass: err <= 1e-8,
        detail: format!("max |ML - inverse Laplace| {err:.1e} (1e-8) over 3 x 5 x 5 x 3 cells"),
    })
}

fn subordination() -> Result<Outcome> {
    let d = build_domain(&DomainSpec::interval(PI, 32, 8))?;
    let fields = [
        SpectralField::unit(8, 0),
        harness::seeded_field(&d, 5, 1.0),
        SpectralField::new((1..=8).map(|n| 1.0 / n as f64).collect()),
    ];
    let mut err: f64 = 0.0;
    for alpha in [1.25, 1.5, 1.75] {
        for t in [0.1, 0.5, 1.0, 2.0] {
            for x in &fields {
                for which in [Subordination::SFromE, Subordination::RFromE] {
                    worst(&mut err, subordination_residual(&d, alpha, t, x, which)?);
                }
            }
        }
    }
    Ok(Outcome {
        pass: err <= 1e-5,
        detail: format!("max residual {err:.1e} (1e-5), S and R against integrals of E"),
    })
}

fn rates() -> Result<Outcome> {
    let d = build_domain(&DomainSpec::interval(1.0, 20000, 10000))?;
    let report = harness::run_rates(&ExperimentSpec::default(), &d)?;
    let worst_dev = report
        .results
        .iter()
        .map(|c| {
            (c["slope"].as_f64().unwrap_or(f64::NAN) - c["expected_slope"].as_f64().unwrap_or(0.0))
                .abs()
        })
        .fold(0.0, f64::max);
    let min_r2 = report
        .results
        .iter()
        .map(|c| c["r_squared"].as_f64().unwrap_or(f64::NAN))
        .fold(1.0, f64::min);
    Ok(Outcome {
        pass: report.fail_count == 0 && worst_dev <= 0.05 && min_r2 >= 0.99,
        detail: format!(
            "{}/{} cells, worst slope deviation {worst_dev:.3} (0.05), min r^2 {min_r2:.5} (0.99)",
            report.pass_count,
            report.pass_count + report.fail_count
        ),
    })
}

fn interval(modes: usize) -> Result<SpectralDomain> {
    build_domain(&DomainSpec::interval(PI, 4 * modes, modes))
}

fn linear_exactness() -> Result<Outcome> {
    let d = interval(12)?;
    let u0 = harness::seeded_field(&d, 1, 1.0);
    let u1 = harness::seeded_field(&d, 2, 1.0);
    let mut node_err: f64 = 0.0;
    for alpha in [1.25, 1.5, 1.75] {
        let cfg = SolverConfig::new(alpha, 2.0, 40);
        let tr = solve(&d, &cfg, &NonlinearitySpec::zero(), &u0, &u1)?;
        for (t, u) in tr.times.iter().zip(&tr.fields) {
            let exact = harness::linear_solution(&d, alpha, 0.0, *t, &u0, &u1)?;
            worst(&mut node_err, u.distance(&exact));
        }
    }
    let f = NonlinearitySpec::linear(0.5);
    let cfg = SolverConfig::new(1.5, 1.0, 16);
    let setup = Setup {
        domain: &d,
        solver: &cfg,
        nonlinearity: &f,
    };
    let report = harness::run_convergence(&ExperimentSpec::default(), &setup)?;
    let orders: Vec<f64> = report
        .results
        .iter()
        .filter_map(|r| r["order"].as_f64())
        .collect();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        pass: node_err <= 1e-8 && orders.len() == 3 && min_order >= 0.9,
        detail: format!(
            "f = 0 node error {node_err:.1e} (1e-8), orders {} (>= 0.9)",
            orders
                .iter()
                .map(|o| format!("{o:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    })
}

fn theorem_properties() -> Result<Outcome> {
    let d = interval(16)?;
    let power = NonlinearitySpec::power_abs(1.0, 1.5);

    // uniqueness surrogate
    let cfg = SolverConfig::new(1.5, 1.0, 20);
    let u0 = harness::seeded_field(&d, 3, 0.5);
    let u1 = harness::seeded_field(&d, 4, 0.2);
    let a = solve_picard_global(&d, &cfg, &power, &u0, &u1, 1.0, InitialGuess::Linear)?;
    let mut gap: f64 = 0.0;
    let mut unique = !a.diverged;
    for guess in [InitialGuess::Zero, InitialGuess::Frozen] {
        let b = solve_picard_global(&d, &cfg, &power, &u0, &u1, 1.0, guess)?;
        unique &= !b.diverged;
        for (x, y) in a.trajectory.fields.iter().zip(&b.trajectory.fields) {
            worst(&mut gap, x.distance(y));
        }
    }
    unique &= gap <= 10.0 * cfg.picard_tol;

    // continuous dependence
    let cfg = SolverConfig::new(1.5, 1.0, 50);
    let setup = Setup {
        domain: &d,
        solver: &cfg,
        nonlinearity: &power,
    };
    let dep = harness::run_dependence(
        &ExperimentSpec {
            seed: 7,
            ..Default::default()
        },
        &setup,
    )?;
    let spread = dep
        .results
        .iter()
        .map(|s| s["spread"].as_f64().unwrap_or(f64::NAN))
        .fold(0.0, f64::max);

    // regularization at (1.5, 0.25)
    let cfg = SolverConfig::new(1.5, 1.0, 32);
    let setup = Setup {
        domain: &d,
        solver: &cfg,
        nonlinearity: &power,
    };
    let spec = ExperimentSpec {
        thetas: vec![0.25],
        ..Default::default()
    };
    let reg = harness::run_regularization(&spec, &setup)?;
    let reg_ratio = reg
        .results
        .iter()
        .map(|s| s["final_ratio"].as_f64().unwrap_or(f64::NAN))
        .fold(0.0, f64::max);

    // blow-up ladder
    let cfg = SolverConfig::new(1.5, 4.0, 200);
    let setup = Setup {
        domain: &d,
        solver: &cfg,
        nonlinearity: &power,
    };
    let spec = ExperimentSpec {
        amplitudes: vec![0.0, 10.0, 20.0, 40.0, 80.0],
        ..Default::default()
    };
    let blow = harness::run_blowup(&spec, &setup)?;
    let largest_blows = blow.results[4]["blown"] == true;

    let pass = unique
        && dep.fail_count == 0
        && reg.fail_count == 0
        && reg_ratio < 0.1
        && blow.fail_count == 0
        && largest_blows;
    Ok(Outcome {
        pass,
        detail: format!(
            "guess gap {gap:.1e} (1e-11), dependence spread {:.2e} (0.2), regularization ratio {reg_ratio:.3} (0.1), blow-up checks {}/{} with t_cross(80) = {}",
            spread,
            blow.pass_count,
            blow.pass_count + blow.fail_count,
            blow.results[4]["t_cross"]
        ),
    })
}

fn admissibility_example() -> Result<Outcome> {
    let mut all_ok = true;
    let mut theta_exact = true;
    for i in 1..100 {
        let alpha = 1.0 + i as f64 / 100.0;
        let a = admissibility(3, 2.0, 1.5, alpha);
        all_ok &= a.ok;
        theta_exact &= a.theta_sup == 5.0 / 8.0;
    }
    let a = admissibility(3, 2.0, 1.5, 1.5);
    Ok(Outcome {
        pass: all_ok && theta_exact,
        detail: format!(
            "(N, q, rho) = (3, 2, 3/2): theta_sup = {} (0.625), accepted for all 99 sampled alpha: {all_ok}",
            a.theta_sup
        ),
    })
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>, u64);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "special-function identities", identities, 10),
        (2, "series/contour cross-validation", cross_validation, 20),
        (3, "multiplier consistency", multiplier_consistency, 30),
        (4, "subordination residuals", subordination, 20),
        (5, "rate recovery", rates, 60),
        (6, "linear exactness and convergence", linear_exactness, 60),
        (7, "theorem-level properties", theorem_properties, 120),
        (8, "admissibility arithmetic", admissibility_example, 1),
    ];
    let mut failures = 0;
    for (n, name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {n} [{}] {name}: {detail}; {:.2}s (budget {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
