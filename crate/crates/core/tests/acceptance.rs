//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Runs without the libtest harness so the lines are
//! always printed.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relucert::bounds::{crown_propagate, interval_propagate, zonotope_propagate, AlphaPolicy};
use relucert::complete::{msr_bounds, verify_complete, BabConfig, MilpModel, VerificationStatus, STRICT_MARGIN};
use relucert::explain::{
    brute_force_minimum, check_explanation, input_gradient, integrated_gradients, ore_greedy, ExplainConfig,
};
use relucert::geometry::{lp_solve, HalfspacePolytope, Sense, VolumeMethod};
use relucert::model::{running_example, Activation, Layer};
use relucert::preimage::{
    linear_regions, preimage_exact, preimage_under_approx, verify_quantitative, ApproxConfig, QuantitativeStatus,
    DEFAULT_PREIMAGE_CAP,
};
use relucert::testing::{random_problem, NetShape};
use relucert::{InputBox, Network, OutputPolytope, QuantitativeSpec};

type Check = Result<String, String>;

fn square() -> InputBox {
    InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()
}

fn y1_ge_y2() -> OutputPolytope {
    OutputPolytope::from_rows(&[vec![-1.0, 1.0]], &[0.0]).unwrap()
}

/// Best of a few runs, so one cold cache does not decide a runtime bound.
fn fastest<T>(runs: usize, mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut out = None;
    for _ in 0..runs {
        let t = Instant::now();
        let v = f();
        best = best.min(t.elapsed());
        out = Some(v);
    }
    (out.unwrap(), best)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn criterion_1() -> Check {
    let net = running_example();
    let (res, took) = fastest(20, || crown_propagate(&net, &square(), &AlphaPolicy::Zero).unwrap());
    let (l3, u3) = res.bounds.layer(1);
    let mut problems = Vec::new();
    let expect = [
        ("y1 lower", res.lower[0], 0.0),
        ("y1 upper", res.upper[0], 7.0),
        ("y2 lower", res.lower[1], -17.4),
        ("y2 upper", res.upper[1], 0.0),
        ("z3 lower", l3[0], 0.0),
        ("z3 upper", u3[0], 7.0),
        ("z4 lower", l3[1], -2.0),
        ("z4 upper", u3[1], 4.0),
    ];
    for (name, got, want) in expect {
        if !close(got, want, 1e-9) {
            problems.push(format!("{name} = {got} (expected {want})"));
        }
    }
    if took >= Duration::from_millis(1) {
        problems.push(format!("took {took:?}"));
    }
    if problems.is_empty() {
        Ok(format!("y1 in [0, 7], y2 in [-17.4, 0] in {took:?}"))
    } else {
        Err(problems.join("; "))
    }
}

fn criterion_2() -> Check {
    let net = running_example();
    let (v, took) = fastest(5, || {
        verify_complete(&net, &square(), &y1_ge_y2(), &BabConfig::default()).unwrap()
    });
    ensure(
        v.status == VerificationStatus::Verified,
        format!("status {:?}", v.status),
    )?;
    ensure(took < Duration::from_millis(10), format!("took {took:?}"))?;
    let bounds = crown_propagate(&net, &square(), &AlphaPolicy::Zero).unwrap().bounds;
    let model = MilpModel::build(&net, &square(), &y1_ge_y2(), &bounds).unwrap();
    let mut bins = model.binaries();
    bins.sort();
    ensure(bins == ["d1", "d2", "d4"], format!("binaries {bins:?}"))?;
    let lp = model.to_lp_string();
    ensure(
        lp.contains(" relu3: z3 - zh3 = 0"),
        "stable equality for neuron 3 missing",
    )?;
    let maxima = model.row_maxima_by_enumeration(3).unwrap();
    ensure(
        maxima[0].is_some_and(|m| m <= 1e-9),
        format!("enumerated maximum {maxima:?} would admit a violation"),
    )?;
    Ok(format!("Verified in {took:?}; binaries {bins:?}"))
}

/// `row ≤ 0` equals `paper_row ≥ 0` up to positive scaling.
fn matches_reversed(row: &[f64], paper: [f64; 2]) -> bool {
    let (a, b) = (-row[0], -row[1]);
    let scale = if paper[0] != 0.0 { a / paper[0] } else { b / paper[1] };
    scale > 0.0 && close(a, scale * paper[0], 1e-9) && close(b, scale * paper[1], 1e-9)
}

fn criterion_3() -> Check {
    let net = running_example();
    let (mut pre, took) = fastest(3, || {
        preimage_exact(&net, &square(), &y1_ge_y2(), DEFAULT_PREIMAGE_CAP).unwrap()
    });
    ensure(
        pre.stages[1].len() == 4,
        format!("{} hidden polytopes", pre.stages[1].len()),
    )?;
    ensure(
        pre.polytopes.len() == 16,
        format!("{} input polytopes", pre.polytopes.len()),
    )?;
    let both_active = pre.stages[1]
        .iter()
        .find(|p| p.pattern.tag(&net).ends_with("|11"))
        .ok_or("no active-active hidden piece")?;
    let rows = both_active.polytope.rows();
    for paper in [[2.0, 11.0], [1.0, 3.0], [-1.0, 2.0]] {
        ensure(
            rows.iter().any(|(r, rhs)| *rhs == 0.0 && matches_reversed(r, paper)),
            format!("row {paper:?} missing from {rows:?}"),
        )?;
    }
    let start = Instant::now();
    pre.compute_volumes(VolumeMethod::Exact2D).unwrap();
    let vol = pre.union_volume(VolumeMethod::Exact2D).unwrap();
    let total = took + start.elapsed();
    ensure(close(vol, 4.0, 1e-6), format!("union volume {vol}"))?;
    ensure(total < Duration::from_millis(100), format!("took {total:?}"))?;
    Ok(format!("4 hidden, 16 input polytopes, volume {vol:.9}, {total:?}"))
}

fn criterion_4() -> Check {
    let net = running_example();
    let start = Instant::now();
    let approx = preimage_under_approx(&net, &square(), &y1_ge_y2(), &ApproxConfig::default()).unwrap();
    let spec = QuantitativeSpec::new(square(), y1_ge_y2(), 0.9).unwrap();
    let verdict = verify_quantitative(&net, &spec, &ApproxConfig::default()).unwrap();
    let took = start.elapsed();
    ensure(approx.splits.len() == 1, format!("{} splits", approx.splits.len()))?;
    ensure(
        approx.splits[0].dim == 0,
        format!("split on x{}", approx.splits[0].dim + 1),
    )?;
    ensure(approx.coverage >= 0.9, format!("coverage {}", approx.coverage))?;
    ensure(
        verdict.status == QuantitativeStatus::Holds,
        format!("{:?}", verdict.status),
    )?;
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!(
        "one split on x1, coverage {:.4} (reference 0.943, difference {:+.4}), Holds in {took:?}",
        approx.coverage,
        approx.coverage - 0.943
    ))
}

fn random_suite() -> Vec<(Network, InputBox, OutputPolytope)> {
    (0..50)
        .map(|s| random_problem(1000 + s, &NetShape::default(), 12))
        .collect()
}

/// Exhaustive oracle: maximum of the single post row over every linear
/// region of the box.
fn oracle_max(net: &Network, input: &InputBox, post: &OutputPolytope) -> f64 {
    let (a, b) = post.row(0);
    let frame = input.to_polytope();
    let mut best = f64::NEG_INFINITY;
    for region in linear_regions(net, input, 12).unwrap() {
        let poly: HalfspacePolytope = region.polytope.intersect(&frame);
        let obj: Vec<f64> = (0..net.input_dim()).map(|i| a.dot(&region.weight.column(i))).collect();
        let lp = lp_solve(&poly, &obj, Sense::Max).unwrap();
        if let Some(v) = lp.optimum {
            best = best.max(v + a.dot(&region.bias));
        }
    }
    best - b
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let mut agree = 0;
    let mut issues = Vec::new();
    let (mut verified, mut falsified) = (0, 0);
    for (k, (net, input, post)) in random_suite().iter().enumerate() {
        let v = verify_complete(net, input, post, &BabConfig::default()).unwrap();
        let gap = oracle_max(net, input, post);
        let ok = match v.status {
            VerificationStatus::Verified => {
                verified += 1;
                gap <= 1e-9
            }
            VerificationStatus::Falsified => {
                falsified += 1;
                let w = v.witness.as_ref().unwrap();
                let valid = input.contains(w, 0.0) && post.violation(&net.forward(w).unwrap()) > 0.0;
                if !valid {
                    issues.push(format!("net {k}: witness does not re-validate"));
                }
                valid && gap > 0.0
            }
            VerificationStatus::Unknown => false,
        };
        if ok {
            agree += 1;
        } else {
            issues.push(format!("net {k}: {:?} but oracle gap {gap:e}", v.status));
        }
    }
    let took = start.elapsed();
    ensure(
        agree == 50 && issues.is_empty(),
        format!("{agree}/50 agree; {}", issues.join("; ")),
    )?;
    ensure(took < Duration::from_secs(60), format!("took {took:?}"))?;
    Ok(format!(
        "50/50 agree ({verified} verified, {falsified} falsified) in {took:?}"
    ))
}

fn criterion_6() -> Check {
    let mut worst = 0.0f64;
    let mut wider = 0.0f64;
    for (k, (net, input, _)) in random_suite().iter().enumerate() {
        let ibp = interval_propagate(net, input).unwrap();
        let zono = zonotope_propagate(net, input).unwrap();
        let crown = crown_propagate(net, input, &AlphaPolicy::Zero).unwrap();
        for j in 0..net.output_dim() {
            wider = wider
                .max(ibp.lower[j] - crown.lower[j])
                .max(crown.upper[j] - ibp.upper[j]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..net.input_dim())
                .map(|i| rng.random_range(input.lower[i]..=input.upper[i]))
                .collect();
            let y = net.forward(&x).unwrap();
            for (j, v) in y.iter().enumerate() {
                for (lo, hi) in [
                    (&ibp.lower, &ibp.upper),
                    (&zono.lower, &zono.upper),
                    (&crown.lower, &crown.upper),
                ] {
                    worst = worst.max(lo[j] - v).max(v - hi[j]);
                }
            }
        }
    }
    ensure(worst <= 1e-7, format!("sample escapes a bound by {worst:e}"))?;
    ensure(
        wider <= 1e-7,
        format!("linear bounds wider than intervals by {wider:e}"),
    )?;
    Ok(format!("50,000 samples inside all bounds (worst {worst:e})"))
}

fn criterion_7() -> Check {
    let shape = NetShape {
        input_dims: (2, 2),
        ..NetShape::default()
    };
    let mut approx_points = 0;
    for seed in 0..10 {
        let (net, input, post) = random_problem(2000 + seed, &shape, 12);
        let pre = preimage_exact(&net, &input, &post, DEFAULT_PREIMAGE_CAP).map_err(|e| e.to_string())?;
        let mut mismatches = 0;
        for i in 0..=200 {
            for j in 0..=200 {
                let x = [
                    input.lower[0] + (input.upper[0] - input.lower[0]) * i as f64 / 200.0,
                    input.lower[1] + (input.upper[1] - input.lower[1]) * j as f64 / 200.0,
                ];
                let viol = post.violation(&net.forward(&x).unwrap());
                if viol.abs() <= 1e-6 {
                    continue;
                }
                if (viol < 0.0) != pre.contains(&x, 1e-9) {
                    mismatches += 1;
                }
            }
        }
        ensure(mismatches == 0, format!("net {seed}: {mismatches} grid mismatches"))?;

        let approx = preimage_under_approx(&net, &input, &post, &ApproxConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for cell in &approx.subdomains {
            let d = &cell.domain;
            for _ in 0..2000 {
                let x: Vec<f64> = (0..2).map(|i| rng.random_range(d.lower[i]..=d.upper[i])).collect();
                if cell.polytope.contains(&x, 0.0) {
                    approx_points += 1;
                    let viol = post.violation(&net.forward(&x).unwrap());
                    ensure(
                        viol <= 1e-7,
                        format!("net {seed}: approx point {x:?} violates by {viol:e}"),
                    )?;
                }
            }
        }
    }
    Ok(format!(
        "10 nets x 201^2 grid, zero mismatches; {approx_points} under-approximation samples satisfy the post"
    ))
}

fn criterion_8() -> Check {
    let net = running_example();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let base = [0.0, 0.0];
        for t in 0..2 {
            let ig = integrated_gradients(&net, &x, &base, t, 4096).unwrap();
            let gap = net.forward(&x).unwrap()[t] - net.forward(&base).unwrap()[t];
            worst = worst.max((ig.scores.iter().sum::<f64>() - gap).abs());
        }
    }
    ensure(worst <= 1e-6, format!("completeness error {worst:e}"))?;

    let affine = Network::new(
        3,
        vec![Layer::new(
            ndarray::array![[1.0, 2.0, -0.3], [0.7, -1.1, 0.0]],
            ndarray::array![0.25, -1.0],
            Activation::Identity,
        )],
    )
    .unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let base: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = integrated_gradients(&affine, &x, &base, 0, 1).unwrap();
        let b = integrated_gradients(&affine, &x, &base, 0, 1024).unwrap();
        ensure(
            a.scores == b.scores,
            format!("affine IG differs: {:?} vs {:?}", a.scores, b.scores),
        )?;
    }

    let mut fd_checked = 0;
    let mut fd_worst: f64 = 0.0;
    for seed in 0..20 {
        let (net, input, _) = random_problem(3000 + seed, &NetShape::default(), 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x: Vec<f64> = (0..net.input_dim())
                .map(|i| rng.random_range(input.lower[i]..=input.upper[i]))
                .collect();
            let near_kink = net
                .pre_activations(&x)
                .unwrap()
                .iter()
                .zip(net.layers())
                .any(|(p, l)| l.activation == Activation::Relu && p.iter().any(|v| v.abs() < 1e-3));
            if near_kink {
                continue;
            }
            let h = 1e-7;
            for t in 0..net.output_dim() {
                let g = input_gradient(&net, &x, t).unwrap();
                for i in 0..x.len() {
                    let (mut p, mut m) = (x.clone(), x.clone());
                    p[i] += h;
                    m[i] -= h;
                    let fd = (net.forward(&p).unwrap()[t] - net.forward(&m).unwrap()[t]) / (2.0 * h);
                    fd_worst = fd_worst.max((fd - g[i]).abs());
                }
            }
            fd_checked += 1;
        }
    }
    ensure(fd_worst <= 1e-5, format!("finite differences off by {fd_worst:e}"))?;
    Ok(format!(
        "completeness error {worst:.1e}; affine IG step-independent; {fd_checked} gradient checks within {fd_worst:.1e}"
    ))
}

fn criterion_9() -> Check {
    let net = running_example();
    let x = [0.5, 0.5];
    let r = msr_bounds(&net, &x, 0, 1.0, 1e-3, &BabConfig::default()).unwrap();
    // float slack on the grid spacing k·tol
    let tol = 1e-3 + 1e-12;
    ensure(
        r.lower <= r.upper && r.upper - r.lower <= tol,
        format!("bracket [{}, {}]", r.lower, r.upper),
    )?;
    ensure(
        close(r.lower, 0.5, tol) && close(r.upper, 0.5, tol),
        format!("bracket [{}, {}]", r.lower, r.upper),
    )?;

    // smallest ℓ∞ distance to a grid point where label 0 loses its margin
    let n = 2000;
    let mut oracle = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let p = [
                x[0] - 1.0 + 2.0 * i as f64 / n as f64,
                x[1] - 1.0 + 2.0 * j as f64 / n as f64,
            ];
            let y = net.forward(&p).unwrap();
            if y[0] - y[1] < STRICT_MARGIN {
                oracle = oracle.min((p[0] - x[0]).abs().max((p[1] - x[1]).abs()));
            }
        }
    }
    let step = 2.0 / n as f64;
    ensure(
        oracle >= r.lower - 1e-12 && oracle <= r.upper + step,
        format!("grid oracle {oracle} outside [{}, {}]", r.lower, r.upper),
    )?;
    Ok(format!("bracket [{}, {}], grid oracle {oracle}", r.lower, r.upper))
}

fn criterion_10() -> Check {
    let shape = NetShape {
        input_dims: (2, 4),
        ..NetShape::default()
    };
    let config = ExplainConfig::default();
    let mut total_cost = 0;
    let mut coincide = 0;
    for seed in 0..20 {
        let (net, input, _) = random_problem(4000 + seed, &shape, 12);
        let x = input.center();
        let label = net.predicted_label(&x).unwrap();
        let eps = 0.5 * (input.upper[0] - input.lower[0]);
        let ig = integrated_gradients(&net, &x, &vec![0.0; x.len()], label, 512).unwrap();
        let e = ore_greedy(&net, &x, eps, label, &ig.scores, &config).unwrap();
        ensure(e.verified, format!("net {seed}: explanation not verified"))?;
        ensure(
            check_explanation(&net, &x, eps, label, &e.fixed_features, &config).unwrap(),
            format!("net {seed}: explanation fails re-check"),
        )?;
        for &i in &e.fixed_features {
            let rest: Vec<usize> = e.fixed_features.iter().copied().filter(|&j| j != i).collect();
            ensure(
                !check_explanation(&net, &x, eps, label, &rest, &config).unwrap(),
                format!("net {seed}: feature {i} could be freed"),
            )?;
        }
        let best = brute_force_minimum(&net, &x, eps, label, &config)
            .unwrap()
            .ok_or(format!("net {seed}: no sufficient subset"))?;
        ensure(
            e.fixed_features.len() >= best.len(),
            format!("net {seed}: greedy beat exhaustive search"),
        )?;
        if e.fixed_features.len() == best.len() {
            coincide += 1;
        }
        total_cost += e.fixed_features.len();
    }
    Ok(format!(
        "20 nets sound and ordered-minimal; greedy matches the exhaustive minimum on {coincide}/20 (total cost {total_cost})"
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 10] = [
        ("linear bounds on the running example", criterion_1),
        ("complete verification and MILP export", criterion_2),
        ("exact preimage", criterion_3),
        ("preimage under-approximation", criterion_4),
        ("complete verification vs pattern enumeration", criterion_5),
        ("soundness of forward bounds", criterion_6),
        ("preimage grid oracle", criterion_7),
        ("integrated gradients", criterion_8),
        ("maximal safe radius", criterion_9),
        ("robust explanations", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
