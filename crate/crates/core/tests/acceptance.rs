//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bpb_core::ck_cs::{correct_ck_cs, eta, flatten_peak, jw_step, CkCsOptions};
use bpb_core::harness::{
    gen_instance, inject_fault, run_and_verify, sweep_eta, verify, Fault, Instance, InstanceSpec, Pipeline,
    RunOptions, SweepConfig,
};
use bpb_core::operator::{GeneralOperator, NormKind};
use bpb_core::partition::{build_partition, PartitionOptions};
use bpb_core::predual::{correct_predual, scalar_bpb, PredualOptions};
use bpb_core::spaces::{Func, Kernel};
use bpb_core::ucx::{correct_ucx, UcxOptions, UcxParams};
use num::{BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect()
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn tv(row: &[f64]) -> f64 {
    row.iter().fold(0.0, |a, v| a + v.abs())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn max_tv(rows: &[Vec<f64>]) -> f64 {
    rows.iter().fold(0.0, |a: f64, r| a.max(tv(r)))
}

fn pnorm(p: f64, x: &[f64]) -> f64 {
    if p.is_infinite() {
        sup(x)
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Max of `||A σ||_2` over every sign vector, enumerated from scratch.
fn enumerate_sup_to_euclid(m: &[Vec<f64>]) -> f64 {
    let n = m[0].len();
    (0u32..1 << n)
        .map(|mask| {
            let sigma: Vec<f64> = (0..n).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
            m.iter().map(|r| dot(r, &sigma).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

fn sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u - v).collect()).collect()
}

/// Criterion 1: ck-cs certificates at slack 0.9 ε²/432.
fn ck_cs_eta_reproduction() -> String {
    let mut r = rng(1);
    let opts = RunOptions::default();
    let mut count = 0;
    for &epsilon in &[0.25, 0.5, 1.0] {
        for trial in 0..200 {
            let spec = InstanceSpec {
                pipeline: Pipeline::CkCs,
                source_dim: r.random_range(2..=8),
                target_dim: r.random_range(1..=8),
                slack: 0.9 * epsilon * epsilon / 432.0,
                seed: r.random(),
                source_norm: None,
            };
            let inst = gen_instance(&spec).expect("instance");
            let (sol, report) = run_and_verify(&inst, epsilon, &opts).expect("pipeline");
            assert!(report.ok, "eps {epsilon} trial {trial}: {:?}", report.failures);
            let Instance::CkCs(ck) = &inst else { unreachable!() };
            let bpb_core::harness::SolvedOperator::Kernel(s) = &sol.operator else { unreachable!() };
            let w = &sol.certificate.witness;
            let s_norm = max_tv(s.rows());
            let attained = s.rows().iter().fold(0.0, |a: f64, row| a.max(dot(row, w).abs()));
            assert!((s_norm - 1.0).abs() <= TOL && (attained - s_norm).abs() <= TOL);
            assert!(sup(&w.iter().zip(ck.f0.values()).map(|(a, b)| a - b).collect::<Vec<_>>()) < epsilon);
            assert!(max_tv(&sub(s.rows(), ck.kernel.rows())) < epsilon);
            count += 1;
        }
    }
    format!("{count} certificates verified")
}

/// Random normalised kernel whose peak row `s0` carries near-zero mass on a
/// random subset, with `f0` pairing to exactly `1 - loss` against it.
fn flatten_instance(r: &mut ChaCha8Rng, loss_of: impl Fn(f64) -> f64) -> Option<(Kernel, usize, Func, f64)> {
    let n = r.random_range(2..=8);
    let m = r.random_range(1..=8);
    let delta: f64 = r.random_range(0.05..0.95);
    let mut rows = uniform(r, m, n);
    let s0 = r.random_range(0..m);
    let light: Vec<bool> = (0..n).map(|t| t > 0 && r.random_bool(0.4)).collect();
    for t in 0..n {
        if light[t] {
            rows[s0][t] *= 1e-3;
        }
    }
    let peak = tv(&rows[s0]);
    for s in 0..m {
        let k = if s == s0 { peak } else { tv(&rows[s]) / (peak * r.random_range(0.3..1.0)) * peak };
        rows[s].iter_mut().for_each(|v| *v /= k);
    }
    let row = rows[s0].clone();
    let target = loss_of(delta);
    let mut f0: Vec<f64> = row.iter().map(|&v| sgn(v)).collect();
    let mut used = tv(&row) - 1.0 + target;
    for t in 0..n {
        if light[t] {
            let d: f64 = r.random_range(0.0..2.0);
            if row[t].abs() * d < used {
                f0[t] = sgn(row[t]) * (1.0 - d);
                used -= row[t].abs() * d;
            }
        }
    }
    let k = (1..n).find(|&t| !light[t]).unwrap_or(0);
    if k == 0 || used < 0.0 || row[k].abs() == 0.0 || used / row[k].abs() > 2.0 {
        return None;
    }
    f0[k] = sgn(row[k]) * (1.0 - used / row[k].abs());
    let kernel = Kernel::new(rows).ok()?;
    Some((kernel, s0, Func::new(f0).ok()?, delta))
}

/// Criterion 2: flatten_peak conditions i)–v), evaluated directly.
fn flatten_conditions() -> String {
    let mut r = rng(2);
    let mut runs = 0;
    let mut nonempty_v = 0;
    while runs < 500 {
        let Some((mu, s0, f0, delta)) = flatten_instance(&mut r, |d| d * d / 24.0) else { continue };
        if (mu.norm() - 1.0).abs() > TOL || f0.sup_norm() != 1.0 {
            continue;
        }
        if dot(f0.values(), mu.row(s0)) <= 1.0 - delta * delta / 12.0 {
            continue;
        }
        let out = flatten_peak(&mu, s0, &f0, delta, TOL).expect("flatten");
        let h0 = out.h0.values();
        let v: Vec<bool> = (0..mu.source_dim()).map(|t| out.v_set.contains(&t)).collect();
        let new_norm = max_tv(out.mu_prime.rows());
        for &s in &out.u_set {
            let row = out.mu_prime.row(s);
            assert!((0..row.len()).all(|t| !v[t] || row[t] == 0.0), "i) mass on V");
            assert!(dot(h0, row) > new_norm - delta, "ii)");
        }
        let moved = sup(&h0.iter().zip(f0.values()).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(moved < delta, "iii)");
        assert!(sup(h0) == 1.0, "iv) norm");
        assert!((0..h0.len()).all(|t| v[t] || h0[t].abs() == 1.0), "iv) modulus");
        assert!(max_tv(&sub(out.mu_prime.rows(), mu.rows())) < delta, "v)");
        assert!(out.u_set.contains(&s0));
        nonempty_v += usize::from(!out.v_set.is_empty());
        runs += 1;
    }
    format!("{runs} runs, {nonempty_v} with non-empty V")
}

/// Criterion 3: jw_step conclusions i)–iii) and geometric defect decay.
fn jw_contract() -> String {
    let mut r = rng(3);
    let mut runs = 0;
    while runs < 500 {
        let n = r.random_range(2..=8);
        let m = r.random_range(1..=8);
        let v: Vec<bool> = (0..n).map(|t| t > 0 && r.random_bool(0.3)).collect();
        let h0: Vec<f64> = (0..n)
            .map(|t| if v[t] { r.random_range(-1.0..=1.0) } else { sgn(r.random_range(-1.0..1.0)) })
            .collect();
        let u: Vec<usize> = (0..m).filter(|_| r.random_bool(0.6)).collect();
        if u.is_empty() {
            continue;
        }
        let mut rows = uniform(&mut r, m, n);
        for &s in &u {
            (0..n).filter(|&t| v[t]).for_each(|t| rows[s][t] = 0.0);
        }
        // one row of U close to alignment with h0
        let s_a = u[r.random_range(0..u.len())];
        for t in 0..n {
            if !v[t] {
                rows[s_a][t] = h0[t] * rows[s_a][t].abs() * if r.random_bool(0.2) { -0.1 } else { 1.0 };
            }
        }
        let top = max_tv(&rows);
        rows.iter_mut().for_each(|row| row.iter_mut().for_each(|x| *x /= top));
        let norm = max_tv(&rows);
        let best = u.iter().map(|&s| dot(&h0, &rows[s])).fold(f64::NEG_INFINITY, f64::max);
        let defect = norm - best;
        let delta = if defect > 0.0 { defect / r.random_range(0.3..1.0) } else { 0.1 };
        let rate = r.random_range(0.67..0.99);
        let v_set: Vec<usize> = (0..n).filter(|&t| v[t]).collect();
        let mu = Kernel::new(rows.clone()).unwrap();
        let h = Func::new(h0.clone()).unwrap();
        let step = jw_step(&mu, &u, &v_set, &h, delta, rate).expect("jw_step");
        let out = step.mu_prime.rows();
        assert!(u.contains(&step.s1));
        for &s in &u {
            assert!(v_set.iter().all(|&t| out[s][t] == 0.0), "i)");
        }
        assert!(dot(&h0, &out[step.s1]) >= max_tv(out) - rate * delta, "ii)");
        assert!(max_tv(&sub(out, &rows)) <= rate * delta, "iii)");
        runs += 1;
    }

    let mut decays = 0;
    let mut r = rng(33);
    for _ in 0..100 {
        let epsilon = [0.25, 0.5, 1.0][r.random_range(0..3)];
        let spec = InstanceSpec {
            pipeline: Pipeline::CkCs,
            source_dim: r.random_range(2..=8),
            target_dim: r.random_range(1..=8),
            slack: r.random_range(0.0..0.99) * eta(epsilon),
            seed: r.random(),
            source_norm: None,
        };
        let Instance::CkCs(inst) = gen_instance(&spec).unwrap() else { unreachable!() };
        let res = correct_ck_cs(&inst.kernel, &inst.f0, epsilon, &CkCsOptions::default()).unwrap();
        let rate = res.schedule.r;
        assert!(res.defects[0] <= res.delta);
        for (k, d) in res.defects.iter().enumerate() {
            assert!(*d <= res.delta * rate.powi(k as i32), "defect {d} at step {k}");
        }
        assert!(res.final_defect <= 1e-12);
        assert!(res.iterate_movement() <= res.delta / (1.0 - rate));
        decays += res.defects.len();
    }
    format!("{runs} steps checked, {decays} iterates with defect <= r^n delta")
}

fn exact_projector(weights: &[f64], blocks: &[Vec<usize>], n: usize) -> Vec<Vec<BigRational>> {
    let w: Vec<BigRational> = weights.iter().map(|&x| BigRational::from_float(x).unwrap()).collect();
    let mut p = vec![vec![BigRational::zero(); n]; n];
    for b in blocks {
        let total = b.iter().fold(BigRational::zero(), |a, &s| a + &w[s]);
        for &t in b {
            for &s in b {
                p[t][s] = &w[s] / &total;
            }
        }
    }
    p
}

/// Criterion 4: partition blocks, exact idempotence, ||P|| = 1, ||T - TP|| < ε.
fn partition_properties() -> String {
    let mut r = rng(4);
    let epsilon = 0.3;
    let mut blocks_total = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=8);
        let p = r.random_range(1..=3);
        let raw = uniform(&mut r, p, n);
        let norm = enumerate_sup_to_euclid(&raw);
        let rows: Vec<Vec<f64>> = raw.iter().map(|row| row.iter().map(|v| v / norm).collect()).collect();
        let t = GeneralOperator::new(rows.clone(), NormKind::Sup, NormKind::Euclid).unwrap();
        let f0 = Func::new((0..n).map(|_| r.random_range(-1.0..=1.0)).collect()).unwrap();
        let (proj, _) = build_partition(&t, &f0, epsilon, &PartitionOptions::default()).expect("partition");
        for b in proj.blocks() {
            let vals: Vec<f64> = b.iter().map(|&s| f0.values()[s]).collect();
            let osc = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(osc < epsilon);
        }
        let exact = exact_projector(proj.weight().masses(), proj.blocks(), n);
        for i in 0..n {
            for j in 0..n {
                let sq = (0..n).fold(BigRational::zero(), |a, k| a + &exact[i][k] * &exact[k][j]);
                assert_eq!(sq, exact[i][j], "P∘P != P");
            }
        }
        let covered: Vec<bool> = (0..n).map(|s| proj.blocks().iter().any(|b| b.contains(&s))).collect();
        for (i, row) in exact.iter().enumerate() {
            let sum = row.iter().fold(BigRational::zero(), |a, x| a + x);
            assert!(if covered[i] { sum.is_one() } else { sum.is_zero() });
        }
        let pm = proj.matrix();
        let p_norm = pm.iter().fold(0.0, |a: f64, row| a.max(tv(row)));
        assert!((p_norm - 1.0).abs() <= 1e-12, "||P|| = {p_norm}");
        let tp: Vec<Vec<f64>> =
            rows.iter().map(|row| (0..n).map(|j| (0..n).fold(0.0, |a, k| a + row[k] * pm[k][j])).collect()).collect();
        let residual = enumerate_sup_to_euclid(&sub(&rows, &tp));
        assert!(residual < epsilon, "||T - TP|| = {residual}");
        blocks_total += proj.len();
    }
    format!("200 partitions, {blocks_total} blocks")
}

/// Criterion 5: ucx certificates at slack α/2 and the chain bound.
fn ucx_pipeline() -> String {
    let mut r = rng(5);
    let opts = RunOptions::default();
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let epsilon = [0.3, 0.6, 0.9][trial % 3];
        let params = UcxParams::new(epsilon, opts.ucx.modulus).unwrap();
        let spec = InstanceSpec {
            pipeline: Pipeline::Ucx,
            source_dim: r.random_range(2..=8),
            target_dim: r.random_range(1..=3),
            slack: params.alpha / 2.0,
            seed: r.random(),
            source_norm: None,
        };
        let inst = gen_instance(&spec).expect("instance");
        let (_, report) = run_and_verify(&inst, epsilon, &opts).expect("pipeline");
        assert!(report.ok, "trial {trial}: {:?}", report.failures);
        let Instance::Ucx(u) = &inst else { unreachable!() };
        let res = correct_ucx(&u.operator, &u.f0, epsilon, &UcxOptions::default()).unwrap();
        let l = res.ledger;
        assert!(params.chain_bound() < epsilon);
        assert!(l.v_minus_u < params.delta && l.tp_minus_t < params.alpha);
        let sum = l.v_minus_u + l.u_minus_u1 + l.tp_minus_t;
        assert!(sum < l.chain_bound, "ledger {sum} vs {}", l.chain_bound);
        let s_minus_t = enumerate_sup_to_euclid(&sub(res.s.matrix(), u.operator.matrix()));
        assert!(s_minus_t <= sum + 1e-12);
        worst = worst.max(s_minus_t / epsilon);
    }
    format!("200 certificates, max ||S-T||/eps = {worst:.2e}")
}

/// Criterion 6: predual certificates at slack η(ε)/2.
fn predual_pipeline() -> String {
    let mut r = rng(6);
    let opts = RunOptions::default();
    let norms = [NormKind::p(1.0).unwrap(), NormKind::Euclid, NormKind::p(3.0).unwrap(), NormKind::Sup];
    for trial in 0..200 {
        let epsilon = [0.3, 0.5, 0.8][trial % 3];
        let eta = (epsilon / 4.0f64).min(0.25 * (epsilon / 2.0) * (epsilon / 2.0));
        let spec = InstanceSpec {
            pipeline: Pipeline::Predual,
            source_dim: r.random_range(2..=4),
            target_dim: 6,
            slack: eta / 2.0,
            seed: r.random(),
            source_norm: Some(norms[trial % 4]),
        };
        let inst = gen_instance(&spec).expect("instance");
        let (_, report) = run_and_verify(&inst, epsilon, &opts).expect("pipeline");
        assert!(report.ok, "trial {trial}: {:?}", report.failures);
        let Instance::Predual(p) = &inst else { unreachable!() };
        let res = correct_predual(&p.operator, &p.x0, epsilon, &PredualOptions::default()).unwrap();
        assert!(res.ledger.pt_minus_t < 4.0 * res.params.delta);
        assert!(res.s.matrix()[res.m..].iter().all(|row| row.iter().all(|&v| v == 0.0)));
        let sum = res.ledger.v_minus_r + res.ledger.r_minus_pt + res.ledger.pt_minus_t;
        assert!(res.certificate.dist_operator <= sum + 1e-12 && sum < res.ledger.bound);
        assert!(res.ledger.bound < epsilon);
    }
    "200 certificates across p in {1, 2, 3, inf}".into()
}

/// Criterion 7: scalar bounds ||y - x|| < ε + ε² and ||y* - x*|| < ε.
fn scalar_kernel() -> String {
    let mut r = rng(7);
    let mut runs = 0;
    while runs < 500 {
        let p = [1.5, 2.0, 3.0][runs % 3];
        let q = p / (p - 1.0);
        let epsilon: f64 = [0.1, 0.2, 0.3, 0.45][r.random_range(0..4)];
        let d = r.random_range(2..=5);
        let raw: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..=1.0)).collect();
        let x_star: Vec<f64> = raw.iter().map(|v| v / pnorm(q, &raw)).collect();
        // attaining point of x*, pushed off and shrunk into the ball
        let att: Vec<f64> = x_star.iter().map(|v| v.signum() * v.abs().powf(q - 1.0)).collect();
        let tau = r.random_range(0.0..0.5) * epsilon;
        let x: Vec<f64> = att.iter().map(|v| v + tau * r.random_range(-1.0..=1.0)).collect();
        let shrink = 1.0 - r.random_range(0.0..0.3) * epsilon * epsilon;
        let x0: Vec<f64> = x.iter().map(|v| v / pnorm(p, &x) * shrink).collect();
        if (1.0 - dot(&x_star, &x0)).abs() >= epsilon * epsilon / 2.0 {
            continue;
        }
        let norm = NormKind::p(p).unwrap();
        let res = scalar_bpb(norm, &x_star, &x0, epsilon, TOL).expect("scalar");
        let dy: Vec<f64> = res.y.iter().zip(&x0).map(|(a, b)| a - b).collect();
        let ds: Vec<f64> = res.y_star.iter().zip(&x_star).map(|(a, b)| a - b).collect();
        assert!(pnorm(p, &dy) < epsilon + epsilon * epsilon);
        assert!(pnorm(q, &ds) < epsilon);
        assert!((dot(&res.y_star, &res.y) - 1.0).abs() <= TOL);
        assert!((pnorm(p, &res.y) - 1.0).abs() <= TOL && (pnorm(q, &res.y_star) - 1.0).abs() <= TOL);
        runs += 1;
    }
    format!("{runs} runs")
}

/// Criterion 8: kernel_norm equals sign-vector enumeration exactly.
fn oracle_equivalence() -> String {
    let mut r = rng(8);
    for _ in 0..500 {
        let n = r.random_range(1..=10);
        let m = r.random_range(1..=6);
        let rows = uniform(&mut r, m, n);
        let k = Kernel::new(rows.clone()).unwrap();
        let mut best: f64 = 0.0;
        for mask in 0u32..1 << n {
            let sigma: Vec<f64> = (0..n).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
            for row in &rows {
                best = best.max(dot(row, &sigma).abs());
            }
        }
        assert_eq!(k.norm(), best);
        assert_eq!(GeneralOperator::from_kernel(&k).oracle_norm().unwrap().0, best);
    }
    "500 kernels".into()
}

/// Criterion 9: ck-cs success rate 100% at every dimension below η(ε).
fn dimension_independence() -> String {
    let dims: Vec<(usize, usize)> = [2, 4, 8, 12].iter().flat_map(|&n| [2, 4, 8, 12].map(|m| (n, m))).collect();
    let report = sweep_eta(&SweepConfig {
        pipeline: Pipeline::CkCs,
        epsilons: vec![0.25, 0.5, 1.0],
        slack_fractions: vec![0.0, 0.5, 0.9],
        dims,
        trials: 5,
        seed: 9,
        source_norm: None,
        opts: RunOptions::default(),
    })
    .unwrap();
    let summary = report.summary();
    for (key, cell) in &summary {
        assert_eq!(cell.success_rate(), 1.0, "cell {key:?}: {cell:?}");
    }
    assert!(report.successes_within_epsilon());
    format!("{} cells, {} trials, all verified", summary.len(), report.rows.len())
}

/// Criterion 10: corrupted certificates are rejected.
fn fault_injection() -> String {
    let mut r = rng(10);
    let opts = RunOptions::default();
    let faults = [
        Fault::ScaleWitness(0.99),
        Fault::NegateWitness,
        Fault::ScaleOperator(1.01),
        Fault::NegateOperator,
        Fault::TamperClaim(1e-6),
    ];
    let mut rejected = 0;
    for k in 0..50 {
        let pipeline = Pipeline::ALL[k % 3];
        let epsilon = 0.5;
        let eta = bpb_core::harness::eta(pipeline, epsilon, &opts).unwrap();
        let spec = InstanceSpec {
            pipeline,
            source_dim: r.random_range(2..=5),
            target_dim: if pipeline == Pipeline::Ucx { 2 } else { 4 },
            slack: 0.5 * eta,
            seed: r.random(),
            source_norm: None,
        };
        let inst = gen_instance(&spec).unwrap();
        let (sol, report) = run_and_verify(&inst, epsilon, &opts).unwrap();
        assert!(report.ok);
        let bad = inject_fault(&sol, faults[k % faults.len()]);
        if !verify(&inst, &bad, opts.tol).ok {
            rejected += 1;
        }
    }
    assert_eq!(rejected, 50);
    format!("{rejected}/50 corrupted certificates rejected")
}

fn main() {
    let criteria: [(&str, Duration, fn() -> String); 10] = [
        ("1 eta-constant reproduction (ck-cs)", Duration::from_secs(60), ck_cs_eta_reproduction),
        ("2 flatten_peak conditions i)-v)", Duration::from_secs(30), flatten_conditions),
        ("3 jw_step contract and defect decay", Duration::MAX, jw_contract),
        ("4 partition projection", Duration::from_secs(60), partition_properties),
        ("5 ucx pipeline", Duration::MAX, ucx_pipeline),
        ("6 predual pipeline", Duration::MAX, predual_pipeline),
        ("7 scalar kernel bounds", Duration::MAX, scalar_kernel),
        ("8 oracle equivalence", Duration::MAX, oracle_equivalence),
        ("9 dimension independence", Duration::MAX, dimension_independence),
        ("10 fault injection", Duration::MAX, fault_injection),
    ];
    let only: Option<String> = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if only.as_ref().is_some_and(|o| !name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) if elapsed <= budget => {
                println!("PASS criterion {name}: {detail} ({:.1}s)", elapsed.as_secs_f64());
            }
            Ok(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {name}: {detail}, but took {:.1}s over a {}s budget",
                    elapsed.as_secs_f64(),
                    budget.as_secs()
                );
            }
            Err(panic) => {
                failed += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL criterion {name}: {msg} ({:.1}s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
