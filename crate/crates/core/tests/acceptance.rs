//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Thresholds are pinned below. The process exits nonzero when a criterion
//! cannot be evaluated at all; measured failures are reported but only turn
//! into a nonzero exit with `ACCEPTANCE_STRICT=1`.

use std::time::{Duration, Instant};

use mpsgen::chain;
use mpsgen::floquet::{self, DriveOptions, GeneratorDrive, PropagatorSettings, Space};
use mpsgen::generator::{self, GeneratorOptions};
use mpsgen::harness;
use mpsgen::linalg::{self, c};
use mpsgen::mps;
use mpsgen::trajectory::{self, LoopSource, Source, Trajectory, PROBE_POINT};
use mpsgen::{bound, CMat, Result, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const EXACTNESS_TOL: f64 = 1e-10;
const LEAKAGE_IDENTITY_TOL: f64 = 1e-10;
const SLOPE_REL_TOL: f64 = 0.10;
const COMPLEMENT_TOL: f64 = 1e-12;
const COMPLEMENT_DRAWS: usize = 20;
const FIDELITY_STEP_FACTOR: f64 = 2.0;
const FIDELITY_FINAL: f64 = 1e-2;
const SCAR_FACTOR: f64 = 10.0;
const RATIO_WINDOW: f64 = 0.03;
/// Minimum distance of the mean ratio from the Poisson value.
const POISSON_SEPARATION: f64 = 0.1;
const SDOS_REL_STD: f64 = 0.2;
const SIGMA2: f64 = 0.05;
const PROPAGATOR_ORACLE_TOL: f64 = 1e-8;
const SPLINE_TOL: f64 = 1e-4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn sample_times(lp: &dyn LoopSource, n: usize) -> Vec<f64> {
    (0..n).map(|k| lp.period() * k as f64 / n as f64).collect()
}

fn criterion_1() -> Result<Verdict> {
    let lp = trajectory::builtin_loop()?;
    let mut worst: f64 = 0.0;
    for t in sample_times(&lp, 10) {
        let (psi, tan) = lp.state_at(t)?;
        let o = generator::local_generator(&psi, &tan, 3, generator::middle_site(3))?;
        for n in [6, 8] {
            worst = worst.max(generator::driving_residual(&o, &psi, &tan, n)?);
        }
    }
    Ok(verdict(worst < EXACTNESS_TOL, format!("max residual {worst:.2e} (tol {EXACTNESS_TOL:.0e})")))
}

fn criterion_2() -> Result<Verdict> {
    let lp = trajectory::builtin_loop()?;
    let mut worst: f64 = 0.0;
    let mut leak: f64 = 0.0;
    for t in sample_times(&lp, 10) {
        let (psi, tan) = lp.state_at(t)?;
        let b = generator::build_generator(&psi, &tan, 3, &GeneratorOptions::default(), Some(t))?;
        for n in [6, 8] {
            let lr = generator::leakage_residual(&b.o, &b.h, &psi, &tan, n)?;
            worst = worst.max(lr.identity_residual);
            leak = leak.max(lr.leakage_norm);
        }
    }
    Ok(verdict(
        worst < LEAKAGE_IDENTITY_TOL,
        format!("max |γ + i Σ o†ψ| {worst:.2e} (tol {LEAKAGE_IDENTITY_TOL:.0e}); max |γ| {leak:.3e}"),
    ))
}

fn criterion_3() -> Result<Verdict> {
    let (psi, tan) = trajectory::point_state(&PROBE_POINT)?;
    let ranges: Vec<usize> = (3..=9).collect();
    let rows = harness::decay_rows(&psi, &tan, &ranges)?;
    let target = 2.0 * psi.lambda2_abs().ln();
    let slope = rows[0].fitted_slope;
    let slope_ok = ((slope - target) / target).abs() <= SLOPE_REL_TOL;
    let opt_ok = rows.iter().all(|r| r.optimized_norm2 <= r.norm2);
    let norms: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.norm2)).collect();
    Ok(verdict(
        slope_ok && opt_ok,
        format!(
            "slope {slope:.3} vs 2ln|λ2| {target:.3} (±{:.0}%), ratio {:.3}; optimized ≤ middle: {opt_ok}; optimized slope {:.3}; norm² [{}]",
            SLOPE_REL_TOL * 100.0,
            slope / target,
            rows[0].optimized_slope,
            norms.join(", ")
        ),
    ))
}

fn criterion_4() -> Result<Verdict> {
    let (psi, tan) = trajectory::point_state(&PROBE_POINT)?;
    let mut audited = 0;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [3, 5, 7, 9] {
        let rep = bound::verify_bound(&psi, &tan, r)?;
        if rep.precondition_ok {
            audited += 1;
            ok &= rep.lhs_per_term <= rep.rhs_per_term;
        }
        parts.push(format!("r{r}: lhs {:.2e} rhs {:.2e} ε {:.2e}", rep.lhs_per_term, rep.rhs_per_term, rep.epsilon_r));
    }
    let rep = bound::verify_bound(&psi, &tan, 3)?;
    let note = if audited == 0 { " (vacuous: precondition ε(r) ≤ κ/2 never met)" } else { "" };
    Ok(verdict(
        ok,
        format!("{audited}/4 ranges audited{note}; κ {:.3e}, β {:.3}, C {:.3e}; {}", rep.kappa, rep.beta, rep.c_const, parts.join("; ")),
    ))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Largest change of `Σ o_i|ψ⟩` and `Σ o_i†|ψ⟩` over random complement draws.
fn complement_invariance(r: usize, n: usize, draws: usize, seed: u64) -> Result<(usize, f64)> {
    let (psi, tan) = trajectory::point_state(&PROBE_POINT)?;
    let o = generator::local_generator(&psi, &tan, r, generator::middle_site(r))?;
    let basis = generator::complement_basis(&psi, r)?;
    let v = chain::mps_state_vector(psi.tensor(), n)?.amplitudes;
    let apply = |m: &CMat| chain::apply_translation_sum(m, &v, 2, n);
    let (base, base_dag) = (apply(o.matrix())?, apply(&o.matrix().adjoint())?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let cm = random_matrix(&mut rng, basis.dim());
        let o2 = generator::add_complement_term(&o, &basis, &cm)?;
        worst = worst.max(linalg::vec_norm(&(apply(o2.matrix())? - &base)));
        worst = worst.max(linalg::vec_norm(&(apply(&o2.matrix().adjoint())? - &base_dag)));
    }
    Ok((basis.dim(), worst))
}

fn criterion_5() -> Result<Verdict> {
    let (dim, worst) = complement_invariance(2, 6, COMPLEMENT_DRAWS, 5)?;
    let (dim3, worst3) = complement_invariance(3, 6, COMPLEMENT_DRAWS, 5)?;
    Ok(verdict(
        worst < COMPLEMENT_TOL,
        format!(
            "r=2: complement dim {dim}{}, max change {worst:.2e} (tol {COMPLEMENT_TOL:.0e}); for reference r=3: dim {dim3}, max change {worst3:.2e}",
            if dim == 0 { " (vacuous: d^r equals χ², leaving no freedom)" } else { "" }
        ),
    ))
}

fn convergence_line(label: &str, psi: &mps::UniformMps, tan: &mps::TangentTensor) -> Result<(bool, String)> {
    let scan = harness::operator_convergence(psi, tan, &[2, 3, 4, 5], false)?;
    let after: Vec<f64> = scan.rows.iter().map(|r| r.distance_after).collect();
    let dist_ok = after.windows(2).all(|w| w[1] < w[0]);
    let weights: Vec<f64> = scan.last.support_weights().into_iter().skip(1).collect();
    let weight_ok = weights.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
    Ok((
        dist_ok && weight_ok,
        format!(
            "{label}: ‖h_r − h_(r−1)‖ after fit r=3..5 [{}] decreasing: {dist_ok}; r=5 weight by support 1..5 [{}] decreasing: {weight_ok}",
            fmt(&after),
            fmt(&weights)
        ),
    ))
}

fn criterion_6() -> Result<Verdict> {
    let lp = trajectory::builtin_loop()?;
    let (psi, tan) = lp.state_at(0.0)?;
    let (pass, line) = convergence_line("loop start", &psi, &tan)?;
    let (psi, tan) = trajectory::point_state(&PROBE_POINT)?;
    let (_, info) = convergence_line("probe point (reference)", &psi, &tan)?;
    Ok(verdict(pass, format!("{line}; {info}")))
}

fn final_log_fidelity(lp: &dyn LoopSource, n: usize, r: usize) -> Result<(f64, usize)> {
    let drive = GeneratorDrive { source: lp, r, options: DriveOptions::default() };
    let space = Space::zero_momentum(n, 2)?;
    let (rows, prop) = floquet::fidelity_trace(&drive, &space, &[lp.period()], &PropagatorSettings::default())?;
    Ok((rows[0].log_fidelity_per_site, prop.accepted_steps))
}

fn criterion_7() -> Result<Verdict> {
    let lp = trajectory::builtin_loop()?;
    let mut f = Vec::new();
    let mut steps = Vec::new();
    for r in [2, 3, 4] {
        let (v, s) = final_log_fidelity(&lp, 8, r)?;
        f.push(v);
        steps.push(s);
    }
    let improving = f.windows(2).all(|w| w[1] * FIDELITY_STEP_FACTOR <= w[0]);
    let small = f[2] < FIDELITY_FINAL;
    Ok(verdict(
        improving && small,
        format!(
            "f(τ) r=2,3,4: {:.3e}, {:.3e}, {:.3e}; ×{FIDELITY_STEP_FACTOR} per step: {improving}; f(τ, r=4) < {FIDELITY_FINAL:.0e}: {small}; steps {steps:?}",
            f[0], f[1], f[2]
        ),
    ))
}

fn criterion_8() -> Result<Verdict> {
    let lp = trajectory::builtin_loop()?;
    let run = harness::floquet_run(&lp, 10, 4, DriveOptions::default(), &PropagatorSettings::default(), SIGMA2)?;
    let s = &floquet::scar_summary(&run.rows, SCAR_FACTOR);
    let one = s.flagged.len() == 1;
    let low = s.special_entropy < 0.5 * s.mean_entropy;
    Ok(verdict(
        one && low,
        format!(
            "sector dim {}; flagged {} (need exactly 1); max overlap {:.3e} = {:.1}× median {:.3e}; special entropy {:.3} vs half mean {:.3}",
            run.spectrum.len(),
            s.flagged.len(),
            s.special_overlap,
            s.special_overlap / s.median_overlap,
            s.median_overlap,
            s.special_entropy,
            0.5 * s.mean_entropy
        ),
    ))
}

fn criterion_9() -> Result<Verdict> {
    let lp = trajectory::builtin_loop()?;
    let run = harness::floquet_run(&lp, 12, 4, DriveOptions::default(), &PropagatorSettings::default(), SIGMA2)?;
    let coe = floquet::spectrum::orthogonal_mean_ratio();
    let poisson = floquet::spectrum::poisson_mean_ratio();
    let cue = floquet::spectrum::unitary_mean_ratio();
    let mean = run.ratios.as_ref().map_or(f64::NAN, |r| r.mean);
    let near_coe = (mean - coe).abs() <= RATIO_WINDOW;
    let far_poisson = (mean - poisson).abs() >= POISSON_SEPARATION;
    let rel_std = floquet::spectrum::relative_std(&run.sdos);
    let flat = rel_std < SDOS_REL_STD;
    Ok(verdict(
        near_coe && far_poisson && flat,
        format!(
            "N=12 r=4 sector dim {}; mean r̃ {mean:.4} (COE {coe:.4} ±{RATIO_WINDOW}: {near_coe}; Poisson {poisson:.4}, ≥{POISSON_SEPARATION} away: {far_poisson}; CUE {cue:.4} for reference); sDOS rel. std {rel_std:.3} < {SDOS_REL_STD}: {flat}; modulus defect {:.1e}",
            run.spectrum.len(),
            run.spectrum.modulus_defect()
        ),
    ))
}

fn criterion_10() -> Result<Verdict> {
    // Frozen-point propagator against a Padé matrix exponential.
    let lp = trajectory::builtin_loop()?;
    let (psi, tan) = lp.state_at(0.4)?;
    let h = generator::build_generator(&psi, &tan, 3, &GeneratorOptions::default(), None)?.h;
    let space = Space::full(6, 2)?;
    let big = space.hamiltonian(h.matrix())?;
    let ham = |_: f64| Ok(big.clone());
    let t = 0.9;
    let prop = floquet::propagate_with(&ham, space.dim(), 0.0, &[t], &PropagatorSettings::default())?;
    let exact = (big.clone() * c(0.0, -t)).exp();
    let prop_err = (&prop.unitaries[0] - exact).iter().map(|z| z.norm()).fold(0.0, f64::max);

    // GHZ and product vectorizations.
    let ghz = chain::mps_state_vector(&mps::ghz_tensor(), 4)?.amplitudes;
    let s = 0.5f64.sqrt();
    let ghz_err = (0..16)
        .map(|x| (ghz[x] - c(if x == 0 || x == 15 { s } else { 0.0 }, 0.0)).norm())
        .fold(0.0, f64::max);
    let up = chain::mps_state_vector(&mps::basis_product(2, 0), 3)?.amplitudes;
    let prod_err = (0..8).map(|x| (up[x] - c(if x == 0 { 1.0 } else { 0.0 }, 0.0)).norm()).fold(0.0, f64::max);

    // Spline-loaded trajectory against the analytic loop.
    let spline = Trajectory::from_csv(&lp.to_csv(256)?, Source::File("builtin-256.csv".into()))?;
    let mut spline_err: f64 = 0.0;
    for k in 0..64 {
        let t = lp.period() * (k as f64 + 0.5) / 64.0;
        let (a, b) = (lp.eval(t), spline.eval(t));
        for i in 0..4 {
            spline_err = spline_err.max((a.values[i] - b.values[i]).abs());
            spline_err = spline_err.max((a.rates[i] - b.rates[i]).abs() / a.rates[i].abs().max(1.0));
        }
    }
    let pass = prop_err < PROPAGATOR_ORACLE_TOL && ghz_err < 1e-15 && prod_err == 0.0 && spline_err < SPLINE_TOL;
    Ok(verdict(
        pass,
        format!(
            "propagator vs exp {prop_err:.2e} (tol {PROPAGATOR_ORACLE_TOL:.0e}); GHZ {ghz_err:.1e}; product {prod_err:.1e}; spline {spline_err:.2e} (tol {SPLINE_TOL:.0e})"
        ),
    ))
}

type Criterion = fn() -> Result<Verdict>;

fn main() {
    let criteria: [(Criterion, Duration); 10] = [
        (criterion_1, Duration::from_secs(60)),
        (criterion_2, Duration::from_secs(60)),
        (criterion_3, Duration::from_secs(300)),
        (criterion_4, Duration::from_secs(300)),
        (criterion_5, Duration::from_secs(60)),
        (criterion_6, Duration::from_secs(600)),
        (criterion_7, Duration::from_secs(1200)),
        (criterion_8, Duration::from_secs(1800)),
        (criterion_9, Duration::from_secs(3600)),
        (criterion_10, Duration::from_secs(300)),
    ];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let (mut failed, mut errored) = (0, 0);
    for (k, (run, budget)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        match outcome {
            Ok(v) => {
                let pass = v.pass && in_time;
                if !pass {
                    failed += 1;
                }
                println!(
                    "criterion {id:>2}: {} | {} | {:.1}s of {}s",
                    if pass { "PASS" } else { "FAIL" },
                    v.detail,
                    elapsed.as_secs_f64(),
                    budget.as_secs()
                );
            }
            Err(e) => {
                errored += 1;
                println!("criterion {id:>2}: FAIL | error: {e} | {:.1}s", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {failed} failed, {errored} errored");
    if errored > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
