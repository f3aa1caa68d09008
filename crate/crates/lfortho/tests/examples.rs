//! Worked examples per module, each checked against an independent oracle.

use lfortho::cli::reference_spec;
use lfortho::hankel::Pipeline;
use lfortho::lf::{self, f12, f22, forward_run, Seq};
use lfortho::operators::{shift_structure_residual, OperatorSet, PsiMethod};
use lfortho::toda::{theta_eta, TodaContext};
use lfortho::weights::{moment_table, weight, Family, FamilySpec};
use lfortho::{Error, PrecisionContext};
use rug::ops::Pow;
use rug::Float;

fn ctx() -> PrecisionContext {
    PrecisionContext::new(256).unwrap()
}

fn build(spec: &FamilySpec, k: usize, c: &PrecisionContext) -> (Pipeline, OperatorSet) {
    let pl = Pipeline::build(spec, k, c).unwrap();
    let ops = OperatorSet::new(spec, &pl.data, pl.k_int).unwrap();
    (pl, ops)
}

fn rel(a: &Float, b: &Float) -> Float {
    Float::with_val(a.prec(), a - b).abs() / Float::with_val(a.prec(), b.abs_ref())
}

fn generic_f22(c: &PrecisionContext) -> FamilySpec {
    FamilySpec::new(Family::F22, vec![c.ratio(3, 4), c.ratio(9, 4)], vec![c.ratio(3, 8), c.ratio(13, 8)], c.ratio(3, 2))
        .unwrap()
}

#[test]
fn orthogonality_by_truncated_weighted_sums() {
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let (pl, _) = build(&spec, 10, &c);
    // terms fall like 2^k/k!², far below 2^-256 well before k = 150
    let nodes: Vec<(Float, Vec<Float>)> = (0..150)
        .map(|k| (weight(&spec, k, &c), pl.data.eval_polynomials(&c.float(k as u32), 6)))
        .collect();
    let hmax = pl.data.h[..7].iter().fold(c.zero(), |m, h| m.max(h));
    for n in 0..=6 {
        for m in 0..=6 {
            let s = nodes.iter().fold(c.zero(), |acc, (w, p)| acc + Float::with_val(c.bits, &p[n] * &p[m]) * w);
            let want = if n == m { pl.data.h[n].clone() } else { c.zero() };
            let err = Float::with_val(c.bits, &s - &want).abs();
            assert!(err < Float::with_val(c.bits, &c.eps_verify * &hmax), "<P{n}, P{m}>");
        }
    }
}

#[test]
fn polynomial_leading_terms() {
    let c = ctx();
    let spec = reference_spec(Family::F22, &c);
    let (pl, _) = build(&spec, 10, &c);
    let d = &pl.data;
    let z = c.ratio(7, 3);
    let p = d.eval_polynomials(&z, 1);
    assert_eq!(p[1], Float::with_val(c.bits, &z - &d.beta[0]));
    assert!(rel(&d.beta[0], &Float::with_val(c.bits, &pl.table.rho[1] / &pl.table.rho[0])) < c.eps_verify);
    assert!(d.gamma[1..10].iter().all(|g| *g > 0));
    // (P_n(z) − z^n)/z^{n−1} → p¹_n as z grows; the gap is O(1/z)
    let big = c.pow2(80);
    let vals = d.eval_polynomials(&big, 8);
    for n in 1..=8u32 {
        let zn = Float::with_val(c.bits, big.clone().pow(n));
        let zn1 = Float::with_val(c.bits, big.clone().pow(n - 1));
        let sub = (Float::with_val(c.bits, &vals[n as usize] - &zn)) / &zn1;
        let gap = Float::with_val(c.bits, &sub - &d.p1[n as usize]).abs();
        assert!(gap < c.pow2(-60), "n = {n}");
    }
}

#[test]
fn jacobi_entries_and_hessenberg_symmetry() {
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let (pl, ops) = build(&spec, 10, &c);
    let d = &pl.data;
    assert_eq!(ops.j.get(0, 1), 1);
    assert_eq!(ops.j.get(1, 0), d.gamma[1]);
    assert_eq!(ops.j.get(0, 0), d.beta[0]);
    let jh = ops.j.mul(&ops.h).unwrap();
    for n in 0..8 {
        let want = Float::with_val(c.bits, &d.gamma[n + 1] * &d.h[n]);
        assert!(rel(&jh.get(n, n + 1), &d.h[n + 1]) < c.eps_verify);
        assert!(rel(&jh.get(n + 1, n), &want) < c.eps_verify);
    }
}

#[test]
fn f22_subdiagonal_of_psi_in_closed_form() {
    // ψ^{(−1)}_n = η(β_n + β_{n+1} + a_1 + a_2 + n)H_{n+1}
    let c = ctx();
    for spec in [reference_spec(Family::F22, &c), generic_f22(&c)] {
        let (pl, ops) = build(&spec, 12, &c);
        let psi = ops.psi(PsiMethod::PiInvHThetaJT).unwrap();
        let d = &pl.data;
        for n in 0..10 {
            let s = Float::with_val(c.bits, &d.beta[n] + &d.beta[n + 1]) + &spec.a[0] + &spec.a[1] + n as u32;
            let want = Float::with_val(c.bits, &spec.eta * s) * &d.h[n + 1];
            assert!(rel(&psi.diag_entry(-1, n), &want) < c.eps_verify, "n = {n}");
        }
    }
}

#[test]
fn f12_second_superdiagonal_of_psi() {
    // ψ^{(2)}_n = H_{n+2}(β_n + β_{n+1} + β_{n+2} + b_1 + b_2 − n)
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let (pl, ops) = build(&spec, 12, &c);
    let psi = ops.psi(PsiMethod::HSigmaJTPiT).unwrap();
    let d = &pl.data;
    for n in 0..10 {
        let s = Float::with_val(c.bits, &d.beta[n] + &d.beta[n + 1]) + &d.beta[n + 2] + &spec.b[0] + &spec.b[1];
        let want = Float::with_val(c.bits, s - n as u32) * &d.h[n + 2];
        assert!(rel(&psi.diag_entry(2, n), &want) < c.eps_verify, "n = {n}");
    }
}

#[test]
fn structure_equations_for_terminating_f32() {
    // the indefinite weight has alternating H_n of growing size; the Gram solve
    // cancels roughly 200 bits, so this case runs at 512
    let c = PrecisionContext::new(512).unwrap();
    let spec = FamilySpec {
        family: Family::F32,
        a: vec![c.float(-40), c.ratio(5, 4), c.ratio(7, 4)],
        b: vec![c.ratio(1, 2), c.ratio(1, 4)],
        eta: c.ratio(3, 2),
        positivity: false,
    };
    spec.validate().unwrap();
    assert!(spec.terminating());
    let (pl, ops) = build(&spec, 10, &c);
    let psi = ops.psi(PsiMethod::SigmaJHPiT).unwrap();
    for z in [c.float(3), c.ratio(1, 2)] {
        let (m, p) = shift_structure_residual(&ops, &pl.data, &psi, &z).unwrap();
        assert!(m < c.eps_verify && p < c.eps_verify, "z = {z}");
    }
    // θ(0) = 0, so ΨH⁻¹P(0) vanishes on valid rows
    let (m, _) = shift_structure_residual(&ops, &pl.data, &psi, &c.zero()).unwrap();
    assert!(m < c.eps_verify);
}

#[test]
fn f12_step_reproduces_factorization() {
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let (pl, _) = build(&spec, 14, &c);
    let tol = Float::with_val(c.bits, &c.eps_verify * 1000u32);
    for n in 2..=8 {
        let seq = Seq::from_data(&pl.data, n + 1);
        let s = f12::step(&spec, n, &seq, &c).unwrap();
        assert!(rel(&s.gamma, &pl.data.gamma[n + 2]) < tol, "gamma at n = {n}");
        assert!(rel(&s.beta, &pl.data.beta[n + 2]) < tol, "beta at n = {n}");
    }
    let seq = Seq::from_data(&pl.data, 2);
    assert!(matches!(f12::step(&spec, 0, &seq, &c), Err(Error::OutOfRange { .. })));
}

#[test]
fn f22_step_reproduces_factorization_when_nondegenerate() {
    let c = ctx();
    let spec = generic_f22(&c);
    let (pl, _) = build(&spec, 14, &c);
    let tol = Float::with_val(c.bits, &c.eps_verify * 1000u32);
    for n in 3..=8 {
        let seq = Seq::from_data(&pl.data, n + 1);
        let s = f22::step(&spec, n, &seq, &c).unwrap();
        assert!(rel(&s.gamma, &pl.data.gamma[n + 2]) < tol, "gamma at n = {n}");
        assert!(rel(&s.beta, &pl.data.beta[n + 2]) < tol, "beta at n = {n}");
    }
}

#[test]
fn f22_reference_weight_is_charlier_and_step_is_singular() {
    // a_i = b_i + 1 cancels every Pochhammer ratio: w(k) = η^k/k!.
    // The step denominator vanishes for Charlier exactly at n = η.
    let c = ctx();
    let spec = reference_spec(Family::F22, &c);
    let (pl, _) = build(&spec, 14, &c);
    for n in 1..10 {
        assert!(rel(&pl.data.beta[n], &c.float(n as u32 + 2)) < c.eps_verify);
        assert!(rel(&pl.data.gamma[n], &c.float(2 * n as u32)) < c.eps_verify);
    }
    let seq = Seq::from_data(&pl.data, 3);
    assert!(matches!(f22::step(&spec, 2, &seq, &c), Err(Error::DenominatorUnderflow { .. })));
    for n in 3..=8 {
        let s = f22::step(&spec, n, &Seq::from_data(&pl.data, n + 1), &c).unwrap();
        assert!(rel(&s.beta, &c.float(n as u32 + 4)) < c.eps_verify, "beta at n = {n}");
        assert!(rel(&s.gamma, &c.float(2 * (n as u32 + 2))) < c.eps_verify, "gamma at n = {n}");
    }
    let rep = forward_run(&pl, 6, &c).unwrap();
    assert!(matches!(rep.stopped, Some(Error::DenominatorUnderflow { n: 2, .. })));
}

#[test]
fn forward_run_without_steps_is_seed_only() {
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let (pl, _) = build(&spec, 10, &c);
    let rep = forward_run(&pl, 0, &c).unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.rows.iter().all(|r| r.dev_beta.is_zero() && r.dev_gamma.is_zero()));
    assert!(rep.stopped.is_none());
    let f32 = reference_spec(Family::F32, &c);
    let (pl, _) = build(&f32, 10, &c);
    assert!(matches!(forward_run(&pl, 2, &c), Err(Error::Unsupported(_))));
}

#[test]
fn reference_f12_closed_forms_hold_at_interior_points() {
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let (pl, ops) = build(&spec, 12, &c);
    let lc = lf::LfContext::new(&pl, &ops).unwrap();
    let mut all = Vec::new();
    for n in 2..=8 {
        all.extend(lf::identities(&lc, n));
    }
    let errata = lf::errata_flags(&all, &c.eps_verify);
    for r in &all {
        let flagged = errata.iter().any(|e| e.identity == r.identity);
        assert!(r.residual < c.eps_verify || flagged, "{} at n = {}", r.identity, r.n);
    }
    assert!(errata.iter().any(|e| e.identity == "f12.pi2[printed]"));
    assert!(all.iter().filter(|r| r.identity == "f12.pi2[corrected]").all(|r| r.residual < c.eps_verify));
}

#[test]
fn eta_derivative_of_first_moment() {
    let c = ctx();
    let spec = reference_spec(Family::F12, &c);
    let rho = |i: usize| {
        let spec = spec.clone();
        let c = c.clone();
        move |eta: &Float| -> lfortho::Result<Float> {
            Ok(moment_table(&spec.with_eta(eta.clone()), i + 1, &c)?.rho[i].clone())
        }
    };
    let d = theta_eta(rho(0), &spec.eta, &c).unwrap();
    let rho1 = moment_table(&spec, 2, &c).unwrap().rho[1].clone();
    let diff = Float::with_val(c.bits, &d.value - &rho1).abs();
    assert!(diff <= Float::with_val(c.bits, &d.error_estimate * 10u32) + Float::with_val(c.bits, &c.eps_verify * &rho1));
}

#[test]
fn sato_wilson_at_first_index_is_toda_at_zero() {
    // ϑ_η P_1(z) = −ϑ_η β_0 must equal −γ_1 for every z
    let c = ctx();
    let spec = reference_spec(Family::F22, &c);
    let tc = TodaContext::new(&spec, 8, &c).unwrap();
    let d = tc.first.theta(|x| Ok(x.beta(0).clone())).unwrap();
    let g1 = tc.first.center().gamma(1).clone();
    let diff = Float::with_val(c.bits, &d.value - &g1).abs();
    assert!(diff <= Float::with_val(c.bits, &d.error_estimate * 10u32) + Float::with_val(c.bits, &c.eps_verify * &g1));
    for z in [c.ratio(1, 2), c.float(5)] {
        assert!(tc.sato_wilson_residual(&z, 1).unwrap().pass());
    }
    for n in 2..=5 {
        assert!(tc.sato_wilson_residual(&c.ratio(1, 2), n).unwrap().pass(), "n = {n}");
    }
}

#[test]
fn second_order_convergence_of_unextrapolated_differences() {
    let c = PrecisionContext::new(384).unwrap();
    let spec = reference_spec(Family::F12, &c);
    let tc = TodaContext::new(&spec, 8, &c).unwrap();
    for n in 1..=4 {
        let r = tc.order_ratio(n, &c).unwrap().to_f64();
        assert!((3.5..=4.5).contains(&r), "n = {n}: {r}");
    }
    let r = tc.sato_wilson_order_ratio(&c.ratio(1, 3), 2, &c).unwrap().to_f64();
    assert!((3.5..=4.5).contains(&r));
}
