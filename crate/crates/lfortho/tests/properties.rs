//! Invariants over randomly drawn parameters.

use std::collections::BTreeMap;

use lfortho::hankel::Pipeline;
use lfortho::lf::{self, LfContext};
use lfortho::operators::OperatorSet;
use lfortho::report::{Manifest, VerificationReport};
use lfortho::verify::{Outcome, Record};
use lfortho::weights::{moment_table, pearson_residual, Family, FamilySpec};
use lfortho::PrecisionContext;
use proptest::prelude::*;
use rug::Float;

const BITS: u32 = 192;

fn ctx() -> PrecisionContext {
    PrecisionContext::new(BITS).unwrap()
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::F12), Just(Family::F22), Just(Family::F32)]
}

/// Parameters are multiples of 1/8 so every draw is exact in binary.
fn spec_for(family: Family) -> impl Strategy<Value = (Family, Vec<i64>, Vec<i64>, i64)> {
    let eta_max = if family == Family::F32 { 6 } else { 20 };
    (
        Just(family),
        prop::collection::vec(1i64..=24, family.m()),
        prop::collection::vec(1i64..=24, 2),
        1i64..=eta_max,
    )
}

fn any_spec() -> impl Strategy<Value = (Family, Vec<i64>, Vec<i64>, i64)> {
    family().prop_flat_map(spec_for)
}

fn build(family: Family, a: &[i64], b: &[i64], eta: i64, c: &PrecisionContext) -> FamilySpec {
    let f = |v: &[i64]| v.iter().map(|&p| c.ratio(p, 8)).collect();
    FamilySpec::new(family, f(a), f(b), c.ratio(eta, 8)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weights_satisfy_the_pearson_relation((fam, a, b, eta) in any_spec()) {
        let c = ctx();
        let spec = build(fam, &a, &b, eta, &c);
        for k in 0..60 {
            let r = pearson_residual(&spec, k, &c);
            prop_assert!(r < c.eps_verify, "k = {} residual {}", k, r.to_f64());
        }
    }

    #[test]
    fn moments_are_log_convex((fam, a, b, eta) in any_spec()) {
        let c = ctx();
        let spec = build(fam, &a, &b, eta, &c);
        let t = moment_table(&spec, 16, &c).unwrap();
        for n in 0..14 {
            let lhs = Float::with_val(BITS, &t.rho[n] * &t.rho[n + 2]);
            let rhs = Float::with_val(BITS, t.rho[n + 1].square_ref());
            prop_assert!(lhs >= rhs, "n = {}", n);
        }
    }

    #[test]
    fn positive_weights_give_positive_norms((fam, a, b, eta) in any_spec()) {
        let c = ctx();
        let spec = build(fam, &a, &b, eta, &c);
        let pl = Pipeline::build(&spec, 10, &c).unwrap();
        let d = &pl.data;
        prop_assert!(d.h.iter().take(pl.k).all(|h| *h > 0));
        prop_assert!(d.gamma.iter().take(pl.k).skip(1).all(|g| *g > 0));
    }

    #[test]
    fn recursion_matches_coefficient_rows((fam, a, b, eta) in any_spec(), zp in -32i64..=32) {
        let c = ctx();
        let spec = build(fam, &a, &b, eta, &c);
        let pl = Pipeline::build(&spec, 10, &c).unwrap();
        let z = c.ratio(zp, 4);
        let rec = pl.data.eval_polynomials(&z, 8);
        for (n, p) in rec.iter().enumerate() {
            let s = pl.data.eval_from_s(&z, n);
            let scale = Float::with_val(BITS, p.abs_ref()).max(&c.float(1));
            let r = Float::with_val(BITS, p - &s).abs() / scale;
            prop_assert!(r < c.eps_verify, "n = {} residual {}", n, r.to_f64());
        }
    }

    #[test]
    fn f32_compatibility_holds_for_any_parameters((_, a, b, eta) in spec_for(Family::F32)) {
        let c = ctx();
        let spec = build(Family::F32, &a, &b, eta, &c);
        let pl = Pipeline::build(&spec, 14, &c).unwrap();
        let ops = OperatorSet::new(&spec, &pl.data, pl.k_int).unwrap();
        let lc = LfContext::new(&pl, &ops).unwrap();
        for n in 3..=8 {
            for r in lf::f32::compat(&lc, n) {
                if r.identity == "comp1" || r.identity == "comp2" {
                    prop_assert!(r.residual < c.eps_verify, "{} at n = {}: {}", r.identity, n, r.residual.to_f64());
                }
            }
        }
    }

    #[test]
    fn report_json_round_trips(
        rows in prop::collection::vec(("[a-z_]{1,12}", 0usize..40, -300i32..0, -300i32..0), 0..8),
        bits in 128u32..512,
    ) {
        let c = PrecisionContext::new(bits).unwrap();
        let records = rows
            .iter()
            .map(|(id, n, r, b)| Record {
                suite: "structure".into(),
                identity: id.clone(),
                n: *n,
                residual: c.pow2(*r) / 3u32,
                budget: c.pow2(*b),
            })
            .collect();
        let outcome = Outcome { records, ..Default::default() };
        let m = Manifest::new("verify", BTreeMap::from([("family".into(), "f22".into())]), bits, &c.eps_verify);
        let json = VerificationReport::new(m, &outcome).to_json();
        let back = VerificationReport::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json(), json);
        for (out, rec) in back.records.iter().zip(&outcome.records) {
            let r = Float::with_val(bits, Float::parse(&out.residual).unwrap());
            prop_assert_eq!(&r, &rec.residual);
        }
    }
}
