//! Closed-form Laguerre–Freud expressions per family, checked against the
//! factorization.
//!
//! Every identity is evaluated in residual form (left side minus right side) as a
//! [`Val`], so its residual is normalized by the magnitude of its own terms.
//! Identities whose printed form is suspect exist in several variants, named
//! `base[variant]`; [`errata_flags`] decides which variants are systematic misses.

pub mod f12;
pub mod f22;
pub mod f32;

use std::collections::BTreeMap;

use rug::Float;

use crate::error::{Error, Result};
use crate::hankel::{Pipeline, SpectralData};
use crate::operators::{BandedOperator, OperatorSet, PsiMethod};
use crate::precision::PrecisionContext;
use crate::tracked::Val;
use crate::weights::{Family, FamilySpec};

#[derive(Debug, Clone)]
pub struct Residual {
    pub identity: String,
    pub n: usize,
    pub residual: Float,
}

impl Residual {
    pub fn new(identity: impl Into<String>, n: usize, v: &Val) -> Residual {
        Residual { identity: identity.into(), n, residual: v.residual() }
    }

    pub fn base(&self) -> &str {
        base_name(&self.identity)
    }

    pub fn variant(&self) -> Option<&str> {
        variant_name(&self.identity)
    }
}

pub fn base_name(id: &str) -> &str {
    id.split('[').next().unwrap_or(id)
}

pub fn variant_name(id: &str) -> Option<&str> {
    let start = id.find('[')?;
    id[start + 1..].strip_suffix(']')
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrataFlag {
    pub identity: String,
    pub detail: String,
}

/// A variant is flagged when it fails at every tested n while another variant of
/// the same identity passes at every tested n. Variants that fail without such a
/// replacement are left as genuine failures.
pub fn errata_flags(records: &[Residual], tol: &Float) -> Vec<ErrataFlag> {
    errata_from_passes(records.iter().map(|r| (r.identity.as_str(), r.residual <= *tol)))
}

/// Same rule over (identity, pass) pairs.
pub fn errata_from_passes<'a, I>(items: I) -> Vec<ErrataFlag>
where
    I: IntoIterator<Item = (&'a str, bool)>,
{
    let mut by_variant: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for (id, pass) in items {
        let Some(v) = variant_name(id) else { continue };
        let e = by_variant.entry((base_name(id).to_string(), v.to_string())).or_insert((0, 0));
        e.0 += 1;
        if pass {
            e.1 += 1;
        }
    }
    let mut out = Vec::new();
    for ((base, v), (total, passed)) in &by_variant {
        if *passed != 0 {
            continue;
        }
        let good: Vec<&str> = by_variant
            .iter()
            .filter(|((b, w), (t, p))| b == base && w != v && t == p && *t > 0)
            .map(|((_, w), _)| w.as_str())
            .collect();
        if let Some(w) = good.first() {
            out.push(ErrataFlag {
                identity: format!("{base}[{v}]"),
                detail: format!("fails at all {total} tested n; variant [{w}] validates at every n"),
            });
        }
    }
    out
}

/// Read access to β_k, γ_k (zero outside their domain) as tracked values.
pub trait Coeffs {
    fn beta(&self, k: i64) -> Val;
    fn gamma(&self, k: i64) -> Val;
    fn bits(&self) -> u32;
}

/// Plain recurrence-coefficient sequences; `gamma[0]` is unused.
#[derive(Debug, Clone)]
pub struct Seq {
    pub beta: Vec<Float>,
    pub gamma: Vec<Float>,
    pub bits: u32,
}

impl Seq {
    pub fn from_data(data: &SpectralData, upto: usize) -> Seq {
        let nb = (upto + 1).min(data.beta.len());
        let ng = (upto + 1).min(data.gamma.len());
        Seq { beta: data.beta[..nb].to_vec(), gamma: data.gamma[..ng].to_vec(), bits: data.bits }
    }
}

fn fetch(v: &[Float], k: i64, lo: i64, bits: u32) -> Val {
    if k < lo || k as usize >= v.len() {
        Val::int(0, bits)
    } else {
        Val::var(&v[k as usize])
    }
}

impl Coeffs for Seq {
    fn beta(&self, k: i64) -> Val {
        fetch(&self.beta, k, 0, self.bits)
    }
    fn gamma(&self, k: i64) -> Val {
        fetch(&self.gamma, k, 1, self.bits)
    }
    fn bits(&self) -> u32 {
        self.bits
    }
}

/// Family parameters as tracked values.
#[derive(Debug, Clone)]
pub struct Params {
    pub a: Vec<Val>,
    pub b1: Val,
    pub b2: Val,
    pub eta: Val,
    pub bits: u32,
}

impl Params {
    pub fn new(spec: &FamilySpec) -> Params {
        Params {
            a: spec.a.iter().map(Val::var).collect(),
            b1: Val::var(&spec.b[0]),
            b2: Val::var(&spec.b[1]),
            eta: Val::var(&spec.eta),
            bits: spec.bits(),
        }
    }

    pub fn c(&self, i: i64) -> Val {
        Val::int(i, self.bits)
    }

    pub fn a_sum(&self) -> Val {
        self.a.iter().fold(self.c(0), |s, x| s + x)
    }

    /// Second elementary symmetric function of the a's.
    pub fn a_e2(&self) -> Val {
        let mut s = self.c(0);
        for i in 0..self.a.len() {
            for j in i + 1..self.a.len() {
                s = s + &self.a[i] * &self.a[j];
            }
        }
        s
    }

    pub fn bs(&self) -> Val {
        &self.b1 + &self.b2
    }

    pub fn bp(&self) -> Val {
        &self.b1 * &self.b2
    }
}

/// β, γ relative to a base index n: `be(k)` = β_{n+k}.
pub struct Rel<'a, C: Coeffs + ?Sized> {
    pub c: &'a C,
    pub n: i64,
}

impl<C: Coeffs + ?Sized> Rel<'_, C> {
    pub fn be(&self, k: i64) -> Val {
        self.c.beta(self.n + k)
    }
    pub fn ga(&self, k: i64) -> Val {
        self.c.gamma(self.n + k)
    }
}

/// Fails when a denominator carries fewer than bits/4 significant bits relative to
/// its own terms, or is exactly zero.
pub fn check_den(name: &'static str, n: usize, d: &Val, ctx: &PrecisionContext) -> Result<()> {
    let bound = Float::with_val(ctx.bits, &ctx.eps_pivot * &d.m);
    if d.v.is_zero() || Float::with_val(ctx.bits, d.v.abs_ref()) <= bound {
        return Err(Error::DenominatorUnderflow { name, n });
    }
    Ok(())
}

/// Everything a family identity may compare against: factorization data, dressed
/// Pascal matrices and Ψ.
pub struct LfContext<'a> {
    pub spec: &'a FamilySpec,
    pub data: &'a SpectralData,
    pub ops: &'a OperatorSet,
    pub psi: BandedOperator,
    pub par: Params,
    pub seq: Seq,
    pub k: usize,
}

impl<'a> LfContext<'a> {
    pub fn new(pl: &'a Pipeline, ops: &'a OperatorSet) -> Result<LfContext<'a>> {
        let psi = ops.psi(PsiMethod::SigmaJHPiT)?;
        Ok(LfContext {
            spec: &pl.spec,
            data: &pl.data,
            ops,
            psi,
            par: Params::new(&pl.spec),
            seq: Seq::from_data(&pl.data, pl.data.beta.len()),
            k: pl.k,
        })
    }

    pub fn bits(&self) -> u32 {
        self.data.bits
    }

    pub fn rel(&self, n: usize) -> Rel<'_, Seq> {
        Rel { c: &self.seq, n: n as i64 }
    }

    pub fn h(&self, k: i64) -> Val {
        fetch(&self.data.h, k, 0, self.bits())
    }

    pub fn p1(&self, k: i64) -> Val {
        fetch(&self.data.p1, k, 0, self.bits())
    }

    /// π^{[d]}_j: Π(j+d, j) for d > 0, Π⁻¹(j−d, j) for d < 0; zero for j < 0.
    pub fn pi(&self, d: i64, j: i64) -> Val {
        if j < 0 {
            return Val::int(0, self.bits());
        }
        let (m, row) = if d > 0 { (&self.ops.pi, j + d) } else { (&self.ops.pi_inv, j - d) };
        Val::var(&m.get(row as usize, j as usize))
    }

    /// ψ^{(k)}_n: Ψ(n, n+k) for k ≥ 0, Ψ(n−k, n) for k < 0.
    pub fn psi(&self, k: i64, n: usize) -> Val {
        Val::var(&self.psi.diag_entry(k, n))
    }
}

/// Index range of n at which a family's identities are evaluated for order K.
pub fn identity_range(family: Family, k: usize) -> std::ops::RangeInclusive<usize> {
    let lo = match family {
        Family::F12 => 1,
        Family::F22 => 2,
        Family::F32 => 3,
    };
    lo..=k.saturating_sub(4)
}

/// All closed-form residuals of the family at n.
pub fn identities(ctx: &LfContext, n: usize) -> Vec<Residual> {
    match ctx.spec.family {
        Family::F12 => f12::identities(ctx, n),
        Family::F22 => f22::identities(ctx, n),
        Family::F32 => f32::identities(ctx, n),
    }
}

/// Step equations in residual form at n with factorization inputs.
pub fn step_residuals(ctx: &LfContext, n: usize) -> Result<Vec<Residual>> {
    match ctx.spec.family {
        Family::F12 => Ok(f12::step_residuals(ctx, n)),
        Family::F22 => Ok(f22::step_residuals(ctx, n)),
        Family::F32 => Err(Error::Unsupported("no explicit step equations for f32".into())),
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub gamma: Float,
    pub beta: Float,
}

#[derive(Debug, Clone)]
pub struct ForwardRow {
    pub n: usize,
    pub beta_lf: Float,
    pub beta_chol: Float,
    pub gamma_lf: Float,
    pub gamma_chol: Float,
    pub dev_beta: Float,
    pub dev_gamma: Float,
}

#[derive(Debug, Clone)]
pub struct LfReport {
    pub family: Family,
    pub seed: usize,
    pub rows: Vec<ForwardRow>,
    pub records: Vec<Residual>,
    pub errata: Vec<ErrataFlag>,
    /// Set when the run stopped early.
    pub stopped: Option<Error>,
}

impl LfReport {
    /// Largest relative deviation over the generated (non-seed) rows.
    pub fn max_deviation(&self, bits: u32) -> Float {
        let mut m = Float::new(bits);
        for r in self.rows.iter().filter(|r| r.n > self.seed + 1) {
            for d in [&r.dev_beta, &r.dev_gamma] {
                if *d > m {
                    m = d.clone();
                }
            }
        }
        m
    }
}

pub const FORWARD_SEED: usize = 2;

fn rel_dev(x: &Float, y: &Float) -> Float {
    let d = Float::with_val(x.prec(), x - y).abs();
    let s = Float::with_val(x.prec(), y.abs_ref());
    if s.is_zero() {
        d
    } else {
        d / s
    }
}

/// Seeds β_{n0−1..n0+1}, γ_{n0−1..n0+1} from the factorization and iterates the
/// explicit step equations `steps` times.
pub fn forward_run(pl: &Pipeline, steps: usize, ctx: &PrecisionContext) -> Result<LfReport> {
    let family = pl.spec.family;
    if family == Family::F32 {
        return Err(Error::Unsupported("no explicit step equations for f32".into()));
    }
    let n0 = FORWARD_SEED;
    let need = n0 + 2 + steps;
    if need >= pl.data.beta.len() {
        return Err(Error::OutOfRange { n: need, lo: 0, hi: pl.data.beta.len() - 1 });
    }
    let mut seq = Seq::from_data(&pl.data, n0 + 1);
    let mut rows = Vec::new();
    let push = |n: usize, b: &Float, g: &Float, rows: &mut Vec<ForwardRow>| {
        rows.push(ForwardRow {
            n,
            beta_lf: b.clone(),
            beta_chol: pl.data.beta[n].clone(),
            gamma_lf: g.clone(),
            gamma_chol: pl.data.gamma[n].clone(),
            dev_beta: rel_dev(b, &pl.data.beta[n]),
            dev_gamma: rel_dev(g, &pl.data.gamma[n]),
        });
    };
    for n in n0 - 1..=n0 + 1 {
        let (b, g) = (seq.beta[n].clone(), seq.gamma[n].clone());
        push(n, &b, &g, &mut rows);
    }
    let mut stopped = None;
    for n in n0..n0 + steps {
        let step = match family {
            Family::F12 => f12::step(&pl.spec, n, &seq, ctx),
            _ => f22::step(&pl.spec, n, &seq, ctx),
        };
        match step {
            Ok(s) => {
                seq.beta.push(s.beta.clone());
                seq.gamma.push(s.gamma.clone());
                push(n + 2, &s.beta, &s.gamma, &mut rows);
            }
            Err(e) => {
                stopped = Some(e);
                break;
            }
        }
    }
    Ok(LfReport { family, seed: n0, rows, records: Vec::new(), errata: Vec::new(), stopped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(id: &str, n: usize, x: f64) -> Residual {
        Residual { identity: id.into(), n, residual: Float::with_val(64, x) }
    }

    #[test]
    fn names_split() {
        assert_eq!(base_name("f12.pi2[printed]"), "f12.pi2");
        assert_eq!(variant_name("f12.pi2[printed]"), Some("printed"));
        assert_eq!(variant_name("f12.p1"), None);
    }

    #[test]
    fn errata_needs_systematic_miss_and_replacement() {
        let tol = Float::with_val(64, 1e-10);
        let recs = vec![
            r("x[printed]", 1, 1e-3),
            r("x[printed]", 2, 1e-2),
            r("x[corrected]", 1, 1e-20),
            r("x[corrected]", 2, 1e-20),
            r("y[printed]", 1, 1e-3),
            r("y[printed]", 2, 1e-30),
            r("y[corrected]", 1, 1e-20),
            r("z[printed]", 1, 1e-3),
            r("z[corrected]", 1, 1e-3),
        ];
        let f = errata_flags(&recs, &tol);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].identity, "x[printed]");
    }

    #[test]
    fn seq_is_zero_outside_domain() {
        let s = Seq { beta: vec![Float::with_val(64, 2)], gamma: vec![Float::new(64), Float::with_val(64, 3)], bits: 64 };
        assert_eq!(*s.beta(-1).value(), 0);
        assert_eq!(*s.beta(0).value(), 2);
        assert_eq!(*s.gamma(0).value(), 0);
        assert_eq!(*s.gamma(1).value(), 3);
        assert_eq!(*s.gamma(5).value(), 0);
    }

    #[test]
    fn tiny_denominator_rejected() {
        let ctx = PrecisionContext::new(128).unwrap();
        let one = Val::int(1, 128);
        let d = &one - &one;
        assert!(check_den("x", 3, &d, &ctx).is_err());
        assert!(check_den("x", 3, &one, &ctx).is_ok());
    }
}
