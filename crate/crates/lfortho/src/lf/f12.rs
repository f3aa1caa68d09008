//! ₁F₂ family: σ(z) = η(z+a₁), θ(z) = z(z+b₁)(z+b₂).

use super::{check_den, Coeffs, LfContext, Params, Rel, Residual, StepResult};
use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::tracked::Val;
use crate::weights::FamilySpec;

/// γ_{n+1}(γ_n+γ_{n+1}+γ_{n+2}+(β_{n+1}+b₁)(β_{n+1}+b₂)+β_n(β_{n+1}+β_n+b₁+b₂)
/// − n(2β_n+β_{n+1}+b₁+b₂−k·n) − η)
fn x_term<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>, k: i64) -> Val {
    let n = w.n;
    w.ga(1)
        * (w.ga(0) + w.ga(1) + w.ga(2)
            + (w.be(1) + &p.b1) * (w.be(1) + &p.b2)
            + w.be(0) * (w.be(1) + w.be(0) + p.bs())
            - (2 * w.be(0) + w.be(1) + p.bs() - k * n) * n
            - &p.eta)
}

/// η(n+1)(β_n+a₁)
fn a_term<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>) -> Val {
    &p.eta * (w.be(0) + &p.a[0]) * (w.n + 1)
}

/// (X − η(n+1)(β_n+a₁)) / (η+γ_{n+1}): the p¹ / π^{[2]} inner quotient.
fn inner<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>) -> Val {
    (x_term(p, w, 1) - a_term(p, w)) / (&p.eta + w.ga(1))
}

/// p¹_n from the recurrence coefficients.
pub fn p1_formula<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>) -> Val {
    let n = w.n;
    p.c(n * (n + 1) / 2) - w.be(0) * n - inner(p, w)
}

/// π^{[2]}_{n−1} residual variants: (name, π·(η+γ_{n+1}) − numerator).
fn pi2_variants<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>, pi: &Val) -> Vec<(&'static str, Val)> {
    let den = &p.eta + w.ga(1);
    let lhs = pi * &den;
    let printed_a = &p.eta * &p.a[0] * (w.n + 1);
    vec![
        ("printed", &lhs - (x_term(p, w, 2) - printed_a)),
        ("a-substituted", &lhs - (x_term(p, w, 2) - a_term(p, w))),
        ("corrected", &lhs - (x_term(p, w, 1) - a_term(p, w))),
    ]
}

/// Remainder R shared by the superdiagonal identity and the β step.
fn r_term<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>, pi2: &Val) -> Val {
    let n = w.n;
    let (b0, b1) = (w.be(0), w.be(1));
    w.ga(1) * (&b0 + 1 - &b1)
        + w.ga(0) * (w.be(-1) + 2 * &b0 + p.bs() - n + 2)
        + &b0 * &b0 * &b0
        - &b1 * &b1 * &b1
        + &b1 * &b1
        + &b0 * &b0
        + &b0 * &b1
        + p.bs() * (&b0 * &b0 - &b1 * &b1 + &b1 + &b0)
        - (2 * &b0 * &b0 - &b0 * &b1 - &b1 * &b1 + 3 * &b0) * n
        + (&b0 - &b1 + 1) * (p.c(n * (n + 1)) - p.bs() * n + p.bp() - pi2)
}

/// Superdiagonal compatibility identity: printed and corrected.
fn superdiagonal<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>, pi2: &Val) -> Vec<(&'static str, Val)> {
    let n = w.n;
    let (b0, b1, b2) = (w.be(0), w.be(1), w.be(2));
    let common = w.ga(1) * (&b0 + 1 - &b1)
        + w.ga(0) * (w.be(-1) + 2 * &b0 + p.bs() - (n - 1) + 1)
        + &b0 * &b0 * &b0
        - &b1 * &b1 * &b1
        + &b1 * &b1
        + &b0 * &b0
        + &b0 * &b1
        + p.bs() * (&b0 * &b0 - &b1 * &b1 + &b1 + &b0)
        + (&b0 + 1 - &b1) * (p.c(n * (n + 1)) - p.bs() * n + p.bp() - pi2);
    let cubic = 2 * &b0 * &b0 - &b0 * &b1 - &b1 * &b1 + 3 * &b0;
    let printed = &p.eta * (&b0 + &b1 - 1)
        - (w.ga(2) * (p.c(n) - 2 * &b1 - &b2 + p.bs() + 1) + &common - &cubic * n);
    let corrected = &p.eta * (&b0 - &b1 - 1)
        - (w.ga(2) * (p.c(n) - 2 * &b1 - &b2 - p.bs() + 1) + &common - (cubic + 1) * n);
    vec![("printed", printed), ("corrected", corrected)]
}

/// γ_{n+2} right-hand side of the first step equation.
fn gamma_rhs<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>) -> Val {
    let n = w.n;
    let (bm, b0, b1) = (w.be(-1), w.be(0), w.be(1));
    let (gm, g0, g1) = (w.ga(-1), w.ga(0), w.ga(1));
    let eg1 = &p.eta + &g1;
    let prev = &g0
        * (&gm + &g0 + &g1 + (&b0 + &p.b1) * (&b0 + &p.b2) + &bm * (&b0 + &bm + p.bs())
            - (2 * &bm + &b0 + p.bs() - n + 1) * (n - 1)
            - &p.eta)
        - &p.eta * (&bm + &p.a[0]) * n;
    &eg1 / &g1 * (&bm - &b0 + 1) * n
        - (&g0 + &g1 + (&b1 + &p.b1) * (&b1 + &p.b2) + &b0 * (&b1 + &b0 + p.bs())
            - (2 * &b0 + &b1 + p.bs() - n) * n
            - &p.eta)
        + &p.eta / &g1 * (&b0 + &p.a[0]) * (n + 1)
        + &eg1 / ((&p.eta + &g0) * &g1) * prev
}

/// β_{n+2} step in residual form γ_{n+2}(β_{n+2} − c) − (…) for both variants.
fn beta_variants<C: Coeffs + ?Sized>(p: &Params, w: &Rel<C>) -> Vec<(&'static str, Val)> {
    let n = w.n;
    let (b0, b1, b2, g2) = (w.be(0), w.be(1), w.be(2), w.ga(2));
    let r = r_term(p, w, &inner(p, w));
    let printed = &g2 * (&b2 - (p.c(n) - 2 * &b1 + p.bs() + 1))
        - (&p.eta * (1 - &b0 - &b1) + &r);
    let corrected = &g2 * (&b2 - (p.c(n + 1) - 2 * &b1 - p.bs()))
        - (&p.eta * (1 - &b0 + &b1) + &r - n);
    vec![("printed", printed), ("corrected", corrected)]
}

pub fn identities(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let p = &ctx.par;
    let w = ctx.rel(n);
    let ni = n as i64;
    let mut out = Vec::new();
    let pi2 = ctx.pi(2, ni - 1);

    let p1 = (ctx.p1(ni) - p.c(ni * (ni + 1) / 2) + w.be(0) * ni) * (&p.eta + w.ga(1))
        + (x_term(p, &w, 1) - a_term(p, &w));
    out.push(Residual::new("f12.p1", n, &p1));
    for (v, r) in pi2_variants(p, &w, &pi2) {
        out.push(Residual::new(format!("f12.pi2[{v}]"), n, &r));
    }
    let psi0 = ctx.psi(0, n) - &p.eta * ctx.h(ni) * (w.be(0) + ni + &p.a[0]);
    out.push(Residual::new("f12.psi0", n, &psi0));
    let psi1 = ctx.psi(1, n)
        - &p.eta * (ctx.h(ni + 1) + ctx.h(ni) * (&pi2 + (w.be(0) + &p.a[0]) * (ni + 1)));
    out.push(Residual::new("f12.psi1", n, &psi1));
    let psi2 = ctx.psi(2, n) - ctx.h(ni + 2) * (w.be(0) + w.be(1) + w.be(2) + p.bs() - ni);
    out.push(Residual::new("f12.psi2", n, &psi2));
    out.push(Residual::new("f12.psi_m1", n, &(ctx.psi(-1, n) - &p.eta * ctx.h(ni + 1))));
    out.push(Residual::new("f12.psi3", n, &(ctx.psi(3, n) - ctx.h(ni + 3))));
    for (v, r) in superdiagonal(p, &w, &pi2) {
        out.push(Residual::new(format!("f12.superdiagonal[{v}]"), n, &r));
    }
    out
}

pub fn step_residuals(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let p = &ctx.par;
    let w = ctx.rel(n);
    let mut out = vec![Residual::new("f12.lf_gamma", n, &(w.ga(2) - gamma_rhs(p, &w)))];
    for (v, r) in beta_variants(p, &w) {
        out.push(Residual::new(format!("f12.lf_beta[{v}]"), n, &r));
    }
    out
}

/// Explicit step: γ_{n+2} from the printed γ equation, then β_{n+2} from the
/// corrected β equation using that γ_{n+2}. Needs β, γ through index n+1.
pub fn step<C: Coeffs + ?Sized>(
    spec: &FamilySpec,
    n: usize,
    seq: &C,
    ctx: &PrecisionContext,
) -> Result<StepResult> {
    if n < 1 {
        return Err(Error::OutOfRange { n, lo: 1, hi: usize::MAX });
    }
    let p = Params::new(spec);
    let w = Rel { c: seq, n: n as i64 };
    check_den("gamma_{n+1}", n, &w.ga(1), ctx)?;
    check_den("eta+gamma_n", n, &(&p.eta + w.ga(0)), ctx)?;
    check_den("eta+gamma_{n+1}", n, &(&p.eta + w.ga(1)), ctx)?;
    let g = gamma_rhs(&p, &w);
    check_den("gamma_{n+2}", n, &g, ctx)?;
    let g2 = Val::var(&g.v);
    let (b0, b1) = (w.be(0), w.be(1));
    let ext = Extended { inner: &w, g2: &g2 };
    let we = Rel { c: &ext, n: n as i64 };
    let r = r_term(&p, &we, &inner(&p, &we));
    let beta = (&p.eta * (1 - &b0 + &b1) + r - n as i64) / &g2 + p.c(n as i64 + 1) - 2 * &b1 - p.bs();
    Ok(StepResult { gamma: g.v, beta: beta.v })
}

/// Window with γ_{n+2} appended.
struct Extended<'a, C: Coeffs + ?Sized> {
    inner: &'a Rel<'a, C>,
    g2: &'a Val,
}

impl<C: Coeffs + ?Sized> Coeffs for Extended<'_, C> {
    fn beta(&self, k: i64) -> Val {
        self.inner.c.beta(k)
    }
    fn gamma(&self, k: i64) -> Val {
        if k == self.inner.n + 2 {
            self.g2.clone()
        } else {
            self.inner.c.gamma(k)
        }
    }
    fn bits(&self) -> u32 {
        self.inner.c.bits()
    }
}

