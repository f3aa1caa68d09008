//! ₂F₂ family: σ(z) = η(z+a₁)(z+a₂), θ(z) = z(z+b₁)(z+b₂).

use rug::Float;

use super::{check_den, Coeffs, LfContext, Params, Rel, Residual, StepResult};
use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::tracked::Val;
use crate::weights::FamilySpec;

/// β_{n−1..n+2}, γ_{n−1..n+2} at one n.
struct W {
    n: i64,
    bm: Val,
    b0: Val,
    b1: Val,
    b2: Val,
    gm: Val,
    g0: Val,
    g1: Val,
    g2: Val,
}

impl W {
    fn new<C: Coeffs + ?Sized>(w: &Rel<C>) -> W {
        W {
            n: w.n,
            bm: w.be(-1),
            b0: w.be(0),
            b1: w.be(1),
            b2: w.be(2),
            gm: w.ga(-1),
            g0: w.ga(0),
            g1: w.ga(1),
            g2: w.ga(2),
        }
    }
}

fn sq(x: &Val) -> Val {
    x * x
}

fn a_n(p: &Params, w: &W) -> Val {
    let (n, eta) = (w.n, &p.eta);
    let sa = &p.a[0] + &p.a[1];
    -(eta * eta)
        * (p.c(n * (n + 1) / 2) + &w.bm + &w.b0 + &w.g2 + &w.g1 + (&w.b1 + &sa) * (n + 1)
            + (&w.b1 + &p.a[0]) * (&w.b1 + &p.a[1]))
        + eta
            * (4 * &w.g0
                + &w.g1 * (&sa - p.bs() + 2 * (n + 1) + &w.bm - &w.b1)
                + &w.g2 * (p.c(n - 1) - 2 * &w.b1 - &w.b2 - p.bs())
                + (&sa - p.bs() - &w.b1) * (n * (n + 1) / 2)
                + (&w.b1 + p.bs() + &sa - n * n) * (&w.b0 + &w.bm)
                + 2 * (sq(&w.b0) + sq(&w.bm))
                - (&w.b1 + &p.b1) * (&w.b1 + &p.b2) * (&w.b1 - n - 1))
        - &w.g1
            * (p.c(n * (n - 1) / 2) + &w.g2 + &w.g1 + &w.g0 + &w.bm
                + (&w.b1 + &p.b1) * (&w.b1 + &p.b2)
                + (&w.b0 - n) * (&w.b1 + &w.b0 + p.bs()))
}

/// A_n as it appears in the proof's expanded form.
fn a_n_proof(p: &Params, w: &W) -> Val {
    let (n, eta) = (w.n, &p.eta);
    let sa = &p.a[0] + &p.a[1];
    -(eta * eta)
        * (p.c(n * (n + 1) / 2) + &w.bm + &w.b0 + &w.g2 + &w.g1 + (&w.b1 + &sa) * (n + 1)
            + (&w.b1 + &p.a[0]) * (&w.b1 + &p.a[1]))
        + eta
            * (&w.g1 * (&sa - p.bs() + 2 * (n + 1) + &w.bm - &w.b1)
                + &w.g2 * (p.c(n - 1) - 2 * &w.b1 - &w.b2 - p.bs())
                + (&w.bm + &w.b0) * n
                + &sa * &w.bm
                + 4 * &w.g0
                + 2 * (sq(&w.b0) + sq(&w.bm))
                + &w.b0 * (&w.b1 + &sa + p.bs())
                + &p.a[0] * &p.a[1] * (n + 1)
                + &w.bm * (&w.b1 + p.bs())
                - (&w.b1 + &p.b1) * (&w.b1 + &p.b2) * (&w.b1 - n - 1)
                + (&sa - p.bs() - &w.b1) * (n * (n + 1) / 2)
                - (&w.b0 + &w.bm) * (n * n))
        - &w.g1
            * (p.c(n * (n - 1) / 2) + &w.g2 + &w.g1 + &w.g0 + &w.bm
                - (&w.b1 + &w.b0 + p.bs()) * n
                + (&w.b1 + &p.b1) * (&w.b1 + &p.b2)
                + &w.b0 * (&w.b1 + &w.b0 + p.bs()))
}

fn a_hat(p: &Params, w: &W) -> Val {
    let (n, eta) = (w.n, &p.eta);
    let sa = &p.a[0] + &p.a[1];
    -(eta * eta)
        * (p.c(n * (n + 1) / 2) + &w.bm + &w.b0 + &w.g1 + (&w.b1 + &sa) * (n + 1)
            + (&w.b1 + &p.a[0]) * (&w.b1 + &p.a[1]))
        + eta
            * (4 * &w.g0
                + &w.g1 * (&sa - p.bs() + 2 * (n + 1) + &w.bm - &w.b1)
                + (&sa - p.bs() - &w.b1) * (n * (n + 1) / 2)
                + (&w.b1 + p.bs() + &sa - n * n) * (&w.b0 + &w.bm)
                + 2 * (sq(&w.b0) + sq(&w.bm))
                - (&w.b1 + &p.b1) * (&w.b1 + &p.b2) * (&w.b1 - n - 1))
        - &w.g1
            * (p.c(n * (n - 1) / 2) + &w.g1 + &w.g0 + &w.bm
                + (&w.b1 + &p.b1) * (&w.b1 + &p.b2)
                + (&w.b0 - n) * (&w.b1 + &w.b0 + p.bs()))
}

fn b_n(p: &Params, w: &W) -> Val {
    let eta = &p.eta;
    eta * eta
        + eta * (2 * &w.bm + 2 * &w.b0 + &w.b1 + &p.a[0] + &p.a[1] + p.bs() + 2 * w.n)
        + &w.g1
}

/// C_n without its γ_{n+2} term, and the γ_{n+2} coefficient.
fn c_parts(p: &Params, w: &W, corrected: bool) -> (Val, Val) {
    let n = w.n;
    let sa = &p.a[0] + &p.a[1];
    let delta = 1 + &w.b0 - &w.b1;
    let eta_part = if corrected {
        (&w.b0 + &w.b1 + &sa + n) * (&w.b0 - &w.b1 - 1) + &w.g0
    } else {
        (&w.b0 + &w.b1 + &sa + n) * (&w.b0 - &w.b1 - 1) - &w.b0 - &w.b1 + &w.g0
    };
    let b0_part = &w.b0 * (&w.b1 + &w.b0 + p.bs());
    let b0_part = if corrected { &delta * b0_part } else { b0_part };
    let c0 = &p.eta * eta_part
        - (&w.b1 - &w.b0 - 1) * (&w.b1 + &w.b0 + &w.bm) * n
        - b0_part
        - &w.g0 * (&w.bm + 2 * &w.b0 + p.bs() - n + 2);
    let cg = 2 * &w.b1 + p.bs() - n - 1;
    (c0, cg)
}

fn c_n(p: &Params, w: &W, corrected: bool) -> Val {
    let (c0, cg) = c_parts(p, w, corrected);
    c0 + &w.g2 * cg
}

fn d_n(p: &Params, w: &W) -> Val {
    let n = w.n;
    p.c(n * (n - 1) / 2) + sq(&w.b1) + (&w.b1 - n) * p.bs() + p.bp() + &w.bm * (n - 1) + &w.g1
}

fn e_n(p: &Params, w: &W) -> Val {
    let n = w.n;
    let sa = &p.a[0] + &p.a[1];
    -(&p.eta)
        * (p.c(n * (n - 1) / 2) + &w.bm + (&w.b0 + &sa) * n + (&w.b0 + &p.a[0]) * (&w.b0 + &p.a[1])
            - &w.g0 * (p.c(n - 2) + &w.bm + &w.b0 + &sa)
            + &w.g1 * (p.c(n + 1) + &w.b0 + &w.b1 + &sa))
        + &w.g1
            * (p.c(n * (n - 1) / 2) + &w.g1 - &w.bm + (&w.b0 - n) * (&w.b1 + &w.b0 + p.bs())
                + (&w.b1 + &p.b1) * (&w.b1 + &p.b2))
        - &w.g0
            * (p.c((n - 1) * (n - 2) / 2) + &w.g0 + &w.gm + (&w.b0 + &p.b1) * (&w.b0 + &p.b2)
                + (&w.bm - n + 1) * (&w.b0 + &w.bm + p.bs()))
}

/// η² − η(n−1−2β_{n+1}−b₁−b₂) + γ_{n+1}
fn k_printed(p: &Params, w: &W) -> Val {
    &p.eta * &p.eta - &p.eta * (p.c(w.n - 1) - 2 * &w.b1 - p.bs()) + &w.g1
}

/// γ_n − γ_{n+1} − η
fn q_n(p: &Params, w: &W) -> Val {
    &w.g0 - &w.g1 - &p.eta
}

/// 1 + β_n − β_{n+1}
fn delta_n(w: &W) -> Val {
    1 + &w.b0 - &w.b1
}

/// Corrected subleading-coefficient relation: p¹_{n−1}·B′ = Â′ + γ_{n+2}K₁ − ηγ_{n+2}β_{n+2}.
struct Corrected {
    b: Val,
    k1: Val,
    a_hat: Val,
}

fn corrected(p: &Params, w: &W) -> Corrected {
    let (n, eta) = (w.n, &p.eta);
    let sa = &p.a[0] + &p.a[1];
    let sb = p.bs();
    let nn = n * (n + 1) / 2;
    let b = eta * eta + eta * (&w.b1 - &sa + &sb - 2 * n) - &w.g1;
    let k1 = eta * eta + eta * (p.c(n + 1) - 2 * &w.b1 - &sb) + &w.g1;
    let y = -(-(&w.b0 * &w.b1) + 2 * &w.b0 * &w.g1 + &w.b0 * (&sa - &sb) + &w.b0 * (2 * n)
        + &w.b1 * &w.b1 * &w.b1
        + sq(&w.b1) * &sb
        - sq(&w.b1) * n
        - sq(&w.b1)
        - &w.b1 * &w.bm
        + 3 * &w.b1 * &w.g1
        + &w.b1 * p.bp()
        - &w.b1 * &sb * (n + 1)
        + &w.b1 * nn
        + &w.bm * (&sa - &sb)
        + &w.bm * (2 * n)
        + &w.g1 * (&sa + &sb)
        + &p.a[0] * &p.a[1] * (n + 1)
        + &sa * nn
        - p.bp() * (n + 1)
        + &sb * nn);
    let a_hat = eta * eta
        * (p.c(nn) + &w.bm + &w.b0 + &w.g1 + (&w.b1 + &sa) * (n + 1)
            + (&w.b1 + &p.a[0]) * (&w.b1 + &p.a[1]))
        + &w.g1
            * (p.c(n * (n - 1) / 2) + &w.g0 + &w.g1 + p.bp() - &sb * n + sq(&w.b0) + &w.b0 * &w.b1
                + sq(&w.b1)
                + (&sb - n) * (&w.b0 + &w.b1)
                - &w.bm)
        + eta * y;
    Corrected { b, k1, a_hat }
}

/// Helper functions at n, evaluated as printed.
#[derive(Debug, Clone)]
pub struct Helpers {
    pub a: Float,
    pub a_hat: Float,
    pub b: Float,
    pub c: Float,
    pub d: Float,
    pub e: Float,
    pub f: Float,
    pub g: Float,
}

/// Printed helper functions; γ_{n+2}, β_{n+2} enter only A_n and C_n.
pub fn helpers<C: Coeffs + ?Sized>(
    spec: &FamilySpec,
    n: usize,
    seq: &C,
    ctx: &PrecisionContext,
) -> Result<Helpers> {
    let p = Params::new(spec);
    let w = W::new(&Rel { c: seq, n: n as i64 });
    let q = q_n(&p, &w);
    let delta = delta_n(&w);
    check_den("gamma_n-gamma_{n+1}-eta", n, &q, ctx)?;
    check_den("1+beta_n-beta_{n+1}", n, &delta, ctx)?;
    check_den("eta", n, &p.eta, ctx)?;
    let (a, ah, b, c, d, e) =
        (a_n(&p, &w), a_hat(&p, &w), b_n(&p, &w), c_n(&p, &w, false), d_n(&p, &w), e_n(&p, &w));
    check_den("B_n", n, &b, ctx)?;
    let eq = &e / &q;
    let f = -&eq + &c / &delta - &d + (&ah - &eq * &b) / (&p.eta * &delta);
    let g = &w.g1 / &q + &p.eta / &delta + (k_printed(&p, &w) + &w.g1 * &b / &q) / (&p.eta * &delta);
    Ok(Helpers { a: a.v, a_hat: ah.v, b: b.v, c: c.v, d: d.v, e: e.v, f: f.v, g: g.v })
}

/// p¹_{n−1} by the three routes (subleading relation, compatibility 4.1 and 4.2).
#[derive(Debug, Clone)]
pub struct P1Routes {
    pub pn: Result<Float>,
    pub compat_4_1: Result<Float>,
    pub compat_4_2: Result<Float>,
}

pub fn p1_routes(ctx: &LfContext, n: usize, corrected_forms: bool, pc: &PrecisionContext) -> P1Routes {
    let p = &ctx.par;
    let w = W::new(&ctx.rel(n));
    let quot = |name: &'static str, num: Val, den: Val| -> Result<Float> {
        check_den(name, n, &den, pc)?;
        Ok((num / den).v)
    };
    let pn = if corrected_forms {
        let c = corrected(p, &w);
        quot("B_n", c.a_hat + &w.g2 * &c.k1 - &p.eta * &w.g2 * &w.b2, c.b)
    } else {
        quot("B_n", a_n(p, &w), b_n(p, &w))
    };
    let c41 = (|| {
        let den = delta_n(&w);
        let v = quot(
            "1+beta_n-beta_{n+1}",
            c_n(p, &w, corrected_forms) + &w.g2 * (&w.b2 - &p.eta),
            den,
        )?;
        Ok((Val::var(&v) - d_n(p, &w)).v)
    })();
    let c42 = quot("gamma_n-gamma_{n+1}-eta", e_n(p, &w) + &w.g1 * &w.g2, q_n(p, &w));
    P1Routes { pn, compat_4_1: c41, compat_4_2: c42 }
}

pub fn identities(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let p = &ctx.par;
    let w = W::new(&ctx.rel(n));
    let ni = n as i64;
    let u = ctx.p1(ni - 1);
    let mut out = Vec::new();
    let r = |id: &str, v: Val| Residual::new(id.to_string(), n, &v);

    out.push(r("f22.pn[printed-definition]", &u * b_n(p, &w) - a_n(p, &w)));
    out.push(r("f22.pn[printed-proof]", &u * b_n(p, &w) - a_n_proof(p, &w)));
    let c = corrected(p, &w);
    out.push(r(
        "f22.pn[corrected]",
        &u * &c.b - (&c.a_hat + &w.g2 * &c.k1 - &p.eta * &w.g2 * &w.b2),
    ));
    let delta = delta_n(&w);
    for (v, corr) in [("printed", false), ("corrected", true)] {
        let res = (&u + d_n(p, &w)) * &delta - (c_n(p, &w, corr) + &w.g2 * (&w.b2 - &p.eta));
        out.push(r(&format!("f22.compat_4_1[{v}]"), res));
    }
    out.push(r("f22.compat_4_2", &u * q_n(p, &w) - (e_n(p, &w) + &w.g1 * &w.g2)));

    let sa = &p.a[0] + &p.a[1];
    let h = |k: i64| ctx.h(ni + k);
    let psi0 = &p.eta
        * (p.c(ni * (ni - 1) / 2) + &w.bm + (&w.b0 + &sa) * ni + &w.g0 + &w.g1
            + (&w.b0 + &p.a[0]) * (&w.b0 + &p.a[1])
            - &u)
        * h(0);
    out.push(r("f22.psi0", ctx.psi(0, n) - psi0));
    let psi1 = (p.c(ni * (ni - 1) / 2) + &w.g0 + &w.g1 + &w.g2 + (&w.b1 + &p.b1) * (&w.b1 + &p.b2)
        + (&w.b0 - ni) * (&w.b0 + &w.b1 + p.bs())
        - &w.bm
        + &u)
        * h(1);
    out.push(r("f22.psi1", ctx.psi(1, n) - psi1));
    let psi2 = (&w.b0 + &w.b1 + &w.b2 + p.bs() - ni) * h(2);
    out.push(r("f22.psi2", ctx.psi(2, n) - psi2));
    let psim1 = &p.eta * (&w.b0 + &w.b1 + &sa + ni) * h(1);
    out.push(r("f22.psi_m1", ctx.psi(-1, n) - psim1));
    out.push(r("f22.psi_m2", ctx.psi(-2, n) - &p.eta * h(2)));
    out.push(r("f22.psi3", ctx.psi(3, n) - h(3)));
    out
}

/// Corrected Laguerre–Freud pair F′, G′ with γ_{n+2} = F′/G′.
fn fg_corrected(p: &Params, w: &W) -> (Val, Val) {
    let c = corrected(p, w);
    let (c0, cg) = c_parts(p, w, true);
    let q = q_n(p, w);
    let delta = delta_n(w);
    let e = e_n(p, w);
    let d = d_n(p, w);
    let eta = &p.eta;
    let f = &q * (&c.a_hat + eta * &c0 - eta * &d * &delta) - &e * (&c.b + eta * &delta);
    let g = &w.g1 * (&c.b + eta * &delta) - &q * (&c.k1 + eta * &cg - eta * eta);
    (f, g)
}

pub fn step_residuals(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let p = &ctx.par;
    let w = W::new(&ctx.rel(n));
    let eta = &p.eta;
    let q = q_n(p, &w);
    let delta = delta_n(&w);
    let (e, b, ah) = (e_n(p, &w), b_n(p, &w), a_hat(p, &w));
    let kp = k_printed(p, &w);
    let mut out = Vec::new();
    let r = |id: &str, v: Val| Residual::new(id.to_string(), n, &v);

    // printed γ equation multiplied through by η(1+β_n−β_{n+1})(γ_n−γ_{n+1}−η)
    let g_scaled = &w.g1 * eta * &delta + eta * eta * &q + &kp * &q + &w.g1 * &b;
    let f_scaled = -(&e * eta * &delta) + eta * c_n(p, &w, false) * &q
        - d_n(p, &w) * eta * &delta * &q
        + &ah * &q
        - &e * &b;
    out.push(r("f22.lf_gamma[printed]", &w.g2 * g_scaled - f_scaled));
    let (fc, gc) = fg_corrected(p, &w);
    out.push(r("f22.lf_gamma[corrected]", &w.g2 * gc - fc));

    let lhs = eta * &w.g2 * &w.b2 * &q;
    let printed = &lhs - (&q * (&ah - &kp * &w.g2) - (&e + &w.g1 * &w.g2) * &b);
    out.push(r("f22.lf_beta[printed]", printed));
    let c = corrected(p, &w);
    let corr = &lhs - (&q * (&c.a_hat + &w.g2 * &c.k1) - (&e + &w.g1 * &w.g2) * &c.b);
    out.push(r("f22.lf_beta[corrected]", corr));
    out
}

/// Explicit corrected step: γ_{n+2} = F′/G′, then β_{n+2}. Needs β, γ through n+1.
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
    let w = W::new(&Rel { c: seq, n: n as i64 });
    let q = q_n(&p, &w);
    check_den("gamma_n-gamma_{n+1}-eta", n, &q, ctx)?;
    check_den("eta", n, &p.eta, ctx)?;
    let (f, g) = fg_corrected(&p, &w);
    check_den("G_n", n, &g, ctx)?;
    let gamma = f / g;
    check_den("gamma_{n+2}", n, &gamma, ctx)?;
    let gamma = Val::var(&gamma.v);
    let c = corrected(&p, &w);
    let u = (e_n(&p, &w) + &w.g1 * &gamma) / &q;
    let x = (&c.a_hat + &gamma * &c.k1 - u * &c.b) / &p.eta;
    let beta = x / &gamma;
    Ok(StepResult { gamma: gamma.v, beta: beta.v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::Seq;
    use crate::weights::Family;

    const B: u32 = 256;

    fn spec() -> FamilySpec {
        let c = PrecisionContext::new(B).unwrap();
        FamilySpec::new(
            Family::F22,
            vec![c.ratio(3, 2), c.ratio(5, 4)],
            vec![c.ratio(1, 2), c.ratio(1, 4)],
            c.ratio(2, 1),
        )
        .unwrap()
    }

    fn seq(beta: &[f64], gamma: &[f64]) -> Seq {
        Seq {
            beta: beta.iter().map(|x| Float::with_val(B, *x)).collect(),
            gamma: gamma.iter().map(|x| Float::with_val(B, *x)).collect(),
            bits: B,
        }
    }

    #[test]
    fn b_n_hand_expansion() {
        let s = spec();
        let sq = seq(&[0.5, 1.25, 2.0, 3.5, 4.0, 4.75], &[0.0, 1.5, 2.5, 3.0, 4.5, 6.0]);
        let w = W::new(&Rel { c: &sq, n: 3 });
        let got = b_n(&Params::new(&s), &w).v;
        // η² + η(2β₂ + 2β₃ + β₄ + a₁ + a₂ + b₁ + b₂ + 6) + γ₄
        let want = 4.0 + 2.0 * (4.0 + 7.0 + 4.0 + 1.5 + 1.25 + 0.5 + 0.25 + 6.0) + 4.5;
        assert_eq!(got, want);
    }

    #[test]
    fn b_zero_on_zero_window() {
        let c = PrecisionContext::new(B).unwrap();
        let s = FamilySpec::new(
            Family::F22,
            vec![c.ratio(1, 2), c.ratio(1, 4)],
            vec![c.ratio(1, 8), c.ratio(1, 16)],
            c.ratio(1, 1),
        )
        .unwrap();
        // dyadic parameters keep every term exact
        let sq = seq(&[0.0; 4], &[0.0; 4]);
        let w = W::new(&Rel { c: &sq, n: 0 });
        let got = b_n(&Params::new(&s), &w).v;
        let want = Float::with_val(B, 1) + &s.a[0] + &s.a[1] + &s.b[0] + &s.b[1];
        assert_eq!(got, want);
    }

    #[test]
    fn hat_a_is_a_without_gamma_n2_terms() {
        let s = spec();
        let p = Params::new(&s);
        let sq = seq(&[0.3, 1.7, 2.2, 3.9, 4.1, 5.6, 6.2], &[0.0, 1.1, 2.3, 3.7, 4.2, 5.9, 6.4]);
        for n in 1..4 {
            let w = W::new(&Rel { c: &sq, n });
            let eta = &p.eta;
            let g2_terms = -(eta * eta) * &w.g2
                + eta * &w.g2 * (p.c(n - 1) - 2 * &w.b1 - &w.b2 - p.bs())
                - &w.g1 * &w.g2;
            let r = a_n(&p, &w) - a_hat(&p, &w) - g2_terms;
            assert!(r.residual() < 1e-70, "n={n}");
        }
    }

    #[test]
    fn charlier_helpers_underflow() {
        // β_n = n + 2, γ_n = 2n makes 1 + β_n − β_{n+1} vanish.
        let s = spec();
        let c = PrecisionContext::new(B).unwrap();
        let sq = seq(&[2.0, 3.0, 4.0, 5.0, 6.0, 7.0], &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let e = helpers(&s, 2, &sq, &c).unwrap_err();
        assert_eq!(e, Error::DenominatorUnderflow { name: "1+beta_n-beta_{n+1}", n: 2 });
    }
}
