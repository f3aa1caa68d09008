//! ₃F₂ family: σ(z) = η(z+a₁)(z+a₂)(z+a₃), θ(z) = z(z+b₁)(z+b₂).
//!
//! Only constraint residuals exist here; there are no explicit step equations.

use super::{LfContext, Params, Residual};
use crate::tracked::Val;

struct W {
    n: i64,
    bmm: Val,
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
    fn new(ctx: &LfContext, n: usize) -> W {
        let w = ctx.rel(n);
        W {
            n: n as i64,
            bmm: w.be(-2),
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

/// The third sub-diagonal entry as used by the ₃F₂ relations: −Π⁻¹(j+3, j).
pub fn pi_m3(ctx: &LfContext, j: i64) -> Val {
    -ctx.pi(-3, j)
}

fn a_n(p: &Params, w: &W) -> Val {
    let n = w.n;
    let sa = p.a_sum();
    p.c(n * (n + 1)) + (&w.bm + &w.b0 + &w.b1) * n + &sa * (&w.b0 + &w.b1 + n) + p.a_e2()
        + &w.g0
        + &w.g1
        + &w.g2
        + sq(&w.b0)
        + sq(&w.b1)
        + &w.b0 * &w.b1
}

fn b_n(p: &Params, w: &W) -> Val {
    let n = w.n;
    let (b0, b1) = (&w.b0, &w.b1);
    -(sq(b0) - sq(b1) + b1 + b0 - &w.g2) * n
        + (b1 - b0 - 1) * ((p.bs() - &w.bm) * n - p.bp())
        - p.bs() * (sq(b1) - sq(b0) - b0 - b1)
        - &w.g2 * (&w.b2 + 2 * b1 + p.bs() - 1)
        - &w.g1 * (b1 - b0 - 1)
        + &w.g0 * (&w.bm + 2 * b0 + p.bs() - (n - 2))
        - b1 * b1 * b1
        + b0 * b0 * b0
        + sq(b0)
        + sq(b1)
        + b0 * b1
}

fn c_n(p: &Params, w: &W) -> Val {
    &p.eta + &w.b1 - &w.bmm
}

fn d_n(p: &Params, w: &W) -> Val {
    let n = w.n;
    let (bmm, bm, b0, b1) = (&w.bmm, &w.bm, &w.b0, &w.b1);
    b0 * b0 * b0 + p.bs() * (sq(b0) - bm - bmm + n * (n - 1) / 2) + p.bp() * b0
        - (sq(b0) - bm * bmm + p.bs() * b0 + &w.gm) * n
        - b0 * (bm + bmm)
        - 2 * bm * bmm
        - sq(bm)
        - sq(bmm)
        + &w.g0 * (p.bp() + p.bs() * (b0 + bm - n + 1) - n + bm + 2 * b0 + p.bs())
        - &w.g1 * (p.bs() * (b0 + b1 - n) + p.bp() + n - (b1 + 2 * b0 + p.bs()))
}

fn e_n(w: &W) -> Val {
    let n = w.n;
    &w.g1 * (&w.b0 + &w.b1) * n + &w.g1 * (&w.bm + &w.bmm) - &w.g0 * &w.bmm
        - &w.g0 * (&w.bm + &w.b0) * (n - 1)
}

fn f_n(w: &W) -> Val {
    let n = w.n;
    &w.g1 * (Val::int(n * (n - 1) / 2, w.b0.prec()) + &w.g1 + &w.g2 + sq(&w.b0) + sq(&w.b1) + &w.b0 * &w.b1)
        - &w.g0
            * (Val::int((n - 1) * (n - 2) / 2, w.b0.prec()) + &w.gm + &w.g0 + sq(&w.b0) + sq(&w.bm)
                + &w.b0 * &w.bm)
}

/// G_n with the closing parenthesis where it is printed: the γ terms sit inside
/// the (a₁+a₂+a₃) factor and the (γ_{n+1}−γ_n) factor.
fn g_literal(p: &Params, w: &W) -> Val {
    (&w.g1 - &w.g0)
        * (p.a_e2() + p.a_sum() * (&w.b0 + w.n + &w.g1 * &w.b1 - &w.g0 * (&w.bm - 1)))
}

/// G_n with the (γ_{n+1}−γ_n) factor closed after β_n + n.
fn g_reading_a(p: &Params, w: &W) -> Val {
    (&w.g1 - &w.g0) * (p.a_e2() + p.a_sum() * (&w.b0 + w.n))
        + p.a_sum() * (&w.g1 * &w.b1 - &w.g0 * (&w.bm - 1))
}

/// Corrected π^{[−2]}_{n−2} relation: (numerator, denominator).
fn pi2_corrected(p: &Params, w: &W) -> (Val, Val) {
    let n = w.n;
    let sa = p.a_sum();
    let e = &w.b0 - &w.b1 - 1;
    let num = &p.eta
        * (a_n(p, w) * &e + &w.g0 * (&w.bm + &w.b0 + &w.b1 + &sa + n - 1)
            - &w.g2 * (&w.b0 + &w.b1 + &w.b2 + &sa + n)
            - 2 * n * &e)
        - b_n(p, w)
        + 2 * n * &w.bm * (1 + &w.b0 - &w.b1);
    let den = &p.eta * &e + (&w.b0 - &w.b1 + 1);
    (num, den)
}

pub fn identities(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let p = &ctx.par;
    let w = W::new(ctx, n);
    let ni = n as i64;
    let h = |k: i64| ctx.h(ni + k);
    let sa = p.a_sum();
    let e2 = p.a_e2();
    let mut out = Vec::new();
    let mut r = |id: &str, v: Val| out.push(Residual::new(id.to_string(), n, &v));

    let pim2 = ctx.pi(-2, ni - 2);
    let pim3 = pi_m3(ctx, ni - 3);
    let pip2 = ctx.pi(2, ni - 2);
    let pip3 = ctx.pi(3, ni - 3);

    r("f32.psi_m3", ctx.psi(-3, n) - &p.eta * h(3));
    for (v, bp) in [("beta_plus=beta_n", &w.b0), ("beta_plus=beta_{n+1}", &w.b1)] {
        let f = &p.eta * h(2) * (bp + &w.b1 + &w.b2 + &sa + ni);
        r(&format!("f32.psi_m2[{v}]"), ctx.psi(-2, n) - f);
    }
    let psim1 = &p.eta
        * h(1)
        * (&pip2 + (&w.bm + &w.b0 + &w.b1 + &sa) * ni + &w.g0 + &w.g1 + &w.g2 + sq(&w.b1)
            + sq(&w.b0)
            + &w.b1 * &w.b0
            + (&w.b0 + &w.b1) * &sa
            + &e2);
    r("f32.psi_m1", ctx.psi(-1, n) - psim1);
    let theta_route = |inner_b: Val| {
        h(0) * (&w.b0 * (&w.b0 + &p.b1) * (&w.b0 + &p.b2)
            + &w.g0 * (&w.bm + 2 * &w.b0 + p.bs())
            + &w.g1 * (&w.b1 + 2 * &w.b0 + p.bs())
            - (sq(&w.b0) + sq(&w.bm) + &w.b0 * &w.bm + inner_b + &w.gm + &w.g0 + &w.g1) * ni
            + &pim2 * (&w.b0 + &w.bm + &w.bmm + p.bs())
            - &pim3)
    };
    let literal = (&w.b0 + &w.bm) * p.bs() * p.bp();
    r("f32.psi0_theta[printed]", ctx.psi(0, n) - theta_route(literal));
    let plus = (&w.b0 + &w.bm) * p.bs() + p.bp();
    r("f32.psi0_theta[plus-b1b2]", ctx.psi(0, n) - theta_route(plus));
    let psi0s = &p.eta
        * h(0)
        * (&pip3 + &pip2 * (&w.bmm + &w.bm + &w.b0 + &sa)
            + (sq(&w.bm) + sq(&w.b0) + &w.b0 * &w.bm + &e2 + (&w.b0 + &w.bm) * &sa + &w.gm + &w.g0
                + &w.g1)
                * ni
            + &w.g0 * (&w.bm + 2 * &w.b0 + &sa)
            + &w.g1 * (&w.b1 + 2 * &w.b0 + &sa)
            + (&w.b0 + &p.a[0]) * (&w.b0 + &p.a[1]) * (&w.b0 + &p.a[2]));
    r("f32.psi0_sigma", ctx.psi(0, n) - psi0s);
    for (v, bn) in [("beta_N=beta_n", &w.b0), ("beta_N=beta_{n+1}", &w.b1)] {
        let f = h(1)
            * (sq(&w.b1) + sq(&w.b0) + &w.b0 * &w.b1 + (&w.b0 + &w.b1) * p.bs() + p.bp() + &w.g2
                + &w.g1
                + &w.g0
                - (&w.b1 + bn + &w.bm + p.bs()) * ni
                + &pim2);
        r(&format!("f32.psi1[{v}]"), ctx.psi(1, n) - f);
    }
    r("f32.psi2", ctx.psi(2, n) - h(2) * (&w.b0 + &w.b1 + &w.b2 + p.bs() - ni));
    r("f32.psi3", ctx.psi(3, n) - h(3));

    let (a, b, c) = (a_n(p, &w), b_n(p, &w), c_n(p, &w));
    r("f32.pi2[printed]", &pim2 * &c - (&p.eta * &a + &b));
    let (num, den) = pi2_corrected(p, &w);
    r("f32.pi2[corrected]", &pim2 * &den - &num);

    let p1 = ctx.p1(ni - 2);
    let tail = &w.bmm - &w.bm * (ni - 1);
    let printed = (&p.eta * &a + &b) / &c + &tail - (ni - 3) * (ni - 4) / 2;
    r("f32.p1[printed]", &p1 - printed);
    let corr = &num / &den + &tail - ni * (ni - 1) / 2;
    r("f32.p1[corrected]", &p1 - corr);

    let lead = pi3_lead(p, &w, &p1);
    let (d, rest) = (d_n(p, &w), pi3_rest(p, &w));
    let v_lit = &lead + &d + &rest + &p.eta * g_literal(p, &w);
    r("f32.pi3[printed-literal]", &pim3 - v_lit);
    let v_a = &lead + &d + &rest + &p.eta * g_reading_a(p, &w);
    r("f32.pi3[printed-reading-a]", &pim3 - v_a);
    r("f32.pi3[corrected]", &pim3 - pi3_corrected(p, &w, &p1));
    out
}

fn pi3_lead(p: &Params, w: &W, p1: &Val) -> Val {
    p1 * ((&p.eta + 1) * (&w.g0 - &w.g1) + &w.b0 + &w.bm + &w.bmm + p.bs())
}

fn pi3_rest(p: &Params, w: &W) -> Val {
    (&p.eta + 1) * e_n(w) + (&p.eta - 1) * f_n(w)
}

/// Corrected π^{[−3]}_{n−3} given p¹_{n−2}.
fn pi3_corrected(p: &Params, w: &W, p1: &Val) -> Val {
    let n = w.n;
    let d = d_n(p, w) + (&w.b0 + &w.bm + &w.bmm) * (n * (n - 1) / 2) - p.bp() * n;
    pi3_lead(p, w, p1) + d + pi3_rest(p, w) + &p.eta * g_reading_a(p, w)
}

/// Closed forms expressed through β, γ only.
fn closed(p: &Params, w: &W) -> (Val, Val) {
    let n = w.n;
    let (num, den) = pi2_corrected(p, w);
    let pi2 = &num / &den;
    let p1 = &pi2 + &w.bmm - &w.bm * (n - 1) - n * (n - 1) / 2;
    let pi3 = pi3_corrected(p, w, &p1);
    (pi2, pi3)
}

/// Constraints on the recurrence coefficients obtained by inserting the
/// π^{[−2]}, π^{[−3]} and p¹ closed forms into the bis compatibilities; no
/// Cholesky data other than β, γ enters. Valid for 3 ≤ n with n+1 inside the
/// identity range.
pub fn constraints(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let p = &ctx.par;
    let (w, w1) = (W::new(ctx, n), W::new(ctx, n + 1));
    let ni = n as i64;
    let (pi2, pi3) = closed(p, &w);
    let (pi2_next, pi3_next) = closed(p, &w1);
    let c1 = &pi2 - &pi2_next - (&w.bm - &w.b0 - 1) * ni;
    let rhs = &pi2 * (1 + &w.b0 - &w.bmm) - &w.g0 * (ni - 1) + &w.gm * ni;
    let c2 = pi3_next - pi3 - rhs;
    vec![
        Residual::new("f32.constraint_beta".to_string(), n, &c1),
        Residual::new("f32.constraint_gamma".to_string(), n, &c2),
    ]
}

/// Dressed-Pascal compatibility relations; they hold for every family.
pub fn compat(ctx: &LfContext, n: usize) -> Vec<Residual> {
    let w = W::new(ctx, n);
    let ni = n as i64;
    let mut out = Vec::new();
    let mut r = |id: &str, v: Val| out.push(Residual::new(id.to_string(), n, &v));
    let pi = |d: i64, j: i64| ctx.pi(d, ni + j);
    r("comp1", pi(2, -1) - pi(2, -2) - (1 - &w.b0 + &w.bm) * ni);
    r(
        "comp2",
        pi(3, -2) - pi(3, -3) - (pi(2, -2) * (&w.bmm - &w.b0 + 1) + &w.gm * ni - &w.g0 * (ni - 1)),
    );
    r("comp1_bis", pi(-2, -2) - pi(-2, -1) - (&w.bm - &w.b0 - 1) * ni);
    let rhs = pi(-2, -2) * (1 + &w.b0 - &w.bmm) - &w.g0 * (ni - 1) + &w.gm * ni;
    r("comp2_bis", pi_m3(ctx, ni - 2) - pi_m3(ctx, ni - 3) - rhs);
    out
}
