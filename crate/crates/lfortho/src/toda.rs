//! Derivatives in η and the Toda-type flow identities.
//!
//! ϑ_η = η d/dη is a plain derivative in t = log η, so every sample is a full
//! pipeline rebuilt at η·e^{jh}. Checks compare against
//! `budget = 10·error_estimate + eps_verify·scale`, reported relative to `scale`.

use rug::Float;

use crate::error::{Error, Result};
use crate::hankel::Pipeline;
use crate::operators::{BandedOperator, OperatorSet, PsiMethod};
use crate::precision::{pow2, PrecisionContext};
use crate::weights::{Family, FamilySpec};

#[derive(Debug, Clone)]
pub struct EtaDerivativeEstimate {
    pub value: Float,
    pub error_estimate: Float,
    pub step_used: Float,
}

type Grid = Vec<Vec<Float>>;

/// h = 2^(−bits/3): balances the O(h²) truncation against rounding/h.
pub fn first_step(bits: u32) -> Float {
    pow2(bits, -((bits / 3) as i32))
}

/// h = 2^(−bits/6) for second derivatives, where rounding enters as 1/h².
pub fn second_step(bits: u32) -> Float {
    pow2(bits, -((bits / 6) as i32))
}

/// Coarse step for the convergence-order check, far above the rounding floor.
pub const ORDER_CHECK_LOG2_STEP: i32 = -16;

fn abs(x: &Float) -> Float {
    Float::with_val(x.prec(), x.abs_ref())
}

/// Central differences at h and 2h from samples at t = −2h, −h, 0, h, 2h, plus one
/// Richardson step.
///
/// The error estimate is the larger of the distances from the extrapolated value to
/// either rung and a rounding-noise witness: the fourth difference carries only an
/// O(h⁴) signal, and δ⁴f/(12h) has the same noise level as the h rung. Two
/// independent witnesses keep an accidental agreement of the rungs from hiding noise.
fn first_ladder(f: [&Float; 5], h: &Float) -> EtaDerivativeEstimate {
    let p = h.prec();
    let d1 = Float::with_val(p, f[3] - f[1]) / (Float::with_val(p, h) * 2u32);
    let d2 = Float::with_val(p, f[4] - f[0]) / (Float::with_val(p, h) * 4u32);
    let d4 = Float::with_val(p, f[4] + f[0]) + Float::with_val(p, f[2] * 6u32)
        - Float::with_val(p, f[3] + f[1]) * 4u32;
    let noise = abs(&d4) / (Float::with_val(p, h) * 12u32);
    let mut e = ladder_estimate(d1, d2, h);
    e.error_estimate = e.error_estimate.max(&noise);
    e
}

/// Richardson step on the rungs h, 2h; error is the larger distance to either rung.
fn ladder_estimate(d1: Float, d2: Float, h: &Float) -> EtaDerivativeEstimate {
    let p = h.prec();
    let value = (Float::with_val(p, &d1 * 4u32) - &d2) / 3u32;
    let e1 = abs(&Float::with_val(p, &value - &d1));
    let e2 = abs(&Float::with_val(p, &value - &d2));
    EtaDerivativeEstimate { value, error_estimate: e1.max(&e2), step_used: h.clone() }
}

/// Second differences at h and 2h from samples at t = −2h, −h, 0, h, 2h.
fn second_ladder(f: [&Float; 5], h: &Float) -> EtaDerivativeEstimate {
    let p = h.prec();
    let h2 = Float::with_val(p, h * h);
    let mid = Float::with_val(p, f[2] * 2u32);
    let d1 = (Float::with_val(p, f[3] + f[1]) - &mid) / &h2;
    let d2 = (Float::with_val(p, f[4] + f[0]) - &mid) / (Float::with_val(p, &h2 * 4u32));
    ladder_estimate(d1, d2, h)
}

/// η·e^{jh}
pub fn eta_at(eta: &Float, j: i32, h: &Float) -> Float {
    let p = eta.prec();
    Float::with_val(p, h * j).exp() * eta
}

/// ϑ_η f at η with the default step.
pub fn theta_eta<F>(f: F, eta: &Float, ctx: &PrecisionContext) -> Result<EtaDerivativeEstimate>
where
    F: FnMut(&Float) -> Result<Float>,
{
    theta_eta_with_step(f, eta, &first_step(ctx.bits))
}

pub fn theta_eta_with_step<F>(mut f: F, eta: &Float, h: &Float) -> Result<EtaDerivativeEstimate>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let mut s = Vec::with_capacity(5);
    for j in -2..=2 {
        s.push(f(&eta_at(eta, j, h))?);
    }
    Ok(first_ladder([&s[0], &s[1], &s[2], &s[3], &s[4]], h))
}

/// ϑ_η² f at η.
pub fn theta_eta_second<F>(mut f: F, eta: &Float, ctx: &PrecisionContext) -> Result<EtaDerivativeEstimate>
where
    F: FnMut(&Float) -> Result<Float>,
{
    let h = second_step(ctx.bits);
    let mut s = Vec::with_capacity(5);
    for j in -2..=2 {
        s.push(f(&eta_at(eta, j, &h))?);
    }
    Ok(second_ladder([&s[0], &s[1], &s[2], &s[3], &s[4]], &h))
}

/// Pipeline and operators for one η.
#[derive(Debug, Clone)]
pub struct Node {
    pub pl: Pipeline,
    pub ops: OperatorSet,
}

impl Node {
    pub fn build(spec: &FamilySpec, k: usize, ctx: &PrecisionContext) -> Result<Node> {
        let pl = Pipeline::build(spec, k, ctx)?;
        let ops = OperatorSet::new(spec, &pl.data, pl.k_int)?;
        Ok(Node { pl, ops })
    }

    pub fn beta(&self, n: usize) -> &Float {
        &self.pl.data.beta[n]
    }

    pub fn gamma(&self, n: usize) -> &Float {
        &self.pl.data.gamma[n]
    }
}

/// Nodes at η·e^{jh}, j = −2…2.
#[derive(Debug, Clone)]
pub struct EtaStencil {
    pub h: Float,
    pub nodes: Vec<Node>,
}

impl EtaStencil {
    pub fn build(spec: &FamilySpec, k: usize, h: Float, ctx: &PrecisionContext) -> Result<Self> {
        let nodes = (-2..=2)
            .map(|j| Node::build(&spec.with_eta(eta_at(&spec.eta, j, &h)), k, ctx))
            .collect::<Result<Vec<_>>>()?;
        Ok(EtaStencil { h, nodes })
    }

    pub fn center(&self) -> &Node {
        &self.nodes[2]
    }

    fn samples<F: Fn(&Node) -> Result<Float>>(&self, f: F) -> Result<Vec<Float>> {
        self.nodes.iter().map(f).collect()
    }

    pub fn theta<F: Fn(&Node) -> Result<Float>>(&self, f: F) -> Result<EtaDerivativeEstimate> {
        let s = self.samples(f)?;
        Ok(first_ladder([&s[0], &s[1], &s[2], &s[3], &s[4]], &self.h))
    }

    pub fn theta2<F: Fn(&Node) -> Result<Float>>(&self, f: F) -> Result<EtaDerivativeEstimate> {
        let s = self.samples(f)?;
        Ok(second_ladder([&s[0], &s[1], &s[2], &s[3], &s[4]], &self.h))
    }

    /// Unextrapolated central differences at step h and 2h.
    pub fn central_pair<F: Fn(&Node) -> Result<Float>>(&self, f: F) -> Result<(Float, Float)> {
        let s = self.samples(f)?;
        let p = self.h.prec();
        let d1 = Float::with_val(p, &s[3] - &s[1]) / (Float::with_val(p, &self.h) * 2u32);
        let d2 = Float::with_val(p, &s[4] - &s[0]) / (Float::with_val(p, &self.h) * 4u32);
        Ok((d1, d2))
    }

    /// Entrywise ϑ_η of a matrix-valued quantity over the leading `valid` block.
    fn theta_matrix<F>(&self, f: F, valid: usize) -> Result<(Grid, Grid)>
    where
        F: Fn(&Node) -> Result<BandedOperator>,
    {
        let m: Vec<BandedOperator> = self.nodes.iter().map(f).collect::<Result<_>>()?;
        let mut val = Vec::with_capacity(valid);
        let mut err = Vec::with_capacity(valid);
        for i in 0..valid {
            let mut vr = Vec::with_capacity(valid);
            let mut er = Vec::with_capacity(valid);
            for j in 0..valid {
                let s: Vec<Float> = m.iter().map(|x| x.get(i, j)).collect();
                let e = first_ladder([&s[0], &s[1], &s[2], &s[3], &s[4]], &self.h);
                vr.push(e.value);
                er.push(e.error_estimate);
            }
            val.push(vr);
            err.push(er);
        }
        Ok((val, err))
    }
}

/// One finite-difference check, relative to `scale`.
#[derive(Debug, Clone)]
pub struct FdResidual {
    pub identity: String,
    pub n: usize,
    pub residual: Float,
    pub budget: Float,
}

impl FdResidual {
    pub fn new(
        identity: impl Into<String>,
        n: usize,
        est: &EtaDerivativeEstimate,
        rhs: &Float,
        scale: &Float,
        eps: &Float,
    ) -> FdResidual {
        let p = rhs.prec();
        let diff = abs(&Float::with_val(p, &est.value - rhs));
        FdResidual::from_parts(identity, n, &diff, &est.error_estimate, scale, eps)
    }

    fn from_parts(
        identity: impl Into<String>,
        n: usize,
        diff: &Float,
        err: &Float,
        scale: &Float,
        eps: &Float,
    ) -> FdResidual {
        let p = diff.prec();
        let scale = if scale.is_zero() { Float::with_val(p, 1) } else { abs(scale) };
        FdResidual {
            identity: identity.into(),
            n,
            residual: Float::with_val(p, diff / &scale),
            budget: Float::with_val(p, err * 10u32) / &scale + eps,
        }
    }

    pub fn pass(&self) -> bool {
        self.residual <= self.budget
    }
}

fn max2(a: Float, b: &Float) -> Float {
    let b = abs(b);
    let a = abs(&a);
    if a > b {
        a
    } else {
        b
    }
}

fn sum_abs(xs: &[&Float]) -> Float {
    let p = xs[0].prec();
    xs.iter().fold(Float::new(p), |acc, x| acc + abs(x))
}

/// Φ = −J_−: strictly lower bidiagonal with −γ on the subdiagonal.
pub fn phi_matrix(node: &Node) -> BandedOperator {
    let data = &node.pl.data;
    let size = node.ops.size;
    let mut phi = BandedOperator::zeros(size, Some(1), Some(0), data.bits);
    for i in 1..size.min(data.gamma.len()) {
        phi.set(i, i - 1, Float::with_val(data.bits, -&data.gamma[i]));
    }
    phi
}

/// Sample points for P(z) checks.
pub fn sample_points(ctx: &PrecisionContext) -> Vec<(&'static str, Float)> {
    vec![("1/2", ctx.ratio(1, 2)), ("1/3", ctx.ratio(1, 3)), ("3", ctx.float(3))]
}

/// Stencils for first and second derivatives around one spec.
#[derive(Debug, Clone)]
pub struct TodaContext {
    pub spec: FamilySpec,
    pub k: usize,
    pub first: EtaStencil,
    pub second: EtaStencil,
    pub eps: Float,
    bits: u32,
}

impl TodaContext {
    pub fn new(spec: &FamilySpec, k: usize, ctx: &PrecisionContext) -> Result<TodaContext> {
        if k < 4 {
            return Err(Error::InvalidSpec("flow checks need order at least 4".to_string()));
        }
        Ok(TodaContext {
            spec: spec.clone(),
            k,
            first: EtaStencil::build(spec, k, first_step(ctx.bits), ctx)?,
            second: EtaStencil::build(spec, k, second_step(ctx.bits), ctx)?,
            eps: ctx.eps_verify.clone(),
            bits: ctx.bits,
        })
    }

    fn c(&self) -> &Node {
        self.first.center()
    }

    fn check_n(&self, n: usize, lo: usize) -> Result<()> {
        let hi = self.k - 3;
        if n < lo || n > hi {
            return Err(Error::OutOfRange { n, lo, hi });
        }
        Ok(())
    }

    /// Toda system and Toda equation at n (1 ≤ n ≤ K−3).
    pub fn toda_residuals(&self, n: usize) -> Result<Vec<FdResidual>> {
        self.check_n(n, 1)?;
        let c = self.c();
        let p = self.bits;
        let eps = &self.eps;
        let mut out = Vec::new();

        let d = self.first.theta(|x| Ok(x.beta(n).clone()))?;
        let rhs = Float::with_val(p, c.gamma(n + 1) - c.gamma(n));
        let scale = max2(sum_abs(&[c.gamma(n + 1), c.gamma(n)]), &d.value);
        out.push(FdResidual::new("toda.beta", n, &d, &rhs, &scale, eps));

        let d = self.first.theta(|x| Ok(Float::with_val(p, x.gamma(n).ln_ref())))?;
        let rhs = Float::with_val(p, c.beta(n) - c.beta(n - 1));
        let scale = max2(sum_abs(&[c.beta(n), c.beta(n - 1)]), &d.value);
        out.push(FdResidual::new("toda.log_gamma", n, &d, &rhs, &scale, eps));

        let d = self.first.theta(|x| Ok(Float::with_val(p, x.pl.data.h[n].ln_ref())))?;
        let scale = max2(abs(c.beta(n)), &d.value);
        out.push(FdResidual::new("toda.log_h", n, &d, c.beta(n), &scale, eps));

        let d2 = self.second.theta2(|x| Ok(Float::with_val(p, x.pl.data.h[n].ln_ref())))?;
        let rhs = Float::with_val(p, c.gamma(n + 1) - c.gamma(n));
        let scale = max2(sum_abs(&[c.gamma(n + 1), c.gamma(n)]), &d2.value);
        out.push(FdResidual::new("toda.equation", n, &d2, &rhs, &scale, eps));

        let d2 = self.second.theta2(|x| Ok(Float::with_val(p, x.gamma(n).ln_ref())))?;
        let rhs = Float::with_val(p, c.gamma(n + 1) + c.gamma(n - 1)) - Float::with_val(p, c.gamma(n) * 2u32);
        let scale = max2(sum_abs(&[c.gamma(n + 1), c.gamma(n - 1), c.gamma(n), c.gamma(n)]), &d2.value);
        out.push(FdResidual::new("toda.log_gamma_second", n, &d2, &rhs, &scale, eps));
        Ok(out)
    }

    /// ϑ_η P_n(z) = −γ_n P_{n−1}(z), normalized by max(|γ_n P_{n−1}(z)|, 1).
    pub fn sato_wilson_residual(&self, z: &Float, n: usize) -> Result<FdResidual> {
        self.check_n(n, 1)?;
        let c = self.c();
        let p = self.bits;
        let d = self.first.theta(|x| Ok(x.pl.data.eval_from_s(z, n)))?;
        let rhs = -Float::with_val(p, c.gamma(n) * c.pl.data.eval_from_s(z, n - 1));
        let scale = max2(Float::with_val(p, 1), &rhs);
        Ok(FdResidual::new("toda.sato_wilson", n, &d, &rhs, &scale, &self.eps))
    }

    /// ϑ_η p¹_n = −γ_n.
    pub fn p1_flow(&self, n: usize) -> Result<FdResidual> {
        self.check_n(n, 1)?;
        let c = self.c();
        let d = self.first.theta(|x| Ok(x.pl.data.p1[n].clone()))?;
        let rhs = Float::with_val(self.bits, -c.gamma(n));
        let scale = max2(abs(&rhs), &d.value);
        Ok(FdResidual::new("toda.p1", n, &d, &rhs, &scale, &self.eps))
    }

    /// ϑ_η log τ_n = −p¹_n, with τ_n = Δ_n = H_0⋯H_{n−1}.
    pub fn tau_residual(&self, n: usize) -> Result<FdResidual> {
        self.check_n(n, 1)?;
        let p = self.bits;
        let log_tau = |x: &Node| {
            Ok(x.pl.data.h[..n].iter().fold(Float::new(p), |acc, h| acc + Float::with_val(p, h.ln_ref())))
        };
        let d = self.first.theta(log_tau)?;
        let rhs = Float::with_val(p, -&self.c().pl.data.p1[n]);
        let scale = max2(abs(&rhs), &d.value);
        Ok(FdResidual::new("toda.tau", n, &d, &rhs, &scale, &self.eps))
    }

    /// ϑ_η ρ_n = ρ_{n+1}.
    pub fn rho_shift(&self, n: usize) -> Result<FdResidual> {
        let c = self.c();
        let d = self.first.theta(|x| Ok(x.pl.table.rho[n].clone()))?;
        let rhs = &c.pl.table.rho[n + 1];
        Ok(FdResidual::new("toda.rho_shift", n, &d, rhs, rhs, &self.eps))
    }

    /// Row-wise ϑ_η X = [Φ, X] on the valid block, X given per node.
    fn flow_rows<F>(&self, name: &str, f: F) -> Result<Vec<FdResidual>>
    where
        F: Fn(&Node) -> Result<BandedOperator>,
    {
        let c = self.c();
        let x = f(c)?;
        let phi = phi_matrix(c);
        let comm = phi.mul(&x)?.sub(&x.mul(&phi)?);
        let valid = comm.valid.min(x.valid);
        if valid == 0 {
            return Err(Error::BufferExhausted);
        }
        let (dv, de) = self.first.theta_matrix(&f, valid)?;
        let scale = x.max_abs();
        let p = self.bits;
        let mut out = Vec::with_capacity(valid);
        // per row, report the entry with the largest residual-to-budget ratio
        let floor = Float::with_val(p, &self.eps * &scale);
        for i in 0..valid {
            let mut worst: Option<(Float, Float, Float)> = None;
            for j in 0..valid {
                let d = abs(&Float::with_val(p, &dv[i][j] - &comm.get(i, j)));
                let ratio = Float::with_val(p, &d / (Float::with_val(p, &de[i][j] * 10u32) + &floor));
                if worst.as_ref().is_none_or(|w| ratio > w.0) {
                    worst = Some((ratio, d, de[i][j].clone()));
                }
            }
            let (_, diff, err) = worst.expect("valid block is non-empty");
            out.push(FdResidual::from_parts(name, i, &diff, &err, &scale, &self.eps));
        }
        Ok(out)
    }

    /// ϑ_η(ΨH⁻¹) = [Φ, ΨH⁻¹] and its gauge partner ϑ_η(η⁻¹ΨᵀH⁻¹) = [Φ, η⁻¹ΨᵀH⁻¹].
    pub fn gauge_residuals(&self) -> Result<Vec<FdResidual>> {
        let mut out = self.flow_rows("toda.gauge_psi", |x| {
            x.ops.psi(PsiMethod::SigmaJHPiT)?.mul(&x.ops.h_inv)
        })?;
        out.extend(self.flow_rows("toda.gauge_psi_t", |x| {
            let inv = Float::with_val(self.bits, 1) / &x.pl.spec.eta;
            Ok(x.ops.psi(PsiMethod::SigmaJHPiT)?.transpose().mul(&x.ops.h_inv)?.scale(&inv))
        })?);
        Ok(out)
    }

    /// ϑ_η Π = [Φ, Π].
    pub fn pascal_flow(&self) -> Result<Vec<FdResidual>> {
        self.flow_rows("toda.pascal_flow", |x| Ok(x.ops.pi.clone()))
    }

    /// Unextrapolated residual ratio R(2h)/R(h) for ϑ_η β_n = γ_{n+1} − γ_n at the
    /// coarse step; second-order convergence puts it near 4.
    pub fn order_ratio(&self, n: usize, ctx: &PrecisionContext) -> Result<Float> {
        self.check_n(n, 1)?;
        let h = pow2(ctx.bits, ORDER_CHECK_LOG2_STEP - 1);
        let st = EtaStencil::build(&self.spec, self.k, h, ctx)?;
        let (d1, d2) = st.central_pair(|x| Ok(x.beta(n).clone()))?;
        let c = st.center();
        let rhs = Float::with_val(self.bits, c.gamma(n + 1) - c.gamma(n));
        let r1 = abs(&Float::with_val(self.bits, &d1 - &rhs));
        let r2 = abs(&Float::with_val(self.bits, &d2 - &rhs));
        Ok(r2 / r1)
    }

    /// Same ratio for the Sato–Wilson relation at z.
    pub fn sato_wilson_order_ratio(&self, z: &Float, n: usize, ctx: &PrecisionContext) -> Result<Float> {
        self.check_n(n, 1)?;
        let h = pow2(ctx.bits, ORDER_CHECK_LOG2_STEP - 1);
        let st = EtaStencil::build(&self.spec, self.k, h, ctx)?;
        let (d1, d2) = st.central_pair(|x| Ok(x.pl.data.eval_from_s(z, n)))?;
        let c = st.center();
        let rhs = -Float::with_val(self.bits, c.gamma(n) * c.pl.data.eval_from_s(z, n - 1));
        let r1 = abs(&Float::with_val(self.bits, &d1 - &rhs));
        let r2 = abs(&Float::with_val(self.bits, &d2 - &rhs));
        Ok(r2 / r1)
    }

    /// ₃F₂ flow compatibilities at n (3 ≤ n ≤ K−4):
    /// ϑ_η π^{[−2]}_{n−2} = (n−1)γ_n − nγ_{n−1},
    /// ϑ_η π^{[−3]}_{n−3} = (γ_n − γ_{n−2})π^{[−2]}_{n−2} + (n−1)(β_{n−2} − β_{n−1} − 1)γ_n,
    /// ϑ_η p¹_{n−1} = −γ_{n−1}.
    pub fn lf32_flow(&self, n: usize) -> Result<Vec<FdResidual>> {
        if self.spec.family != Family::F32 {
            return Err(Error::Unsupported("flow compatibilities are specific to 3F2".to_string()));
        }
        let hi = self.k - 4;
        if n < 3 || n > hi {
            return Err(Error::OutOfRange { n, lo: 3, hi });
        }
        let c = self.c();
        let p = self.bits;
        let eps = &self.eps;
        let pim2 = |x: &Node, j: usize| x.ops.pi_inv.get(j + 2, j);
        let pim3 = |x: &Node, j: usize| -x.ops.pi_inv.get(j + 3, j);
        let nf = Float::with_val(p, n);
        let mut out = Vec::new();

        let d = self.first.theta(|x| Ok(pim2(x, n - 2)))?;
        let t1 = Float::with_val(p, c.gamma(n) * (n as u32 - 1));
        let t2 = Float::with_val(p, c.gamma(n - 1) * &nf);
        let rhs = Float::with_val(p, &t1 - &t2);
        let scale = max2(sum_abs(&[&t1, &t2]), &d.value);
        out.push(FdResidual::new("comp3", n, &d, &rhs, &scale, eps));

        let d = self.first.theta(|x| Ok(pim3(x, n - 3)))?;
        let t1 = Float::with_val(p, c.gamma(n) - c.gamma(n - 2)) * pim2(c, n - 2);
        let t2 = (Float::with_val(p, c.beta(n - 2) - c.beta(n - 1)) - 1u32) * c.gamma(n) * (n as u32 - 1);
        let rhs = Float::with_val(p, &t1 + &t2);
        let scale = max2(sum_abs(&[&t1, &t2]), &d.value);
        out.push(FdResidual::new("comp4", n, &d, &rhs, &scale, eps));

        let d = self.first.theta(|x| Ok(x.pl.data.p1[n - 1].clone()))?;
        let rhs = Float::with_val(p, -c.gamma(n - 1));
        let scale = max2(abs(&rhs), &d.value);
        out.push(FdResidual::new("comp_p1", n, &d, &rhs, &scale, eps));
        Ok(out)
    }

    /// Every flow check for this spec: Toda system and equation, Sato–Wilson at the
    /// sample points, ϑ_η p¹, moment shift for n ≤ 6, gauge and Pascal flows.
    pub fn suite(&self, ctx: &PrecisionContext) -> Result<Vec<FdResidual>> {
        let mut out = Vec::new();
        for n in 1..=self.k - 3 {
            out.extend(self.toda_residuals(n)?);
            for (label, z) in sample_points(ctx) {
                let mut r = self.sato_wilson_residual(&z, n)?;
                r.identity = format!("toda.sato_wilson@{label}");
                out.push(r);
            }
            out.push(self.p1_flow(n)?);
            out.push(self.tau_residual(n)?);
        }
        for n in 0..=6 {
            out.push(self.rho_shift(n)?);
        }
        out.extend(self.gauge_residuals()?);
        out.extend(self.pascal_flow()?);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    #[test]
    fn constant_has_zero_derivative() {
        let c = ctx();
        let e = theta_eta(|_| Ok(c.float(7)), &c.float(2), &c).unwrap();
        assert!(e.value.is_zero());
        assert!(e.error_estimate.is_zero());
    }

    #[test]
    fn identity_reproduces_eta() {
        let c = ctx();
        let eta = c.ratio(3, 2);
        let e = theta_eta(|x| Ok(x.clone()), &eta, &c).unwrap();
        let diff = Float::with_val(c.bits, &e.value - &eta).abs();
        assert!(diff <= Float::with_val(c.bits, &e.error_estimate * 10u32) + &c.eps_verify);
    }

    #[test]
    fn power_law_log_derivative() {
        // ϑ_η η³ = 3η³, ϑ_η² η³ = 9η³
        let c = ctx();
        let eta = c.ratio(5, 4);
        let cube = |x: &Float| Ok(Float::with_val(c.bits, x * x) * x);
        let e3 = Float::with_val(c.bits, &eta * &eta) * &eta;
        let d = theta_eta(cube, &eta, &c).unwrap();
        let want = Float::with_val(c.bits, &e3 * 3u32);
        assert!(Float::with_val(c.bits, &d.value - &want).abs() / &want < c.eps_verify);
        let d2 = theta_eta_second(cube, &eta, &c).unwrap();
        let want = Float::with_val(c.bits, &e3 * 9u32);
        assert!(Float::with_val(c.bits, &d2.value - &want).abs() / &want < c.eps_verify);
    }

    #[test]
    fn budget_passes_on_exact_match() {
        let c = ctx();
        let e = EtaDerivativeEstimate { value: c.float(2), error_estimate: c.zero(), step_used: c.zero() };
        let r = FdResidual::new("x", 0, &e, &c.float(2), &c.float(2), &c.eps_verify);
        assert!(r.pass());
        let r = FdResidual::new("x", 0, &e, &c.float(3), &c.float(3), &c.eps_verify);
        assert!(!r.pass());
    }
}
