//! Hypergeometric weight families, Pearson polynomials and certified moments.

use std::fmt;

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::precision::{sum_certified, PrecisionContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    F12,
    F22,
    F32,
}

impl Family {
    /// Number of numerator parameters, i.e. deg σ.
    pub fn m(self) -> usize {
        match self {
            Family::F12 => 1,
            Family::F22 => 2,
            Family::F32 => 3,
        }
    }

    /// Number of denominator shifts; deg θ = N + 1.
    pub fn n(self) -> usize {
        2
    }

    pub fn tag(self) -> &'static str {
        match self {
            Family::F12 => "f12",
            Family::F22 => "f22",
            Family::F32 => "f32",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f12" | "1f2" => Ok(Family::F12),
            "f22" | "2f2" => Ok(Family::F22),
            "f32" | "3f2" => Ok(Family::F32),
            other => Err(Error::InvalidSpec(format!("unknown family '{other}'"))),
        }
    }

    pub const ALL: [Family; 3] = [Family::F12, Family::F22, Family::F32];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub family: Family,
    pub a: Vec<Float>,
    pub b: Vec<Float>,
    pub eta: Float,
    pub positivity: bool,
}

fn is_nonpositive_integer(x: &Float) -> bool {
    x.is_integer() && *x <= 0
}

impl FamilySpec {
    /// Builds and validates a spec with positivity mode on.
    pub fn new(family: Family, a: Vec<Float>, b: Vec<Float>, eta: Float) -> Result<Self> {
        let spec = FamilySpec { family, a, b, eta, positivity: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn without_positivity(mut self) -> Result<Self> {
        self.positivity = false;
        self.validate()?;
        Ok(self)
    }

    /// Same parameters with a different η (used for η-derivatives).
    pub fn with_eta(&self, eta: Float) -> FamilySpec {
        FamilySpec { eta, ..self.clone() }
    }

    pub fn bits(&self) -> u32 {
        self.eta.prec()
    }

    pub fn terminating(&self) -> bool {
        self.a.iter().any(is_nonpositive_integer)
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.family;
        if self.a.len() != fam.m() || self.b.len() != fam.n() {
            return Err(Error::InvalidSpec(format!(
                "{fam} needs {} numerator and {} denominator parameters, got {} and {}",
                fam.m(),
                fam.n(),
                self.a.len(),
                self.b.len()
            )));
        }
        if self.a.iter().chain(self.b.iter()).any(|x| !x.is_finite()) || !self.eta.is_finite() {
            return Err(Error::InvalidSpec("parameters must be finite".to_string()));
        }
        for bj in &self.b {
            let shifted = Float::with_val(bj.prec(), bj + 1u32);
            if is_nonpositive_integer(&shifted) {
                return Err(Error::InvalidSpec(format!(
                    "b = {} makes a Pochhammer denominator vanish",
                    bj.to_f64()
                )));
            }
        }
        if self.eta <= 0 {
            return Err(Error::InvalidSpec("eta must be a positive real".to_string()));
        }
        if self.positivity {
            if self.a.iter().any(|x| *x <= 0) {
                return Err(Error::InvalidSpec(
                    "positivity mode requires every a_i > 0".to_string(),
                ));
            }
            if self.b.iter().any(|x| *x <= -1) {
                return Err(Error::InvalidSpec(
                    "positivity mode requires every b_j + 1 > 0".to_string(),
                ));
            }
        }
        if fam == Family::F32 && !self.terminating() && self.eta >= 1 {
            return Err(Error::InvalidSpec(
                "f32 moments converge only for eta < 1 unless some a_i is a non-positive integer"
                    .to_string(),
            ));
        }
        Ok(())
    }

    pub fn pearson(&self) -> PearsonPair {
        make_pearson(self)
    }

    pub fn a_sum(&self) -> Float {
        let mut s = Float::new(self.bits());
        for x in &self.a {
            s += x;
        }
        s
    }
}

/// σ(z) = η ∏(z + a_i), θ(z) = z (z + b_1)(z + b_2).
#[derive(Debug, Clone)]
pub struct PearsonPair {
    pub sigma_roots: Vec<Float>,
    pub sigma_scale: Float,
    pub theta_roots: Vec<Float>,
}

pub fn make_pearson(spec: &FamilySpec) -> PearsonPair {
    let p = spec.bits();
    let mut theta_roots = vec![Float::new(p)];
    theta_roots.extend(spec.b.iter().map(|b| Float::with_val(p, -b)));
    PearsonPair {
        sigma_roots: spec.a.iter().map(|a| Float::with_val(p, -a)).collect(),
        sigma_scale: spec.eta.clone(),
        theta_roots,
    }
}

fn eval_roots(scale: &Float, roots: &[Float], z: &Float) -> Float {
    let mut v = scale.clone();
    for r in roots {
        v *= Float::with_val(scale.prec(), z - r);
    }
    v
}

/// Ascending coefficients of scale·∏(z − r).
fn coeffs_from_roots(scale: &Float, roots: &[Float]) -> Vec<Float> {
    let p = scale.prec();
    let mut c = vec![scale.clone()];
    for r in roots {
        let mut next = vec![Float::new(p); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= Float::with_val(p, ci * r);
        }
        c = next;
    }
    c
}

impl PearsonPair {
    pub fn sigma_degree(&self) -> usize {
        self.sigma_roots.len()
    }

    pub fn theta_degree(&self) -> usize {
        self.theta_roots.len()
    }

    pub fn sigma(&self, z: &Float) -> Float {
        eval_roots(&self.sigma_scale, &self.sigma_roots, z)
    }

    pub fn theta(&self, z: &Float) -> Float {
        let one = Float::with_val(self.sigma_scale.prec(), 1);
        eval_roots(&one, &self.theta_roots, z)
    }

    pub fn sigma_coeffs(&self) -> Vec<Float> {
        coeffs_from_roots(&self.sigma_scale, &self.sigma_roots)
    }

    pub fn theta_coeffs(&self) -> Vec<Float> {
        let one = Float::with_val(self.sigma_scale.prec(), 1);
        coeffs_from_roots(&one, &self.theta_roots)
    }
}

/// Lazily extended table of w(0), w(1), ... via w(k+1) = w(k)·σ(k)/θ(k+1).
pub struct WeightSeq {
    pearson: PearsonPair,
    w: Vec<Float>,
    bits: u32,
}

impl WeightSeq {
    pub fn new(spec: &FamilySpec, ctx: &PrecisionContext) -> Self {
        WeightSeq { pearson: spec.pearson(), w: vec![ctx.float(1)], bits: ctx.bits }
    }

    pub fn get(&mut self, k: usize) -> &Float {
        while self.w.len() <= k {
            let j = self.w.len() - 1;
            let zj = Float::with_val(self.bits, j);
            let zj1 = Float::with_val(self.bits, j + 1);
            let next = Float::with_val(self.bits, &self.w[j] * self.pearson.sigma(&zj))
                / self.pearson.theta(&zj1);
            self.w.push(next);
        }
        &self.w[k]
    }
}

pub fn weight(spec: &FamilySpec, k: usize, ctx: &PrecisionContext) -> Float {
    WeightSeq::new(spec, ctx).get(k).clone()
}

/// Independent evaluation as a product of Pochhammer ratios, η^k / k!.
pub fn weight_pochhammer(spec: &FamilySpec, k: usize, ctx: &PrecisionContext) -> Float {
    let mut num = ctx.float(1);
    let mut den = ctx.float(1);
    for j in 0..k {
        for a in &spec.a {
            num *= Float::with_val(ctx.bits, a + j as u32);
        }
        for b in &spec.b {
            den *= Float::with_val(ctx.bits, b + (j + 1) as u32);
        }
        den *= (j + 1) as u32;
    }
    let ek = Float::with_val(ctx.bits, Pow::pow(&spec.eta, k as u32));
    num * ek / den
}

/// |θ(k+1)w(k+1) − σ(k)w(k)| / max(1, |σ(k)w(k)|) with Pochhammer-product weights.
pub fn pearson_residual(spec: &FamilySpec, k: usize, ctx: &PrecisionContext) -> Float {
    let pp = spec.pearson();
    let wk = weight_pochhammer(spec, k, ctx);
    let wk1 = weight_pochhammer(spec, k + 1, ctx);
    let lhs = pp.theta(&ctx.float(k + 1)) * wk1;
    let rhs = pp.sigma(&ctx.float(k)) * wk;
    let scale = Float::with_val(ctx.bits, rhs.abs_ref()).max(&ctx.float(1));
    Float::with_val(ctx.bits, &lhs - &rhs).abs() / scale
}

#[derive(Debug, Clone)]
pub struct MomentTable {
    pub rho: Vec<Float>,
    pub spec: FamilySpec,
    pub bits: u32,
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// ρ_0 … ρ_{count−1}, each summed by `sum_certified`.
pub fn moment_table(spec: &FamilySpec, count: usize, ctx: &PrecisionContext) -> Result<MomentTable> {
    if count == 0 {
        return Err(Error::InvalidSpec("moment count must be at least 1".to_string()));
    }
    spec.validate()?;
    let mut seq = WeightSeq::new(spec, ctx);
    let mut rho = Vec::with_capacity(count);
    for n in 0..count {
        let (v, _) = sum_certified(
            |k| {
                let w = seq.get(k).clone();
                if n == 0 {
                    w
                } else {
                    Float::with_val(ctx.bits, k).pow(n as u32) * w
                }
            },
            ctx,
        )?;
        rho.push(v);
    }
    if spec.positivity && rho.iter().any(|r| *r <= 0) {
        return Err(Error::InvalidSpec("non-positive moment in positivity mode".to_string()));
    }
    Ok(MomentTable { rho, spec: spec.clone(), bits: ctx.bits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    fn spec(c: &PrecisionContext, fam: Family, a: &[&str], b: &[&str], eta: &str) -> Result<FamilySpec> {
        FamilySpec::new(
            fam,
            a.iter().map(|s| c.parse(s).unwrap()).collect(),
            b.iter().map(|s| c.parse(s).unwrap()).collect(),
            c.parse(eta).unwrap(),
        )
    }

    #[test]
    fn pearson_polynomials_by_substitution() {
        let c = ctx();
        let s = spec(&c, Family::F12, &["1"], &["0", "0"], "1").unwrap();
        let p = s.pearson();
        let z = c.float(3);
        assert_eq!(p.sigma(&z), 4);
        assert_eq!(p.theta(&z), 27);
        assert_eq!(p.theta(&c.zero()), 0);
        let s = spec(&c, Family::F32, &["1", "2", "3"], &["1", "1"], "1/2").unwrap();
        let p = s.pearson();
        assert_eq!(p.sigma(&c.float(2)), 30);
        assert_eq!(p.theta(&c.float(2)), 18);
        let sc = p.sigma_coeffs();
        let z = c.ratio(7, 3);
        let mut horner = c.zero();
        for co in sc.iter().rev() {
            horner = horner * &z + co;
        }
        let diff = Float::with_val(c.bits, &horner - p.sigma(&z)).abs();
        assert!(diff < c.eps_verify);
    }

    #[test]
    fn weights_match_pochhammer_oracle() {
        let c = ctx();
        let s = spec(&c, Family::F12, &["1"], &["0", "0"], "1").unwrap();
        assert_eq!(weight(&s, 0, &c), 1);
        assert_eq!(weight(&s, 2, &c), c.ratio(1, 4));
        let s = spec(&c, Family::F22, &["3/4", "9/4"], &["3/8", "13/8"], "3/2").unwrap();
        for k in [0usize, 1, 5, 17] {
            let w = weight(&s, k, &c);
            let o = weight_pochhammer(&s, k, &c);
            let rel = Float::with_val(c.bits, &w - &o).abs() / &o;
            assert!(rel < c.eps_verify, "k={k}");
        }
    }

    #[test]
    fn moment_of_inverse_factorial_squares() {
        let c = ctx();
        let s = spec(&c, Family::F12, &["1"], &["0", "0"], "1").unwrap();
        let t = moment_table(&s, 3, &c).unwrap();
        assert!((t.rho[0].to_f64() - 2.279_585_302_336_067).abs() < 1e-14);
    }

    #[test]
    fn parameter_cancellation_reduces_series() {
        let c = ctx();
        let s = spec(&c, Family::F12, &["3/2"], &["1/2", "1/4"], "2").unwrap();
        let t = moment_table(&s, 1, &c).unwrap();
        // a_1 = b_1 + 1: ρ_0 = Σ η^k / ((b_2+1)_k k!)
        let b2p1 = c.ratio(5, 4);
        let (oracle, _) = sum_certified(
            |k| {
                let mut v = c.float(1);
                for j in 0..k {
                    v *= &s.eta;
                    v /= Float::with_val(c.bits, &b2p1 + j as u32);
                    v /= (j + 1) as u32;
                }
                v
            },
            &c,
        )
        .unwrap();
        let rel = Float::with_val(c.bits, &t.rho[0] - &oracle).abs() / &oracle;
        assert!(rel < c.eps_verify);
    }

    #[test]
    fn validation_rules() {
        let c = ctx();
        assert!(spec(&c, Family::F12, &["1", "2"], &["0", "0"], "1").is_err());
        assert!(spec(&c, Family::F12, &["1"], &["-2", "0"], "1").is_err());
        assert!(spec(&c, Family::F12, &["1"], &["0", "0"], "-1").is_err());
        assert!(spec(&c, Family::F12, &["-1/2"], &["0", "0"], "1").is_err());
        assert!(spec(&c, Family::F32, &["1", "2", "3"], &["1", "1"], "3/2").is_err());
        assert!(spec(&c, Family::F32, &["1", "2", "3"], &["1", "1"], "1").is_err());
        let term = FamilySpec {
            family: Family::F32,
            a: vec![c.float(-4), c.float(2), c.float(3)],
            b: vec![c.float(1), c.float(1)],
            eta: c.ratio(3, 2),
            positivity: false,
        };
        assert!(term.validate().is_ok());
        assert!(term.terminating());
    }

    #[test]
    fn terminating_series_is_exactly_finite() {
        let c = ctx();
        let s = FamilySpec {
            family: Family::F32,
            a: vec![c.float(-3), c.float(2), c.float(3)],
            b: vec![c.float(1), c.float(1)],
            eta: c.ratio(3, 2),
            positivity: false,
        };
        let t = moment_table(&s, 2, &c).unwrap();
        let mut direct = c.zero();
        for k in 0..=3usize {
            direct += weight_pochhammer(&s, k, &c);
        }
        assert_eq!(weight(&s, 4, &c), 0);
        let rel = Float::with_val(c.bits, &t.rho[0] - &direct).abs() / direct.abs();
        assert!(rel < c.eps_verify);
    }

    #[test]
    fn pearson_residual_small() {
        let c = ctx();
        let s = spec(&c, Family::F22, &["3/2", "5/4"], &["1/2", "1/4"], "2").unwrap();
        for k in [0usize, 10, 100] {
            assert!(pearson_residual(&s, k, &c) < c.eps_verify);
        }
    }
}
