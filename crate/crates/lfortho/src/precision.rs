//! Working precision, derived tolerances and certified series summation.

use rug::Float;

use crate::error::{Error, Result};

pub const DEFAULT_BITS: u32 = 384;
pub const DEFAULT_MAX_INDEX: usize = 100_000;

/// Immutable precision settings shared by every computation of a run.
#[derive(Debug, Clone)]
pub struct PrecisionContext {
    pub bits: u32,
    pub eps_verify: Float,
    pub eps_pivot: Float,
    pub guard_terms: usize,
    pub max_index: usize,
}

impl PrecisionContext {
    pub fn new(bits: u32) -> Result<Self> {
        if bits < 128 {
            return Err(Error::InvalidSpec(format!("bits = {bits} is below the minimum of 128")));
        }
        Ok(PrecisionContext {
            bits,
            eps_verify: pow2(bits, -(bits as i32) / 2),
            eps_pivot: pow2(bits, -(bits as i32) / 4),
            guard_terms: 5,
            max_index: DEFAULT_MAX_INDEX,
        })
    }

    /// Precision from `LFORTHO_BITS` when set, else the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var("LFORTHO_BITS") {
            Ok(s) => {
                let bits = s
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidSpec(format!("LFORTHO_BITS={s} is not an integer")))?;
                Self::new(bits)
            }
            Err(_) => Self::new(DEFAULT_BITS),
        }
    }

    pub fn with_eps_verify(mut self, tol: Float) -> Result<Self> {
        if !(tol > 0 && tol < self.eps_pivot) {
            return Err(Error::InvalidSpec(
                "tolerance must satisfy 0 < tol < eps_pivot".to_string(),
            ));
        }
        self.eps_verify = Float::with_val(self.bits, tol);
        Ok(self)
    }

    pub fn with_max_index(mut self, max_index: usize) -> Self {
        self.max_index = max_index;
        self
    }

    pub fn zero(&self) -> Float {
        Float::new(self.bits)
    }

    pub fn float<T>(&self, v: T) -> Float
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.bits, v)
    }

    pub fn pow2(&self, e: i32) -> Float {
        pow2(self.bits, e)
    }

    /// Exact rational p/q rounded once to working precision.
    pub fn ratio(&self, p: i64, q: i64) -> Float {
        Float::with_val(self.bits, p) / q
    }

    /// Decimal literal ("0.375", "3/8", "1e-3") at working precision.
    pub fn parse(&self, s: &str) -> Result<Float> {
        parse_real(s, self.bits)
    }

    /// Relative cut-off used to stop series: below the rounding level of the sum.
    pub fn series_cutoff(&self) -> Float {
        let tight = pow2(self.bits, -(self.bits as i32) - 10);
        if tight < self.eps_verify {
            tight
        } else {
            self.eps_verify.clone()
        }
    }
}

pub fn pow2(bits: u32, e: i32) -> Float {
    Float::with_val(bits, 1) << e
}

pub fn parse_real(s: &str, bits: u32) -> Result<Float> {
    let s = s.trim();
    let bad = || Error::InvalidSpec(format!("cannot parse '{s}' as a real number"));
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_real(p, bits)?;
        let q = parse_real(q, bits)?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(p / q);
    }
    let parsed = Float::parse(s).map_err(|_| bad())?;
    let v = Float::with_val(bits, parsed);
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

/// Sums `term_at(0) + term_at(1) + ...` until the last `guard_terms` terms are all
/// negligible relative to the partial sum and the geometric tail bound built from
/// the largest observed ratio among them is negligible too.
///
/// Returns the sum and the index of the last summed term. The guard terms are
/// included in the returned value.
pub fn sum_certified<F>(mut term_at: F, ctx: &PrecisionContext) -> Result<(Float, usize)>
where
    F: FnMut(usize) -> Float,
{
    let cutoff = ctx.series_cutoff();
    let g = ctx.guard_terms.max(1);
    let mut sum = ctx.zero();
    let mut recent: Vec<Float> = Vec::with_capacity(g + 1);
    for k in 0..=ctx.max_index {
        let t = term_at(k);
        sum += &t;
        if recent.len() == g + 1 {
            recent.remove(0);
        }
        recent.push(Float::with_val(ctx.bits, t.abs_ref()));
        if recent.len() < g + 1 {
            continue;
        }
        let bound = Float::with_val(ctx.bits, sum.abs_ref()) * &cutoff;
        if recent[1..].iter().any(|t| *t > bound) {
            continue;
        }
        let mut rmax = ctx.zero();
        for w in recent.windows(2) {
            let r = if w[1].is_zero() {
                ctx.zero()
            } else if w[0].is_zero() {
                // a nonzero term after an exact zero: no decay information yet
                Float::with_val(ctx.bits, 2)
            } else {
                Float::with_val(ctx.bits, &w[1] / &w[0])
            };
            if r > rmax {
                rmax = r;
            }
        }
        if rmax >= 1 {
            continue;
        }
        let last = &recent[g];
        let tail = Float::with_val(ctx.bits, last * &rmax) / (Float::with_val(ctx.bits, 1) - &rmax);
        if tail <= bound {
            return Ok((sum, k));
        }
    }
    Err(Error::NonConvergent(ctx.max_index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    #[test]
    fn tolerances_follow_bits() {
        let c = ctx();
        assert_eq!(c.eps_verify, pow2(256, -128));
        assert_eq!(c.eps_pivot, pow2(256, -64));
        assert!(c.eps_verify < c.eps_pivot);
        assert!(PrecisionContext::new(64).is_err());
    }

    #[test]
    fn single_term_series() {
        let c = ctx();
        let (v, _) = sum_certified(|k| if k == 0 { c.float(1) } else { c.zero() }, &c).unwrap();
        assert_eq!(v, 1);
    }

    #[test]
    fn geometric_series() {
        let c = ctx();
        let (v, _) = sum_certified(|k| c.pow2(-(k as i32)), &c).unwrap();
        let err = Float::with_val(c.bits, &v - 2u32).abs();
        assert!(err < c.eps_verify * 2u32);
    }

    #[test]
    fn inverse_factorial_squares_match_doubled_truncation() {
        let c = ctx();
        let term = |k: usize| {
            let mut f = c.float(1);
            for j in 1..=k {
                f /= j as u32;
                f /= j as u32;
            }
            f
        };
        let (v, n) = sum_certified(term, &c).unwrap();
        let mut oracle = c.zero();
        for k in 0..=2 * n + 2 {
            oracle += term(k);
        }
        let rel = Float::with_val(c.bits, &v - &oracle).abs() / &oracle;
        assert!(rel < c.eps_verify);
    }

    #[test]
    fn divergent_series_reports_non_convergence() {
        let c = ctx().with_max_index(200);
        let r = sum_certified(|_| c.float(1), &c);
        assert_eq!(r, Err(Error::NonConvergent(200)));
    }

    #[test]
    fn parse_forms() {
        let c = ctx();
        assert_eq!(c.parse("3/8").unwrap(), c.ratio(3, 8));
        assert_eq!(c.parse("0.375").unwrap(), c.ratio(3, 8));
        assert!(c.parse("abc").is_err());
        assert!(c.parse("1/0").is_err());
    }
}
