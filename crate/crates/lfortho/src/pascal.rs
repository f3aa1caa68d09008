//! Dressed Pascal matrices: diagonal formulas in terms of p¹, p², and the shift
//! relations P(z±1) = Π^{±1}P(z).
//!
//! π^{[k]}_n is the entry Π_{n+k,n} (Π⁻¹ for negative k). The leading π^{[±3]}
//! term exists as printed (divisor 3, from D^{[k]} = diag(falling factorial)/k)
//! and corrected (divisor 6 = 3!, the binomial B_{n+3,n}).

use rug::Float;

use crate::hankel::SpectralData;
use crate::lf::Residual;
use crate::operators::{pascal_matrix, BandedOperator, OperatorSet};
use crate::tracked::Val;

fn entry(m: &BandedOperator, i: usize, j: usize) -> Val {
    Val::var(&m.get(i, j))
}

/// Diagonal identities of Π^{±1} for n = 0…n_max; needs p¹, p² through n_max+3.
pub fn diagonal_residuals(data: &SpectralData, ops: &OperatorSet, n_max: usize) -> Vec<Residual> {
    let bits = data.bits;
    let p1 = |k: usize| Val::var(&data.p1[k]);
    let p2 = |k: usize| Val::var(&data.p2[k]);
    let beta = |k: usize| Val::var(&data.beta[k]);
    let mut out = Vec::new();
    for n in 0..=n_max {
        let ni = n as i64;
        let pi = |k: usize| entry(&ops.pi, n + k, n);
        let pim = |k: usize| entry(&ops.pi_inv, n + k, n);
        let r = |id: &str, v: Val| Residual::new(id.to_string(), n, &v);
        let int = |v: i64| Val::int(v, bits);

        out.push(r("pascal.pi_plus1", pi(1) - (ni + 1)));
        out.push(r("pascal.pi_minus1", pim(1) + (ni + 1)));

        let d2 = int((ni + 2) * (ni + 1));
        let half = |v: Val| v / 2;
        for (sign, name, m) in [(1, "plus", &pi as &dyn Fn(usize) -> Val), (-1, "minus", &pim)] {
            let rhs = half(d2.clone()) + sign * (p1(n + 2) * (ni + 1)) - sign * (p1(n + 1) * (ni + 2));
            out.push(r(&format!("pascal.pi_{name}2"), m(2) - rhs));
            let rhs = half(d2.clone()) - sign * (beta(n + 1) * (ni + 1)) - sign * p1(n + 1);
            out.push(r(&format!("pascal.pi_{name}2_beta"), m(2) - rhs));

            let cube = int((ni + 3) * (ni + 2) * (ni + 1));
            let rest = half(d2.clone()) * p1(n + 3) - half(int((ni + 3) * (ni + 2))) * p1(n + 1)
                + sign * (p2(n + 3) * (ni + 1))
                - sign * (p2(n + 2) * (ni + 3))
                + sign * (p1(n + 2) * p1(n + 1) * (ni + 3))
                - sign * (p1(n + 3) * p1(n + 1) * (ni + 2));
            for (variant, div) in [("printed", 3), ("corrected", 6)] {
                let lead = sign * (cube.clone() / div);
                out.push(r(&format!("pascal.pi_{name}3[{variant}]"), m(3) - (lead + &rest)));
            }
        }

        out.push(r("pascal.sum1", pi(1) + pim(1)));
        out.push(r("pascal.sum2", pi(2) + pim(2) - d2.clone()));
        let sum3 = int(ni + 2) * (p1(n + 3) * (ni + 1) - p1(n + 1) * (ni + 3));
        out.push(r("pascal.sum3", pi(3) + pim(3) - sum3));
    }
    out
}

/// P(z+1) = ΠP(z) and P(z−1) = Π⁻¹P(z) for n = 0…n_max, each row relative to its
/// own terms.
pub fn shift_residuals(data: &SpectralData, ops: &OperatorSet, z: &Float, n_max: usize) -> (Vec<Val>, Vec<Val>) {
    let bits = data.bits;
    let pz = data.eval_polynomials(z, n_max);
    let shifted = |d: i32| data.eval_polynomials(&Float::with_val(bits, z + d), n_max);
    let (pp, pm) = (shifted(1), shifted(-1));
    let row = |m: &BandedOperator, lhs: &[Float], n: usize| {
        let mut acc = Val::var(&lhs[n]);
        for (j, x) in pz.iter().enumerate().take(n + 1) {
            acc = acc - entry(m, n, j) * Val::var(x);
        }
        acc
    };
    let plus = (0..=n_max).map(|n| row(&ops.pi, &pp, n)).collect();
    let minus = (0..=n_max).map(|n| row(&ops.pi_inv, &pm, n)).collect();
    (plus, minus)
}

/// max over the valid block of |Π⁻¹Π − I|.
pub fn inverse_residual(ops: &OperatorSet) -> crate::Result<Float> {
    let prod = ops.pi_inv.mul(&ops.pi)?;
    let id = BandedOperator::identity(ops.size, ops.bits);
    let mut d = prod.sub(&id);
    d.valid = prod.valid;
    Ok(d.max_abs())
}

/// max |B·B⁻¹ − I| and max relative |Bχ(z) − χ(z+1)| at size `size`.
pub fn binomial_residuals(size: usize, z: &Float, bits: u32) -> crate::Result<(Float, Float)> {
    let b = pascal_matrix(size, 1, bits);
    let bi = pascal_matrix(size, -1, bits);
    let mut d = b.mul(&bi)?.sub(&BandedOperator::identity(size, bits));
    d.valid = size;
    let chi = |x: &Float| -> Vec<Float> {
        let mut v = vec![Float::with_val(bits, 1)];
        for k in 1..size {
            let next = Float::with_val(bits, &v[k - 1] * x);
            v.push(next);
        }
        v
    };
    let shifted = chi(&Float::with_val(bits, z + 1));
    let applied = b.apply(&chi(z));
    let mut worst = Float::new(bits);
    for (x, y) in applied.iter().zip(&shifted) {
        let r = Float::with_val(bits, x - y).abs() / Float::with_val(bits, y.abs_ref()).max(&Float::with_val(bits, 1));
        if r > worst {
            worst = r;
        }
    }
    Ok((d.max_abs(), worst))
}
