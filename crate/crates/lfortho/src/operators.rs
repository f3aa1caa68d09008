//! Truncated semi-infinite banded operators.
//!
//! Entry (i, j) is stored in diagonal d = j − i at row i. Bandwidths are the true
//! bandwidths of the semi-infinite operator (`None` = unbounded). `valid` is the
//! size of the leading square block whose entries agree with the semi-infinite
//! operator: a product loses min(upper(A), lower(B)) rows of it.

use std::collections::BTreeMap;

use rug::Float;

use crate::error::{Error, Result};
use crate::hankel::{Matrix, SpectralData};
use crate::weights::{FamilySpec, PearsonPair};

#[derive(Debug, Clone)]
pub struct BandedOperator {
    pub size: usize,
    pub diagonals: BTreeMap<i64, Vec<Float>>,
    pub lower: Option<usize>,
    pub upper: Option<usize>,
    pub valid: usize,
    pub bits: u32,
}

fn band_add(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    Some(a? + b?)
}

impl BandedOperator {
    pub fn zeros(size: usize, lower: Option<usize>, upper: Option<usize>, bits: u32) -> Self {
        let lo = lower.unwrap_or(size.saturating_sub(1)).min(size.saturating_sub(1)) as i64;
        let up = upper.unwrap_or(size.saturating_sub(1)).min(size.saturating_sub(1)) as i64;
        let diagonals = (-lo..=up).map(|d| (d, vec![Float::new(bits); size])).collect();
        BandedOperator { size, diagonals, lower, upper, valid: size, bits }
    }

    pub fn identity(size: usize, bits: u32) -> Self {
        let mut m = Self::zeros(size, Some(0), Some(0), bits);
        for v in m.diagonals.get_mut(&0).unwrap().iter_mut() {
            *v = Float::with_val(bits, 1);
        }
        m
    }

    /// Λ: ones on the first superdiagonal.
    pub fn shift(size: usize, bits: u32) -> Self {
        let mut m = Self::zeros(size, Some(0), Some(1), bits);
        for i in 0..size.saturating_sub(1) {
            m.set(i, i + 1, Float::with_val(bits, 1));
        }
        m
    }

    /// Dense lower (or general) matrix; bandwidths given by the caller.
    pub fn from_dense(a: &Matrix, lower: Option<usize>, upper: Option<usize>, bits: u32) -> Self {
        let size = a.len();
        let mut m = Self::zeros(size, lower, upper, bits);
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let d = j as i64 - i as i64;
                if m.diagonals.contains_key(&d) {
                    m.set(i, j, v.clone());
                }
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Float {
        let d = j as i64 - i as i64;
        match self.diagonals.get(&d) {
            Some(v) if i < self.size && j < self.size => v[i].clone(),
            _ => Float::new(self.bits),
        }
    }

    pub fn get_ref(&self, i: usize, j: usize) -> Option<&Float> {
        let d = j as i64 - i as i64;
        if i >= self.size || j >= self.size {
            return None;
        }
        self.diagonals.get(&d).map(|v| &v[i])
    }

    pub fn set(&mut self, i: usize, j: usize, v: Float) {
        let d = j as i64 - i as i64;
        let size = self.size;
        let diag = self.diagonals.entry(d).or_insert_with(|| vec![Float::new(v.prec()); size]);
        diag[i] = v;
    }

    /// Diagonal entry in the operator convention A = Σ (Λᵀ)^k a^{(−k)} + Σ a^{(k)} Λ^k:
    /// a^{(k)}_n = A_{n,n+k} for k ≥ 0 and A_{n−k,n} for k < 0.
    pub fn diag_entry(&self, k: i64, n: usize) -> Float {
        if k >= 0 {
            self.get(n, n + k as usize)
        } else {
            self.get(n + (-k) as usize, n)
        }
    }

    pub fn to_dense(&self) -> Matrix {
        (0..self.size).map(|i| (0..self.size).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.size, self.upper, self.lower, self.bits);
        for (&d, v) in &self.diagonals {
            for i in 0..self.size {
                let j = i as i64 + d;
                if j >= 0 && (j as usize) < self.size {
                    t.set(j as usize, i, v[i].clone());
                }
            }
        }
        t.valid = self.valid;
        t
    }

    pub fn scale(&self, c: &Float) -> Self {
        let mut r = self.clone();
        for v in r.diagonals.values_mut() {
            for x in v.iter_mut() {
                *x *= c;
            }
        }
        r
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, true)
    }

    fn combine(&self, other: &Self, negate: bool) -> Self {
        let lower = self.lower.zip(other.lower).map(|(a, b)| a.max(b));
        let upper = self.upper.zip(other.upper).map(|(a, b)| a.max(b));
        let mut r = Self::zeros(self.size, lower, upper, self.bits);
        for (&d, v) in &self.diagonals {
            let t = r.diagonals.get_mut(&d).unwrap();
            for (x, y) in t.iter_mut().zip(v) {
                *x += y;
            }
        }
        for (&d, v) in &other.diagonals {
            let t = r.diagonals.get_mut(&d).unwrap();
            for (x, y) in t.iter_mut().zip(v) {
                if negate {
                    *x -= y;
                } else {
                    *x += y;
                }
            }
        }
        r.valid = self.valid.min(other.valid);
        r
    }

    /// self + c·I
    pub fn add_identity(&self, c: &Float) -> Self {
        let mut r = self.clone();
        let diag = r.diagonals.entry(0).or_insert_with(|| vec![Float::new(self.bits); self.size]);
        for x in diag.iter_mut() {
            *x += c;
        }
        r
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let loss = match (self.upper, other.lower) {
            (None, None) => return Err(Error::BufferExhausted),
            (Some(u), None) => u,
            (None, Some(l)) => l,
            (Some(u), Some(l)) => u.min(l),
        };
        let valid = self.valid.min(other.valid).saturating_sub(loss);
        if valid == 0 {
            return Err(Error::BufferExhausted);
        }
        let lower = band_add(self.lower, other.lower);
        let upper = band_add(self.upper, other.upper);
        let mut r = Self::zeros(self.size, lower, upper, self.bits);
        let n = self.size as i64;
        for (&da, va) in &self.diagonals {
            for (&db, vb) in &other.diagonals {
                let dc = da + db;
                let Some(target) = r.diagonals.get_mut(&dc) else { continue };
                for i in 0..n {
                    let k = i + da;
                    let j = k + db;
                    if k < 0 || k >= n || j < 0 || j >= n {
                        continue;
                    }
                    let a = &va[i as usize];
                    let b = &vb[k as usize];
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    target[i as usize] += Float::with_val(self.bits, a * b);
                }
            }
        }
        r.valid = valid;
        Ok(r)
    }

    /// Drops diagonals outside [−lower, upper] and records the new bandwidths.
    pub fn clip_band(&self, lower: usize, upper: usize) -> Self {
        let mut r = self.clone();
        r.diagonals.retain(|&d, _| d >= -(lower as i64) && d <= upper as i64);
        r.lower = Some(lower);
        r.upper = Some(upper);
        r
    }

    /// max |entry| over the valid block.
    pub fn max_abs(&self) -> Float {
        let mut m = Float::new(self.bits);
        for (&d, v) in &self.diagonals {
            for (i, x) in v.iter().enumerate().take(self.valid) {
                let j = i as i64 + d;
                if j < 0 || j as usize >= self.valid {
                    continue;
                }
                let a = Float::with_val(self.bits, x.abs_ref());
                if a > m {
                    m = a;
                }
            }
        }
        m
    }

    /// max |entry| over the valid block restricted to diagonals outside [lo, hi].
    pub fn off_band_max(&self, lo: i64, hi: i64) -> Float {
        let mut m = Float::new(self.bits);
        for i in 0..self.valid {
            for j in 0..self.valid {
                let d = j as i64 - i as i64;
                if d < lo || d > hi {
                    if let Some(x) = self.get_ref(i, j) {
                        let a = Float::with_val(self.bits, x.abs_ref());
                        if a > m {
                            m = a;
                        }
                    }
                }
            }
        }
        m
    }

    /// Diagonals over the valid block whose max |entry| exceeds `tol`.
    pub fn nonzero_diagonals(&self, tol: &Float) -> Vec<i64> {
        let mut out = Vec::new();
        for (&d, v) in &self.diagonals {
            let mut big = false;
            for i in 0..self.valid {
                let j = i as i64 + d;
                if j < 0 || j as usize >= self.valid {
                    continue;
                }
                if Float::with_val(self.bits, v[i].abs_ref()) > *tol {
                    big = true;
                    break;
                }
            }
            if big {
                out.push(d);
            }
        }
        out
    }

    /// max over the valid block of |A − B| / max(‖A‖, ‖B‖).
    pub fn rel_diff(&self, other: &Self) -> Float {
        let v = self.valid.min(other.valid);
        let mut scale = self.max_abs();
        let s2 = other.max_abs();
        if s2 > scale {
            scale = s2;
        }
        let mut m = Float::new(self.bits);
        for i in 0..v {
            for j in 0..v {
                let d = Float::with_val(self.bits, self.get(i, j) - other.get(i, j)).abs();
                if d > m {
                    m = d;
                }
            }
        }
        if scale.is_zero() {
            m
        } else {
            m / scale
        }
    }

    pub fn apply(&self, x: &[Float]) -> Vec<Float> {
        (0..self.size)
            .map(|i| {
                let mut s = Float::new(self.bits);
                for (&d, v) in &self.diagonals {
                    let j = i as i64 + d;
                    if j >= 0 && (j as usize) < x.len() && (j as usize) < self.size {
                        s += Float::with_val(self.bits, &v[i] * &x[j as usize]);
                    }
                }
                s
            })
            .collect()
    }

    pub fn diagonal_matrix(values: &[Float], bits: u32) -> Self {
        let mut m = Self::zeros(values.len(), Some(0), Some(0), bits);
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }
}

/// p(A) for ascending coefficients by Horner.
pub fn poly_of(coeffs: &[Float], a: &BandedOperator) -> Result<BandedOperator> {
    let bits = a.bits;
    let mut acc = BandedOperator::identity(a.size, bits).scale(coeffs.last().unwrap());
    for c in coeffs.iter().rev().skip(1) {
        acc = acc.mul(a)?.add_identity(c);
    }
    Ok(acc)
}

pub fn jacobi_matrix(data: &SpectralData, size: usize) -> BandedOperator {
    let bits = data.bits;
    let mut j = BandedOperator::zeros(size, Some(1), Some(1), bits);
    for n in 0..size {
        j.set(n, n, data.beta[n].clone());
        if n + 1 < size {
            j.set(n, n + 1, Float::with_val(bits, 1));
            j.set(n + 1, n, data.gamma[n + 1].clone());
        }
    }
    j
}

pub fn h_matrix(data: &SpectralData, size: usize) -> BandedOperator {
    BandedOperator::diagonal_matrix(&data.h[..size], data.bits)
}

pub fn h_inv_matrix(data: &SpectralData, size: usize) -> BandedOperator {
    let v: Vec<Float> =
        data.h[..size].iter().map(|h| Float::with_val(data.bits, 1) / h).collect();
    BandedOperator::diagonal_matrix(&v, data.bits)
}

fn binomial_row(n: usize, bits: u32) -> Vec<Float> {
    let mut row = vec![Float::with_val(bits, 1)];
    for k in 1..=n {
        let prev = row[k - 1].clone();
        row.push(prev * (n + 1 - k) as u32 / k as u32);
    }
    row
}

/// B (sign = +1) or B⁻¹ (sign = −1), lower triangular binomials.
pub fn pascal_matrix(size: usize, sign: i32, bits: u32) -> BandedOperator {
    let mut m = BandedOperator::zeros(size, None, Some(0), bits);
    for n in 0..size {
        for (k, v) in binomial_row(n, bits).into_iter().enumerate() {
            let neg = sign < 0 && (n + k) % 2 == 1;
            m.set(n, k, if neg { -v } else { v });
        }
    }
    m
}

fn lower_from_dense(a: &Matrix, size: usize, bits: u32) -> BandedOperator {
    let block: Matrix = a[..size].iter().map(|r| r[..size].to_vec()).collect();
    BandedOperator::from_dense(&block, None, Some(0), bits)
}

pub fn s_matrix(data: &SpectralData, size: usize) -> BandedOperator {
    lower_from_dense(&data.s, size, data.bits)
}

pub fn s_inv_matrix(data: &SpectralData, size: usize) -> BandedOperator {
    let sinv = crate::hankel::invert_unit_lower(&data.s, data.bits);
    lower_from_dense(&sinv, size, data.bits)
}

/// Π^{±1} = S B^{±1} S⁻¹.
pub fn dressed_pascal(data: &SpectralData, size: usize, sign: i32) -> Result<BandedOperator> {
    let s = s_matrix(data, size);
    let sinv = s_inv_matrix(data, size);
    let b = pascal_matrix(size, sign, data.bits);
    s.mul(&b)?.mul(&sinv)
}

/// Offsets (−M, N+1) spanned by Ψ.
pub fn psi_band(spec: &FamilySpec) -> (usize, usize) {
    (spec.a.len(), spec.b.len() + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsiMethod {
    SigmaJHPiT,
    PiInvHThetaJT,
    PiInvThetaJH,
    HSigmaJTPiT,
    ThetaJplusPiInvH,
    HPiTSigmaJTminus,
}

impl PsiMethod {
    pub const ALL: [PsiMethod; 6] = [
        PsiMethod::SigmaJHPiT,
        PsiMethod::PiInvHThetaJT,
        PsiMethod::PiInvThetaJH,
        PsiMethod::HSigmaJTPiT,
        PsiMethod::ThetaJplusPiInvH,
        PsiMethod::HPiTSigmaJTminus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PsiMethod::SigmaJHPiT => "sigmaJ_H_PiT",
            PsiMethod::PiInvHThetaJT => "PiInv_H_thetaJT",
            PsiMethod::PiInvThetaJH => "PiInv_thetaJ_H",
            PsiMethod::HSigmaJTPiT => "H_sigmaJT_PiT",
            PsiMethod::ThetaJplusPiInvH => "thetaJplus_PiInv_H",
            PsiMethod::HPiTSigmaJTminus => "H_PiT_sigmaJTminus",
        }
    }
}

/// Operators shared by every Ψ route at one internal size.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub size: usize,
    pub j: BandedOperator,
    pub h: BandedOperator,
    pub h_inv: BandedOperator,
    pub pi: BandedOperator,
    pub pi_inv: BandedOperator,
    pub pearson: PearsonPair,
    pub band: (usize, usize),
    pub bits: u32,
}

impl OperatorSet {
    pub fn new(spec: &FamilySpec, data: &SpectralData, size: usize) -> Result<Self> {
        Ok(OperatorSet {
            size,
            j: jacobi_matrix(data, size),
            h: h_matrix(data, size),
            h_inv: h_inv_matrix(data, size),
            pi: dressed_pascal(data, size, 1)?,
            pi_inv: dressed_pascal(data, size, -1)?,
            pearson: spec.pearson(),
            band: psi_band(spec),
            bits: data.bits,
        })
    }

    fn sigma_of(&self, a: &BandedOperator) -> Result<BandedOperator> {
        poly_of(&self.pearson.sigma_coeffs(), a)
    }

    fn theta_of(&self, a: &BandedOperator) -> Result<BandedOperator> {
        poly_of(&self.pearson.theta_coeffs(), a)
    }

    /// Ψ restricted to its theoretical band.
    pub fn psi(&self, method: PsiMethod) -> Result<BandedOperator> {
        let (lo, up) = self.band;
        Ok(self.structure_matrix(method)?.clip_band(lo, up))
    }

    pub fn structure_matrix(&self, method: PsiMethod) -> Result<BandedOperator> {
        let one = Float::with_val(self.bits, 1);
        let jt = self.j.transpose();
        match method {
            PsiMethod::SigmaJHPiT => {
                self.sigma_of(&self.j)?.mul(&self.h)?.mul(&self.pi.transpose())
            }
            PsiMethod::PiInvHThetaJT => self.pi_inv.mul(&self.h)?.mul(&self.theta_of(&jt)?),
            PsiMethod::PiInvThetaJH => self.pi_inv.mul(&self.theta_of(&self.j)?)?.mul(&self.h),
            PsiMethod::HSigmaJTPiT => {
                self.h.mul(&self.sigma_of(&jt)?)?.mul(&self.pi.transpose())
            }
            PsiMethod::ThetaJplusPiInvH => {
                let jp = self.j.add_identity(&one);
                self.theta_of(&jp)?.mul(&self.pi_inv)?.mul(&self.h)
            }
            PsiMethod::HPiTSigmaJTminus => {
                let jm = jt.add_identity(&Float::with_val(self.bits, -1));
                self.h.mul(&self.pi.transpose())?.mul(&self.sigma_of(&jm)?)
            }
        }
    }
}

/// Componentwise residuals of θ(z)P(z−1) = ΨH⁻¹P(z) and σ(z)P(z+1) = ΨᵀH⁻¹P(z) over
/// the valid rows, each normalized by max(|left side|, 1).
pub fn shift_structure_residual(
    ops: &OperatorSet,
    data: &SpectralData,
    psi: &BandedOperator,
    z: &Float,
) -> Result<(Float, Float)> {
    let bits = ops.bits;
    let n = ops.size;
    let one = Float::with_val(bits, 1);
    let zm = Float::with_val(bits, z - &one);
    let zp = Float::with_val(bits, z + &one);
    let pz = data.eval_polynomials(z, n - 1);
    let pzm = data.eval_polynomials(&zm, n - 1);
    let pzp = data.eval_polynomials(&zp, n - 1);
    let th = ops.pearson.theta(z);
    let sg = ops.pearson.sigma(z);
    let m_minus = psi.mul(&ops.h_inv)?;
    let m_plus = psi.transpose().mul(&ops.h_inv)?;
    let rows = |m: &BandedOperator| -> usize {
        // rows whose band reaches only the valid block
        m.valid.saturating_sub(m.upper.unwrap_or(n))
    };
    let r_minus = residual_rows(&m_minus, &pz, &pzm, &th, rows(&m_minus), bits);
    let r_plus = residual_rows(&m_plus, &pz, &pzp, &sg, rows(&m_plus), bits);
    if rows(&m_minus) == 0 || rows(&m_plus) == 0 {
        return Err(Error::BufferExhausted);
    }
    Ok((r_minus, r_plus))
}

fn residual_rows(
    m: &BandedOperator,
    pz: &[Float],
    pshift: &[Float],
    factor: &Float,
    rows: usize,
    bits: u32,
) -> Float {
    let rhs = m.apply(pz);
    let mut worst = Float::new(bits);
    for i in 0..rows {
        let lhs = Float::with_val(bits, factor * &pshift[i]);
        let scale = Float::with_val(bits, lhs.abs_ref()).max(&Float::with_val(bits, 1));
        let r = Float::with_val(bits, &lhs - &rhs[i]).abs() / scale;
        if r > worst {
            worst = r;
        }
    }
    worst
}

/// ‖[ΨH⁻¹, J] − ΨH⁻¹‖_max / ‖ΨH⁻¹‖_max over the valid block.
pub fn compatibility_residual(ops: &OperatorSet, psi: &BandedOperator) -> Result<Float> {
    let m = psi.mul(&ops.h_inv)?;
    let comm = m.mul(&ops.j)?.sub(&ops.j.mul(&m)?);
    let r = comm.sub(&m);
    let mut r = r;
    r.valid = comm.valid;
    let mut mm = m.clone();
    mm.valid = comm.valid;
    Ok(relative_max(&r, &mm))
}

/// ‖[J, ΨᵀH⁻¹] − ΨᵀH⁻¹‖_max / ‖ΨᵀH⁻¹‖_max over the valid block.
pub fn compatibility_residual_transposed(ops: &OperatorSet, psi: &BandedOperator) -> Result<Float> {
    let m = psi.transpose().mul(&ops.h_inv)?;
    let comm = ops.j.mul(&m)?.sub(&m.mul(&ops.j)?);
    let mut r = comm.sub(&m);
    r.valid = comm.valid;
    let mut mm = m.clone();
    mm.valid = comm.valid;
    Ok(relative_max(&r, &mm))
}

pub fn relative_max(r: &BandedOperator, reference: &BandedOperator) -> Float {
    let s = reference.max_abs();
    let v = r.max_abs();
    if s.is_zero() {
        v
    } else {
        v / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::ops::Pow;

    const B: u32 = 192;

    fn f(v: i64) -> Float {
        Float::with_val(B, v)
    }

    #[test]
    fn pascal_rows() {
        let b = pascal_matrix(3, 1, B);
        assert_eq!(b.to_dense(), vec![vec![f(1), f(0), f(0)], vec![f(1), f(1), f(0)], vec![f(1), f(2), f(1)]]);
        let bi = pascal_matrix(3, -1, B);
        assert_eq!(bi.to_dense(), vec![vec![f(1), f(0), f(0)], vec![f(-1), f(1), f(0)], vec![f(1), f(-2), f(1)]]);
        let prod = b.mul(&bi).unwrap();
        assert_eq!(prod.rel_diff(&BandedOperator::identity(3, B)), 0);
    }

    #[test]
    fn pascal_shifts_monomials() {
        let b = pascal_matrix(6, 1, B);
        let chi: Vec<Float> = (0..6).map(|k| f(2).pow(k as u32)).collect();
        let out = b.apply(&chi);
        let want = [1, 3, 9, 27, 81, 243];
        for (o, w) in out.iter().zip(want) {
            assert_eq!(*o, w);
        }
    }

    #[test]
    fn product_validity_tracks_bandwidth() {
        let l = BandedOperator::shift(10, B);
        let lt = l.transpose();
        let p = l.mul(&lt).unwrap();
        assert_eq!(p.valid, 9);
        let q = lt.mul(&l).unwrap();
        assert_eq!(q.valid, 10);
        let full = pascal_matrix(10, 1, B);
        assert!(full.transpose().mul(&full).is_err());
        assert_eq!(full.mul(&full.transpose()).unwrap().valid, 10);
    }

    #[test]
    fn horner_matches_explicit() {
        let j = {
            let mut m = BandedOperator::zeros(6, Some(1), Some(1), B);
            for i in 0..6 {
                m.set(i, i, f(i as i64 + 1));
                if i + 1 < 6 {
                    m.set(i, i + 1, f(1));
                    m.set(i + 1, i, f(2));
                }
            }
            m
        };
        // p(x) = 2 + 3x + x^2
        let p = poly_of(&[f(2), f(3), f(1)], &j).unwrap();
        let explicit = j.mul(&j).unwrap().add(&j.scale(&f(3))).add_identity(&f(2));
        assert_eq!(p.rel_diff(&explicit), 0);
        assert_eq!(p.valid, 5);
    }
}
