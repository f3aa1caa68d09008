//! Hankel moment matrices, LDLᵀ factorization and spectral data extraction.

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::PrecisionContext;
use crate::weights::{moment_table, FamilySpec, MomentTable};

/// Rows of the extra buffer added to every requested order.
pub const BUFFER: usize = 8;

pub type Matrix = Vec<Vec<Float>>;

/// G_{i,j} = ρ_{i+j}, K×K.
pub fn build_moment_matrix(table: &MomentTable, k: usize) -> Result<Matrix> {
    let need = (2 * k).saturating_sub(1);
    if table.len() < need {
        return Err(Error::InsufficientMoments { need, have: table.len() });
    }
    Ok((0..k).map(|i| (0..k).map(|j| table.rho[i + j].clone()).collect()).collect())
}

/// Result of G = S⁻¹ H S⁻ᵀ: S lower unitriangular, `l` = S⁻¹, `h` the pivots.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub s: Matrix,
    pub l: Matrix,
    pub h: Vec<Float>,
}

/// Symmetric elimination without pivoting.
///
/// A pivot is singular when |H_k| ≤ eps_pivot · eps_verify · (|G_kk| + Σ|L_kj² H_j|),
/// i.e. fewer than bits/4 significant bits survive the cancellation.
pub fn cholesky_ldlt(g: &Matrix, ctx: &PrecisionContext) -> Result<Factorization> {
    let k = g.len();
    let p = ctx.bits;
    let mut l: Matrix = vec![vec![Float::new(p); k]; k];
    let mut h: Vec<Float> = Vec::with_capacity(k);
    let threshold = Float::with_val(p, &ctx.eps_pivot * &ctx.eps_verify);
    for j in 0..k {
        l[j][j] = Float::with_val(p, 1);
        let mut d = g[j][j].clone();
        let mut scale = Float::with_val(p, g[j][j].abs_ref());
        for (m, hm) in h.iter().enumerate() {
            let t = Float::with_val(p, &l[j][m] * &l[j][m]) * hm;
            scale += Float::with_val(p, t.abs_ref());
            d -= t;
        }
        if Float::with_val(p, d.abs_ref()) <= Float::with_val(p, &threshold * &scale) {
            return Err(Error::SingularMinor(j));
        }
        for i in j + 1..k {
            let mut v = g[i][j].clone();
            for (m, hm) in h.iter().enumerate() {
                v -= Float::with_val(p, &l[i][m] * &l[j][m]) * hm;
            }
            l[i][j] = v / &d;
        }
        h.push(d);
    }
    let s = invert_unit_lower(&l, p);
    Ok(Factorization { s, l, h })
}

/// Inverse of a unit lower triangular matrix by forward substitution.
pub fn invert_unit_lower(l: &Matrix, bits: u32) -> Matrix {
    let k = l.len();
    let mut s: Matrix = vec![vec![Float::new(bits); k]; k];
    for j in 0..k {
        s[j][j] = Float::with_val(bits, 1);
        for i in j + 1..k {
            let mut v = Float::new(bits);
            for m in j..i {
                v -= Float::with_val(bits, &l[i][m] * &s[m][j]);
            }
            s[i][j] = v;
        }
    }
    s
}

impl Factorization {
    /// max |G − S⁻¹HS⁻ᵀ| / max |G|, with S⁻¹ recomputed from S.
    pub fn reconstruction_residual(&self, g: &Matrix) -> Float {
        let k = g.len();
        let p = self.h.first().map(|x| x.prec()).unwrap_or(128);
        let sinv = invert_unit_lower(&self.s, p);
        let mut gmax = Float::new(p);
        let mut rmax = Float::new(p);
        for i in 0..k {
            for j in 0..k {
                let mut v = Float::new(p);
                for m in 0..=i.min(j) {
                    v += Float::with_val(p, &sinv[i][m] * &sinv[j][m]) * &self.h[m];
                }
                let r = Float::with_val(p, &g[i][j] - &v).abs();
                let a = Float::with_val(p, g[i][j].abs_ref());
                if r > rmax {
                    rmax = r;
                }
                if a > gmax {
                    gmax = a;
                }
            }
        }
        if gmax.is_zero() {
            rmax
        } else {
            rmax / gmax
        }
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut a: Matrix, bits: u32) -> Float {
    let k = a.len();
    let mut det = Float::with_val(bits, 1);
    for c in 0..k {
        let mut piv = c;
        for r in c + 1..k {
            if Float::with_val(bits, a[r][c].abs_ref()) > Float::with_val(bits, a[piv][c].abs_ref()) {
                piv = r;
            }
        }
        if a[piv][c].is_zero() {
            return Float::new(bits);
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= &a[c][c];
        for r in c + 1..k {
            let f = Float::with_val(bits, &a[r][c] / &a[c][c]);
            for cc in c..k {
                let t = Float::with_val(bits, &f * &a[c][cc]);
                a[r][cc] -= t;
            }
        }
    }
    det
}

/// (Δ_1 … Δ_K, Δ̃_1 … Δ̃_K): leading Hankel minors and the minors with the last
/// column replaced by the next moment column, so that H_k = Δ_{k+1}/Δ_k and
/// p¹_k = −Δ̃_k/Δ_k.
pub fn hankel_determinants(
    table: &MomentTable,
    k: usize,
    ctx: &PrecisionContext,
) -> Result<(Vec<Float>, Vec<Float>)> {
    if table.len() < 2 * k {
        return Err(Error::InsufficientMoments { need: 2 * k, have: table.len() });
    }
    let mut d = Vec::with_capacity(k);
    let mut dt = Vec::with_capacity(k);
    for m in 1..=k {
        let a: Matrix =
            (0..m).map(|i| (0..m).map(|j| table.rho[i + j].clone()).collect()).collect();
        d.push(determinant(a, ctx.bits));
        let at: Matrix = (0..m)
            .map(|i| {
                (0..m).map(|j| table.rho[i + if j + 1 == m { m } else { j }].clone()).collect()
            })
            .collect();
        dt.push(determinant(at, ctx.bits));
    }
    Ok((d, dt))
}

/// Per-index output of the factorization at the internal size.
///
/// Vectors are indexed by n directly. `gamma[0]` is 0 by convention, as are
/// `p1[0]`, `p2[0]` and `p2[1]`. `beta` has one entry fewer than `h`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub k: usize,
    pub h: Vec<Float>,
    pub beta: Vec<Float>,
    pub gamma: Vec<Float>,
    pub p1: Vec<Float>,
    pub p2: Vec<Float>,
    /// s_bands[d-1][n] = S_{n+d,n} for d = 1, 2, 3.
    pub s_bands: Vec<Vec<Float>>,
    pub s: Matrix,
    pub bits: u32,
}

pub fn extract_spectral(f: &Factorization, k: usize, ctx: &PrecisionContext) -> SpectralData {
    let size = f.h.len();
    let p = ctx.bits;
    let s = &f.s;
    let p1: Vec<Float> =
        (0..size).map(|n| if n >= 1 { s[n][n - 1].clone() } else { Float::new(p) }).collect();
    let p2: Vec<Float> =
        (0..size).map(|n| if n >= 2 { s[n][n - 2].clone() } else { Float::new(p) }).collect();
    let beta: Vec<Float> =
        (0..size.saturating_sub(1)).map(|n| Float::with_val(p, &p1[n] - &p1[n + 1])).collect();
    let gamma: Vec<Float> = (0..size)
        .map(|n| if n >= 1 { Float::with_val(p, &f.h[n] / &f.h[n - 1]) } else { Float::new(p) })
        .collect();
    let s_bands = (1..=3)
        .map(|d| (0..size.saturating_sub(d)).map(|n| s[n + d][n].clone()).collect())
        .collect();
    SpectralData {
        k,
        h: f.h.clone(),
        beta,
        gamma,
        p1,
        p2,
        s_bands,
        s: s.clone(),
        bits: p,
    }
}

impl SpectralData {
    /// Internal size (number of pivots).
    pub fn size(&self) -> usize {
        self.h.len()
    }

    /// P_0(z) … P_{n_max}(z) by the three-term recursion.
    pub fn eval_polynomials(&self, z: &Float, n_max: usize) -> Vec<Float> {
        let p = self.bits;
        let mut out = vec![Float::with_val(p, 1)];
        let mut prev = Float::new(p);
        for n in 0..n_max {
            let cur = &out[n];
            let next = Float::with_val(p, z - &self.beta[n]) * cur
                - Float::with_val(p, &self.gamma[n] * &prev);
            prev = cur.clone();
            out.push(next);
        }
        out
    }

    /// P_n(z) from the coefficient rows of S (independent of the recursion).
    pub fn eval_from_s(&self, z: &Float, n: usize) -> Float {
        let p = self.bits;
        let mut v = Float::new(p);
        for j in (0..=n).rev() {
            v *= z;
            v += &self.s[n][j];
        }
        v
    }
}

/// Full pipeline output for one spec: moments, factorization and spectral data at
/// the internal size `k + BUFFER + 1`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub spec: FamilySpec,
    pub table: MomentTable,
    pub gram: Matrix,
    pub factor: Factorization,
    pub data: SpectralData,
    pub k: usize,
    pub k_int: usize,
}

impl Pipeline {
    pub fn build(spec: &FamilySpec, k: usize, ctx: &PrecisionContext) -> Result<Pipeline> {
        Self::build_with_buffer(spec, k, BUFFER, ctx)
    }

    pub fn build_with_buffer(
        spec: &FamilySpec,
        k: usize,
        buffer: usize,
        ctx: &PrecisionContext,
    ) -> Result<Pipeline> {
        if k == 0 {
            return Err(Error::InvalidSpec("order must be at least 1".to_string()));
        }
        let k_int = k + buffer;
        let size = k_int + 1;
        let table = moment_table(spec, 2 * size + 2, ctx)?;
        let gram = build_moment_matrix(&table, size)?;
        let factor = cholesky_ldlt(&gram, ctx)?;
        let data = extract_spectral(&factor, k, ctx);
        Ok(Pipeline { spec: spec.clone(), table, gram, factor, data, k, k_int })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Family;

    fn ctx() -> PrecisionContext {
        PrecisionContext::new(256).unwrap()
    }

    fn table(c: &PrecisionContext, rho: &[i64]) -> MomentTable {
        let spec = FamilySpec::new(Family::F12, vec![c.float(1)], vec![c.zero(), c.zero()], c.float(1))
            .unwrap();
        MomentTable { rho: rho.iter().map(|&r| c.float(r)).collect(), spec, bits: c.bits }
    }

    #[test]
    fn moment_matrix_shapes() {
        let c = ctx();
        let t = table(&c, &[3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]);
        assert_eq!(build_moment_matrix(&t, 1).unwrap(), vec![vec![c.float(3)]]);
        let g = build_moment_matrix(&t, 2).unwrap();
        assert_eq!(g[0][1], 5);
        assert_eq!(g[1][1], 7);
        let g = build_moment_matrix(&t, 8).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(g[i + 1][j], g[i][j + 1]);
            }
        }
        assert!(matches!(build_moment_matrix(&t, 9), Err(Error::InsufficientMoments { .. })));
    }

    #[test]
    fn two_by_two_closed_form() {
        let c = ctx();
        let t = table(&c, &[2, 3, 7]);
        let g = build_moment_matrix(&t, 2).unwrap();
        let f = cholesky_ldlt(&g, &c).unwrap();
        assert_eq!(f.l[1][0], c.ratio(3, 2));
        assert_eq!(f.h[1], c.ratio(5, 2));
        assert_eq!(f.s[1][0], c.ratio(-3, 2));
    }

    #[test]
    fn degenerate_table_is_singular() {
        let c = ctx();
        let t = table(&c, &[1, 0, 0, 0, 0]);
        let g = build_moment_matrix(&t, 3).unwrap();
        assert_eq!(cholesky_ldlt(&g, &c).unwrap_err(), Error::SingularMinor(1));
    }

    #[test]
    fn small_determinants() {
        let c = ctx();
        let t = table(&c, &[2, 3, 7, 1, 5, 4]);
        let (d, dt) = hankel_determinants(&t, 2, &c).unwrap();
        let close = |x: &Float, w: i64| {
            Float::with_val(c.bits, x - w).abs() < c.eps_verify
        };
        assert!(close(&d[0], 2));
        assert!(close(&dt[0], 3));
        assert!(close(&d[1], 2 * 7 - 9));
        assert!(close(&dt[1], 2 - 3 * 7));
    }

    #[test]
    fn polynomial_recursion_start() {
        let c = ctx();
        let spec = FamilySpec::new(
            Family::F22,
            vec![c.ratio(3, 4), c.ratio(9, 4)],
            vec![c.ratio(3, 8), c.ratio(13, 8)],
            c.ratio(3, 2),
        )
        .unwrap();
        let pl = Pipeline::build_with_buffer(&spec, 4, 2, &c).unwrap();
        let z = c.ratio(1, 3);
        let v = pl.data.eval_polynomials(&z, 4);
        assert_eq!(v[1], Float::with_val(c.bits, &z - &pl.data.beta[0]));
        let b0 = Float::with_val(c.bits, &pl.table.rho[1] / &pl.table.rho[0]);
        let rel = Float::with_val(c.bits, &pl.data.beta[0] - &b0).abs() / &b0;
        assert!(rel < c.eps_verify);
        for n in 0..=4 {
            let d = Float::with_val(c.bits, &v[n] - pl.data.eval_from_s(&z, n)).abs();
            assert!(d < c.eps_verify, "n={n}");
        }
    }
}
