//! Reals that carry a magnitude bound alongside their value.
//!
//! `m` bounds the sum of absolute values of all terms that went into `v`
//! (sums add magnitudes, products multiply them, quotients divide by the
//! denominator's value). The normalized residual of an identity written as
//! `lhs - rhs` is then `|v| / m`, i.e. its size relative to its own terms.

use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::Float;

#[derive(Debug, Clone)]
pub struct Val {
    pub v: Float,
    pub m: Float,
}

impl Val {
    /// Input quantity: magnitude is its absolute value.
    pub fn var(x: &Float) -> Val {
        Val { v: x.clone(), m: Float::with_val(x.prec(), x.abs_ref()) }
    }

    pub fn int(i: i64, bits: u32) -> Val {
        let v = Float::with_val(bits, i);
        let m = Float::with_val(bits, v.abs_ref());
        Val { v, m }
    }

    pub fn prec(&self) -> u32 {
        self.v.prec()
    }

    pub fn value(&self) -> &Float {
        &self.v
    }

    pub fn abs_value(&self) -> Float {
        Float::with_val(self.prec(), self.v.abs_ref())
    }

    pub fn square(&self) -> Val {
        self * self
    }

    /// `|v| / m`, or 0 when every contributing term is exactly zero.
    pub fn residual(&self) -> Float {
        if self.m.is_zero() {
            return Float::new(self.prec());
        }
        Float::with_val(self.prec(), self.v.abs_ref()) / &self.m
    }
}

fn add_ref(a: &Val, b: &Val) -> Val {
    let p = a.prec();
    Val { v: Float::with_val(p, &a.v + &b.v), m: Float::with_val(p, &a.m + &b.m) }
}

fn sub_ref(a: &Val, b: &Val) -> Val {
    let p = a.prec();
    Val { v: Float::with_val(p, &a.v - &b.v), m: Float::with_val(p, &a.m + &b.m) }
}

fn mul_ref(a: &Val, b: &Val) -> Val {
    let p = a.prec();
    Val { v: Float::with_val(p, &a.v * &b.v), m: Float::with_val(p, &a.m * &b.m) }
}

fn div_ref(a: &Val, b: &Val) -> Val {
    let p = a.prec();
    let den = Float::with_val(p, b.v.abs_ref());
    Val { v: Float::with_val(p, &a.v / &b.v), m: Float::with_val(p, &a.m / &den) }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $f:ident) => {
        impl $tr<&Val> for &Val {
            type Output = Val;
            fn $method(self, rhs: &Val) -> Val {
                $f(self, rhs)
            }
        }
        impl $tr<Val> for &Val {
            type Output = Val;
            fn $method(self, rhs: Val) -> Val {
                $f(self, &rhs)
            }
        }
        impl $tr<&Val> for Val {
            type Output = Val;
            fn $method(self, rhs: &Val) -> Val {
                $f(&self, rhs)
            }
        }
        impl $tr<Val> for Val {
            type Output = Val;
            fn $method(self, rhs: Val) -> Val {
                $f(&self, &rhs)
            }
        }
        impl $tr<i64> for &Val {
            type Output = Val;
            fn $method(self, rhs: i64) -> Val {
                $f(self, &Val::int(rhs, self.prec()))
            }
        }
        impl $tr<i64> for Val {
            type Output = Val;
            fn $method(self, rhs: i64) -> Val {
                $f(&self, &Val::int(rhs, self.prec()))
            }
        }
        impl $tr<&Val> for i64 {
            type Output = Val;
            fn $method(self, rhs: &Val) -> Val {
                $f(&Val::int(self, rhs.prec()), rhs)
            }
        }
        impl $tr<Val> for i64 {
            type Output = Val;
            fn $method(self, rhs: Val) -> Val {
                $f(&Val::int(self, rhs.prec()), &rhs)
            }
        }
    };
}

binop!(Add, add, add_ref);
binop!(Sub, sub, sub_ref);
binop!(Mul, mul, mul_ref);
binop!(Div, div, div_ref);

impl Neg for Val {
    type Output = Val;
    fn neg(self) -> Val {
        Val { v: -self.v, m: self.m }
    }
}

impl Neg for &Val {
    type Output = Val;
    fn neg(self) -> Val {
        Val { v: Float::with_val(self.prec(), -&self.v), m: self.m.clone() }
    }
}
