//! Arithmetic in GF(2^8) with the reducing polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
//!
//! Multiplication and inversion go through 256-entry log/antilog tables built at
//! compile time. Addition is XOR.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Sub, SubAssign};

use crate::error::GfError;

/// Reducing polynomial, including the x^8 term.
pub const POLY: u16 = 0x11D;

const fn build_tables() -> ([u8; 512], [u8; 256]) {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    // doubled so exp[log a + log b] never needs a modulo
    let mut j = 255;
    while j < 512 {
        exp[j] = exp[j - 255];
        j += 1;
    }
    (exp, log)
}

const TABLES: ([u8; 512], [u8; 256]) = build_tables();
static EXP: [u8; 512] = TABLES.0;
static LOG: [u8; 256] = TABLES.1;

/// An element of GF(2^8).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse. Zero has none.
    #[inline]
    pub fn inv(self) -> Result<Gf256, GfError> {
        if self.0 == 0 {
            return Err(GfError::NoInverse);
        }
        Ok(Gf256(EXP[255 - LOG[self.0 as usize] as usize]))
    }

    /// `self^n` by repeated table lookups.
    pub fn pow(self, n: u32) -> Gf256 {
        if n == 0 {
            return Gf256::ONE;
        }
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        let e = (LOG[self.0 as usize] as u64 * n as u64) % 255;
        Gf256(EXP[e as usize])
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf256({:#04x})", self.0)
    }
}

impl From<u8> for Gf256 {
    fn from(v: u8) -> Self {
        Gf256(v)
    }
}

impl From<Gf256> for u8 {
    fn from(v: Gf256) -> Self {
        v.0
    }
}

/// Table-driven product.
#[inline]
pub fn gf_mul(a: Gf256, b: Gf256) -> Gf256 {
    if a.0 == 0 || b.0 == 0 {
        return Gf256::ZERO;
    }
    Gf256(EXP[LOG[a.0 as usize] as usize + LOG[b.0 as usize] as usize])
}

#[inline]
pub fn gf_inv(a: Gf256) -> Result<Gf256, GfError> {
    a.inv()
}

#[allow(clippy::suspicious_arithmetic_impl, clippy::suspicious_op_assign_impl)]
impl Add for Gf256 {
    type Output = Gf256;
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

#[allow(clippy::suspicious_arithmetic_impl, clippy::suspicious_op_assign_impl)]
impl AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

#[allow(clippy::suspicious_arithmetic_impl, clippy::suspicious_op_assign_impl)]
impl Sub for Gf256 {
    type Output = Gf256;
    #[inline]
    fn sub(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

#[allow(clippy::suspicious_arithmetic_impl, clippy::suspicious_op_assign_impl)]
impl SubAssign for Gf256 {
    #[inline]
    fn sub_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        gf_mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = gf_mul(*self, rhs);
    }
}

impl Div for Gf256 {
    type Output = Result<Gf256, GfError>;
    #[inline]
    fn div(self, rhs: Gf256) -> Self::Output {
        Ok(gf_mul(self, rhs.inv()?))
    }
}

/// `dst[i] += coef * src[i]` over raw byte slices.
pub fn axpy(dst: &mut [u8], coef: Gf256, src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    match coef.0 {
        0 => {}
        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
        c => {
            let lc = LOG[c as usize] as usize;
            for (d, &s) in dst.iter_mut().zip(src) {
                if s != 0 {
                    *d ^= EXP[lc + LOG[s as usize] as usize];
                }
            }
        }
    }
}

/// `buf[i] *= coef` over a raw byte slice.
pub fn scale(buf: &mut [u8], coef: Gf256) {
    match coef.0 {
        1 => {}
        0 => buf.fill(0),
        c => {
            let lc = LOG[c as usize] as usize;
            for b in buf.iter_mut() {
                if *b != 0 {
                    *b = EXP[lc + LOG[*b as usize] as usize];
                }
            }
        }
    }
}
