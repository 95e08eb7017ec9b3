use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision fraction in lowest terms with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        ExactRational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn from_integer(value: impl Into<BigInt>) -> Self {
        ExactRational(BigRational::from_integer(value.into()))
    }

    pub fn zero() -> Self {
        ExactRational(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactRational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn recip(&self) -> Self {
        ExactRational(self.0.recip())
    }

    pub fn as_big_rational(&self) -> &BigRational {
        &self.0
    }

    /// Nearest `f64`; only meant for the reporting boundary.
    pub fn to_f64(&self) -> f64 {
        if let Some(v) = self.0.to_f64() {
            return v;
        }
        // ratio of huge integers: scale through the bit lengths
        let n = self.numer().to_f64().unwrap_or(f64::NAN);
        let d = self.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    }

    /// Decimal rendering rounded (half up) to `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        let digits = digits.max(1);
        if self.is_zero() {
            return "0".to_string();
        }
        let negative = self.0.is_negative();
        let abs = self.0.abs();
        let (num, den) = (abs.numer().clone(), abs.denom().clone());
        // exponent e such that 10^e <= abs < 10^(e+1)
        let mut exp = num.to_string().len() as i64 - den.to_string().len() as i64;
        let ten = BigInt::from(10u32);
        let pow = |e: i64| -> BigInt { num_traits::pow(ten.clone(), e as usize) };
        let ge = |e: i64| -> bool {
            if e >= 0 {
                num >= &den * pow(e)
            } else {
                &num * pow(-e) >= den
            }
        };
        while !ge(exp) {
            exp -= 1;
        }
        while ge(exp + 1) {
            exp += 1;
        }
        // scaled = round(abs * 10^(digits - 1 - exp))
        let shift = digits as i64 - 1 - exp;
        let (sn, sd) = if shift >= 0 { (&num * pow(shift), den.clone()) } else { (num.clone(), &den * pow(-shift)) };
        let (q, r) = sn.div_rem(&sd);
        let mut scaled = q;
        if &r * 2u32 >= sd {
            scaled += 1u32;
        }
        let mut shift = shift;
        let mut text = scaled.to_string();
        if text.len() > digits {
            // rounding carried into a new digit (e.g. 9.99 -> 10.0)
            text.pop();
            shift -= 1;
        }
        let int_len = text.len() as i64 - shift;
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        if int_len <= 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-int_len) as usize));
            out.push_str(&text);
        } else if int_len as usize >= text.len() {
            out.push_str(&text);
            out.extend(std::iter::repeat_n('0', int_len as usize - text.len()));
        } else {
            out.push_str(&text[..int_len as usize]);
            out.push('.');
            out.push_str(&text[int_len as usize..]);
        }
        if out.contains('.') {
            let trimmed = out.trim_end_matches('0').trim_end_matches('.').len();
            out.truncate(trimmed);
        }
        out
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<u64> for ExactRational {
    fn from(v: u64) -> Self {
        ExactRational::from_integer(v)
    }
}

impl From<BigUint> for ExactRational {
    fn from(v: BigUint) -> Self {
        ExactRational::from_integer(BigInt::from(v))
    }
}

impl From<BigRational> for ExactRational {
    fn from(v: BigRational) -> Self {
        ExactRational(v)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: ExactRational) -> ExactRational {
                ExactRational($trait::$method(self.0, rhs.0))
            }
        }
        impl<'a> $trait<&'a ExactRational> for &'a ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &'a ExactRational) -> ExactRational {
                ExactRational($trait::$method(&self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for ExactRational {
    type Output = ExactRational;
    fn neg(self) -> ExactRational {
        ExactRational(-self.0)
    }
}

impl std::iter::Sum for ExactRational {
    fn sum<I: Iterator<Item = ExactRational>>(iter: I) -> Self {
        iter.fold(ExactRational::zero(), |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowest_terms_and_sign() {
        let r = ExactRational::new(6, -4);
        assert_eq!(r.to_string(), "-3/2");
        assert_eq!(r.denom(), &BigInt::from(2));
        assert_eq!(ExactRational::new(10, 5).to_string(), "2");
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(ExactRational::new(64, 3).to_decimal(20), "21.333333333333333333");
        assert_eq!(ExactRational::new(2, 3).to_decimal(5), "0.66667");
        assert_eq!(ExactRational::new(1, 800).to_decimal(3), "0.00125");
        assert_eq!(ExactRational::from(1023).to_decimal(20), "1023");
        assert_eq!(ExactRational::from(123456).to_decimal(3), "123000");
        assert_eq!(ExactRational::new(999, 100).to_decimal(2), "10");
        assert_eq!(ExactRational::new(-7, 2).to_decimal(4), "-3.5");
    }

    #[test]
    fn f64_of_huge_ratio() {
        let big = num_traits::pow(BigInt::from(2), 2000);
        let r = ExactRational::new(big.clone() * 3, big);
        assert_eq!(r.to_f64(), 3.0);
    }
}
