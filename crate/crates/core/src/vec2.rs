//! Exact planar vectors and the trigonometry-free angular order.

use num::bigint::BigInt;
use num::integer::Integer;
use num::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::rational::{fmt_q, parse_q, q, qi, to_f64, Q};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatVec2 {
    pub x1: Q,
    pub x2: Q,
}

impl RatVec2 {
    pub fn new(x1: Q, x2: Q) -> Self {
        RatVec2 { x1, x2 }
    }

    pub fn ints(a: i64, b: i64) -> Self {
        RatVec2::new(qi(a), qi(b))
    }

    pub fn rats(an: i64, ad: i64, bn: i64, bd: i64) -> Self {
        RatVec2::new(q(an, ad), q(bn, bd))
    }

    pub fn zero() -> Self {
        RatVec2::ints(0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.x1.is_zero() && self.x2.is_zero()
    }

    pub fn cross(&self, o: &RatVec2) -> Q {
        &self.x1 * &o.x2 - &self.x2 * &o.x1
    }

    pub fn dot(&self, o: &RatVec2) -> Q {
        &self.x1 * &o.x1 + &self.x2 * &o.x2
    }

    pub fn scale(&self, s: &Q) -> RatVec2 {
        RatVec2::new(&self.x1 * s, &self.x2 * s)
    }

    /// Rotation by +90 degrees.
    pub fn rot_ccw(&self) -> RatVec2 {
        RatVec2::new(-self.x2.clone(), self.x1.clone())
    }

    /// Rotation by -90 degrees; for an edge direction this is its clockwise normal.
    pub fn rot_cw(&self) -> RatVec2 {
        RatVec2::new(self.x2.clone(), -self.x1.clone())
    }

    /// Coprime integer vector with the same direction. Zero maps to zero.
    pub fn primitive(&self) -> RatVec2 {
        if self.is_zero() {
            return RatVec2::zero();
        }
        let l = self.x1.denom().lcm(self.x2.denom());
        let a: BigInt = (&self.x1 * Q::from_integer(l.clone())).to_integer();
        let b: BigInt = (&self.x2 * Q::from_integer(l)).to_integer();
        let g = a.gcd(&b);
        RatVec2::new(Q::from_integer(a / &g), Q::from_integer(b / &g))
    }

    pub fn is_primitive(&self) -> bool {
        !self.is_zero() && *self == self.primitive()
    }

    /// 0 for angles in [0, pi), 1 for [pi, 2pi). Zero vectors report 0.
    pub fn half(&self) -> u8 {
        if self.x2.is_positive() || (self.x2.is_zero() && !self.x1.is_negative()) {
            0
        } else {
            1
        }
    }

    /// Total order by polar angle in [0, 2pi); parallel vectors compare equal.
    pub fn angle_cmp(&self, o: &RatVec2) -> Ordering {
        self.half().cmp(&o.half()).then_with(|| {
            let c = self.cross(o);
            if c.is_positive() {
                Ordering::Less
            } else if c.is_negative() {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        })
    }

    /// Same ray: parallel with positive orientation.
    pub fn same_dir(&self, o: &RatVec2) -> bool {
        self.cross(o).is_zero() && self.dot(o).is_positive()
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [to_f64(&self.x1), to_f64(&self.x2)]
    }

    pub fn unit_f64(&self) -> [f64; 2] {
        let [a, b] = self.to_f64();
        let n = a.hypot(b);
        [a / n, b / n]
    }

    pub fn is_positive(&self) -> bool {
        self.x1.is_positive() && self.x2.is_positive()
    }

    pub fn one() -> Self {
        RatVec2::new(Q::one(), Q::one())
    }
}

impl fmt::Debug for RatVec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", fmt_q(&self.x1), fmt_q(&self.x2))
    }
}

impl fmt::Display for RatVec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Add for &RatVec2 {
    type Output = RatVec2;
    fn add(self, o: &RatVec2) -> RatVec2 {
        RatVec2::new(&self.x1 + &o.x1, &self.x2 + &o.x2)
    }
}

impl Sub for &RatVec2 {
    type Output = RatVec2;
    fn sub(self, o: &RatVec2) -> RatVec2 {
        RatVec2::new(&self.x1 - &o.x1, &self.x2 - &o.x2)
    }
}

impl Neg for &RatVec2 {
    type Output = RatVec2;
    fn neg(self) -> RatVec2 {
        RatVec2::new(-self.x1.clone(), -self.x2.clone())
    }
}

impl Mul<&RatVec2> for &Q {
    type Output = RatVec2;
    fn mul(self, v: &RatVec2) -> RatVec2 {
        v.scale(self)
    }
}

impl Serialize for RatVec2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [fmt_q(&self.x1), fmt_q(&self.x2)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for RatVec2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct W(
            #[serde(with = "crate::rational::serde_q")] Q,
            #[serde(with = "crate::rational::serde_q")] Q,
        );
        let W(a, b) = W::deserialize(d)?;
        Ok(RatVec2::new(a, b))
    }
}

/// Parses a pair of rational strings.
pub fn parse_vec(a: &str, b: &str) -> crate::error::Result<RatVec2> {
    Ok(RatVec2::new(parse_q(a)?, parse_q(b)?))
}
