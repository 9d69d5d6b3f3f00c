//! Scalar abstractions shared by the numeric modules.
//!
//! [`Scalar`] is the minimal field-like bound needed by the metric
//! formulas, which lets them run on exact rationals as well as floats.
//! [`Real`] adds what feature construction and model fitting need.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

pub trait Real:
    Scalar
    + Float
    + ToPrimitive
    + Sum
    + Display
    + FromStr
    + Default
    + Serialize
    + DeserializeOwned
{
    /// Tag written into serialized models.
    const NAME: &'static str;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";
}

impl Real for f64 {
    const NAME: &'static str = "f64";
}
