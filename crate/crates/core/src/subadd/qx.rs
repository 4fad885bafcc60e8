//! The approximation set `Q_x^h(C)` and the short/long increment classification.

use serde::Serialize;

use crate::error::Result;
use crate::lattice::LatticeBox;
use crate::scalar::Scalar;

use super::htable::HFunction;
use super::norm::{NormEstimate, SupportFunctional};

/// Multiplier turning the approximation constant into the classification constant.
pub const CLASSIFICATION_FACTOR: f64 = 48.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Membership {
    In,
    Out,
    /// `h(y)` is not available.
    Indeterminate,
}

impl Membership {
    /// Indeterminate counts as outside.
    pub fn is_member(self) -> bool {
        self == Membership::In
    }
}

/// `C·‖x‖₁^{1/2}·log‖x‖₁`.
pub fn gap_allowance<T: Scalar>(c: T, x_l1: u64) -> T {
    let m = T::lit(x_l1 as f64);
    if x_l1 == 0 {
        return T::zero();
    }
    c * m.sqrt() * m.ln()
}

/// `Q_x^h(C) = {y : ‖y‖₁ ≤ (2d+1)‖x‖₁, μ_x(y) ≤ μ̂(x), h(y) ≤ μ_x(y) + C‖x‖₁^{1/2} log‖x‖₁}`.
#[derive(Clone, Debug)]
pub struct QxSet<'a, T: Scalar> {
    norm: &'a NormEstimate<T>,
    x: Vec<i64>,
    functional: SupportFunctional<T>,
    constant: T,
    radius: u64,
    allowance: T,
}

impl<'a, T: Scalar> QxSet<'a, T> {
    pub fn new(norm: &'a NormEstimate<T>, x: &[i64], constant: T) -> Result<Self> {
        let functional = norm.support_functional_lattice(x)?;
        let x_l1 = LatticeBox::l1(x, &vec![0; x.len()]);
        Ok(QxSet {
            norm,
            x: x.to_vec(),
            functional,
            constant,
            radius: (2 * x.len() as u64 + 1) * x_l1,
            allowance: gap_allowance(constant, x_l1),
        })
    }

    pub fn x(&self) -> &[i64] {
        &self.x
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn functional(&self) -> &SupportFunctional<T> {
        &self.functional
    }

    /// `μ̂(x)`.
    pub fn norm_at_x(&self) -> T {
        self.functional.norm_at
    }

    pub fn membership(&self, h: &impl HFunction<T>, y: &[i64]) -> Membership {
        if LatticeBox::l1(y, &vec![0; y.len()]) > self.radius {
            return Membership::Out;
        }
        let slack = T::tolerance() * self.norm_at_x().max(T::one());
        let mx = self.functional.eval_lattice(y);
        if mx > self.norm_at_x() + slack {
            return Membership::Out;
        }
        match h.h(y) {
            None => Membership::Indeterminate,
            Some(hy) if hy <= mx + self.allowance + slack => Membership::In,
            Some(_) => Membership::Out,
        }
    }

    /// `y ∈ G_x`, i.e. `μ_x(y) > μ̂(x)`.
    pub fn beyond(&self, y: &[i64]) -> bool {
        self.functional.eval_lattice(y) > self.norm_at_x() + T::tolerance() * self.norm_at_x().max(T::one())
    }

    /// Long iff `y` or one of its lattice neighbours lies in `G_x`.
    pub fn is_long(&self, y: &[i64]) -> bool {
        if self.beyond(y) {
            return true;
        }
        let mut z = y.to_vec();
        for a in 0..y.len() {
            for step in [-1, 1] {
                z[a] += step;
                let hit = self.beyond(&z);
                z[a] -= step;
                if hit {
                    return true;
                }
            }
        }
        false
    }

    pub fn norm(&self) -> &NormEstimate<T> {
        self.norm
    }
}
