use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::field::PiecewiseField;
use crate::error::{Error, Result};
use crate::mesh::{InterfaceGeometry, Side};
use crate::scalar::{lit, Point, Scalar};

/// Bounds of a sign-changing coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientBounds<T> {
    /// σ ≥ sigma_plus on Ω₊.
    pub sigma_plus: T,
    /// σ ≤ -sigma_minus on Ω₋.
    pub sigma_minus: T,
    pub inf_plus: T,
    pub sup_plus: T,
}

/// Diffusion coefficient σ, positive on Ω₊ and negative on Ω₋.
#[derive(Clone, Debug)]
pub struct Coefficient<T> {
    field: PiecewiseField<T>,
    pub bounds: CoefficientBounds<T>,
}

impl<T: Scalar> Coefficient<T> {
    pub fn new(field: PiecewiseField<T>, bounds: CoefficientBounds<T>) -> Self {
        Self { field, bounds }
    }

    /// Spatially constant coefficient without interface.
    pub fn constant(c: T) -> Self {
        let b = c.abs();
        Self {
            field: PiecewiseField::constant(c),
            bounds: CoefficientBounds { sigma_plus: b, sigma_minus: b, inf_plus: b, sup_plus: b },
        }
    }

    /// `σ = plus` on Ω₊ and `σ = -minus` on Ω₋.
    pub fn piecewise_constant(geom: InterfaceGeometry<T>, plus: T, minus: T) -> Self {
        let field = PiecewiseField::piecewise(geom, move |_, s| match s {
            Side::Plus => plus,
            Side::Minus => -minus,
        });
        Self {
            field,
            bounds: CoefficientBounds {
                sigma_plus: plus,
                sigma_minus: minus,
                inf_plus: plus,
                sup_plus: plus,
            },
        }
    }

    pub fn field(&self) -> &PiecewiseField<T> {
        &self.field
    }

    pub fn geometry(&self) -> Option<&InterfaceGeometry<T>> {
        self.field.geometry()
    }

    pub fn eval(&self, x: Point<T>) -> T {
        self.field.eval(x)
    }

    /// Contrast σ₋/σ₊.
    pub fn contrast(&self) -> T {
        self.bounds.sigma_minus / self.bounds.sigma_plus
    }

    /// Checks the stated bounds on `samples` random points per subdomain.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = &self.bounds;
        let slack = lit::<T>(1e-12);
        for _ in 0..samples {
            let x = [lit::<T>(rng.gen::<f64>()), lit::<T>(rng.gen::<f64>())];
            let Some(side) = self.geometry().map_or(Some(Side::Plus), |g| g.side(x)) else {
                continue;
            };
            let s = self.field.eval_side(x, side);
            let ok = match side {
                Side::Plus => s >= b.sigma_plus - slack && s >= b.inf_plus - slack && s <= b.sup_plus + slack,
                Side::Minus => s <= -b.sigma_minus + slack,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "coefficient value {s} at ({}, {}) violates the bounds for {side:?}",
                    x[0], x[1]
                )));
            }
        }
        Ok(())
    }

    /// Returns the coefficient with `σ₊ ≤ σ₋` and the sign (±1) applied to it; the
    /// right-hand side must be multiplied by the same sign.
    pub fn normalized(&self) -> (Self, T) {
        if self.bounds.sigma_plus <= self.bounds.sigma_minus {
            return (self.clone(), T::one());
        }
        let Some(geom) = self.geometry().cloned() else {
            return (self.clone(), T::one());
        };
        let inner = self.field.clone();
        let flipped_geom = geom.clone().with_flipped(!geom.flipped);
        let field = PiecewiseField::piecewise(flipped_geom, move |x, s| {
            let original = match s {
                Side::Plus => Side::Minus,
                Side::Minus => Side::Plus,
            };
            -inner.eval_side(x, original)
        });
        let b = self.bounds;
        let bounds = CoefficientBounds {
            sigma_plus: b.sigma_minus,
            sigma_minus: b.sigma_plus,
            inf_plus: b.sigma_minus,
            sup_plus: b.sigma_minus.max(b.sup_plus),
        };
        (Self { field, bounds }, -T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_bounds_hold() {
        let g = InterfaceGeometry::flat(0.5 - 2f64.powi(-7)).unwrap();
        let c = Coefficient::piecewise_constant(g, 1.0, 2.0);
        c.validate(10_000, 1).unwrap();
        assert_eq!(c.contrast(), 2.0);
        assert_eq!(c.eval([0.5, 0.9]), -2.0);
        assert_eq!(c.eval([0.5, 0.1]), 1.0);
    }

    #[test]
    fn wrong_bounds_rejected() {
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let mut c = Coefficient::piecewise_constant(g, 1.0, 2.0);
        c.bounds.sigma_minus = 3.0;
        assert!(c.validate(1000, 2).is_err());
    }

    #[test]
    fn normalization_swaps_sides() {
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let c = Coefficient::piecewise_constant(g, 3.0, 1.0);
        let (n, sign) = c.normalized();
        assert_eq!(sign, -1.0);
        assert!(n.bounds.sigma_plus <= n.bounds.sigma_minus);
        for x in [[0.2, 0.2], [0.7, 0.8]] {
            assert_eq!(n.eval(x), -c.eval(x));
        }
        n.validate(1000, 3).unwrap();
    }
}
