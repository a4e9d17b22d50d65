use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{InterfaceGeometry, InterfaceKind};
use crate::scalar::{lit, Point, Scalar};

/// Vertical stretch-reflection across a flat interface `x₂ = l` with Ω₋ above it.
///
/// `(S v)(x₁, x₂) = v(x₁, l + (l - x₂)(1 - l)/l)` for `x₂ < l`. The map fixes the
/// interface pointwise and sends the bottom edge onto the top edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetrizationMap<T> {
    height: T,
    /// `C_±(T) = 2‖S‖` in the H¹ seminorm.
    pub c_pm: T,
    /// The same constant in L².
    pub c0_pm: T,
}

impl<T: Scalar> SymmetrizationMap<T> {
    pub fn new(geom: &InterfaceGeometry<T>) -> Result<Self> {
        match geom.kind {
            InterfaceKind::Flat { height } if !geom.flipped => {
                let two = lit::<T>(2.0);
                let c = (T::one() - height) / height;
                Ok(Self {
                    height,
                    c_pm: two * c.sqrt().max(c.sqrt().recip()),
                    c0_pm: two / c.sqrt(),
                })
            }
            _ => Err(Error::InvalidArgument(
                "symmetrization needs a flat interface with the minus side above".into(),
            )),
        }
    }

    pub fn height(&self) -> T {
        self.height
    }

    /// Stretch factor `(1 - l)/l` of the map in the x₂ direction.
    pub fn stretch_factor(&self) -> T {
        (T::one() - self.height) / self.height
    }

    /// Point of Ω₋ whose value `S v` takes at the Ω₊ point `p`.
    pub fn forward(&self, p: Point<T>) -> Point<T> {
        let l = self.height;
        [p[0], l + (l - p[1]) * self.stretch_factor()]
    }

    /// Inverse of [`forward`](Self::forward): the Ω₊ point reading the value at `q ∈ Ω₋`.
    pub fn plus_preimage(&self, q: Point<T>) -> Point<T> {
        let l = self.height;
        [q[0], l - (q[1] - l) / self.stretch_factor()]
    }

    /// Contrast σ₋/σ₊ above which the continuous problem is T-coercive with this S.
    pub fn contrast_threshold(&self) -> T {
        let half = self.c_pm / lit(2.0);
        half * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_case_is_reflection() {
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let s = SymmetrizationMap::new(&g).unwrap();
        assert_eq!(s.c_pm, 2.0);
        assert_eq!(s.forward([0.3, 0.2]), [0.3, 0.8]);
    }

    #[test]
    fn flat_experiment_constants() {
        let l = 0.5 - 2f64.powi(-7);
        let s = SymmetrizationMap::new(&InterfaceGeometry::flat(l).unwrap()).unwrap();
        let expected = 2.0 * ((0.5 + 2f64.powi(-7)) / (0.5 - 2f64.powi(-7))).sqrt();
        assert!((s.c_pm - expected).abs() < 1e-14);
        assert!((s.c_pm - 2.0315).abs() < 1e-4);
        assert!((s.contrast_threshold() - 1.0317).abs() < 1e-4);
    }

    #[test]
    fn maps_fix_interface_and_swap_edges() {
        let l = 0.5 - 2f64.powi(-7);
        let s = SymmetrizationMap::new(&InterfaceGeometry::flat(l).unwrap()).unwrap();
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            assert!((s.forward([x, l])[1] - l).abs() < 1e-15);
            // trace preservation for v(x) = x₂
            assert!((s.forward([x, 0.0])[1] - 1.0).abs() < 1e-14);
        }
        let p = [0.2, 0.1];
        let q = s.plus_preimage(s.forward(p));
        assert!((q[1] - p[1]).abs() < 1e-14);
    }

    #[test]
    fn rejects_other_geometries() {
        let g = InterfaceGeometry::disk([0.5, 0.5], 0.2).unwrap();
        assert!(SymmetrizationMap::new(&g).is_err());
        let f = InterfaceGeometry::flat(0.5).unwrap().with_flipped(true);
        assert!(SymmetrizationMap::new(&f).is_err());
    }
}
