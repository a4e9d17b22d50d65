use serde::Serialize;

use super::geometry::{bbox, clip_convex, clip_halfplane, polygon_area, InterfaceGeometry, Side};
use super::Triangulation;
use crate::error::{Error, Result};
use crate::scalar::{Point, Scalar};
use crate::tcoercivity::SymmetrizationMap;

/// Sorted list of element indices.
pub type ElementSet = Vec<usize>;

/// Interior vertices split by the side of the interface they lie on.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VertexClasses {
    pub interior: Vec<usize>,
    pub minus: Vec<usize>,
    pub plus: Vec<usize>,
    pub interface: Vec<usize>,
}

impl VertexClasses {
    /// Vertices in V⁰ ∪ V⁺, sorted.
    pub fn plus_or_interface(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.plus.iter().chain(&self.interface).copied().collect();
        v.sort_unstable();
        v
    }
}

pub fn classify_vertices<T: Scalar>(
    mesh: &Triangulation<T>,
    geom: &InterfaceGeometry<T>,
) -> VertexClasses {
    let mut classes = VertexClasses::default();
    for v in mesh.interior_vertices() {
        classes.interior.push(v);
        match geom.side(mesh.vertex(v)) {
            Some(Side::Minus) => classes.minus.push(v),
            Some(Side::Plus) => classes.plus.push(v),
            None => classes.interface.push(v),
        }
    }
    classes
}

/// The m-layer patch N^m(seed); layers grow through shared vertices.
pub fn element_patch<T: Scalar>(
    mesh: &Triangulation<T>,
    seed: &[usize],
    m: usize,
) -> Result<ElementSet> {
    if seed.is_empty() {
        return Err(Error::InvalidArgument("patch seed is empty".into()));
    }
    let mut inside = vec![false; mesh.num_elements()];
    let mut frontier: Vec<usize> = Vec::new();
    for &e in seed {
        if e >= mesh.num_elements() {
            return Err(Error::InvalidArgument(format!("element {e} out of range")));
        }
        if !inside[e] {
            inside[e] = true;
            frontier.push(e);
        }
    }
    let mut seen_vertex = vec![false; mesh.num_vertices()];
    for _ in 0..m {
        let mut next = Vec::new();
        for &e in &frontier {
            for v in mesh.element(e) {
                if std::mem::replace(&mut seen_vertex[v], true) {
                    continue;
                }
                for &k in mesh.vertex_elements(v) {
                    if !inside[k] {
                        inside[k] = true;
                        next.push(k);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok((0..mesh.num_elements()).filter(|&e| inside[e]).collect())
}

/// Result of [`symmetric_patch`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymmetricPatch {
    pub elements: ElementSet,
    /// The standard patch meets the interface.
    pub touches_interface: bool,
    /// No symmetrization was available and N^{m+1}(K) was returned instead.
    pub fallback: bool,
}

/// The symmetric patch P^m(K): the standard patch enlarged on Ω₊ by the elements
/// meeting the preimage of its Ω₋ part under the symmetrization.
pub fn symmetric_patch<T: Scalar>(
    mesh: &Triangulation<T>,
    k: usize,
    m: usize,
    geom: &InterfaceGeometry<T>,
    sym: Option<&SymmetrizationMap<T>>,
) -> Result<SymmetricPatch> {
    if let Some(s) = sym {
        let consistent = !geom.flipped
            && geom
                .flat_height()
                .is_some_and(|l| (l - s.height()).abs() <= T::geometric_tol());
        if !consistent {
            return Err(Error::InvalidArgument(
                "symmetrization does not match the interface geometry".into(),
            ));
        }
    }
    let standard = element_patch(mesh, &[k], m)?;
    let touches = standard
        .iter()
        .any(|&e| geom.meets_triangle(&mesh.element_points(e)));
    if !touches {
        return Ok(SymmetricPatch { elements: standard, touches_interface: false, fallback: false });
    }
    let Some(sym) = sym else {
        return Ok(SymmetricPatch {
            elements: element_patch(mesh, &[k], m + 1)?,
            touches_interface: true,
            fallback: true,
        });
    };
    let l = sym.height();
    let mut inside = vec![false; mesh.num_elements()];
    for &e in &standard {
        inside[e] = true;
    }
    for &e in &standard {
        let tri = mesh.element_points(e);
        let upper = clip_halfplane(&tri, [T::zero(), -T::one()], -l);
        if upper.len() < 3 || polygon_area(&upper) <= T::geometric_tol() * mesh.area(e) {
            continue;
        }
        let image: Vec<Point<T>> = upper.iter().map(|&p| sym.plus_preimage(p)).collect();
        mark_overlapping(mesh, &image, &mut inside);
    }
    Ok(SymmetricPatch {
        elements: (0..mesh.num_elements()).filter(|&e| inside[e]).collect(),
        touches_interface: true,
        fallback: false,
    })
}

fn mark_overlapping<T: Scalar>(mesh: &Triangulation<T>, poly: &[Point<T>], inside: &mut [bool]) {
    let (lo, hi) = bbox(poly);
    let area = polygon_area(poly).abs();
    let ccw: Vec<Point<T>> = if polygon_area(poly) < T::zero() {
        poly.iter().rev().copied().collect()
    } else {
        poly.to_vec()
    };
    for e in mesh.elements_in_box(lo, hi) {
        if inside[e] {
            continue;
        }
        let cut = clip_convex(&mesh.element_points(e), &ccw);
        if cut.len() >= 3 && polygon_area(&cut) > T::geometric_tol() * (area + mesh.area(e)) {
            inside[e] = true;
        }
    }
}

/// Overlap statistics for the m-layer patches of a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PatchStats {
    pub m: usize,
    /// Largest single patch N^m(K).
    pub element_count: usize,
    /// C_ol,m: largest number of patches N^m(K') containing one element.
    pub overlap_bound: usize,
}

pub fn overlap_stats<T: Scalar>(mesh: &Triangulation<T>, m: usize) -> Result<PatchStats> {
    let mut count = vec![0usize; mesh.num_elements()];
    let mut largest = 0;
    for k in 0..mesh.num_elements() {
        let patch = element_patch(mesh, &[k], m)?;
        largest = largest.max(patch.len());
        for e in patch {
            count[e] += 1;
        }
    }
    let overlap = count.into_iter().max().unwrap_or(0);
    Ok(PatchStats { m, element_count: largest, overlap_bound: overlap.max(largest) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_block_mesh;

    fn mesh3() -> Triangulation<f64> {
        build_block_mesh(3).unwrap()
    }

    #[test]
    fn zero_layers_is_seed() {
        let m = mesh3();
        let k = m.locate([0.4, 0.4]);
        assert_eq!(element_patch(&m, &[k], 0).unwrap(), vec![k]);
        assert!(element_patch(&m, &[], 1).is_err());
    }

    #[test]
    fn patches_are_monotone() {
        let m = mesh3();
        for k in [0, 37, 100, 255] {
            for layers in 0..4 {
                let a = element_patch(&m, &[k], layers).unwrap();
                let b = element_patch(&m, &[k], layers + 1).unwrap();
                assert!(a.iter().all(|e| b.binary_search(e).is_ok()));
            }
        }
    }

    #[test]
    fn one_layer_is_vertex_contact() {
        let m = mesh3();
        let k = m.locate([0.41, 0.3]);
        let patch = element_patch(&m, &[k], 1).unwrap();
        let vs = m.element(k);
        for e in 0..m.num_elements() {
            let touches = m.element(e).iter().any(|v| vs.contains(v));
            assert_eq!(touches, patch.binary_search(&e).is_ok());
        }
    }

    #[test]
    fn overlap_grows_polynomially() {
        let m: Triangulation<f64> = build_block_mesh(4).unwrap();
        let stats: Vec<PatchStats> = (1..=6).map(|l| overlap_stats(&m, l).unwrap()).collect();
        for s in &stats {
            assert!(s.overlap_bound >= s.element_count);
        }
        // second differences of a degree-2 sequence are constant; allow saturation by the domain
        let c: Vec<f64> = stats.iter().map(|s| s.overlap_bound as f64).collect();
        for (i, s) in stats.iter().enumerate() {
            let m_f = (i + 1) as f64;
            assert!(c[i] <= 64.0 * (m_f + 1.0).powi(2), "m={} bound={}", s.m, c[i]);
        }
    }

    #[test]
    fn classification_flat_unresolved() {
        let m = mesh3();
        let g = InterfaceGeometry::flat(0.5 - 2f64.powi(-7)).unwrap();
        let c = classify_vertices(&m, &g);
        assert!(c.interface.is_empty());
        assert_eq!(c.minus.len() + c.plus.len(), c.interior.len());
    }

    #[test]
    fn classification_flat_gridline() {
        let m: Triangulation<f64> = build_block_mesh(1).unwrap();
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let c = classify_vertices(&m, &g);
        // interior vertices on x2 = 0.5: the grid point (0.5, 0.5) only
        assert_eq!(c.interface.len(), 1);
        assert_eq!(m.vertex(c.interface[0]), [0.5, 0.5]);
        assert_eq!(c.minus.len(), 2);
        assert_eq!(c.plus.len(), 2);
    }

    #[test]
    fn classification_rectangle() {
        let m: Triangulation<f64> = build_block_mesh(2).unwrap();
        let g = InterfaceGeometry::rectangle([0.25, 0.25], [0.75, 0.75]).unwrap();
        let c = classify_vertices(&m, &g);
        // 3x3 interior grid points inside [0.25,0.75]^2 minus the 8 on its boundary, plus 4 centers
        assert_eq!(c.interface.len(), 8);
        assert_eq!(c.minus.len(), 1 + 4);
        assert_eq!(c.interior.len(), 9 + 16);
        for &v in &c.interface {
            assert!(g.on_interface(m.vertex(v)));
        }
    }

    #[test]
    fn refinement_preserves_classes() {
        let g = InterfaceGeometry::flat(0.5 - 2f64.powi(-7)).unwrap();
        let coarse: Triangulation<f64> = build_block_mesh(2).unwrap();
        let fine: Triangulation<f64> = build_block_mesh(4).unwrap();
        let cc = classify_vertices(&coarse, &g);
        let fc = classify_vertices(&fine, &g);
        for v in cc.plus {
            let fv = fine.vertex_at(coarse.vertex(v)).unwrap();
            assert!(fc.plus.contains(&fv));
        }
    }

    #[test]
    fn far_from_interface_is_standard() {
        let m = mesh3();
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let sym = SymmetrizationMap::new(&g).unwrap();
        let k = m.locate([0.1, 0.05]);
        let p = symmetric_patch(&m, k, 1, &g, Some(&sym)).unwrap();
        assert!(!p.touches_interface && !p.fallback);
        assert_eq!(p.elements, element_patch(&m, &[k], 1).unwrap());
    }

    #[test]
    fn mirror_image_included() {
        let m = mesh3();
        let g = InterfaceGeometry::flat(0.5).unwrap();
        let sym = SymmetrizationMap::new(&g).unwrap();
        let k = m.locate([0.3, 0.53]);
        let std = element_patch(&m, &[k], 1).unwrap();
        let p = symmetric_patch(&m, k, 1, &g, Some(&sym)).unwrap();
        for &e in &std {
            let c = m.centroid(e);
            if c[1] > 0.5 {
                let img = m.locate([c[0], 1.0 - c[1]]);
                assert!(p.elements.binary_search(&img).is_ok());
            }
        }
        // no new elements above the interface
        for &e in &p.elements {
            if m.centroid(e)[1] > 0.5 {
                assert!(std.binary_search(&e).is_ok());
            }
        }
        assert!(p.elements.len() > std.len());
    }

    #[test]
    fn fallback_for_other_geometries() {
        let m = mesh3();
        let g = InterfaceGeometry::rectangle([0.25, 0.25], [0.75, 0.75]).unwrap();
        let k = m.locate([0.26, 0.3]);
        let p = symmetric_patch(&m, k, 1, &g, None).unwrap();
        assert!(p.fallback);
        assert_eq!(p.elements, element_patch(&m, &[k], 2).unwrap());
        let flat = InterfaceGeometry::flat(0.5).unwrap();
        let sym = SymmetrizationMap::new(&flat).unwrap();
        assert!(symmetric_patch(&m, k, 1, &g, Some(&sym)).is_err());
    }

    #[test]
    fn symmetric_patch_monotone() {
        let m = mesh3();
        let g = InterfaceGeometry::flat(0.5 - 2f64.powi(-7)).unwrap();
        let sym = SymmetrizationMap::new(&g).unwrap();
        for k in [m.locate([0.3, 0.52]), m.locate([0.7, 0.45])] {
            for layers in 1..4 {
                let a = symmetric_patch(&m, k, layers, &g, Some(&sym)).unwrap().elements;
                let b = symmetric_patch(&m, k, layers + 1, &g, Some(&sym)).unwrap().elements;
                assert!(a.iter().all(|e| b.binary_search(e).is_ok()));
            }
        }
    }
}
