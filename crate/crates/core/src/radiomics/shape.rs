use nalgebra::{Matrix3, SymmetricEigen};

use super::Feature;
use crate::error::{Error, Result};
use crate::volume::Mask;

pub const SHAPE_NAMES: [&str; 14] = [
    "volume_mm3",
    "surface_mm2",
    "surface_volume_ratio",
    "sphericity",
    "spherical_disproportion",
    "max_3d_diameter_mm",
    "max_2d_diameter_slice_mm",
    "max_2d_diameter_column_mm",
    "max_2d_diameter_row_mm",
    "major_axis_length",
    "minor_axis_length",
    "least_axis_length",
    "elongation",
    "flatness",
];

/// Maximum Euclidean distance between any two points.
///
/// Points are bucketed into a coarse grid; cell pairs are visited in
/// decreasing order of their bounding-box distance bound and the search stops
/// once no remaining pair can beat the best distance found.
pub fn max_pairwise_distance(points: &[[f64; 3]]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let brute = |a: &[usize], b: &[usize], best: &mut f64| {
        for &i in a {
            for &j in b {
                let d = dist2(&points[i], &points[j]);
                if d > *best {
                    *best = d;
                }
            }
        }
    };
    if n <= 256 {
        let idx: Vec<usize> = (0..n).collect();
        let mut best = 0.0;
        brute(&idx, &idx, &mut best);
        return best.sqrt();
    }

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let per_axis = ((n as f64 / 8.0).cbrt().ceil() as usize).clamp(1, 64);
    let cell_of = |p: &[f64; 3]| -> usize {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let span = hi[a] - lo[a];
            c[a] = if span > 0.0 {
                (((p[a] - lo[a]) / span * per_axis as f64) as usize).min(per_axis - 1)
            } else {
                0
            };
        }
        c[0] + per_axis * (c[1] + per_axis * c[2])
    };
    let mut buckets: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(cell_of(p)).or_default().push(i);
    }
    let cells: Vec<(Vec<usize>, [f64; 3], [f64; 3])> = buckets
        .into_values()
        .map(|members| {
            let mut clo = [f64::INFINITY; 3];
            let mut chi = [f64::NEG_INFINITY; 3];
            for &i in &members {
                for a in 0..3 {
                    clo[a] = clo[a].min(points[i][a]);
                    chi[a] = chi[a].max(points[i][a]);
                }
            }
            (members, clo, chi)
        })
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(cells.len() * (cells.len() + 1) / 2);
    for i in 0..cells.len() {
        for j in i..cells.len() {
            let mut ub = 0.0;
            for a in 0..3 {
                let span = (cells[j].2[a] - cells[i].1[a]).max(cells[i].2[a] - cells[j].1[a]);
                ub += span * span;
            }
            pairs.push((ub, i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    for (ub, i, j) in pairs {
        if ub < best {
            break;
        }
        brute(&cells[i].0, &cells[j].0, &mut best);
    }
    best.sqrt()
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Voxels that are the first or last foreground voxel along every axis-aligned
/// line through them, restricted to `axes`. Convex-hull vertices of the
/// voxel-centre set are always among them.
fn extreme_candidates(m: &Mask, axes: &[usize]) -> Vec<usize> {
    let g = m.geometry();
    let [nx, ny, nz] = g.dims;
    let vox = m.voxels();
    // For each axis, min/max coordinate along each line (indexed by the other two coords).
    let mut ext: Vec<Vec<(usize, usize)>> = Vec::new();
    for &axis in axes {
        let (la, lb) = match axis {
            0 => (ny, nz),
            1 => (nx, nz),
            _ => (nx, ny),
        };
        let mut e = vec![(usize::MAX, 0usize); la * lb];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if !vox[g.index(x, y, z)] {
                        continue;
                    }
                    let (key, pos) = match axis {
                        0 => (y + ny * z, x),
                        1 => (x + nx * z, y),
                        _ => (x + nx * y, z),
                    };
                    let slot = &mut e[key];
                    slot.0 = slot.0.min(pos);
                    slot.1 = slot.1.max(pos);
                }
            }
        }
        ext.push(e);
    }
    let mut out = Vec::new();
    for (idx, _) in vox.iter().enumerate().filter(|(_, &b)| b) {
        let [x, y, z] = g.coords(idx);
        let keep = axes.iter().zip(&ext).all(|(&axis, e)| {
            let (key, pos) = match axis {
                0 => (y + ny * z, x),
                1 => (x + nx * z, y),
                _ => (x + nx * y, z),
            };
            pos == e[key].0 || pos == e[key].1
        });
        if keep {
            out.push(idx);
        }
    }
    out
}

/// Largest in-plane diameter over all planes perpendicular to `normal_axis`.
fn max_2d_diameter(m: &Mask, normal_axis: usize) -> f64 {
    let g = m.geometry();
    let in_plane: Vec<usize> = (0..3).filter(|&a| a != normal_axis).collect();
    let mut by_plane: std::collections::BTreeMap<usize, Vec<[f64; 3]>> = Default::default();
    for idx in extreme_candidates(m, &in_plane) {
        let c = g.coords(idx);
        by_plane.entry(c[normal_axis]).or_default().push(physical(c, &g.spacing_mm));
    }
    by_plane
        .values()
        .map(|pts| max_pairwise_distance(pts))
        .fold(0.0, f64::max)
}

fn physical(c: [usize; 3], spacing: &[f64; 3]) -> [f64; 3] {
    [
        c[0] as f64 * spacing[0],
        c[1] as f64 * spacing[1],
        c[2] as f64 * spacing[2],
    ]
}

/// Voxel-based 3D shape descriptors.
///
/// Volume counts voxels; surface sums the areas of voxel faces that separate
/// foreground from background or the grid boundary. Diameters are measured
/// between voxel centres. Axis lengths are `4 sqrt(λ)` of the coordinate
/// covariance eigenvalues; elongation and flatness are 0 when the major
/// eigenvalue vanishes (a single voxel).
pub fn shape_features(m: &Mask) -> Result<Vec<Feature>> {
    let g = m.geometry();
    let [nx, ny, nz] = g.dims;
    let [sx, sy, sz] = g.spacing_mm;
    let count = m.count();
    if count == 0 {
        return Err(Error::EmptyRegion("shape features of an empty mask".into()));
    }
    let volume = count as f64 * g.voxel_volume_mm3();
    let face = [sy * sz, sx * sz, sx * sy];

    let vox = m.voxels();
    let mut exposed = [0usize; 3];
    let mut sum = [0.0f64; 3];
    let mut coords = Vec::with_capacity(count);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !vox[g.index(x, y, z)] {
                    continue;
                }
                let p = physical([x, y, z], &g.spacing_mm);
                for a in 0..3 {
                    sum[a] += p[a];
                }
                coords.push(p);
                exposed[0] += (x == 0 || !vox[g.index(x - 1, y, z)]) as usize;
                exposed[0] += (x + 1 == nx || !vox[g.index(x + 1, y, z)]) as usize;
                exposed[1] += (y == 0 || !vox[g.index(x, y - 1, z)]) as usize;
                exposed[1] += (y + 1 == ny || !vox[g.index(x, y + 1, z)]) as usize;
                exposed[2] += (z == 0 || !vox[g.index(x, y, z - 1)]) as usize;
                exposed[2] += (z + 1 == nz || !vox[g.index(x, y, z + 1)]) as usize;
            }
        }
    }
    let surface: f64 = (0..3).map(|a| exposed[a] as f64 * face[a]).sum();

    let n = count as f64;
    let centroid = [sum[0] / n, sum[1] / n, sum[2] / n];
    let mut cov = Matrix3::<f64>::zeros();
    for p in &coords {
        let d = [p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    cov /= n;
    let mut eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let (major, minor, least) = (eig[0], eig[1], eig[2]);
    let (elongation, flatness) = if major > 0.0 {
        ((minor / major).sqrt(), (least / major).sqrt())
    } else {
        (0.0, 0.0)
    };

    let hull_pts: Vec<[f64; 3]> = extreme_candidates(m, &[0, 1, 2])
        .into_iter()
        .map(|i| physical(g.coords(i), &g.spacing_mm))
        .collect();
    let sphericity = (36.0 * std::f64::consts::PI * volume * volume).cbrt() / surface;

    Ok(vec![
        ("volume_mm3", volume),
        ("surface_mm2", surface),
        ("surface_volume_ratio", surface / volume),
        ("sphericity", sphericity),
        ("spherical_disproportion", 1.0 / sphericity),
        ("max_3d_diameter_mm", max_pairwise_distance(&hull_pts)),
        ("max_2d_diameter_slice_mm", max_2d_diameter(m, 2)),
        ("max_2d_diameter_column_mm", max_2d_diameter(m, 1)),
        ("max_2d_diameter_row_mm", max_2d_diameter(m, 0)),
        ("major_axis_length", 4.0 * major.sqrt()),
        ("minor_axis_length", 4.0 * minor.sqrt()),
        ("least_axis_length", 4.0 * least.sqrt()),
        ("elongation", elongation),
        ("flatness", flatness),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Geometry, MaskRole};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn feats(m: &Mask) -> std::collections::HashMap<&'static str, f64> {
        shape_features(m).unwrap().into_iter().collect()
    }

    fn brute_max(points: &[[f64; 3]]) -> f64 {
        let mut best = 0.0f64;
        for a in points {
            for b in points {
                best = best.max(dist2(a, b));
            }
        }
        best.sqrt()
    }

    #[test]
    fn names_match_output_order() {
        let m = Mask::from_fn(Geometry::unit([2, 2, 2]).unwrap(), MaskRole::Disease, |_, _, _| true);
        let names: Vec<&str> = shape_features(&m).unwrap().iter().map(|f| f.0).collect();
        assert_eq!(names, SHAPE_NAMES);
    }

    #[test]
    fn solid_block_volume_and_surface() {
        let m = Mask::from_fn(Geometry::unit([5, 5, 5]).unwrap(), MaskRole::Disease, |x, y, z| {
            (1..4).contains(&x) && (1..4).contains(&y) && (1..4).contains(&z)
        });
        let f = feats(&m);
        assert_eq!(f["volume_mm3"], 27.0);
        assert_eq!(f["surface_mm2"], 54.0);
        assert!((f["max_3d_diameter_mm"] - 12f64.sqrt()).abs() < 1e-12);
        assert!((f["max_2d_diameter_slice_mm"] - 8f64.sqrt()).abs() < 1e-12);
        assert!((f["elongation"] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_voxel() {
        let mut m = Mask::empty(Geometry::unit([3, 3, 3]).unwrap(), MaskRole::Disease);
        m.set(1, 1, 1, true);
        let f = feats(&m);
        assert_eq!(f["surface_mm2"], 6.0);
        assert_eq!(f["volume_mm3"], 1.0);
        assert_eq!(f["max_3d_diameter_mm"], 0.0);
        assert_eq!(f["elongation"], 0.0);
        assert!(f.values().all(|v| v.is_finite()));
    }

    #[test]
    fn slice_diameter_example() {
        let mut m = Mask::empty(Geometry::unit([6, 6, 2]).unwrap(), MaskRole::Disease);
        m.set(0, 0, 0, true);
        m.set(3, 4, 0, true);
        assert!((feats(&m)["max_2d_diameter_slice_mm"] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn anisotropic_surface_and_volume() {
        let g = Geometry::new([4, 4, 4], [0.5, 1.0, 2.0], [0.0; 3]).unwrap();
        let m = Mask::from_fn(g, MaskRole::Disease, |x, y, z| x < 2 && y < 3 && z < 1);
        let f = feats(&m);
        assert_eq!(f["volume_mm3"], 6.0 * 1.0);
        // Block extents in mm: 1 x 3 x 2.
        assert_eq!(f["surface_mm2"], 2.0 * (1.0 * 3.0 + 3.0 * 2.0 + 2.0 * 1.0));
    }

    #[test]
    fn empty_mask_errors() {
        let m = Mask::empty(Geometry::unit([2, 2, 2]).unwrap(), MaskRole::Disease);
        assert!(matches!(shape_features(&m), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn pruned_diameter_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(300..900);
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(0..40) as f64 * 0.7,
                        rng.random_range(0..30) as f64,
                        rng.random_range(0..20) as f64 * 2.5,
                    ]
                })
                .collect();
            assert_eq!(max_pairwise_distance(&pts), brute_max(&pts));
        }
    }

    proptest! {
        #[test]
        fn block_surface_formula(a in 1usize..5, b in 1usize..5, c in 1usize..5) {
            let g = Geometry::unit([a + 2, b + 2, c + 2]).unwrap();
            let m = Mask::from_fn(g, MaskRole::Disease, |x, y, z| {
                (1..=a).contains(&x) && (1..=b).contains(&y) && (1..=c).contains(&z)
            });
            let f = feats(&m);
            prop_assert_eq!(f["surface_mm2"], (2 * (a * b + b * c + c * a)) as f64);
            prop_assert_eq!(f["volume_mm3"], (a * b * c) as f64);
        }

        #[test]
        fn diameters_match_brute_force(bits in proptest::collection::vec(any::<bool>(), 6 * 5 * 4)) {
            let g = Geometry::new([6, 5, 4], [0.8, 1.0, 1.7], [0.0; 3]).unwrap();
            let m = Mask::new(g, bits, MaskRole::Disease).unwrap();
            prop_assume!(!m.is_empty());
            let f = feats(&m);
            let pts: Vec<[f64; 3]> = m.voxels().iter().enumerate().filter(|(_, &b)| b)
                .map(|(i, _)| physical(g.coords(i), &g.spacing_mm)).collect();
            prop_assert!((f["max_3d_diameter_mm"] - brute_max(&pts)).abs() < 1e-12);
            let mut slice_best = 0.0f64;
            for z in 0..4 {
                let s: Vec<[f64; 3]> = pts.iter().copied().filter(|p| (p[2] / 1.7).round() as usize == z).collect();
                slice_best = slice_best.max(brute_max(&s));
            }
            prop_assert!((f["max_2d_diameter_slice_mm"] - slice_best).abs() < 1e-12);
            prop_assert!(f.values().all(|v| v.is_finite()));
        }
    }
}
