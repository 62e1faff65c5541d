use super::Feature;
use crate::error::{Error, Result};
use crate::numeric::sorted_quantile;
use crate::volume::{Mask, Volume};

pub const FIRST_ORDER_NAMES: [&str; 18] = [
    "energy",
    "total_energy",
    "entropy",
    "minimum",
    "percentile_10",
    "percentile_90",
    "maximum",
    "mean",
    "median",
    "interquartile_range",
    "range",
    "mean_absolute_deviation",
    "robust_mad",
    "rms",
    "skewness",
    "kurtosis",
    "variance",
    "uniformity",
];

const LOG_EPS: f64 = 2.220_446_049_250_313e-16;

/// First-order intensity statistics of the voxels inside `m`.
///
/// Moments are population moments; skewness and kurtosis (non-excess) are 0
/// for a constant region. Percentiles interpolate linearly at rank
/// `q (n - 1)`. Entropy and uniformity use the histogram of the
/// `bin_width_hu` discretisation.
pub fn first_order(v: &Volume, m: &Mask, bin_width_hu: f64) -> Result<Vec<Feature>> {
    v.geometry().ensure_same(m.geometry())?;
    let mut x: Vec<f64> = v
        .voxels()
        .iter()
        .zip(m.voxels())
        .filter_map(|(&h, &b)| b.then_some(h))
        .collect();
    if x.is_empty() {
        return Err(Error::EmptyRegion("first-order features of an empty mask".into()));
    }
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4, mut mad, mut energy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &h in &x {
        let d = h - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += d.abs();
        energy += h * h;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };

    let p10 = sorted_quantile(&x, 0.10);
    let p90 = sorted_quantile(&x, 0.90);
    let robust: Vec<f64> = x.iter().copied().filter(|&h| h >= p10 && h <= p90).collect();
    let robust_mean = robust.iter().sum::<f64>() / robust.len() as f64;
    let robust_mad =
        robust.iter().map(|h| (h - robust_mean).abs()).sum::<f64>() / robust.len() as f64;

    let min = x[0];
    let mut hist = std::collections::BTreeMap::<u64, usize>::new();
    for &h in &x {
        *hist.entry(((h - min) / bin_width_hu).floor() as u64).or_default() += 1;
    }
    let (mut entropy, mut uniformity) = (0.0, 0.0);
    for &c in hist.values() {
        let p = c as f64 / n;
        entropy -= p * (p + LOG_EPS).log2();
        uniformity += p * p;
    }

    Ok(vec![
        ("energy", energy),
        ("total_energy", energy * v.geometry().voxel_volume_mm3()),
        ("entropy", entropy),
        ("minimum", min),
        ("percentile_10", p10),
        ("percentile_90", p90),
        ("maximum", x[x.len() - 1]),
        ("mean", mean),
        ("median", sorted_quantile(&x, 0.5)),
        ("interquartile_range", sorted_quantile(&x, 0.75) - sorted_quantile(&x, 0.25)),
        ("range", x[x.len() - 1] - min),
        ("mean_absolute_deviation", mad),
        ("robust_mad", robust_mad),
        ("rms", (energy / n).sqrt()),
        ("skewness", skewness),
        ("kurtosis", kurtosis),
        ("variance", m2),
        ("uniformity", uniformity),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Geometry, MaskRole};

    fn feats(values: &[f64]) -> std::collections::HashMap<&'static str, f64> {
        let g = Geometry::unit([values.len(), 1, 1]).unwrap();
        let v = Volume::new(g, values.to_vec()).unwrap();
        let m = Mask::new(g, vec![true; values.len()], MaskRole::Disease).unwrap();
        first_order(&v, &m, 25.0).unwrap().into_iter().collect()
    }

    #[test]
    fn names_match_output_order() {
        let g = Geometry::unit([3, 1, 1]).unwrap();
        let v = Volume::new(g, vec![1.0, 2.0, 3.0]).unwrap();
        let m = Mask::new(g, vec![true; 3], MaskRole::Disease).unwrap();
        let names: Vec<&str> = first_order(&v, &m, 25.0).unwrap().iter().map(|f| f.0).collect();
        assert_eq!(names, FIRST_ORDER_NAMES);
    }

    #[test]
    fn constant_region() {
        let f = feats(&[-700.0; 9]);
        assert_eq!(f["skewness"], 0.0);
        assert_eq!(f["kurtosis"], 0.0);
        assert_eq!(f["maximum"], -700.0);
        assert_eq!(f["percentile_90"], -700.0);
        assert_eq!(f["uniformity"], 1.0);
        assert!(f["entropy"].abs() < 1e-12);
    }

    #[test]
    fn skewness_example() {
        let f = feats(&[1.0, 2.0, 3.0, 4.0, 10.0]);
        assert!((f["skewness"] - 36.0 / 10f64.powf(1.5)).abs() < 1e-9);
        assert!((f["skewness"] - 1.138_419_957_660_616_7).abs() < 1e-9);
    }

    #[test]
    fn percentile_example() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let f = feats(&v);
        assert!((f["percentile_90"] - 9.1).abs() < 1e-9);
        assert!((f["percentile_10"] - 1.9).abs() < 1e-9);
        assert!((f["median"] - 5.5).abs() < 1e-12);
        assert_eq!(f["range"], 9.0);
        assert!((f["variance"] - 8.25).abs() < 1e-12);
        assert!((f["mean_absolute_deviation"] - 2.5).abs() < 1e-12);
        // Values within [1.9, 9.1] are 2..=9; mean 5.5, MAD 2.0.
        assert!((f["robust_mad"] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_and_uniformity_on_two_bins() {
        let f = feats(&[0.0, 0.0, 30.0, 30.0]);
        assert!((f["entropy"] - 1.0).abs() < 1e-12);
        assert!((f["uniformity"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn translation_shifts_location_not_shape() {
        let base = [-850.0, -820.0, -700.0, -300.0, -810.0, -845.0];
        let shifted: Vec<f64> = base.iter().map(|x| x + 137.0).collect();
        let a = feats(&base);
        let b = feats(&shifted);
        assert!((a["skewness"] - b["skewness"]).abs() < 1e-9);
        assert!((b["maximum"] - a["maximum"] - 137.0).abs() < 1e-9);
        assert!((b["percentile_90"] - a["percentile_90"] - 137.0).abs() < 1e-9);
    }
}
