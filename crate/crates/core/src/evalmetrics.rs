//! Segmentation agreement metrics and the statistical tests used to compare
//! readers and the automated segmentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sorted_quantile;
use crate::volume::{Geometry, Mask, MaskRole};

/// One row of a segmentation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub dice: f64,
    pub hausdorff_mm: f64,
    pub extent_a_pct: f64,
    pub extent_b_pct: f64,
}

/// `2|A∩B| / (|A| + |B|)`; two empty masks agree perfectly (1.0).
pub fn dice_score(a: &Mask, b: &Mask) -> Result<f64> {
    a.geometry().ensure_same(b.geometry())?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.voxels().iter().zip(b.voxels()) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// One-dimensional squared distance transform along a line (lower envelope of
/// parabolas). `f` holds the input costs (infinite where no seed), `step` the
/// physical spacing along the line.
fn edt_line(f: &[f64], step: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let s2 = step * step;
    let mut k = 0usize;
    let mut first = None;
    for (q, &fq) in f.iter().enumerate() {
        if fq.is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(first) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let qf = q as f64;
            let pf = p as f64;
            let s = ((f[q] + s2 * qf * qf) - (f[p] + s2 * pf * pf)) / (2.0 * s2 * (qf - pf));
            if s <= z[k] {
                // k > 0 is guaranteed because z[0] = -inf.
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = (q as f64 - v[k] as f64) * step;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance (in mm²) from every voxel centre to the
/// nearest foreground voxel centre of `m`. Infinite everywhere if `m` is empty.
pub fn squared_distance_transform(m: &Mask) -> Vec<f64> {
    let g = m.geometry();
    let dims = g.dims;
    let mut cost: Vec<f64> = m
        .voxels()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let max_dim = *dims.iter().max().unwrap();
    let mut line = vec![0.0; max_dim];
    let mut out = vec![0.0; max_dim];
    let mut v = vec![0usize; max_dim];
    let mut zb = vec![0.0; max_dim + 1];
    for axis in 0..3 {
        let n = dims[axis];
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let (oa, ob) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..dims[ob] {
            for i in 0..dims[oa] {
                let mut c = [0usize; 3];
                c[oa] = i;
                c[ob] = j;
                let base = g.index(c[0], c[1], c[2]);
                for t in 0..n {
                    line[t] = cost[base + t * stride];
                }
                edt_line(&line[..n], g.spacing_mm[axis], &mut out[..n], &mut v, &mut zb);
                for t in 0..n {
                    cost[base + t * stride] = out[t];
                }
            }
        }
    }
    cost
}

/// Distances (mm) from each foreground voxel of `from` to the nearest
/// foreground voxel of `to`.
fn directed_distances(from: &Mask, to: &Mask) -> Vec<f64> {
    let dt = squared_distance_transform(to);
    from.voxels()
        .iter()
        .zip(&dt)
        .filter_map(|(&b, &d)| b.then(|| d.sqrt()))
        .collect()
}

fn check_nonempty(a: &Mask, b: &Mask) -> Result<()> {
    a.geometry().ensure_same(b.geometry())?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedMetric(
            "Hausdorff distance requires two nonempty masks".into(),
        ));
    }
    Ok(())
}

/// Symmetric Hausdorff distance in mm between foreground voxel centres.
pub fn hausdorff(a: &Mask, b: &Mask) -> Result<f64> {
    check_nonempty(a, b)?;
    let ab = directed_distances(a, b).into_iter().fold(0.0, f64::max);
    let ba = directed_distances(b, a).into_iter().fold(0.0, f64::max);
    Ok(ab.max(ba))
}

/// Percentile variant: the larger of the two directed `q`-quantiles
/// (`q = 0.95` gives the usual HD95).
pub fn hausdorff_percentile(a: &Mask, b: &Mask, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile {q} outside [0, 1]")));
    }
    check_nonempty(a, b)?;
    let mut ab = directed_distances(a, b);
    let mut ba = directed_distances(b, a);
    ab.sort_by(f64::total_cmp);
    ba.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&ab, q).max(sorted_quantile(&ba, q)))
}

/// Percentage of the lung union occupied by disease.
pub fn disease_extent(disease: &Mask, lung_left: &Mask, lung_right: &Mask) -> Result<f64> {
    disease.geometry().ensure_same(lung_left.geometry())?;
    disease.geometry().ensure_same(lung_right.geometry())?;
    let mut lung = 0usize;
    let mut diseased = 0usize;
    for i in 0..disease.voxels().len() {
        if lung_left.voxels()[i] || lung_right.voxels()[i] {
            lung += 1;
            diseased += disease.voxels()[i] as usize;
        }
    }
    if lung == 0 {
        return Err(Error::UndefinedMetric("lung mask is empty".into()));
    }
    Ok(100.0 * diseased as f64 / lung as f64)
}

/// Dice, Hausdorff and both disease extents for a pair of disease masks.
pub fn agreement(
    a: &Mask,
    b: &Mask,
    lung_left: &Mask,
    lung_right: &Mask,
) -> Result<AgreementReport> {
    Ok(AgreementReport {
        dice: dice_score(a, b)?,
        hausdorff_mm: hausdorff(a, b)?,
        extent_a_pct: disease_extent(a, lung_left, lung_right)?,
        extent_b_pct: disease_extent(b, lung_left, lung_right)?,
    })
}

/// Convenience for callers holding a single lung mask.
pub fn empty_like(m: &Mask) -> Mask {
    Mask::empty(*m.geometry(), MaskRole::Other)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Two-sided paired Student's t-test on `x - y`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TTest> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0, df }
        } else {
            TTest {
                t: mean.signum() * f64::INFINITY,
                p: 0.0,
                df,
            }
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df),
        df,
    })
}

/// Two-sided tail probability `P(|T| > |t|)` for Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("pearson inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least two samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric("pearson of a constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub(crate) fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Geometry helper used by tests and the CLI to check masks before comparison.
pub fn same_geometry(masks: &[&Mask]) -> Result<Geometry> {
    let first = masks
        .first()
        .ok_or_else(|| Error::invalid("no masks supplied"))?;
    for m in &masks[1..] {
        first.geometry().ensure_same(m.geometry())?;
    }
    Ok(*first.geometry())
}
