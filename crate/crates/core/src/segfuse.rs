//! Consensus fusion of candidate segmentations and the two segmentation
//! losses (smoothed Dice loss and weighted cross entropy) with their
//! analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::tree_sum;
use crate::volume::{Geometry, Mask, MaskRole};

/// Voxelwise disease probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    geometry: Geometry,
    values: Vec<f64>,
}

impl ProbMap {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::invalid("probability map size does not match geometry"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
        }
        Ok(Self { geometry, values })
    }

    pub fn from_mask(m: &Mask) -> Self {
        Self {
            geometry: *m.geometry(),
            values: m.voxels().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// Weight of the minority (disease) class.
    pub beta: f64,
    /// Clamp applied to probabilities before taking logarithms.
    pub epsilon: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            epsilon: 1e-7,
        }
    }
}

impl LossParams {
    pub fn new(beta: f64, epsilon: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("beta must be > 0, got {beta}")));
        }
        if !(epsilon > 0.0 && epsilon <= 1e-6) {
            return Err(Error::invalid(format!("epsilon must be in (0, 1e-6], got {epsilon}")));
        }
        Ok(Self { beta, epsilon })
    }
}

/// How an exact half/half split is resolved when K is even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieRule {
    #[default]
    Foreground,
    Background,
}

/// Voxelwise majority vote with ties resolved to foreground.
pub fn majority_vote(masks: &[Mask]) -> Result<Mask> {
    majority_vote_with(masks, TieRule::Foreground)
}

pub fn majority_vote_with(masks: &[Mask], tie: TieRule) -> Result<Mask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::invalid("majority vote needs at least one mask"))?;
    for m in &masks[1..] {
        first.geometry().ensure_same(m.geometry())?;
    }
    let k = masks.len();
    let mut votes = vec![0usize; first.geometry().len()];
    for m in masks {
        for (v, &b) in votes.iter_mut().zip(m.voxels()) {
            *v += b as usize;
        }
    }
    let voxels = votes
        .into_iter()
        .map(|v| 2 * v > k || (2 * v == k && tie == TieRule::Foreground))
        .collect();
    Mask::new(*first.geometry(), voxels, first.role())
}

/// Voxelwise weighted mean of probability maps, weights normalised to sum 1.
pub fn fuse_probabilities(maps: &[ProbMap], weights: &[f64]) -> Result<ProbMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::invalid("fusion needs at least one probability map"))?;
    if weights.len() != maps.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} maps",
            weights.len(),
            maps.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weights must not all be zero"));
    }
    for m in &maps[1..] {
        first.geometry.ensure_same(&m.geometry)?;
    }
    let norm: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let values = (0..first.values.len())
        .map(|i| {
            let v: f64 = maps.iter().zip(&norm).map(|(m, w)| w * m.values[i]).sum();
            // Rounding can push a convex combination a hair outside the inputs.
            let lo = maps.iter().map(|m| m.values[i]).fold(f64::INFINITY, f64::min);
            let hi = maps.iter().map(|m| m.values[i]).fold(f64::NEG_INFINITY, f64::max);
            v.clamp(lo, hi)
        })
        .collect();
    Ok(ProbMap {
        geometry: first.geometry,
        values,
    })
}

/// Foreground where `p >= t`.
pub fn threshold(p: &ProbMap, t: f64) -> Result<Mask> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("threshold {t} outside [0, 1]")));
    }
    Mask::new(
        p.geometry,
        p.values.iter().map(|&v| v >= t).collect(),
        MaskRole::Disease,
    )
}

fn check_inputs(p: &ProbMap, g: &Mask, roi: Option<&Mask>) -> Result<Vec<usize>> {
    p.geometry.ensure_same(g.geometry())?;
    match roi {
        Some(r) => {
            p.geometry.ensure_same(r.geometry())?;
            Ok(r
                .voxels()
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect())
        }
        None => Ok((0..p.values.len()).collect()),
    }
}

fn g_value(g: &Mask, i: usize) -> f64 {
    if g.voxels()[i] {
        1.0
    } else {
        0.0
    }
}

struct DiceSums {
    intersection: f64,
    total: f64,
}

fn dice_sums(p: &ProbMap, g: &Mask, idx: &[usize]) -> DiceSums {
    let pg: Vec<f64> = idx.iter().map(|&i| p.values[i] * g_value(g, i)).collect();
    let ps: Vec<f64> = idx.iter().map(|&i| p.values[i] + g_value(g, i)).collect();
    DiceSums {
        intersection: tree_sum(&pg),
        total: tree_sum(&ps),
    }
}

/// `1 - (2 Σ p g + 1) / (Σ p + Σ g + 1)`, optionally restricted to `roi`.
pub fn dice_loss(p: &ProbMap, g: &Mask, roi: Option<&Mask>) -> Result<f64> {
    let idx = check_inputs(p, g, roi)?;
    let s = dice_sums(p, g, &idx);
    Ok(1.0 - (2.0 * s.intersection + 1.0) / (s.total + 1.0))
}

/// Mean over in-roi voxels of `-(β g ln p + (1 - g) ln(1 - p))` with `p`
/// clamped to `[ε, 1 - ε]`.
pub fn weighted_cross_entropy(
    p: &ProbMap,
    g: &Mask,
    params: LossParams,
    roi: Option<&Mask>,
) -> Result<f64> {
    let idx = check_inputs(p, g, roi)?;
    if idx.is_empty() {
        return Err(Error::EmptyRegion("loss region of interest is empty".into()));
    }
    let eps = params.epsilon;
    let terms: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let pi = p.values[i].clamp(eps, 1.0 - eps);
            let gi = g_value(g, i);
            -(params.beta * gi * pi.ln() + (1.0 - gi) * (1.0 - pi).ln())
        })
        .collect();
    Ok(tree_sum(&terms) / idx.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Dice,
    WeightedCrossEntropy,
}

/// Analytic derivative of the chosen loss with respect to every voxel of `p`
/// (zero outside `roi`).
pub fn loss_gradient(
    kind: LossKind,
    p: &ProbMap,
    g: &Mask,
    params: LossParams,
    roi: Option<&Mask>,
) -> Result<Vec<f64>> {
    let idx = check_inputs(p, g, roi)?;
    let mut grad = vec![0.0; p.values.len()];
    match kind {
        LossKind::Dice => {
            let s = dice_sums(p, g, &idx);
            let denom = s.total + 1.0;
            let numer = 2.0 * s.intersection + 1.0;
            for &i in &idx {
                grad[i] = numer / (denom * denom) - 2.0 * g_value(g, i) / denom;
            }
        }
        LossKind::WeightedCrossEntropy => {
            if idx.is_empty() {
                return Err(Error::EmptyRegion("loss region of interest is empty".into()));
            }
            let n = idx.len() as f64;
            let eps = params.epsilon;
            for &i in &idx {
                let raw = p.values[i];
                // The clamp is flat outside [ε, 1 - ε].
                if raw < eps || raw > 1.0 - eps {
                    continue;
                }
                let gi = g_value(g, i);
                grad[i] = (-params.beta * gi / raw + (1.0 - gi) / (1.0 - raw)) / n;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g1() -> Geometry {
        Geometry::unit([1, 1, 1]).unwrap()
    }

    fn one_voxel(p: f64, g: bool) -> (ProbMap, Mask) {
        (
            ProbMap::new(g1(), vec![p]).unwrap(),
            Mask::new(g1(), vec![g], MaskRole::Disease).unwrap(),
        )
    }

    fn masks_from_votes(votes: &[bool]) -> Vec<Mask> {
        votes
            .iter()
            .map(|&b| Mask::new(g1(), vec![b], MaskRole::Disease).unwrap())
            .collect()
    }

    #[test]
    fn vote_examples() {
        let out = majority_vote(&masks_from_votes(&[true, true, false])).unwrap();
        assert_eq!(out.voxels(), &[true]);
        let out = majority_vote(&masks_from_votes(&[true, true, true, false, false, false])).unwrap();
        assert_eq!(out.voxels(), &[true]);
        let out = majority_vote_with(
            &masks_from_votes(&[true, true, true, false, false, false]),
            TieRule::Background,
        )
        .unwrap();
        assert_eq!(out.voxels(), &[false]);
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn vote_rejects_geometry_mismatch() {
        let a = Mask::empty(g1(), MaskRole::Disease);
        let b = Mask::empty(Geometry::unit([2, 1, 1]).unwrap(), MaskRole::Disease);
        assert!(matches!(majority_vote(&[a, b]), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn fusion_examples() {
        let a = ProbMap::new(g1(), vec![0.2]).unwrap();
        let b = ProbMap::new(g1(), vec![0.8]).unwrap();
        let f = fuse_probabilities(&[a.clone(), b], &[1.0, 1.0]).unwrap();
        assert!((f.values()[0] - 0.5).abs() < 1e-15);
        assert_eq!(fuse_probabilities(&[a.clone()], &[3.0]).unwrap(), a);
        let c = ProbMap::new(g1(), vec![0.3]).unwrap();
        let d = ProbMap::new(g1(), vec![0.9]).unwrap();
        assert_eq!(fuse_probabilities(&[c, d], &[1.0, 0.0]).unwrap().values(), &[0.3]);
        assert!(fuse_probabilities(&[], &[]).is_err());
        assert!(fuse_probabilities(&[a.clone()], &[0.0]).is_err());
    }

    #[test]
    fn threshold_examples() {
        let p = ProbMap::new(Geometry::unit([3, 1, 1]).unwrap(), vec![0.5, 0.49, 0.0]).unwrap();
        assert_eq!(threshold(&p, 0.5).unwrap().voxels(), &[true, false, false]);
        assert!(threshold(&p, 1.5).is_err());
    }

    #[test]
    fn dice_loss_examples() {
        let (p, g) = one_voxel(1.0, true);
        assert!(dice_loss(&p, &g, None).unwrap().abs() < 1e-12);
        let (p, g) = one_voxel(1.0, false);
        assert!((dice_loss(&p, &g, None).unwrap() - 0.5).abs() < 1e-12);
        let (p, g) = one_voxel(0.5, true);
        assert!((dice_loss(&p, &g, None).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wce_examples() {
        let params = LossParams::default();
        let (p, g) = one_voxel(1.0, true);
        assert!(weighted_cross_entropy(&p, &g, params, None).unwrap() < 1e-7 * 10.0);
        let (p, g) = one_voxel(0.5, true);
        let v = weighted_cross_entropy(&p, &g, params, None).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
        let (p, g) = one_voxel((-1.0f64).exp(), true);
        let v = weighted_cross_entropy(&p, &g, LossParams::new(2.0, 1e-7).unwrap(), None).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn loss_params_validation() {
        assert!(LossParams::new(0.0, 1e-7).is_err());
        assert!(LossParams::new(1.0, 1e-3).is_err());
        assert!(LossParams::new(1.0, 0.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let (p, g) = one_voxel(0.5, true);
        let grad =
            loss_gradient(LossKind::WeightedCrossEntropy, &p, &g, LossParams::default(), None).unwrap();
        assert!((grad[0] + 2.0).abs() < 1e-12);
        let (p, g) = one_voxel(1.0, true);
        let grad = loss_gradient(LossKind::Dice, &p, &g, LossParams::default(), None).unwrap();
        assert!((grad[0] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn roi_restricts_losses() {
        let geom = Geometry::unit([2, 1, 1]).unwrap();
        let p = ProbMap::new(geom, vec![1.0, 1.0]).unwrap();
        let g = Mask::new(geom, vec![true, false], MaskRole::Disease).unwrap();
        let roi = Mask::new(geom, vec![true, false], MaskRole::LungLeft).unwrap();
        assert!(dice_loss(&p, &g, Some(&roi)).unwrap().abs() < 1e-12);
        assert!(dice_loss(&p, &g, None).unwrap() > 0.0);
        let grad = loss_gradient(LossKind::Dice, &p, &g, LossParams::default(), Some(&roi)).unwrap();
        assert_eq!(grad[1], 0.0);
        let empty = Mask::empty(geom, MaskRole::LungLeft);
        assert!(weighted_cross_entropy(&p, &g, LossParams::default(), Some(&empty)).is_err());
    }

    proptest! {
        #[test]
        fn dice_loss_zero_on_binary_match_and_bounded(bits in proptest::collection::vec(any::<bool>(), 1..50),
                                                      probs in proptest::collection::vec(0.0f64..=1.0, 50)) {
            let n = bits.len();
            let geom = Geometry::unit([n, 1, 1]).unwrap();
            let g = Mask::new(geom, bits.clone(), MaskRole::Disease).unwrap();
            let p = ProbMap::from_mask(&g);
            prop_assert_eq!(dice_loss(&p, &g, None).unwrap(), 0.0);
            let q = ProbMap::new(geom, probs[..n].to_vec()).unwrap();
            let l = dice_loss(&q, &g, None).unwrap();
            prop_assert!((0.0..1.0).contains(&l));
        }

        #[test]
        fn vote_permutation_invariant(votes in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 8), 1..7),
                                      rot in 0usize..7) {
            let geom = Geometry::unit([8, 1, 1]).unwrap();
            let masks: Vec<Mask> = votes.iter()
                .map(|v| Mask::new(geom, v.clone(), MaskRole::Disease).unwrap()).collect();
            let mut rotated = masks.clone();
            rotated.rotate_left(rot % masks.len());
            rotated.reverse();
            prop_assert_eq!(majority_vote(&masks).unwrap(), majority_vote(&rotated).unwrap());
            let same = vec![masks[0].clone(); masks.len()];
            prop_assert_eq!(&majority_vote(&same).unwrap(), &masks[0]);
        }

        #[test]
        fn fusion_within_input_bounds(a in proptest::collection::vec(0.0f64..=1.0, 10),
                                      b in proptest::collection::vec(0.0f64..=1.0, 10),
                                      wa in 0.0f64..5.0, wb in 0.01f64..5.0) {
            let geom = Geometry::unit([10, 1, 1]).unwrap();
            let pa = ProbMap::new(geom, a.clone()).unwrap();
            let pb = ProbMap::new(geom, b.clone()).unwrap();
            let f = fuse_probabilities(&[pa, pb], &[wa, wb]).unwrap();
            for i in 0..10 {
                prop_assert!(f.values()[i] >= a[i].min(b[i]) && f.values()[i] <= a[i].max(b[i]));
            }
        }

        #[test]
        fn wce_monotone_in_p(p1 in 0.001f64..0.999, p2 in 0.001f64..0.999, beta in 0.1f64..10.0) {
            let params = LossParams::new(beta, 1e-7).unwrap();
            let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
            let (pl, g1m) = one_voxel(lo, true);
            let (ph, _) = one_voxel(hi, true);
            let l_lo = weighted_cross_entropy(&pl, &g1m, params, None).unwrap();
            let l_hi = weighted_cross_entropy(&ph, &g1m, params, None).unwrap();
            prop_assert!(l_lo >= l_hi && l_hi >= 0.0);
            let (_, g0) = one_voxel(lo, false);
            let m_lo = weighted_cross_entropy(&pl, &g0, params, None).unwrap();
            let m_hi = weighted_cross_entropy(&ph, &g0, params, None).unwrap();
            prop_assert!(m_lo <= m_hi && m_lo >= 0.0);
        }
    }
}
