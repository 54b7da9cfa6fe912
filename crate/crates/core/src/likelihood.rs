//! Emission and transition costs for pattern decoding.
//!
//! Costs are negated, unnormalized Gaussian log-likelihoods: smaller is
//! better. The emission cost of a pattern is the two-way mismatch between
//! observed and pattern positions, scaled by `1 / (2 sigma^2)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::MeasureStrums;
use crate::vocabulary::RhythmicPattern;

/// How the decoder picks among equal-cost alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Keep the current pattern if that is optimal, otherwise take the
    /// lowest vocabulary index.
    #[default]
    PreferStay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    /// Timing standard deviation, in fractions of a measure.
    pub sigma: f64,
    /// Penalty for switching to a different pattern.
    pub c1: f64,
    /// Extra penalty when the switch also changes the time signature.
    pub c2: f64,
    pub tie_break: TieBreak,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            sigma: 0.05,
            c1: 2.0,
            c2: 6.0,
            tie_break: TieBreak::PreferStay,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Cost of explaining observed strums with a pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmissionCost {
    Finite(f64),
    /// The pattern cannot have produced the observation (one side empty).
    Forbidden,
}

impl EmissionCost {
    pub fn value(self) -> Option<f64> {
        match self {
            EmissionCost::Finite(v) => Some(v),
            EmissionCost::Forbidden => None,
        }
    }

    pub fn is_forbidden(self) -> bool {
        matches!(self, EmissionCost::Forbidden)
    }
}

impl PartialOrd for EmissionCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (EmissionCost::Finite(a), EmissionCost::Finite(b)) => a.partial_cmp(b),
            (EmissionCost::Finite(_), EmissionCost::Forbidden) => Some(Ordering::Less),
            (EmissionCost::Forbidden, EmissionCost::Finite(_)) => Some(Ordering::Greater),
            (EmissionCost::Forbidden, EmissionCost::Forbidden) => Some(Ordering::Equal),
        }
    }
}

/// Sum over `xs` of the squared distance to the nearest element of `ys`.
/// Both slices ascending, `ys` non-empty; one merge-style pass.
fn sum_nearest_sq(xs: &[f64], ys: &[f64]) -> f64 {
    let mut j = 0;
    let mut total = 0.0;
    for &x in xs {
        while j + 1 < ys.len() && ys[j + 1] <= x {
            j += 1;
        }
        let mut d = (x - ys[j]).abs();
        if j + 1 < ys.len() {
            d = d.min(ys[j + 1] - x);
        }
        total += d * d;
    }
    total
}

/// Two-way mismatch: squared distance from every observed position to its
/// nearest pattern position, plus the same from pattern to observation.
///
/// Both slices must be ascending. Returns 0 when both are empty; if exactly
/// one is empty the non-empty side has no neighbours and the result is
/// infinite, so callers apply the empty-pattern rules first.
pub fn raw_mismatch(observed: &[f64], pattern: &[f64]) -> f64 {
    if observed.is_empty() && pattern.is_empty() {
        return 0.0;
    }
    if observed.is_empty() || pattern.is_empty() {
        return f64::INFINITY;
    }
    sum_nearest_sq(observed, pattern) + sum_nearest_sq(pattern, observed)
}

/// Emission cost of `pattern` over the measures it covers.
pub fn emission_cost(
    span: &[MeasureStrums],
    pattern: &RhythmicPattern,
    cfg: &DecoderConfig,
) -> Result<EmissionCost> {
    if span.len() != pattern.measures() {
        return Err(Error::SpanMismatch {
            pattern: pattern.id().to_string(),
            expected: pattern.measures(),
            found: span.len(),
        });
    }
    Ok(emission_cost_positions(span, pattern, cfg))
}

pub(crate) fn emission_cost_positions<S: AsRef<[f64]>>(
    span: &[S],
    pattern: &RhythmicPattern,
    cfg: &DecoderConfig,
) -> EmissionCost {
    let scale = 2.0 * cfg.sigma * cfg.sigma;
    let mut total = 0.0;
    for (k, observed) in span.iter().enumerate() {
        let observed = observed.as_ref();
        let onsets = pattern.measure_onsets(k);
        match (observed.is_empty(), onsets.is_empty()) {
            (true, true) => {}
            (false, false) => total += raw_mismatch(observed, onsets) / scale,
            _ => return EmissionCost::Forbidden,
        }
    }
    EmissionCost::Finite(total)
}

/// Cost of moving from `prev` to `next` at a pattern boundary.
pub fn transition_cost(prev: &RhythmicPattern, next: &RhythmicPattern, cfg: &DecoderConfig) -> f64 {
    if prev.id() == next.id() {
        0.0
    } else if prev.time_signature() == next.time_signature() {
        cfg.c1
    } else {
        cfg.c1 + cfg.c2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocabulary::TimeSignature;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn brute_mismatch(s: &[f64], r: &[f64]) -> f64 {
        let d = |x: f64, ys: &[f64]| ys.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
        s.iter().map(|&x| d(x, r).powi(2)).sum::<f64>() + r.iter().map(|&y| d(y, s).powi(2)).sum::<f64>()
    }

    fn pat(id: &str, ts: &str, onsets: Vec<Vec<f64>>) -> RhythmicPattern {
        RhythmicPattern::new(id, ts.parse::<TimeSignature>().unwrap(), onsets).unwrap()
    }

    fn ms(p: &[f64]) -> MeasureStrums {
        MeasureStrums::new(0, p.to_vec()).unwrap()
    }

    #[test]
    fn mismatch_examples() {
        let s = [0.0, 0.5];
        let r = [0.0, 0.25, 0.5];
        assert_abs_diff_eq!(brute_mismatch(&s, &r), 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(raw_mismatch(&s, &r), 0.0625, epsilon = 1e-15);
        assert_eq!(raw_mismatch(&[0.0, 0.25, 0.5, 0.75], &[0.0, 0.25, 0.5, 0.75]), 0.0);
        assert_abs_diff_eq!(brute_mismatch(&[0.1], &[0.0]), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(raw_mismatch(&[0.1], &[0.0]), 0.02, epsilon = 1e-15);
        assert_eq!(raw_mismatch(&[], &[]), 0.0);
    }

    #[test]
    fn empty_pattern_rules() {
        let cfg = DecoderConfig::default();
        let empty = RhythmicPattern::empty("4/4".parse().unwrap());
        assert_eq!(emission_cost(&[ms(&[])], &empty, &cfg).unwrap(), EmissionCost::Finite(0.0));
        assert_eq!(emission_cost(&[ms(&[0.3])], &empty, &cfg).unwrap(), EmissionCost::Forbidden);
        let p = pat("p", "4/4", vec![vec![0.0]]);
        assert_eq!(emission_cost(&[ms(&[])], &p, &cfg).unwrap(), EmissionCost::Forbidden);
    }

    #[test]
    fn scaled_emission() {
        let cfg = DecoderConfig { sigma: 0.5, ..Default::default() };
        let p = pat("p", "4/4", vec![vec![0.0, 0.25, 0.5]]);
        let c = emission_cost(&[ms(&[0.0, 0.5])], &p, &cfg).unwrap().value().unwrap();
        assert_abs_diff_eq!(c, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn two_measure_emission_sums_both_halves() {
        let cfg = DecoderConfig { sigma: 0.5, ..Default::default() };
        let p = pat("p", "4/4", vec![vec![0.0], vec![]]);
        let c = emission_cost(&[ms(&[0.1]), ms(&[])], &p, &cfg).unwrap();
        assert_abs_diff_eq!(c.value().unwrap(), 0.02 / 0.5, epsilon = 1e-15);
        let c = emission_cost(&[ms(&[0.1]), ms(&[0.2])], &p, &cfg).unwrap();
        assert!(c.is_forbidden());
        assert!(matches!(
            emission_cost(&[ms(&[0.1])], &p, &cfg),
            Err(Error::SpanMismatch { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn transitions() {
        let cfg = DecoderConfig { c1: 1.5, c2: 4.0, ..Default::default() };
        let p1 = pat("P1", "4/4", vec![vec![0.0]]);
        let p2 = pat("P2", "4/4", vec![vec![0.5]]);
        let p3 = pat("P3", "3/4", vec![vec![0.0]]);
        assert_eq!(transition_cost(&p1, &p1, &cfg), 0.0);
        assert_eq!(transition_cost(&p1, &p2, &cfg), 1.5);
        assert_eq!(transition_cost(&p1, &p3, &cfg), 5.5);
    }

    #[test]
    fn forbidden_dominates() {
        assert!(EmissionCost::Forbidden > EmissionCost::Finite(1e300));
        assert!(EmissionCost::Finite(0.0) < EmissionCost::Finite(1.0));
    }

    #[test]
    fn config_validation() {
        assert!(DecoderConfig::default().validate().is_ok());
        assert!(DecoderConfig { sigma: 0.0, ..Default::default() }.validate().is_err());
        assert!(DecoderConfig { c1: -1.0, ..Default::default() }.validate().is_err());
        let parsed: DecoderConfig = serde_json::from_str(r#"{"tie_break":"prefer-stay","c1":3}"#).unwrap();
        assert_eq!(parsed.c1, 3.0);
        assert!(serde_json::from_str::<DecoderConfig>(r#"{"c3":1}"#).is_err());
    }

    fn sorted_positions(max: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..max).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(s in sorted_positions(12), r in sorted_positions(12)) {
            prop_assert!((raw_mismatch(&s, &r) - brute_mismatch(&s, &r)).abs() < 1e-12);
        }

        #[test]
        fn symmetric(s in sorted_positions(12), r in sorted_positions(12)) {
            prop_assert_eq!(raw_mismatch(&s, &r), raw_mismatch(&r, &s));
        }

        #[test]
        fn zero_iff_set_equal(s in sorted_positions(8), r in sorted_positions(8)) {
            prop_assert_eq!(raw_mismatch(&s, &s), 0.0);
            prop_assert_eq!(raw_mismatch(&s, &r) == 0.0, s == r);
        }

        #[test]
        fn sigma_scale_law(s in sorted_positions(8), r in sorted_positions(8), sigma in 0.01f64..0.5, k in 0.5f64..4.0) {
            let p = pat("p", "4/4", vec![r]);
            let m = ms(&s);
            let base = DecoderConfig { sigma, ..Default::default() };
            let scaled = DecoderConfig { sigma: sigma * k, ..Default::default() };
            let a = emission_cost(std::slice::from_ref(&m), &p, &base).unwrap().value().unwrap();
            let b = emission_cost(std::slice::from_ref(&m), &p, &scaled).unwrap().value().unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((b - a / (k * k)).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn transition_depends_only_on_identity_and_signature(
            a in 0usize..4, b in 0usize..4, sa in 0usize..2, sb in 0usize..2,
            c1 in 0.0f64..10.0, c2 in 0.0f64..10.0,
        ) {
            let sigs = ["4/4", "3/4"];
            let cfg = DecoderConfig { c1, c2, ..Default::default() };
            // Patterns with the same id always share a signature in a vocabulary.
            let sb = if a == b { sa } else { sb };
            let pa = pat(&format!("P{a}"), sigs[sa], vec![vec![0.1 * a as f64]]);
            let pb = pat(&format!("P{b}"), sigs[sb], vec![vec![0.1 * b as f64]]);
            let expected = if a == b { 0.0 } else if sa == sb { c1 } else { c1 + c2 };
            prop_assert_eq!(transition_cost(&pa, &pb, &cfg), expected);
        }
    }
}
