//! Closed-form bounds for `W`, evaluated with implied constant `1` and every
//! `o(1)` exponent set to zero.
//!
//! All formulas are evaluated in log space. The two corollary forms carry the
//! exact `(p/(p-1))` factor that turns them into specialisations of the main
//! bound at `T = p - 1` (and at lifted sizes), instead of their asymptotic
//! `p ~ p - 1` forms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proof::ell_choice;
use crate::ring::PrimeContext;
use crate::sums::{collapse_exponents, SumSpec};

/// Relative slack used when checking `bound >= |X||Y|` in the trivial regime.
pub const CHAIN_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// `|X| |Y|`
    Trivial,
    /// `|X|^{1-1/2k} |Y|^{1-1/(2k+2)} p^{1/2k + 3/(4k+4)} / T^{1/(2k+2)}`
    Theorem1,
    /// `T = p - 1`: `|X|^{1-1/2k} |Y|^{1-1/(2k+2)} p^{1/2k + 1/(4k+4)}`
    Cor1,
    /// Sets in `Z_T`: `|X|^{1-1/2k} |Y|^{1-1/(2k+2)} T^{1/2k} p^{1/(4k+4)}`
    Cor2,
    /// `|X|^{1/2} |Y|^{1/2} T^{3/4} p^{1/8}`
    OldcorGar1,
    /// `|X|^{1/2} |Y|^{5/6} p^{5/8}`
    FsXy,
    /// `T^{11/6} p^{1/8}`
    FsT,
    /// `|X|^{1/2} |Y|^{1/2} p^{7/8}`
    Gar78,
    /// `|X|^{1/2} |Y|^{3/4} p^{7/8} / T^{1/4}`
    Gaka34,
}

impl BoundId {
    pub const ALL: [BoundId; 9] = [
        BoundId::Trivial,
        BoundId::Theorem1,
        BoundId::Cor1,
        BoundId::Cor2,
        BoundId::OldcorGar1,
        BoundId::FsXy,
        BoundId::FsT,
        BoundId::Gar78,
        BoundId::Gaka34,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::Trivial => "trivial",
            BoundId::Theorem1 => "theorem1",
            BoundId::Cor1 => "cor1",
            BoundId::Cor2 => "cor2",
            BoundId::OldcorGar1 => "oldcor_gar1",
            BoundId::FsXy => "fs_xy",
            BoundId::FsT => "fs_T",
            BoundId::Gar78 => "gar_78",
            BoundId::Gaka34 => "gaka_34",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sizes and parameters a catalogued bound depends on. Pure arithmetic:
/// `order` need not divide `p - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub size_x: f64,
    pub size_y: f64,
    pub p: f64,
    /// `T`
    pub order: f64,
    pub k: u32,
}

impl BoundParams {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.size_x) && positive(self.size_y) && positive(self.order)) {
            return Err(Error::Domain(format!(
                "bound parameters must be positive: |X| = {}, |Y| = {}, T = {}",
                self.size_x, self.size_y, self.order
            )));
        }
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::Domain(format!("p = {} must be at least 2", self.p)));
        }
        if self.k == 0 {
            return Err(Error::ZeroInput("k"));
        }
        Ok(())
    }
}

/// Exponent of `|X|` and `|Y|` shared by the main bound and both corollaries.
fn xy_exponents(k: f64) -> (f64, f64) {
    (1.0 - 1.0 / (2.0 * k), 1.0 - 1.0 / (2.0 * k + 2.0))
}

fn log_value(id: BoundId, b: &BoundParams) -> f64 {
    let (lx, ly, lp, lt) = (b.size_x.ln(), b.size_y.ln(), b.p.ln(), b.order.ln());
    // ln(p / (p - 1))
    let shift = -(-1.0 / b.p).ln_1p();
    let k = b.k as f64;
    let (ex, ey) = xy_exponents(k);
    match id {
        BoundId::Trivial => lx + ly,
        BoundId::Theorem1 => {
            ex * lx + ey * ly + (1.0 / (2.0 * k) + 3.0 / (4.0 * k + 4.0)) * lp
                - lt / (2.0 * k + 2.0)
        }
        BoundId::Cor1 => {
            ex * lx
                + ey * ly
                + (1.0 / (2.0 * k) + 1.0 / (4.0 * k + 4.0)) * lp
                + shift / (2.0 * k + 2.0)
        }
        BoundId::Cor2 => {
            ex * lx
                + ey * ly
                + lt / (2.0 * k)
                + lp / (4.0 * k + 4.0)
                + shift * (1.0 / (2.0 * k) + 1.0 / (2.0 * k + 2.0))
        }
        BoundId::OldcorGar1 => 0.5 * lx + 0.5 * ly + 0.75 * lt + 0.125 * lp,
        BoundId::FsXy => 0.5 * lx + 5.0 / 6.0 * ly + 0.625 * lp,
        BoundId::FsT => 11.0 / 6.0 * lt + 0.125 * lp,
        BoundId::Gar78 => 0.5 * lx + 0.5 * ly + 0.875 * lp,
        BoundId::Gaka34 => 0.5 * lx + 0.75 * ly + 0.875 * lp - 0.25 * lt,
    }
}

pub fn evaluate_bound(id: BoundId, params: &BoundParams) -> Result<f64> {
    params.validate()?;
    Ok(log_value(id, params).exp())
}

/// `(t d max v_i) sqrt(p)` for a non-degenerate `2k`-tuple.
pub fn weil_bound_sparse(ctx: &PrimeContext, v: &[u64], t: u64, d: u64) -> Result<f64> {
    let collapsed = collapse_exponents(ctx, v, t, d)?;
    if collapsed.is_degenerate() {
        return Err(Error::Domain(format!(
            "tuple {v:?} collapses to the zero polynomial; the complete sum is p - 1"
        )));
    }
    Ok(collapsed.unreduced_degree as f64 * (ctx.p() as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrivialRegime {
    /// `T^{(2k+1)/(2k+2)} <= |X|^{1/2k} |Y|^{-1+1/(2k+2)} p^{3/2 - 1/2k - 3/(4k+4)}`
    pub below_threshold: bool,
    pub bound_value: f64,
    pub trivial_value: f64,
    /// Below the threshold, whether `bound_value >= trivial_value` (up to
    /// [`CHAIN_SLACK`]); vacuously true above it.
    pub chain_holds: bool,
}

pub fn trivial_regime_check(params: &BoundParams) -> Result<TrivialRegime> {
    params.validate()?;
    let k = params.k as f64;
    let lhs = (2.0 * k + 1.0) / (2.0 * k + 2.0) * params.order.ln();
    let rhs = params.size_x.ln() / (2.0 * k)
        + (-1.0 + 1.0 / (2.0 * k + 2.0)) * params.size_y.ln()
        + (1.5 - 1.0 / (2.0 * k) - 3.0 / (4.0 * k + 4.0)) * params.p.ln();
    let below_threshold = lhs <= rhs;
    let bound_value = evaluate_bound(BoundId::Theorem1, params)?;
    let trivial_value = params.size_x * params.size_y;
    Ok(TrivialRegime {
        below_threshold,
        bound_value,
        trivial_value,
        chain_holds: !below_threshold || bound_value >= trivial_value * (1.0 - CHAIN_SLACK),
    })
}

/// Smallest `alpha` with `|X| = |Y| = p^alpha` making the corollary bound
/// beat `|X||Y|`.
pub fn nontriviality_threshold(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroInput("k"));
    }
    let k = k as f64;
    let (ex, ey) = xy_exponents(k);
    let p_exponent = 1.0 / (2.0 * k) + 1.0 / (4.0 * k + 4.0);
    // alpha (ex + ey) + p_exponent < 2 alpha
    Ok(p_exponent / (2.0 - ex - ey))
}

/// `k` in `1..=k_max` minimising the main bound; ties go to the smaller `k`.
pub fn best_k(size_x: f64, size_y: f64, p: f64, order: f64, k_max: u32) -> Result<(u32, f64)> {
    if k_max == 0 {
        return Err(Error::ZeroInput("k_max"));
    }
    let mut best: Option<(u32, f64)> = None;
    for k in 1..=k_max {
        let v = evaluate_bound(
            BoundId::Theorem1,
            &BoundParams {
                size_x,
                size_y,
                p,
                order,
                k,
            },
        )?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    Ok(best.expect("k_max >= 1"))
}

/// Conventions stamped on every report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    pub log_base: String,
    pub little_o: String,
    pub implied_constant: String,
    pub corollary_form: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            log_base: "natural".into(),
            little_o: "o(1) exponents evaluated as 0".into(),
            implied_constant: "1".into(),
            corollary_form: "cor1/cor2 include the exact (p/(p-1)) specialisation factor".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p: u64,
    pub order: u64,
    pub k: u32,
    pub size_x: u64,
    pub size_y: u64,
    pub exact: f64,
    pub values: BTreeMap<BoundId, f64>,
    /// `exact / value`; zero when the value is zero (empty sets).
    pub ratios: BTreeMap<BoundId, f64>,
    pub below_threshold: bool,
    /// `T > p^{1/2} (log p)^{10k}`
    pub large_order: bool,
    /// Basket size choice for the `d = 1` layer is admissible.
    pub admissible_ell: bool,
    pub conventions: Conventions,
}

impl BoundReport {
    pub fn ratio(&self, id: BoundId) -> f64 {
        self.ratios.get(&id).copied().unwrap_or(0.0)
    }

    pub fn value(&self, id: BoundId) -> f64 {
        self.values.get(&id).copied().unwrap_or(0.0)
    }
}

/// Build a report from an already evaluated `W`.
pub fn report_for(spec: &SumSpec, exact: f64) -> Result<BoundReport> {
    let kernel = spec.kernel();
    let ctx = kernel.context();
    let (size_x, size_y) = (spec.x().len() as u64, spec.y().len() as u64);
    let (p, order, k) = (ctx.p(), kernel.order(), spec.k());
    let params = BoundParams {
        size_x: size_x as f64,
        size_y: size_y as f64,
        p: p as f64,
        order: order as f64,
        k,
    };

    let mut values = BTreeMap::new();
    let mut ratios = BTreeMap::new();
    let empty = size_x == 0 || size_y == 0;
    for id in BoundId::ALL {
        let value = if empty {
            0.0
        } else {
            evaluate_bound(id, &params)?
        };
        values.insert(id, value);
        ratios.insert(id, if value > 0.0 { exact / value } else { 0.0 });
    }

    let below_threshold = !empty && trivial_regime_check(&params)?.below_threshold;
    let lp = (p as f64).ln();
    let large_order = (order as f64).ln() > 0.5 * lp + 10.0 * k as f64 * lp.ln();

    let principal = spec
        .y()
        .elements()
        .iter()
        .filter(|&&y| crate::ring::gcd(y, ctx.group_order()) == 1)
        .count() as u64;
    let admissible_ell = principal > 0
        && spec.y().modulus() == ctx.group_order()
        && ell_choice(1, principal, kernel.cofactor(), k, ctx)?.admissible;

    Ok(BoundReport {
        p,
        order,
        k,
        size_x,
        size_y,
        exact,
        values,
        ratios,
        below_threshold,
        large_order,
        admissible_ell,
        conventions: Conventions::default(),
    })
}

/// Exact `W` for `spec` next to every catalogued bound.
pub fn compare_all(spec: &SumSpec) -> Result<BoundReport> {
    report_for(spec, spec.w_sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sums::complete_sum;
    use crate::sums::{AdditiveCharacter, Gamma, Kernel, WeightedSubset};

    fn params(size_x: f64, size_y: f64, p: f64, order: f64, k: u32) -> BoundParams {
        BoundParams {
            size_x,
            size_y,
            p,
            order,
            k,
        }
    }

    #[test]
    fn theorem1_exponent_arithmetic() {
        for p in [101.0, 1009.0, 1e12] {
            let v = evaluate_bound(BoundId::Theorem1, &params(1.0, 1.0, p, 1.0, 1)).unwrap();
            assert!((v / p.powf(7.0 / 8.0) - 1.0).abs() < 1e-12);
        }
        assert_eq!(
            evaluate_bound(BoundId::Trivial, &params(30.0, 40.0, 101.0, 100.0, 1))
                .unwrap()
                .round(),
            1200.0
        );
    }

    #[test]
    fn gaka_is_theorem1_at_k1() {
        for (x, y, p, t) in [(10.0, 20.0, 101.0, 25.0), (500.0, 30.0, 1009.0, 1008.0)] {
            let a = evaluate_bound(BoundId::Gaka34, &params(x, y, p, t, 1)).unwrap();
            let b = evaluate_bound(BoundId::Theorem1, &params(x, y, p, t, 1)).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_parameters_rejected() {
        assert!(evaluate_bound(BoundId::Theorem1, &params(0.0, 1.0, 101.0, 1.0, 1)).is_err());
        assert!(evaluate_bound(BoundId::Theorem1, &params(1.0, 1.0, 1.0, 1.0, 1)).is_err());
        assert!(evaluate_bound(BoundId::Theorem1, &params(1.0, 1.0, 101.0, -2.0, 1)).is_err());
        assert!(evaluate_bound(BoundId::Theorem1, &params(1.0, 1.0, 101.0, 2.0, 0)).is_err());
    }

    #[test]
    fn large_p_does_not_overflow() {
        let p = ((1u64 << 61) - 1) as f64;
        for id in BoundId::ALL {
            let v = evaluate_bound(id, &params(p - 1.0, p - 1.0, p, p - 1.0, 3)).unwrap();
            assert!(v.is_finite() && v > 0.0, "{id}");
        }
    }

    #[test]
    fn weil_examples() {
        let ctx = PrimeContext::new(7).unwrap();
        let b = weil_bound_sparse(&ctx, &[1, 2], 1, 1).unwrap();
        assert!((b - 2.0 * 7f64.sqrt()).abs() < 1e-12);
        assert!((b - 5.2915).abs() < 1e-4);
        let chi = AdditiveCharacter::new(7, 1).unwrap();
        assert!(complete_sum(&ctx, &chi, &[1, 2], 1, 1).unwrap().norm() <= b);
        assert!(weil_bound_sparse(&ctx, &[3], 1, 1).is_err());
        assert!(weil_bound_sparse(&ctx, &[3, 3], 1, 1).is_err());
    }

    #[test]
    fn trivial_regime_examples() {
        let above = trivial_regime_check(&params(100.0, 100.0, 101.0, 100.0, 1)).unwrap();
        assert!(!above.below_threshold);

        for k in 1..=5 {
            for (x, y) in [(1.0, 1.0), (100.0, 100.0), (100.0, 3.0), (50.0, 20.0)] {
                let r = trivial_regime_check(&params(x, y, 101.0, 1.0, k)).unwrap();
                assert!(r.below_threshold, "k={k} x={x} y={y}");
                assert!(r.chain_holds);
                assert!(r.bound_value >= r.trivial_value);
            }
        }

        let r = trivial_regime_check(&params(1.0, 1.0, 101.0, 100.0, 1)).unwrap();
        assert!((r.bound_value - 101f64.powf(0.875) / 100f64.powf(0.25)).abs() < 1e-9);
        assert_eq!(r.trivial_value, 1.0);
    }

    #[test]
    fn threshold_values() {
        assert!((nontriviality_threshold(1).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((nontriviality_threshold(1000).unwrap() - 0.75).abs() < 1e-3);
        let seq: Vec<f64> = (1..=50)
            .map(|k| nontriviality_threshold(k).unwrap())
            .collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
        assert!(seq.iter().all(|&a| a > 0.75 && a <= 5.0 / 6.0 + 1e-15));
    }

    #[test]
    fn best_k_scan() {
        assert_eq!(best_k(10.0, 10.0, 101.0, 100.0, 1).unwrap().0, 1);
        let p: f64 = 1e6;
        let s = p.powf(0.9);
        let (k, v) = best_k(s, s, p, p - 1.0, 10).unwrap();
        let scan: Vec<f64> = (1..=10)
            .map(|k| evaluate_bound(BoundId::Theorem1, &params(s, s, p, p - 1.0, k)).unwrap())
            .collect();
        let min = scan.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(v, min);
        assert_eq!(scan[k as usize - 1], min);
        assert!(best_k(1.0, 1.0, 101.0, 1.0, 0).is_err());
    }

    #[test]
    fn compare_all_reports() {
        let kern = Kernel::new(PrimeContext::new(101).unwrap(), 100, 1).unwrap();
        let full = WeightedSubset::full(100, Gamma::Ones).unwrap();
        let spec = SumSpec::new(kern.clone(), full.clone(), full.clone(), 1).unwrap();
        let report = compare_all(&spec).unwrap();
        assert!(report.exact <= report.value(BoundId::Trivial));
        for id in BoundId::ALL {
            let r = report.ratio(id);
            assert!((r - report.exact / report.value(id)).abs() <= 1e-12 * r.abs().max(1.0));
        }
        assert_eq!(report.conventions.log_base, "natural");

        let empty =
            SumSpec::new(kern, WeightedSubset::ones(100, vec![]).unwrap(), full, 1).unwrap();
        let report = compare_all(&empty).unwrap();
        assert_eq!(report.exact, 0.0);
        assert!(report.ratios.values().all(|&r| r == 0.0));
    }
}
