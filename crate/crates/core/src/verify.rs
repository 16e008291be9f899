//! Executable form of every stated invariant, at two scales.
//!
//! Each check enumerates its corpus, stops at the first violation and
//! reports it as a counterexample. Reference values come from small naive
//! oracles kept in this module, not from the optimised evaluation paths.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    evaluate_bound, nontriviality_threshold, trivial_regime_check, weil_bound_sparse, BoundId,
    BoundParams,
};
use crate::experiment::{parse_config, run_experiment, write_csv};
use crate::proof::{
    build_prime_basket, count_congruence_solutions, gcd_decompose, lift_identity_check,
    residue_system_check, uv_representation_check, GcdLayer,
};
use crate::ring::{euler_phi, factorize, gcd, is_prime, pow_mod, PrimeContext};
use crate::sums::{
    collapse_exponents, complete_sum, complete_sum_direct, moment, r_sum, unit_root,
    AdditiveCharacter, Gamma, Kernel, SumSpec, WeightedSubset,
};
use crate::Complex64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Smoke,
    Full,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "full" => Ok(Scale::Full),
            other => Err(format!("unknown scale `{other}` (expected smoke or full)")),
        }
    }
}

impl Scale {
    fn pick<T>(self, smoke: T, full: T) -> T {
        match self {
            Scale::Smoke => smoke,
            Scale::Full => full,
        }
    }
}

/// Deliberate defects for mutation-testing the suite itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Apply the Weil bound to degenerate tuples as well.
    IncludeDegenerateTuples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub module: String,
    pub id: String,
    pub passed: bool,
    pub cases: u64,
    pub counterexample: Option<String>,
    /// Reported quantity for checks that measure rather than assert.
    pub note: Option<String>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub scale: Scale,
    pub fault: Option<Fault>,
    pub outcomes: Vec<CheckOutcome>,
}

impl VerificationSummary {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

impl fmt::Display for VerificationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            let status = if o.passed { "ok  " } else { "FAIL" };
            write!(
                f,
                "{status} {:<7} {:<28} {:>9} cases {:>9.1} ms",
                o.module, o.id, o.cases, o.elapsed_ms
            )?;
            if let Some(note) = &o.note {
                write!(f, "  [{note}]")?;
            }
            writeln!(f)?;
            if let Some(c) = &o.counterexample {
                writeln!(f, "     counterexample: {c}")?;
            }
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.outcomes.len(), failed)
    }
}

/// Result of one check body: number of cases, first violation, note.
#[derive(Default)]
struct Tally {
    cases: u64,
    counterexample: Option<String>,
    note: Option<String>,
}

impl Tally {
    fn case(&mut self) {
        self.cases += 1;
    }

    /// Record a violation; returns `true` when the check should stop.
    fn fail(&mut self, msg: String) -> bool {
        self.counterexample.get_or_insert(msg);
        true
    }
}

type CheckFn = fn(Scale, Option<Fault>, &mut Tally) -> crate::Result<()>;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("ring", "element_order", check_element_order),
    ("ring", "pow_mod_repeated", check_pow_mod),
    ("ring", "phi_divisor_sum", check_phi_sum),
    ("ring", "factorize_reconstruct", check_factorize),
    ("sums", "unit_root_periodic", check_unit_root),
    ("sums", "oracle_equivalence", check_oracle),
    ("sums", "trivial_bound", check_trivial_bound),
    ("sums", "conjugate_twist", check_conjugate),
    ("sums", "permutation_invariance", check_permutation),
    ("sums", "degenerate_tuples", check_degenerate),
    ("sums", "moment_expansion", check_moment),
    ("proof", "partition", check_partition),
    ("proof", "congruence_count", check_congruence),
    ("proof", "representation", check_representation),
    ("proof", "decomposition", check_decomposition),
    ("proof", "residue_system", check_residue_system),
    ("proof", "lift_identity", check_lift),
    ("proof", "basket_growth", check_basket_growth),
    ("bounds", "theorem1_cor1", check_cor1),
    ("bounds", "cor2_lift", check_cor2),
    ("bounds", "weil", check_weil),
    ("bounds", "threshold_range", check_threshold),
    ("bounds", "trivial_regime", check_trivial_regime),
    ("cli", "config_round_trip", check_config_round_trip),
    ("cli", "csv_determinism", check_csv_determinism),
];

/// Identifiers of every check, as `module/id`.
pub fn check_ids() -> Vec<String> {
    CHECKS
        .iter()
        .map(|(m, id, _)| format!("{m}/{id}"))
        .collect()
}

pub fn run_verification_suite(scale: Scale, fault: Option<Fault>) -> VerificationSummary {
    run_selected(scale, fault, |_| true)
}

/// Run only the checks whose `module/id` satisfies `select`.
pub fn run_selected(
    scale: Scale,
    fault: Option<Fault>,
    select: impl Fn(&str) -> bool,
) -> VerificationSummary {
    let outcomes = CHECKS
        .iter()
        .filter(|(m, id, _)| select(&format!("{m}/{id}")))
        .map(|&(module, id, check)| {
            let started = Instant::now();
            let mut tally = Tally::default();
            if let Err(e) = check(scale, fault, &mut tally) {
                tally.fail(format!("error: {e}"));
            }
            CheckOutcome {
                module: module.into(),
                id: id.into(),
                passed: tally.counterexample.is_none(),
                cases: tally.cases,
                counterexample: tally.counterexample,
                note: tally.note,
                elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect();
    VerificationSummary {
        scale,
        fault,
        outcomes,
    }
}

fn primes_up_to(n: u64) -> impl Iterator<Item = u64> {
    (2..=n).filter(|&q| is_prime(q))
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ tag)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn random_prime(r: &mut impl Rng, lo: u64, hi: u64) -> u64 {
    loop {
        let q = r.gen_range(lo..=hi);
        if is_prime(q) {
            return q;
        }
    }
}

fn random_gamma(r: &mut impl Rng) -> Gamma {
    match r.gen_range(0..3) {
        0 => Gamma::Ones,
        1 => Gamma::Seeded { seed: r.gen() },
        _ => Gamma::Explicit(
            (0..1200u64)
                .map(|y| {
                    (
                        y,
                        Complex64::from_polar(r.gen_range(0.0..1.0), r.gen_range(0.0..6.3)),
                    )
                })
                .collect(),
        ),
    }
}

fn random_subset(
    r: &mut impl Rng,
    modulus: u64,
    max: u64,
    gamma: Gamma,
) -> crate::Result<WeightedSubset> {
    let size = r.gen_range(0..=max.min(modulus));
    WeightedSubset::random(modulus, size, r.gen(), gamma)
}

fn random_divisor(r: &mut impl Rng, ctx: &PrimeContext) -> u64 {
    *ctx.divisors().choose(r).expect("p - 1 has divisors")
}

/// `W` by the definition: angles from exact integer residues, plain sums.
fn naive_w(p: u64, lambda: u64, a: u64, xs: &[u64], ys: &WeightedSubset) -> f64 {
    let mut total = 0.0;
    for &x in xs {
        let mut inner = Complex64::new(0.0, 0.0);
        for &y in ys.elements() {
            let e = (x as u128 * y as u128 % (p as u128 - 1)) as u64;
            let r = (a as u128 * pow_mod(lambda, e, p).unwrap() as u128 % p as u128) as f64;
            inner += ys.coefficient(y)
                * Complex64::from_polar(1.0, std::f64::consts::TAU * r / p as f64);
        }
        total += inner.norm();
    }
    total
}

// ---- ring -----------------------------------------------------------------

fn check_element_order(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for p in primes_up_to(211) {
        let ctx = PrimeContext::new(p)?;
        for &order in ctx.divisors() {
            t.case();
            let e = ctx.element_of_order(order)?;
            if ctx.multiplicative_order(e.lambda)? != order {
                t.fail(format!("p={p} T={order} lambda={}", e.lambda));
                return Ok(());
            }
        }
    }
    Ok(())
}

fn check_pow_mod(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for m in 1..=100u64 {
        for b in 0..=100u64 {
            let mut acc = 1 % m;
            for e in 0..=50u64 {
                t.case();
                if pow_mod(b, e, m)? != acc {
                    t.fail(format!("b={b} e={e} m={m}"));
                    return Ok(());
                }
                acc = acc * (b % m) % m;
            }
        }
    }
    Ok(())
}

fn check_phi_sum(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for p in primes_up_to(211) {
        t.case();
        let ctx = PrimeContext::new(p)?;
        let n = ctx.group_order();
        let total: u64 = ctx.divisors().iter().map(|&d| euler_phi(d)).sum();
        if total != n {
            t.fail(format!("n={n}: sum phi(d) = {total}"));
            return Ok(());
        }
    }
    Ok(())
}

fn check_factorize(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for n in 1..=scale.pick(100_000u64, 1_000_000) {
        t.case();
        let f = factorize(n)?;
        let back: u64 = f.iter().map(|&(q, e)| q.pow(e)).product();
        if back != n || f.iter().any(|&(q, _)| !is_prime(q)) {
            t.fail(format!("n={n}: {f:?}"));
            return Ok(());
        }
    }
    Ok(())
}

// ---- sums -----------------------------------------------------------------

fn check_unit_root(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for m in 1..=scale.pick(64u64, 256) {
        for z in -(2 * m as i128)..(2 * m as i128) {
            t.case();
            let w = unit_root(m, z)?;
            if (w.norm() - 1.0).abs() > 1e-15 || unit_root(m, z + m as i128)? != w {
                t.fail(format!("m={m} z={z}"));
                return Ok(());
            }
        }
    }
    Ok(())
}

fn random_spec(r: &mut impl Rng, primes: &[u64], max_size: u64) -> crate::Result<SumSpec> {
    let p = *primes.choose(r).unwrap();
    let ctx = PrimeContext::new(p)?;
    let order = random_divisor(r, &ctx);
    let a = r.gen_range(1..p);
    let n = ctx.group_order();
    let x = random_subset(r, n, max_size, Gamma::Ones)?;
    let gamma = random_gamma(r);
    let y = random_subset(r, n, max_size, gamma)?;
    SumSpec::new(Kernel::new(ctx, order, a)?, x, y, 1)
}

fn describe(spec: &SumSpec) -> String {
    format!(
        "p={} T={} a={} X={:?} Y={:?}",
        spec.kernel().p(),
        spec.kernel().order(),
        spec.kernel().a(),
        spec.x().elements(),
        spec.y().elements()
    )
}

fn check_oracle(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(1);
    for _ in 0..scale.pick(20, 50) {
        t.case();
        let spec = random_spec(&mut r, &[101, 499, 1009], 50)?;
        let k = spec.kernel();
        let w = spec.w_sum();
        let naive = naive_w(k.p(), k.lambda(), k.a(), spec.x().elements(), spec.y());
        if !rel_close(w, naive, 1e-9) {
            t.fail(format!("{}: w={w} naive={naive}", describe(&spec)));
            return Ok(());
        }
    }
    Ok(())
}

fn check_trivial_bound(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(2);
    for _ in 0..scale.pick(50, 200) {
        t.case();
        let spec = random_spec(&mut r, &[2, 3, 7, 101, 499], 120)?;
        let w = spec.w_sum();
        let trivial = (spec.x().len() * spec.y().len()) as f64;
        if !(w >= 0.0 && w <= trivial * (1.0 + 1e-9)) {
            t.fail(format!("{}: w={w} > {trivial}", describe(&spec)));
            return Ok(());
        }
    }
    Ok(())
}

fn check_conjugate(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(3);
    for _ in 0..scale.pick(30, 100) {
        t.case();
        let spec = random_spec(&mut r, &[5, 13, 101, 211, 499], 60)?;
        let k = spec.kernel();
        let y = spec.y().clone().with_gamma(Gamma::Ones)?;
        let plus = SumSpec::new(
            Kernel::new(k.context().clone(), k.order(), k.a())?,
            spec.x().clone(),
            y.clone(),
            1,
        )?;
        let minus = SumSpec::new(
            Kernel::new(k.context().clone(), k.order(), k.p() - k.a())?,
            spec.x().clone(),
            y,
            1,
        )?;
        let (a, b) = (plus.w_sum(), minus.w_sum());
        if !rel_close(a, b, 1e-9) {
            t.fail(format!("{}: {a} vs {b}", describe(&plus)));
            return Ok(());
        }
    }
    Ok(())
}

fn check_permutation(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(4);
    for _ in 0..scale.pick(20, 60) {
        t.case();
        let spec = random_spec(&mut r, &[101, 211, 499], 80)?;
        let k = spec.kernel();
        let mut xs = spec.x().elements().to_vec();
        xs.shuffle(&mut r);
        // the oracle sums in the shuffled order, the engine in sorted order
        let shuffled = naive_w(k.p(), k.lambda(), k.a(), &xs, spec.y());
        let w = spec.w_sum();
        if !rel_close(w, shuffled, 1e-9) {
            t.fail(format!("{}: {w} vs {shuffled}", describe(&spec)));
            return Ok(());
        }
    }
    Ok(())
}

/// Every tuple of length `2k` over `basket`, in odometer order.
fn for_each_tuple(basket: &[u64], k: usize, mut f: impl FnMut(&[u64]) -> bool) {
    let r = basket.len();
    let mut idx = vec![0usize; 2 * k];
    let mut v = vec![0u64; 2 * k];
    loop {
        for (slot, &i) in v.iter_mut().zip(&idx) {
            *slot = basket[i];
        }
        if f(&v) {
            return;
        }
        let mut pos = 2 * k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < r {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// `(ctx, t, d, basket)`
type TupleSetting = (PrimeContext, u64, u64, Vec<u64>);

/// A setting for every prime up to `max_p`, every `T | p-1` and `d in {1, 2}`
/// dividing `p - 1`.
fn tuple_settings(max_p: u64, ell: usize) -> crate::Result<Vec<TupleSetting>> {
    let mut out = Vec::new();
    for p in primes_up_to(max_p) {
        let ctx = PrimeContext::new(p)?;
        let n = ctx.group_order();
        for d in [1, 2].into_iter().filter(|d| n % d == 0) {
            let basket = build_prime_basket(n / d, ell)?.primes().to_vec();
            for &order in ctx.divisors() {
                out.push((ctx.clone(), n / order, d, basket.clone()));
            }
        }
    }
    Ok(out)
}

fn check_degenerate(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for (ctx, tt, d, basket) in tuple_settings(scale.pick(31, 101), 4)? {
        let chi = AdditiveCharacter::new(ctx.p(), 1)?;
        let target = ctx.group_order() as f64;
        for k in 1..=3 {
            let mut err = None;
            for_each_tuple(&basket, k, |v| {
                let c = match collapse_exponents(&ctx, v, tt, d) {
                    Ok(c) => c,
                    Err(e) => {
                        err = Some(e);
                        return true;
                    }
                };
                if !c.is_degenerate() {
                    return false;
                }
                t.case();
                match complete_sum_direct(&ctx, &chi, v, tt, d) {
                    Ok(s) if (s - Complex64::new(target, 0.0)).norm() <= 1e-6 => false,
                    Ok(s) => t.fail(format!("p={} t={tt} d={d} v={v:?}: S={s}", ctx.p())),
                    Err(e) => {
                        err = Some(e);
                        true
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            if t.counterexample.is_some() {
                return Ok(());
            }
        }
    }
    Ok(())
}

fn random_layer(r: &mut impl Rng, ctx: &PrimeContext, max_size: u64) -> crate::Result<GcdLayer> {
    loop {
        let y = random_subset(r, ctx.group_order(), max_size, Gamma::Ones)?;
        let layers = gcd_decompose(&y, ctx)?;
        let candidates: Vec<&GcdLayer> = layers.values().filter(|l| l.modulus() > 1).collect();
        if let Some(layer) = candidates.choose(r) {
            return Ok((*layer).clone());
        }
    }
}

fn random_unit(r: &mut impl Rng, m: u64) -> u64 {
    loop {
        let u = r.gen_range(0..m);
        if gcd(u, m) == 1 {
            return u;
        }
    }
}

fn check_moment(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(5);
    for _ in 0..scale.pick(20, 80) {
        t.case();
        let p = random_prime(&mut r, 5, 61);
        let ctx = PrimeContext::new(p)?;
        let layer = random_layer(&mut r, &ctx, 30)?;
        let basket = build_prime_basket(layer.modulus(), r.gen_range(1..=3))?;
        let gamma = random_gamma(&mut r);
        let order = random_divisor(&mut r, &ctx);
        let u = random_unit(&mut r, layer.modulus());
        let chi = AdditiveCharacter::new(p, r.gen_range(1..p))?;
        let k = r.gen_range(1..=2);
        if let Err(e) = moment(
            &ctx,
            &chi,
            &layer,
            basket.primes(),
            &gamma,
            u,
            ctx.group_order() / order,
            k,
        ) {
            t.fail(format!(
                "p={p} d={} u={u} k={k} basket={:?}: {e}",
                layer.d(),
                basket.primes()
            ));
            return Ok(());
        }
    }
    Ok(())
}

// ---- proof ----------------------------------------------------------------

fn check_partition(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(6);
    for p in primes_up_to(scale.pick(211, 1009)) {
        let ctx = PrimeContext::new(p)?;
        t.case();
        let y = random_subset(&mut r, ctx.group_order(), p, Gamma::Ones)?;
        let layers = gcd_decompose(&y, &ctx)?;
        let total: usize = layers.values().map(|l| l.len()).sum();
        let mut back: Vec<u64> = layers.values().flat_map(|l| l.reconstruct()).collect();
        back.sort_unstable();
        if total != y.len() || back != y.elements() {
            t.fail(format!("p={p} Y={:?}", y.elements()));
            return Ok(());
        }
    }
    Ok(())
}

fn check_congruence(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let max_ell = scale.pick(10, 20);
    for m in 1..=scale.pick(60u64, 210) {
        for ell in 1..=max_ell {
            let basket = build_prime_basket(m, ell)?;
            // counts by enumeration of all (u, v)
            let mut counts = vec![0u64; m as usize];
            for u in (0..m).filter(|&u| gcd(u, m) == 1) {
                for &v in basket.primes() {
                    counts[(u as u128 * v as u128 % m as u128) as usize] += 1;
                }
            }
            for y in (0..m).filter(|&y| gcd(y, m) == 1) {
                t.case();
                let fast = count_congruence_solutions(y, &basket, m)?;
                if fast != ell as u64 || counts[y as usize] != ell as u64 {
                    t.fail(format!(
                        "m={m} ell={ell} y={y}: count={fast} enumerated={}",
                        counts[y as usize]
                    ));
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

fn check_representation(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(7);
    for _ in 0..scale.pick(30, 100) {
        t.case();
        let p = random_prime(&mut r, 3, scale.pick(211, 499));
        let ctx = PrimeContext::new(p)?;
        let order = random_divisor(&mut r, &ctx);
        let kernel = Kernel::new(ctx.clone(), order, r.gen_range(1..p))?;
        let layer = random_layer(&mut r, &ctx, 60)?;
        let basket = build_prime_basket(layer.modulus(), r.gen_range(1..=6))?;
        let gamma = random_gamma(&mut r);
        let x = r.gen_range(0..ctx.group_order());
        let (lhs, rhs) = uv_representation_check(&kernel, &layer, &basket, &gamma, x)?;
        if (lhs - rhs).norm() > 1e-9 * lhs.norm().max(rhs.norm()).max(1.0) {
            t.fail(format!(
                "p={p} T={order} d={} x={x}: {lhs} vs {rhs}",
                layer.d()
            ));
            return Ok(());
        }
    }
    Ok(())
}

fn check_decomposition(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(8);
    for _ in 0..scale.pick(30, 100) {
        t.case();
        let p = random_prime(&mut r, 3, 499);
        let ctx = PrimeContext::new(p)?;
        let order = random_divisor(&mut r, &ctx);
        let kernel = Kernel::new(ctx.clone(), order, r.gen_range(1..p))?;
        let n = ctx.group_order();
        let xs = random_subset(&mut r, n, 80, Gamma::Ones)?;
        let gamma = random_gamma(&mut r);
        let ys = random_subset(&mut r, n, 80, gamma)?;
        let layers = gcd_decompose(&ys, &ctx)?;
        let parts: usize = layers.values().map(|l| l.len()).sum();
        let mut bound = 0.0;
        for layer in layers.values() {
            bound += r_sum(&kernel, layer.d(), &xs, layer.elements(), ys.gamma())?;
        }
        let w = SumSpec::new(kernel, xs, ys.clone(), 1)?.w_sum();
        if w > bound + 1e-6 || parts != ys.len() {
            t.fail(format!(
                "p={p} T={order}: w={w} sum r={bound} layers={parts}/{}",
                ys.len()
            ));
            return Ok(());
        }
    }
    Ok(())
}

fn check_residue_system(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for p in primes_up_to(101) {
        let ctx = PrimeContext::new(p)?;
        for n in 1..=ctx.group_order() {
            t.case();
            if !residue_system_check(n, &ctx)? {
                t.fail(format!("p={p} n={n}"));
                return Ok(());
            }
        }
    }
    Ok(())
}

fn check_lift(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(9);
    let primes: Vec<u64> = match scale {
        Scale::Smoke => vec![7, 13, 31, 101],
        Scale::Full => primes_up_to(101).collect(),
    };
    for p in primes {
        let ctx = PrimeContext::new(p)?;
        for &order in ctx.divisors() {
            t.case();
            let kernel = Kernel::new(ctx.clone(), order, r.gen_range(1..p))?;
            let gamma = match r.gen_range(0..2) {
                0 => Gamma::Ones,
                _ => Gamma::Periodic {
                    period: order,
                    inner: Box::new(Gamma::Seeded { seed: r.gen() }),
                },
            };
            let x = random_subset(&mut r, order, 20, Gamma::Ones)?;
            let y = random_subset(&mut r, order, 20, gamma)?;
            let k = r.gen_range(1..p.min(4)) as u32;
            let (lifted, base) = lift_identity_check(&kernel, &x, &y, k)?;
            let copies = (ctx.group_order() / order) as f64;
            if !rel_close(lifted, copies * copies * base, 1e-9) {
                t.fail(format!(
                    "p={p} T={order} X={:?} Y={:?}: {lifted} vs {copies}^2 * {base}",
                    x.elements(),
                    y.elements()
                ));
                return Ok(());
            }
        }
    }
    Ok(())
}

fn check_basket_growth(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut worst: f64 = 0.0;
    for m in 2..=scale.pick(210u64, 2000) {
        for ell in [1usize, 5, 20, 50] {
            t.case();
            let b = build_prime_basket(m, ell)?;
            let scale = ell as f64 * ((ell as u64 * m) as f64).ln().max(1.0);
            worst = worst.max(b.max() as f64 / scale);
        }
    }
    t.note = Some(format!("max(V) / (ell log(ell m)) <= {worst:.3}"));
    Ok(())
}

// ---- bounds ---------------------------------------------------------------

fn random_params(r: &mut impl Rng, k_max: u32) -> BoundParams {
    let p = r.gen_range(3.0f64..1e15).floor();
    BoundParams {
        size_x: r.gen_range(1.0..p),
        size_y: r.gen_range(1.0..p),
        p,
        order: r.gen_range(1.0..p),
        k: r.gen_range(1..=k_max),
    }
}

fn check_cor1(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(10);
    for _ in 0..scale.pick(100, 1000) {
        t.case();
        let mut b = random_params(&mut r, 10);
        b.order = b.p - 1.0;
        let (main, cor) = (
            evaluate_bound(BoundId::Theorem1, &b)?,
            evaluate_bound(BoundId::Cor1, &b)?,
        );
        if (main - cor).abs() > 1e-12 * main.abs().max(cor.abs()) {
            t.fail(format!("{b:?}: {main} vs {cor}"));
            return Ok(());
        }
    }
    Ok(())
}

fn check_cor2(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(11);
    for _ in 0..scale.pick(100, 1000) {
        t.case();
        let b = random_params(&mut r, 10);
        let copies = (b.p - 1.0) / b.order;
        let lifted = BoundParams {
            size_x: b.size_x * copies,
            size_y: b.size_y * copies,
            ..b
        };
        let via_main = evaluate_bound(BoundId::Theorem1, &lifted)? / (copies * copies);
        let cor = evaluate_bound(BoundId::Cor2, &b)?;
        if !rel_close(via_main, cor, 1e-9) {
            t.fail(format!("{b:?}: {via_main} vs {cor}"));
            return Ok(());
        }
    }
    Ok(())
}

fn check_weil(scale: Scale, fault: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let include_degenerate = fault == Some(Fault::IncludeDegenerateTuples);
    for (ctx, tt, d, basket) in tuple_settings(scale.pick(61, 211), 5)? {
        let chi = AdditiveCharacter::new(ctx.p(), 1)?;
        let sqrt_p = (ctx.p() as f64).sqrt();
        for k in 1..=2 {
            let mut err = None;
            for_each_tuple(&basket, k, |v| {
                let result = (|| -> crate::Result<Option<(f64, f64)>> {
                    let c = collapse_exponents(&ctx, v, tt, d)?;
                    let bound = if c.is_degenerate() {
                        if !include_degenerate {
                            return Ok(None);
                        }
                        c.unreduced_degree as f64 * sqrt_p
                    } else {
                        weil_bound_sparse(&ctx, v, tt, d)?
                    };
                    Ok(Some((complete_sum(&ctx, &chi, v, tt, d)?.norm(), bound)))
                })();
                match result {
                    Ok(None) => false,
                    Ok(Some((s, bound))) => {
                        t.case();
                        s > bound
                            && t.fail(format!(
                                "p={} t={tt} d={d} v={v:?}: |S|={s:.6} > {bound:.6}",
                                ctx.p()
                            ))
                    }
                    Err(e) => {
                        err = Some(e);
                        true
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            if t.counterexample.is_some() {
                return Ok(());
            }
        }
    }
    Ok(())
}

fn check_threshold(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    for k in 1..=1000u32 {
        t.case();
        let alpha = nontriviality_threshold(k)?;
        let closed = (3.0 * k as f64 + 2.0) / (4.0 * k as f64 + 2.0);
        if !(alpha > 0.75 && alpha <= 5.0 / 6.0 + 1e-15) || (alpha - closed).abs() > 1e-12 {
            t.fail(format!("k={k}: alpha={alpha}"));
            return Ok(());
        }
    }
    Ok(())
}

fn check_trivial_regime(scale: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let mut r = rng(12);
    let target = scale.pick(200, 1000);
    let mut attempts = 0u64;
    while t.cases < target {
        attempts += 1;
        let mut b = random_params(&mut r, 10);
        b.size_x = b.size_x.min(b.p - 1.0);
        // log-uniform T and |Y| keep enough draws below the threshold
        b.order = b.order.powf(r.gen_range(0.0..1.0));
        b.size_y = b.size_y.powf(r.gen_range(0.0..1.0));
        let regime = trivial_regime_check(&b)?;
        if !regime.below_threshold {
            continue;
        }
        t.case();
        if !regime.chain_holds {
            t.fail(format!(
                "{b:?}: {} < {}",
                regime.bound_value, regime.trivial_value
            ));
            return Ok(());
        }
    }
    t.note = Some(format!("{attempts} draws"));
    Ok(())
}

// ---- cli ------------------------------------------------------------------

fn check_config_round_trip(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let texts = [
        r#"{"p":101}"#,
        r#"{"p":499,"T":"max","a":4,"k":[2],"x":{"interval":[3,90]},"y":{"list":[1,5,9]}}"#,
        r#"{"p":101,"gamma":{"random":{"seed":3}},"sweep":{"p":[101,211],"densities":[0.5],"T":[10,"max"]},"seed":9}"#,
    ];
    for text in texts {
        t.case();
        let c = parse_config(text).map_err(|e| crate::Error::Domain(e.to_string()))?;
        let record = run_experiment(&c).map_err(|e| crate::Error::Domain(e.to_string()))?;
        let back = parse_config(&record.config.to_json())
            .map_err(|e| crate::Error::Domain(e.to_string()))?;
        if back != c {
            t.fail(text.to_string());
            return Ok(());
        }
    }
    Ok(())
}

fn check_csv_determinism(_: Scale, _: Option<Fault>, t: &mut Tally) -> crate::Result<()> {
    let text = r#"{"p":101,"k":[1,2],"sweep":{"p":[101,211],"densities":[0.75,1.0]},"seed":5}"#;
    let render = |threads: usize| -> crate::Result<Vec<u8>> {
        let mut c = parse_config(text).map_err(|e| crate::Error::Domain(e.to_string()))?;
        c.threads = threads;
        let record = run_experiment(&c).map_err(|e| crate::Error::Domain(e.to_string()))?;
        let mut buf = Vec::new();
        write_csv(&record, &mut buf).map_err(|e| crate::Error::Domain(e.to_string()))?;
        Ok(buf)
    };
    let first = render(1)?;
    for threads in [1, 2, 3] {
        t.case();
        if render(threads)? != first {
            t.fail(format!("CSV differs at {threads} threads"));
            return Ok(());
        }
    }
    Ok(())
}
