//! The combinatorial objects behind the layer estimate: gcd layers, prime
//! baskets, the `uv = y` re-parametrisation, counting identities, the choice
//! of basket size, and the lift of `Z_T` sets to `Z_{p-1}`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::accum::ComplexAccumulator;
use crate::error::{Error, Result};
use crate::ring::{gcd, inv_mod, mul_mod, pow, PrimeContext};
use crate::sums::{Gamma, Kernel, SumSpec, WeightedSubset};

/// Elements `y` of `Y` with `gcd(y, p-1) = d`, stored as `y / d`.
///
/// Every stored element is a unit of `Z_{(p-1)/d}`. The element `0` goes to
/// `d = p - 1` and is stored as `0 in Z_1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcdLayer {
    d: u64,
    modulus: u64,
    elements: Vec<u64>,
}

impl GcdLayer {
    /// A layer from explicit residues of `Z_modulus`, all of which must be
    /// units.
    pub fn new(d: u64, modulus: u64, mut elements: Vec<u64>) -> Result<Self> {
        if d == 0 || modulus == 0 {
            return Err(Error::ZeroInput("layer divisor and modulus"));
        }
        elements.sort_unstable();
        elements.dedup();
        for &y in &elements {
            if y >= modulus || gcd(y, modulus) != 1 {
                return Err(Error::NotUnit { value: y, modulus });
            }
        }
        Ok(Self {
            d,
            modulus,
            elements,
        })
    }

    pub fn d(&self) -> u64 {
        self.d
    }

    /// `(p-1)/d`.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// The indicator `delta(y)`, with `y` reduced modulo `(p-1)/d`.
    pub fn contains(&self, y: u64) -> bool {
        self.elements.binary_search(&(y % self.modulus)).is_ok()
    }

    /// `|U_d| = phi((p-1)/d)`.
    pub fn unit_count(&self) -> u64 {
        crate::ring::euler_phi(self.modulus)
    }

    /// Original elements `d * y` of `Y`.
    pub fn reconstruct(&self) -> impl Iterator<Item = u64> + '_ {
        self.elements.iter().map(move |&y| self.d * y)
    }
}

/// Split `Y ⊆ Z_{p-1}` by `gcd(y, p-1)`. Only nonempty layers appear.
pub fn gcd_decompose(y: &WeightedSubset, ctx: &PrimeContext) -> Result<BTreeMap<u64, GcdLayer>> {
    let n = ctx.group_order();
    if y.modulus() != n {
        return Err(Error::InvalidSet(format!(
            "decomposition needs a subset of Z_{n}, got Z_{}",
            y.modulus()
        )));
    }
    let mut buckets: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for &e in y.elements() {
        let d = gcd(e, n);
        buckets.entry(d).or_default().push(e / d);
    }
    buckets
        .into_iter()
        .map(|(d, elems)| Ok((d, GcdLayer::new(d, n / d, elems)?)))
        .collect()
}

/// The first `ell` primes coprime to `modulus`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeBasket {
    modulus: u64,
    primes: Vec<u64>,
}

impl PrimeBasket {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn ell(&self) -> usize {
        self.primes.len()
    }

    pub fn max(&self) -> u64 {
        self.primes.last().copied().unwrap_or(0)
    }
}

fn sieve(limit: usize) -> Vec<u64> {
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

pub fn build_prime_basket(modulus: u64, ell: usize) -> Result<PrimeBasket> {
    if modulus == 0 {
        return Err(Error::ZeroInput("basket modulus"));
    }
    if ell == 0 {
        return Err(Error::ZeroInput("basket size"));
    }
    // a modulus below 2^64 has at most 15 distinct prime factors
    let wanted = (ell + 16) as f64;
    let mut limit = (wanted * (wanted.ln() + wanted.ln().ln()).max(2.0)) as usize + 64;
    loop {
        let primes: Vec<u64> = sieve(limit)
            .into_iter()
            .filter(|&q| !modulus.is_multiple_of(q))
            .take(ell)
            .collect();
        if primes.len() == ell {
            return Ok(PrimeBasket { modulus, primes });
        }
        limit *= 2;
    }
}

fn units(modulus: u64) -> impl Iterator<Item = u64> {
    (0..modulus).filter(move |&u| gcd(u, modulus) == 1)
}

/// Number of pairs `(u, v)`, `u` a unit of `Z_modulus` and `v` in the basket,
/// with `uv = y (mod modulus)`.
///
/// For each `v` the congruence pins `u = y v^{-1}`, which is a unit because
/// `y` is, so the count is always the basket size.
pub fn count_congruence_solutions(y: u64, basket: &PrimeBasket, modulus: u64) -> Result<u64> {
    if modulus == 0 {
        return Err(Error::ZeroInput("congruence modulus"));
    }
    let y = y % modulus;
    if gcd(y, modulus) != 1 {
        return Err(Error::NotUnit { value: y, modulus });
    }
    let mut count = 0;
    for &v in basket.primes() {
        if let Some(v_inv) = inv_mod(v % modulus, modulus) {
            let u = mul_mod(y, v_inv, modulus);
            debug_assert_eq!(mul_mod(u, v, modulus), y);
            if gcd(u, modulus) == 1 {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn check_same_modulus(layer: &GcdLayer, basket: &PrimeBasket) -> Result<()> {
    if layer.modulus() != basket.modulus() {
        return Err(Error::Domain(format!(
            "layer lives in Z_{} but basket was built for modulus {}",
            layer.modulus(),
            basket.modulus()
        )));
    }
    Ok(())
}

/// Both sides of
/// `sum_{y in L_d} gamma(dy) e_p(a g^{tdxy}) = (1/|V|) sum_{u in U_d} sum_{v in V} gamma(duv) delta(uv) e_p(a g^{tdxuv})`.
pub fn uv_representation_check(
    kernel: &Kernel,
    layer: &GcdLayer,
    basket: &PrimeBasket,
    gamma: &Gamma,
    x: u64,
) -> Result<(Complex64, Complex64)> {
    check_same_modulus(layer, basket)?;
    let ctx = kernel.context();
    let (p, n) = (ctx.p(), ctx.group_order() as u128);
    let (d, m) = (layer.d(), layer.modulus());
    // g^{t d x}; raising it to y or uv only depends on the exponent mod m
    let base = pow(
        ctx.generator(),
        (kernel.cofactor() as u128 * d as u128 * x as u128 % n) as u64,
        p,
    );
    let chi = kernel.character();
    let phase = |y: u64| chi.at(pow(base, y, p));

    let lhs: ComplexAccumulator = layer
        .elements()
        .iter()
        .map(|&y| gamma.at(d * y) * phase(y))
        .collect();
    if layer.is_empty() {
        return Ok((lhs.value(), Complex64::new(0.0, 0.0)));
    }

    let mut rhs = ComplexAccumulator::new();
    for u in units(m) {
        for &v in basket.primes() {
            let uv = mul_mod(u, v, m);
            if layer.contains(uv) {
                rhs.add(gamma.at(d * uv) * phase(uv));
            }
        }
    }
    Ok((lhs.value(), rhs.value() / basket.ell() as f64))
}

/// `(sum_{u in U_d} sum_{v in V} delta(uv), |V| |L_d|)`.
pub fn counting_identity_check(layer: &GcdLayer, basket: &PrimeBasket) -> Result<(u64, u64)> {
    check_same_modulus(layer, basket)?;
    let m = layer.modulus();
    let lhs = units(m)
        .map(|u| {
            basket
                .primes()
                .iter()
                .filter(|&&v| layer.contains(mul_mod(u, v, m)))
                .count() as u64
        })
        .sum();
    Ok((lhs, basket.ell() as u64 * layer.len() as u64))
}

/// Whether `{g^{nx} : x in Z_{p-1}}` and `{z^d : z in Z_p^*}` agree as
/// multisets, `d = gcd(n, p-1)`.
pub fn residue_system_check(n: u64, ctx: &PrimeContext) -> Result<bool> {
    let (p, order) = (ctx.p(), ctx.group_order());
    if n == 0 || n > order {
        return Err(Error::OutOfRange {
            what: "n",
            value: n as u128,
            limit: order as u128,
        });
    }
    let d = gcd(n, order);
    let mut counts = vec![0i64; p as usize];
    let step = pow(ctx.generator(), n, p);
    let mut cur = 1 % p;
    for _ in 0..order {
        counts[cur as usize] += 1;
        cur = mul_mod(cur, step, p);
    }
    for z in 1..p {
        counts[pow(z, d, p) as usize] -= 1;
    }
    Ok(counts.iter().all(|&c| c == 0))
}

/// Why a basket size was or was not admissible.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllDiagnostics {
    pub log_p: f64,
    /// `p^{(2k+1)/(2k+2)}`
    pub upper: f64,
    /// `log p < ell < p^{(2k+1)/(2k+2)}`
    pub ell_in_window: bool,
    /// `T p^{-1/2} (log p)^{-4k}`
    pub d_limit: f64,
    pub d_below_limit: bool,
    /// `(log p)^{3/2} < raw < p^{(2k+1)/(2k+2)}`
    pub raw_in_window: bool,
}

impl fmt::Display for EllDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |ok: bool| if ok { "ok" } else { "FAILS" };
        write!(
            f,
            "ell window (log p = {:.4}, upper = {:.4}): {}; d < {:.6e}: {}",
            self.log_p,
            self.upper,
            mark(self.ell_in_window),
            self.d_limit,
            mark(self.d_below_limit)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllChoice {
    /// Floor of `raw`.
    pub ell: u64,
    /// `p^{(2k+1)/(2k+2)} / (d |L_d|^{k/(k+1)} t^{1/(k+1)} (log p)^{1/(k+1)})`
    pub raw: f64,
    pub admissible: bool,
    pub diagnostics: EllDiagnostics,
}

/// Basket size for a layer of `layer_size` elements at divisor `d`. All
/// logarithms are natural.
pub fn ell_choice(
    d: u64,
    layer_size: u64,
    t: u64,
    k: u32,
    ctx: &PrimeContext,
) -> Result<EllChoice> {
    if layer_size == 0 {
        return Err(Error::ZeroInput("layer size"));
    }
    if k == 0 {
        return Err(Error::ZeroInput("k"));
    }
    if d == 0 || t == 0 {
        return Err(Error::ZeroInput("d and t"));
    }
    let p = ctx.p() as f64;
    let order = ctx.group_order() as f64 / t as f64;
    let kf = k as f64;
    let log_p = p.ln();
    let ln_raw = (2.0 * kf + 1.0) / (2.0 * kf + 2.0) * log_p
        - (d as f64).ln()
        - kf / (kf + 1.0) * (layer_size as f64).ln()
        - (t as f64).ln() / (kf + 1.0)
        - log_p.ln() / (kf + 1.0);
    let raw = ln_raw.exp();
    let ell = raw.floor().max(0.0) as u64;
    let upper = ((2.0 * kf + 1.0) / (2.0 * kf + 2.0) * log_p).exp();
    let d_limit = order * p.powf(-0.5) * log_p.powf(-4.0 * kf);
    let ell_in_window = log_p < ell as f64 && (ell as f64) < upper;
    let d_below_limit = (d as f64) < d_limit;
    let diagnostics = EllDiagnostics {
        log_p,
        upper,
        ell_in_window,
        d_limit,
        d_below_limit,
        raw_in_window: log_p.powf(1.5) < raw && raw < upper,
    };
    Ok(EllChoice {
        ell,
        raw,
        admissible: ell_in_window && d_below_limit,
        diagnostics,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftResult {
    pub lifted: Vec<u64>,
    /// `(p-1)/T`
    pub copies: u64,
}

/// `{x + rT mod (p-1) : x in base, 1 <= r <= (p-1)/T}`.
pub fn lift_set(base: &[u64], order: u64, ctx: &PrimeContext) -> Result<LiftResult> {
    let n = ctx.group_order();
    if !ctx.divides_group_order(order) {
        return Err(Error::NotDivisor {
            divisor: order,
            of: n,
        });
    }
    if let Some(&bad) = base.iter().find(|&&x| x >= order) {
        return Err(Error::InvalidSet(format!("{bad} is not in Z_{order}")));
    }
    let copies = n / order;
    let mut lifted: Vec<u64> = base
        .iter()
        .flat_map(|&x| (1..=copies).map(move |r| (x + r * order) % n))
        .collect();
    lifted.sort_unstable();
    lifted.dedup();
    Ok(LiftResult { lifted, copies })
}

/// `(W over the lifted sets, W over the base sets)`; the first is
/// `((p-1)/T)^2` times the second.
///
/// `y_base.gamma()` is read as a function on `Z_{p-1}` and must be constant
/// on every fibre `y + T Z`.
pub fn lift_identity_check(
    kernel: &Kernel,
    x_base: &WeightedSubset,
    y_base: &WeightedSubset,
    k: u32,
) -> Result<(f64, f64)> {
    let order = kernel.order();
    let ctx = kernel.context();
    if x_base.modulus() != order || y_base.modulus() != order {
        return Err(Error::InvalidSet(format!(
            "base sets must live in Z_{order}"
        )));
    }
    let gamma = y_base.gamma();
    let x_lift = lift_set(x_base.elements(), order, ctx)?;
    let y_lift = lift_set(y_base.elements(), order, ctx)?;
    for &y in &y_lift.lifted {
        if gamma.at(y) != gamma.at(y % order) {
            return Err(Error::Domain(format!(
                "gamma is not constant on the fibre of {} (differs at {y})",
                y % order
            )));
        }
    }
    let n = ctx.group_order();
    let lifted = SumSpec::new(
        kernel.clone(),
        WeightedSubset::ones(n, x_lift.lifted)?,
        WeightedSubset::new(n, y_lift.lifted, gamma.clone())?,
        k,
    )?;
    let base = SumSpec::new(kernel.clone(), x_base.clone(), y_base.clone(), k)?;
    Ok((lifted.w_sum(), base.w_sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sums::{r_sum, unit_root};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(p: u64) -> PrimeContext {
        PrimeContext::new(p).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let c = ctx(7);
        let layers =
            gcd_decompose(&WeightedSubset::ones(6, vec![1, 2, 3, 4]).unwrap(), &c).unwrap();
        let view: Vec<(u64, Vec<u64>)> = layers
            .iter()
            .map(|(&d, l)| (d, l.elements().to_vec()))
            .collect();
        assert_eq!(view, vec![(1, vec![1]), (2, vec![1, 2]), (3, vec![1])]);

        assert!(gcd_decompose(&WeightedSubset::ones(6, vec![]).unwrap(), &c)
            .unwrap()
            .is_empty());

        let zero = gcd_decompose(&WeightedSubset::ones(6, vec![0]).unwrap(), &c).unwrap();
        assert_eq!(zero[&6].elements(), &[0]);
        assert_eq!(zero[&6].modulus(), 1);

        assert!(gcd_decompose(&WeightedSubset::ones(3, vec![1]).unwrap(), &c).is_err());
    }

    #[test]
    fn decomposition_partitions_y() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [7u64, 13, 97, 211, 499, 1009] {
            let c = ctx(p);
            for trial in 0..5 {
                let size = rng.gen_range(0..p);
                let y = WeightedSubset::random(p - 1, size, trial, Gamma::Ones).unwrap();
                let layers = gcd_decompose(&y, &c).unwrap();
                let total: usize = layers.values().map(GcdLayer::len).sum();
                assert_eq!(total, y.len());
                let mut back: Vec<u64> = layers.values().flat_map(|l| l.reconstruct()).collect();
                back.sort_unstable();
                assert_eq!(back, y.elements());
                for layer in layers.values() {
                    assert!(layer.len() as u64 <= (y.len() as u64).min(layer.modulus()));
                }
            }
        }
    }

    #[test]
    fn basket_examples() {
        assert_eq!(build_prime_basket(15, 3).unwrap().primes(), &[2, 7, 11]);
        assert_eq!(build_prime_basket(2, 4).unwrap().primes(), &[3, 5, 7, 11]);
        assert_eq!(build_prime_basket(1, 3).unwrap().primes(), &[2, 3, 5]);
        assert!(build_prime_basket(1, 0).is_err());
        let big = build_prime_basket(2 * 3 * 5 * 7 * 11 * 13, 5000).unwrap();
        assert_eq!(big.ell(), 5000);
        assert!(big
            .primes()
            .iter()
            .all(|&q| crate::ring::is_prime(q) && gcd(q, 30030) == 1));
    }

    #[test]
    fn congruence_examples() {
        let basket = PrimeBasket {
            modulus: 5,
            primes: vec![2, 3, 7],
        };
        assert_eq!(count_congruence_solutions(1, &basket, 5).unwrap(), 3);
        assert_eq!(count_congruence_solutions(2, &basket, 5).unwrap(), 3);
        assert!(count_congruence_solutions(0, &basket, 5).is_err());
        let b6 = build_prime_basket(6, 3).unwrap();
        assert!(matches!(
            count_congruence_solutions(4, &b6, 6),
            Err(Error::NotUnit {
                value: 4,
                modulus: 6
            })
        ));
    }

    #[test]
    fn congruence_count_against_enumeration() {
        for m in 1..=60u64 {
            for ell in [1usize, 4, 9] {
                let basket = build_prime_basket(m, ell).unwrap();
                for y in units(m) {
                    let brute = units(m)
                        .flat_map(|u| basket.primes().iter().map(move |&v| (u, v)))
                        .filter(|&(u, v)| (u * v) % m == y % m)
                        .count() as u64;
                    assert_eq!(count_congruence_solutions(y, &basket, m).unwrap(), brute);
                    assert_eq!(brute, ell as u64);
                }
            }
        }
    }

    #[test]
    fn representation_examples() {
        let kern = Kernel::new(ctx(13), 12, 1).unwrap();
        let basket = build_prime_basket(6, 3).unwrap();
        let empty = GcdLayer::new(2, 6, vec![]).unwrap();
        let (l, r) = uv_representation_check(&kern, &empty, &basket, &Gamma::Ones, 1).unwrap();
        assert_eq!((l, r), (Complex64::default(), Complex64::default()));

        let layer = GcdLayer::new(2, 6, vec![1, 5]).unwrap();
        let gamma = Gamma::Seeded { seed: 17 };
        let (l, r) = uv_representation_check(&kern, &layer, &basket, &gamma, 1).unwrap();
        assert!((l - r).norm() < 1e-10);
        // lhs by hand: g = 2, t = 1, d = 2, x = 1
        let hand: Complex64 = [1u64, 5]
            .iter()
            .map(|&y| gamma.at(2 * y) * unit_root(13, pow(2, 2 * y, 13) as i128).unwrap())
            .sum();
        assert!((l - hand).norm() < 1e-12);

        let single = GcdLayer::new(2, 6, vec![5]).unwrap();
        let (l, r) = uv_representation_check(&kern, &single, &basket, &Gamma::Ones, 3).unwrap();
        let expect = unit_root(13, pow(2, (2 * 3 * 5) % 12, 13) as i128).unwrap();
        assert!((l - expect).norm() < 1e-12 && (r - expect).norm() < 1e-12);

        let wrong = build_prime_basket(12, 3).unwrap();
        assert!(uv_representation_check(&kern, &layer, &wrong, &Gamma::Ones, 1).is_err());
    }

    #[test]
    fn counting_identity_examples() {
        let basket = build_prime_basket(15, 3).unwrap();
        let empty = GcdLayer::new(1, 15, vec![]).unwrap();
        assert_eq!(counting_identity_check(&empty, &basket).unwrap(), (0, 0));
        let two = GcdLayer::new(1, 15, vec![1, 2]).unwrap();
        assert_eq!(counting_identity_check(&two, &basket).unwrap(), (6, 6));
        let full = GcdLayer::new(1, 15, units(15).collect()).unwrap();
        assert_eq!(counting_identity_check(&full, &basket).unwrap(), (24, 24));
    }

    #[test]
    fn residue_systems() {
        let c = ctx(7);
        assert!(residue_system_check(2, &c).unwrap());
        assert!(residue_system_check(5, &c).unwrap());
        assert!(residue_system_check(0, &c).is_err());
        assert!(residue_system_check(7, &c).is_err());
    }

    #[test]
    fn ell_formula() {
        let c = ctx(1009);
        let choice = ell_choice(1, 10, 1, 1, &c).unwrap();
        let expect = (1009f64.powf(0.75) / (10f64.sqrt() * 1009f64.ln().sqrt())).floor() as u64;
        assert_eq!(choice.ell, expect);
        assert_eq!(choice.ell, 21); // floor(21.5262...) from a 50-digit evaluation
        for k in [2u32, 3, 5] {
            let choice = ell_choice(1, 1, 1, k, &c).unwrap();
            assert!(!choice.admissible);
            assert!(!choice.diagnostics.d_below_limit);
            assert!(choice.diagnostics.to_string().contains("FAILS"));
        }
        assert!(ell_choice(1, 0, 1, 1, &c).is_err());
    }

    #[test]
    fn lift_examples() {
        let c = ctx(7);
        let lift = lift_set(&[1], 3, &c).unwrap();
        assert_eq!(lift.lifted, vec![1, 4]);
        assert_eq!(lift.copies, 2);
        assert_eq!(
            lift_set(&[0, 1, 2], 3, &c).unwrap().lifted,
            (0..6).collect::<Vec<_>>()
        );
        assert_eq!(lift_set(&[0, 2], 4, &ctx(13)).unwrap().lifted.len(), 6);
        assert!(lift_set(&[3], 3, &c).is_err());
        assert!(lift_set(&[1], 4, &c).is_err());
    }

    #[test]
    fn lift_identity_examples() {
        let kern = Kernel::new(ctx(7), 3, 1).unwrap();
        let x = WeightedSubset::ones(3, vec![1]).unwrap();
        let y = WeightedSubset::ones(3, vec![1, 2]).unwrap();
        let (lifted, base) = lift_identity_check(&kern, &x, &y, 1).unwrap();
        assert!((lifted - 4.0 * base).abs() <= 1e-9 * lifted.max(1.0));

        let full = Kernel::new(ctx(7), 6, 1).unwrap();
        let x6 = WeightedSubset::ones(6, vec![1, 4]).unwrap();
        let y6 = WeightedSubset::ones(6, vec![0, 3, 5]).unwrap();
        let (lifted, base) = lift_identity_check(&full, &x6, &y6, 1).unwrap();
        assert!((lifted - base).abs() < 1e-12);

        let empty = WeightedSubset::ones(3, vec![]).unwrap();
        assert_eq!(
            lift_identity_check(&kern, &empty, &empty, 1).unwrap(),
            (0.0, 0.0)
        );

        let rough = y.clone().with_gamma(Gamma::Seeded { seed: 1 }).unwrap();
        assert!(lift_identity_check(&kern, &x, &rough, 1).is_err());
        let periodic = y
            .with_gamma(Gamma::Periodic {
                period: 3,
                inner: Box::new(Gamma::Seeded { seed: 1 }),
            })
            .unwrap();
        let (lifted, base) = lift_identity_check(&kern, &x, &periodic, 1).unwrap();
        assert!((lifted - 4.0 * base).abs() <= 1e-9 * lifted.max(1.0));
    }

    #[test]
    fn decomposition_bounds_w() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..10 {
            let p = [101u64, 211, 499][trial % 3];
            let c = ctx(p);
            let order = c.divisors()[rng.gen_range(0..c.tau())];
            let kern = Kernel::new(c.clone(), order, rng.gen_range(1..p)).unwrap();
            let gamma = Gamma::Seeded { seed: trial as u64 };
            let x = WeightedSubset::random(p - 1, 20, trial as u64, Gamma::Ones).unwrap();
            let y = WeightedSubset::random(p - 1, 40, 100 + trial as u64, gamma.clone()).unwrap();
            let w = SumSpec::new(kern.clone(), x.clone(), y.clone(), 1)
                .unwrap()
                .w_sum();
            let bound: f64 = gcd_decompose(&y, &c)
                .unwrap()
                .values()
                .map(|l| r_sum(&kern, l.d(), &x, l.elements(), &gamma).unwrap())
                .sum();
            assert!(w <= bound + 1e-6, "{w} > {bound}");
        }
    }
}
