//! Exact evaluation of the exponential sums: the additive character
//! `e_m(z)`, the double sum `W`, the layer sums `R_d`, complete sums over
//! `Z_p^*` of sparse polynomials in `z`, and the `2k`-th moments `M_u`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accum::{sum_chunks, ComplexAccumulator};
use crate::error::{Error, Result};
use crate::proof::GcdLayer;
use crate::ring::{gcd, mul_mod, pow, OrderedElement, PrimeContext};

/// Slack allowed on `|gamma(n)| <= 1`.
pub const GAMMA_SLACK: f64 = 1e-12;

/// Relative tolerance for the moment identity (direct vs tuple expansion).
pub const MOMENT_TOLERANCE: f64 = 1e-6;

const PHASE_TABLE_LIMIT: u64 = 1 << 20;
const X_CHUNK: u64 = 8;
const UNIT_CHUNK: u64 = 4096;

/// `e_m(r) = exp(2 pi i r / m)` for `0 <= r < m`.
///
/// The angle is split into an exact quarter-turn count and a remainder in
/// `[0, pi/2)`, so axis points come out exact.
fn unit_root_reduced(m: u64, r: u64) -> Complex64 {
    let scaled = 4 * r as u128;
    let quadrant = (scaled / m as u128) as u8;
    let rem = (scaled % m as u128) as f64;
    let (s, c) = (FRAC_PI_2 * rem / m as f64).sin_cos();
    match quadrant {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    }
}

/// `e_m(z) = exp(2 pi i z / m)`, with `z` reduced modulo `m` first.
pub fn unit_root(m: u64, z: i128) -> Result<Complex64> {
    if m == 0 {
        return Err(Error::ZeroInput("unit_root modulus"));
    }
    Ok(unit_root_reduced(m, z.rem_euclid(m as i128) as u64))
}

/// The additive character `c -> e_p(a c)` on `Z_p`, tabulated for small `p`.
#[derive(Clone, Debug)]
pub struct AdditiveCharacter {
    p: u64,
    a: u64,
    table: Option<Arc<[Complex64]>>,
}

impl AdditiveCharacter {
    pub fn new(p: u64, a: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::ZeroInput("character modulus"));
        }
        let a = a % p;
        if gcd(a, p) != 1 {
            return Err(Error::NotUnit {
                value: a,
                modulus: p,
            });
        }
        let table = (p <= PHASE_TABLE_LIMIT).then(|| {
            (0..p)
                .map(|c| unit_root_reduced(p, mul_mod(a, c, p)))
                .collect::<Arc<[_]>>()
        });
        Ok(Self { p, a, table })
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    /// `e_p(a c)` for a residue `c < p`.
    #[inline]
    pub fn at(&self, c: u64) -> Complex64 {
        match &self.table {
            Some(t) => t[c as usize],
            None => unit_root_reduced(self.p, mul_mod(self.a, c, self.p)),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Coefficients `gamma(n)` on a residue ring, `|gamma(n)| <= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    Ones,
    /// Pseudorandom unimodular values, a pure function of `(seed, n)`.
    Seeded {
        seed: u64,
    },
    /// Listed values; residues not listed get `0`.
    Explicit(BTreeMap<u64, Complex64>),
    /// `inner` evaluated at `n mod period`.
    Periodic {
        period: u64,
        inner: Box<Gamma>,
    },
}

impl Gamma {
    #[inline]
    pub fn at(&self, n: u64) -> Complex64 {
        match self {
            Gamma::Ones => Complex64::new(1.0, 0.0),
            Gamma::Seeded { seed } => {
                let h = splitmix64(seed ^ splitmix64(n));
                let turn = (h >> 11) as f64 / (1u64 << 53) as f64;
                Complex64::from_polar(1.0, std::f64::consts::TAU * turn)
            }
            Gamma::Explicit(values) => values.get(&n).copied().unwrap_or_default(),
            Gamma::Periodic { period, inner } => inner.at(n % period),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Gamma::Ones | Gamma::Seeded { .. } => Ok(()),
            Gamma::Explicit(values) => {
                for (&at, c) in values {
                    let norm = c.norm();
                    // also rejects NaN
                    if norm.is_nan() || norm > 1.0 + GAMMA_SLACK {
                        return Err(Error::CoefficientTooLarge { at, norm });
                    }
                }
                Ok(())
            }
            Gamma::Periodic { period, inner } => {
                if *period == 0 {
                    return Err(Error::ZeroInput("gamma period"));
                }
                inner.validate()
            }
        }
    }

    pub fn is_ones(&self) -> bool {
        matches!(self, Gamma::Ones)
    }
}

/// A subset of `Z_modulus`, strictly increasing, with coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSubset {
    modulus: u64,
    elements: Vec<u64>,
    gamma: Gamma,
}

impl WeightedSubset {
    /// Sorts `elements`; duplicates and out-of-range residues are rejected.
    pub fn new(modulus: u64, mut elements: Vec<u64>, gamma: Gamma) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::ZeroInput("subset modulus"));
        }
        elements.sort_unstable();
        if let Some(&last) = elements.last() {
            if last >= modulus {
                return Err(Error::InvalidSet(format!(
                    "element {last} outside Z_{modulus}"
                )));
            }
        }
        if let Some(w) = elements.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSet(format!("duplicate element {}", w[0])));
        }
        gamma.validate()?;
        Ok(Self {
            modulus,
            elements,
            gamma,
        })
    }

    pub fn ones(modulus: u64, elements: Vec<u64>) -> Result<Self> {
        Self::new(modulus, elements, Gamma::Ones)
    }

    pub fn full(modulus: u64, gamma: Gamma) -> Result<Self> {
        Self::new(modulus, (0..modulus).collect(), gamma)
    }

    /// `[lo, hi)`.
    pub fn interval(modulus: u64, lo: u64, hi: u64, gamma: Gamma) -> Result<Self> {
        if lo > hi || hi > modulus {
            return Err(Error::InvalidSet(format!(
                "interval [{lo}, {hi}) not inside Z_{modulus}"
            )));
        }
        Self::new(modulus, (lo..hi).collect(), gamma)
    }

    /// `size` distinct residues drawn uniformly with a seeded ChaCha stream.
    pub fn random(modulus: u64, size: u64, seed: u64, gamma: Gamma) -> Result<Self> {
        if size > modulus {
            return Err(Error::InvalidSet(format!(
                "cannot draw {size} distinct residues from Z_{modulus}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = rand::seq::index::sample(&mut rng, modulus as usize, size as usize);
        Self::new(
            modulus,
            picked.into_iter().map(|i| i as u64).collect(),
            gamma,
        )
    }

    pub fn with_gamma(self, gamma: Gamma) -> Result<Self> {
        gamma.validate()?;
        Ok(Self { gamma, ..self })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, y: u64) -> bool {
        self.elements.binary_search(&y).is_ok()
    }

    #[inline]
    pub fn coefficient(&self, y: u64) -> Complex64 {
        self.gamma.at(y)
    }
}

/// Prime, element `lambda = g^t` of order `T`, and twist `a`: everything the
/// phase `e_p(a lambda^n)` depends on.
#[derive(Clone, Debug)]
pub struct Kernel {
    ctx: PrimeContext,
    element: OrderedElement,
    chi: AdditiveCharacter,
}

impl Kernel {
    pub fn new(ctx: PrimeContext, order: u64, a: u64) -> Result<Self> {
        let element = ctx.element_of_order(order)?;
        let chi = AdditiveCharacter::new(ctx.p(), a)?;
        Ok(Self { ctx, element, chi })
    }

    pub fn context(&self) -> &PrimeContext {
        &self.ctx
    }

    pub fn element(&self) -> &OrderedElement {
        &self.element
    }

    pub fn character(&self) -> &AdditiveCharacter {
        &self.chi
    }

    pub fn p(&self) -> u64 {
        self.ctx.p()
    }

    pub fn a(&self) -> u64 {
        self.chi.a()
    }

    pub fn lambda(&self) -> u64 {
        self.element.lambda
    }

    /// `T`.
    pub fn order(&self) -> u64 {
        self.element.order
    }

    /// `t = (p - 1) / T`.
    pub fn cofactor(&self) -> u64 {
        self.element.cofactor
    }
}

/// `sum_{y in ys} weight(y) e_p(a mu^y)` for increasing `ys`, stepping the
/// power incrementally between consecutive elements.
fn power_sum<W>(chi: &AdditiveCharacter, p: u64, mu: u64, ys: &[u64], weight: W) -> Complex64
where
    W: Fn(u64) -> Complex64,
{
    let mut acc = ComplexAccumulator::new();
    let (mut prev, mut cur) = (0u64, 1 % p);
    for &y in ys {
        let gap = y - prev;
        cur = match gap {
            0 => cur,
            1 => mul_mod(cur, mu, p),
            _ => mul_mod(cur, pow(mu, gap, p), p),
        };
        prev = y;
        acc.add(weight(y) * chi.at(cur));
    }
    acc.value()
}

/// Sum of `|inner(x)|` over `xs`, chunked over `x`.
fn sum_of_magnitudes<F>(xs: &[u64], inner: F) -> f64
where
    F: Fn(u64) -> Complex64 + Sync + Send,
{
    sum_chunks(xs.len() as u64, X_CHUNK, |r| {
        xs[r.start as usize..r.end as usize]
            .iter()
            .map(|&x| Complex64::new(inner(x).norm(), 0.0))
            .collect()
    })
    .value()
    .re
}

/// Inputs of the double sum `W_a(gamma; T; X, Y)`.
#[derive(Clone, Debug)]
pub struct SumSpec {
    kernel: Kernel,
    x: WeightedSubset,
    y: WeightedSubset,
    k: u32,
}

impl SumSpec {
    /// `X` and `Y` must live in the same ring, either `Z_{p-1}` or `Z_T`.
    pub fn new(kernel: Kernel, x: WeightedSubset, y: WeightedSubset, k: u32) -> Result<Self> {
        let n = kernel.ctx.group_order();
        if x.modulus != y.modulus {
            return Err(Error::InvalidSet(format!(
                "X lives in Z_{} but Y in Z_{}",
                x.modulus, y.modulus
            )));
        }
        if x.modulus != n && x.modulus != kernel.order() {
            return Err(Error::InvalidSet(format!(
                "sets must live in Z_{n} or Z_{}, not Z_{}",
                kernel.order(),
                x.modulus
            )));
        }
        if k == 0 {
            return Err(Error::ZeroInput("k"));
        }
        if kernel.p() <= k as u64 {
            return Err(Error::Domain(format!(
                "need p > k, got p = {} and k = {k}",
                kernel.p()
            )));
        }
        Ok(Self { kernel, x, y, k })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn x(&self) -> &WeightedSubset {
        &self.x
    }

    pub fn y(&self) -> &WeightedSubset {
        &self.y
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `sum_{y in Y} gamma(y) e_p(a lambda^{xy})`.
    pub fn inner_sum(&self, x: u64) -> Complex64 {
        let p = self.kernel.p();
        let mu = pow(self.kernel.lambda(), x, p);
        power_sum(&self.kernel.chi, p, mu, &self.y.elements, |y| {
            self.y.coefficient(y)
        })
    }

    /// `W = sum_{x in X} |inner_sum(x)|`.
    pub fn w_sum(&self) -> f64 {
        sum_of_magnitudes(&self.x.elements, |x| self.inner_sum(x))
    }

    /// Every inner sum, in the order of `X`.
    pub fn inner_sums(&self) -> Vec<Complex64> {
        self.x.elements.iter().map(|&x| self.inner_sum(x)).collect()
    }
}

/// `R_a(gamma; d, X, L_d) = sum_{x in X} |sum_{y in L_d} gamma(dy) e_p(a g^{tdxy})|`.
///
/// Layer elements must be increasing residues of `Z_{(p-1)/d}` coprime to
/// `(p-1)/d`.
pub fn r_sum(
    kernel: &Kernel,
    d: u64,
    xs: &WeightedSubset,
    layer: &[u64],
    gamma: &Gamma,
) -> Result<f64> {
    let ctx = &kernel.ctx;
    let n = ctx.group_order();
    if !ctx.divides_group_order(d) {
        return Err(Error::NotDivisor { divisor: d, of: n });
    }
    let m = n / d;
    for &y in layer {
        if y >= m || gcd(y, m) != 1 {
            return Err(Error::NotUnit {
                value: y,
                modulus: m,
            });
        }
    }
    if layer.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSet(
            "layer must be strictly increasing".into(),
        ));
    }
    let p = kernel.p();
    // g^{t d x y} = lambda^{d x y}
    Ok(sum_of_magnitudes(&xs.elements, |x| {
        let mu = pow(
            kernel.lambda(),
            ((d as u128 * x as u128) % n as u128) as u64,
            p,
        );
        power_sum(&kernel.chi, p, mu, layer, |y| gamma.at(d * y))
    }))
}

/// Signed sparse polynomial obtained from a `2k`-tuple `(v_1, ..., v_2k)`:
/// `sum_{i<=k} z^{t d v_i} - sum_{i>k} z^{t d v_i}` with exponents reduced
/// modulo `p - 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapsedTuple {
    /// exponent -> nonzero coefficient
    pub terms: BTreeMap<u64, i64>,
    /// First half is a permutation of the second half.
    pub permutation: bool,
    /// `t * d * max v_i`, the degree before reduction.
    pub unreduced_degree: u128,
}

impl CollapsedTuple {
    /// All coefficients cancel.
    pub fn is_degenerate(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn reduced_degree(&self) -> u64 {
        self.terms.keys().next_back().copied().unwrap_or(0)
    }

    /// Polynomial vanishes although the halves are not permutations of each
    /// other: distinct `v_i` collided modulo `p - 1`.
    pub fn has_collision(&self) -> bool {
        self.is_degenerate() != self.permutation
    }
}

fn split_tuple(v: &[u64]) -> Result<usize> {
    if v.is_empty() || !v.len().is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "tuple must have even positive length 2k, got {}",
            v.len()
        )));
    }
    Ok(v.len() / 2)
}

#[inline]
fn reduced_exponent(t: u64, d: u64, v: u64, n: u64) -> u64 {
    ((t as u128 * d as u128 * v as u128) % n as u128) as u64
}

pub fn collapse_exponents(ctx: &PrimeContext, v: &[u64], t: u64, d: u64) -> Result<CollapsedTuple> {
    let k = split_tuple(v)?;
    let n = ctx.group_order();
    let mut terms: BTreeMap<u64, i64> = BTreeMap::new();
    for (i, &vi) in v.iter().enumerate() {
        let sign = if i < k { 1 } else { -1 };
        *terms.entry(reduced_exponent(t, d, vi, n)).or_default() += sign;
    }
    terms.retain(|_, c| *c != 0);

    let (mut lhs, mut rhs) = (v[..k].to_vec(), v[k..].to_vec());
    lhs.sort_unstable();
    rhs.sort_unstable();
    let max_v = v.iter().copied().max().unwrap_or(0);
    Ok(CollapsedTuple {
        terms,
        permutation: lhs == rhs,
        unreduced_degree: t as u128 * d as u128 * max_v as u128,
    })
}

/// `sum_{z in Z_p^*} f(z^{e_1}, ..., z^{e_r})`, enumerating `z = g^j`.
fn sum_over_units<F>(ctx: &PrimeContext, exponents: &[u64], f: F) -> ComplexAccumulator
where
    F: Fn(&[u64]) -> Complex64 + Sync + Send,
{
    let p = ctx.p();
    let steps: Vec<u64> = exponents
        .iter()
        .map(|&e| pow(ctx.generator(), e, p))
        .collect();
    sum_chunks(ctx.group_order(), UNIT_CHUNK, |range| {
        let mut powers: Vec<u64> = steps.iter().map(|&s| pow(s, range.start, p)).collect();
        let mut acc = ComplexAccumulator::new();
        for _ in range {
            acc.add(f(&powers));
            for (w, &s) in powers.iter_mut().zip(&steps) {
                *w = mul_mod(*w, s, p);
            }
        }
        acc
    })
}

fn signed_residue(c: i64, p: u64) -> u64 {
    (c as i128).rem_euclid(p as i128) as u64
}

/// `S(v_1..v_2k) = sum_{z=1}^{p-1} e_p(a (z^{tdv_1} + .. + z^{tdv_k} - z^{tdv_{k+1}} - .. - z^{tdv_2k}))`.
///
/// A degenerate tuple returns exactly `p - 1`; otherwise the collapsed
/// polynomial is summed over `Z_p^*`.
pub fn complete_sum(
    ctx: &PrimeContext,
    chi: &AdditiveCharacter,
    v: &[u64],
    t: u64,
    d: u64,
) -> Result<Complex64> {
    let collapsed = collapse_exponents(ctx, v, t, d)?;
    if collapsed.is_degenerate() {
        return Ok(Complex64::new(ctx.group_order() as f64, 0.0));
    }
    let p = ctx.p();
    let (exps, coeffs): (Vec<u64>, Vec<u64>) = collapsed
        .terms
        .iter()
        .map(|(&e, &c)| (e, signed_residue(c, p)))
        .unzip();
    Ok(sum_over_units(ctx, &exps, |powers| {
        let value = powers
            .iter()
            .zip(&coeffs)
            .fold(0u64, |acc, (&w, &c)| (acc + mul_mod(w, c, p)) % p);
        chi.at(value)
    })
    .value())
}

/// The same sum term by term over all `2k` monomials, with no cancellation
/// or degeneracy shortcut.
pub fn complete_sum_direct(
    ctx: &PrimeContext,
    chi: &AdditiveCharacter,
    v: &[u64],
    t: u64,
    d: u64,
) -> Result<Complex64> {
    let k = split_tuple(v)?;
    let p = ctx.p();
    let n = ctx.group_order();
    let exps: Vec<u64> = v.iter().map(|&vi| reduced_exponent(t, d, vi, n)).collect();
    Ok(sum_over_units(ctx, &exps, |powers| {
        let plus = powers[..k].iter().fold(0u64, |acc, &w| (acc + w) % p);
        let minus = powers[k..].iter().fold(0u64, |acc, &w| (acc + w) % p);
        chi.at((plus + p - minus) % p)
    })
    .value())
}

/// Both evaluation orders of `M_u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    /// `sum_z |sum_v gamma(duv) delta(uv) e_p(a z^{tdv})|^{2k}`
    pub direct: f64,
    /// `sum_{v_1..v_2k} (prod gamma delta)(prod conj gamma delta) S(v_1..v_2k)`
    pub expanded: f64,
}

struct MomentTerms {
    /// Basket primes with `delta(uv) = 1`, and their coefficients.
    active: Vec<(u64, Complex64)>,
}

fn moment_terms(layer: &GcdLayer, basket: &[u64], gamma: &Gamma, u: u64) -> Result<MomentTerms> {
    let m = layer.modulus();
    if gcd(u % m, m) != 1 {
        return Err(Error::NotUnit {
            value: u,
            modulus: m,
        });
    }
    let active = basket
        .iter()
        .filter_map(|&v| {
            let uv = mul_mod(u, v, m);
            layer.contains(uv).then(|| (v, gamma.at(layer.d() * uv)))
        })
        .collect();
    Ok(MomentTerms { active })
}

#[allow(clippy::too_many_arguments)]
pub fn moment_direct(
    ctx: &PrimeContext,
    chi: &AdditiveCharacter,
    layer: &GcdLayer,
    basket: &[u64],
    gamma: &Gamma,
    u: u64,
    t: u64,
    k: u32,
) -> Result<f64> {
    let terms = moment_terms(layer, basket, gamma, u)?;
    if terms.active.is_empty() {
        return Ok(0.0);
    }
    let n = ctx.group_order();
    let exps: Vec<u64> = terms
        .active
        .iter()
        .map(|&(v, _)| reduced_exponent(t, layer.d(), v, n))
        .collect();
    let power = 2 * k as i32;
    Ok(sum_over_units(ctx, &exps, |powers| {
        let inner: Complex64 = powers
            .iter()
            .zip(&terms.active)
            .map(|(&w, &(_, c))| c * chi.at(w))
            .sum();
        Complex64::new(inner.norm_sqr().powi(power / 2), 0.0)
    })
    .value()
    .re)
}

#[allow(clippy::too_many_arguments)]
pub fn moment_expanded(
    ctx: &PrimeContext,
    chi: &AdditiveCharacter,
    layer: &GcdLayer,
    basket: &[u64],
    gamma: &Gamma,
    u: u64,
    t: u64,
    k: u32,
) -> Result<f64> {
    let terms = moment_terms(layer, basket, gamma, u)?;
    let r = terms.active.len();
    if r == 0 {
        return Ok(0.0);
    }
    let k = k as usize;
    let width = 2 * k;
    // S only depends on the two halves as multisets
    let mut cache: HashMap<(Vec<usize>, Vec<usize>), Complex64> = HashMap::new();
    let mut acc = ComplexAccumulator::new();
    let mut idx = vec![0usize; width];
    loop {
        let mut weight = Complex64::new(1.0, 0.0);
        for (i, &j) in idx.iter().enumerate() {
            let c = terms.active[j].1;
            weight *= if i < k { c } else { c.conj() };
        }
        let mut lhs = idx[..k].to_vec();
        let mut rhs = idx[k..].to_vec();
        lhs.sort_unstable();
        rhs.sort_unstable();
        let s = match cache.get(&(lhs.clone(), rhs.clone())) {
            Some(&s) => s,
            None => {
                let v: Vec<u64> = idx.iter().map(|&j| terms.active[j].0).collect();
                let s = complete_sum(ctx, chi, &v, t, layer.d())?;
                cache.insert((lhs, rhs), s);
                s
            }
        };
        acc.add(weight * s);

        let mut pos = width;
        loop {
            if pos == 0 {
                return Ok(acc.value().re);
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

/// `M_u` evaluated both ways; fails if the two disagree beyond
/// [`MOMENT_TOLERANCE`] (relative).
#[allow(clippy::too_many_arguments)]
pub fn moment(
    ctx: &PrimeContext,
    chi: &AdditiveCharacter,
    layer: &GcdLayer,
    basket: &[u64],
    gamma: &Gamma,
    u: u64,
    t: u64,
    k: u32,
) -> Result<Moment> {
    if k == 0 {
        return Err(Error::ZeroInput("k"));
    }
    let direct = moment_direct(ctx, chi, layer, basket, gamma, u, t, k)?;
    let expanded = moment_expanded(ctx, chi, layer, basket, gamma, u, t, k)?;
    if (direct - expanded).abs() > MOMENT_TOLERANCE * direct.abs().max(1.0) {
        return Err(Error::IdentityMismatch {
            identity: "moment tuple expansion",
            lhs: direct,
            rhs: expanded,
        });
    }
    Ok(Moment { direct, expanded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::gcd_decompose;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::TAU;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Double loop with the full exponent `x*y` and a fresh `exp` per term.
    fn naive_w(spec: &SumSpec) -> f64 {
        let k = spec.kernel();
        let (p, n) = (k.p() as u128, k.context().group_order() as u128);
        let mut total = 0.0;
        for &x in spec.x().elements() {
            let mut inner = Complex64::new(0.0, 0.0);
            for &y in spec.y().elements() {
                let e = (x as u128 * y as u128) % n;
                let c = crate::ring::pow_mod(k.lambda(), e as u64, p as u64).unwrap() as u128;
                let arg = (k.a() as u128 * c % p) as f64 / p as f64;
                inner += spec.y().coefficient(y) * Complex64::from_polar(1.0, TAU * arg);
            }
            total += inner.norm();
        }
        total
    }

    fn kernel(p: u64, order: u64, a: u64) -> Kernel {
        Kernel::new(PrimeContext::new(p).unwrap(), order, a).unwrap()
    }

    #[test]
    fn unit_root_examples() {
        assert_eq!(unit_root(5, 0).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(unit_root(4, 1).unwrap(), Complex64::new(0.0, 1.0));
        let half = unit_root(6, 3).unwrap();
        assert_eq!((half.re, half.im.abs()), (-1.0, 0.0));
        assert!(unit_root(0, 1).is_err());
        assert_eq!(unit_root(7, -1).unwrap(), unit_root(7, 6).unwrap());
    }

    proptest! {
        #[test]
        fn unit_root_is_unimodular_and_periodic(m in 1u64..1_000_000, z in -1_000_000_000i128..1_000_000_000) {
            let w = unit_root(m, z).unwrap();
            prop_assert!((w.norm() - 1.0).abs() < 1e-15);
            prop_assert_eq!(w, unit_root(m, z + m as i128).unwrap());
            let reference = Complex64::from_polar(1.0, TAU * (z.rem_euclid(m as i128) as f64) / m as f64);
            prop_assert!(close(w, reference, 1e-12));
        }
    }

    #[test]
    fn inner_sum_examples() {
        let kern = kernel(7, 6, 1);
        assert_eq!(kern.lambda(), 3);
        let y = WeightedSubset::full(6, Gamma::Ones).unwrap();
        let spec = SumSpec::new(
            kern.clone(),
            WeightedSubset::ones(6, vec![0, 1]).unwrap(),
            y,
            1,
        )
        .unwrap();
        assert!(close(spec.inner_sum(1), Complex64::new(-1.0, 0.0), 1e-12));
        let at_zero = spec.inner_sum(0);
        assert!(close(at_zero, unit_root(7, 1).unwrap() * 6.0, 1e-12));
        assert!((spec.w_sum() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn empty_x_gives_zero() {
        let kern = kernel(7, 6, 1);
        let spec = SumSpec::new(
            kern,
            WeightedSubset::ones(6, vec![]).unwrap(),
            WeightedSubset::full(6, Gamma::Ones).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(spec.w_sum(), 0.0);
    }

    #[test]
    fn random_instances_match_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20u64 {
            let p = [101, 103, 107][trial as usize % 3];
            let ctx = PrimeContext::new(p).unwrap();
            let order = ctx.divisors()[rng.gen_range(0..ctx.tau())];
            let kern = Kernel::new(ctx, order, rng.gen_range(1..p)).unwrap();
            let x = WeightedSubset::random(p - 1, 30, trial, Gamma::Ones).unwrap();
            let y = WeightedSubset::random(p - 1, 30, trial + 100, Gamma::Seeded { seed: trial })
                .unwrap();
            let spec = SumSpec::new(kern, x, y, 1).unwrap();
            let (fast, slow) = (spec.w_sum(), naive_w(&spec));
            assert!(
                (fast - slow).abs() <= 1e-9 * slow.max(1.0),
                "{fast} vs {slow}"
            );
            for &x in spec.x().elements().iter().take(3) {
                let direct: Complex64 = spec
                    .y()
                    .elements()
                    .iter()
                    .map(|&y| {
                        let c = crate::ring::pow_mod(spec.kernel().lambda(), x * y, p).unwrap();
                        spec.y().coefficient(y)
                            * unit_root(p, (spec.kernel().a() * c) as i128).unwrap()
                    })
                    .sum();
                assert!(close(spec.inner_sum(x), direct, 1e-10));
            }
        }
    }

    #[test]
    fn spec_validation() {
        let kern = kernel(7, 3, 1);
        let full = WeightedSubset::full(6, Gamma::Ones).unwrap();
        let small = WeightedSubset::full(3, Gamma::Ones).unwrap();
        assert!(SumSpec::new(kern.clone(), full.clone(), small.clone(), 1).is_err());
        assert!(SumSpec::new(kern.clone(), small.clone(), small.clone(), 1).is_ok());
        assert!(SumSpec::new(kern.clone(), full.clone(), full.clone(), 0).is_err());
        assert!(SumSpec::new(kern, full.clone(), full, 7).is_err());
        assert!(Kernel::new(PrimeContext::new(7).unwrap(), 6, 14).is_err());
    }

    #[test]
    fn subset_validation() {
        assert!(WeightedSubset::ones(6, vec![1, 1]).is_err());
        assert!(WeightedSubset::ones(6, vec![6]).is_err());
        assert_eq!(
            WeightedSubset::ones(6, vec![4, 1]).unwrap().elements(),
            &[1, 4]
        );
        let big = Gamma::Explicit(BTreeMap::from([(1, Complex64::new(1.0, 1.0))]));
        assert!(matches!(
            WeightedSubset::new(6, vec![1], big),
            Err(Error::CoefficientTooLarge { at: 1, .. })
        ));
        let edge = Gamma::Explicit(BTreeMap::from([(1, Complex64::new(1.0 + 1e-13, 0.0))]));
        assert!(WeightedSubset::new(6, vec![1], edge).is_ok());
        let r = WeightedSubset::random(1000, 50, 3, Gamma::Ones).unwrap();
        assert_eq!(r.len(), 50);
        assert_eq!(r, WeightedSubset::random(1000, 50, 3, Gamma::Ones).unwrap());
        assert!(WeightedSubset::random(10, 11, 3, Gamma::Ones).is_err());
    }

    #[test]
    fn seeded_gamma_is_unimodular() {
        let g = Gamma::Seeded { seed: 99 };
        for n in 0..1000 {
            assert!((g.at(n).norm() - 1.0).abs() < 1e-14);
        }
        assert_ne!(g.at(1), g.at(2));
    }

    #[test]
    fn conjugate_twist_has_equal_magnitude() {
        for p in [11u64, 101, 211] {
            let ctx = PrimeContext::new(p).unwrap();
            for &order in ctx.divisors() {
                let x = WeightedSubset::random(p - 1, 15.min(p - 1), order, Gamma::Ones).unwrap();
                let y =
                    WeightedSubset::random(p - 1, 25.min(p - 1), order + 1, Gamma::Ones).unwrap();
                let w1 = SumSpec::new(
                    Kernel::new(ctx.clone(), order, 3).unwrap(),
                    x.clone(),
                    y.clone(),
                    1,
                )
                .unwrap()
                .w_sum();
                let w2 = SumSpec::new(Kernel::new(ctx.clone(), order, p - 3).unwrap(), x, y, 1)
                    .unwrap()
                    .w_sum();
                assert!((w1 - w2).abs() <= 1e-9 * w1.max(1.0));
            }
        }
    }

    #[test]
    fn w_sum_is_bounded_and_order_invariant() {
        let kern = kernel(211, 42, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..10 {
            let x = WeightedSubset::random(210, 40, trial, Gamma::Ones).unwrap();
            let y =
                WeightedSubset::random(210, 60, trial + 50, Gamma::Seeded { seed: trial }).unwrap();
            let spec = SumSpec::new(kern.clone(), x.clone(), y.clone(), 1).unwrap();
            let w = spec.w_sum();
            assert!((0.0..=40.0 * 60.0 * (1.0 + 1e-9)).contains(&w));

            // reversed and shuffled insertion order
            let mut xs = x.elements().to_vec();
            let mut ys = y.elements().to_vec();
            xs.reverse();
            for i in (1..ys.len()).rev() {
                ys.swap(i, rng.gen_range(0..=i));
            }
            let shuffled = SumSpec::new(
                kern.clone(),
                WeightedSubset::ones(210, xs).unwrap(),
                WeightedSubset::new(210, ys, y.gamma().clone()).unwrap(),
                1,
            )
            .unwrap();
            assert!((shuffled.w_sum() - w).abs() <= 1e-9 * w.max(1.0));
        }
    }

    #[test]
    fn r_sum_examples() {
        let kern = kernel(13, 12, 2);
        let xs = WeightedSubset::random(12, 7, 5, Gamma::Ones).unwrap();
        // singleton layer: every inner sum is unimodular
        let r = r_sum(&kern, 2, &xs, &[5], &Gamma::Seeded { seed: 4 }).unwrap();
        assert!((r - 7.0).abs() < 1e-12);

        // d = 1 and L_1 = Y coincides with W when Y is all units
        let units: Vec<u64> = (0..12).filter(|&y| gcd(y, 12) == 1).collect();
        let y = WeightedSubset::ones(12, units.clone()).unwrap();
        let spec = SumSpec::new(kern.clone(), xs.clone(), y, 1).unwrap();
        let r1 = r_sum(&kern, 1, &xs, &units, &Gamma::Ones).unwrap();
        assert!((r1 - spec.w_sum()).abs() < 1e-12);

        // d = 2 against direct evaluation
        let layer = [1u64, 5];
        let gamma = Gamma::Seeded { seed: 11 };
        let r2 = r_sum(&kern, 2, &xs, &layer, &gamma).unwrap();
        let (g, t) = (kern.context().generator(), kern.cofactor());
        let direct: f64 = xs
            .elements()
            .iter()
            .map(|&x| {
                layer
                    .iter()
                    .map(|&y| {
                        let c = crate::ring::pow_mod(g, (t * 2 * x * y) % 12, 13).unwrap();
                        gamma.at(2 * y) * unit_root(13, (2 * c) as i128).unwrap()
                    })
                    .sum::<Complex64>()
                    .norm()
            })
            .sum();
        assert!((r2 - direct).abs() < 1e-10);

        assert!(matches!(
            r_sum(&kern, 2, &xs, &[2], &Gamma::Ones),
            Err(Error::NotUnit {
                value: 2,
                modulus: 6
            })
        ));
        assert!(r_sum(&kern, 5, &xs, &[1], &Gamma::Ones).is_err());
    }

    #[test]
    fn collapse_examples() {
        let ctx = PrimeContext::new(101).unwrap();
        let c = collapse_exponents(&ctx, &[2, 2], 1, 1).unwrap();
        assert!(c.is_degenerate() && c.permutation);
        let c = collapse_exponents(&ctx, &[1, 2], 1, 1).unwrap();
        assert_eq!(c.terms, BTreeMap::from([(1, 1), (2, -1)]));
        let c = collapse_exponents(&ctx, &[1, 2, 2, 3], 1, 1).unwrap();
        assert_eq!(c.terms, BTreeMap::from([(1, 1), (3, -1)]));
        assert_eq!(c.unreduced_degree, 3);
        assert!(collapse_exponents(&ctx, &[3], 1, 1).is_err());
        // 2 and 52 collide modulo 100 once multiplied by t = 50
        let c = collapse_exponents(&ctx, &[2, 52], 50, 1).unwrap();
        assert!(c.is_degenerate() && !c.permutation && c.has_collision());
    }

    #[test]
    fn complete_sum_examples() {
        let ctx = PrimeContext::new(7).unwrap();
        let chi = AdditiveCharacter::new(7, 1).unwrap();
        // brute force over z = 1..6 of e_7(z - z^2)
        let brute: Complex64 = (1..7u64)
            .map(|z| unit_root(7, z as i128 - (z * z) as i128).unwrap())
            .sum();
        let s = complete_sum(&ctx, &chi, &[1, 2], 1, 1).unwrap();
        assert!(close(s, brute, 1e-12));
        assert!(s.norm() <= 2.0 * 7f64.sqrt());
        assert_eq!(
            complete_sum(&ctx, &chi, &[1, 1], 1, 1).unwrap(),
            Complex64::new(6.0, 0.0)
        );
        assert!(close(
            complete_sum_direct(&ctx, &chi, &[1, 1], 1, 1).unwrap(),
            Complex64::new(6.0, 0.0),
            1e-12
        ));
    }

    #[test]
    fn complete_sum_paths_agree() {
        for p in [11u64, 13, 31] {
            let ctx = PrimeContext::new(p).unwrap();
            let chi = AdditiveCharacter::new(p, 3).unwrap();
            for v in [[2u64, 3, 5, 7], [2, 2, 3, 5], [3, 5, 5, 3], [7, 11, 2, 2]] {
                for &t in ctx.divisors() {
                    let a = complete_sum(&ctx, &chi, &v, t, 1).unwrap();
                    let b = complete_sum_direct(&ctx, &chi, &v, t, 1).unwrap();
                    assert!(close(a, b, 1e-9), "p={p} v={v:?} t={t}");
                }
            }
        }
    }

    #[test]
    fn moment_examples() {
        let ctx = PrimeContext::new(13).unwrap();
        let chi = AdditiveCharacter::new(13, 1).unwrap();
        let y = WeightedSubset::ones(12, vec![1, 5, 7]).unwrap();
        let layers = gcd_decompose(&y, &ctx).unwrap();
        let layer = &layers[&1];

        // basket avoids the layer entirely under u = 1: {2, 3}
        let m = moment(&ctx, &chi, layer, &[2, 3], &Gamma::Ones, 1, 1, 1).unwrap();
        assert_eq!(
            m,
            Moment {
                direct: 0.0,
                expanded: 0.0
            }
        );

        // single active prime: |e_p(.)|^{2k} = 1 for each z
        let m = moment(&ctx, &chi, layer, &[5], &Gamma::Ones, 1, 1, 2).unwrap();
        assert!((m.direct - 12.0).abs() < 1e-9 && (m.expanded - 12.0).abs() < 1e-9);

        // three primes, two evaluation orders
        let layer = &gcd_decompose(&WeightedSubset::ones(12, vec![1, 5, 7, 11]).unwrap(), &ctx)
            .unwrap()[&1];
        for k in 1..=2 {
            for u in [1u64, 5, 7, 11] {
                let m = moment(
                    &ctx,
                    &chi,
                    layer,
                    &[5, 7, 11],
                    &Gamma::Seeded { seed: u },
                    u,
                    1,
                    k,
                )
                .unwrap();
                assert!((m.direct - m.expanded).abs() <= 1e-6 * m.direct.max(1.0));
            }
        }
        assert!(moment(&ctx, &chi, layer, &[5], &Gamma::Ones, 2, 1, 1).is_err());
    }
}
