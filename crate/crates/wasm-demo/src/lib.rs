//! Three browser-facing operations over `expsum-core`. Each has a plain Rust
//! form returning a serialisable value and a `wasm_bindgen` wrapper returning
//! the same value as a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use expsum_core::bounds::{best_k, evaluate_bound, nontriviality_threshold};
use expsum_core::proof::{build_prime_basket, ell_choice, gcd_decompose};
use expsum_core::{BoundId, BoundParams, Gamma, Kernel, PrimeContext, SumSpec, WeightedSubset};

/// Largest prime the profile view accepts; keeps one evaluation well under a
/// second in the browser.
pub const PROFILE_LIMIT: u64 = 20_000;

#[derive(Debug, Serialize)]
pub struct Profile {
    pub p: u64,
    pub order: u64,
    pub lambda: u64,
    pub size_y: usize,
    /// `|inner_sum(x)|` for `x = 0, 1, ..., p - 2`.
    pub magnitudes: Vec<f64>,
    pub w: f64,
    pub trivial: f64,
    pub sqrt_p: f64,
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// `|sum_{y in Y} e_p(a lambda^{xy})|` for every `x`, with `Y` a seeded random
/// subset of `Z_{p-1}` of size `size_y` and `lambda` of order `order`.
pub fn inner_profile(
    p: u64,
    order: u64,
    a: u64,
    size_y: u64,
    seed: u64,
) -> Result<Profile, String> {
    if p > PROFILE_LIMIT {
        return Err(format!("p must be at most {PROFILE_LIMIT} in the demo"));
    }
    let ctx = PrimeContext::new(p).map_err(err)?;
    let n = ctx.group_order();
    let kernel = Kernel::new(ctx, order, a).map_err(err)?;
    let lambda = kernel.lambda();
    let x = WeightedSubset::full(n, Gamma::Ones).map_err(err)?;
    let y = WeightedSubset::random(n, size_y.min(n), seed, Gamma::Ones).map_err(err)?;
    let size_y = y.len();
    let spec = SumSpec::new(kernel, x, y, 1).map_err(err)?;
    let magnitudes: Vec<f64> = spec.inner_sums().iter().map(|z| z.norm()).collect();
    Ok(Profile {
        p,
        order,
        lambda,
        size_y,
        w: magnitudes.iter().sum(),
        magnitudes,
        trivial: (n as f64) * size_y as f64,
        sqrt_p: (p as f64).sqrt(),
    })
}

#[derive(Debug, Serialize)]
pub struct Curves {
    pub k: Vec<u32>,
    /// bound name -> value at each `k`
    pub series: Vec<(String, Vec<f64>)>,
    pub best_k: u32,
    pub best_value: f64,
    /// Nontriviality exponent `alpha(k)` at each `k`.
    pub thresholds: Vec<f64>,
}

/// Every catalogued bound as a function of `k = 1..=k_max` for fixed sizes.
pub fn bound_curves(
    size_x: f64,
    size_y: f64,
    p: f64,
    order: f64,
    k_max: u32,
) -> Result<Curves, String> {
    if k_max == 0 || k_max > 200 {
        return Err("k_max must lie in 1..=200".into());
    }
    let ks: Vec<u32> = (1..=k_max).collect();
    let mut series = Vec::new();
    for id in BoundId::ALL {
        let values = ks
            .iter()
            .map(|&k| {
                let params = BoundParams {
                    size_x,
                    size_y,
                    p,
                    order,
                    k,
                };
                evaluate_bound(id, &params)
            })
            .collect::<Result<Vec<f64>, _>>()
            .map_err(err)?;
        series.push((id.name().to_string(), values));
    }
    let (best_k, best_value) = best_k(size_x, size_y, p, order, k_max).map_err(err)?;
    let thresholds = ks
        .iter()
        .map(|&k| nontriviality_threshold(k))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(err)?;
    Ok(Curves {
        k: ks,
        series,
        best_k,
        best_value,
        thresholds,
    })
}

#[derive(Debug, Serialize)]
pub struct LayerSummary {
    pub d: u64,
    pub modulus: u64,
    pub size: usize,
    pub ell: u64,
    pub raw_ell: f64,
    pub admissible: bool,
    pub diagnostics: String,
    pub basket: Vec<u64>,
}

/// gcd layers of a seeded random `Y` of size `size_y`, each with its basket
/// size choice for the given `k` and the basket itself.
pub fn layers(
    p: u64,
    order: u64,
    size_y: u64,
    seed: u64,
    k: u32,
) -> Result<Vec<LayerSummary>, String> {
    let ctx = PrimeContext::new(p).map_err(err)?;
    let n = ctx.group_order();
    if !ctx.divides_group_order(order) {
        return Err(format!("T = {order} does not divide p - 1 = {n}"));
    }
    let t = n / order;
    let y = WeightedSubset::random(n, size_y.min(n), seed, Gamma::Ones).map_err(err)?;
    let mut out = Vec::new();
    for (d, layer) in gcd_decompose(&y, &ctx).map_err(err)? {
        let choice = ell_choice(d, layer.len() as u64, t, k, &ctx).map_err(err)?;
        let basket =
            build_prime_basket(layer.modulus(), choice.ell.clamp(1, 64) as usize).map_err(err)?;
        out.push(LayerSummary {
            d,
            modulus: layer.modulus(),
            size: layer.len(),
            ell: choice.ell,
            raw_ell: choice.raw,
            admissible: choice.admissible,
            diagnostics: choice.diagnostics.to_string(),
            basket: basket.primes().to_vec(),
        });
    }
    Ok(out)
}

fn to_js<T: Serialize>(value: Result<T, String>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = innerProfile)]
pub fn inner_profile_js(
    p: u32,
    order: u32,
    a: u32,
    size_y: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(inner_profile(
        p as u64,
        order as u64,
        a as u64,
        size_y as u64,
        seed as u64,
    ))
}

#[wasm_bindgen(js_name = boundCurves)]
pub fn bound_curves_js(
    size_x: f64,
    size_y: f64,
    p: f64,
    order: f64,
    k_max: u32,
) -> Result<String, JsError> {
    to_js(bound_curves(size_x, size_y, p, order, k_max))
}

#[wasm_bindgen(js_name = gcdLayers)]
pub fn layers_js(p: u32, order: u32, size_y: u32, seed: u32, k: u32) -> Result<String, JsError> {
    to_js(layers(
        p as u64,
        order as u64,
        size_y as u64,
        seed as u64,
        k,
    ))
}
