//! Pool choice between two fee tiers under multiplicative repricing shocks.
//!
//! Providers post a price band around the current value; a shock of size δ
//! (with √(1+δ) uniform on [1, Δ]) draws arbitrage or private-value flow
//! whose optimal trade size has a closed form. Per unit of liquidity, fees
//! earn a yield 𝓛(f), informed flow imposes a net adverse-selection cost
//! 𝓐(f) (net of the fees that flow itself pays), and refilling a depleted
//! band costs gas Γ, giving the expected rebalance cost 𝓒(f). A provider
//! endowed with q tokens earns π_k(q) = q[(1−η)𝓛(f_k) − η𝓐(f_k)] − η𝓒(f_k)
//! in pool k; since π_L − π_H is affine and increasing in q, the market
//! splits at a marginal endowment q_t: smaller providers sit in the high-fee
//! pool, larger ones in the low-fee pool.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{numerics, ModelError, Result};

/// Parameters of the two-tier shock model.
///
/// `delta_big` (Δ) scales shocks: √(1+δ) is uniform on [1, Δ]. `r` is the
/// half-width of the posted band `[v/(1+r)², v(1+r)²]`. `eta` is the
/// probability a shock is common-value (informed) rather than private.
/// Endowments are exponential with scale `lambda_endow`. `gamma_big` (Γ) is
/// the gas cost of one rebalancing interaction.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeModelParams {
    pub v: f64,
    pub eta: f64,
    pub lambda_endow: f64,
    pub ell: f64,
    pub h: f64,
    pub r: f64,
    #[serde(rename = "Delta")]
    pub delta_big: f64,
    #[serde(rename = "Gamma")]
    pub gamma_big: f64,
}

impl Default for RangeModelParams {
    fn default() -> Self {
        let r = 0.001;
        let h = 2.0;
        RangeModelParams {
            v: 1.0,
            eta: 0.1,
            lambda_endow: 1.0,
            ell: 1.0,
            h,
            r,
            delta_big: 1.1 * (1.0 + r) * (1.0 + h).sqrt(),
            gamma_big: 20.0,
        }
    }
}

impl RangeModelParams {
    /// Validate raw fields, the shock-scale assumption Δ > (1+r)√(1+h), and
    /// the viability assumption η < min_k 𝓛(f_k)/(𝓛(f_k)+𝓐(f_k)).
    /// Assumption violations are reported as infeasible, never patched.
    pub fn validate(&self) -> Result<()> {
        for (name, val) in [
            ("v", self.v),
            ("eta", self.eta),
            ("lambda_endow", self.lambda_endow),
            ("ell", self.ell),
            ("h", self.h),
            ("r", self.r),
            ("Delta", self.delta_big),
            ("Gamma", self.gamma_big),
        ] {
            if !val.is_finite() {
                return Err(ModelError::param(name, "must be finite"));
            }
        }
        if !(self.v > 0.0) {
            return Err(ModelError::param("v", "token value must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(ModelError::param("eta", "need 0 < eta < 1"));
        }
        if !(self.lambda_endow > 0.0) {
            return Err(ModelError::param("lambda_endow", "endowment scale must be positive"));
        }
        if !(self.ell >= 0.0) {
            return Err(ModelError::param("ell", "fee must be >= 0"));
        }
        if self.ell > self.h {
            return Err(ModelError::param("ell", "need ell <= h"));
        }
        if !(self.r >= 0.0) {
            return Err(ModelError::param("r", "band half-width must be >= 0"));
        }
        if !(self.gamma_big >= 0.0) {
            return Err(ModelError::param("Gamma", "gas cost must be >= 0"));
        }
        if !(self.delta_big > 1.0) {
            return Err(ModelError::param("Delta", "shock scale must exceed 1"));
        }
        let need = (1.0 + self.r) * (1.0 + self.h).sqrt();
        if self.delta_big <= need {
            return Err(ModelError::Infeasible(format!(
                "shock scale too small: Delta = {} must exceed (1+r)*sqrt(1+h) = {need}",
                self.delta_big
            )));
        }
        for fee in [self.ell, self.h] {
            let ly = liquidity_yield(fee, self)?;
            let asc = adverse_selection(fee, self)?;
            let bound = ly / (ly + asc);
            if !(self.eta < bound) {
                return Err(ModelError::Infeasible(format!(
                    "eta = {} makes the fee-{fee} pool unviable: need eta < L/(L+A) = {bound}",
                    self.eta
                )));
            }
        }
        Ok(())
    }

    /// Largest shock in the support, Δ² − 1.
    pub fn shock_max(&self) -> f64 {
        self.delta_big * self.delta_big - 1.0
    }
}

/// Guard the closed-form fee domain: √(1+f)(1+r) ≤ Δ, i.e. the band edge of
/// a fee-f pool stays inside the shock support.
fn validate_fee(fee: f64, params: &RangeModelParams) -> Result<()> {
    if !(fee >= 0.0) || !fee.is_finite() {
        return Err(ModelError::param("fee", "fee must be >= 0 and finite"));
    }
    if (1.0 + fee).sqrt() * (1.0 + params.r) > params.delta_big {
        return Err(ModelError::param(
            "fee",
            format!(
                "fee {fee} violates sqrt(1+f)*(1+r) <= Delta = {}; the closed forms do not apply",
                params.delta_big
            ),
        ));
    }
    Ok(())
}

/// Shock density 1/(2Δ√(1+δ)) on [0, Δ²−1], zero outside. Its total mass is
/// (Δ−1)/Δ: the residual 1/Δ is the chance the innovation produces no
/// tradable move, so the sampler below draws conditional on a move.
pub fn shock_pdf(delta: f64, delta_big: f64) -> Result<f64> {
    if !(delta_big > 1.0) {
        return Err(ModelError::param("Delta", "shock scale must exceed 1"));
    }
    if delta < 0.0 || delta > delta_big * delta_big - 1.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (2.0 * delta_big * (1.0 + delta).sqrt()))
}

/// Draw a tradable shock: √(1+δ) uniform on [1, Δ], returned as δ = u²−1.
pub fn shock_sample<R: Rng + ?Sized>(rng: &mut R, delta_big: f64) -> Result<f64> {
    if !(delta_big > 1.0) {
        return Err(ModelError::param("Delta", "shock scale must exceed 1"));
    }
    let u = rng.gen_range(1.0..delta_big);
    Ok(u * u - 1.0)
}

/// Optimal informed trade against a fee-f band holding `pool_tokens`:
/// T·min{1, ((1+r)/r)(1 − √((1+f)/(1+δ)))}, zero when δ ≤ f, all of T once
/// δ ≥ (1+f)(1+r)²−1. At r = 0 the band is a point and the trade is
/// all-or-nothing: T·𝟙{δ > f}.
pub fn tau_star(delta: f64, fee: f64, pool_tokens: f64, r: f64) -> f64 {
    if delta <= fee {
        return 0.0;
    }
    if r == 0.0 {
        return pool_tokens;
    }
    let frac = (1.0 + r) / r * (1.0 - ((1.0 + fee) / (1.0 + delta)).sqrt());
    pool_tokens * frac.clamp(0.0, 1.0)
}

/// Numéraire a trader pays the curve (fee excluded) per unit of pool tokens
/// when trading τ*(δ) against a fee-f band: v·((1+r)/r)(√((1+δ)/(1+f)) − 1)
/// capped at the full-band cost v(1+r); at r = 0 the band collapses and
/// everything trades at v.
fn curve_cost_per_unit(delta: f64, fee: f64, params: &RangeModelParams) -> f64 {
    if delta <= fee {
        return 0.0;
    }
    let r = params.r;
    if r == 0.0 {
        return params.v;
    }
    let s = ((1.0 + delta) / (1.0 + fee)).sqrt().min(1.0 + r);
    params.v * (1.0 + r) / r * (s - 1.0)
}

/// Per-unit liquidity yield 𝓛(f) = v·f(r+1)(2Δ − (r+2)√(1+f))/Δ.
pub fn liquidity_yield(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let (r, d) = (params.r, params.delta_big);
    let a = (1.0 + fee).sqrt();
    Ok(params.v * fee * (r + 1.0) * (2.0 * d - (r + 2.0) * a) / d)
}

/// 𝓛 by quadrature of its defining integral: expected fee income
/// ∫ 2f·C(δ)·φ(δ) dδ, where C is the curve cost per unit and the factor 2
/// counts the reversal leg of private-value flow.
pub fn liquidity_yield_quadrature(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let d = params.delta_big;
    let kink = (1.0 + fee) * (1.0 + params.r) * (1.0 + params.r) - 1.0;
    let f = |delta: f64| {
        2.0 * fee
            * curve_cost_per_unit(delta, fee, params)
            * shock_pdf(delta, d).unwrap_or(0.0)
    };
    let hi = params.shock_max();
    let mid = kink.clamp(fee, hi);
    Ok(numerics::integrate(&f, fee, mid, 1e-13) + numerics::integrate(&f, mid, hi, 1e-13))
}

/// Fee maximizing 𝓛: the larger root of the derivative's quadratic,
/// f̄ = (8Δ² − 6(r+2)² + 4√(4Δ⁴ + 3Δ²(r+2)²)) / (9(r+2)²).
pub fn yield_threshold(params: &RangeModelParams) -> f64 {
    let d = params.delta_big;
    let s = params.r + 2.0;
    let disc = (4.0 * d.powi(4) + 3.0 * d * d * s * s).sqrt();
    (8.0 * d * d - 6.0 * s * s + 4.0 * disc) / (9.0 * s * s)
}

/// Per-unit net adverse-selection cost 𝓐(f): the informed trader's surplus
/// (value captured minus curve payment minus fees paid), in closed form.
pub fn adverse_selection(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let (r, d, v) = (params.r, params.delta_big, params.v);
    let a = (1.0 + fee).sqrt();
    let ar = a * (1.0 + r);
    let head = (d - ar) * (d * d + d * ar + (1.0 + fee) * (r - 2.0) * (r + 1.0));
    let tail = (1.0 + fee) * a * r * r * (r + 1.0);
    Ok(v * (head + tail) / (3.0 * d))
}

/// 𝓐 by quadrature: ∫ [(1+δ)v·m(δ) − (1+f)·C(δ)]·φ(δ) dδ with m = τ*/T —
/// what informed flow takes out, net of everything it pays in.
pub fn adverse_selection_quadrature(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let d = params.delta_big;
    let kink = (1.0 + fee) * (1.0 + params.r) * (1.0 + params.r) - 1.0;
    let f = |delta: f64| {
        let m = tau_star(delta, fee, 1.0, params.r);
        let c = curve_cost_per_unit(delta, fee, params);
        ((1.0 + delta) * params.v * m - (1.0 + fee) * c) * shock_pdf(delta, d).unwrap_or(0.0)
    };
    let hi = params.shock_max();
    let mid = kink.clamp(fee, hi);
    Ok(numerics::integrate(&f, fee, mid, 1e-13) + numerics::integrate(&f, mid, hi, 1e-13))
}

/// Expected rebalance cost 𝓒(f) = Γ(1 − √(1+f)(1+r)/Δ): gas times the
/// probability the shock depletes the band.
pub fn rebalance_cost(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let a = (1.0 + fee).sqrt();
    Ok(params.gamma_big * (1.0 - a * (1.0 + params.r) / params.delta_big))
}

/// Which of the two pools a provider considers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolTier {
    Low,
    High,
}

/// Expected profit of a q-endowed provider in the given pool:
/// π_k(q) = q[(1−η)𝓛(f_k) − η𝓐(f_k)] − η𝓒(f_k).
pub fn lp_profit(q: f64, tier: PoolTier, params: &RangeModelParams) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(ModelError::param("q", "endowment must be >= 0"));
    }
    let fee = match tier {
        PoolTier::Low => params.ell,
        PoolTier::High => params.h,
    };
    let slope = (1.0 - params.eta) * liquidity_yield(fee, params)?
        - params.eta * adverse_selection(fee, params)?;
    Ok(q * slope - params.eta * rebalance_cost(fee, params)?)
}

/// Participation thresholds (q̲_ℓ, q̲_h): the endowments at which π_k = 0.
/// A non-positive profit slope means the pool is not viable at this η.
pub fn participation_thresholds(params: &RangeModelParams) -> Result<(f64, f64)> {
    let mut out = [0.0f64; 2];
    for (i, fee) in [params.ell, params.h].into_iter().enumerate() {
        let slope = (1.0 - params.eta) * liquidity_yield(fee, params)?
            - params.eta * adverse_selection(fee, params)?;
        if !(slope > 0.0) {
            return Err(ModelError::Infeasible(format!(
                "pool with fee {fee} not viable: per-unit profit slope {slope} <= 0"
            )));
        }
        out[i] = params.eta * rebalance_cost(fee, params)? / slope;
    }
    Ok((out[0], out[1]))
}

/// News intensity above which the market tips entirely into the high-fee
/// pool: η̄ = (𝓛(ℓ)−𝓛(h)) / ((𝓛(ℓ)−𝓛(h)) + (𝓐(ℓ)−𝓐(h))), and 0 when the
/// low fee does not even yield more (fragmentation then never pays).
pub fn eta_threshold(params: &RangeModelParams) -> Result<f64> {
    let ly_gap = liquidity_yield(params.ell, params)? - liquidity_yield(params.h, params)?;
    let as_gap = adverse_selection(params.ell, params)? - adverse_selection(params.h, params)?;
    if !(ly_gap > 0.0) {
        return Ok(0.0);
    }
    Ok(ly_gap / (ly_gap + as_gap))
}

/// Market regime of the two-tier equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeRegime {
    AllHigh,
    Fragmented,
}

/// Solved equilibrium: thresholds, the marginal endowment q_t (absent when
/// the market tips), the low pool's liquidity share, and expected token
/// supply per pool under the exponential endowment distribution.
#[derive(Clone, Debug, Serialize)]
pub struct RangeEquilibrium {
    pub regime: RangeRegime,
    pub q_t: Option<f64>,
    pub q_lo_l: f64,
    pub q_lo_h: f64,
    pub w_low: f64,
    pub pool_supply_low: f64,
    pub pool_supply_high: f64,
}

/// ∫_a^∞ q·(1/λ)e^{−q/λ} dq = e^{−a/λ}(a + λ): expected tokens supplied by
/// providers endowed above `a`.
pub fn expected_supply_above(a: f64, lambda: f64) -> f64 {
    (-a / lambda).exp() * (a + lambda)
}

/// Solve the two-tier equilibrium. Providers with q in (q̲_h, q_t] deposit
/// in the high-fee pool (ties to H), those above q_t in the low-fee pool;
/// if the preference slope (1−η)(𝓛(ℓ)−𝓛(h)) + η(𝓐(h)−𝓐(ℓ)) is not
/// positive, nobody ever prefers L and the market tips to AllHigh.
pub fn solve_equilibrium(params: &RangeModelParams) -> Result<RangeEquilibrium> {
    params.validate()?;
    let lam = params.lambda_endow;
    let (q_lo_l, q_lo_h) = participation_thresholds(params)?;
    let ly_gap = liquidity_yield(params.ell, params)? - liquidity_yield(params.h, params)?;
    let as_gap = adverse_selection(params.h, params)? - adverse_selection(params.ell, params)?;
    let pref_slope = (1.0 - params.eta) * ly_gap + params.eta * as_gap;
    let cost_gap =
        params.eta * (rebalance_cost(params.ell, params)? - rebalance_cost(params.h, params)?);

    if !(pref_slope > 0.0) {
        return Ok(RangeEquilibrium {
            regime: RangeRegime::AllHigh,
            q_t: None,
            q_lo_l,
            q_lo_h,
            w_low: 0.0,
            pool_supply_low: 0.0,
            pool_supply_high: expected_supply_above(q_lo_h, lam),
        });
    }

    let q_t = cost_gap / pref_slope;
    let supply_low = expected_supply_above(q_t.max(q_lo_l), lam);
    let supply_high =
        (expected_supply_above(q_lo_h, lam) - expected_supply_above(q_t.max(q_lo_h), lam)).max(0.0);
    let w_low = (((q_lo_h - q_t) / lam).exp() * (q_t + lam) / (q_lo_h + lam)).clamp(0.0, 1.0);
    Ok(RangeEquilibrium {
        regime: RangeRegime::Fragmented,
        q_t: Some(q_t),
        q_lo_l,
        q_lo_h,
        w_low,
        pool_supply_low: supply_low,
        pool_supply_high: supply_high,
    })
}

/// Low pool's liquidity market share, w = e^{−(q_t−q̲_h)/λ}(q_t+λ)/(q̲_h+λ)
/// in the fragmented regime and 0 when the market tips.
pub fn market_share_low(eq: &RangeEquilibrium, params: &RangeModelParams) -> f64 {
    match (eq.regime, eq.q_t) {
        (RangeRegime::Fragmented, Some(q_t)) => {
            let lam = params.lambda_endow;
            (((eq.q_lo_h - q_t) / lam).exp() * (q_t + lam) / (eq.q_lo_h + lam)).clamp(0.0, 1.0)
        }
        _ => 0.0,
    }
}

/// The marginal endowment located independently: bisection on
/// π_L(q) − π_H(q) = 0, bracket grown geometrically from [q̲_h, q̲_h + λ].
pub fn marginal_endowment_by_bisection(params: &RangeModelParams) -> Result<f64> {
    params.validate()?;
    let (_, q_lo_h) = participation_thresholds(params)?;
    let diff = |q: f64| {
        lp_profit(q, PoolTier::Low, params).unwrap_or(f64::NAN)
            - lp_profit(q, PoolTier::High, params).unwrap_or(f64::NAN)
    };
    let cap = q_lo_h + 1e6 * params.lambda_endow;
    numerics::bisect_expanding(diff, q_lo_h, params.lambda_endow, cap, 1e-12)
        .map_err(ModelError::Infeasible)
}

/// Expected gains from trade per unit of pool tokens at fee f, in closed
/// form: v[2Δ³ − 6Δ + 6a(1+r)·ln(1+r)/r − (1+r)(r+2)a³]/(6Δ), a = √(1+f)
/// (the ln(1+r)/r factor is 1 at r = 0).
pub fn per_unit_gains(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let (r, d, v) = (params.r, params.delta_big, params.v);
    let a = (1.0 + fee).sqrt();
    let lr = if r == 0.0 { 1.0 } else { r.ln_1p() / r };
    Ok(v * (2.0 * d.powi(3) - 6.0 * d + 6.0 * a * (1.0 + r) * lr - (1.0 + r) * (r + 2.0) * a.powi(3))
        / (6.0 * d))
}

/// Per-unit gains by quadrature: ∫ v·δ·(τ*(δ)/T)·φ(δ) dδ.
pub fn per_unit_gains_quadrature(fee: f64, params: &RangeModelParams) -> Result<f64> {
    validate_fee(fee, params)?;
    let d = params.delta_big;
    let kink = (1.0 + fee) * (1.0 + params.r) * (1.0 + params.r) - 1.0;
    let f = |delta: f64| {
        params.v * delta * tau_star(delta, fee, 1.0, params.r) * shock_pdf(delta, d).unwrap_or(0.0)
    };
    let hi = params.shock_max();
    let mid = kink.clamp(fee, hi);
    Ok(numerics::integrate(&f, fee, mid, 1e-13) + numerics::integrate(&f, mid, hi, 1e-13))
}

/// Expected gains from trade of a pool menu: Σ_k supply_k · gains(f_k).
pub fn gains_from_trade(pools: &[(f64, f64)], params: &RangeModelParams) -> Result<f64> {
    let mut total = 0.0;
    for &(fee, supply) in pools {
        if !(supply >= 0.0) {
            return Err(ModelError::param("supply", "pool supply must be >= 0"));
        }
        total += supply * per_unit_gains(fee, params)?;
    }
    Ok(total)
}

/// Gains from trade of the two-tier menu versus a single pool at fee h.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GftComparison {
    pub menu: f64,
    pub single: f64,
    pub difference: f64,
}

/// Compare the equilibrium menu {ℓ, h} against one pool with fee h serving
/// everyone above its own participation threshold.
pub fn gft_compare(params: &RangeModelParams) -> Result<GftComparison> {
    let eq = solve_equilibrium(params)?;
    let menu = gains_from_trade(
        &[
            (params.ell, eq.pool_supply_low),
            (params.h, eq.pool_supply_high),
        ],
        params,
    )?;
    let single_supply = expected_supply_above(eq.q_lo_h, params.lambda_endow);
    let single = gains_from_trade(&[(params.h, single_supply)], params)?;
    Ok(GftComparison {
        menu,
        single,
        difference: menu - single,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> RangeModelParams {
        RangeModelParams::default()
    }

    #[test]
    fn defaults_are_feasible() {
        defaults().validate().unwrap();
    }

    #[test]
    fn shock_pdf_value_mass_and_support() {
        assert_relative_eq!(shock_pdf(0.0, 2.0).unwrap(), 0.25);
        assert_eq!(shock_pdf(-0.5, 2.0).unwrap(), 0.0);
        assert_eq!(shock_pdf(3.1, 2.0).unwrap(), 0.0);
        assert!(shock_pdf(0.5, 1.0).is_err());
        // Total mass is (Δ−1)/Δ; the sampler's conditional law has mass 1.
        let d = defaults().delta_big;
        let mass = numerics::integrate(&|x| shock_pdf(x, d).unwrap(), 0.0, d * d - 1.0, 1e-12);
        assert_relative_eq!(mass, (d - 1.0) / d, max_relative = 1e-10);
        assert_relative_eq!(mass * d / (d - 1.0), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn shock_sample_mean_matches_conditional_expectation() {
        let d = defaults().delta_big;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000usize;
        let draws: Vec<f64> = (0..n).map(|_| shock_sample(&mut rng, d).unwrap()).collect();
        let (mean, se) = numerics::mean_se(&draws);
        // E[δ | tradable] = (Δ² + Δ − 2)/3.
        let expect = (d * d + d - 2.0) / 3.0;
        assert!(
            (mean - expect).abs() <= 4.0 * se,
            "sample mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn tau_star_boundaries_and_r_zero_limit() {
        let r = 0.001;
        assert_eq!(tau_star(1.0, 1.0, 5.0, r), 0.0);
        assert_eq!(tau_star(0.5, 1.0, 5.0, r), 0.0);
        let kink = 2.0 * (1.0 + r) * (1.0 + r) - 1.0;
        assert_relative_eq!(tau_star(kink, 1.0, 5.0, r), 5.0, max_relative = 1e-12);
        assert_relative_eq!(tau_star(2.5, 1.0, 5.0, r), 5.0);
        // r = 0: all-or-nothing.
        assert_eq!(tau_star(1.0 + 1e-12, 1.0, 5.0, 0.0), 5.0);
        assert_eq!(tau_star(1.0, 1.0, 5.0, 0.0), 0.0);
    }

    #[test]
    fn tau_star_maximizes_trader_profit() {
        // Independent check: golden-section maximization of the trader's
        // objective v(1+δ)τ − (1+f)·curve_cost(τ) over the band
        // [v, v(1+r)²] with liquidity L = T√v(1+r)/r.
        let (v, r, fee, t) = (1.0f64, 0.001f64, 1.0f64, 1.0f64);
        let l = t * v.sqrt() * (1.0 + r) / r;
        let objective = |delta: f64, tau: f64| {
            let sp = v.sqrt() * l / (l - v.sqrt() * tau);
            v * (1.0 + delta) * tau - (1.0 + fee) * l * (sp - v.sqrt())
        };
        for delta in [1.002, 1.5] {
            let best = numerics::golden_max(|tau| objective(delta, tau), 0.0, t, 1e-10);
            let closed = tau_star(delta, fee, t, r);
            // The profit surface is flat at its top, so float cancellation
            // limits the argmax to a ~1e-5 plateau.
            assert!(
                (best - closed).abs() <= 2e-5,
                "delta {delta}: golden {best} vs closed {closed}"
            );
            // Sharper check through the first-order condition: marginal
            // value equals the fee-inflated marginal price at an interior
            // optimum, and stays above it everywhere when capped at T.
            let marginal = |tau: f64| {
                let ratio = l / (l - v.sqrt() * tau);
                v * (1.0 + delta) - (1.0 + fee) * v * ratio * ratio
            };
            if closed < t {
                let root = numerics::bisect(marginal, 0.0, t, 1e-14).unwrap();
                assert_relative_eq!(root, closed, max_relative = 1e-10);
            } else {
                assert!(marginal(t) > 0.0);
            }
        }
    }

    #[test]
    fn liquidity_yield_values_and_slope_at_zero() {
        let p = defaults();
        assert_eq!(liquidity_yield(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(liquidity_yield(1.0, &p).unwrap(), 0.516718492330564, max_relative = 1e-12);
        assert_relative_eq!(liquidity_yield(2.0, &p).unwrap(), 0.365818181818182, max_relative = 1e-12);
        // Slope at f = 0 by finite difference: (r+1)(2Δ−r−2)/Δ > 0.
        let eps = 1e-6;
        let fd = (liquidity_yield(eps, &p).unwrap() - liquidity_yield(0.0, &p).unwrap()) / eps;
        let slope = (p.r + 1.0) * (2.0 * p.delta_big - p.r - 2.0) / p.delta_big;
        assert!(fd > 0.0);
        assert_relative_eq!(fd, slope, max_relative = 1e-4);
        assert_relative_eq!(slope, 0.951747373955963, max_relative = 1e-12);
    }

    #[test]
    fn yield_threshold_is_the_argmax() {
        let p = defaults();
        let fbar = yield_threshold(&p);
        assert_relative_eq!(fbar, 1.23182813273851, max_relative = 1e-12);
        // Grid + golden refinement around the best cell.
        let hi = (p.delta_big / (1.0 + p.r)).powi(2) - 1.0;
        let n = 4000;
        let mut best_i = 0usize;
        let mut best = f64::MIN;
        for i in 0..=n {
            let f = hi * i as f64 / n as f64;
            let v = liquidity_yield(f, &p).unwrap();
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let lo_f = hi * best_i.saturating_sub(1) as f64 / n as f64;
        let hi_f = hi * (best_i + 1).min(n) as f64 / n as f64;
        let refined =
            numerics::golden_max(|f| liquidity_yield(f, &p).unwrap(), lo_f, hi_f, 1e-10);
        assert!((fbar - refined).abs() <= 1e-6);
        // Unimodality: increasing before f̄, decreasing after.
        let probe = |f: f64| liquidity_yield(f, &p).unwrap();
        for i in 0..40 {
            let f = fbar * i as f64 / 40.0;
            let g = fbar * (i + 1) as f64 / 40.0;
            assert!(probe(g) > probe(f));
        }
        for i in 0..20 {
            let f = fbar + (hi - fbar) * i as f64 / 20.0;
            let g = fbar + (hi - fbar) * (i + 1) as f64 / 20.0;
            assert!(probe(g) < probe(f));
        }
    }

    #[test]
    fn adverse_selection_values_and_monotonicity() {
        let p = defaults();
        assert_relative_eq!(adverse_selection(1.0, &p).unwrap(), 0.200608881779624, max_relative = 1e-12);
        assert_relative_eq!(adverse_selection(2.0, &p).unwrap(), 0.0285121190909091, max_relative = 1e-12);
        assert!(adverse_selection(p.h, &p).unwrap() < adverse_selection(p.ell, &p).unwrap());
        // Finite-difference slope negative across the admissible range.
        let hi = (p.delta_big / (1.0 + p.r)).powi(2) - 1.0;
        for i in 0..50 {
            let f = hi * i as f64 / 50.0;
            let fd = (adverse_selection(f + 1e-7, &p).unwrap()
                - adverse_selection(f, &p).unwrap())
                / 1e-7;
            assert!(fd < 0.0, "A'({f}) = {fd}");
        }
        // Outside the closed-form domain: reported, not patched.
        assert!(adverse_selection(hi + 0.1, &p).is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let p = defaults();
        for fee in [0.3, 1.0, 2.0] {
            let ly = liquidity_yield(fee, &p).unwrap();
            let lyq = liquidity_yield_quadrature(fee, &p).unwrap();
            assert_relative_eq!(ly, lyq, max_relative = 1e-8);
            let asc = adverse_selection(fee, &p).unwrap();
            let ascq = adverse_selection_quadrature(fee, &p).unwrap();
            assert_relative_eq!(asc, ascq, max_relative = 1e-8);
            let g = per_unit_gains(fee, &p).unwrap();
            let gq = per_unit_gains_quadrature(fee, &p).unwrap();
            assert_relative_eq!(g, gq, max_relative = 1e-8);
        }
        // And at r = 0, where the limits kick in.
        let mut p0 = p;
        p0.r = 0.0;
        for fee in [0.5, 1.5] {
            assert_relative_eq!(
                liquidity_yield(fee, &p0).unwrap(),
                liquidity_yield_quadrature(fee, &p0).unwrap(),
                max_relative = 1e-8
            );
            assert_relative_eq!(
                adverse_selection(fee, &p0).unwrap(),
                adverse_selection_quadrature(fee, &p0).unwrap(),
                max_relative = 1e-8
            );
            assert_relative_eq!(
                per_unit_gains(fee, &p0).unwrap(),
                per_unit_gains_quadrature(fee, &p0).unwrap(),
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn rebalance_cost_boundaries_and_values() {
        let p = defaults();
        let mut free = p;
        free.gamma_big = 0.0;
        assert_eq!(rebalance_cost(1.0, &free).unwrap(), 0.0);
        // At the fee whose band edge touches Δ, depletion never happens.
        let f_edge = (p.delta_big / (1.0 + p.r)).powi(2) - 1.0;
        assert!(rebalance_cost(f_edge, &p).unwrap().abs() <= 1e-12 * p.gamma_big);
        assert!(rebalance_cost(p.ell, &p).unwrap() > rebalance_cost(p.h, &p).unwrap());
        assert_relative_eq!(rebalance_cost(1.0, &p).unwrap(), 5.15460761949589, max_relative = 1e-12);
        assert_relative_eq!(rebalance_cost(2.0, &p).unwrap(), 1.81818181818182, max_relative = 1e-12);
    }

    #[test]
    fn lp_profit_is_affine_and_zero_at_threshold() {
        let p = defaults();
        let (q_lo_l, q_lo_h) = participation_thresholds(&p).unwrap();
        assert_relative_eq!(q_lo_l, 1.15837587215075, max_relative = 1e-12);
        assert_relative_eq!(q_lo_h, 0.557066339739955, max_relative = 1e-12);
        assert!(q_lo_h < q_lo_l);
        for (tier, q_lo) in [(PoolTier::Low, q_lo_l), (PoolTier::High, q_lo_h)] {
            let fee = match tier {
                PoolTier::Low => p.ell,
                PoolTier::High => p.h,
            };
            let at_zero = lp_profit(0.0, tier, &p).unwrap();
            assert_relative_eq!(
                at_zero,
                -p.eta * rebalance_cost(fee, &p).unwrap(),
                max_relative = 1e-12
            );
            assert!(lp_profit(q_lo, tier, &p).unwrap().abs() <= 1e-12);
            let (a, b, c) = (
                lp_profit(0.0, tier, &p).unwrap(),
                lp_profit(1.3, tier, &p).unwrap(),
                lp_profit(2.6, tier, &p).unwrap(),
            );
            assert!((2.0 * b - (a + c)).abs() <= 1e-12);
        }
    }

    #[test]
    fn equilibrium_matches_golden_values_and_bisection() {
        let p = defaults();
        let eq = solve_equilibrium(&p).unwrap();
        assert_eq!(eq.regime, RangeRegime::Fragmented);
        let q_t = eq.q_t.unwrap();
        assert_relative_eq!(q_t, 2.81316090433802, max_relative = 1e-12);
        assert_relative_eq!(eq.w_low, 0.256547977497991, max_relative = 1e-12);
        assert_relative_eq!(eq.pool_supply_low, 0.228846815897491, max_relative = 1e-12);
        assert_relative_eq!(eq.pool_supply_high, 0.663176649379224, max_relative = 1e-12);
        let root = marginal_endowment_by_bisection(&p).unwrap();
        assert_relative_eq!(root, q_t, max_relative = 1e-9);
        // Preference difference flips sign exactly at q_t.
        let diff = |q: f64| {
            lp_profit(q, PoolTier::Low, &p).unwrap() - lp_profit(q, PoolTier::High, &p).unwrap()
        };
        assert!(diff(q_t * 0.99) < 0.0);
        assert!(diff(q_t * 1.01) > 0.0);
        // Share equals the supply ratio.
        assert_relative_eq!(
            eq.w_low,
            eq.pool_supply_low / (eq.pool_supply_low + eq.pool_supply_high),
            max_relative = 1e-10
        );
        assert_relative_eq!(market_share_low(&eq, &p), eq.w_low);
    }

    #[test]
    fn eta_threshold_splits_the_regimes() {
        let p = defaults();
        let bar = eta_threshold(&p).unwrap();
        assert_relative_eq!(bar, 0.467187857205232, max_relative = 1e-12);
        let mut hi = p;
        hi.eta = bar + 0.01;
        let eq = solve_equilibrium(&hi).unwrap();
        assert_eq!(eq.regime, RangeRegime::AllHigh);
        assert_eq!(eq.w_low, 0.0);
        assert_eq!(eq.pool_supply_low, 0.0);
        assert!(eq.q_t.is_none());
        // Approaching the threshold from below, the low share vanishes.
        let mut near = p;
        near.eta = bar - 1e-6;
        let eq = solve_equilibrium(&near).unwrap();
        assert_eq!(eq.regime, RangeRegime::Fragmented);
        assert!(eq.w_low <= 1e-6, "w_low = {}", eq.w_low);
    }

    #[test]
    fn free_gas_gives_the_low_pool_everything() {
        let mut p = defaults();
        p.gamma_big = 0.0;
        let eq = solve_equilibrium(&p).unwrap();
        assert_eq!(eq.regime, RangeRegime::Fragmented);
        assert_eq!(eq.q_t.unwrap(), 0.0);
        assert_relative_eq!(eq.w_low, 1.0);
        assert_eq!(eq.pool_supply_high, 0.0);
        assert_relative_eq!(eq.pool_supply_low, p.lambda_endow, max_relative = 1e-12);
    }

    #[test]
    fn market_share_decreases_in_gas_cost() {
        let p = defaults();
        let mut prev = f64::INFINITY;
        for i in 1..=50 {
            let mut q = p;
            q.gamma_big = 40.0 * i as f64 / 50.0;
            let eq = solve_equilibrium(&q).unwrap();
            assert!(eq.w_low < prev, "w_low not decreasing at Gamma = {}", q.gamma_big);
            prev = eq.w_low;
        }
    }

    #[test]
    fn gft_golden_values_and_identical_fee_menu() {
        let p = defaults();
        let cmp = gft_compare(&p).unwrap();
        assert_relative_eq!(cmp.menu, 0.245362531289079, max_relative = 1e-12);
        assert_relative_eq!(cmp.single, 0.188674043527064, max_relative = 1e-12);
        assert!(cmp.difference > 0.0);
        // Identical fees: the menu degenerates to the single pool exactly.
        let mut same = p;
        same.ell = same.h;
        let cmp = gft_compare(&same).unwrap();
        assert_eq!(cmp.difference, 0.0);
    }

    #[test]
    fn infeasible_assumptions_are_reported() {
        let mut p = defaults();
        p.delta_big = 1.5; // below (1+r)√3
        assert!(matches!(p.validate(), Err(ModelError::Infeasible(_))));
        let mut p = defaults();
        p.eta = 0.99; // above the viability bound
        assert!(matches!(p.validate(), Err(ModelError::Infeasible(_))));
        let mut p = defaults();
        p.ell = 3.0; // above h
        assert!(matches!(p.validate(), Err(ModelError::InvalidParam { .. })));
        let mut p = defaults();
        p.lambda_endow = 0.0;
        assert!(p.validate().is_err());
    }
}
