//! Deplete-and-refill liquidity-cycle model with heterogeneous providers.
//!
//! Provider endowments follow a truncated Pareto density (Q/(Q−1))q⁻² on
//! [1, Q]. Each pool runs in cycles: small takers drain it at rate θ until
//! either a Poisson(λ) large taker empties it at once (always ending a
//! high-pool cycle) or the pool runs dry; providers refill at the start of
//! the next cycle. Pool choice turns on the reaction function f₂ whose
//! unique root q_t splits providers: endowments in [q̲, q_t] fill the
//! high-fee pool, endowments above q_t the low-fee pool. The module also
//! prices fee menus by an implementation-shortfall metric IS and locates the
//! IS-minimizing single fee, cross-checked against a Lambert-W closed form.

use serde::{Deserialize, Serialize};

use crate::{numerics, ModelError, Result};

/// Parameters of the liquidity-cycle model.
///
/// `q_big` (Q) bounds endowments; `theta_rate` (θ) is the small-taker flow
/// rate; `lambda_rate` (λ) the large-taker Poisson rate; `theta_big` (Θ) the
/// large trade size, which must exceed the maximum liquidity supply S;
/// `gamma_big` (Γ) the gas cost per refill; `delta_gft` (g) the per-unit
/// gains from trade used by the implementation-shortfall metric.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleModelParams {
    #[serde(rename = "Q")]
    pub q_big: f64,
    pub theta_rate: f64,
    pub lambda_rate: f64,
    #[serde(rename = "Theta")]
    pub theta_big: f64,
    pub ell: f64,
    pub h: f64,
    #[serde(rename = "Gamma")]
    pub gamma_big: f64,
    pub delta_gft: f64,
}

impl Default for CycleModelParams {
    fn default() -> Self {
        let q_big = 3.0f64;
        let s = q_big / (q_big - 1.0) * q_big.ln();
        CycleModelParams {
            q_big,
            theta_rate: 0.66,
            lambda_rate: 0.5,
            theta_big: 2.0 * s,
            ell: 0.75,
            h: 1.0,
            gamma_big: 1.0,
            delta_gft: 2.0,
        }
    }
}

impl CycleModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, val) in [
            ("Q", self.q_big),
            ("theta_rate", self.theta_rate),
            ("lambda_rate", self.lambda_rate),
            ("Theta", self.theta_big),
            ("ell", self.ell),
            ("h", self.h),
            ("Gamma", self.gamma_big),
            ("Delta_gft", self.delta_gft),
        ] {
            if !val.is_finite() {
                return Err(ModelError::param(name, "must be finite"));
            }
        }
        if !(self.q_big > 1.0) {
            return Err(ModelError::param("Q", "endowment bound must exceed 1"));
        }
        if !(self.theta_rate > 0.0) {
            return Err(ModelError::param("theta_rate", "small-taker rate must be positive"));
        }
        if !(self.lambda_rate > 0.0) {
            return Err(ModelError::param("lambda_rate", "large-taker rate must be positive"));
        }
        if !(self.ell >= 0.0) {
            return Err(ModelError::param("ell", "fee must be >= 0"));
        }
        if self.ell > self.h {
            return Err(ModelError::param("ell", "need ell <= h"));
        }
        if !(self.h > 0.0) {
            return Err(ModelError::param("h", "high fee must be positive"));
        }
        if !(self.gamma_big >= 0.0) {
            return Err(ModelError::param("Gamma", "gas cost must be >= 0"));
        }
        if !(self.delta_gft >= 0.0) {
            return Err(ModelError::param("Delta_gft", "per-unit gains must be >= 0"));
        }
        if !(self.theta_big > self.max_supply()) {
            return Err(ModelError::Infeasible(format!(
                "large trade size Theta = {} must exceed the maximum liquidity supply S = {}",
                self.theta_big,
                self.max_supply()
            )));
        }
        Ok(())
    }

    /// Maximum liquidity supply S = (Q/(Q−1))·log Q (everyone deposits).
    pub fn max_supply(&self) -> f64 {
        self.q_big / (self.q_big - 1.0) * self.q_big.ln()
    }

    /// Cycle-frequency exponent E = (λ/θ)·Q/(Q−1).
    pub fn exponent(&self) -> f64 {
        self.lambda_rate / self.theta_rate * self.q_big / (self.q_big - 1.0)
    }

    /// Participation threshold q̲ = max{Γ/h, 1}.
    pub fn participation_floor(&self) -> f64 {
        (self.gamma_big / self.h).max(1.0)
    }
}

/// Pool sizes from the endowment split: providers in (q_lo, q_t] fill the
/// high-fee pool, those above q_t the low-fee pool;
/// L = (Q/(Q−1))·(log upper − log lower) per segment.
pub fn pool_sizes(q_t: f64, q_lo: f64, q_big: f64) -> Result<(f64, f64)> {
    if !(1.0 <= q_lo && q_lo <= q_t && q_t <= q_big) {
        return Err(ModelError::param(
            "q_t",
            format!("need 1 <= q_lo ({q_lo}) <= q_t ({q_t}) <= Q ({q_big})"),
        ));
    }
    let c = q_big / (q_big - 1.0);
    Ok((c * (q_big.ln() - q_t.ln()), c * (q_t.ln() - q_lo.ln())))
}

/// Expected cycle durations (d_low, d_high). A high-pool cycle ends only at
/// a large-taker arrival: d_high = 1/λ. A low-pool cycle ends at the
/// earlier of that arrival and the θ-rate drain of L tokens:
/// d_low = E[min(Exp(λ), L/θ)] = (1/λ)(1 − e^{−Lλ/θ}).
pub fn cycle_durations(l_low: f64, params: &CycleModelParams) -> (f64, f64) {
    let lam = params.lambda_rate;
    let d_high = 1.0 / lam;
    let d_low = if l_low <= 0.0 {
        0.0
    } else {
        (1.0 - (-l_low * lam / params.theta_rate).exp()) / lam
    };
    (d_low, d_high)
}

/// f₁(q) = h(q/Q)^E − (h−ℓ): the indifference denominator. Positive from
/// its root q_r upward.
pub fn f1(q_t: f64, params: &CycleModelParams) -> f64 {
    params.h * (q_t / params.q_big).powf(params.exponent()) - (params.h - params.ell)
}

/// Root of f₁ in q: q_r = Q((h−ℓ)/h)^{1/E}.
pub fn f1_root(params: &CycleModelParams) -> f64 {
    params.q_big * ((params.h - params.ell) / params.h).powf(1.0 / params.exponent())
}

/// Reaction function f₂(q) = Γ(q/Q)^E / f₁(q) − q, strictly decreasing
/// wherever f₁ > 0. Outside that domain it returns a signed-infinity
/// sentinel: +∞ on the pole (f₁ = 0, the one-sided limit from above) and
/// −∞ where f₁ < 0.
pub fn f2(q_t: f64, params: &CycleModelParams) -> f64 {
    let denom = f1(q_t, params);
    if denom < 0.0 {
        return f64::NEG_INFINITY;
    }
    if denom == 0.0 {
        return f64::INFINITY;
    }
    params.gamma_big * (q_t / params.q_big).powf(params.exponent()) / denom - q_t
}

/// Sign proxy for the preference gap π_ℓ − π_h of a q-endowed provider:
/// D(q) = (q/Q)^E(qh − Γ) − q(h−ℓ). Negative below q_t (prefers the
/// high-fee pool), positive above (prefers the low-fee pool); where
/// f₁ > 0, D = −f₂·f₁.
pub fn preference_gap(q: f64, params: &CycleModelParams) -> f64 {
    (q / params.q_big).powf(params.exponent()) * (q * params.h - params.gamma_big)
        - q * (params.h - params.ell)
}

/// Market regime of the cycle equilibrium.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleRegime {
    AllLow,
    AllHigh,
    Fragmented,
}

/// Solved cycle equilibrium. `q_t` is the marginal endowment (q̲ in the
/// all-low corner, Q in the all-high corner); `boundary_note` flags
/// parameter points on or numerically near a regime boundary, naming both
/// candidate regimes.
#[derive(Clone, Debug, Serialize)]
pub struct CycleEquilibrium {
    pub regime: CycleRegime,
    pub q_t: f64,
    pub q_lo: f64,
    pub l_low: f64,
    pub l_high: f64,
    pub w_low: f64,
    pub d_low: f64,
    pub d_high: f64,
    pub boundary_note: Option<String>,
}

/// Solve for the regime and marginal endowment.
///
/// Corners: everyone low when (h−ℓ)/h·Q^E < 1 and Γ/h < 1 − (h−ℓ)/h·Q^E
/// (even the smallest provider prefers the low pool); everyone high when
/// Γ > Qℓ (the low pool cannot attract anyone). Otherwise the marginal
/// endowment is the unique root of f₂ on (max{q_r, 1}·(1+1e-9), Q], found
/// by bisection; exact ties resolve toward Fragmented and are flagged.
pub fn solve_cycle_equilibrium(params: &CycleModelParams) -> Result<CycleEquilibrium> {
    params.validate()?;
    let q_big = params.q_big;
    let q_lo = params.participation_floor();
    let a = (params.h - params.ell) / params.h * q_big.powf(params.exponent());
    let gas_bound = 1.0 - a;

    let mut note = None;
    if params.gamma_big / params.h == gas_bound && a < 1.0 {
        note = Some(
            "gas cost exactly at the all-low boundary; candidates AllLow/Fragmented, resolved to Fragmented".into(),
        );
    } else if a < 1.0 && params.gamma_big / params.h < gas_bound {
        // Even the smallest provider prefers the low pool; Γ < ℓ here, so
        // everyone participates.
        let (l_low, l_high) = pool_sizes(q_lo, q_lo, q_big)?;
        let (d_low, d_high) = cycle_durations(l_low, params);
        return Ok(CycleEquilibrium {
            regime: CycleRegime::AllLow,
            q_t: q_lo,
            q_lo,
            l_low,
            l_high,
            w_low: 1.0,
            d_low,
            d_high,
            boundary_note: None,
        });
    }
    if params.gamma_big == q_big * params.ell {
        note = Some(
            "gas cost exactly at the all-high boundary; candidates AllHigh/Fragmented, resolved to Fragmented with q_t = Q".into(),
        );
    } else if params.gamma_big > q_big * params.ell {
        // The low pool cannot attract even the largest provider.
        let q_t = q_big;
        let (l_low, l_high) = pool_sizes(q_t, q_lo.min(q_t), q_big)?;
        let (d_low, d_high) = cycle_durations(l_low, params);
        return Ok(CycleEquilibrium {
            regime: CycleRegime::AllHigh,
            q_t,
            q_lo,
            l_low,
            l_high,
            w_low: 0.0,
            d_low,
            d_high,
            boundary_note: None,
        });
    }

    // Fragmented: bisect f₂ just above the f₁ pole (f₂ → +∞ there).
    let q_r = f1_root(params);
    let lo = q_r.max(1.0) * (1.0 + 1e-9);
    let q_t = if f2(lo, params) <= 0.0 {
        // No interior indifference point (e.g. Γ = 0 with q_r > 1): the
        // split collapses onto the pole itself.
        note = Some(
            "indifference point pinned at the f1 pole; candidates Fragmented/AllLow-at-pole".into(),
        );
        q_r.max(1.0)
    } else {
        numerics::bisect(|q| f2(q, params), lo, q_big, 1e-14)
            .map_err(|e| ModelError::Infeasible(format!("cycle solver: {e}")))?
    };
    if note.is_none() && q_t >= q_big * (1.0 - 1e-12) {
        note = Some("marginal endowment at Q within float tolerance; candidates Fragmented/AllHigh".into());
    }
    let q_t_c = q_t.clamp(q_lo, q_big);
    let (l_low, l_high) = pool_sizes(q_t_c, q_lo, q_big)?;
    let (d_low, d_high) = cycle_durations(l_low, params);
    let eq = CycleEquilibrium {
        regime: CycleRegime::Fragmented,
        q_t: q_t_c,
        q_lo,
        l_low,
        l_high,
        w_low: 0.0,
        d_low,
        d_high,
        boundary_note: note,
    };
    let w_low = market_share_low_cycle(&eq, params);
    Ok(CycleEquilibrium { w_low, ..eq })
}

/// Low pool's share of deposited liquidity at cycle starts:
/// w = (log Q − log q_t)/(log Q − log q̲); 1 in the all-low corner, 0 in
/// the all-high corner.
pub fn market_share_low_cycle(eq: &CycleEquilibrium, params: &CycleModelParams) -> f64 {
    match eq.regime {
        CycleRegime::AllLow => 1.0,
        CycleRegime::AllHigh => 0.0,
        CycleRegime::Fragmented => {
            let denom = params.q_big.ln() - eq.q_lo.ln();
            if denom <= 0.0 {
                return 0.0;
            }
            ((params.q_big.ln() - eq.q_t.ln()) / denom).clamp(0.0, 1.0)
        }
    }
}

/// Implementation shortfall of a pool menu: paid fees plus unrealized gains,
/// IS = Σ_k f_k·𝓛_k + g·(Θ − Σ_k 𝓛_k).
pub fn implementation_shortfall(pools: &[(f64, f64)], params: &CycleModelParams) -> Result<f64> {
    if pools.is_empty() {
        return Err(ModelError::param("pools", "fee menu must be nonempty"));
    }
    let mut fee_cost = 0.0;
    let mut supplied = 0.0;
    for &(fee, size) in pools {
        if !(fee >= 0.0) || !(size >= 0.0) {
            return Err(ModelError::param("pools", "fees and sizes must be >= 0"));
        }
        fee_cost += fee * size;
        supplied += size;
    }
    Ok(fee_cost + params.delta_gft * (params.theta_big - supplied))
}

/// Liquidity a single fee-f pool attracts: everyone above Γ/f (clamped to
/// [1, Q]) deposits; a fee below Γ/Q attracts nobody.
pub fn single_pool_liquidity(fee: f64, params: &CycleModelParams) -> f64 {
    if fee <= 0.0 {
        return 0.0;
    }
    let floor = (params.gamma_big / fee).clamp(1.0, params.q_big);
    params.q_big / (params.q_big - 1.0) * (params.q_big.ln() - floor.ln())
}

/// IS of a single pool at fee f (g·Θ when nobody participates).
pub fn single_pool_is(fee: f64, params: &CycleModelParams) -> Result<f64> {
    if !(fee >= 0.0) || !fee.is_finite() {
        return Err(ModelError::param("fee", "fee must be >= 0 and finite"));
    }
    implementation_shortfall(&[(fee, single_pool_liquidity(fee, params))], params)
}

/// IS of the equilibrium two-pool menu {ℓ, h}.
pub fn menu_is(params: &CycleModelParams) -> Result<f64> {
    let eq = solve_cycle_equilibrium(params)?;
    implementation_shortfall(&[(params.ell, eq.l_low), (params.h, eq.l_high)], params)
}

/// The IS-minimizing single fee with its Lambert-W cross-check.
#[derive(Clone, Debug, Serialize)]
pub struct FeeOptimum {
    pub f_star: f64,
    pub is_at_star: f64,
    /// Central-difference dIS/df at f*.
    pub gradient_at_star: f64,
    /// g / W₀(e·g·Q/Γ), the closed form read with the reciprocal of the
    /// principal Lambert branch.
    pub lambert_reciprocal_form: f64,
    pub lambert_matches: bool,
    pub lambert_note: String,
}

/// Minimize the single-pool IS over the participation-relevant fee range
/// [Γ/Q, Γ] by golden-section search and cross-check the closed form.
pub fn optimal_single_fee(params: &CycleModelParams) -> Result<FeeOptimum> {
    params.validate()?;
    if !(params.gamma_big > 0.0) {
        return Err(ModelError::param(
            "Gamma",
            "fee optimization needs a positive gas cost (otherwise any fee > 0 attracts everyone)",
        ));
    }
    let lo = params.gamma_big / params.q_big;
    let hi = params.gamma_big;
    let f_star = numerics::golden_min(
        |f| single_pool_is(f, params).unwrap_or(f64::INFINITY),
        lo,
        hi,
        1e-12,
    );
    let is_at_star = single_pool_is(f_star, params)?;
    let step = 1e-6 * f_star.max(1.0);
    let gradient_at_star = (single_pool_is(f_star + step, params)?
        - single_pool_is(f_star - step, params)?)
        / (2.0 * step);

    // Closed form: the stationarity condition log(Qf/Γ) + 1 = g/f rearranges
    // to w·e^w = e·g·Q/Γ with w = g/f, i.e. f = g/W₀(e·g·Q/Γ). The branch
    // −1 of Lambert W is undefined at positive arguments, so the sensible
    // reading of the printed inverse is this reciprocal of the principal
    // branch.
    let arg = std::f64::consts::E * params.delta_gft * params.q_big / params.gamma_big;
    let (lambert_reciprocal_form, lambert_matches, lambert_note) =
        match numerics::lambert_w0(arg) {
            Ok(w) if w > 0.0 => {
                let f_closed = params.delta_gft / w;
                let matches = (f_closed - f_star).abs() <= 1e-6 * f_star.abs().max(1e-12);
                let note = if matches {
                    format!(
                        "reciprocal principal-branch form g/W0({arg:.6}) matches the minimizer; branch -1 is undefined at positive arguments"
                    )
                } else {
                    format!(
                        "reciprocal principal-branch form g/W0({arg:.6}) = {f_closed} does NOT match the minimizer {f_star} (likely a boundary optimum)"
                    )
                };
                (f_closed, matches, note)
            }
            _ => (
                f64::NAN,
                false,
                "Lambert W evaluation failed for the closed-form cross-check".to_string(),
            ),
        };
    Ok(FeeOptimum {
        f_star,
        is_at_star,
        gradient_at_star,
        lambert_reciprocal_form,
        lambert_matches,
        lambert_note,
    })
}
