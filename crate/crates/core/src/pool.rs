//! Concentrated-liquidity pool mechanics on a log-linear tick grid.
//!
//! Prices live on the grid `1.0001^tick`; a pool quantizes ticks to a fixed
//! spacing, so grid interval `k` covers prices `[1.0001^(k·s), 1.0001^((k+1)·s))`
//! (half-open: a price exactly on a boundary belongs to the upper interval).
//! Positions deposit liquidity over a raw-tick range; swaps walk the grid
//! interval by interval over virtual reserves, charging the fee on the
//! numéraire leg on top of the curve amount and crediting it pro rata to the
//! providers whose ranges cover each filled interval.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

/// Base of the tick grid: price at raw tick t is `TICK_BASE^t`.
pub const TICK_BASE: f64 = 1.0001;

/// Price at a raw (unquantized) tick.
pub fn price_of_raw_tick(tick: i32) -> f64 {
    TICK_BASE.powi(tick)
}

/// Tick grid quantized to a spacing. Grid index `k` denotes the half-open
/// price interval `[price_of(k), price_of(k+1))`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TickGrid {
    pub spacing: i32,
}

impl TickGrid {
    pub fn new(spacing: i32) -> Result<Self> {
        if spacing < 1 {
            return Err(ModelError::param("spacing", "tick spacing must be >= 1"));
        }
        Ok(TickGrid { spacing })
    }

    /// Price at the lower boundary of grid interval `k`.
    pub fn price_of(&self, index: i32) -> f64 {
        price_of_raw_tick(index * self.spacing)
    }

    /// Grid index of the interval containing `price`. A price exactly on a
    /// boundary maps to the upper interval; the 1e-9-tick nudge absorbs the
    /// rounding in `ln` so computed boundary prices land on their own index.
    pub fn index_of(&self, price: f64) -> Result<i32> {
        if !(price > 0.0) || !price.is_finite() {
            return Err(ModelError::param("price", "price must be positive and finite"));
        }
        let t = price.ln() / TICK_BASE.ln() / self.spacing as f64;
        Ok((t + 1e-9).floor() as i32)
    }
}

/// Token amounts a liquidity deposit requires over price range
/// `[p_lo, p_hi]` when the pool trades at `p`. Returns `(x, y)` where `x`
/// is token and `y` is numéraire.
pub fn deposit_amounts(liquidity: f64, p_lo: f64, p_hi: f64, p: f64) -> Result<(f64, f64)> {
    if !(p_lo > 0.0 && p_hi.is_finite() && p_lo.is_finite()) || p_hi <= p_lo {
        return Err(ModelError::param("range", "need 0 < p_lo < p_hi, both finite"));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(ModelError::param("price", "price must be positive and finite"));
    }
    if !(liquidity >= 0.0) {
        return Err(ModelError::param("liquidity", "liquidity must be >= 0"));
    }
    let (s_lo, s_hi, s) = (p_lo.sqrt(), p_hi.sqrt(), p.sqrt());
    let (x, y) = if p <= p_lo {
        (liquidity * (1.0 / s_lo - 1.0 / s_hi), 0.0)
    } else if p >= p_hi {
        (0.0, liquidity * (s_hi - s_lo))
    } else {
        (liquidity * (1.0 / s - 1.0 / s_hi), liquidity * (s - s_lo))
    };
    Ok((x, y))
}

/// Liquidity purchasable with `capital` units of numéraire over
/// `[p_lo, p_hi]` at pool price `p`, valuing the token leg at `token_value`.
pub fn liquidity_for_capital(
    capital: f64,
    p_lo: f64,
    p_hi: f64,
    p: f64,
    token_value: f64,
) -> Result<f64> {
    if !(capital >= 0.0) {
        return Err(ModelError::param("capital", "capital must be >= 0"));
    }
    if !(token_value > 0.0) {
        return Err(ModelError::param("token_value", "token value must be positive"));
    }
    let (x1, y1) = deposit_amounts(1.0, p_lo, p_hi, p)?;
    let unit_cost = token_value * x1 + y1;
    if !(unit_cost > 0.0) {
        return Err(ModelError::param("range", "degenerate range: unit liquidity costs nothing"));
    }
    Ok(capital / unit_cost)
}

/// Marginal price after buying `x` token within one tick interval whose
/// lower boundary is `p_min`, against liquidity `l`. Errors if the buy
/// exhausts the interval's virtual reserve (the caller should cross ticks).
pub fn price_after_buy_within_tick(p_min: f64, l: f64, x: f64) -> Result<f64> {
    if !(p_min > 0.0) {
        return Err(ModelError::param("p_min", "tick price must be positive"));
    }
    if !(l > 0.0) {
        return Err(ModelError::param("liquidity", "liquidity must be positive"));
    }
    if !(x >= 0.0) {
        return Err(ModelError::param("quantity", "quantity must be >= 0"));
    }
    let denom = l - p_min.sqrt() * x;
    if denom <= 0.0 {
        return Err(ModelError::InsufficientDepth(format!(
            "buying {x} token exceeds the virtual reserve of this tick interval"
        )));
    }
    Ok(p_min * (l / denom) * (l / denom))
}

/// A liquidity position over a raw-tick range. Fees accrue in numéraire.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Position {
    pub owner: String,
    pub lower_tick: i32,
    pub upper_tick: i32,
    pub liquidity: f64,
    #[serde(default)]
    pub fees_owed: f64,
}

/// Serializable pool state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoolSnapshot {
    pub fee_bps: u32,
    pub tick_spacing: i32,
    pub current_price: f64,
    pub positions: Vec<Position>,
}

/// Outcome of a swap.
///
/// For a buy (`swap_buy_token`): `amount_in` is the numéraire the curve
/// requires, `amount_out` the token delivered, and `fee_paid =
/// fee_fraction × amount_in` is charged on top (the trader's total cost is
/// `amount_in + fee_paid`). For a sell, `amount_in` is the token sold,
/// `fee_paid = fee_fraction × gross numéraire proceeds` is withheld, and
/// `amount_out` is the net numéraire the trader receives. Fees never enter
/// pool reserves; they accrue to `per_provider_fees` pro rata by each
/// provider's liquidity share in every filled interval. `ticks_crossed`
/// counts grid boundaries the price passes through (landing exactly on a
/// boundary enters the upper interval and counts).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwapReceipt {
    pub amount_in: f64,
    pub amount_out: f64,
    pub fee_paid: f64,
    pub ticks_crossed: u32,
    pub end_price: f64,
    pub fully_filled: bool,
    pub per_provider_fees: BTreeMap<String, f64>,
}

/// Pool state: a tick grid, a fee tier, the current price, and positions.
/// Swaps are pure: they return the successor state plus a receipt.
#[derive(Clone, Debug)]
pub struct PoolState {
    pub grid: TickGrid,
    pub fee_bps: u32,
    pub current_price: f64,
    pub positions: Vec<Position>,
}

/// Default tick spacing per fee tier, mirroring common deployments.
pub fn default_spacing(fee_bps: u32) -> Option<i32> {
    match fee_bps {
        1 => Some(1),
        5 => Some(10),
        30 => Some(60),
        100 => Some(200),
        _ => None,
    }
}

impl PoolState {
    /// New empty pool. `spacing` overrides the default for the fee tier;
    /// fee tiers without a default require an explicit spacing.
    pub fn new(fee_bps: u32, spacing: Option<i32>, current_price: f64) -> Result<Self> {
        let s = match spacing.or_else(|| default_spacing(fee_bps)) {
            Some(s) => s,
            None => {
                return Err(ModelError::param(
                    "spacing",
                    format!("no default tick spacing for fee tier {fee_bps} bps; pass one explicitly"),
                ))
            }
        };
        if !(current_price > 0.0) || !current_price.is_finite() {
            return Err(ModelError::param("current_price", "price must be positive and finite"));
        }
        Ok(PoolState {
            grid: TickGrid::new(s)?,
            fee_bps,
            current_price,
            positions: Vec::new(),
        })
    }

    /// Fee as a fraction (bps / 10^4).
    pub fn fee_fraction(&self) -> f64 {
        self.fee_bps as f64 * 1e-4
    }

    /// Add a position with explicit liquidity. Ticks are raw, must align to
    /// the grid spacing, and must satisfy `lower < upper`.
    pub fn add_position(
        &mut self,
        owner: &str,
        lower_tick: i32,
        upper_tick: i32,
        liquidity: f64,
    ) -> Result<()> {
        let s = self.grid.spacing;
        if lower_tick % s != 0 || upper_tick % s != 0 {
            return Err(ModelError::param(
                "range",
                format!("ticks [{lower_tick}, {upper_tick}] must be multiples of spacing {s}"),
            ));
        }
        if lower_tick >= upper_tick {
            return Err(ModelError::param("range", "need lower_tick < upper_tick"));
        }
        if !(liquidity > 0.0) || !liquidity.is_finite() {
            return Err(ModelError::param("liquidity", "liquidity must be positive and finite"));
        }
        self.positions.push(Position {
            owner: owner.to_string(),
            lower_tick,
            upper_tick,
            liquidity,
            fees_owed: 0.0,
        });
        Ok(())
    }

    /// Add a position sized by numéraire capital, valuing the token leg at
    /// the current pool price. Returns the liquidity purchased.
    pub fn add_position_for_capital(
        &mut self,
        owner: &str,
        lower_tick: i32,
        upper_tick: i32,
        capital: f64,
    ) -> Result<f64> {
        let p_lo = price_of_raw_tick(lower_tick);
        let p_hi = price_of_raw_tick(upper_tick);
        let l = liquidity_for_capital(capital, p_lo, p_hi, self.current_price, self.current_price)?;
        self.add_position(owner, lower_tick, upper_tick, l)?;
        Ok(l)
    }

    /// Aggregate liquidity per grid interval index, over the union of all
    /// position spans. An interval is covered by a position when the
    /// position's raw-tick range contains it entirely.
    pub fn tick_liquidity(&self) -> BTreeMap<i32, f64> {
        let s = self.grid.spacing;
        let mut map = BTreeMap::new();
        for pos in &self.positions {
            let k_lo = pos.lower_tick / s;
            let k_hi = pos.upper_tick / s;
            for k in k_lo..k_hi {
                *map.entry(k).or_insert(0.0) += pos.liquidity;
            }
        }
        map
    }

    /// Total token purchasable before liquidity above the current price is
    /// exhausted.
    pub fn depth_above(&self) -> f64 {
        let liq = self.tick_liquidity();
        let Ok(k0) = self.grid.index_of(self.current_price) else {
            return 0.0;
        };
        let mut total = 0.0;
        let mut sqrt_p = self.current_price.sqrt();
        for (&k, &l) in liq.range(k0..) {
            let lo = if k == k0 { sqrt_p } else { self.grid.price_of(k).sqrt() };
            let hi = self.grid.price_of(k + 1).sqrt();
            if l > 0.0 && hi > lo {
                total += l * (1.0 / lo - 1.0 / hi);
            }
            sqrt_p = hi;
        }
        total
    }

    /// Total token the pool can absorb before liquidity below the current
    /// price is exhausted.
    pub fn depth_below(&self) -> f64 {
        let liq = self.tick_liquidity();
        let Ok(k0) = self.grid.index_of(self.current_price) else {
            return 0.0;
        };
        let sqrt_cur = self.current_price.sqrt();
        let mut total = 0.0;
        for (&k, &l) in liq.range(..=k0) {
            let lo = self.grid.price_of(k).sqrt();
            let hi = if k == k0 {
                sqrt_cur
            } else {
                self.grid.price_of(k + 1).sqrt()
            };
            if l > 0.0 && hi > lo {
                total += l * (1.0 / lo - 1.0 / hi);
            }
        }
        total
    }

    /// Buy `qty` token from the pool. Walks grid intervals upward; within an
    /// interval with liquidity `L` at √-price `√p`, a partial fill to
    /// `√p' = √p·L/(L − √p·Δx)` costs numéraire `Δy = L(√p' − √p)`.
    /// With `allow_partial`, an exhausted book returns what filled and sets
    /// `fully_filled = false`; otherwise it is an error.
    pub fn swap_buy_token(&self, qty: f64, allow_partial: bool) -> Result<(PoolState, SwapReceipt)> {
        if !(qty >= 0.0) || !qty.is_finite() {
            return Err(ModelError::param("qty", "quantity must be >= 0 and finite"));
        }
        if qty == 0.0 {
            return Ok((self.clone(), self.empty_receipt()));
        }
        let tau = self.fee_fraction();
        let liq = self.tick_liquidity();
        let max_k = liq.iter().rev().find(|(_, l)| **l > 0.0).map(|(k, _)| *k);
        let mut k = self.grid.index_of(self.current_price)?;
        let mut sqrt_p = self.current_price.sqrt();
        let mut remaining = qty;
        let mut amount_in = 0.0;
        let mut ticks_crossed = 0u32;
        let mut per_provider: BTreeMap<String, f64> = BTreeMap::new();
        let mut new_positions = self.positions.clone();
        let mut fully_filled = true;

        while remaining > 0.0 {
            let exhausted = match max_k {
                None => true,
                Some(mk) => k > mk,
            };
            if exhausted {
                if allow_partial {
                    fully_filled = false;
                    break;
                }
                return Err(ModelError::InsufficientDepth(format!(
                    "buy of {qty} token exceeds posted depth; {remaining} unfilled"
                )));
            }
            let l = liq.get(&k).copied().unwrap_or(0.0);
            let sqrt_top = self.grid.price_of(k + 1).sqrt();
            if l > 0.0 && sqrt_p < sqrt_top {
                let depth = l * (1.0 / sqrt_p - 1.0 / sqrt_top);
                if remaining < depth {
                    let sp_new = sqrt_p * l / (l - sqrt_p * remaining);
                    let dy = l * (sp_new - sqrt_p);
                    credit_fees(&self.positions, &mut new_positions, &mut per_provider, self.grid.spacing, k, l, tau * dy);
                    amount_in += dy;
                    sqrt_p = sp_new;
                    remaining = 0.0;
                } else {
                    let dy = l * (sqrt_top - sqrt_p);
                    credit_fees(&self.positions, &mut new_positions, &mut per_provider, self.grid.spacing, k, l, tau * dy);
                    amount_in += dy;
                    remaining -= depth;
                    sqrt_p = sqrt_top;
                    k += 1;
                    ticks_crossed += 1;
                }
            } else {
                // Empty interval (or already at its top): glide to the next boundary.
                sqrt_p = sqrt_p.max(sqrt_top);
                k += 1;
                ticks_crossed += 1;
            }
        }

        let fee_paid = tau * amount_in;
        let receipt = SwapReceipt {
            amount_in,
            amount_out: qty - remaining,
            fee_paid,
            ticks_crossed,
            end_price: sqrt_p * sqrt_p,
            fully_filled,
            per_provider_fees: per_provider,
        };
        let next = PoolState {
            grid: self.grid,
            fee_bps: self.fee_bps,
            current_price: receipt.end_price,
            positions: new_positions,
        };
        Ok((next, receipt))
    }

    /// Sell `qty` token to the pool: the mirror of [`Self::swap_buy_token`].
    /// Within an interval, `√p' = L·√p/(L + √p·Δx)` and the gross numéraire
    /// out is `Δy = L(√p − √p')`; the fee is withheld from the proceeds.
    pub fn swap_sell_token(&self, qty: f64, allow_partial: bool) -> Result<(PoolState, SwapReceipt)> {
        if !(qty >= 0.0) || !qty.is_finite() {
            return Err(ModelError::param("qty", "quantity must be >= 0 and finite"));
        }
        if qty == 0.0 {
            return Ok((self.clone(), self.empty_receipt()));
        }
        let tau = self.fee_fraction();
        let liq = self.tick_liquidity();
        let min_k = liq.iter().find(|(_, l)| **l > 0.0).map(|(k, _)| *k);
        let mut k = self.grid.index_of(self.current_price)?;
        let mut sqrt_p = self.current_price.sqrt();
        let mut remaining = qty;
        let mut gross_out = 0.0;
        let mut ticks_crossed = 0u32;
        let mut per_provider: BTreeMap<String, f64> = BTreeMap::new();
        let mut new_positions = self.positions.clone();
        let mut fully_filled = true;

        while remaining > 0.0 {
            let exhausted = match min_k {
                None => true,
                Some(mk) => k < mk,
            };
            if exhausted {
                if allow_partial {
                    fully_filled = false;
                    break;
                }
                return Err(ModelError::InsufficientDepth(format!(
                    "sell of {qty} token exceeds posted depth; {remaining} unfilled"
                )));
            }
            let l = liq.get(&k).copied().unwrap_or(0.0);
            let sqrt_bot = self.grid.price_of(k).sqrt();
            if l > 0.0 && sqrt_p > sqrt_bot {
                let depth = l * (1.0 / sqrt_bot - 1.0 / sqrt_p);
                if remaining < depth {
                    let sp_new = l * sqrt_p / (l + sqrt_p * remaining);
                    let dy = l * (sqrt_p - sp_new);
                    credit_fees(&self.positions, &mut new_positions, &mut per_provider, self.grid.spacing, k, l, tau * dy);
                    gross_out += dy;
                    sqrt_p = sp_new;
                    remaining = 0.0;
                } else {
                    let dy = l * (sqrt_p - sqrt_bot);
                    credit_fees(&self.positions, &mut new_positions, &mut per_provider, self.grid.spacing, k, l, tau * dy);
                    gross_out += dy;
                    remaining -= depth;
                    sqrt_p = sqrt_bot;
                    k -= 1;
                    ticks_crossed += 1;
                }
            } else {
                // Empty interval (or already at its bottom): glide downward.
                sqrt_p = sqrt_p.min(sqrt_bot);
                k -= 1;
                ticks_crossed += 1;
            }
        }

        let fee_paid = tau * gross_out;
        let receipt = SwapReceipt {
            amount_in: qty - remaining,
            amount_out: gross_out - fee_paid,
            fee_paid,
            ticks_crossed,
            end_price: sqrt_p * sqrt_p,
            fully_filled,
            per_provider_fees: per_provider,
        };
        let next = PoolState {
            grid: self.grid,
            fee_bps: self.fee_bps,
            current_price: receipt.end_price,
            positions: new_positions,
        };
        Ok((next, receipt))
    }

    fn empty_receipt(&self) -> SwapReceipt {
        SwapReceipt {
            amount_in: 0.0,
            amount_out: 0.0,
            fee_paid: 0.0,
            ticks_crossed: 0,
            end_price: self.current_price,
            fully_filled: true,
            per_provider_fees: BTreeMap::new(),
        }
    }

    pub fn snapshot(&self) -> PoolSnapshot {
        PoolSnapshot {
            fee_bps: self.fee_bps,
            tick_spacing: self.grid.spacing,
            current_price: self.current_price,
            positions: self.positions.clone(),
        }
    }

    pub fn from_snapshot(snap: &PoolSnapshot) -> Result<Self> {
        let mut pool = PoolState::new(snap.fee_bps, Some(snap.tick_spacing), snap.current_price)?;
        for p in &snap.positions {
            pool.add_position(&p.owner, p.lower_tick, p.upper_tick, p.liquidity)?;
            pool.positions.last_mut().expect("just pushed").fees_owed = p.fees_owed;
        }
        Ok(pool)
    }
}

/// Credit `fee` to every position covering grid interval `k`, pro rata by
/// liquidity share of the interval total `l_total`.
fn credit_fees(
    old_positions: &[Position],
    new_positions: &mut [Position],
    per_provider: &mut BTreeMap<String, f64>,
    spacing: i32,
    k: i32,
    l_total: f64,
    fee: f64,
) {
    if fee == 0.0 || l_total <= 0.0 {
        return;
    }
    let lo = k * spacing;
    let hi = (k + 1) * spacing;
    for (i, pos) in old_positions.iter().enumerate() {
        if pos.lower_tick <= lo && hi <= pos.upper_tick && pos.liquidity > 0.0 {
            let amt = fee * pos.liquidity / l_total;
            new_positions[i].fees_owed += amt;
            *per_provider.entry(pos.owner.clone()).or_insert(0.0) += amt;
        }
    }
}

/// The two-provider worked example: provider A spans four grid intervals,
/// provider B the top two, both funded with 20 000 numéraire; a first trade
/// drains exactly the first interval, a second trade runs through the
/// shared book.
#[derive(Clone, Debug, Serialize)]
pub struct WorkedExample {
    pub tick_prices: [f64; 5],
    pub liquidity_a: f64,
    pub liquidity_b: f64,
    pub deposit_a_token: f64,
    pub deposit_a_numeraire: f64,
    pub deposit_b_token: f64,
    pub deposit_b_token_per_interval: f64,
    pub first_interval_depth: f64,
    pub trade1: SwapReceipt,
    pub trade2: SwapReceipt,
    pub trade2_fee_a: f64,
    pub trade2_fee_b: f64,
    pub end_state: PoolSnapshot,
}

/// Build and run the worked example on a 60-tick grid at 100 bps.
pub fn worked_example() -> Result<WorkedExample> {
    let ticks = [73080, 73140, 73200, 73260, 73320];
    let tick_prices = [
        price_of_raw_tick(ticks[0]),
        price_of_raw_tick(ticks[1]),
        price_of_raw_tick(ticks[2]),
        price_of_raw_tick(ticks[3]),
        price_of_raw_tick(ticks[4]),
    ];
    let mut pool = PoolState::new(100, Some(60), tick_prices[1])?;
    let liquidity_a = pool.add_position_for_capital("A", ticks[0], ticks[4], 20_000.0)?;
    let liquidity_b = pool.add_position_for_capital("B", ticks[2], ticks[4], 20_000.0)?;
    let (deposit_a_token, deposit_a_numeraire) =
        deposit_amounts(liquidity_a, tick_prices[0], tick_prices[4], tick_prices[1])?;
    let (deposit_b_token, _) =
        deposit_amounts(liquidity_b, tick_prices[2], tick_prices[4], tick_prices[1])?;
    let deposit_b_token_per_interval = liquidity_b
        * (1.0 / tick_prices[2].sqrt() - 1.0 / tick_prices[3].sqrt());

    // First trade: exactly the token depth of the current interval, so the
    // price lands on the next boundary.
    let first_interval_depth =
        liquidity_a * (1.0 / tick_prices[1].sqrt() - 1.0 / tick_prices[2].sqrt());
    let (pool, trade1) = pool.swap_buy_token(first_interval_depth, false)?;

    // Second trade: 6.67 token against the now-shared book.
    let (pool, trade2) = pool.swap_buy_token(6.67, false)?;
    let trade2_fee_a = trade2.per_provider_fees.get("A").copied().unwrap_or(0.0);
    let trade2_fee_b = trade2.per_provider_fees.get("B").copied().unwrap_or(0.0);

    Ok(WorkedExample {
        tick_prices,
        liquidity_a,
        liquidity_b,
        deposit_a_token,
        deposit_a_numeraire,
        deposit_b_token,
        deposit_b_token_per_interval,
        first_interval_depth,
        trade1,
        trade2,
        trade2_fee_a,
        trade2_fee_b,
        end_state: pool.snapshot(),
    })
}
