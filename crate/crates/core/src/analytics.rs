//! Event-stream measurement kernels over swap/mint/burn logs.
//!
//! Input is a CSV of `MarketEvent` rows totally ordered by (block,
//! position-in-block). On top of that stream the module computes per-swap
//! and per-day loss-versus-rebalancing (LVR) against instant or lagged
//! benchmarks, impermanent loss of tick ranges, fee yield, a range-based
//! volatility proxy, a lowest-bid gas benchmark, JIT (mint–swap–burn)
//! sandwich detection, per-wallet liquidity-cycle durations with
//! out-of-range classification, and a pool-day panel with running balances,
//! TVL marks, and within-group shares.
//!
//! Conventions: all values stay in the pair's own numéraire; a day is a UTC
//! epoch day (timestamp / 86400); pool groups are per input file (one pair
//! per file); swap `amount0`/`amount1` are the pool's signed token and
//! numéraire legs (negative = paid out to the trader); mint amounts are
//! deposits (positive), burn amounts are withdrawals (positive).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::numerics::{self, KahanSum};
use crate::{pool, ModelError, Result};

pub const EVENTS_CSV_HEADER: &str =
    "block,position,tx_hash,timestamp,pool_id,fee_bps,kind,wallet,amount0,amount1,tick_lower,tick_upper,gas_bid";

const SECONDS_PER_DAY: i64 = 86_400;
const SECONDS_PER_HOUR: i64 = 3_600;
/// Lagged benchmark: first observation at or after +1 hour...
const LAG_SECONDS: i64 = 3_600;
/// ...but no staler than this past the lag target.
const LAG_STALENESS_CAP: i64 = 900;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Swap,
    Mint,
    Burn,
}

/// One on-chain pool event.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarketEvent {
    pub block: u64,
    pub position: u32,
    pub tx_hash: String,
    pub timestamp: i64,
    pub pool_id: String,
    pub fee_bps: u32,
    pub kind: EventKind,
    pub wallet: String,
    pub amount0: f64,
    pub amount1: f64,
    pub tick_lower: Option<i32>,
    pub tick_upper: Option<i32>,
    pub gas_bid: f64,
}

impl MarketEvent {
    fn validate(&self, idx: usize) -> Result<()> {
        let at = |msg: String| ModelError::Data(format!("event {idx} ({}): {msg}", self.tx_hash));
        match self.kind {
            EventKind::Swap => {
                if self.amount0 == 0.0 {
                    return Err(at("swap with zero token leg".into()));
                }
                if !(self.amount0 * self.amount1 < 0.0) {
                    return Err(at("swap legs must have opposite signs".into()));
                }
            }
            EventKind::Mint | EventKind::Burn => match (self.tick_lower, self.tick_upper) {
                (Some(lo), Some(hi)) if lo < hi => {}
                _ => return Err(at("mint/burn needs tick_lower < tick_upper".into())),
            },
        }
        if !(self.gas_bid >= 0.0) {
            return Err(at("gas bid must be >= 0".into()));
        }
        Ok(())
    }

    /// Execution price of a swap: −Δy/Δx.
    pub fn swap_price(&self) -> f64 {
        -self.amount1 / self.amount0
    }

    /// UTC epoch day of the event.
    pub fn day(&self) -> i64 {
        self.timestamp.div_euclid(SECONDS_PER_DAY)
    }
}

/// Read a `MarketEvent` CSV (header as in `EVENTS_CSV_HEADER`).
pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<MarketEvent>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let ev: MarketEvent = row.map_err(|e| ModelError::Data(format!("events csv: {e}")))?;
        out.push(ev);
    }
    Ok(out)
}

/// Write events back out in the canonical CSV layout.
pub fn write_events_csv<W: Write>(writer: W, events: &[MarketEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for ev in events {
        wtr.serialize(ev)
            .map_err(|e| ModelError::Data(format!("events csv write: {e}")))?;
    }
    wtr.flush()
        .map_err(|e| ModelError::Data(format!("events csv write: {e}")))?;
    Ok(())
}

/// Per-swap loss versus rebalancing against a benchmark price p′:
/// d·Δx·(p_swap − p′) with p_swap = −Δy/Δx and d = +1 for a buy
/// (Δx < 0, token leaves the pool), −1 for a sell.
pub fn lvr_swap(event: &MarketEvent, benchmark_price: f64) -> Result<f64> {
    if event.kind != EventKind::Swap || event.amount0 == 0.0 {
        return Err(ModelError::Data(format!(
            "lvr_swap needs a swap with a nonzero token leg (tx {})",
            event.tx_hash
        )));
    }
    let d = if event.amount0 < 0.0 { 1.0 } else { -1.0 };
    Ok(d * event.amount0 * (event.swap_price() - benchmark_price))
}

/// Benchmark price used by daily LVR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LvrBenchmark {
    /// The pool's own next swap price (proxy for the post-swap pool price).
    Instant,
    /// TVL-weighted cross-pool price at the first observation ≥ 1 hour
    /// later, subject to a 900 s staleness cap.
    Lagged,
}

/// Daily LVR aggregation result.
#[derive(Clone, Debug, Serialize)]
pub struct LvrDayResult {
    pub pool_id: String,
    pub day: i64,
    /// Winsorized per-swap LVR summed and scaled by TVL, in basis points;
    /// None when the day's TVL mark is unusable.
    pub lvr_bps: Option<f64>,
    pub swaps_included: usize,
    /// Swaps skipped because no benchmark observation existed.
    pub swaps_excluded: usize,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug)]
struct BalancePoint {
    ts: i64,
    x: f64,
    y: f64,
    price: Option<f64>,
}

#[derive(Clone, Debug, Default)]
struct PoolSeries {
    /// Index into the sorted event stream, per swap, in order.
    swap_indices: Vec<usize>,
    swap_times: Vec<i64>,
    swap_prices: Vec<f64>,
    balances: Vec<BalancePoint>,
}

impl PoolSeries {
    /// Last trade price at or before `ts` (earlier two-sided mint implied
    /// price before the first trade).
    fn price_at(&self, ts: i64) -> Option<f64> {
        let i = self.balances.partition_point(|b| b.ts <= ts);
        self.balances[..i].iter().rev().find_map(|b| b.price)
    }

    /// Marked reserves value at or before `ts`; the token leg is dropped
    /// when no price has ever printed.
    fn tvl_at(&self, ts: i64) -> f64 {
        let i = self.balances.partition_point(|b| b.ts <= ts);
        if i == 0 {
            return 0.0;
        }
        let b = self.balances[i - 1];
        match self.price_at(ts) {
            Some(p) => b.x * p + b.y,
            None => b.y,
        }
    }

    /// First swap price in [ts, ts + cap], if any.
    fn first_price_in_window(&self, ts: i64, cap: i64) -> Option<f64> {
        let i = self.swap_times.partition_point(|&t| t < ts);
        if i < self.swap_times.len() && self.swap_times[i] <= ts + cap {
            Some(self.swap_prices[i])
        } else {
            None
        }
    }
}

/// Sorted event stream with per-pool price and balance series; the shared
/// input of the daily measures and the panel builder.
pub struct EventBook {
    events: Vec<MarketEvent>,
    pools: BTreeMap<String, PoolSeries>,
}

impl EventBook {
    /// Validate, stable-sort by (block, position), and index the stream.
    pub fn new(mut events: Vec<MarketEvent>) -> Result<Self> {
        events.sort_by_key(|e| (e.block, e.position));
        for (i, ev) in events.iter().enumerate() {
            ev.validate(i)?;
        }
        let mut pools: BTreeMap<String, PoolSeries> = BTreeMap::new();
        let mut running: BTreeMap<String, (f64, f64)> = BTreeMap::new();
        for (i, ev) in events.iter().enumerate() {
            let series = pools.entry(ev.pool_id.clone()).or_default();
            let bal = running.entry(ev.pool_id.clone()).or_insert((0.0, 0.0));
            let mut price = None;
            match ev.kind {
                EventKind::Swap => {
                    bal.0 += ev.amount0;
                    bal.1 += ev.amount1;
                    price = Some(ev.swap_price());
                    series.swap_indices.push(i);
                    series.swap_times.push(ev.timestamp);
                    series.swap_prices.push(ev.swap_price());
                }
                EventKind::Mint => {
                    bal.0 += ev.amount0;
                    bal.1 += ev.amount1;
                    // A two-sided deposit implies a price, but only until
                    // the pool's first trade prints a real one.
                    if series.swap_prices.is_empty() && ev.amount0 > 0.0 && ev.amount1 > 0.0 {
                        price = Some(ev.amount1 / ev.amount0);
                    }
                }
                EventKind::Burn => {
                    bal.0 -= ev.amount0;
                    bal.1 -= ev.amount1;
                }
            }
            // Trades overwrite the implied-price fallback; otherwise carry
            // the previous mark forward implicitly (price_at scans back).
            series.balances.push(BalancePoint {
                ts: ev.timestamp,
                x: bal.0,
                y: bal.1,
                price,
            });
        }
        Ok(EventBook { events, pools })
    }

    pub fn events(&self) -> &[MarketEvent] {
        &self.events
    }

    pub fn pool_ids(&self) -> Vec<String> {
        self.pools.keys().cloned().collect()
    }

    /// End-of-moment TVL mark for one pool.
    pub fn tvl_at(&self, pool_id: &str, ts: i64) -> f64 {
        self.pools.get(pool_id).map_or(0.0, |s| s.tvl_at(ts))
    }

    /// Benchmark price for the `swap_pos`-th swap of `pool_id`.
    fn benchmark_price(
        &self,
        pool_id: &str,
        swap_pos: usize,
        benchmark: LvrBenchmark,
    ) -> Option<f64> {
        let series = self.pools.get(pool_id)?;
        match benchmark {
            LvrBenchmark::Instant => series.swap_prices.get(swap_pos + 1).copied(),
            LvrBenchmark::Lagged => {
                let target = series.swap_times[swap_pos] + LAG_SECONDS;
                let hour_end =
                    (target.div_euclid(SECONDS_PER_HOUR) + 1) * SECONDS_PER_HOUR;
                let mut weighted = 0.0;
                let mut weight = 0.0;
                for s in self.pools.values() {
                    if let Some(p) = s.first_price_in_window(target, LAG_STALENESS_CAP) {
                        let w = s.tvl_at(hour_end).max(0.0);
                        weighted += w * p;
                        weight += w;
                    }
                }
                if weight > 0.0 {
                    Some(weighted / weight)
                } else {
                    None
                }
            }
        }
    }
}

/// Daily LVR for one pool-day: winsorize the per-swap values at the
/// 0.5/99.5 percentiles within the pool-day, sum, divide by the end-of-day
/// TVL, and scale to basis points.
pub fn lvr_daily(
    book: &EventBook,
    pool_id: &str,
    day: i64,
    benchmark: LvrBenchmark,
    tvl_end: f64,
) -> Result<LvrDayResult> {
    let series = book
        .pools
        .get(pool_id)
        .ok_or_else(|| ModelError::Data(format!("unknown pool `{pool_id}`")))?;
    let mut values = Vec::new();
    let mut excluded = 0usize;
    for (pos, &idx) in series.swap_indices.iter().enumerate() {
        let ev = &book.events[idx];
        if ev.day() != day {
            continue;
        }
        match book.benchmark_price(pool_id, pos, benchmark) {
            Some(p) => values.push(lvr_swap(ev, p)?),
            None => excluded += 1,
        }
    }
    let included = values.len();
    if tvl_end <= 0.0 {
        return Ok(LvrDayResult {
            pool_id: pool_id.to_string(),
            day,
            lvr_bps: None,
            swaps_included: included,
            swaps_excluded: excluded,
            flagged: true,
        });
    }
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut sum = KahanSum::default();
    if !sorted.is_empty() {
        let lo = numerics::percentile(&sorted, 0.5);
        let hi = numerics::percentile(&sorted, 99.5);
        for v in &values {
            sum.add(v.clamp(lo, hi));
        }
    }
    Ok(LvrDayResult {
        pool_id: pool_id.to_string(),
        day,
        lvr_bps: Some(sum.total() / tvl_end * 1e4),
        swaps_included: included,
        swaps_excluded: excluded,
        flagged: false,
    })
}

/// Impermanent loss of a liquidity-`l` position on [p_lo, p_hi] when the
/// price moves p0 → p1: (V_hold − V_pos)/V_hold with both portfolios marked
/// at p1 and reserves from the three-branch range formulas. Degenerate
/// positions (V_hold = 0) report 0.
pub fn impermanent_loss(l: f64, p_lo: f64, p_hi: f64, p0: f64, p1: f64) -> Result<f64> {
    if !(p0 > 0.0 && p1 > 0.0) {
        return Err(ModelError::param("p0", "prices must be positive"));
    }
    let (x0, y0) = pool::deposit_amounts(l, p_lo, p_hi, p0)?;
    let (x1, y1) = pool::deposit_amounts(l, p_lo, p_hi, p1)?;
    let v_hold = p1 * x0 + y0;
    let v_pos = p1 * x1 + y1;
    if v_hold == 0.0 {
        return Ok(0.0);
    }
    Ok((v_hold - v_pos) / v_hold)
}

/// IL of a symmetric position [p0/α, α·p0] opened at p0 and marked at p1.
pub fn symmetric_il(p0: f64, p1: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(ModelError::param("alpha", "width factor must exceed 1"));
    }
    impermanent_loss(1.0, p0 / alpha, p0 * alpha, p0, p1)
}

/// Default symmetric-position width for the panel's IL column.
pub const IL_DEFAULT_ALPHA: f64 = 1.05;

/// A detected JIT sandwich: mint at position k, swap at k+1, burn at k+2,
/// same block and pool, mint and burn by the same wallet.
#[derive(Clone, Debug, Serialize)]
pub struct JitTriple {
    pub mint_index: usize,
    pub swap_index: usize,
    pub burn_index: usize,
    pub block: u64,
    pub pool_id: String,
    pub wallet: String,
    pub mint_tx: String,
    pub swap_tx: String,
    pub burn_tx: String,
}

/// Scan a sorted stream for JIT sandwiches.
pub fn jit_detect(events: &[MarketEvent]) -> Vec<JitTriple> {
    let mut by_block: BTreeMap<(u64, u32), usize> = BTreeMap::new();
    for (i, ev) in events.iter().enumerate() {
        by_block.insert((ev.block, ev.position), i);
    }
    let mut out = Vec::new();
    for (i, mint) in events.iter().enumerate() {
        if mint.kind != EventKind::Mint {
            continue;
        }
        let swap_i = match by_block.get(&(mint.block, mint.position + 1)) {
            Some(&j) => j,
            None => continue,
        };
        let burn_i = match by_block.get(&(mint.block, mint.position + 2)) {
            Some(&j) => j,
            None => continue,
        };
        let swap = &events[swap_i];
        let burn = &events[burn_i];
        if swap.kind == EventKind::Swap
            && swap.pool_id == mint.pool_id
            && burn.kind == EventKind::Burn
            && burn.pool_id == mint.pool_id
            && burn.wallet == mint.wallet
        {
            out.push(JitTriple {
                mint_index: i,
                swap_index: swap_i,
                burn_index: burn_i,
                block: mint.block,
                pool_id: mint.pool_id.clone(),
                wallet: mint.wallet.clone(),
                mint_tx: mint.tx_hash.clone(),
                swap_tx: swap.tx_hash.clone(),
                burn_tx: burn.tx_hash.clone(),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CycleKind {
    MintToBurn,
    BurnToMint,
}

/// One completed wallet-pool liquidity cycle.
#[derive(Clone, Debug, Serialize)]
pub struct LiquidityCycle {
    pub wallet: String,
    pub pool_id: String,
    pub kind: CycleKind,
    /// Timestamp gap between the two legs, in hours.
    pub hours: f64,
    /// Epoch day of the second leg.
    pub day: i64,
    /// True when the second leg's tick range does not straddle the latest
    /// pool trade price (no observed price yet ⇒ false).
    pub out_of_range: bool,
}

/// Pair mints with subsequent burns (and burns with subsequent mints) per
/// wallet-pool, FIFO. Zero-withdrawal burns are dropped from the sample.
pub fn liquidity_cycles(book: &EventBook) -> Vec<LiquidityCycle> {
    let mut pending_mints: BTreeMap<(String, String), VecDeque<usize>> = BTreeMap::new();
    let mut pending_burns: BTreeMap<(String, String), VecDeque<usize>> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, ev) in book.events.iter().enumerate() {
        let key = (ev.wallet.clone(), ev.pool_id.clone());
        match ev.kind {
            EventKind::Mint => {
                if let Some(q) = pending_burns.get_mut(&key) {
                    if let Some(first) = q.pop_front() {
                        out.push(make_cycle(book, first, i, CycleKind::BurnToMint));
                    }
                }
                pending_mints.entry(key).or_default().push_back(i);
            }
            EventKind::Burn => {
                if ev.amount0 == 0.0 && ev.amount1 == 0.0 {
                    continue; // zero-withdrawal burns are excluded
                }
                if let Some(q) = pending_mints.get_mut(&key) {
                    if let Some(first) = q.pop_front() {
                        out.push(make_cycle(book, first, i, CycleKind::MintToBurn));
                    }
                }
                pending_burns.entry(key).or_default().push_back(i);
            }
            EventKind::Swap => {}
        }
    }
    out
}

fn make_cycle(book: &EventBook, first: usize, second: usize, kind: CycleKind) -> LiquidityCycle {
    let a = &book.events[first];
    let b = &book.events[second];
    let out_of_range = match (b.tick_lower, b.tick_upper) {
        (Some(lo), Some(hi)) => {
            match book
                .pools
                .get(&b.pool_id)
                .and_then(|s| s.price_at(b.timestamp))
            {
                Some(p) => {
                    let p_lo = pool::price_of_raw_tick(lo);
                    let p_hi = pool::price_of_raw_tick(hi);
                    !(p > p_lo && p < p_hi)
                }
                None => false,
            }
        }
        _ => false,
    };
    LiquidityCycle {
        wallet: b.wallet.clone(),
        pool_id: b.pool_id.clone(),
        kind,
        hours: (b.timestamp - a.timestamp) as f64 / SECONDS_PER_HOUR as f64,
        day: b.day(),
        out_of_range,
    }
}

/// Daily fee yield in basis points: fee_bps · volume / previous-day TVL.
pub fn liquidity_yield_daily(volume: f64, tvl_prev: f64, fee_bps: f64) -> Result<f64> {
    if !(tvl_prev > 0.0) {
        return Err(ModelError::Data(format!(
            "liquidity yield needs a positive previous-day TVL (got {tvl_prev})"
        )));
    }
    Ok(fee_bps * volume / tvl_prev)
}

/// Range-based volatility proxy: log(high/low) / (2·√(log 2)).
pub fn range_volatility(high: f64, low: f64) -> Result<f64> {
    if !(low > 0.0) || high < low {
        return Err(ModelError::param("low", "need high >= low > 0"));
    }
    Ok((high / low).ln() / (2.0 * (2.0f64.ln()).sqrt()))
}

/// Mean of the `n_lowest` smallest gas bids among the day's mint/burn
/// events; None when the day has none.
pub fn gas_benchmark(day_events: &[MarketEvent], n_lowest: usize) -> Option<f64> {
    let mut bids: Vec<f64> = day_events
        .iter()
        .filter(|e| e.kind != EventKind::Swap)
        .map(|e| e.gas_bid)
        .collect();
    if bids.is_empty() || n_lowest == 0 {
        return None;
    }
    bids.sort_by(f64::total_cmp);
    let take = n_lowest.min(bids.len());
    Some(bids[..take].iter().sum::<f64>() / take as f64)
}

/// Default bid-count for the gas benchmark.
pub const GAS_BENCHMARK_N: usize = 1000;

/// One pool-day of the panel.
#[derive(Clone, Debug, Serialize)]
pub struct PanelRow {
    pub pool_id: String,
    pub day: i64,
    pub tvl_end: f64,
    /// Numéraire-leg trading volume.
    pub volume: f64,
    pub trade_count: u64,
    pub median_trade: Option<f64>,
    /// Median mint value (JIT-flagged mints excluded).
    pub median_mint: Option<f64>,
    /// Distinct wallets with a mint or burn that day.
    pub lp_wallets: u64,
    pub liquidity_share: f64,
    pub volume_share: f64,
    /// Daily LVR against the lagged cross-pool benchmark, bps.
    pub lvr_1h: Option<f64>,
    /// Daily LVR against the pool's own next-trade price, bps.
    pub lvr_instant: Option<f64>,
    /// Summed hourly IL of a symmetric ±5% position, bps.
    pub il_5pct: Option<f64>,
    /// fee_bps · volume / previous-day TVL, bps.
    pub liq_yield: Option<f64>,
    /// Range volatility of the day's trade prices.
    pub volatility: Option<f64>,
    /// Set when a running token balance went negative (data corruption).
    pub corrupt: bool,
}

/// Build the pool-day panel: every pool × every day spanned by the stream,
/// with running balances from zero, end-of-day TVL marks, within-file
/// shares, and the daily measures.
pub fn build_panel(book: &EventBook) -> Result<Vec<PanelRow>> {
    if book.events.is_empty() {
        return Ok(Vec::new());
    }
    let jit_mints: BTreeSet<usize> = jit_detect(&book.events)
        .into_iter()
        .map(|t| t.mint_index)
        .collect();
    let day_min = book.events.iter().map(|e| e.day()).min().unwrap();
    let day_max = book.events.iter().map(|e| e.day()).max().unwrap();

    struct DayAcc {
        volume: f64,
        trades: Vec<f64>,
        mints: Vec<f64>,
        wallets: BTreeSet<String>,
        price_high: f64,
        price_low: f64,
        corrupt: bool,
        fee_bps: u32,
    }
    let mut acc: BTreeMap<(String, i64), DayAcc> = BTreeMap::new();
    let mut running: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut fee_of: BTreeMap<String, u32> = BTreeMap::new();
    for (i, ev) in book.events.iter().enumerate() {
        fee_of.entry(ev.pool_id.clone()).or_insert(ev.fee_bps);
        let a = acc
            .entry((ev.pool_id.clone(), ev.day()))
            .or_insert_with(|| DayAcc {
                volume: 0.0,
                trades: Vec::new(),
                mints: Vec::new(),
                wallets: BTreeSet::new(),
                price_high: f64::NEG_INFINITY,
                price_low: f64::INFINITY,
                corrupt: false,
                fee_bps: ev.fee_bps,
            });
        let bal = running.entry(ev.pool_id.clone()).or_insert((0.0, 0.0));
        match ev.kind {
            EventKind::Swap => {
                bal.0 += ev.amount0;
                bal.1 += ev.amount1;
                a.volume += ev.amount1.abs();
                a.trades.push(ev.amount1.abs());
                let p = ev.swap_price();
                a.price_high = a.price_high.max(p);
                a.price_low = a.price_low.min(p);
            }
            EventKind::Mint => {
                bal.0 += ev.amount0;
                bal.1 += ev.amount1;
                a.wallets.insert(ev.wallet.clone());
                if !jit_mints.contains(&i) {
                    let price = book
                        .pools
                        .get(&ev.pool_id)
                        .and_then(|s| s.price_at(ev.timestamp));
                    let value = ev.amount1 + price.map_or(0.0, |p| p * ev.amount0);
                    a.mints.push(value);
                }
            }
            EventKind::Burn => {
                bal.0 -= ev.amount0;
                bal.1 -= ev.amount1;
                a.wallets.insert(ev.wallet.clone());
            }
        }
        if bal.0 < -1e-9 || bal.1 < -1e-9 {
            a.corrupt = true;
        }
    }

    let pool_ids = book.pool_ids();
    let mut rows = Vec::new();
    let mut prev_tvl: BTreeMap<String, f64> = BTreeMap::new();
    for day in day_min..=day_max {
        let day_end = (day + 1) * SECONDS_PER_DAY - 1;
        let tvls: BTreeMap<&str, f64> = pool_ids
            .iter()
            .map(|p| (p.as_str(), book.tvl_at(p, day_end)))
            .collect();
        let tvl_total: f64 = tvls.values().map(|v| v.max(0.0)).sum();
        let vol_total: f64 = pool_ids
            .iter()
            .map(|p| acc.get(&(p.clone(), day)).map_or(0.0, |a| a.volume))
            .sum();
        for pool_id in &pool_ids {
            let tvl_end = tvls[pool_id.as_str()];
            let a = acc.get(&(pool_id.clone(), day));
            let volume = a.map_or(0.0, |a| a.volume);
            let median = |v: &Vec<f64>| {
                if v.is_empty() {
                    None
                } else {
                    let mut s = v.clone();
                    s.sort_by(f64::total_cmp);
                    Some(numerics::percentile(&s, 50.0))
                }
            };
            let lvr_1h = lvr_daily(book, pool_id, day, LvrBenchmark::Lagged, tvl_end)?.lvr_bps;
            let lvr_instant =
                lvr_daily(book, pool_id, day, LvrBenchmark::Instant, tvl_end)?.lvr_bps;
            let il_5pct = daily_symmetric_il(book, pool_id, day)?;
            let liq_yield = match (prev_tvl.get(pool_id), a) {
                (Some(&tp), Some(a)) if tp > 0.0 => {
                    Some(liquidity_yield_daily(a.volume, tp, a.fee_bps as f64)?)
                }
                _ => None,
            };
            let volatility = a.and_then(|a| {
                if a.price_high.is_finite() && a.price_low.is_finite() {
                    range_volatility(a.price_high, a.price_low).ok()
                } else {
                    None
                }
            });
            rows.push(PanelRow {
                pool_id: pool_id.clone(),
                day,
                tvl_end,
                volume,
                trade_count: a.map_or(0, |a| a.trades.len() as u64),
                median_trade: a.and_then(|a| median(&a.trades)),
                median_mint: a.and_then(|a| median(&a.mints)),
                lp_wallets: a.map_or(0, |a| a.wallets.len() as u64),
                liquidity_share: if tvl_total > 0.0 {
                    tvl_end.max(0.0) / tvl_total
                } else {
                    0.0
                },
                volume_share: if vol_total > 0.0 { volume / vol_total } else { 0.0 },
                lvr_1h,
                lvr_instant,
                il_5pct,
                liq_yield,
                volatility,
                corrupt: a.is_some_and(|a| a.corrupt),
            });
        }
        for pool_id in &pool_ids {
            prev_tvl.insert(pool_id.clone(), tvls[pool_id.as_str()]);
        }
    }
    Ok(rows)
}

/// Sum of hourly symmetric-position ILs over a pool-day, in basis points;
/// None before the pool's first observed price.
fn daily_symmetric_il(book: &EventBook, pool_id: &str, day: i64) -> Result<Option<f64>> {
    let series = match book.pools.get(pool_id) {
        Some(s) => s,
        None => return Ok(None),
    };
    let mut sum = KahanSum::default();
    let mut any = false;
    for hour in 0..24 {
        let start = day * SECONDS_PER_DAY + hour * SECONDS_PER_HOUR;
        let end = start + SECONDS_PER_HOUR;
        if let Some(p0) = series.price_at(start) {
            let p1 = series.price_at(end).unwrap_or(p0);
            sum.add(symmetric_il(p0, p1, IL_DEFAULT_ALPHA)?);
            any = true;
        }
    }
    Ok(if any { Some(sum.total() * 1e4) } else { None })
}
