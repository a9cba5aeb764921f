//! The demand side: elasticity system, sequential demand sampler, price
//! inversion, and willingness-to-pay generation.
//!
//! The provider's learnable linear response is `d = H·p`, solved in either
//! direction. User behavior is driven by a separate willingness-to-pay table
//! derived from per-program single-price demand curves: program `i`'s demand
//! at own price `p` (other prices held at a reference) is
//! `max(0, C_i − h_ii·p)` with intercept `C_i = D_i + Σ_{j≠i} h_ij·p_ref`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};

pub type PriceVector = Vec<f64>;
pub type DemandVector = Vec<f64>;
pub type MaxDemandProfile = Vec<f64>;

pub const SOLVE_TOLERANCE: f64 = 1e-9;
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default number of points on the shared price grid for curve comparisons.
pub const GRID_POINTS: usize = 101;

// ─────────────────────────── elasticity matrix ───────────────────────────

/// Square matrix of self (diagonal) and cross (off-diagonal) elasticities.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticityMatrix {
    m: DMatrix<f64>,
}

impl ElasticityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(SimError::DimensionMismatch(
                "elasticity matrix must be square and non-empty".into(),
            ));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Self { m })
    }

    /// Random strictly diagonally dominant matrix: diagonal U[1,2],
    /// off-diagonal U[0, 1/(2n)]. Row sums of off-diagonals stay below 1/2,
    /// so the matrix is always invertible.
    pub fn generate(n: usize, rng: &mut impl Rng) -> Self {
        assert!(n >= 1, "need at least one program");
        let off_hi = 1.0 / (2.0 * n as f64);
        let m = DMatrix::from_fn(n, n, |_, _| 0.0);
        let mut m = m;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i == j {
                    rng.random_range(1.0..2.0)
                } else {
                    rng.random_range(0.0..off_hi)
                };
            }
        }
        Self { m }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// 1-norm condition estimate ‖H‖₁·‖H⁻¹‖₁; None when singular.
    pub fn condition_estimate(&self) -> Option<f64> {
        let inv = self.m.clone().try_inverse()?;
        Some(norm_1(&self.m) * norm_1(&inv))
    }

    /// Row-major CSV with a header of program indices.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = header_row(n);
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| self.m[(i, j)].to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub(crate) fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

fn header_row(n: usize) -> String {
    let cols: Vec<String> = (0..n).map(|j| j.to_string()).collect();
    format!("{}\n", cols.join(","))
}

fn norm_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// ──────────────────────── evaluate / invert prices ───────────────────────

/// Raw linear response `H·p`, optionally clamped per-program into [0, Dᵢ].
pub fn evaluate_demand(
    h: &ElasticityMatrix,
    prices: &[f64],
    d_max: Option<&[f64]>,
) -> Result<DemandVector> {
    if prices.len() != h.n() {
        return Err(SimError::DimensionMismatch(format!(
            "{} prices for {} programs",
            prices.len(),
            h.n()
        )));
    }
    if let Some(d) = d_max {
        if d.len() != h.n() {
            return Err(SimError::DimensionMismatch(format!(
                "{} demand caps for {} programs",
                d.len(),
                h.n()
            )));
        }
    }
    let p = DVector::from_column_slice(prices);
    let raw = h.matrix() * p;
    let out = raw
        .iter()
        .enumerate()
        .map(|(i, &v)| match d_max {
            Some(caps) => v.clamp(0.0, caps[i].max(0.0)),
            None => v,
        })
        .collect();
    Ok(out)
}

/// Solves `H·p = d` by LU with one step of iterative refinement; rejects
/// ill-conditioned matrices and verifies the relative residual.
pub fn invert_prices(h: &ElasticityMatrix, demand: &[f64]) -> Result<PriceVector> {
    if demand.len() != h.n() {
        return Err(SimError::DimensionMismatch(format!(
            "{} demands for {} programs",
            demand.len(),
            h.n()
        )));
    }
    let cond = h
        .condition_estimate()
        .ok_or(SimError::IllConditioned { cond: f64::INFINITY })?;
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(SimError::IllConditioned { cond });
    }

    let a = h.matrix();
    let d = DVector::from_column_slice(demand);
    let lu = a.clone().lu();
    let mut p = lu
        .solve(&d)
        .ok_or(SimError::IllConditioned { cond })?;
    let r = &d - a * &p;
    if let Some(delta) = lu.solve(&r) {
        p += delta;
    }

    let residual = (&d - a * &p).norm();
    let scale = d.norm();
    if scale > 0.0 && residual / scale > SOLVE_TOLERANCE {
        return Err(SimError::ResidualTooLarge {
            residual: residual / scale,
            tolerance: SOLVE_TOLERANCE,
        });
    }
    Ok(p.iter().copied().collect())
}

// ───────────────────────── sequential demand draws ───────────────────────

/// Sequential uniform draws: d₁ ~ U[0, min(M, D₁)] and
/// dᵢ ~ U[0, max(0, min(M − Σ_{j<i} dⱼ, Dᵢ))]. Draws are continuous, then
/// rounded half-to-even and projected back into the feasible set so that
/// 0 ≤ dᵢ ≤ Dᵢ and Σ dᵢ ≤ M hold exactly after rounding.
pub fn sample_demands(m: u32, d_max: &[f64], seed: u64) -> DemandVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = m as f64;

    let mut continuous = Vec::with_capacity(d_max.len());
    let mut drawn = 0.0;
    for &cap in d_max {
        let hi = (budget - drawn).min(cap).max(0.0);
        let c = if hi > 0.0 { rng.random_range(0.0..hi) } else { 0.0 };
        continuous.push(c);
        drawn += c;
    }

    let mut remaining = m as i64;
    continuous
        .iter()
        .zip(d_max)
        .map(|(&c, &cap)| {
            let rounded = c.round_ties_even() as i64;
            let d = rounded.min(cap.floor() as i64).min(remaining).max(0);
            remaining -= d;
            d as f64
        })
        .collect()
}

// ─────────────────────── single-program demand curve ─────────────────────

/// Intercept of program `i`'s demand curve with every other price held at
/// `reference_price`: C_i = D_i + Σ_{j≠i} h_ij · p_ref.
pub fn curve_intercept(
    d_max: &[f64],
    h: &ElasticityMatrix,
    i: usize,
    reference_price: f64,
) -> f64 {
    let cross: f64 = (0..h.n())
        .filter(|&j| j != i)
        .map(|j| h.get(i, j) * reference_price)
        .sum();
    d_max[i] + cross
}

/// Demand for one program at own price `p`: max(0, intercept − slope·p).
pub fn curve_demand(intercept: f64, slope: f64, price: f64) -> f64 {
    (intercept - slope * price).max(0.0)
}

/// Evenly spaced price grid from 0 to the zero-demand price of the curve.
pub fn price_grid(intercept: f64, slope: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && slope > 0.0);
    let p_zero = (intercept / slope).max(0.0);
    (0..points)
        .map(|k| p_zero * k as f64 / (points - 1) as f64)
        .collect()
}

// ───────────────────────────── WTP generation ────────────────────────────

/// Willingness-to-pay of every user for every program, row per user.
#[derive(Clone, Debug, PartialEq)]
pub struct WtpTable {
    users: usize,
    programs: usize,
    w: Vec<f64>,
}

impl WtpTable {
    fn zeroed(users: usize, programs: usize) -> Self {
        Self { users, programs, w: vec![0.0; users * programs] }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn programs(&self) -> usize {
        self.programs
    }

    pub fn get(&self, user: usize, program: usize) -> f64 {
        self.w[user * self.programs + program]
    }

    fn set(&mut self, user: usize, program: usize, v: f64) {
        self.w[user * self.programs + program] = v;
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.w[user * self.programs..(user + 1) * self.programs]
    }

    /// Per-program multiset of WTP levels, sorted descending.
    pub fn column_sorted(&self, program: usize) -> Vec<f64> {
        let mut col: Vec<f64> = (0..self.users).map(|u| self.get(u, program)).collect();
        col.sort_by(|a, b| b.partial_cmp(a).unwrap());
        col
    }

    /// Row-major CSV with a header of program indices.
    pub fn to_csv(&self) -> String {
        let mut out = header_row(self.programs);
        for u in 0..self.users {
            let row: Vec<String> = self.row(u).iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn check_wtp_inputs(d_max: &[f64], h: &ElasticityMatrix, m: u32) -> Result<()> {
    if d_max.len() != h.n() {
        return Err(SimError::DimensionMismatch(format!(
            "{} max demands for {} programs",
            d_max.len(),
            h.n()
        )));
    }
    if m < 1 {
        return Err(SimError::InvalidConfig("population must be ≥ 1".into()));
    }
    for i in 0..h.n() {
        if h.get(i, i) <= 0.0 {
            return Err(SimError::NonInvertibleCurve(i));
        }
    }
    Ok(())
}

/// Staircase scheme: the k-th WTP level for program `i` is the price at which
/// that program's single-price demand equals k, for k = 1..m (clamped at 0
/// once the curve runs out). Users receive levels through a seeded
/// permutation, freshly drawn per program.
pub fn generate_wtp_staircase(
    d_max: &[f64],
    h: &ElasticityMatrix,
    m: u32,
    reference_price: f64,
    seed: u64,
) -> Result<WtpTable> {
    check_wtp_inputs(d_max, h, m)?;
    let users = m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = WtpTable::zeroed(users, h.n());

    for i in 0..h.n() {
        let intercept = curve_intercept(d_max, h, i, reference_price);
        let slope = h.get(i, i);
        let levels: Vec<f64> = (1..=users)
            .map(|k| ((intercept - k as f64) / slope).max(0.0))
            .collect();
        let mut order: Vec<usize> = (0..users).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        for (u, &slot) in order.iter().enumerate() {
            table.set(u, i, levels[slot]);
        }
    }
    Ok(table)
}

/// Random-draw scheme: each WTP is an independent draw from the distribution
/// whose survival function is the normalized single-price demand curve. For
/// the linear curve this is uniform on [0, intercept/slope]; a degenerate
/// curve (zero demand everywhere past price 0) yields all-zero WTP.
pub fn generate_wtp_random(
    d_max: &[f64],
    h: &ElasticityMatrix,
    m: u32,
    reference_price: f64,
    seed: u64,
) -> Result<WtpTable> {
    check_wtp_inputs(d_max, h, m)?;
    let users = m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = WtpTable::zeroed(users, h.n());

    for i in 0..h.n() {
        let intercept = curve_intercept(d_max, h, i, reference_price);
        let slope = h.get(i, i);
        let p_zero = intercept / slope;
        for u in 0..users {
            let w = if p_zero > 0.0 { rng.random_range(0.0..p_zero) } else { 0.0 };
            table.set(u, i, w);
        }
    }
    Ok(table)
}

// ─────────────────────────── estimation error ────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorNorm {
    L1,
    LInf,
}

/// Norm of the pointwise difference between two curves sampled on a shared
/// grid; L1 is normalized by the grid size.
pub fn demand_estimation_error(
    estimated: &[f64],
    truth: &[f64],
    norm: ErrorNorm,
) -> Result<f64> {
    if estimated.len() != truth.len() || estimated.is_empty() {
        return Err(SimError::DimensionMismatch(format!(
            "curve grids disagree: {} vs {} points",
            estimated.len(),
            truth.len()
        )));
    }
    let diffs = estimated.iter().zip(truth).map(|(e, t)| (e - t).abs());
    Ok(match norm {
        ErrorNorm::L1 => diffs.sum::<f64>() / estimated.len() as f64,
        ErrorNorm::LInf => diffs.fold(0.0, f64::max),
    })
}
