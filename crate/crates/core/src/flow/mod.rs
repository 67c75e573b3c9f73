//! Execution flow `I = dv/dt`: shares traded per unit time.
//!
//! Two estimators are provided. [`SlidingWindow`] divides the volume of the
//! last `window` seconds by `window`. [`FlowState`] evaluates the
//! Radon–Nikodym derivative of the traded-volume measure with respect to
//! the time measure at "now", using a shifted Legendre basis in the
//! exponentially mapped time `x = exp((t − t_now)/τ) ∈ (0, 1]`.
//!
//! In `x`, moving "now" forward by `dt` rescales every power moment
//! `u_m = Σ v_i x_i^m` by `exp(−m dt/τ)`, so the state update is O(n) per
//! event. The time measure `dt = τ dx/x` has closed-form power moments, and
//! both Gram matrices are assembled from moments with exact integer
//! coefficient tables ([`LegendreTable`]).

mod legendre;
mod sliding;

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{sym_eigen_projected_in_place, Cholesky, LinalgError};

pub use legendre::LegendreTable;
pub use sliding::{i_sliding, SlidingWindow};

/// Relative Cholesky pivot floor for the time Gram matrix. Assembly from
/// power sums leaves entry errors near 1e-9 at n = 7, and a pivot ratio
/// `r` magnifies them by about `1/r`; below this floor the reading is
/// treated as singular rather than reported with a large error.
pub const GRAM_PIVOT_TOLERANCE: f64 = 1e-4;

/// Largest accepted basis size.
pub const MAX_BASIS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("time Gram matrix is numerically singular (history too short for the basis)")]
    SingularGram,
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// Relaxation time of the exponential time map, in the state's time unit.
    pub tau: f64,
    /// Basis size.
    pub n_basis: usize,
    /// History older than `history_cap · τ` is dropped.
    pub history_cap: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            tau: 128.0,
            n_basis: 7,
            history_cap: 16.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(FlowError::InvalidConfig("tau must be positive"));
        }
        if !(2..=MAX_BASIS).contains(&self.n_basis) {
            return Err(FlowError::InvalidConfig("n_basis must be in 2..=12"));
        }
        if !(self.history_cap >= 4.0) {
            return Err(FlowError::InvalidConfig("history cap must be at least 4"));
        }
        Ok(())
    }
}

/// Flow estimate at "now" and its extremal states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowReading {
    pub i_now: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Squared projection of the "now" state on the maximal-I state.
    pub c_max_sq: f64,
}

/// Power moments of the traded volume in exponentially mapped time.
#[derive(Debug, Clone)]
pub struct FlowState {
    config: FlowConfig,
    table: LegendreTable,
    t_now: f64,
    t_start: Option<f64>,
    u: Vec<f64>,
    total_volume: f64,
    /// Trades still inside the history window, oldest first.
    history: VecDeque<(f64, f64)>,
    cache: ReducedCache,
    /// Last reading, valid until time moves or a trade arrives.
    last: Option<FlowReading>,
}

impl FlowState {
    pub fn new(config: FlowConfig) -> Result<Self, FlowError> {
        config.validate()?;
        let table = LegendreTable::new(config.n_basis);
        let u = vec![0.0; table.moments()];
        Ok(Self {
            config,
            table,
            t_now: 0.0,
            t_start: None,
            u,
            total_volume: 0.0,
            history: VecDeque::new(),
            cache: ReducedCache::new(config.n_basis),
            last: None,
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn t_now(&self) -> f64 {
        self.t_now
    }

    pub fn t_start(&self) -> Option<f64> {
        self.t_start
    }

    /// `u_m = Σ v_i x_i^m` over trades inside the history window.
    pub fn moments(&self) -> &[f64] {
        &self.u
    }

    /// Every share ever added, including trades that aged out.
    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    /// Trades inside the history window as `(time, shares)`.
    pub fn history(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.history.iter().copied()
    }

    /// Starts the clock; the first call fixes `t_start`.
    pub fn start_at(&mut self, t: f64) {
        if self.t_start.is_none() {
            self.t_start = Some(t);
            self.t_now = t;
            self.last = None;
        }
    }

    /// Moves "now" to absolute time `t` (starting the clock if needed).
    pub fn advance_to(&mut self, t: f64) {
        if self.t_start.is_none() {
            self.start_at(t);
            return;
        }
        let dt = t - self.t_now;
        if dt > 0.0 {
            self.advance(dt);
        }
    }

    /// Moves "now" forward by `dt ≥ 0`: `u_m ← u_m · exp(−m dt/τ)`, then
    /// trades older than the history cap are removed.
    pub fn advance(&mut self, dt: f64) {
        debug_assert!(dt >= 0.0);
        if dt <= 0.0 {
            return;
        }
        let e = (-dt / self.config.tau).exp();
        let mut f = 1.0;
        for u in self.u.iter_mut().skip(1) {
            f *= e;
            *u *= f;
        }
        self.t_now += dt;
        self.last = None;
        self.evict();
    }

    fn evict(&mut self) {
        let horizon = self.t_now - self.config.history_cap * self.config.tau;
        while let Some(&(t, v)) = self.history.front() {
            if t >= horizon {
                break;
            }
            self.history.pop_front();
            let x = ((t - self.t_now) / self.config.tau).exp();
            let mut xm = 1.0;
            for u in self.u.iter_mut() {
                *u -= v * xm;
                xm *= x;
            }
            // u_0 is an exact integer sum; keep higher moments non-negative
            // against rounding.
            for u in self.u.iter_mut().skip(1) {
                if *u < 0.0 {
                    *u = 0.0;
                }
            }
        }
        if self.history.is_empty() {
            self.u.iter_mut().for_each(|u| *u = 0.0);
        }
    }

    /// Adds a trade at the current time (`x = 1`). Zero-size trades are
    /// ignored.
    pub fn add_trade(&mut self, shares: f64) {
        if shares <= 0.0 {
            return;
        }
        if self.t_start.is_none() {
            self.t_start = Some(self.t_now);
        }
        for u in self.u.iter_mut() {
            *u += shares;
        }
        self.last = None;
        self.total_volume += shares;
        self.history.push_back((self.t_now, shares));
    }

    /// Length of the history currently covered by the time measure.
    pub fn span(&self) -> f64 {
        match self.t_start {
            Some(s) => (self.t_now - s).min(self.config.history_cap * self.config.tau),
            None => 0.0,
        }
    }

    /// Closed-form power moments of the time measure over the retained
    /// history of length `T`: `T_0 = T`, `T_m = τ (1 − x_min^m)/m`.
    pub fn time_moments(&self) -> Vec<f64> {
        time_moments(self.span(), self.config.tau, self.table.moments())
    }

    fn capped(&self) -> bool {
        self.span() >= self.config.history_cap * self.config.tau
    }

    /// Cholesky factor of the time Gram matrix for the current span.
    pub fn gram_factor(&self) -> Result<Cholesky, FlowError> {
        if !(self.span() > 0.0) {
            return Err(FlowError::SingularGram);
        }
        Cholesky::new(&self.time_gram(), self.table.len(), GRAM_PIVOT_TOLERANCE).map_err(|_| FlowError::SingularGram)
    }

    /// Time Gram matrix `G` (row-major).
    pub fn time_gram(&self) -> Vec<f64> {
        let n = self.table.len();
        let mut g = vec![0.0; n * n];
        self.table.gram_from_moments(&self.time_moments(), &mut g);
        g
    }

    /// Volume Gram matrix `M` (row-major).
    pub fn volume_gram(&self) -> Vec<f64> {
        let n = self.table.len();
        let mut m = vec![0.0; n * n];
        self.table.gram_from_moments(&self.u, &mut m);
        m
    }

    /// Basis values at "now": `k_j = P_j(1) = √(2j+1)`.
    pub fn now_vector(&self) -> Vec<f64> {
        (0..self.table.len()).map(|j| ((2 * j + 1) as f64).sqrt()).collect()
    }

    /// `I` at "now": `(kᵀG⁻¹MG⁻¹k)/(kᵀG⁻¹k)`, per unit of time.
    pub fn i_now(&self) -> Result<f64, FlowError> {
        let ch = self.gram_factor()?;
        let m = self.volume_gram();
        let k = self.now_vector();
        let mut a = k.clone();
        ch.solve(&mut a);
        let n = k.len();
        let denom: f64 = k.iter().zip(&a).map(|(x, y)| x * y).sum();
        let mut num = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| m[i * n + j] * a[j]).sum();
            num += a[i] * row;
        }
        Ok(num / denom)
    }

    /// Factorizes `G` for the current span and stores the reduced "now"
    /// state. With the span at its cap `G` no longer changes, so the
    /// factor and the reduced coefficient matrices `L⁻¹ C_m L⁻ᵀ` are kept
    /// and `L⁻¹ M L⁻ᵀ = Σ_m u_m L⁻¹ C_m L⁻ᵀ` needs no solves.
    fn prepare(&mut self) -> Result<bool, FlowError> {
        let span = self.span();
        if !(span > 0.0) {
            return Err(FlowError::SingularGram);
        }
        let capped = self.capped();
        if capped && self.cache.capped_ready {
            return Ok(true);
        }
        let n = self.table.len();
        let moments = self.table.moments();
        let mut mu = [0.0; 2 * MAX_BASIS - 1];
        time_moments_into(span, self.config.tau, &mut mu[..moments]);
        let mut g = [0.0; MAX_BASIS * MAX_BASIS];
        self.table.gram_from_moments(&mu[..moments], &mut g[..n * n]);
        let cache = &mut self.cache;
        cache.capped_ready = false;
        cache.chol.refactor(&g[..n * n], GRAM_PIVOT_TOLERANCE).map_err(|_| FlowError::SingularGram)?;
        for (j, z) in cache.z0.iter_mut().enumerate() {
            *z = ((2 * j + 1) as f64).sqrt();
        }
        cache.chol.forward(&mut cache.z0);
        let norm = cache.z0.iter().map(|v| v * v).sum::<f64>().sqrt();
        cache.z0.iter_mut().for_each(|v| *v /= norm);
        if capped {
            let mut c = [0.0; MAX_BASIS * MAX_BASIS];
            for m in 0..moments {
                for j in 0..n {
                    for k in 0..n {
                        c[j * n + k] = self.table.product(j, k)[m];
                    }
                }
                let block = &mut cache.reduced_basis[m * n * n..(m + 1) * n * n];
                cache.chol.congruence_into(&c[..n * n], block);
            }
            cache.capped_ready = true;
        }
        Ok(capped)
    }

    /// Solves `M ψ = λ G ψ` and projects the "now" state onto the
    /// eigenstates. `i_now = ψ₀ᵀMψ₀` is a Rayleigh quotient, so it lies in
    /// `[λ_min, λ_max]`; the clamp only absorbs rounding.
    pub fn i_extremal(&mut self) -> Result<FlowReading, FlowError> {
        if let Some(r) = self.last {
            return Ok(r);
        }
        let capped = self.prepare()?;
        let n = self.table.len();
        let nn = n * n;
        let mut a = [0.0; MAX_BASIS * MAX_BASIS];
        if capped {
            let basis = &self.cache.reduced_basis;
            for (m, &u) in self.u.iter().enumerate() {
                let block = &basis[m * nn..(m + 1) * nn];
                for (x, b) in a[..nn].iter_mut().zip(block) {
                    *x += u * b;
                }
            }
        } else {
            let mut mm = [0.0; MAX_BASIS * MAX_BASIS];
            self.table.gram_from_moments(&self.u, &mut mm[..nn]);
            self.cache.chol.congruence_into(&mm[..nn], &mut a[..nn]);
        }
        // i_now is the Rayleigh quotient of the normalized "now" state.
        let z0 = &self.cache.z0;
        let mut i_now = 0.0;
        for (i, zi) in z0.iter().enumerate() {
            let row: f64 = a[i * n..i * n + n].iter().zip(z0).map(|(x, z)| x * z).sum();
            i_now += zi * row;
        }
        let mut proj = [0.0; MAX_BASIS];
        proj[..n].copy_from_slice(z0);
        let mut values = [0.0; MAX_BASIS];
        sym_eigen_projected_in_place(&mut a[..nn], n, &mut proj[..n], &mut values[..n])?;
        let total: f64 = proj[..n].iter().map(|p| p * p).sum();
        let lambda_min = values[0];
        let lambda_max = values[n - 1];
        let reading = FlowReading {
            i_now: i_now.clamp(lambda_min, lambda_max),
            lambda_min,
            lambda_max,
            c_max_sq: (proj[n - 1] * proj[n - 1] / total).clamp(0.0, 1.0),
        };
        self.last = Some(reading);
        Ok(reading)
    }
}

/// Reusable factor and reduced data for [`FlowState::i_extremal`].
#[derive(Debug, Clone)]
struct ReducedCache {
    chol: Cholesky,
    z0: Vec<f64>,
    /// `L⁻¹ C_m L⁻ᵀ` for every moment, valid when `capped_ready`.
    reduced_basis: Vec<f64>,
    capped_ready: bool,
}

impl ReducedCache {
    fn new(n: usize) -> Self {
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        Self {
            chol: Cholesky::new(&eye, n, 0.0).expect("identity"),
            z0: vec![0.0; n],
            reduced_basis: vec![0.0; (2 * n - 1) * n * n],
            capped_ready: false,
        }
    }
}

/// `T_0 = span`, `T_m = τ(1 − exp(−m·span/τ))/m`.
pub fn time_moments(span: f64, tau: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    time_moments_into(span, tau, &mut out);
    out
}

fn time_moments_into(span: f64, tau: f64, out: &mut [f64]) {
    let r = span / tau;
    let e = (-r).exp();
    let mut em = 1.0;
    out[0] = span;
    for (m, t) in out.iter_mut().enumerate().skip(1) {
        em *= e;
        let m = m as f64;
        // 1 − e^m cancels for short spans
        *t = if r < 0.5 { -tau * (-m * r).exp_m1() / m } else { tau * (1.0 - em) / m };
    }
}
