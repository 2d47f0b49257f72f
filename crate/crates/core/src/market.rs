//! Symmetric Cournot environments: inverse demand, linear costs, profits, the
//! best-response map and the symmetric Nash quantity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape of the inverse demand curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandKind {
    /// `P = a - b Q`
    Linear,
    /// `P = a Q^3 + b`
    Polynomial,
    /// `P = a Q^(3/2) + b`
    Radical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec<T> {
    pub kind: DemandKind,
    pub a: T,
    pub b: T,
}

impl<T: Real> DemandSpec<T> {
    pub fn price(&self, total: T) -> T {
        let DemandSpec { kind, a, b } = *self;
        match kind {
            DemandKind::Linear => a - b * total,
            DemandKind::Polynomial => a * total * total * total + b,
            DemandKind::Radical => a * total * total.sqrt() + b,
        }
    }

    /// dP/dQ.
    pub fn slope(&self, total: T) -> T {
        let DemandSpec { kind, a, b } = *self;
        match kind {
            DemandKind::Linear => -b,
            DemandKind::Polynomial => T::lit(3.0) * a * total * total,
            DemandKind::Radical => T::lit(1.5) * a * total.sqrt(),
        }
    }

    /// Price at zero output.
    pub fn intercept(&self) -> T {
        match self.kind {
            DemandKind::Linear => self.a,
            DemandKind::Polynomial | DemandKind::Radical => self.b,
        }
    }

    /// Smallest aggregate quantity at which the price reaches zero, or `None`
    /// when the curve never gets there.
    pub fn choke_quantity(&self) -> Option<T> {
        let DemandSpec { kind, a, b } = *self;
        let zero = T::zero();
        let q = match kind {
            DemandKind::Linear => {
                if b <= zero {
                    return if a <= zero { Some(zero) } else { None };
                }
                a / b
            }
            DemandKind::Polynomial | DemandKind::Radical => {
                if b <= zero {
                    return Some(zero);
                }
                if a >= zero {
                    return None;
                }
                let ratio = -b / a;
                match kind {
                    DemandKind::Polynomial => ratio.cbrt(),
                    _ => ratio.powf(T::lit(2.0 / 3.0)),
                }
            }
        };
        Some(q.max(zero))
    }
}

/// Linear cost `c(q) = x q + y`, shared by every firm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> CostSpec<T> {
    pub fn cost(&self, q: T) -> T {
        self.x * q + self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModel<T> {
    pub demand: DemandSpec<T>,
    pub cost: CostSpec<T>,
    pub players: usize,
}

/// Prices and profits of one simultaneous round of play.
#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome<T> {
    pub quantities: Vec<T>,
    pub total_quantity: T,
    pub price: T,
    pub profits: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse<T> {
    pub quantity: T,
    /// Maximiser sits on the edge of the search interval.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashSolution<T> {
    pub q_hat: T,
    /// Symmetric first-order condition at `q_hat`, relative to the demand
    /// intercept.
    pub residual: T,
}

/// One hypothesis of the pure-strategy existence theorem, checked on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const DEFAULT_TOL: f64 = 1e-6;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

impl<T: Real> MarketModel<T> {
    pub fn new(demand: DemandSpec<T>, cost: CostSpec<T>, players: usize) -> Result<Self> {
        if players == 0 {
            return Err(Error::config("a market needs at least one player"));
        }
        Ok(MarketModel { demand, cost, players })
    }

    pub fn linear(a: T, b: T, x: T, y: T, players: usize) -> Result<Self> {
        Self::new(DemandSpec { kind: DemandKind::Linear, a, b }, CostSpec { x, y }, players)
    }

    pub fn polynomial(a: T, b: T, x: T, y: T, players: usize) -> Result<Self> {
        Self::new(DemandSpec { kind: DemandKind::Polynomial, a, b }, CostSpec { x, y }, players)
    }

    pub fn radical(a: T, b: T, x: T, y: T, players: usize) -> Result<Self> {
        Self::new(DemandSpec { kind: DemandKind::Radical, a, b }, CostSpec { x, y }, players)
    }

    pub fn price(&self, total: T) -> T {
        self.demand.price(total)
    }

    pub fn profit(&self, q: T, total: T) -> T {
        self.price(total) * q - self.cost.cost(q)
    }

    pub fn play_game(&self, quantities: &[T]) -> Result<GameOutcome<T>> {
        if quantities.len() != self.players {
            return Err(Error::config(format!(
                "game needs {} quantities, got {}",
                self.players,
                quantities.len()
            )));
        }
        let total = quantities.iter().fold(T::zero(), |acc, &q| acc + q);
        let price = self.price(total);
        let profits = quantities.iter().map(|&q| price * q - self.cost.cost(q)).collect();
        Ok(GameOutcome { quantities: quantities.to_vec(), total_quantity: total, price, profits })
    }

    /// Profit-maximising own quantity against a fixed opponents' total.
    ///
    /// Golden-section search on `[0, upper]`, where `upper` is the own quantity
    /// that drives the price to zero. Ties resolve toward the smaller quantity.
    pub fn best_response(&self, opponents_total: T) -> BestResponse<T> {
        self.best_response_tol(opponents_total, T::lit(DEFAULT_TOL))
    }

    pub fn best_response_tol(&self, opponents_total: T, tol: T) -> BestResponse<T> {
        let zero = T::zero();
        let upper = match self.demand.choke_quantity() {
            Some(choke) => (choke - opponents_total).max(zero),
            // price never reaches zero: search far beyond any sensible output
            None => T::lit(1e6).max(opponents_total * T::lit(10.0)),
        };
        if upper <= zero {
            return BestResponse { quantity: zero, at_boundary: true };
        }
        let f = |q: T| self.profit(q, q + opponents_total);
        let ratio = T::lit(GOLDEN);
        let (mut lo, mut hi) = (zero, upper);
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        while hi - lo > tol {
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = f(d);
            }
        }
        let mut quantity = (lo + hi) / T::lit(2.0);
        // the bracket never contains the endpoints themselves
        if f(zero) >= f(quantity) {
            quantity = zero;
        }
        let at_boundary = quantity <= tol || upper - quantity <= tol;
        BestResponse { quantity, at_boundary }
    }

    /// Symmetric first-order condition `P(nq) + q P'(nq) - x`.
    fn symmetric_foc(&self, q: T) -> T {
        let total = q * T::from_usize(self.players).unwrap();
        self.demand.price(total) + q * self.demand.slope(total) - self.cost.x
    }

    /// Symmetric Nash quantity by bisection on the first-order condition.
    pub fn symmetric_nash(&self, tol: T) -> Result<NashSolution<T>> {
        self.symmetric_nash_from(tol, T::one())
    }

    /// As [`symmetric_nash`](Self::symmetric_nash), with the doubling search
    /// for the upper bracket starting at `initial_upper`.
    pub fn symmetric_nash_from(&self, tol: T, initial_upper: T) -> Result<NashSolution<T>> {
        let zero = T::zero();
        if !(tol > zero) || !(initial_upper > zero) {
            return Err(Error::config("tolerance and initial bracket must be positive"));
        }
        if !(self.symmetric_foc(zero) > zero) {
            return Err(Error::Model(
                "marginal profit at zero output is not positive; no interior equilibrium".into(),
            ));
        }
        let mut hi = initial_upper;
        let mut lo = zero;
        let mut doublings = 0;
        while self.symmetric_foc(hi) > zero {
            lo = hi;
            hi = hi * T::lit(2.0);
            doublings += 1;
            if doublings > 200 || !hi.is_finite() {
                return Err(Error::Model("no sign change of the first-order condition".into()));
            }
        }
        let two = T::lit(2.0);
        let mut iterations = 0;
        while hi - lo > tol && iterations < 400 {
            let mid = (lo + hi) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.symmetric_foc(mid) > zero {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        let q_hat = (lo + hi) / two;
        let scale = self.demand.intercept().abs().max(T::one());
        Ok(NashSolution { q_hat, residual: self.symmetric_foc(q_hat) / scale })
    }

    /// True when `q` is a best response to `n - 1` opponents all playing `q`.
    pub fn verify_nash_candidate(&self, q: T, tol: T) -> bool {
        let others = T::from_usize(self.players - 1).unwrap() * q;
        (self.best_response(others).quantity - q).abs() <= tol
    }

    /// Numerical check of the existence theorem's hypotheses. Log-concavity of
    /// the demand is assumed, not tested.
    pub fn validate_theorem1(&self) -> Vec<CheckResult> {
        const SAMPLES: usize = 2000;
        let zero = T::zero();
        let n = T::from_usize(self.players).unwrap();
        let horizon = match self.symmetric_nash(T::lit(DEFAULT_TOL)) {
            Ok(sol) => T::lit(2.0) * n * T::lit(3.0) * sol.q_hat,
            Err(_) => self.demand.choke_quantity().map(|c| c * T::lit(2.0)).unwrap_or(T::lit(1e6)),
        }
        .max(T::one());
        let step = horizon / T::from_usize(SAMPLES).unwrap();
        let grid = (0..=SAMPLES).map(|i| T::from_usize(i).unwrap() * step);

        let mut decreasing = true;
        let mut where_flat = None;
        let mut prev: Option<(T, T)> = None;
        for q in grid {
            let p = self.price(q);
            if let Some((pq, pp)) = prev {
                if pp > zero && p >= pp {
                    decreasing = false;
                    where_flat = Some(pq);
                    break;
                }
            }
            prev = Some((q, p));
        }

        let cost_increasing = self.cost.x > zero;

        // monopoly profit must turn negative somewhere past the sample horizon
        let far = self
            .demand
            .choke_quantity()
            .map(|c| c.max(horizon) * T::lit(2.0))
            .unwrap_or(horizon * T::lit(1e3));
        let far_profit = self.profit(far, far);
        let monopoly_negative = far_profit < zero;

        vec![
            CheckResult {
                name: "demand strictly decreasing",
                passed: decreasing,
                detail: match where_flat {
                    Some(q) => format!("price does not fall after Q = {q}"),
                    None => format!("sampled on [0, {horizon}]"),
                },
            },
            CheckResult {
                name: "cost strictly increasing",
                passed: cost_increasing,
                detail: format!("marginal cost x = {}", self.cost.x),
            },
            CheckResult {
                name: "monopoly profit becomes negative",
                passed: monopoly_negative,
                detail: format!("monopoly profit at q = {far}: {far_profit}"),
            },
        ]
    }
}

/// Identifiers of the built-in markets.
pub const CATALOGUE_IDS: [&str; 6] = ["linear4", "linear20", "poly4", "poly20", "radical4", "radical20"];

/// Built-in markets: linear `P = 256 - Q`, `c = 56q`; polynomial
/// `P = -Q^3 + 73_600_010`, `c = 10q + 10`; radical `P = -Q^1.5 + 8300`,
/// `c = 100q + 10`; each with 4 or 20 players.
pub fn catalogue<T: Real>(id: &str) -> Result<MarketModel<T>> {
    let l = T::lit;
    let (family, players) = id
        .strip_suffix("20")
        .map(|f| (f, 20))
        .or_else(|| id.strip_suffix('4').map(|f| (f, 4)))
        .ok_or_else(|| Error::config(format!("unknown model id `{id}`")))?;
    match family {
        "linear" => MarketModel::linear(l(256.0), l(1.0), l(56.0), l(0.0), players),
        "poly" => MarketModel::polynomial(l(-1.0), l(7.36e7 + 10.0), l(10.0), l(10.0), players),
        "radical" => MarketModel::radical(l(-1.0), l(8300.0), l(100.0), l(10.0), players),
        _ => Err(Error::config(format!("unknown model id `{id}`"))),
    }
}

/// A market named by catalogue id or given by its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Catalogue(String),
    Custom {
        kind: DemandKind,
        a: f64,
        b: f64,
        x: f64,
        y: f64,
        players: usize,
    },
}

impl ModelSpec {
    pub fn build<T: Real>(&self) -> Result<MarketModel<T>> {
        match self {
            ModelSpec::Catalogue(id) => catalogue(id),
            &ModelSpec::Custom { kind, a, b, x, y, players } => MarketModel::new(
                DemandSpec { kind, a: T::lit(a), b: T::lit(b) },
                CostSpec { x: T::lit(x), y: T::lit(y) },
                players,
            ),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Catalogue(id) => id.clone(),
            ModelSpec::Custom { kind, a, b, x, y, players } => {
                format!("{kind:?}(a={a},b={b},x={x},y={y},n={players})").to_lowercase()
            }
        }
    }
}

impl From<&str> for ModelSpec {
    fn from(id: &str) -> Self {
        ModelSpec::Catalogue(id.to_string())
    }
}
