//! Affine mode dynamics of the two-display-case refrigeration plant.
//!
//! Each display case air temperature `T_i` and the shared suction pressure `P`
//! evolve as
//!
//! ```text
//! dT_i/dt = -a T_i + b - δ_i (c T_i - d P - e)
//! dP/dt   = -alpha P + beta + valve_gain (δ_1 + δ_2)
//! ```
//!
//! where `δ = (δ_1, δ_2)` are the expansion-valve flags. Within a mode the
//! system is affine and triangular (pressure drives temperature, never the
//! reverse), so it has a closed-form flow, which [`propagate_exact`]
//! implements. [`propagate_rk4`] is the fixed-step integrator used for
//! sampling in the stochastic executor.
//!
//! Units are seconds, °C and bar throughout.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};

/// Frequency gap below which the temperature/pressure resonance formula is used.
pub const RESONANCE_GAP: f64 = 1e-9;

/// Default integrator step [s].
pub const DEFAULT_DT: f64 = 0.1;

/// Valve configuration `(δ_1, δ_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct Mode {
    open: [bool; 2],
}

impl Mode {
    pub const CLOSED: Mode = Mode {
        open: [false, false],
    };
    pub const OPEN: Mode = Mode { open: [true, true] };

    /// All four modes in lexicographic order.
    pub const ALL: [Mode; 4] = [
        Mode::CLOSED,
        Mode {
            open: [false, true],
        },
        Mode {
            open: [true, false],
        },
        Mode::OPEN,
    ];

    pub fn new(delta1: u8, delta2: u8) -> Result<Self> {
        let flag = |v: u8, field| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(invalid(field, format!("valve flag must be 0 or 1, got {v}"))),
        };
        Ok(Mode {
            open: [flag(delta1, "delta1")?, flag(delta2, "delta2")?],
        })
    }

    pub const fn from_flags(delta1: bool, delta2: bool) -> Self {
        Mode {
            open: [delta1, delta2],
        }
    }

    /// Valve flag for axis `i ∈ {1, 2}` as 0/1.
    pub fn delta(self, axis: Axis) -> u8 {
        self.open[axis.index()] as u8
    }

    pub fn is_open(self, axis: Axis) -> bool {
        self.open[axis.index()]
    }

    pub fn open_count(self) -> u8 {
        self.open[0] as u8 + self.open[1] as u8
    }

    /// Same mode with the roles of the two display cases exchanged.
    pub fn swapped(self) -> Self {
        Mode {
            open: [self.open[1], self.open[0]],
        }
    }

    pub(crate) fn with_flipped(self, axis: Axis) -> Self {
        let mut open = self.open;
        open[axis.index()] = !open[axis.index()];
        Mode { open }
    }
}

impl Default for Mode {
    fn default() -> Self {
        Mode::CLOSED
    }
}

impl TryFrom<[u8; 2]> for Mode {
    type Error = SimError;

    fn try_from(v: [u8; 2]) -> Result<Self> {
        Mode::new(v[0], v[1])
    }
}

impl From<Mode> for [u8; 2] {
    fn from(m: Mode) -> Self {
        [m.open[0] as u8, m.open[1] as u8]
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.open[0] as u8, self.open[1] as u8)
    }
}

/// Temperature axis (display case index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Axis {
    One,
    Two,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::One, Axis::Two];

    pub fn new(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Axis::One),
            2 => Ok(Axis::Two),
            _ => Err(invalid("axis", format!("axis must be 1 or 2, got {i}"))),
        }
    }

    /// Zero-based index into arrays.
    pub const fn index(self) -> usize {
        match self {
            Axis::One => 0,
            Axis::Two => 1,
        }
    }

    /// One-based label as written in the model.
    pub const fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub const fn other(self) -> Axis {
        match self {
            Axis::One => Axis::Two,
            Axis::Two => Axis::One,
        }
    }
}

impl TryFrom<u8> for Axis {
    type Error = SimError;

    fn try_from(i: u8) -> Result<Self> {
        Axis::new(i)
    }
}

impl From<Axis> for u8 {
    fn from(a: Axis) -> u8 {
        a.number()
    }
}

/// Continuous state `(T1, T2, P)` in °C, °C, bar.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct State {
    pub t1: f64,
    pub t2: f64,
    pub p: f64,
}

impl State {
    pub const fn new(t1: f64, t2: f64, p: f64) -> Self {
        State { t1, t2, p }
    }

    pub fn temperature(&self, axis: Axis) -> f64 {
        match axis {
            Axis::One => self.t1,
            Axis::Two => self.t2,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t1.is_finite() && self.t2.is_finite() && self.p.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.t1, self.t2, self.p]
    }

    pub fn swapped(self) -> Self {
        State::new(self.t2, self.t1, self.p)
    }

    /// Componentwise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &State) -> f64 {
        (self.t1 - other.t1)
            .abs()
            .max((self.t2 - other.t2).abs())
            .max((self.p - other.p).abs())
    }

    fn axpy(&self, h: f64, k: &State) -> State {
        State::new(self.t1 + h * k.t1, self.t2 + h * k.t2, self.p + h * k.p)
    }

    fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(SimError::NonFinite { what })
        }
    }
}

impl From<[f64; 3]> for State {
    fn from(v: [f64; 3]) -> Self {
        State::new(v[0], v[1], v[2])
    }
}

impl From<State> for [f64; 3] {
    fn from(s: State) -> Self {
        s.to_array()
    }
}

/// Time derivative of a [`State`]; same layout.
pub type StateDerivative = State;

/// Coefficients of the affine mode dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
    pub valve_gain: f64,
}

impl ReducedCoefficients {
    /// The published numerical model; these are the values every simulation uses by default.
    pub const CANONICAL: ReducedCoefficients = ReducedCoefficients {
        a: 0.0019,
        b: 0.0244,
        c: -0.0012,
        d: -0.0506,
        e: -0.1065,
        alpha: 0.056,
        beta: 0.0038,
        valve_gain: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("valve_gain", self.valve_gain),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.a <= 0.0 {
            return Err(invalid("a", "must be positive (stable air temperature)"));
        }
        if self.alpha <= 0.0 {
            return Err(invalid("alpha", "must be positive (stable suction pressure)"));
        }
        Ok(())
    }

    /// Decay rate of `T_i` in mode `m`: `a + δ_i c`.
    fn temperature_rate(&self, open: bool) -> f64 {
        if open {
            self.a + self.c
        } else {
            self.a
        }
    }

    fn temperature_offset(&self, open: bool) -> f64 {
        if open {
            self.b + self.e
        } else {
            self.b
        }
    }

    fn pressure_coupling(&self, open: bool) -> f64 {
        if open {
            self.d
        } else {
            0.0
        }
    }

    /// Pressure equilibrium of mode `m`.
    pub fn pressure_fixed_point(&self, m: Mode) -> f64 {
        (self.beta + self.valve_gain * m.open_count() as f64) / self.alpha
    }

    /// Equilibrium of mode `m`, if the temperature rates are nonzero.
    pub fn fixed_point(&self, m: Mode) -> Option<State> {
        let p = self.pressure_fixed_point(m);
        let temp = |axis: Axis| {
            let open = m.is_open(axis);
            let rate = self.temperature_rate(open);
            (rate != 0.0).then(|| {
                (self.temperature_offset(open) + self.pressure_coupling(open) * p) / rate
            })
        };
        Some(State::new(temp(Axis::One)?, temp(Axis::Two)?, p))
    }
}

impl Default for ReducedCoefficients {
    fn default() -> Self {
        Self::CANONICAL
    }
}

/// Physical plant parameters from which [`ReducedCoefficients`] can be derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParameters {
    #[serde(rename = "UA_wall_ref_max")]
    pub ua_wall_ref_max: f64,
    #[serde(rename = "UA_goods_air")]
    pub ua_goods_air: f64,
    #[serde(rename = "UA_air_wall")]
    pub ua_air_wall: f64,
    #[serde(rename = "T_g0")]
    pub t_goods: f64,
    pub m_dot_0: f64,
    pub m_dot_r_const: f64,
    #[serde(rename = "Q_dot_load")]
    pub q_dot_load: f64,
    #[serde(rename = "M_wall")]
    pub m_wall: f64,
    #[serde(rename = "C_p_wall")]
    pub c_p_wall: f64,
    pub grad_rho_suc0: f64,
    #[serde(rename = "V_dot_comp")]
    pub v_dot_comp: f64,
    #[serde(rename = "V_suc")]
    pub v_suc: f64,
    #[serde(rename = "T_lower")]
    pub t_lower: f64,
    #[serde(rename = "T_upper")]
    pub t_upper: f64,
    #[serde(rename = "a_T")]
    pub a_t: f64,
    #[serde(rename = "b_T")]
    pub b_t: f64,
    pub a_rho: f64,
    pub b_rho: f64,
}

impl PhysicalParameters {
    /// Plant parameters of the reference two-case installation.
    pub const TABLE: PhysicalParameters = PhysicalParameters {
        ua_wall_ref_max: 500.0,
        ua_goods_air: 300.0,
        ua_air_wall: 500.0,
        t_goods: 3.0,
        m_dot_0: 1.0,
        m_dot_r_const: 0.2,
        q_dot_load: 3000.0,
        m_wall: 260.0,
        c_p_wall: 385.0,
        grad_rho_suc0: 4.6,
        v_dot_comp: 0.28,
        v_suc: 5.0,
        t_lower: 0.0,
        t_upper: 5.0,
        a_t: -16.2072,
        b_t: -41.9095,
        a_rho: 4.6,
        b_rho: 0.4,
    };

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("UA_wall_ref_max", self.ua_wall_ref_max),
            ("UA_goods_air", self.ua_goods_air),
            ("UA_air_wall", self.ua_air_wall),
            ("M_wall", self.m_wall),
            ("C_p_wall", self.c_p_wall),
            ("grad_rho_suc0", self.grad_rho_suc0),
            ("V_dot_comp", self.v_dot_comp),
            ("V_suc", self.v_suc),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let finite = [
            ("T_g0", self.t_goods),
            ("m_dot_0", self.m_dot_0),
            ("m_dot_r_const", self.m_dot_r_const),
            ("Q_dot_load", self.q_dot_load),
            ("T_lower", self.t_lower),
            ("T_upper", self.t_upper),
            ("a_T", self.a_t),
            ("b_T", self.b_t),
            ("a_rho", self.a_rho),
            ("b_rho", self.b_rho),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.t_lower >= self.t_upper {
            return Err(invalid(
                "T_lower",
                format!("T_lower ({}) must be < T_upper ({})", self.t_lower, self.t_upper),
            ));
        }
        Ok(())
    }
}

impl Default for PhysicalParameters {
    fn default() -> Self {
        Self::TABLE
    }
}

/// Right-hand side of the mode-`m` dynamics.
pub fn vector_field(x: &State, m: Mode, k: &ReducedCoefficients) -> Result<StateDerivative> {
    x.check_finite("state")?;
    Ok(field_unchecked(x, m, k))
}

#[inline]
pub(crate) fn field_unchecked(x: &State, m: Mode, k: &ReducedCoefficients) -> StateDerivative {
    let temp = |t: f64, open: bool| {
        let base = -k.a * t + k.b;
        if open {
            base - (k.c * t - k.d * x.p - k.e)
        } else {
            base
        }
    };
    State::new(
        temp(x.t1, m.is_open(Axis::One)),
        temp(x.t2, m.is_open(Axis::Two)),
        -k.alpha * x.p + k.beta + k.valve_gain * m.open_count() as f64,
    )
}

/// `(1 - e^{-λt}) / λ`, continuous at `λ = 0`.
fn relax(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        t
    } else {
        -(-lambda * t).exp_m1() / lambda
    }
}

/// `∫_0^t e^{-λ(t-s)} e^{-αs} ds`, with the resonant limit `t e^{-λt}` when
/// `|α - λ| < RESONANCE_GAP`.
fn forced_response(lambda: f64, alpha: f64, t: f64) -> f64 {
    let gap = alpha - lambda;
    if gap.abs() < RESONANCE_GAP {
        t * (-lambda * t).exp()
    } else {
        (-lambda * t).exp() * relax(gap, t)
    }
}

/// Closed-form flow of the mode-`m` dynamics over a duration `t ≥ 0`.
pub fn propagate_exact(x0: &State, m: Mode, k: &ReducedCoefficients, t: f64) -> Result<State> {
    x0.check_finite("initial state")?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", format!("duration must be finite and >= 0, got {t}")));
    }
    Ok(flow_unchecked(x0, m, k, t))
}

pub(crate) fn flow_unchecked(x0: &State, m: Mode, k: &ReducedCoefficients, t: f64) -> State {
    if t == 0.0 {
        return *x0;
    }
    let p_star = k.pressure_fixed_point(m);
    let p_gap = x0.p - p_star;
    let p_decay = (-k.alpha * t).exp();
    let p = p_star + p_gap * p_decay;

    let temp = |t0: f64, open: bool| {
        let lambda = k.temperature_rate(open);
        let coupling = k.pressure_coupling(open);
        let drive = k.temperature_offset(open) + coupling * p_star;
        t0 * (-lambda * t).exp()
            + drive * relax(lambda, t)
            + coupling * p_gap * forced_response(lambda, k.alpha, t)
    };
    State::new(
        temp(x0.t1, m.is_open(Axis::One)),
        temp(x0.t2, m.is_open(Axis::Two)),
        p,
    )
}

/// One classical fourth-order Runge–Kutta step.
#[inline]
pub fn rk4_step(x: &State, m: Mode, k: &ReducedCoefficients, dt: f64) -> State {
    let k1 = field_unchecked(x, m, k);
    let k2 = field_unchecked(&x.axpy(0.5 * dt, &k1), m, k);
    let k3 = field_unchecked(&x.axpy(0.5 * dt, &k2), m, k);
    let k4 = field_unchecked(&x.axpy(dt, &k3), m, k);
    State::new(
        x.t1 + dt / 6.0 * (k1.t1 + 2.0 * k2.t1 + 2.0 * k3.t1 + k4.t1),
        x.t2 + dt / 6.0 * (k1.t2 + 2.0 * k2.t2 + 2.0 * k3.t2 + k4.t2),
        x.p + dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p),
    )
}

/// Integrates `n` RK4 steps of size `dt`, returning all `n + 1` samples.
pub fn propagate_rk4(
    x0: &State,
    m: Mode,
    k: &ReducedCoefficients,
    dt: f64,
    n: usize,
) -> Result<Vec<State>> {
    x0.check_finite("initial state")?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("step must be finite and > 0, got {dt}")));
    }
    if n == 0 {
        return Err(invalid("n", "at least one step is required"));
    }
    let mut out = Vec::with_capacity(n + 1);
    let mut x = *x0;
    out.push(x);
    for _ in 0..n {
        x = rk4_step(&x, m, k, dt);
        out.push(x);
    }
    Ok(out)
}

/// Expands the plant equations into the affine coefficient form.
///
/// The wall temperature is eliminated through
/// `T_wall = T (1 + UA_ga/UA_aw) - (UA_ga T_g0 + Q_load)/UA_aw`, which makes the
/// evaporator duty affine in `(T, P)`. Every coefficient is then divided by the
/// lumped heat capacity `(1 + UA_ga/UA_aw) M_wall C_p_wall`.
pub fn reduce_physical(p: &PhysicalParameters) -> Result<ReducedCoefficients> {
    p.validate()?;
    let wall_ratio = 1.0 + p.ua_goods_air / p.ua_air_wall;
    let capacity = wall_ratio * p.m_wall * p.c_p_wall;
    if capacity == 0.0 {
        return Err(SimError::ZeroDenominator("(1 + UA_goods_air/UA_air_wall) M_wall C_p_wall"));
    }
    let manifold = p.v_suc * p.grad_rho_suc0;
    if manifold == 0.0 {
        return Err(SimError::ZeroDenominator("V_suc grad_rho_suc0"));
    }
    let heat_in = p.ua_goods_air * p.t_goods + p.q_dot_load;
    Ok(ReducedCoefficients {
        a: p.ua_goods_air / capacity,
        b: heat_in / capacity,
        c: p.ua_wall_ref_max * wall_ratio / capacity,
        d: p.ua_wall_ref_max * p.a_t / capacity,
        e: p.ua_wall_ref_max * (p.b_t + heat_in / p.ua_air_wall) / capacity,
        alpha: p.v_dot_comp * p.a_rho / manifold,
        beta: (p.m_dot_r_const - p.v_dot_comp * p.b_rho) / manifold,
        valve_gain: p.m_dot_0 / manifold,
    })
}
