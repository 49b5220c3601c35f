//! Agent models, a fixed-step RK4 integrator, and grid quantization.
//!
//! * Acc: `x' = v`, `v' = a`.
//! * Dubins: `x' = v cos psi`, `y' = v sin psi`, `psi' = omega`, `v' = a`.
//! * Air: `x' = v cos psi cos g`, `y' = v sin psi cos g`, `z' = v sin g`,
//!   `psi' = omega`, `g' = Gamma`, `v' = a`, with `g` the flight-path angle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Acc,
    Dubins,
    Air,
}

impl Model {
    pub const fn state_dim(self) -> usize {
        match self {
            Model::Acc => 2,
            Model::Dubins => 4,
            Model::Air => 6,
        }
    }

    pub const fn input_dim(self) -> usize {
        match self {
            Model::Acc => 1,
            Model::Dubins => 2,
            Model::Air => 3,
        }
    }

    /// State components that are angles.
    pub const fn angle_indices(self) -> &'static [usize] {
        match self {
            Model::Acc => &[],
            Model::Dubins => &[2],
            Model::Air => &[3, 4],
        }
    }

    /// Index of the speed component.
    pub const fn speed_index(self) -> usize {
        self.state_dim() - 1
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccState<S> {
    pub x: S,
    pub v: S,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DubinsState<S> {
    pub x: S,
    pub y: S,
    pub psi: S,
    pub v: S,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AirState<S> {
    pub x: S,
    pub y: S,
    pub z: S,
    pub psi: S,
    pub gamma_p: S,
    pub v: S,
}

impl<S: Scalar> AccState<S> {
    pub fn to_array(self) -> [S; 2] {
        [self.x, self.v]
    }

    pub fn from_slice(s: &[S]) -> Self {
        Self { x: s[0], v: s[1] }
    }
}

impl<S: Scalar> DubinsState<S> {
    pub fn to_array(self) -> [S; 4] {
        [self.x, self.y, self.psi, self.v]
    }

    pub fn from_slice(s: &[S]) -> Self {
        Self {
            x: s[0],
            y: s[1],
            psi: s[2],
            v: s[3],
        }
    }
}

impl<S: Scalar> AirState<S> {
    pub fn to_array(self) -> [S; 6] {
        [self.x, self.y, self.z, self.psi, self.gamma_p, self.v]
    }

    pub fn from_slice(s: &[S]) -> Self {
        Self {
            x: s[0],
            y: s[1],
            z: s[2],
            psi: s[3],
            gamma_p: s[4],
            v: s[5],
        }
    }
}

/// Model-tagged control input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ControlInput<S> {
    Acc { a: S },
    Dubins { omega: S, a: S },
    Air { omega: S, gamma_rate: S, a: S },
}

impl<S: Scalar> ControlInput<S> {
    pub fn model(&self) -> Model {
        match self {
            ControlInput::Acc { .. } => Model::Acc,
            ControlInput::Dubins { .. } => Model::Dubins,
            ControlInput::Air { .. } => Model::Air,
        }
    }

    pub fn to_vec(&self) -> Vec<S> {
        match *self {
            ControlInput::Acc { a } => vec![a],
            ControlInput::Dubins { omega, a } => vec![omega, a],
            ControlInput::Air { omega, gamma_rate, a } => vec![omega, gamma_rate, a],
        }
    }

    pub fn from_slice(model: Model, u: &[S]) -> Result<Self> {
        check_dim("input", model.input_dim(), u.len())?;
        Ok(match model {
            Model::Acc => ControlInput::Acc { a: u[0] },
            Model::Dubins => ControlInput::Dubins { omega: u[0], a: u[1] },
            Model::Air => ControlInput::Air {
                omega: u[0],
                gamma_rate: u[1],
                a: u[2],
            },
        })
    }
}

fn check_dim(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has {got} components, model expects {expected}"
        )))
    }
}

/// Right-hand side into `out`; dimensions are assumed checked.
#[inline]
pub fn rhs<S: Scalar>(model: Model, x: &[S], u: &[S], out: &mut [S]) {
    match model {
        Model::Acc => {
            out[0] = x[1];
            out[1] = u[0];
        }
        Model::Dubins => {
            let (s, c) = x[2].sin_cos();
            out[0] = x[3] * c;
            out[1] = x[3] * s;
            out[2] = u[0];
            out[3] = u[1];
        }
        Model::Air => {
            let (sp, cp) = x[3].sin_cos();
            let (sg, cg) = x[4].sin_cos();
            out[0] = x[5] * cp * cg;
            out[1] = x[5] * sp * cg;
            out[2] = x[5] * sg;
            out[3] = u[0];
            out[4] = u[1];
            out[5] = u[2];
        }
    }
}

pub fn derivative<S: Scalar>(model: Model, state: &[S], input: &[S]) -> Result<Vec<S>> {
    check_dim("state", model.state_dim(), state.len())?;
    check_dim("input", model.input_dim(), input.len())?;
    let mut out = vec![S::zero(); state.len()];
    rhs(model, state, input, &mut out);
    Ok(out)
}

/// One classical RK4 step of `x' = f(x)` in place.
pub fn rk4_step<S: Scalar, const N: usize>(f: impl Fn(&[S; N]) -> [S; N], x: &mut [S; N], dt: S) {
    let half = dt / S::lit(2.0);
    let k1 = f(x);
    let k2 = f(&std::array::from_fn(|i| x[i] + half * k1[i]));
    let k3 = f(&std::array::from_fn(|i| x[i] + half * k2[i]));
    let k4 = f(&std::array::from_fn(|i| x[i] + dt * k3[i]));
    let sixth = dt / S::lit(6.0);
    for i in 0..N {
        x[i] += sixth * (k1[i] + S::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
}

/// One RK4 step in place without allocating; angles wrapped when `wrap`.
/// Returns false if the result is not finite. Dimensions are assumed checked.
pub fn step_in_place<S: Scalar>(model: Model, x: &mut [S], u: &[S], dt: S, wrap: bool) -> bool {
    const MAX: usize = 6;
    let n = x.len();
    let zero = [S::zero(); MAX];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (zero, zero, zero, zero, zero);
    let half = dt / S::lit(2.0);
    rhs(model, x, u, &mut k1[..n]);
    for i in 0..n {
        tmp[i] = x[i] + half * k1[i];
    }
    rhs(model, &tmp[..n], u, &mut k2[..n]);
    for i in 0..n {
        tmp[i] = x[i] + half * k2[i];
    }
    rhs(model, &tmp[..n], u, &mut k3[..n]);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    rhs(model, &tmp[..n], u, &mut k4[..n]);
    let sixth = dt / S::lit(6.0);
    for i in 0..n {
        x[i] += sixth * (k1[i] + S::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    if wrap {
        for &i in model.angle_indices() {
            x[i] = wrap_angle(x[i]);
        }
    }
    x.iter().all(|v| v.is_finite())
}

fn integrate_impl<S: Scalar>(
    model: Model,
    state: &[S],
    input: &[S],
    dt: S,
    steps: usize,
    wrap: bool,
) -> Result<Vec<S>> {
    check_dim("state", model.state_dim(), state.len())?;
    check_dim("input", model.input_dim(), input.len())?;
    if !(dt > S::zero()) {
        return Err(Error::InvalidInput(format!("dt = {dt} must be positive")));
    }
    let mut x = state.to_vec();
    for step in 0..steps {
        if !step_in_place(model, &mut x, input, dt, wrap) {
            return Err(Error::NonFinite { step });
        }
    }
    Ok(x)
}

/// RK4 with the input held over `steps` steps of `dt`; angles wrapped after each step.
pub fn integrate<S: Scalar>(model: Model, state: &[S], input: &[S], dt: S, steps: usize) -> Result<Vec<S>> {
    integrate_impl(model, state, input, dt, steps, true)
}

/// As [`integrate`] but leaves angles continuous, for comparison against
/// reach boxes that track unwrapped headings.
pub fn integrate_unwrapped<S: Scalar>(
    model: Model,
    state: &[S],
    input: &[S],
    dt: S,
    steps: usize,
) -> Result<Vec<S>> {
    integrate_impl(model, state, input, dt, steps, false)
}

/// Clamp the speed component into `[v_min, v_max]`.
pub fn clamp_speed<S: Scalar>(model: Model, state: &mut [S], v_min: S, v_max: S) {
    let i = model.speed_index();
    state[i] = state[i].max(v_min).min(v_max);
}

/// Uniform grid over a box; points outside map to the nearest edge cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantizer<S> {
    lower: Vec<S>,
    upper: Vec<S>,
    cells: Vec<usize>,
}

impl<S: Scalar> Quantizer<S> {
    pub fn new(lower: Vec<S>, upper: Vec<S>, cells: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != cells.len() || lower.is_empty() {
            return Err(Error::InvalidInput("quantizer dimensions disagree".into()));
        }
        for d in 0..lower.len() {
            if !(lower[d].is_finite() && upper[d].is_finite() && lower[d] < upper[d]) {
                return Err(Error::InvalidInput(format!(
                    "quantizer bounds [{}, {}] in dimension {d} not finite and ordered",
                    lower[d], upper[d]
                )));
            }
            if cells[d] == 0 {
                return Err(Error::InvalidInput(format!("zero cells in dimension {d}")));
            }
        }
        if cells.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c)).is_none() {
            return Err(Error::InvalidInput("quantizer has too many cells".into()));
        }
        Ok(Self { lower, upper, cells })
    }

    pub fn dims(&self) -> usize {
        self.cells.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    fn axis_cell(&self, d: usize, v: S) -> usize {
        let width = (self.upper[d] - self.lower[d]) / S::lit(self.cells[d] as f64);
        let raw = ((v - self.lower[d]) / width).floor();
        if !(raw > S::zero()) {
            0
        } else {
            raw.to_usize().unwrap_or(usize::MAX).min(self.cells[d] - 1)
        }
    }

    /// Row-major cell index (first dimension most significant).
    pub fn quantize(&self, point: &[S]) -> usize {
        debug_assert_eq!(point.len(), self.dims());
        (0..self.dims()).fold(0, |idx, d| idx * self.cells[d] + self.axis_cell(d, point[d]))
    }

    pub fn dequantize(&self, mut index: usize) -> Vec<S> {
        let mut center = vec![S::zero(); self.dims()];
        for d in (0..self.dims()).rev() {
            let c = index % self.cells[d];
            index /= self.cells[d];
            let width = (self.upper[d] - self.lower[d]) / S::lit(self.cells[d] as f64);
            center[d] = self.lower[d] + width * (S::lit(c as f64) + S::lit(0.5));
        }
        center
    }
}
