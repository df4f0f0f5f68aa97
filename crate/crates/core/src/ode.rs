//! Deterministic flow: adaptive Dormand–Prince 5(4) integration of
//! `dx/dt = Σ_r γ_r λ̃_r(x)` with cubic Hermite dense output.

use crate::error::{ModelError, SimError};
use crate::kinetics::ScaledNetwork;
use crate::network::{ReactionNetwork, SystemState};
use crate::partition::Partition;
use crate::table::{check_grid, SampleTable};

pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], dxdt: &mut [f64]);
}

/// Adapts a closure into a [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dxdt: &mut [f64]) {
        (self.f)(x, dxdt)
    }
}

/// Flow of the continuous species with the discrete state frozen.
pub struct FlowField<'a> {
    network: &'a ScaledNetwork,
    reactions: Vec<usize>,
    x_d: Vec<i64>,
}

impl<'a> FlowField<'a> {
    /// Flow driven by every reaction that leaves `X_D` unchanged.
    pub fn new(network: &'a ScaledNetwork, x_d: &[i64]) -> Self {
        FlowField {
            network,
            reactions: network.flow_reactions(),
            x_d: x_d.to_vec(),
        }
    }

    pub fn set_discrete(&mut self, x_d: &[i64]) {
        self.x_d.copy_from_slice(x_d);
    }
}

impl VectorField for FlowField<'_> {
    fn dim(&self) -> usize {
        self.network.n_continuous()
    }

    fn eval(&self, x: &[f64], dxdt: &mut [f64]) {
        self.network.drift(&self.reactions, x, &self.x_d, dxdt);
    }
}

/// `dx_C/dt` at `(x_C, X_D)` summed over the flow reactions.
pub fn vector_field(network: &ScaledNetwork, x_c: &[f64], x_d: &[i64]) -> Vec<f64> {
    let mut out = vec![0.0; network.n_continuous()];
    FlowField::new(network, x_d).eval(x_c, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-6,
            atol: 1e-9,
            max_step: f64::INFINITY,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_step > 0.0) {
            return Err(SimError::Precondition(
                "integrator tolerances and max step must be positive".into(),
            ));
        }
        Ok(())
    }
}

// Dormand–Prince tableau. Fields are autonomous, so the nodes c_i are not
// needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-by-step Dormand–Prince integrator on `[t0, t_end]`.
///
/// After each call to [`step`](Self::step) the last accepted step spans
/// `[t_prev, t]` and [`interpolate`](Self::interpolate) evaluates the
/// cubic Hermite interpolant on it.
pub struct Stepper<'f, F: VectorField> {
    field: &'f F,
    cfg: IntegratorConfig,
    t: f64,
    t_end: f64,
    min_step: f64,
    h: f64,
    x: Vec<f64>,
    f: Vec<f64>,
    t_prev: f64,
    x_prev: Vec<f64>,
    f_prev: Vec<f64>,
    k: [Vec<f64>; 6],
    x_new: Vec<f64>,
    f_new: Vec<f64>,
    stage: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl<'f, F: VectorField> Stepper<'f, F> {
    pub fn new(
        field: &'f F,
        x0: &[f64],
        t0: f64,
        t_end: f64,
        cfg: IntegratorConfig,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        if !(t_end >= t0) {
            return Err(SimError::Precondition(format!(
                "integration interval [{t0}, {t_end}] is reversed"
            )));
        }
        let n = field.dim();
        if x0.len() != n {
            return Err(SimError::Precondition(format!(
                "initial vector has {} entries, field has dimension {n}",
                x0.len()
            )));
        }
        let mut f = vec![0.0; n];
        field.eval(x0, &mut f);
        let span = t_end - t0;
        let mut s = Stepper {
            field,
            cfg,
            t: t0,
            t_end,
            min_step: 1e-14 * span,
            h: 0.0,
            x: x0.to_vec(),
            f,
            t_prev: t0,
            x_prev: x0.to_vec(),
            f_prev: vec![0.0; n],
            k: std::array::from_fn(|_| vec![0.0; n]),
            x_new: vec![0.0; n],
            f_new: vec![0.0; n],
            stage: vec![0.0; n],
            accepted: 0,
            rejected: 0,
        };
        s.f_prev.copy_from_slice(&s.f);
        s.h = s.initial_step(span);
        Ok(s)
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.cfg.atol + self.cfg.rtol * a.abs().max(b.abs())
    }

    fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        (v.map(|e| e * e).sum::<f64>() / n as f64).sqrt()
    }

    fn initial_step(&mut self, span: f64) -> f64 {
        let n = self.x.len();
        if span == 0.0 {
            return 0.0;
        }
        let sk: Vec<f64> = self.x.iter().map(|&x| self.scale(x, x)).collect();
        let d0 = Self::rms(self.x.iter().zip(&sk).map(|(x, s)| x / s), n);
        let d1 = Self::rms(self.f.iter().zip(&sk).map(|(f, s)| f / s), n);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span);
        for i in 0..n {
            self.stage[i] = self.x[i] + h0 * self.f[i];
        }
        self.field.eval(&self.stage, &mut self.f_new);
        let d2 = Self::rms(
            self.f_new
                .iter()
                .zip(&self.f)
                .zip(&sk)
                .map(|((a, b), s)| (a - b) / s),
            n,
        ) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.cfg.max_step).min(span)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn done(&self) -> bool {
        self.t >= self.t_end
    }

    /// Performs one accepted step, landing exactly on `t_end` at the end.
    pub fn step(&mut self) -> Result<(), SimError> {
        let n = self.x.len();
        loop {
            let remaining = self.t_end - self.t;
            let mut h = self.h.min(self.cfg.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            self.stages(h);
            let err = if n == 0 {
                0.0
            } else {
                let mut acc = 0.0;
                for i in 0..n {
                    let e = h
                        * (E1 * self.k[0][i]
                            + E3 * self.k[2][i]
                            + E4 * self.k[3][i]
                            + E5 * self.k[4][i]
                            + E6 * self.k[5][i]
                            + E7 * self.f_new[i]);
                    let s = self.scale(self.x[i], self.x_new[i]);
                    acc += (e / s) * (e / s);
                }
                (acc / n as f64).sqrt()
            };
            let negative = self.x_new.iter().any(|&v| v < -self.cfg.atol);
            if err <= 1.0 && !negative {
                self.t_prev = self.t;
                self.x_prev.copy_from_slice(&self.x);
                self.f_prev.copy_from_slice(&self.f);
                self.t = if last { self.t_end } else { self.t + h };
                let mut clamped = false;
                for v in self.x_new.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                        clamped = true;
                    }
                }
                self.x.copy_from_slice(&self.x_new);
                if clamped {
                    self.field.eval(&self.x, &mut self.f);
                } else {
                    self.f.copy_from_slice(&self.f_new);
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    self.h = h * fac;
                }
                self.accepted += 1;
                return Ok(());
            }
            self.rejected += 1;
            self.h = if negative {
                0.5 * h
            } else {
                h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            };
            if self.h < self.min_step || !self.h.is_finite() {
                return Err(SimError::Stiffness {
                    t: self.t,
                    h: self.h,
                });
            }
        }
    }

    fn stages(&mut self, h: f64) {
        dp_stages(
            self.field,
            &self.x,
            &self.f,
            h,
            &mut self.k,
            &mut self.stage,
            &mut self.x_new,
        );
        self.field.eval(&self.x_new, &mut self.f_new);
    }

    /// Fifth-order solution of a single step of size `h` taken from the
    /// start of the last accepted step, without error control. For
    /// `0 <= h <= t - t_prev` it is at least as accurate as that step.
    pub fn step_from_prev(&self, h: f64, out: &mut [f64]) {
        let n = self.x.len();
        let mut k: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
        let mut stage = vec![0.0; n];
        dp_stages(self.field, &self.x_prev, &self.f_prev, h, &mut k, &mut stage, out);
    }

    /// Cubic Hermite interpolant over the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        if t >= self.t {
            out.copy_from_slice(&self.x);
            return;
        }
        if t <= self.t_prev {
            out.copy_from_slice(&self.x_prev);
            return;
        }
        let hs = self.t - self.t_prev;
        let th = (t - self.t_prev) / hs;
        let th2 = th * th;
        let th3 = th2 * th;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        for (i, o) in out.iter_mut().enumerate() {
            *o = h00 * self.x_prev[i]
                + h10 * hs * self.f_prev[i]
                + h01 * self.x[i]
                + h11 * hs * self.f[i];
        }
    }

    /// Interpolated value of a single component.
    pub fn interpolate_component(&self, i: usize, t: f64) -> f64 {
        if t >= self.t {
            return self.x[i];
        }
        if t <= self.t_prev {
            return self.x_prev[i];
        }
        let hs = self.t - self.t_prev;
        let th = (t - self.t_prev) / hs;
        let th2 = th * th;
        let th3 = th2 * th;
        (2.0 * th3 - 3.0 * th2 + 1.0) * self.x_prev[i]
            + (th3 - 2.0 * th2 + th) * hs * self.f_prev[i]
            + (-2.0 * th3 + 3.0 * th2) * self.x[i]
            + (th3 - th2) * hs * self.f[i]
    }

    /// Appends interpolated samples for every `grid[*cursor..]` point not
    /// beyond the current time (strictly before `t` when `strict`).
    pub fn emit_grid(&self, grid: &[f64], cursor: &mut usize, strict: bool, sink: &mut Vec<f64>) {
        let n = self.x.len();
        while *cursor < grid.len() {
            let g = grid[*cursor];
            if g > self.t || (strict && g >= self.t) {
                break;
            }
            let start = sink.len();
            sink.resize(start + n, 0.0);
            self.interpolate(g, &mut sink[start..]);
            *cursor += 1;
        }
    }
}

fn dp_stages<F: VectorField>(
    field: &F,
    x: &[f64],
    f: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 6],
    s: &mut [f64],
    out: &mut [f64],
) {
    let n = x.len();
    let [k1, k2, k3, k4, k5, k6] = k;
    k1.copy_from_slice(f);
    for i in 0..n {
        s[i] = x[i] + h * A21 * k1[i];
    }
    field.eval(s, k2);
    for i in 0..n {
        s[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    field.eval(s, k3);
    for i in 0..n {
        s[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    field.eval(s, k4);
    for i in 0..n {
        s[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    field.eval(s, k5);
    for i in 0..n {
        s[i] = x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    field.eval(s, k6);
    for i in 0..n {
        out[i] = x[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
}

/// Result of [`integrate`]: samples on the requested grid plus the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub grid_states: Vec<f64>,
    pub final_state: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

pub fn integrate<F: VectorField>(
    field: &F,
    x0: &[f64],
    t0: f64,
    t1: f64,
    config: IntegratorConfig,
    grid: &[f64],
) -> Result<OdeSolution, SimError> {
    if grid.iter().any(|&g| g < t0 || g > t1) {
        return Err(SimError::Precondition(format!(
            "dense grid must lie inside [{t0}, {t1}]"
        )));
    }
    let mut stepper = Stepper::new(field, x0, t0, t1, config)?;
    let mut grid_states = Vec::with_capacity(grid.len() * x0.len());
    let mut cursor = 0;
    stepper.emit_grid(grid, &mut cursor, false, &mut grid_states);
    while !stepper.done() {
        stepper.step()?;
        stepper.emit_grid(grid, &mut cursor, false, &mut grid_states);
    }
    Ok(OdeSolution {
        grid_states,
        final_state: stepper.state().to_vec(),
        accepted_steps: stepper.accepted,
        rejected_steps: stepper.rejected,
    })
}

/// Deterministic trajectory in concentration units.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub species: Vec<String>,
    pub sample_times: Vec<f64>,
    pub values: Vec<f64>,
    pub final_state: Vec<f64>,
}

impl OdeTrajectory {
    pub fn sample(&self, i: usize) -> &[f64] {
        let m = self.species.len();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn to_table(&self) -> SampleTable {
        SampleTable {
            columns: self.species.clone(),
            times: self.sample_times.clone(),
            values: self.values.clone(),
        }
    }
}

/// The full deterministic limit: every species continuous.
pub fn simulate_ode(
    network: &ReactionNetwork,
    partition: &Partition,
    init: &SystemState,
    t_max: f64,
    config: IntegratorConfig,
    grid: &[f64],
) -> Result<OdeTrajectory, SimError> {
    if !partition.discrete().is_empty() {
        return Err(SimError::Precondition(
            "the ODE engine needs every species declared continuous".into(),
        ));
    }
    if init.len() != network.n_species() {
        return Err(ModelError::InvalidState(format!(
            "initial state has {} entries, network has {} species",
            init.len(),
            network.n_species()
        ))
        .into());
    }
    check_grid(grid, t_max)?;
    let scaled = ScaledNetwork::new(network, partition)?;
    let x0 = partition.to_hybrid(init.counts()).x_c;
    let field = FlowField::new(&scaled, &[]);
    let sol = integrate(&field, &x0, 0.0, t_max, config, grid)?;
    Ok(OdeTrajectory {
        species: network.species().iter().map(|s| s.name.clone()).collect(),
        sample_times: grid.to_vec(),
        values: sol.grid_states,
        final_state: sol.final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64])> {
        FnField::new(1, |x: &[f64], d: &mut [f64]| d[0] = -x[0])
    }

    #[test]
    fn exponential_decay() {
        let sol = integrate(&decay(), &[1.0], 0.0, 1.0, IntegratorConfig::default(), &[]).unwrap();
        assert!((sol.final_state[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert!((sol.final_state[0] - 0.367879441).abs() < 1e-6);
    }

    #[test]
    fn zero_field_is_constant() {
        let f = FnField::new(2, |_: &[f64], d: &mut [f64]| d.fill(0.0));
        let grid = [0.0, 0.5, 1.0];
        let sol = integrate(&f, &[3.0, 4.0], 0.0, 1.0, IntegratorConfig::default(), &grid).unwrap();
        assert_eq!(sol.grid_states, vec![3.0, 4.0, 3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn linear_production_degradation() {
        // dP/dt = 4000 - P from P = 0.
        let f = FnField::new(1, |x: &[f64], d: &mut [f64]| d[0] = 4000.0 - x[0]);
        let sol = integrate(&f, &[0.0], 0.0, 1.0, IntegratorConfig::default(), &[]).unwrap();
        let exact = 4000.0 * (1.0 - (-1.0f64).exp());
        assert!(((sol.final_state[0] - exact) / exact).abs() < 1e-3);
        assert!((exact - 2528.482).abs() < 1e-3);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let sol = integrate(&decay(), &[1.0], 0.0, 5.0, IntegratorConfig::default(), &grid).unwrap();
        for (g, x) in grid.iter().zip(&sol.grid_states) {
            assert!((x - (-g).exp()).abs() < 1e-5, "t = {g}");
        }
    }

    #[test]
    fn step_halving_convergence() {
        // Large tolerances leave the step size pinned at max_step.
        let run = |h: f64| {
            let cfg = IntegratorConfig {
                rtol: 1.0,
                atol: 1.0,
                max_step: h,
            };
            let sol = integrate(&decay(), &[1.0], 0.0, 2.0, cfg, &[]).unwrap();
            (sol.final_state[0] - (-2.0f64).exp()).abs()
        };
        let coarse = run(0.2);
        let fine = run(0.1);
        assert!(coarse / fine >= 8.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let err = |tol: f64| {
            let cfg = IntegratorConfig {
                rtol: tol,
                atol: tol * 1e-3,
                max_step: f64::INFINITY,
            };
            let sol = integrate(&decay(), &[1.0], 0.0, 1.0, cfg, &[]).unwrap();
            (sol.final_state[0] - (-1.0f64).exp()).abs()
        };
        assert!(err(1e-4) > err(1e-8));
    }

    #[test]
    fn stiff_blowup_reports_error() {
        // x' = x^2 blows up at t = 1.
        let f = FnField::new(1, |x: &[f64], d: &mut [f64]| d[0] = x[0] * x[0]);
        let err = integrate(&f, &[1.0], 0.0, 2.0, IntegratorConfig::default(), &[]).unwrap_err();
        assert!(matches!(err, SimError::Stiffness { .. }));
    }

    #[test]
    fn deterministic_bits() {
        let a = integrate(&decay(), &[1.0], 0.0, 3.0, IntegratorConfig::default(), &[1.5]).unwrap();
        let b = integrate(&decay(), &[1.0], 0.0, 3.0, IntegratorConfig::default(), &[1.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(integrate(&decay(), &[1.0], 1.0, 0.0, IntegratorConfig::default(), &[]).is_err());
    }
}
