//! Baseline controllers and closed-loop assembly for the frequency and
//! voltage loops, with optional observer feed-forward, measurement delay
//! and load noise.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dobc::DisturbanceObserver;
use crate::error::{ensure, Result};
use crate::network::{Network, NetworkBuilder, Source};
use crate::plant::{AvrPlant, LfcPlant};
use crate::ss::StateSpaceModel;
use crate::tf::TransferFunction;

/// Parallel-form PID gains with a first-order derivative filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    #[serde(default)]
    pub kp: f64,
    #[serde(default)]
    pub ki: f64,
    #[serde(default)]
    pub kd: f64,
    /// Derivative filter coefficient N (rad/s).
    #[serde(default = "default_filter_n")]
    pub derivative_filter_n: f64,
}

fn default_filter_n() -> f64 {
    100.0
}

/// Integral gain of the baseline secondary frequency controller.
pub const LFC_DEFAULT_KI: f64 = 0.1;

impl PidGains {
    pub fn integral(ki: f64) -> Self {
        Self { kp: 0.0, ki, kd: 0.0, derivative_filter_n: default_filter_n() }
    }

    pub fn proportional(kp: f64) -> Self {
        Self { kp, ki: 0.0, kd: 0.0, derivative_filter_n: default_filter_n() }
    }

    pub fn pid(kp: f64, ki: f64, kd: f64, n: f64) -> Self {
        Self { kp, ki, kd, derivative_filter_n: n }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.ki >= 0.0, "controller.ki", "must be non-negative")?;
        ensure(self.kd >= 0.0, "controller.kd", "must be non-negative")?;
        ensure(
            self.kd == 0.0 || self.derivative_filter_n > 0.0,
            "controller.derivative_filter_n",
            "must be positive when kd > 0",
        )
    }

    pub fn has_integral(&self) -> bool {
        self.ki > 0.0
    }

    /// `kp + ki/s + kd·N·s/(s + N)`
    pub fn transfer_function(&self) -> TransferFunction {
        let mut tf = TransferFunction::gain(self.kp);
        if self.ki != 0.0 {
            tf = tf.parallel(&TransferFunction::integrator(self.ki));
        }
        if self.kd != 0.0 {
            let n = self.derivative_filter_n;
            let d =
                TransferFunction::from_coeffs(&[0.0, self.kd * n], &[n, 1.0]).expect("filter denominator is nonzero");
            tf = tf.parallel(&d);
        }
        tf
    }
}

/// Memory of the discrete PID.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub derivative: f64,
    pub prev_error: Option<f64>,
}

/// One sample of the discrete parallel PID: trapezoidal integral and a
/// backward-Euler filtered derivative. The first call seeds the error
/// history with the current error, so there is no derivative kick.
pub fn pid_step(gains: &PidGains, error: f64, state: &mut PidState, dt: f64) -> f64 {
    let prev = state.prev_error.unwrap_or(error);
    state.integral += gains.ki * dt * 0.5 * (error + prev);
    if gains.kd != 0.0 {
        let n = gains.derivative_filter_n;
        state.derivative = (state.derivative + gains.kd * n * (error - prev)) / (1.0 + n * dt);
    }
    state.prev_error = Some(error);
    gains.kp * error + state.integral + state.derivative
}

/// Zero-mean Gaussian load noise, held piecewise constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation, pu.
    pub sigma: f64,
    /// Hold interval, s.
    pub hold_interval: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { sigma: 0.002, hold_interval: 0.01, seed: 0 }
    }
}

impl NoiseSpec {
    /// Sample for the `index`-th hold interval. Each interval draws from its
    /// own ChaCha stream, so samples do not depend on evaluation order.
    pub fn sample(&self, index: u64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let z: f64 = StandardNormal.sample(&mut rng);
        self.sigma * z
    }
}

/// Load with noise at time `t`.
pub fn inject_load_noise(spec: &NoiseSpec, base_load: f64, t: f64) -> f64 {
    let index = libm::floor(t / spec.hold_interval + 1e-9).max(0.0) as u64;
    base_load + spec.sample(index)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Lfc(LfcPlant),
    Avr(AvrPlant),
}

impl Plant {
    /// Nominal plant from control input to the regulated output.
    pub fn nominal(&self) -> TransferFunction {
        match self {
            Plant::Lfc(p) => p.control_to_frequency(),
            Plant::Avr(p) => p.open_loop(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub plant: Plant,
    pub controller: PidGains,
    pub observer: Option<DisturbanceObserver>,
    /// Sensor-to-controller delay, s.
    pub measurement_delay: f64,
    pub load_noise: Option<NoiseSpec>,
    /// Delay the observer's plant-input branch by the measurement delay so
    /// both branches see samples from the same instant.
    pub align_observer_input: bool,
}

impl ClosedLoop {
    pub fn new(plant: Plant, controller: PidGains) -> Self {
        Self {
            plant,
            controller,
            observer: None,
            measurement_delay: 0.0,
            load_noise: None,
            align_observer_input: false,
        }
    }

    pub fn with_observer(mut self, observer: DisturbanceObserver) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.measurement_delay = delay;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.load_noise = Some(noise);
        self
    }
}

/// Exogenous test signals: steps applied at `t_step`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stimulus {
    /// Voltage reference, pu.
    pub v_ref: f64,
    /// Signed PV power change, pu (negative is a generation deficit).
    pub pv_change: f64,
    /// Signed load change, pu.
    pub load_change: f64,
    pub t_step: f64,
}

/// Sampled signals of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    channels: Vec<(String, Vec<f64>)>,
}

impl Trace {
    fn new(dt: f64, names: &[&str], capacity: usize) -> Self {
        Self { dt, channels: names.iter().map(|n| (String::from(*n), Vec::with_capacity(capacity))).collect() }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map(|c| c.1.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Header `t,<channels…>` then one row per sample, LF line endings and
    /// shortest round-trip decimal formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (name, _) in &self.channels {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format!("{}", self.time(k)));
            for (_, v) in &self.channels {
                out.push_str(&format!(",{}", v[k]));
            }
            out.push('\n');
        }
        out
    }

    /// Keeps every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> Trace {
        let stride = stride.max(1);
        Trace {
            dt: self.dt * stride as f64,
            channels: self
                .channels
                .iter()
                .map(|(n, v)| (n.clone(), v.iter().step_by(stride).copied().collect()))
                .collect(),
        }
    }

    fn push(&mut self, values: &[f64]) {
        for ((_, ch), v) in self.channels.iter_mut().zip(values) {
            ch.push(*v);
        }
    }
}

pub const LFC_CHANNELS: [&str; 9] = ["delta_f", "delta_f_meas", "p_dg", "p_pv", "p_load", "x_c", "u", "d_hat", "d_l"];

pub const AVR_CHANNELS: [&str; 9] = ["v_ref", "v_t", "v_s", "v_meas", "v_error", "x_c", "u", "d_hat", "d_l"];

#[derive(Debug, Clone, Copy)]
struct Taps {
    output: usize,
    meas: Source,
    err: usize,
    ctrl: usize,
    u: usize,
    d_hat: Option<usize>,
    // LFC: diesel, pv filter; AVR: terminal voltage, unused
    aux: usize,
    aux2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoopKind {
    Lfc,
    Avr,
}

/// A wired closed loop ready to run.
#[derive(Debug, Clone)]
pub struct Simulation {
    kind: LoopKind,
    net: Network,
    taps: Taps,
    dt: f64,
    delay_steps: usize,
    stimulus: Stimulus,
    noise: Option<NoiseSpec>,
    noise_hold_steps: u64,
    warnings: Vec<String>,
}

// LFC exogenous slots
const LFC_PV: usize = 0;
const LFC_LOAD: usize = 1;
const LFC_MEAS: usize = 2;
const LFC_U: usize = 3;
// AVR exogenous slots
const AVR_REF: usize = 0;
const AVR_MEAS: usize = 1;
const AVR_U: usize = 2;

/// Wires the loop.
///
/// Frequency loop: the governor receives the plant input `u` minus `Δf/R`,
/// where `Δf` is the measurement delivered to the controller; the secondary
/// controller acts on `−Δf` and `u = x_c − d̂`.
///
/// Voltage loop: the controller acts on `V_ref − V_s`, the amplifier
/// receives `u = x_c − d̂`.
///
/// In both loops the observer's output branch is driven by the tracking
/// deviation (measured minus reference), and with a nonzero delay the
/// measurement (and, when aligned, the observer's input branch) is read
/// from a sample ring buffer.
pub fn assemble(spec: &ClosedLoop, stimulus: Stimulus, dt: f64) -> Result<Simulation> {
    ensure(dt > 0.0 && dt.is_finite(), "dt", "must be positive")?;
    ensure(spec.measurement_delay >= 0.0, "measurement_delay", "must be non-negative")?;
    spec.controller.validate()?;

    let mut warnings = Vec::new();
    let exact = spec.measurement_delay / dt;
    let mut delay_steps = libm::round(exact) as usize;
    if spec.measurement_delay > 0.0 && delay_steps == 0 {
        delay_steps = 1;
        warnings.push(format!(
            "measurement delay {} s is shorter than dt = {} s; rounded up to one sample",
            spec.measurement_delay, dt
        ));
    } else if (delay_steps as f64 - exact).abs() > 1e-9 {
        warnings.push(format!(
            "measurement delay {} s rounded to {} samples ({} s)",
            spec.measurement_delay,
            delay_steps,
            delay_steps as f64 * dt
        ));
    }

    let (noise, noise_hold_steps) = match spec.load_noise {
        Some(n) => {
            ensure(n.sigma >= 0.0, "noise.sigma", "must be non-negative")?;
            ensure(n.hold_interval >= dt * (1.0 - 1e-9), "noise.hold_interval", "must be at least dt")?;
            (Some(n), (libm::round(n.hold_interval / dt) as u64).max(1))
        }
        None => (None, 1),
    };

    let controller = StateSpaceModel::from_tf(&spec.controller.transfer_function())?;
    let observer = spec.observer.as_ref().map(|o| {
        let mut yq = o.branch_yq.clone();
        let mut xq = o.branch_xq.clone();
        yq.reset();
        xq.reset();
        (yq, xq, o.saturation)
    });
    let delayed = delay_steps > 0;

    let (kind, net, taps) = match &spec.plant {
        Plant::Lfc(plant) => {
            let [gov, diesel, vsc, lc, ps] = plant.realize()?;
            let mut b = NetworkBuilder::new(4);
            let gov = b.dynamic(gov);
            let diesel = b.dynamic(diesel);
            let vsc = b.dynamic(vsc);
            let lc = b.dynamic(lc);
            let ps = b.dynamic(ps);
            let meas = if delayed { Source::Exo(LFC_MEAS) } else { Source::Node(ps) };
            let err = b.sum(None);
            b.connect(err, meas, -1.0);
            let ctrl = b.dynamic(controller);
            b.connect(ctrl, Source::Node(err), 1.0);
            let u = b.sum(None);
            b.connect(u, Source::Node(ctrl), 1.0);
            let d_hat = wire_observer(&mut b, observer, err, u, delayed && spec.align_observer_input, LFC_U);
            b.connect(gov, Source::Node(u), 1.0)
                .connect(gov, meas, -plant.droop_gain)
                .connect(diesel, Source::Node(gov), 1.0)
                .connect(vsc, Source::Exo(LFC_PV), 1.0)
                .connect(lc, Source::Node(vsc), 1.0)
                .connect(ps, Source::Node(diesel), 1.0)
                .connect(ps, Source::Node(lc), 1.0)
                .connect(ps, Source::Exo(LFC_LOAD), -1.0);
            let taps = Taps { output: ps, meas, err, ctrl, u, d_hat, aux: diesel, aux2: lc };
            (LoopKind::Lfc, b.build()?, taps)
        }
        Plant::Avr(plant) => {
            let [amp, exc, gen, sensor] = plant.realize()?;
            let mut b = NetworkBuilder::new(3);
            let amp = b.dynamic(amp);
            let exc = b.dynamic(exc);
            let gen = b.dynamic(gen);
            let sensor = b.dynamic(sensor);
            let meas = if delayed { Source::Exo(AVR_MEAS) } else { Source::Node(sensor) };
            let err = b.sum(None);
            b.connect(err, Source::Exo(AVR_REF), 1.0).connect(err, meas, -1.0);
            let ctrl = b.dynamic(controller);
            b.connect(ctrl, Source::Node(err), 1.0);
            let u = b.sum(None);
            b.connect(u, Source::Node(ctrl), 1.0);
            let d_hat = wire_observer(&mut b, observer, err, u, delayed && spec.align_observer_input, AVR_U);
            b.connect(amp, Source::Node(u), 1.0)
                .connect(exc, Source::Node(amp), 1.0)
                .connect(gen, Source::Node(exc), 1.0)
                .connect(sensor, Source::Node(gen), 1.0);
            let taps = Taps { output: sensor, meas, err, ctrl, u, d_hat, aux: gen, aux2: gen };
            (LoopKind::Avr, b.build()?, taps)
        }
    };

    Ok(Simulation { kind, net, taps, dt, delay_steps, stimulus, noise, noise_hold_steps, warnings })
}

fn wire_observer(
    b: &mut NetworkBuilder,
    observer: Option<(StateSpaceModel, StateSpaceModel, f64)>,
    err: usize,
    u: usize,
    aligned: bool,
    u_slot: usize,
) -> Option<usize> {
    let (yq, xq, limit) = observer?;
    let yq = b.dynamic(yq);
    let xq = b.dynamic(xq);
    let d_hat = b.sum(Some(limit));
    // deviation = measured − reference = −error
    b.connect(yq, Source::Node(err), -1.0);
    let x_src = if aligned { Source::Exo(u_slot) } else { Source::Node(u) };
    b.connect(xq, x_src, 1.0);
    b.connect(d_hat, Source::Node(yq), 1.0).connect(d_hat, Source::Node(xq), -1.0);
    b.connect(u, Source::Node(d_hat), -1.0);
    Some(d_hat)
}

impl Simulation {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Notes recorded while wiring (e.g. delay rounding).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Runs from rest for `horizon` seconds and records `horizon/dt + 1`
    /// samples starting at t = 0.
    pub fn run(&mut self, horizon: f64) -> Result<Trace> {
        ensure(horizon > 0.0 && horizon.is_finite(), "horizon", "must be positive")?;
        let steps = libm::round(horizon / self.dt) as usize;
        let step_index = libm::round(self.stimulus.t_step / self.dt).max(0.0) as usize;
        let names: &[&str] = match self.kind {
            LoopKind::Lfc => &LFC_CHANNELS,
            LoopKind::Avr => &AVR_CHANNELS,
        };
        let mut trace = Trace::new(self.dt, names, steps + 1);
        let mut meas_buf: VecDeque<f64> = core::iter::repeat_n(0.0, self.delay_steps).collect();
        let mut u_buf: VecDeque<f64> = core::iter::repeat_n(0.0, self.delay_steps).collect();
        let t = self.taps;

        for k in 0..=steps {
            let time = k as f64 * self.dt;
            let active = k >= step_index;
            let noise = self.noise.map(|n| n.sample(k as u64 / self.noise_hold_steps)).unwrap_or(0.0);
            let (meas_slot, u_slot) = match self.kind {
                LoopKind::Lfc => {
                    let s = &self.stimulus;
                    self.net.set_exo(LFC_PV, if active { s.pv_change } else { 0.0 });
                    self.net.set_exo(LFC_LOAD, if active { s.load_change } else { 0.0 } + noise);
                    (LFC_MEAS, LFC_U)
                }
                LoopKind::Avr => {
                    self.net.set_exo(AVR_REF, if active { self.stimulus.v_ref } else { 0.0 });
                    (AVR_MEAS, AVR_U)
                }
            };
            if self.delay_steps > 0 {
                self.net.set_exo(meas_slot, meas_buf[0]);
                self.net.set_exo(u_slot, u_buf[0]);
            }
            self.net.refresh();

            let out = self.net.output(t.output);
            let meas = match t.meas {
                Source::Node(i) => self.net.output(i),
                Source::Exo(_) => meas_buf.front().copied().unwrap_or(out),
            };
            let d_hat = t.d_hat.map(|i| self.net.output(i)).unwrap_or(0.0);
            let x_c = self.net.output(t.ctrl);
            let u = self.net.output(t.u);
            let err = self.net.output(t.err);
            match self.kind {
                LoopKind::Lfc => {
                    let p_pv = self.net.output(t.aux2);
                    let p_load = if active { self.stimulus.load_change } else { 0.0 } + noise;
                    trace.push(&[out, meas, self.net.output(t.aux), p_pv, p_load, x_c, u, d_hat, p_pv - p_load]);
                }
                LoopKind::Avr => {
                    let v_ref = if active { self.stimulus.v_ref } else { 0.0 };
                    trace.push(&[v_ref, self.net.output(t.aux), out, meas, err, x_c, u, d_hat, v_ref - out]);
                }
            }

            if self.delay_steps > 0 {
                meas_buf.pop_front();
                meas_buf.push_back(out);
                u_buf.pop_front();
                u_buf.push_back(u);
            }
            if k < steps {
                self.net.step(self.dt, time)?;
            }
        }
        Ok(trace)
    }
}

/// Convenience: assemble and run.
pub fn simulate(spec: &ClosedLoop, stimulus: Stimulus, dt: f64, horizon: f64) -> Result<Trace> {
    assemble(spec, stimulus, dt)?.run(horizon)
}
