//! Current-based leaky integrate-and-fire neuron with exponential synaptic currents.

use serde::{Deserialize, Serialize};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Membrane capacitance (nF).
    pub c_m: f64,
    /// Membrane time constant (ms).
    pub tau_m: f64,
    pub tau_syn_exc: f64,
    pub tau_syn_inh: f64,
    /// Potentials in mV.
    pub v_reset: f64,
    pub v_rest: f64,
    pub v_thresh: f64,
    /// Refractory period (ms). Zero allows spiking on consecutive steps.
    pub tau_refrac: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            c_m: 0.27,
            tau_m: 10.0,
            tau_syn_exc: 0.3,
            tau_syn_inh: 0.3,
            v_reset: -60.0,
            v_rest: -60.0,
            v_thresh: -55.0,
            tau_refrac: 0.0,
        }
    }
}

impl NeuronParams {
    pub fn with_refractory(mut self, tau_refrac: f64) -> Self {
        self.tau_refrac = tau_refrac;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let positive = [self.c_m, self.tau_m, self.tau_syn_exc, self.tau_syn_inh];
        if positive.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(EngineError::InvalidParams("capacitance and time constants must be positive".into()));
        }
        if !(self.tau_refrac >= 0.0) {
            return Err(EngineError::InvalidParams("tau_refrac must be >= 0".into()));
        }
        if self.v_reset > self.v_thresh || self.v_rest >= self.v_thresh {
            return Err(EngineError::InvalidParams("need v_reset <= v_thresh and v_rest < v_thresh".into()));
        }
        Ok(())
    }
}

/// Tolerance for comparing times within a step (ms).
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v: f64,
    pub i_exc: f64,
    pub i_inh: f64,
    /// Refractory time still to run at the start of the next step (ms).
    pub refrac_left: f64,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        Self { v: params.v_rest, i_exc: 0.0, i_inh: 0.0, refrac_left: 0.0 }
    }
}

/// Per-step coefficients of the exact solution of the linear subthreshold system,
/// holding the currents' initial values for the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub dt: f64,
    pub leak: f64,
    pub decay_exc: f64,
    pub decay_inh: f64,
    /// mV of depolarization over one step per nA of current present at step start.
    pub gain_exc: f64,
    pub gain_inh: f64,
    params: NeuronParams,
}

fn current_gain(c_m: f64, tau_m: f64, tau_s: f64, dt: f64) -> f64 {
    if (tau_m - tau_s).abs() < 1e-12 {
        dt / c_m * (-dt / tau_m).exp()
    } else {
        tau_s * tau_m / (c_m * (tau_m - tau_s)) * ((-dt / tau_m).exp() - (-dt / tau_s).exp())
    }
}

impl Propagator {
    pub fn new(p: &NeuronParams, dt: f64) -> Self {
        Self {
            dt,
            leak: (-dt / p.tau_m).exp(),
            decay_exc: (-dt / p.tau_syn_exc).exp(),
            decay_inh: (-dt / p.tau_syn_inh).exp(),
            gain_exc: current_gain(p.c_m, p.tau_m, p.tau_syn_exc, dt),
            gain_inh: current_gain(p.c_m, p.tau_m, p.tau_syn_inh, dt),
            params: *p,
        }
    }

    /// Membrane potential at the end of the step, starting from `v0` at offset
    /// `from` (ms) into the step with the step-start currents.
    fn advance(&self, v0: f64, i_exc: f64, i_inh: f64, from: f64) -> f64 {
        let p = &self.params;
        if from <= 0.0 {
            return p.v_rest + (v0 - p.v_rest) * self.leak + i_exc * self.gain_exc - i_inh * self.gain_inh;
        }
        self.voltage_at(v0, i_exc, i_inh, from, self.dt)
    }

    /// Membrane potential at offset `to`, starting from `v0` at offset `from`.
    fn voltage_at(&self, v0: f64, i_exc: f64, i_inh: f64, from: f64, to: f64) -> f64 {
        let p = &self.params;
        let d = to - from;
        let ie = i_exc * (-from / p.tau_syn_exc).exp();
        let ii = i_inh * (-from / p.tau_syn_inh).exp();
        p.v_rest + (v0 - p.v_rest) * (-d / p.tau_m).exp() + ie * current_gain(p.c_m, p.tau_m, p.tau_syn_exc, d)
            - ii * current_gain(p.c_m, p.tau_m, p.tau_syn_inh, d)
    }

    /// First threshold crossing in `(from, dt]`, if any. The trajectory can peak
    /// inside the step, so it is sampled before refining by bisection.
    fn crossing(&self, v0: f64, i_exc: f64, i_inh: f64, from: f64) -> Option<f64> {
        const SAMPLES: usize = 16;
        let thresh = self.params.v_thresh;
        let v_end = self.advance(v0, i_exc, i_inh, from);
        if i_exc <= 0.0 && v_end < thresh {
            return None;
        }
        let span = self.dt - from;
        let mut lo = from;
        let mut hi = None;
        for j in 1..=SAMPLES {
            let t = from + span * j as f64 / SAMPLES as f64;
            let v = if j == SAMPLES { v_end } else { self.voltage_at(v0, i_exc, i_inh, from, t) };
            if v >= thresh {
                hi = Some(t);
                break;
            }
            lo = t;
        }
        let mut hi = hi?;
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if self.voltage_at(v0, i_exc, i_inh, from, mid) >= thresh {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}

/// Advance one neuron by one step. Input arriving this step must already be added
/// to the currents. Returns whether the neuron spiked.
///
/// The threshold crossing is located on the exact trajectory inside the step and
/// the refractory period runs from there, so a period ending mid-step leaves
/// the rest of that step to integrate.
pub fn integrate_neuron_step(state: &mut NeuronState, params: &NeuronParams, prop: &Propagator) -> bool {
    let dt = prop.dt;
    let mut spiked = false;
    if state.refrac_left >= dt - TIME_EPS {
        state.v = params.v_reset;
        state.refrac_left = (state.refrac_left - dt).max(0.0);
        if state.refrac_left < TIME_EPS {
            state.refrac_left = 0.0;
        }
    } else {
        let (from, v0) = if state.refrac_left > 0.0 { (state.refrac_left, params.v_reset) } else { (0.0, state.v) };
        state.refrac_left = 0.0;
        match prop.crossing(v0, state.i_exc, state.i_inh, from) {
            Some(at) => {
                spiked = true;
                let released = at + params.tau_refrac;
                if released >= dt - TIME_EPS {
                    state.v = params.v_reset;
                    state.refrac_left = if released - dt < TIME_EPS { 0.0 } else { released - dt };
                } else {
                    state.v = prop.advance(params.v_reset, state.i_exc, state.i_inh, released);
                }
            }
            None => state.v = prop.advance(v0, state.i_exc, state.i_inh, from),
        }
    }
    state.i_exc *= prop.decay_exc;
    state.i_inh *= prop.decay_inh;
    spiked
}
