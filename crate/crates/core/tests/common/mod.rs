#![allow(dead_code)]

use ca3mem::engine::NeuronParams;
use ca3mem::plasticity::StdpParams;

/// Forward-Euler integration of the continuous LIF equations at a fine step.
/// `inputs` are `(arrival_ms, weight_nA)` excitatory kicks to the synaptic
/// current. Returns spike times (ms) and the membrane potential sampled at
/// every whole millisecond.
pub fn reference_lif(params: &NeuronParams, inputs: &[(f64, f64)], duration: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut sorted: Vec<(f64, f64)> = inputs.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let steps = (duration / h).round() as usize;
    let per_ms = (1.0 / h).round() as usize;
    let (mut v, mut i_syn, mut refrac_until) = (params.v_rest, 0.0f64, f64::NEG_INFINITY);
    let mut next = 0;
    let mut spikes = Vec::new();
    let mut samples = Vec::new();
    for s in 0..steps {
        let t = s as f64 * h;
        if s % per_ms == 0 {
            samples.push(v);
        }
        while next < sorted.len() && sorted[next].0 <= t + h * 0.5 {
            i_syn += sorted[next].1;
            next += 1;
        }
        if t + h * 0.5 < refrac_until {
            v = params.v_reset;
        } else {
            v += h * (-(v - params.v_rest) / params.tau_m + i_syn / params.c_m);
        }
        i_syn -= h * i_syn / params.tau_syn_exc;
        if v >= params.v_thresh {
            spikes.push(t + h);
            v = params.v_reset;
            refrac_until = t + h + params.tau_refrac;
        }
    }
    (spikes, samples)
}

/// Every pre/post pair evaluated explicitly. Potentiating pairs are applied at
/// the first presynaptic arrival strictly after the postsynaptic spike;
/// depressing pairs at the arrival that forms them. Returns the weight after
/// each arrival.
pub fn brute_force_commits(pre: &[f64], post: &[f64], p: &StdpParams) -> Vec<f64> {
    let mut w = p.w_init;
    let mut out = Vec::new();
    for (k, &tk) in pre.iter().enumerate() {
        let prev = if k == 0 { f64::NEG_INFINITY } else { pre[k - 1] };
        let mut delta = 0.0;
        for &tp in &pre[..=k] {
            for &ts in post {
                let d = ts - tp;
                if d > 0.0 && ts >= prev && ts < tk {
                    delta += p.a_plus * (-d / p.tau_plus).exp();
                }
            }
        }
        for &ts in post {
            let d = ts - tk;
            if d < 0.0 {
                delta -= p.a_minus * (d / p.tau_minus).exp();
            }
        }
        w = (w + delta).clamp(p.w_min, p.w_max);
        out.push(w);
    }
    out
}

use ca3mem::engine::{Connectivity, NetworkTopology, PopulationKind, Receptor, SimulationConfig, StimulusSchedule};
use ca3mem::plasticity::Transmission;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct TrainCase {
    pub weight: f64,
    pub tau_refrac: f64,
    /// Source emission times (ms); inputs arrive one delay later.
    pub train: Vec<f64>,
    pub duration: f64,
}

pub const DELAY: f64 = 1.0;

pub fn train_cases(seed: u64, count: usize) -> Vec<TrainCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(1..=15);
            let mut train: Vec<f64> = (0..60).map(f64::from).collect();
            rand::seq::SliceRandom::shuffle(train.as_mut_slice(), &mut rng);
            train.truncate(len);
            train.sort_by(|a, b| a.partial_cmp(b).unwrap());
            TrainCase {
                weight: rng.gen_range(1.0..12.0),
                tau_refrac: [1.0, 2.0][rng.gen_range(0..2)],
                train,
                duration: 80.0,
            }
        })
        .collect()
}

/// One source driving one LIF neuron through a static synapse.
pub fn engine_spike_times(case: &TrainCase) -> Vec<f64> {
    let mut t = NetworkTopology::new();
    let src = t.add_population("src", 1, PopulationKind::Source);
    let params = NeuronParams::default().with_refractory(case.tau_refrac);
    let dst = t.add_population("dst", 1, PopulationKind::Lif(params));
    t.connect_static("drive", src, dst, Connectivity::OneToOne, case.weight, Receptor::Excitatory, DELAY);
    let cfg = SimulationConfig { dt: 1.0, duration: case.duration, ..Default::default() };
    let sched = StimulusSchedule::volleys(&[0], case.train.iter().copied());
    let (record, _) = ca3mem::run_simulation(t, &[(src, sched)], &cfg).unwrap();
    record.train("dst", 0)
}

pub fn reference_spike_times(case: &TrainCase) -> Vec<f64> {
    let params = NeuronParams::default().with_refractory(case.tau_refrac);
    let inputs: Vec<(f64, f64)> = case.train.iter().map(|&t| (t + DELAY, case.weight)).collect();
    reference_lif(&params, &inputs, case.duration, 1e-3).0
}

/// Largest spike-time gap, or `None` when the spike counts differ.
pub fn max_spike_error(engine: &[f64], reference: &[f64]) -> Option<f64> {
    (engine.len() == reference.len())
        .then(|| engine.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Random pre/post trains on a 1 ms grid with large amplitudes so both clamp
/// bounds are reached.
pub fn stdp_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, StdpParams) {
    fn pick(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..40).map(f64::from).collect();
        rand::seq::SliceRandom::shuffle(v.as_mut_slice(), rng);
        v.truncate(len);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }
    let (npre, npost) = (rng.gen_range(1..=20), rng.gen_range(0..=20));
    let pre = pick(rng, npre);
    let post = pick(rng, npost);
    let p = StdpParams {
        a_plus: rng.gen_range(0.5..8.0),
        a_minus: rng.gen_range(0.5..8.0),
        tau_plus: rng.gen_range(1.0..6.0),
        tau_minus: rng.gen_range(1.0..6.0),
        w_init: rng.gen_range(0.0..12.0),
        ..StdpParams::default()
    };
    (pre, post, p)
}

/// Drives a `PlasticSynapse` through the merged event stream, arrivals before
/// postsynaptic spikes at equal times, and returns the weight after each arrival.
pub fn synapse_commits(pre: &[f64], post: &[f64], p: &StdpParams) -> Vec<f64> {
    let mut syn = ca3mem::plasticity::PlasticSynapse::new(0, 1, p);
    let mut events: Vec<(f64, u8)> = pre.iter().map(|&t| (t, 0)).chain(post.iter().map(|&t| (t, 1))).collect();
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    for (t, kind) in events {
        if kind == 0 {
            out.push(syn.on_pre_spike(t, p).1);
        } else {
            syn.on_post_spike(t, p);
        }
    }
    out
}

/// Source-driven pre and post neurons joined by one plastic synapse. Returns
/// presynaptic arrival times, postsynaptic spike times and the final weight.
pub fn engine_stdp(pre_emit: &[f64], drive: &[f64], p: &StdpParams) -> (Vec<f64>, Vec<f64>, f64) {
    let mut t = NetworkTopology::new();
    let pre = t.add_population("pre", 1, PopulationKind::Source);
    let drv = t.add_population("drv", 1, PopulationKind::Source);
    let post = t.add_population("post", 1, PopulationKind::Lif(NeuronParams::default()));
    t.connect_static("drive", drv, post, Connectivity::OneToOne, 20.0, Receptor::Excitatory, DELAY);
    t.connect_plastic("learned", pre, post, Connectivity::OneToOne, *p, Transmission::AfterCommit);
    let cfg = SimulationConfig { dt: 1.0, duration: 60.0, ..Default::default() };
    let stim = [
        (pre, StimulusSchedule::volleys(&[0], pre_emit.iter().copied())),
        (drv, StimulusSchedule::volleys(&[0], drive.iter().copied())),
    ];
    let (record, topo) = ca3mem::run_simulation(t, &stim, &cfg).unwrap();
    let w = ca3mem::engine::weights_of(&topo, "learned").unwrap().entries[0].weight;
    let arrivals: Vec<f64> = pre_emit.iter().map(|t| t + p.delay).filter(|&t| t < cfg.duration).collect();
    (arrivals, record.train("post", 0), w)
}
