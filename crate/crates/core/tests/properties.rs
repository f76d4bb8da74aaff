use std::collections::BTreeSet;

use ca3mem::engine::{
    Connectivity, NetworkTopology, NeuronParams, PopId, PopulationKind, Receptor, SimulationConfig, Simulator,
    SpikeRecord, StimulusSchedule,
};
use ca3mem::harness::{evaluate_recall, generate_orthogonal_patterns, run_experiment, CueSlot, ExperimentSpec};
use ca3mem::memory::{
    build_oscillatory, build_regulated, count_resources, tally, ModelKind, OpSlot, OscillatoryConfig,
    OscillatoryMemory, Pattern, RegulatedConfig, RegulatedMemory, PC,
};
use ca3mem::plasticity::{PlasticSynapse, StdpParams, Transmission};
use proptest::prelude::*;

const N: usize = 6;

/// A source driving a small recurrent LIF population through random static and
/// plastic projections.
fn network(exc: f64, inh: f64, refrac: f64, plastic: bool) -> (NetworkTopology, PopId, PopId) {
    let mut t = NetworkTopology::new();
    let src = t.add_population("src", N, PopulationKind::Source);
    let lif = t.add_population("lif", N, PopulationKind::Lif(NeuronParams::default().with_refractory(refrac)));
    t.connect_static("drive", src, lif, Connectivity::OneToOne, exc, Receptor::Excitatory, 1.0);
    t.connect_static("lateral", lif, lif, Connectivity::AllToAllNoSelf, inh, Receptor::Inhibitory, 1.0);
    if plastic {
        let p = StdpParams { w_init: 3.0, ..StdpParams::default() };
        t.connect_plastic("recurrent", lif, lif, Connectivity::AllToAllNoSelf, p, Transmission::AfterCommit);
    }
    (t, src, lif)
}

fn train_strategy() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::btree_set((0..N, 0u32..40), 0..30)
        .prop_map(|s| s.into_iter().map(|(i, t)| (i, f64::from(t))).collect())
}

fn run(topology: NetworkTopology, src: PopId, train: &[(usize, f64)], cfg: SimulationConfig) -> Simulator {
    let mut sim = Simulator::new(topology, &cfg).unwrap();
    sim.schedule(src, &StimulusSchedule { spikes: train.to_vec() }).unwrap();
    sim.run_until(cfg.duration).unwrap();
    sim
}

fn sorted_events(record: &SpikeRecord) -> Vec<Vec<(usize, u64)>> {
    record
        .events
        .iter()
        .map(|ev| {
            let mut ev = ev.clone();
            ev.sort_by_key(|&(i, k)| (k, i));
            ev
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn identical_inputs_give_identical_runs(
        train in train_strategy(),
        exc in 1.0f64..20.0,
        inh in 0.0f64..4.0,
        refrac in 0.0f64..3.0,
    ) {
        let cfg = SimulationConfig { duration: 60.0, ..Default::default() };
        let (t1, src, _) = network(exc, inh, refrac, true);
        let (t2, _, _) = network(exc, inh, refrac, true);
        let a = run(t1, src, &train, cfg);
        let b = run(t2, src, &train, cfg);
        prop_assert_eq!(&a.record().events, &b.record().events);
        prop_assert_eq!(a.weights("recurrent"), b.weights("recurrent"));
    }

    #[test]
    fn no_input_no_spikes(exc in 0.0f64..30.0, inh in 0.0f64..4.0, refrac in 0.0f64..3.0) {
        let (t, src, _) = network(exc, inh, refrac, true);
        let sim = run(t, src, &[], SimulationConfig { duration: 50.0, ..Default::default() });
        prop_assert_eq!(sim.record().total(), 0);
    }

    #[test]
    fn subthreshold_responses_superpose(
        a in prop::collection::vec((0u32..20, 0.1f64..5.0), 0..6),
        b in prop::collection::vec((0u32..20, 0.1f64..5.0), 0..6),
    ) {
        let params = NeuronParams { v_thresh: 1e6, ..NeuronParams::default() };
        let trace = |inputs: &[(u32, f64)]| -> Vec<f64> {
            let mut t = NetworkTopology::new();
            let lif = t.add_population("lif", 1, PopulationKind::Lif(params));
            let mut pops = Vec::new();
            for (k, &(_, w)) in inputs.iter().enumerate() {
                let s = t.add_population(&format!("s{}", k), 1, PopulationKind::Source);
                t.connect_static(&format!("p{}", k), s, lif, Connectivity::OneToOne, w, Receptor::Excitatory, 1.0);
                pops.push(s);
            }
            let cfg = SimulationConfig { duration: 30.0, record_voltages: true, ..Default::default() };
            let mut sim = Simulator::new(t, &cfg).unwrap();
            for (k, &(at, _)) in inputs.iter().enumerate() {
                sim.schedule(pops[k], &StimulusSchedule::volleys(&[0], [f64::from(at)])).unwrap();
            }
            sim.run_until(30.0).unwrap();
            sim.voltage_trace(lif, 0).unwrap().iter().map(|v| v - params.v_rest).collect()
        };
        let both: Vec<(u32, f64)> = a.iter().chain(&b).copied().collect();
        let (ta, tb, tab) = (trace(&a), trace(&b), trace(&both));
        for k in 0..tab.len() {
            prop_assert!((tab[k] - ta[k] - tb[k]).abs() < 1e-9, "step {}: {} vs {}", k, tab[k], ta[k] + tb[k]);
        }
    }

    #[test]
    fn spikes_respect_refractory_period(
        train in train_strategy(),
        exc in 5.0f64..40.0,
        refrac in 0.0f64..4.0,
    ) {
        let (t, src, _) = network(exc, 0.0, refrac, true);
        let sim = run(t, src, &train, SimulationConfig { duration: 60.0, ..Default::default() });
        for i in 0..N {
            let mut steps: Vec<u64> = sim.record().spikes("lif").iter().filter(|s| s.0 == i).map(|s| s.1).collect();
            steps.sort_unstable();
            for w in steps.windows(2) {
                // a spike stamped k crossed threshold inside (k, k + 1]
                let gap = (w[1] - w[0]) as f64;
                prop_assert!(gap >= 1.0 && gap > refrac - 1.0 - 1e-9, "neuron {} spikes {:?}", i, w);
            }
        }
    }

    #[test]
    fn integration_order_does_not_matter(
        train in train_strategy(),
        exc in 1.0f64..20.0,
        inh in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let plain = SimulationConfig { duration: 60.0, ..Default::default() };
        let shuffled = SimulationConfig { shuffle_seed: Some(seed), ..plain };
        let (t1, src, _) = network(exc, inh, 1.0, true);
        let (t2, _, _) = network(exc, inh, 1.0, true);
        let a = run(t1, src, &train, plain);
        let b = run(t2, src, &train, shuffled);
        prop_assert_eq!(sorted_events(a.record()), sorted_events(b.record()));
        prop_assert_eq!(a.weights("recurrent"), b.weights("recurrent"));
    }

    #[test]
    fn plastic_weights_stay_in_bounds(train in train_strategy(), exc in 5.0f64..30.0) {
        let (t, src, _) = network(exc, 0.5, 0.0, true);
        let sim = run(t, src, &train, SimulationConfig { duration: 60.0, ..Default::default() });
        let p = StdpParams::default();
        for e in sim.weights("recurrent").unwrap().entries {
            prop_assert!(e.weight >= p.w_min && e.weight <= p.w_max, "{:?}", e);
        }
    }

    #[test]
    fn weight_changes_only_on_presynaptic_arrival(
        events in prop::collection::vec((any::<bool>(), 0u32..5), 1..40),
        w_init in 0.0f64..12.0,
    ) {
        let p = StdpParams { w_init, ..StdpParams::default() };
        let mut syn = PlasticSynapse::new(0, 1, &p);
        let mut t = 0.0;
        for (is_pre, gap) in events {
            t += f64::from(gap);
            let before = syn.weight;
            if is_pre {
                let (was, now) = syn.on_pre_spike(t, &p);
                prop_assert_eq!(was, before);
                prop_assert_eq!(now, syn.weight);
                prop_assert_eq!(syn.pending_delta, 0.0);
            } else {
                syn.on_post_spike(t, &p);
                prop_assert_eq!(syn.weight, before);
            }
        }
    }

    #[test]
    fn one_extra_spike_moves_one_error_count(
        pc in prop::collection::btree_set((0usize..15, 10u64..30), 0..20),
        expected in prop::collection::btree_set(0usize..15, 0..6),
        cue in prop::collection::btree_set(0usize..15, 1..5),
        extra in 0usize..15,
        at in 12u64..30,
    ) {
        prop_assume!(!cue.contains(&extra));
        let expected: BTreeSet<usize> = expected.difference(&cue).copied().collect();
        let slot = CueSlot { cue: cue.clone(), slot: OpSlot { start: 6.0, input_end: 10.0, window_start: 12.0, end: 30.0 } };
        let mut record = SpikeRecord::new(1.0, vec!["DG".into(), PC.into()], vec![15, 15]);
        record.events[1] = pc.iter().copied().collect();
        let base = evaluate_recall(&record, &slot, &expected);
        let mut more = record.clone();
        more.events[1].push((extra, at));
        let after = evaluate_recall(&more, &slot, &expected);
        let moved = usize::from(after.spurious != base.spurious) + usize::from(after.missing != base.missing);
        if base.recalled.contains(&extra) {
            prop_assert_eq!(moved, 0);
        } else {
            prop_assert_eq!(moved, 1);
            if expected.contains(&extra) {
                prop_assert_eq!(after.missing + 1, base.missing);
            } else {
                prop_assert_eq!(after.spurious, base.spurious + 1);
            }
        }
    }

    #[test]
    fn resource_formulas_match_built_topologies(n in 2usize..40) {
        let osc = build_oscillatory(&OscillatoryConfig::with_n(n)).unwrap();
        prop_assert_eq!(tally(&osc), count_resources(ModelKind::Oscillatory, n));
        let reg = build_regulated(&RegulatedConfig::with_n(n)).unwrap();
        prop_assert_eq!(tally(&reg), count_resources(ModelKind::Regulated, n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn reports_are_reproducible(seed in 0..=i64::MAX as u64) {
        let spec = ExperimentSpec::parse(
            r#"
            name = "seeded"
            model = "oscillatory"
            [config]
            n = 20
            [generate]
            size = 4
            count = 3
            [[ops]]
            op = "recall"
            pattern = "P1"
            "#,
        )
        .unwrap();
        let a = run_experiment(&spec, Some(seed)).unwrap();
        let b = run_experiment(&spec, Some(seed)).unwrap();
        prop_assert_eq!(a.to_toml(), b.to_toml());
        prop_assert_eq!(&a.record.events, &b.record.events);
    }

    #[test]
    fn regulated_recall_is_silent_between_cues_and_repeatable(cue_pick in 0usize..3, drop in 0usize..4) {
        let n = 15;
        let patterns = generate_orthogonal_patterns(n, 4, 3, None).unwrap();
        let mut m = RegulatedMemory::new(RegulatedConfig::with_n(n)).unwrap();
        m.learn(&patterns).unwrap();
        let stored = &patterns[cue_pick];
        let cue: Vec<usize> = stored.indices().into_iter().enumerate().filter(|&(k, _)| k != drop).map(|(_, i)| i).collect();
        let cue = Pattern::new(cue, n).unwrap();
        let mut outcomes = Vec::new();
        for _ in 0..3 {
            outcomes.push(m.recall(&cue).unwrap().recalled);
            let from = m.now_ms();
            m.idle(20.0).unwrap();
            let record = m.recall_record().unwrap();
            let k0 = from as u64;
            let idle_spikes = record.events.iter().flatten().filter(|&&(_, k)| k >= k0 && k < k0 + 20).count();
            prop_assert_eq!(idle_spikes, 0);
        }
        let want: BTreeSet<usize> = stored.active().difference(cue.active()).copied().collect();
        prop_assert!(outcomes.iter().all(|o| *o == want), "{:?}", outcomes);
    }

    #[test]
    fn learning_only_links_neurons_within_a_pattern(size in 2usize..4, seed in any::<u64>()) {
        let n = 12;
        let patterns = generate_orthogonal_patterns(n, size, n / size, Some(seed)).unwrap();
        let mut m = OscillatoryMemory::new(OscillatoryConfig::with_n(n)).unwrap();
        let w = m.learn(&patterns).unwrap();
        let group = |i: usize| patterns.iter().position(|p| p.active().contains(&i));
        for e in &w.entries {
            if group(e.pre) != group(e.post) {
                prop_assert_eq!(e.weight, 0.0, "{:?}", e);
            } else {
                prop_assert!(e.weight > 0.0, "{:?}", e);
            }
        }
        prop_assert_eq!(m.weights().entries.len(), n * (n - 1));
    }
}
