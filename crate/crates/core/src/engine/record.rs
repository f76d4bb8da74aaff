use std::io::Write;

/// Spikes per population, in emission order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeRecord {
    pub dt: f64,
    pub names: Vec<String>,
    pub sizes: Vec<usize>,
    /// `events[pop]` holds `(neuron, step)` with nondecreasing steps.
    pub events: Vec<Vec<(usize, u64)>>,
}

impl SpikeRecord {
    pub fn new(dt: f64, names: Vec<String>, sizes: Vec<usize>) -> Self {
        let events = vec![Vec::new(); names.len()];
        Self { dt, names, sizes, events }
    }

    pub fn pop_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn spikes(&self, name: &str) -> &[(usize, u64)] {
        self.pop_index(name).map(|i| self.events[i].as_slice()).unwrap_or(&[])
    }

    pub fn time_ms(&self, step: u64) -> f64 {
        step as f64 * self.dt
    }

    /// Neuron indices of `name` that spiked in steps `[from, to)`.
    pub fn active_between(&self, name: &str, from: u64, to: u64) -> std::collections::BTreeSet<usize> {
        self.spikes(name).iter().filter(|(_, k)| *k >= from && *k < to).map(|(i, _)| *i).collect()
    }

    pub fn count(&self, name: &str) -> usize {
        self.spikes(name).len()
    }

    pub fn total(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// Spike times (ms) of one neuron.
    pub fn train(&self, name: &str, neuron: usize) -> Vec<f64> {
        self.spikes(name).iter().filter(|(i, _)| *i == neuron).map(|(_, k)| self.time_ms(*k)).collect()
    }

    /// Append another record whose steps are already absolute.
    pub fn extend(&mut self, other: &SpikeRecord) {
        for (i, name) in other.names.iter().enumerate() {
            let j = match self.pop_index(name) {
                Some(j) => j,
                None => {
                    self.names.push(name.clone());
                    self.sizes.push(other.sizes[i]);
                    self.events.push(Vec::new());
                    self.names.len() - 1
                }
            };
            self.events[j].extend_from_slice(&other.events[i]);
            self.events[j].sort_by_key(|&(n, k)| (k, n));
        }
    }

    /// Rows `(population, neuron, time_ms)` sorted by time, then population name, then neuron.
    pub fn rows(&self) -> Vec<(&str, usize, u64)> {
        let mut rows: Vec<(&str, usize, u64)> = self
            .events
            .iter()
            .enumerate()
            .flat_map(|(p, ev)| ev.iter().map(move |&(n, k)| (self.names[p].as_str(), n, k)))
            .collect();
        rows.sort_by(|a, b| a.2.cmp(&b.2).then(a.0.cmp(b.0)).then(a.1.cmp(&b.1)));
        rows
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "population,neuron,time_ms")?;
        for (pop, n, k) in self.rows() {
            writeln!(w, "{},{},{}", pop, n, fmt_ms(self.time_ms(k)))?;
        }
        Ok(())
    }
}

pub fn fmt_ms(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{}", t as i64)
    } else {
        format!("{}", t)
    }
}
