use std::fmt::Write;

use serde::Serialize;

use crate::engine::SpikeRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotMark {
    pub label: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterPanel {
    pub population: String,
    pub size: usize,
    /// `(neuron, time_ms)` in emission order.
    pub spikes: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RasterData {
    pub duration_ms: f64,
    pub panels: Vec<RasterPanel>,
    pub slots: Vec<SlotMark>,
}

const WIDTH: f64 = 900.0;
const PANEL_H: f64 = 180.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 24.0;
const GAP: f64 = 36.0;

impl RasterData {
    pub fn from_record(record: &SpikeRecord, slots: Vec<SlotMark>, duration_ms: f64) -> Self {
        let panels = record
            .names
            .iter()
            .zip(&record.sizes)
            .zip(&record.events)
            .map(|((name, &size), ev)| RasterPanel {
                population: name.clone(),
                size,
                spikes: ev.iter().map(|&(i, k)| (i, record.time_ms(k))).collect(),
            })
            .collect();
        Self { duration_ms, panels, slots }
    }

    pub fn panel(&self, population: &str) -> Option<&RasterPanel> {
        self.panels.iter().find(|p| p.population == population)
    }

    /// Stacked panels for the named populations sharing one time axis, with
    /// operation slots shaded behind the spikes.
    pub fn to_svg(&self, populations: &[&str]) -> String {
        let shown: Vec<&RasterPanel> = populations.iter().filter_map(|p| self.panel(p)).collect();
        let height = MARGIN_T + shown.len() as f64 * (PANEL_H + GAP) + 10.0;
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let span = self.duration_ms.max(1.0);
        let x = |t: f64| MARGIN_L + t / span * plot_w;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="10">"#,
            w = WIDTH,
            h = height
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (pi, panel) in shown.iter().enumerate() {
            let top = MARGIN_T + pi as f64 * (PANEL_H + GAP);
            let rows = panel.size.max(1) as f64;
            let row_h = PANEL_H / rows;
            let _ = writeln!(s, r#"<g class="panel" data-population="{}">"#, panel.population);
            for (k, slot) in self.slots.iter().enumerate() {
                let fill = if k % 2 == 0 { "#eef3fb" } else { "#f7f7f7" };
                let _ = writeln!(
                    s,
                    r#"<rect class="slot" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"><title>{}</title></rect>"#,
                    x(slot.start_ms),
                    top,
                    (x(slot.end_ms) - x(slot.start_ms)).max(0.0),
                    PANEL_H,
                    fill,
                    slot.label
                );
                if pi == 0 {
                    let _ = writeln!(
                        s,
                        r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                        x(slot.start_ms) + 2.0,
                        top - 4.0,
                        slot.label
                    );
                }
            }
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{:.2}" width="{:.2}" height="{}" fill="none" stroke="black"/>"#,
                MARGIN_L, top, plot_w, PANEL_H
            );
            let _ = writeln!(
                s,
                r#"<text x="4" y="{:.2}" font-weight="bold">{}</text>"#,
                top + PANEL_H / 2.0,
                panel.population
            );
            let tick_w = (plot_w / span).clamp(1.0, 4.0);
            for &(i, t) in &panel.spikes {
                let y = top + PANEL_H - (i as f64 + 1.0) * row_h;
                let _ = writeln!(
                    s,
                    r#"<rect class="spike" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="black"/>"#,
                    x(t) - tick_w / 2.0,
                    y + row_h * 0.15,
                    tick_w,
                    row_h * 0.7
                );
            }
            let axis_y = top + PANEL_H + 12.0;
            let step = if span > 200.0 { 50.0 } else { 10.0 };
            let mut t = 0.0;
            while t <= span {
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, x(t), axis_y, t);
                t += step;
            }
            let _ = writeln!(s, "</g>");
        }
        s.push_str("</svg>\n");
        s
    }
}
