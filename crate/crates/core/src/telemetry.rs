//! KPM aggregation and the normalised observation matrix.

use std::collections::VecDeque;
use std::io::Write;

use crate::error::Result;
use crate::ransim::{spectral_efficiency, link::MAX_CQI, FrameStats, SimConfig};
use crate::UeId;

/// Rows of [`NetworkState`].
pub const ROW_BTX: usize = 0;
pub const ROW_BFS: usize = 1;
pub const ROW_RSH: usize = 2;
pub const ROW_TDP: usize = 3;
pub const NUM_ROWS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct UeKpm {
    pub ue: UeId,
    pub slice: usize,
    pub btx: u64,
    pub tdp: u64,
    pub delivered: u64,
    pub arrivals: u64,
    pub bfs: f64,
    pub rsh: f64,
    pub prbs: u32,
    /// Delivered throughput, bit/s.
    pub thr_bps: f64,
    /// Offered load, bit/s.
    pub offered_bps: f64,
}

/// Slice or cell aggregate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateKpm {
    pub num_ues: usize,
    pub btx: u64,
    pub tdp: u64,
    pub delivered: u64,
    pub arrivals: u64,
    /// Mean over member UEs.
    pub bfs: f64,
    pub bfs_max: f64,
    pub rsh: f64,
    pub prbs: u32,
    pub thr_bps: f64,
    pub offered_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpmRecord {
    pub frame: u64,
    pub duration_s: f64,
    pub ues: Vec<UeKpm>,
    pub slices: Vec<AggregateKpm>,
    pub cell: AggregateKpm,
}

impl KpmRecord {
    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn slice_ues(&self, slice: usize) -> impl Iterator<Item = &UeKpm> {
        self.ues.iter().filter(move |u| u.slice == slice)
    }

    pub fn write_csv_header<W: Write>(wtr: &mut csv::Writer<W>) -> Result<()> {
        wtr.write_record([
            "frame", "ue", "slice", "btx", "tdp", "delivered", "bfs", "prbs", "rsh", "thr_bps",
        ])?;
        Ok(())
    }

    /// One row per UE, then one per slice (`ue = all`) and the cell
    /// (`ue = all`, `slice = cell`).
    pub fn write_csv<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<()> {
        let f = self.frame.to_string();
        for u in &self.ues {
            wtr.write_record([
                f.clone(),
                u.ue.to_string(),
                u.slice.to_string(),
                u.btx.to_string(),
                u.tdp.to_string(),
                u.delivered.to_string(),
                format!("{:.6}", u.bfs),
                u.prbs.to_string(),
                format!("{:.6}", u.rsh),
                format!("{:.1}", u.thr_bps),
            ])?;
        }
        let rows = self
            .slices
            .iter()
            .enumerate()
            .map(|(j, a)| (j.to_string(), a))
            .chain(std::iter::once(("cell".to_string(), &self.cell)));
        for (label, a) in rows {
            wtr.write_record([
                f.clone(),
                "all".to_string(),
                label,
                a.btx.to_string(),
                a.tdp.to_string(),
                a.delivered.to_string(),
                format!("{:.6}", a.bfs),
                a.prbs.to_string(),
                format!("{:.6}", a.rsh),
                format!("{:.1}", a.thr_bps),
            ])?;
        }
        Ok(())
    }
}

fn aggregate<'a>(ues: impl Iterator<Item = &'a UeKpm>) -> AggregateKpm {
    let mut a = AggregateKpm::default();
    for u in ues {
        a.num_ues += 1;
        a.btx += u.btx;
        a.tdp += u.tdp;
        a.delivered += u.delivered;
        a.arrivals += u.arrivals;
        a.bfs += u.bfs;
        a.bfs_max = a.bfs_max.max(u.bfs);
        a.rsh += u.rsh;
        a.prbs += u.prbs;
        a.thr_bps += u.thr_bps;
        a.offered_bps += u.offered_bps;
    }
    if a.num_ues > 0 {
        a.bfs /= a.num_ues as f64;
    }
    a
}

pub fn collect(stats: &FrameStats) -> KpmRecord {
    let to_bps = |bytes: u64| bytes as f64 * 8.0 / stats.duration_s;
    let ues: Vec<UeKpm> = stats
        .ues
        .iter()
        .map(|u| UeKpm {
            ue: u.ue,
            slice: u.slice,
            btx: u.btx,
            tdp: u.tdp,
            delivered: u.delivered,
            arrivals: u.arrivals,
            bfs: u.bfs(),
            rsh: if stats.available_weighted_prbs > 0.0 {
                u.weighted_prbs / stats.available_weighted_prbs
            } else {
                0.0
            },
            prbs: u.prbs,
            thr_bps: to_bps(u.delivered),
            offered_bps: to_bps(u.arrivals),
        })
        .collect();
    let slices = (0..stats.num_slices)
        .map(|j| aggregate(ues.iter().filter(|u| u.slice == j)))
        .collect();
    let cell = aggregate(ues.iter());
    KpmRecord {
        frame: stats.frame,
        duration_s: stats.duration_s,
        ues,
        slices,
        cell,
    }
}

/// Peak downlink rate of the cell (every PRB at the top CQI), bit/s.
pub fn max_cell_rate(config: &SimConfig) -> f64 {
    let eff = spectral_efficiency(MAX_CQI).expect("top CQI is in the table");
    eff * config.num_prbs as f64 * config.prb_bandwidth_hz * config.effective_dl_slots_per_frame()
        / config.slots_per_frame as f64
}

/// Bytes per frame at [`max_cell_rate`].
pub fn max_frame_bytes(config: &SimConfig) -> f64 {
    max_cell_rate(config) * config.frame_s() / 8.0
}

/// The 4 x (J+1) observation: rows btx, bfs, rsh, tdp; columns slices then
/// cell. Row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    cols: usize,
    data: Vec<f64>,
}

impl NetworkState {
    pub fn zeros(num_slices: usize) -> Self {
        NetworkState {
            cols: num_slices + 1,
            data: vec![0.0; NUM_ROWS * (num_slices + 1)],
        }
    }

    pub fn from_rows(num_slices: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != NUM_ROWS * (num_slices + 1) {
            return Err(crate::Error::Dimension {
                expected: NUM_ROWS * (num_slices + 1),
                actual: data.len(),
            });
        }
        Ok(NetworkState {
            cols: num_slices + 1,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        NUM_ROWS
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.cols + col] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Normalises a record; `max_frame_bytes` scales the btx and tdp rows.
pub fn build_state(record: &KpmRecord, max_frame_bytes: f64) -> NetworkState {
    let j = record.num_slices();
    let mut s = NetworkState::zeros(j);
    let norm = |b: u64| {
        if max_frame_bytes > 0.0 {
            (b as f64 / max_frame_bytes).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    let mut sums = [0.0; NUM_ROWS];
    for (c, a) in record.slices.iter().enumerate() {
        let v = [norm(a.btx), a.bfs.clamp(0.0, 1.0), a.rsh.clamp(0.0, 1.0), norm(a.tdp)];
        for (r, x) in v.into_iter().enumerate() {
            s.set(r, c, x);
            sums[r] += x;
        }
    }
    s.set(ROW_BTX, j, sums[ROW_BTX].min(1.0));
    s.set(ROW_BFS, j, record.cell.bfs.clamp(0.0, 1.0));
    s.set(ROW_RSH, j, sums[ROW_RSH].min(1.0));
    s.set(ROW_TDP, j, sums[ROW_TDP].min(1.0));
    s
}

/// Sliding mean of throughput and offered load over the last `len` records.
/// Everything else is taken from the newest record.
#[derive(Debug, Clone)]
pub struct KpmWindow {
    len: usize,
    history: VecDeque<KpmRecord>,
}

impl KpmWindow {
    pub fn new(len: usize) -> Self {
        KpmWindow {
            len: len.max(1),
            history: VecDeque::with_capacity(len.max(1)),
        }
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    pub fn push(&mut self, record: KpmRecord) -> KpmRecord {
        if self.history.len() == self.len {
            self.history.pop_front();
        }
        self.history.push_back(record);
        let n = self.history.len() as f64;
        let mut out = self.history.back().expect("just pushed").clone();
        for u in &mut out.ues {
            u.thr_bps = 0.0;
            u.offered_bps = 0.0;
        }
        for a in out.slices.iter_mut().chain(std::iter::once(&mut out.cell)) {
            a.thr_bps = 0.0;
            a.offered_bps = 0.0;
        }
        for r in &self.history {
            for (o, u) in out.ues.iter_mut().zip(&r.ues) {
                o.thr_bps += u.thr_bps / n;
                o.offered_bps += u.offered_bps / n;
            }
            for (o, a) in out.slices.iter_mut().zip(&r.slices) {
                o.thr_bps += a.thr_bps / n;
                o.offered_bps += a.offered_bps / n;
            }
            out.cell.thr_bps += r.cell.thr_bps / n;
            out.cell.offered_bps += r.cell.offered_bps / n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ransim::UeFrameStats;
    use proptest::prelude::*;

    fn ue(id: u32, slice: usize, btx: u64, weighted: f64) -> UeFrameStats {
        UeFrameStats {
            ue: UeId(id),
            slice,
            arrivals: 0,
            btx,
            tdp: 0,
            delivered: btx,
            buffer_start: 0,
            buffer_bytes: 0,
            buffer_capacity: 1000,
            prbs: weighted as u32,
            weighted_prbs: weighted,
            cqi: 10,
        }
    }

    fn frame(ues: Vec<UeFrameStats>, slices: usize) -> FrameStats {
        FrameStats {
            frame: 0,
            num_slices: slices,
            duration_s: 0.01,
            ues,
            slot_prbs: vec![],
            slice_prbs: vec![0; slices],
            available_weighted_prbs: 50.0,
        }
    }

    #[test]
    fn max_rates() {
        let c = SimConfig::default();
        let r = max_cell_rate(&c);
        assert!((r - 5.5547 * 50.0 * 180e3 * 36.0 / 70.0).abs() < 1e-6);
        assert!((r / 1e6 - 25.71).abs() < 0.01);
        let all_dl = SimConfig {
            tdd_pattern: "D".into(),
            ..c
        };
        assert!((max_cell_rate(&all_dl) / 1e6 - 49.99).abs() < 0.01);
        let none = SimConfig {
            tdd_pattern: "U".into(),
            ..SimConfig::default()
        };
        assert_eq!(max_cell_rate(&none), 0.0);
    }

    #[test]
    fn sums_and_shares() {
        let rec = collect(&frame(vec![ue(0, 0, 100, 25.0), ue(1, 0, 200, 0.0)], 1));
        assert_eq!(rec.slices[0].btx, 300);
        assert_eq!(rec.ues[0].rsh, 0.5);
        assert!((rec.ues[0].thr_bps - 80_000.0).abs() < 1e-9);
        let s = build_state(&rec, 3000.0);
        assert_eq!((s.rows(), s.cols()), (4, 2));
        assert!((s.get(ROW_BTX, 0) - 0.1).abs() < 1e-12);
        assert_eq!(s.get(ROW_RSH, 1), 0.5);
    }

    #[test]
    fn idle_and_saturated_states() {
        let mut idle = ue(0, 0, 0, 0.0);
        idle.buffer_bytes = 250;
        let rec = collect(&frame(vec![idle, ue(1, 1, 0, 0.0), ue(2, 2, 0, 0.0)], 3));
        let s = build_state(&rec, 1000.0);
        assert_eq!((s.rows(), s.cols()), (4, 4));
        for c in 0..4 {
            assert_eq!(s.get(ROW_BTX, c), 0.0);
            assert_eq!(s.get(ROW_RSH, c), 0.0);
            assert_eq!(s.get(ROW_TDP, c), 0.0);
        }
        assert_eq!(s.get(ROW_BFS, 0), 0.25);

        let rec = collect(&frame(vec![ue(0, 0, 1000, 50.0), ue(1, 1, 0, 0.0)], 2));
        let s = build_state(&rec, 1000.0);
        assert_eq!(s.get(ROW_BTX, 0), 1.0);
        assert_eq!(s.get(ROW_BTX, 2), 1.0);
    }

    #[test]
    fn window_smooths_throughput_only() {
        let mut w = KpmWindow::new(2);
        let a = collect(&frame(vec![ue(0, 0, 100, 1.0)], 1));
        let b = collect(&frame(vec![ue(0, 0, 300, 2.0)], 1));
        w.push(a.clone());
        let out = w.push(b);
        assert!((out.ues[0].thr_bps - 160_000.0).abs() < 1e-6);
        assert!((out.slices[0].thr_bps - 160_000.0).abs() < 1e-6);
        assert_eq!(out.ues[0].btx, 300);
        let out = w.push(a);
        assert!((out.cell.thr_bps - 160_000.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn state_entries_are_fractions(
            raw in prop::collection::vec((0usize..3, 0u64..10_000_000, 0u64..10_000_000, 0u64..=1000, 0.0f64..50.0), 1..12),
            max_bytes in 0.0f64..1e6,
        ) {
            let ues = raw.iter().enumerate().map(|(i, &(slice, btx, tdp, buf, w))| UeFrameStats {
                ue: UeId(i as u32), slice, arrivals: 0, btx, tdp, delivered: 0, buffer_start: 0,
                buffer_bytes: buf, buffer_capacity: 1000, prbs: 0, weighted_prbs: w, cqi: 1,
            }).collect();
            let s = build_state(&collect(&frame(ues, 3)), max_bytes);
            for r in 0..4 {
                for c in 0..4 {
                    let v = s.get(r, c);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                let sum: f64 = (0..3).map(|c| s.get(r, c)).sum();
                if r != ROW_BFS {
                    prop_assert_eq!(s.get(r, 3), sum.min(1.0));
                }
            }
        }
    }
}
