//! Gantt chart data and rendering.
//!
//! Every stage record turns into one processing segment on its machine's
//! lane, plus a setup segment and a blocking segment on the same lane when
//! those have positive length, plus a buffer segment on a buffer lane of
//! the stage while the job waits in the buffer. Buffer lanes stand for
//! slots and are assigned first-fit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decoder::Schedule;
use crate::model::{JobId, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Processing,
    Setup,
    Blocking,
    Buffer,
}

impl SegmentKind {
    pub fn color(self) -> &'static str {
        match self {
            SegmentKind::Processing => "#c8d3e0",
            SegmentKind::Setup => "#d62728",
            SegmentKind::Blocking => "#1f5fbf",
            SegmentKind::Buffer => "#2e9e44",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LaneKind {
    Machine { machine: usize },
    Buffer { slot: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lane {
    /// 0-based stage index.
    pub stage: usize,
    #[serde(flatten)]
    pub kind: LaneKind,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// Index into [`Gantt::lanes`].
    pub lane: usize,
    pub job: JobId,
    pub kind: SegmentKind,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gantt {
    pub makespan: Time,
    pub lanes: Vec<Lane>,
    pub segments: Vec<Segment>,
}

impl Gantt {
    /// Lanes cover the machines the schedule uses and as many buffer slots
    /// as each stage needed.
    pub fn from_schedule(sched: &Schedule) -> Gantt {
        let m = sched.stage_count;
        let mut lanes = Vec::new();
        let mut segments = Vec::new();

        for stage in 0..m {
            let records: Vec<_> = sched.records.iter().filter(|r| r.stage == stage).collect();

            // Buffer residences, first-fit onto slots by entry time.
            let mut stays: Vec<(Time, Time, JobId)> = records
                .iter()
                .filter_map(|r| match (r.buffer_entry, r.buffer_leave) {
                    (Some(e), Some(l)) if l > e => Some((e, l, r.job)),
                    _ => None,
                })
                .collect();
            stays.sort_unstable();
            let mut slot_free_at: Vec<Time> = Vec::new();
            let mut slotted = Vec::with_capacity(stays.len());
            for (entry, leave, job) in stays {
                let slot = match slot_free_at.iter().position(|&f| f <= entry) {
                    Some(k) => k,
                    None => {
                        slot_free_at.push(entry);
                        slot_free_at.len() - 1
                    }
                };
                slot_free_at[slot] = leave;
                slotted.push((slot, entry, leave, job));
            }
            let buffer_base = lanes.len();
            for slot in 0..slot_free_at.len() {
                lanes.push(Lane {
                    stage,
                    kind: LaneKind::Buffer { slot },
                    label: format!("B{}-{}", stage + 1, slot + 1),
                });
            }
            segments.extend(slotted.into_iter().map(|(slot, start, end, job)| Segment {
                lane: buffer_base + slot,
                job,
                kind: SegmentKind::Buffer,
                start,
                end,
            }));

            let machines = records.iter().map(|r| r.machine + 1).max().unwrap_or(0);
            let machine_base = lanes.len();
            for machine in 0..machines {
                lanes.push(Lane {
                    stage,
                    kind: LaneKind::Machine { machine },
                    label: format!("M{}-{}", stage + 1, machine + 1),
                });
            }
            for r in records {
                let lane = machine_base + r.machine;
                let mut push = |kind, start, end| {
                    segments.push(Segment {
                        lane,
                        job: r.job,
                        kind,
                        start,
                        end,
                    })
                };
                if r.setup > 0 {
                    push(SegmentKind::Setup, r.start - r.setup, r.start);
                }
                push(SegmentKind::Processing, r.start, r.completion);
                if r.machine_departure > r.completion {
                    push(SegmentKind::Blocking, r.completion, r.machine_departure);
                }
            }
        }
        Gantt {
            makespan: sched.makespan(),
            lanes,
            segments,
        }
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart serializes") + "\n"
    }

    pub fn to_svg(&self) -> String {
        const LANE_H: f64 = 24.0;
        const LEFT: f64 = 64.0;
        const TOP: f64 = 12.0;
        const WIDTH: f64 = 960.0;
        let span = self.makespan.max(1) as f64;
        let x = |t: Time| LEFT + t as f64 / span * WIDTH;
        let height = TOP * 2.0 + LANE_H * self.lanes.len() as f64 + 24.0;
        let axis_y = TOP + LANE_H * self.lanes.len() as f64;

        let mut svg = String::new();
        writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="11">"#,
            LEFT + WIDTH + 16.0
        )
        .unwrap();
        for (i, lane) in self.lanes.iter().enumerate() {
            let y = TOP + LANE_H * i as f64;
            writeln!(
                svg,
                r#"<text x="4" y="{:.1}">{}</text>"#,
                y + LANE_H * 0.65,
                lane.label
            )
            .unwrap();
            writeln!(
                svg,
                r##"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#eeeeee"/>"##,
                y + LANE_H,
                LEFT + WIDTH,
                y + LANE_H
            )
            .unwrap();
        }
        for s in &self.segments {
            let y = TOP + LANE_H * s.lane as f64 + 2.0;
            writeln!(
                svg,
                r##"<rect class="{}" x="{:.2}" y="{y:.1}" width="{:.2}" height="{:.1}" fill="{}" stroke="#ffffff" stroke-width="0.5"><title>{} {:?} {}-{}</title></rect>"##,
                serde_json::to_value(s.kind).unwrap().as_str().unwrap(),
                x(s.start),
                x(s.end) - x(s.start),
                LANE_H - 4.0,
                s.kind.color(),
                s.job,
                s.kind,
                s.start,
                s.end
            )
            .unwrap();
            if s.kind == SegmentKind::Processing && x(s.end) - x(s.start) >= 18.0 {
                writeln!(
                    svg,
                    r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
                    (x(s.start) + x(s.end)) / 2.0,
                    y + LANE_H * 0.55,
                    s.job
                )
                .unwrap();
            }
        }
        let ticks = 10;
        for k in 0..=ticks {
            let t = self.makespan * k / ticks;
            writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{t}</text>"#,
                x(t),
                axis_y + 16.0
            )
            .unwrap();
        }
        svg.push_str("</svg>\n");
        svg
    }
}
