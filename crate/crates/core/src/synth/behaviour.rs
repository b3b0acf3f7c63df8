use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{OccupantParams, WorldConfig};
use super::weather::Instant;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoomKind {
    Bedroom,
    Living,
    Bathroom,
}

impl RoomKind {
    /// Two bedrooms around a living room, then two bathrooms, repeating.
    pub fn for_index(i: usize) -> RoomKind {
        match i % 5 {
            0 | 2 => RoomKind::Bedroom,
            1 => RoomKind::Living,
            _ => RoomKind::Bathroom,
        }
    }

    pub fn has_window(self) -> bool {
        self != RoomKind::Bathroom
    }

    fn setpoint_offset(self) -> f64 {
        match self {
            RoomKind::Bedroom => -0.5,
            RoomKind::Living => 0.5,
            RoomKind::Bathroom => 1.5,
        }
    }
}

/// Schedules of one room, one value per row.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RoomSchedule {
    pub occupancy: Vec<f64>,
    pub window: Vec<f64>,
    pub blinds: Vec<f64>,
    pub setpoint: Vec<f64>,
}

fn presence(kind: RoomKind, c: &Instant, p: &OccupantParams) -> f64 {
    let h = c.hour;
    let night = !(7.0..22.0).contains(&h);
    let day = if c.weekend { p.weekend_day_presence } else { p.weekday_day_presence };
    match kind {
        RoomKind::Bedroom => {
            if night {
                p.night_presence
            } else if h < 8.0 {
                0.5
            } else if h >= 18.0 {
                0.3
            } else {
                0.5 * day
            }
        }
        RoomKind::Living => {
            if night {
                0.02
            } else if h < 9.0 {
                0.6
            } else if h >= 17.0 {
                p.evening_presence
            } else {
                day
            }
        }
        RoomKind::Bathroom => {
            if (6.0..8.0).contains(&h) {
                0.5
            } else if (20.0..22.0).contains(&h) {
                0.35
            } else if night {
                0.02
            } else {
                0.08
            }
        }
    }
}

fn is_new_hour(c: &Instant, row: usize) -> bool {
    row == 0 || c.hour.fract() == 0.0
}

fn is_new_day(c: &Instant, row: usize) -> bool {
    row == 0 || c.hour == 0.0
}

/// Hour-by-hour Bernoulli presence.
fn occupancy(kind: RoomKind, cal: &[Instant], p: &OccupantParams, seed: u64, key: &str) -> Vec<f64> {
    let mut rng = stream_rng(seed, key);
    let mut state = 0.0;
    cal.iter()
        .enumerate()
        .map(|(row, c)| {
            if is_new_hour(c, row) {
                state = f64::from(u8::from(rng.gen::<f64>() < presence(kind, c, p)));
            }
            state
        })
        .collect()
}

/// Hour-aligned intervals, in rows, during which a window stays open.
fn spring_episodes(cal: &[Instant], p: &OccupantParams, step_minutes: u32, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let rows_per_hour = (60 / step_minutes) as usize;
    let (lo, hi) = p.window_episode_hours;
    let mut out = Vec::new();
    // Rows where a calendar year begins at midnight on January 1st.
    let year_starts = (0..cal.len()).filter(|&r| cal[r].doy == 0 && cal[r].hour == 0.0 && (r == 0 || cal[r - 1].doy != 0));
    for y0 in year_starts {
        let leap = cal.get(y0 + 59 * 24 * rows_per_hour).is_some_and(|c| c.month == 2);
        let march = 59 + usize::from(leap);
        let draw = |first_day: usize, last_day: usize, rng: &mut dyn rand::RngCore| {
            let start_hour = rng.gen_range(first_day * 24..last_day * 24);
            let hours = rng.gen_range(lo..=hi).round() as usize;
            let start = y0 + start_hour * rows_per_hour;
            (start, start + hours * rows_per_hour)
        };
        // The first opening starts before March 21st so it lies inside March.
        out.push(draw(march, march + 20, rng));
        let extra = (p.window_episode_rate - 1.0).max(0.0);
        let mut count = extra.floor() as usize;
        if rng.gen::<f64>() < extra.fract() {
            count += 1;
        }
        for _ in 0..count {
            out.push(draw(march + 21, march + 87, rng));
        }
    }
    out.into_iter()
        .filter_map(|(a, b)| (a < cal.len()).then_some((a, b.min(cal.len()))))
        .collect()
}

fn window(kind: RoomKind, cal: &[Instant], p: &OccupantParams, step_minutes: u32, seed: u64, key: &str) -> Vec<f64> {
    let mut values = vec![0.0; cal.len()];
    if !kind.has_window() {
        return values;
    }
    let mut rng = stream_rng(seed, key);
    for (a, b) in spring_episodes(cal, p, step_minutes, &mut rng) {
        values[a..b].iter_mut().for_each(|v| *v = 1.0);
    }
    // Daily airing in the morning; longer in summer.
    let mut open_from = 0.0;
    let mut open_to = 0.0;
    for (row, c) in cal.iter().enumerate() {
        if is_new_day(c, row) {
            let summer = (6..=8).contains(&c.month);
            let chance = if summer { 0.8 } else if c.month <= 2 || c.month == 12 { 0.3 } else { 0.5 };
            if rng.gen::<f64>() < chance {
                open_from = f64::from(rng.gen_range(7u32..10));
                let minutes = if summer { rng.gen_range(30.0..180.0) } else { rng.gen_range(10.0..40.0) };
                open_to = open_from + minutes / 60.0;
            } else {
                open_from = 0.0;
                open_to = 0.0;
            }
        }
        if c.hour >= open_from && c.hour < open_to {
            values[row] = 1.0;
        }
    }
    values
}

fn blinds(kind: RoomKind, cal: &[Instant], seed: u64, key: &str) -> Vec<f64> {
    let mut values = vec![0.0; cal.len()];
    if !kind.has_window() {
        return values;
    }
    let mut rng = stream_rng(seed, key);
    let (mut night, mut shade) = (false, false);
    for (row, c) in cal.iter().enumerate() {
        if is_new_day(c, row) {
            let summer = (5..=8).contains(&c.month);
            night = kind == RoomKind::Bedroom && rng.gen::<f64>() < 0.9;
            shade = rng.gen::<f64>() < if summer { 0.7 } else { 0.1 };
        }
        let h = c.hour;
        let down = (night && !(7.0..21.0).contains(&h)) || (shade && (11.0..17.0).contains(&h));
        values[row] = f64::from(u8::from(down));
    }
    values
}

fn setpoint(kind: RoomKind, cal: &[Instant], p: &OccupantParams, seed: u64, key: &str) -> Vec<f64> {
    let mut rng = stream_rng(seed, key);
    let mut adjust = 0.0;
    cal.iter()
        .enumerate()
        .map(|(row, c)| {
            if row == 0 || c.week_start {
                adjust = f64::from(rng.gen_range(-1i32..=1)) * 0.5;
            }
            let base = if (7.0..22.0).contains(&c.hour) { p.setpoint_day } else { p.setpoint_night };
            base + kind.setpoint_offset() + adjust
        })
        .collect()
}

pub(crate) fn room_schedules(config: &WorldConfig, cal: &[Instant]) -> Vec<RoomSchedule> {
    let p = &config.occupants;
    config
        .room_names()
        .iter()
        .enumerate()
        .map(|(i, room)| {
            let kind = RoomKind::for_index(i);
            let key = |what: &str| format!("{room}/{what}");
            RoomSchedule {
                occupancy: occupancy(kind, cal, p, config.seed, &key("occupancy")),
                window: window(kind, cal, p, config.step_minutes, config.seed, &key("window")),
                blinds: blinds(kind, cal, config.seed, &key("blinds")),
                setpoint: setpoint(kind, cal, p, config.seed, &key("setpoint")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::weather::calendar;

    fn schedules(cfg: &WorldConfig) -> (Vec<Instant>, Vec<RoomSchedule>) {
        let cal = calendar(&cfg.timestamps());
        let s = room_schedules(cfg, &cal);
        (cal, s)
    }

    #[test]
    fn march_has_a_long_opening() {
        let cfg = WorldConfig { days: Some(120), step_minutes: 10, ..Default::default() };
        let (cal, s) = schedules(&cfg);
        for (i, room) in s.iter().enumerate() {
            if !RoomKind::for_index(i).has_window() {
                assert!(room.window.iter().all(|&v| v == 0.0));
                continue;
            }
            // Longest run of open rows that lies entirely in March.
            let (mut best, mut run) = (0usize, 0usize);
            for (v, c) in room.window.iter().zip(&cal) {
                run = if *v == 1.0 && c.month == 3 { run + 1 } else { 0 };
                best = best.max(run);
            }
            assert!(best * 10 >= 48 * 60, "room {i}: longest March opening {} h", best / 6);
        }
    }

    #[test]
    fn binary_domains_and_piecewise_setpoints() {
        let cfg = WorldConfig { days: Some(30), step_minutes: 5, ..Default::default() };
        let (_, s) = schedules(&cfg);
        for room in &s {
            for col in [&room.occupancy, &room.window, &room.blinds] {
                assert!(col.iter().all(|&v| v == 0.0 || v == 1.0));
            }
            let changes = room.setpoint.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(changes <= 2 * 30 + 5);
        }
    }

    #[test]
    fn seeded() {
        let cfg = WorldConfig { days: Some(20), step_minutes: 15, ..Default::default() };
        assert_eq!(schedules(&cfg).1, schedules(&cfg).1);
        assert_ne!(schedules(&cfg).1, schedules(&WorldConfig { seed: 1, ..cfg }).1);
    }
}
