use std::f64::consts::PI;

/// The three periodic bases signals are spliced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisId {
    A,
    B,
    C,
}

/// Value of a basis at time `t` seconds; always in `[-1, 1]`.
///
/// * A: `sin(0.4 t pi - pi/2)`
/// * B: `sin(0.5 t pi - pi/2)`
/// * C: `sin(sin(t pi / 30 - pi/2) 30 pi - pi/2)`, a slow frequency sweep
pub fn eval_basis(id: BasisId, t: f64) -> f64 {
    match id {
        BasisId::A => (0.4 * t * PI - PI / 2.0).sin(),
        BasisId::B => (0.5 * t * PI - PI / 2.0).sin(),
        BasisId::C => ((t * PI / 30.0 - PI / 2.0).sin() * 30.0 * PI - PI / 2.0).sin(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// On-screen contraction target.
    Screen,
    /// Pedal rotation command.
    Pedal,
}

impl Role {
    /// (segment length, period of the C insertion) in seconds.
    fn timing(self) -> (f64, f64) {
        match self {
            Role::Screen => (10.0, 30.0),
            Role::Pedal => (20.0, 60.0),
        }
    }
}

/// Half-open interval `[start, end)` driven by one basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub basis: BasisId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    role: Role,
    duration: f64,
    segment_len: f64,
    segments: Vec<Segment>,
}

impl Schedule {
    pub fn role(&self) -> Role {
        self.role
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Segment containing `t`, or `None` outside `[0, duration)`.
    pub fn segment_at(&self, t: f64) -> Option<&Segment> {
        if !(0.0..self.duration).contains(&t) {
            return None;
        }
        let i = ((t / self.segment_len).floor() as usize).min(self.segments.len() - 1);
        // floor can land one off at exact boundaries after rounding
        let i = if t < self.segments[i].start { i - 1 } else { i };
        let i = if t >= self.segments[i].end { i + 1 } else { i };
        self.segments.get(i)
    }

    pub fn basis_at(&self, t: f64) -> Option<BasisId> {
        self.segment_at(t).map(|s| s.basis)
    }

    /// Drive value at `t`; bases run on the global trial clock. Zero outside
    /// the schedule.
    pub fn value_at(&self, t: f64) -> f64 {
        self.basis_at(t).map_or(0.0, |b| eval_basis(b, t))
    }

    /// Samples `[0, duration)` at `rate_hz`.
    pub fn sample(&self, rate_hz: f64) -> Vec<f64> {
        let n = (self.duration * rate_hz).round() as usize;
        (0..n).map(|i| self.value_at(i as f64 / rate_hz)).collect()
    }
}

/// Builds the screen or pedal schedule for a trial of `duration` seconds.
///
/// Segments alternate A, B, A, ... by segment index; a segment starting at
/// an odd multiple of the C period (30 s screen, 60 s pedal) uses C instead
/// of whichever of A/B its index would give.
pub fn compose_schedule(role: Role, duration: f64) -> Schedule {
    assert!(duration > 0.0, "schedule duration must be positive");
    let (seg, c_period) = role.timing();
    let count = (duration / seg).ceil() as usize;
    let segments = (0..count)
        .map(|i| {
            let start = i as f64 * seg;
            let end = ((i + 1) as f64 * seg).min(duration);
            let periods = start / c_period;
            let is_c = start > 0.0 && periods.fract() == 0.0 && (periods as u64) % 2 == 1;
            let basis = if is_c {
                BasisId::C
            } else if i % 2 == 0 {
                BasisId::A
            } else {
                BasisId::B
            };
            Segment { start, end, basis }
        })
        .collect();
    Schedule {
        role,
        duration,
        segment_len: seg,
        segments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{correlation, CorrelationKind};

    #[test]
    fn basis_values() {
        assert_eq!(eval_basis(BasisId::A, 0.0), -1.0);
        assert!((eval_basis(BasisId::B, 2.0) - 1.0).abs() < 1e-12);
        assert!((eval_basis(BasisId::C, 0.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bases_bounded_on_dense_grid() {
        for i in 0..200_000 {
            let t = i as f64 * 0.001;
            for b in [BasisId::A, BasisId::B, BasisId::C] {
                let v = eval_basis(b, t);
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn screen_and_pedal_layouts() {
        use BasisId::*;
        let s = compose_schedule(Role::Screen, 180.0);
        let got: Vec<BasisId> = s.segments().iter().map(|x| x.basis).collect();
        assert_eq!(got, vec![A, B, A, C, A, B, A, B, A, C, A, B, A, B, A, C, A, B]);
        let p = compose_schedule(Role::Pedal, 180.0);
        let got: Vec<BasisId> = p.segments().iter().map(|x| x.basis).collect();
        assert_eq!(got, vec![A, B, A, C, A, B, A, B, A]);
        assert_eq!(s.basis_at(5.0), Some(A));
        assert!((s.value_at(5.0) + 1.0).abs() < 1e-12);
        assert_eq!(p.basis_at(10.0), Some(A));
        assert_eq!(p.basis_at(65.0), Some(C));
    }

    #[test]
    fn segments_tile_duration() {
        for dur in [7.5, 60.0, 95.0, 180.0] {
            for role in [Role::Screen, Role::Pedal] {
                let s = compose_schedule(role, dur);
                let segs = s.segments();
                assert_eq!(segs[0].start, 0.0);
                assert_eq!(segs.last().unwrap().end, dur);
                for w in segs.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                for i in 0..(dur * 100.0) as usize {
                    let t = i as f64 / 100.0;
                    let n = segs.iter().filter(|g| g.start <= t && t < g.end).count();
                    assert_eq!(n, 1, "t={t}");
                    let seg = s.segment_at(t).unwrap();
                    assert!(seg.start <= t && t < seg.end);
                }
                assert!(s.segment_at(dur).is_none());
            }
        }
    }

    #[test]
    fn trial_correlation_is_deterministic() {
        let x = compose_schedule(Role::Screen, 180.0).sample(1000.0);
        let y = compose_schedule(Role::Pedal, 180.0).sample(1000.0);
        let r1 = correlation(&x, &y, CorrelationKind::Pearson).unwrap();
        let r2 = correlation(&x, &y, CorrelationKind::Pearson).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
        assert!((r1 - 0.33).abs() < 0.05, "pearson {r1}");
    }
}
