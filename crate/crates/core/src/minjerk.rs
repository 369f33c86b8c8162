//! Quintic minimum-jerk segments and piecewise trajectories built from them.
//!
//! Every segment is fitted to position and velocity at both ends with zero
//! acceleration at both ends. Coefficients are stored over normalized time
//! `tau = t / duration`, which keeps them well scaled for short segments.

use serde::{Deserialize, Serialize};

use crate::error::TrajectoryError;
use crate::kinematics::{Joint, JointAngles, JointState};

/// Maximum position / velocity jump accepted at a junction.
pub const JUNCTION_TOLERANCE: f64 = 1e-9;
/// Two durations closer than this are treated as equal.
pub const DURATION_TOLERANCE: f64 = 1e-9;

/// Number of whole periods needed to cover `duration`, forgiving the
/// floating-point noise in ratios such as `1.4 / 0.002`.
pub fn period_count(duration: f64, dt: f64) -> usize {
    let ratio = duration / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() < 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Position, velocity and acceleration at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuinticSegment {
    /// Coefficients of position over normalized time, lowest order first.
    pub coefficients: [f64; 6],
    pub duration: f64,
}

impl QuinticSegment {
    pub fn fit(p0: f64, v0: f64, p1: f64, v1: f64, duration: f64) -> Result<Self, TrajectoryError> {
        if !duration.is_finite() {
            return Err(TrajectoryError::NonFinite);
        }
        if duration <= 0.0 {
            return Err(TrajectoryError::NonpositiveDuration(duration));
        }
        if ![p0, v0, p1, v1].iter().all(|v| v.is_finite()) {
            return Err(TrajectoryError::NonFinite);
        }
        let delta = p1 - p0;
        let (w0, w1) = (v0 * duration, v1 * duration);
        Ok(Self {
            coefficients: [
                p0,
                w0,
                0.0,
                10.0 * delta - 6.0 * w0 - 4.0 * w1,
                -15.0 * delta + 8.0 * w0 + 7.0 * w1,
                6.0 * delta - 3.0 * (w0 + w1),
            ],
            duration,
        })
    }

    /// Rest-to-rest move.
    pub fn rest_to_rest(p0: f64, p1: f64, duration: f64) -> Result<Self, TrajectoryError> {
        Self::fit(p0, 0.0, p1, 0.0, duration)
    }

    pub fn hold(p: f64, duration: f64) -> Result<Self, TrajectoryError> {
        Self::fit(p, 0.0, p, 0.0, duration)
    }

    pub fn evaluate(&self, t: f64) -> Result<Sample, TrajectoryError> {
        if !(t >= 0.0 && t <= self.duration) {
            return Err(TrajectoryError::OutOfDomain {
                t,
                duration: self.duration,
            });
        }
        Ok(self.evaluate_unchecked(t))
    }

    fn evaluate_unchecked(&self, t: f64) -> Sample {
        let c = &self.coefficients;
        let tau = t / self.duration;
        let p = c[0] + tau * (c[1] + tau * (c[2] + tau * (c[3] + tau * (c[4] + tau * c[5]))));
        let dp = c[1] + tau * (2.0 * c[2] + tau * (3.0 * c[3] + tau * (4.0 * c[4] + tau * 5.0 * c[5])));
        let ddp = 2.0 * c[2] + tau * (6.0 * c[3] + tau * (12.0 * c[4] + tau * 20.0 * c[5]));
        Sample {
            position: p,
            velocity: dp / self.duration,
            acceleration: ddp / (self.duration * self.duration),
        }
    }

    pub fn start(&self) -> Sample {
        self.evaluate_unchecked(0.0)
    }

    pub fn end(&self) -> Sample {
        self.evaluate_unchecked(self.duration)
    }

    /// Segment traversed backwards: `r(t) = f(duration - t)`.
    pub fn time_reversed(&self) -> Self {
        // substitute tau -> 1 - tau and expand binomially
        let c = &self.coefficients;
        let mut out = [0.0; 6];
        for (n, &cn) in c.iter().enumerate() {
            let mut binom = 1.0;
            for k in 0..=n {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                out[k] += cn * binom * sign;
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
        }
        Self {
            coefficients: out,
            duration: self.duration,
        }
    }
}

/// Piecewise quintic trajectory of one scalar coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    segments: Vec<QuinticSegment>,
    /// Start time of each segment, plus the total duration as the last entry.
    knots: Vec<f64>,
}

impl Trajectory {
    /// Chain segments end to end, checking position and velocity continuity.
    pub fn chain(segments: Vec<QuinticSegment>) -> Result<Self, TrajectoryError> {
        if segments.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (index, pair) in segments.windows(2).enumerate() {
            let (a, b) = (pair[0].end(), pair[1].start());
            let position_jump = (a.position - b.position).abs();
            let velocity_jump = (a.velocity - b.velocity).abs();
            if position_jump > JUNCTION_TOLERANCE || velocity_jump > JUNCTION_TOLERANCE {
                return Err(TrajectoryError::DiscontinuousJunction {
                    index,
                    position_jump,
                    velocity_jump,
                });
            }
        }
        let mut knots = Vec::with_capacity(segments.len() + 1);
        let mut t = 0.0;
        knots.push(t);
        for s in &segments {
            t += s.duration;
            knots.push(t);
        }
        Ok(Self { segments, knots })
    }

    pub fn single(segment: QuinticSegment) -> Self {
        Self {
            knots: vec![0.0, segment.duration],
            segments: vec![segment],
        }
    }

    pub fn hold(p: f64, duration: f64) -> Result<Self, TrajectoryError> {
        Ok(Self::single(QuinticSegment::hold(p, duration)?))
    }

    /// Fit one segment per consecutive pair of `(time, position, velocity)`
    /// knots. Times must be strictly increasing and start at zero.
    pub fn through(points: &[(f64, f64, f64)]) -> Result<Self, TrajectoryError> {
        if points.len() < 2 {
            return Err(TrajectoryError::Empty);
        }
        let segments = points
            .windows(2)
            .map(|w| QuinticSegment::fit(w[0].1, w[0].2, w[1].1, w[1].2, w[1].0 - w[0].0))
            .collect::<Result<Vec<_>, _>>()?;
        Self::chain(segments)
    }

    pub fn segments(&self) -> &[QuinticSegment] {
        &self.segments
    }

    /// Segment boundary times, starting with 0 and ending with the duration.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn duration(&self) -> f64 {
        *self.knots.last().expect("knots never empty")
    }

    pub fn evaluate(&self, t: f64) -> Result<Sample, TrajectoryError> {
        let duration = self.duration();
        if !(t >= 0.0 && t <= duration) {
            return Err(TrajectoryError::OutOfDomain { t, duration });
        }
        // last segment whose start time is <= t
        let i = self.knots[1..self.segments.len()].partition_point(|&k| k <= t);
        let seg = &self.segments[i];
        let local = (t - self.knots[i]).clamp(0.0, seg.duration);
        Ok(seg.evaluate_unchecked(local))
    }

    /// Evaluate with `t` clamped into the domain.
    pub fn evaluate_clamped(&self, t: f64) -> Sample {
        let t = t.clamp(0.0, self.duration());
        self.evaluate(t).expect("clamped time is in domain")
    }

    pub fn start(&self) -> Sample {
        self.segments[0].start()
    }

    pub fn end(&self) -> Sample {
        self.segments[self.segments.len() - 1].end()
    }

    /// `period_count(D, dt) + 1` samples at `0, dt, 2dt, ...`, with the final
    /// sample placed exactly at the duration.
    pub fn sample(&self, dt: f64) -> Result<Vec<(f64, Sample)>, TrajectoryError> {
        sample_times(self.duration(), dt)?
            .into_iter()
            .map(|t| Ok((t, self.evaluate(t)?)))
            .collect()
    }

    pub fn time_reverse(&self) -> Self {
        let segments: Vec<_> = self.segments.iter().rev().map(QuinticSegment::time_reversed).collect();
        // mirror the knots so the total duration is bit-identical
        let d = self.duration();
        let mut knots: Vec<f64> = self.knots.iter().rev().map(|k| d - k).collect();
        knots[0] = 0.0;
        *knots.last_mut().expect("knots never empty") = d;
        Self { segments, knots }
    }

    /// Append `other`, which must start where this trajectory ends.
    pub fn then(&self, other: &Trajectory) -> Result<Self, TrajectoryError> {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Self::chain(segments)
    }

    pub fn max_abs_velocity(&self, dt: f64) -> f64 {
        self.sample(dt)
            .map(|s| s.iter().map(|(_, x)| x.velocity.abs()).fold(0.0, f64::max))
            .unwrap_or(f64::NAN)
    }
}

pub fn sample_times(duration: f64, dt: f64) -> Result<Vec<f64>, TrajectoryError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(TrajectoryError::NonpositivePeriod(dt));
    }
    let n = period_count(duration, dt);
    let mut times: Vec<f64> = (0..n).map(|i| (i as f64 * dt).min(duration)).collect();
    times.push(duration);
    Ok(times)
}

/// Hip, knee and ankle trajectories of one leg over a common duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub hip: Trajectory,
    pub knee: Trajectory,
    pub ankle: Trajectory,
}

impl JointTrajectory {
    pub fn new(hip: Trajectory, knee: Trajectory, ankle: Trajectory) -> Result<Self, TrajectoryError> {
        let d = [hip.duration(), knee.duration(), ankle.duration()];
        if (d[0] - d[1]).abs() > DURATION_TOLERANCE || (d[0] - d[2]).abs() > DURATION_TOLERANCE {
            return Err(TrajectoryError::DurationMismatch(d));
        }
        Ok(Self { hip, knee, ankle })
    }

    pub fn hold(q: &JointAngles, duration: f64) -> Result<Self, TrajectoryError> {
        Self::new(
            Trajectory::hold(q.hip, duration)?,
            Trajectory::hold(q.knee, duration)?,
            Trajectory::hold(q.ankle, duration)?,
        )
    }

    /// Rest-to-rest move of every joint.
    pub fn rest_to_rest(from: &JointAngles, to: &JointAngles, duration: f64) -> Result<Self, TrajectoryError> {
        let seg = |j: Joint| -> Result<Trajectory, TrajectoryError> {
            Ok(Trajectory::single(QuinticSegment::rest_to_rest(from.get(j), to.get(j), duration)?))
        };
        Self::new(seg(Joint::Hip)?, seg(Joint::Knee)?, seg(Joint::Ankle)?)
    }

    pub fn joint(&self, joint: Joint) -> &Trajectory {
        match joint {
            Joint::Hip => &self.hip,
            Joint::Knee => &self.knee,
            Joint::Ankle => &self.ankle,
        }
    }

    pub fn duration(&self) -> f64 {
        self.hip.duration()
    }

    pub fn evaluate(&self, t: f64) -> Result<JointState, TrajectoryError> {
        let (h, k, a) = (self.hip.evaluate(t)?, self.knee.evaluate(t)?, self.ankle.evaluate(t)?);
        Ok(JointState {
            angles: JointAngles::new(h.position, k.position, a.position),
            velocities: JointAngles::new(h.velocity, k.velocity, a.velocity),
        })
    }

    pub fn evaluate_clamped(&self, t: f64) -> JointState {
        let t = t.clamp(0.0, self.duration());
        self.evaluate(t).expect("clamped time is in domain")
    }

    pub fn start(&self) -> JointState {
        self.evaluate_clamped(0.0)
    }

    pub fn end(&self) -> JointState {
        self.evaluate_clamped(self.duration())
    }

    pub fn sample(&self, dt: f64) -> Result<Vec<(f64, JointState)>, TrajectoryError> {
        sample_times(self.duration(), dt)?
            .into_iter()
            .map(|t| Ok((t, self.evaluate(t)?)))
            .collect()
    }

    pub fn time_reverse(&self) -> Self {
        Self {
            hip: self.hip.time_reverse(),
            knee: self.knee.time_reverse(),
            ankle: self.ankle.time_reverse(),
        }
    }

    pub fn then(&self, other: &JointTrajectory) -> Result<Self, TrajectoryError> {
        Self::new(
            self.hip.then(&other.hip)?,
            self.knee.then(&other.knee)?,
            self.ankle.then(&other.ankle)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: solve the 6x6 boundary system in absolute time by
    /// Gaussian elimination with partial pivoting.
    fn oracle_coefficients(p0: f64, v0: f64, p1: f64, v1: f64, d: f64) -> [f64; 6] {
        let mut a = [
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, p0],
            [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, v0],
            [0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, d, d.powi(2), d.powi(3), d.powi(4), d.powi(5), p1],
            [0.0, 1.0, 2.0 * d, 3.0 * d.powi(2), 4.0 * d.powi(3), 5.0 * d.powi(4), v1],
            [0.0, 0.0, 2.0, 6.0 * d, 12.0 * d.powi(2), 20.0 * d.powi(3), 0.0],
        ];
        for col in 0..6 {
            let pivot = (col..6)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            for row in 0..6 {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    for k in col..7 {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        std::array::from_fn(|i| a[i][6] / a[i][i])
    }

    fn oracle_eval(c: &[f64; 6], t: f64) -> (f64, f64, f64) {
        let p = (0..6).map(|i| c[i] * t.powi(i as i32)).sum();
        let v = (1..6).map(|i| i as f64 * c[i] * t.powi(i as i32 - 1)).sum();
        let a = (2..6).map(|i| (i * (i - 1)) as f64 * c[i] * t.powi(i as i32 - 2)).sum();
        (p, v, a)
    }

    #[test]
    fn rest_to_rest_midpoint() {
        let s = QuinticSegment::fit(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((s.evaluate(0.5).unwrap().position - 0.5).abs() < 1e-15);
        assert_eq!(s.coefficients, [0.0, 0.0, 0.0, 10.0, -15.0, 6.0]);
    }

    #[test]
    fn rest_to_rest_at_fifth() {
        let s = QuinticSegment::fit(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let c = oracle_coefficients(0.0, 0.0, 1.0, 0.0, 1.0);
        let (p, _, _) = oracle_eval(&c, 0.2);
        assert!((p - 0.05792).abs() < 1e-12);
        assert!((s.evaluate(0.2).unwrap().position - 0.05792).abs() < 1e-12);
    }

    #[test]
    fn hold_is_constant() {
        let s = QuinticSegment::fit(0.3, 0.0, 0.3, 0.0, 2.5).unwrap();
        for i in 0..=10 {
            let x = s.evaluate(0.25 * i as f64).unwrap();
            assert_eq!(x.position, 0.3);
            assert_eq!(x.velocity, 0.0);
        }
    }

    #[test]
    fn rejects_bad_duration() {
        assert_eq!(
            QuinticSegment::fit(0.0, 0.0, 1.0, 0.0, 0.0),
            Err(TrajectoryError::NonpositiveDuration(0.0))
        );
        assert!(QuinticSegment::fit(0.0, 0.0, 1.0, 0.0, -1.0).is_err());
        assert_eq!(QuinticSegment::fit(f64::NAN, 0.0, 1.0, 0.0, 1.0), Err(TrajectoryError::NonFinite));
    }

    #[test]
    fn boundaries() {
        let s = QuinticSegment::fit(0.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        let a = s.evaluate(0.0).unwrap();
        let b = s.evaluate(1.0).unwrap();
        assert_eq!((a.position, a.velocity, a.acceleration), (0.0, 0.0, 0.0));
        assert!((b.position - 1.0).abs() < 1e-15 && b.velocity.abs() < 1e-14 && b.acceleration.abs() < 1e-12);
        assert!(matches!(s.evaluate(1.0 + 1e-9), Err(TrajectoryError::OutOfDomain { .. })));
        assert!(matches!(s.evaluate(-1e-9), Err(TrajectoryError::OutOfDomain { .. })));
    }

    #[test]
    fn interior_matches_oracle() {
        let s = QuinticSegment::fit(0.0, 0.2, 0.4, 0.1, 1.0).unwrap();
        let c = oracle_coefficients(0.0, 0.2, 0.4, 0.1, 1.0);
        let (p, v, a) = oracle_eval(&c, 0.37);
        let x = s.evaluate(0.37).unwrap();
        assert!((x.position - p).abs() < 1e-12);
        assert!((x.velocity - v).abs() < 1e-12);
        assert!((x.acceleration - a).abs() < 1e-11);
    }

    #[test]
    fn reverse_reflects() {
        let t = Trajectory::single(QuinticSegment::rest_to_rest(0.0, 1.0, 1.0).unwrap());
        let r = t.time_reverse();
        let a = r.evaluate(0.3).unwrap();
        let b = t.evaluate(0.7).unwrap();
        assert!((a.position - b.position).abs() < 1e-12);
        assert!((a.velocity + b.velocity).abs() < 1e-12);
    }

    #[test]
    fn reverse_is_involution() {
        let t = Trajectory::through(&[(0.0, 0.1, 0.0), (0.3, 0.5, 1.2), (1.1, -0.2, 0.0)]).unwrap();
        let rr = t.time_reverse().time_reverse();
        for (time, s) in t.sample(0.01).unwrap() {
            let x = rr.evaluate(time).unwrap();
            assert!((x.position - s.position).abs() < 1e-12);
            assert!((x.velocity - s.velocity).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_of_two_is_continuous() {
        let a = QuinticSegment::fit(0.0, 0.0, 0.5, 1.0, 0.4).unwrap();
        let b = QuinticSegment::fit(0.5, 1.0, 1.0, 0.0, 0.6).unwrap();
        let t = Trajectory::chain(vec![a, b]).unwrap();
        assert!((t.duration() - 1.0).abs() < 1e-15);
        let (l, r) = (a.end(), b.start());
        assert!((l.velocity - r.velocity).abs() < 1e-10);
        assert!((l.position - r.position).abs() < 1e-10);
        let mid = t.evaluate(0.4).unwrap();
        assert!((mid.position - 0.5).abs() < 1e-12 && (mid.velocity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_rejects_jumps() {
        let a = QuinticSegment::fit(0.0, 0.0, 0.5, 1.0, 0.4).unwrap();
        let b = QuinticSegment::fit(0.5, 0.9, 1.0, 0.0, 0.6).unwrap();
        assert!(matches!(
            Trajectory::chain(vec![a, b]),
            Err(TrajectoryError::DiscontinuousJunction { index: 0, .. })
        ));
        assert_eq!(Trajectory::chain(vec![]), Err(TrajectoryError::Empty));
    }

    #[test]
    fn sample_count() {
        let t = Trajectory::hold(0.0, 1.4).unwrap();
        let s = t.sample(0.002).unwrap();
        assert_eq!(s.len(), 701);
        assert_eq!(s.last().unwrap().0, 1.4);
        let s = t.sample(0.3).unwrap();
        assert_eq!(s.len(), 6);
        assert!(t.sample(0.0).is_err());
        assert_eq!(period_count(1.4, 0.002), 700);
        assert_eq!(period_count(2.7, 0.002), 1350);
        assert_eq!(period_count(1.0, 0.3), 4);
    }

    #[test]
    fn joint_trajectory_duration_mismatch() {
        let a = Trajectory::hold(0.0, 1.0).unwrap();
        let b = Trajectory::hold(0.0, 1.1).unwrap();
        assert!(matches!(
            JointTrajectory::new(a.clone(), a.clone(), b),
            Err(TrajectoryError::DurationMismatch(_))
        ));
        assert!(JointTrajectory::new(a.clone(), a.clone(), a).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn boundary_exactness(p0 in -3.0f64..3.0, v0 in -5.0f64..5.0, p1 in -3.0f64..3.0, v1 in -5.0f64..5.0, d in 0.05f64..3.0) {
            let s = QuinticSegment::fit(p0, v0, p1, v1, d).unwrap();
            let scale = [1.0, p0.abs(), p1.abs(), v0.abs(), v1.abs(), (p1 - p0).abs() / d].into_iter().fold(0.0, f64::max);
            let a = s.evaluate(0.0).unwrap();
            let b = s.evaluate(d).unwrap();
            prop_assert!((a.position - p0).abs() <= 1e-10 * scale);
            prop_assert!((a.velocity - v0).abs() <= 1e-10 * scale);
            prop_assert!((b.position - p1).abs() <= 1e-10 * scale);
            prop_assert!((b.velocity - v1).abs() <= 1e-10 * scale);
            prop_assert!(a.acceleration.abs() <= 1e-10 * scale / d);
            prop_assert!(b.acceleration.abs() <= 1e-9 * scale / d);
        }

        #[test]
        fn derivatives_match_finite_differences(p0 in -3.0f64..3.0, v0 in -5.0f64..5.0, p1 in -3.0f64..3.0, v1 in -5.0f64..5.0, d in 0.2f64..3.0, u in 0.05f64..0.95) {
            let s = QuinticSegment::fit(p0, v0, p1, v1, d).unwrap();
            let t = u * d;
            let h = 1e-5 * d;
            let x = s.evaluate(t).unwrap();
            let (m, p) = (s.evaluate(t - h).unwrap(), s.evaluate(t + h).unwrap());
            let fd_v = (p.position - m.position) / (2.0 * h);
            let fd_a = (p.velocity - m.velocity) / (2.0 * h);
            let scale = 1.0 + (p1 - p0).abs() / d + v0.abs() + v1.abs();
            prop_assert!((fd_v - x.velocity).abs() <= 1e-6 * scale);
            prop_assert!((fd_a - x.acceleration).abs() <= 1e-6 * scale / d);
        }

        #[test]
        fn rest_to_rest_point_symmetry(p0 in -3.0f64..3.0, p1 in -3.0f64..3.0, d in 0.05f64..3.0, u in 0.0f64..0.5) {
            let s = QuinticSegment::rest_to_rest(p0, p1, d).unwrap();
            let a = s.evaluate(d / 2.0 + u * d).unwrap().position;
            let b = s.evaluate(d / 2.0 - u * d).unwrap().position;
            prop_assert!((a + b - p0 - p1).abs() < 1e-12 * (1.0 + p0.abs() + p1.abs()));
        }

        #[test]
        fn matches_six_by_six_oracle(p0 in -3.0f64..3.0, v0 in -5.0f64..5.0, p1 in -3.0f64..3.0, v1 in -5.0f64..5.0, d in 0.1f64..3.0, u in 0.0f64..1.0) {
            let s = QuinticSegment::fit(p0, v0, p1, v1, d).unwrap();
            let c = oracle_coefficients(p0, v0, p1, v1, d);
            let (p, v, _) = oracle_eval(&c, u * d);
            let x = s.evaluate(u * d).unwrap();
            let scale = 1.0 + p0.abs() + p1.abs() + (v0.abs() + v1.abs()) * d;
            prop_assert!((x.position - p).abs() < 1e-10 * scale);
            prop_assert!((x.velocity - v).abs() < 1e-9 * scale / d);
        }

        #[test]
        fn reverse_preserves_path(p in proptest::collection::vec(-2.0f64..2.0, 4), v in -3.0f64..3.0, d in proptest::collection::vec(0.1f64..1.0, 3)) {
            let t = Trajectory::through(&[
                (0.0, p[0], 0.0),
                (d[0], p[1], v),
                (d[0] + d[1], p[2], -v),
                (d[0] + d[1] + d[2], p[3], 0.0),
            ]).unwrap();
            let r = t.time_reverse();
            let total = t.duration();
            prop_assert!((r.duration() - total).abs() < 1e-15);
            for i in 0..=50 {
                let time = total * i as f64 / 50.0;
                let a = r.evaluate_clamped(time);
                let b = t.evaluate_clamped(total - time);
                prop_assert!((a.position - b.position).abs() < 1e-12 * (1.0 + v.abs()) * 10.0);
                prop_assert!((a.velocity + b.velocity).abs() < 1e-10 * (1.0 + v.abs()) * 10.0 / d.iter().cloned().fold(1.0, f64::min));
            }
        }
    }
}
