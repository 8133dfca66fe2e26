//! Kaplan-Meier estimation for event and censoring distributions.

use crate::error::{KanAftError, Result};

/// Right-continuous step estimate of a survival function.
///
/// `survival_probs[j]` is the value just after the jump at `jump_times[j]`; before the
/// first jump the curve equals 1.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeierCurve {
    pub jump_times: Vec<f64>,
    pub survival_probs: Vec<f64>,
    pub n_at_risk: Vec<usize>,
    pub n_events: Vec<usize>,
    /// Largest observed time, events or not. Receives the leftover tail mass.
    pub max_time: f64,
    /// `suffix_mass[j] = sum_{q >= j} mass_q + tail`, length `jumps + 1`.
    suffix_mass: Vec<f64>,
    /// `suffix_moment[j] = sum_{q >= j} t_q mass_q + max_time * tail`.
    suffix_moment: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `S(t)`, after any jump at `t`.
    Right,
    /// `S(t-)`, before any jump at `t`.
    Left,
}

/// Product-limit estimator. At tied times events are processed before censorings,
/// so records censored at `t` are still at risk for events at `t`.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<KaplanMeierCurve> {
    if times.len() != events.len() {
        return Err(KanAftError::Shape {
            expected: times.len(),
            got: events.len(),
        });
    }
    if times.is_empty() {
        return Err(KanAftError::Domain("Kaplan-Meier needs at least one record".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(KanAftError::Domain(format!(
            "survival times must be positive and finite, got {t}"
        )));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut curve = KaplanMeierCurve {
        jump_times: Vec::new(),
        survival_probs: Vec::new(),
        n_at_risk: Vec::new(),
        n_events: Vec::new(),
        max_time: times[order[order.len() - 1]],
        suffix_mass: Vec::new(),
        suffix_moment: Vec::new(),
    };
    let mut at_risk = times.len();
    let mut surv = 1.0;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut deaths = 0;
        while j < order.len() && times[order[j]] == t {
            if events[order[j]] {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            surv *= (at_risk - deaths) as f64 / at_risk as f64;
            curve.jump_times.push(t);
            curve.survival_probs.push(surv);
            curve.n_at_risk.push(at_risk);
            curve.n_events.push(deaths);
        }
        at_risk -= j - i;
        i = j;
    }
    curve.build_suffix_sums();
    Ok(curve)
}

/// Kaplan-Meier estimate of the censoring survival `G(t) = P(C > t)`: the indicator is flipped.
pub fn censoring_km(times: &[f64], events: &[bool]) -> Result<KaplanMeierCurve> {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(times, &flipped)
}

impl KaplanMeierCurve {
    fn build_suffix_sums(&mut self) {
        let masses = self.masses();
        let tail = self.tail_mass();
        let n = masses.len();
        self.suffix_mass = vec![0.0; n + 1];
        self.suffix_moment = vec![0.0; n + 1];
        self.suffix_mass[n] = tail;
        self.suffix_moment[n] = tail * self.max_time;
        for j in (0..n).rev() {
            self.suffix_mass[j] = self.suffix_mass[j + 1] + masses[j];
            self.suffix_moment[j] = self.suffix_moment[j + 1] + masses[j] * self.jump_times[j];
        }
    }

    /// Probability mass removed at each jump.
    pub fn masses(&self) -> Vec<f64> {
        let mut prev = 1.0;
        self.survival_probs
            .iter()
            .map(|s| {
                let m = prev - s;
                prev = *s;
                m
            })
            .collect()
    }

    /// Survival left after the last jump (1 when there are no jumps).
    pub fn tail_mass(&self) -> f64 {
        self.survival_probs.last().copied().unwrap_or(1.0)
    }

    pub fn eval(&self, t: f64, side: Side) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(KanAftError::Domain(format!(
                "survival curve evaluated at negative time {t}"
            )));
        }
        Ok(self.eval_unchecked(t, side))
    }

    fn eval_unchecked(&self, t: f64, side: Side) -> f64 {
        let idx = match side {
            Side::Right => self.jump_times.partition_point(|x| *x <= t),
            Side::Left => self.jump_times.partition_point(|x| *x < t),
        };
        if idx == 0 {
            1.0
        } else {
            self.survival_probs[idx - 1]
        }
    }

    /// Smallest strictly positive value the curve takes.
    pub fn min_positive(&self) -> Option<f64> {
        std::iter::once(1.0)
            .chain(self.survival_probs.iter().copied())
            .filter(|s| *s > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }
}

pub fn km_eval(curve: &KaplanMeierCurve, t: f64, side: Side) -> Result<f64> {
    curve.eval(t, side)
}

/// `E(X | X > t0)` under the curve, with any mass left after the last jump placed at
/// `max_time`. Returns `t0` when no jump exceeds `t0` or the curve is already 0 there.
pub fn conditional_residual_expectation(curve: &KaplanMeierCurve, t0: f64) -> Result<f64> {
    if !(t0 >= 0.0) {
        return Err(KanAftError::Domain(format!(
            "conditional expectation needs t0 >= 0, got {t0}"
        )));
    }
    if curve.jump_times.is_empty() {
        return Err(KanAftError::Domain(
            "conditional expectation needs a curve with at least one jump".into(),
        ));
    }
    let first_after = curve.jump_times.partition_point(|x| *x <= t0);
    if first_after == curve.jump_times.len() || curve.eval_unchecked(t0, Side::Right) <= 0.0 {
        return Ok(t0);
    }
    // mass above t0 equals S(t0); using the suffix sum keeps the ratio a proper weighted mean
    let mass = curve.suffix_mass[first_after];
    if mass <= 0.0 {
        return Ok(t0);
    }
    Ok(curve.suffix_moment[first_after] / mass)
}

/// Exact `int_0^T du / G(u-)` over the step function `G`.
pub fn inverse_g_integral(g: &KaplanMeierCurve, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(KanAftError::Domain(format!(
            "integral upper limit must be finite and >= 0, got {t}"
        )));
    }
    let mut acc = 0.0;
    let mut start = 0.0;
    let mut level = 1.0;
    for (jt, s) in g.jump_times.iter().zip(&g.survival_probs) {
        if *jt >= t {
            break;
        }
        acc += (jt - start) / level;
        start = *jt;
        level = *s;
    }
    if t > start {
        if level <= 0.0 {
            return Err(KanAftError::UnsupportedTail { at: start, time: t });
        }
        acc += (t - start) / level;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_curve() -> KaplanMeierCurve {
        kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap()
    }

    #[test]
    fn km_hand_oracle() {
        let c = hand_curve();
        assert_eq!(c.eval(1.0, Side::Right).unwrap(), 2.0 / 3.0);
        assert_eq!(c.eval(2.0, Side::Right).unwrap(), 2.0 / 3.0);
        assert_eq!(c.eval(3.0, Side::Right).unwrap(), 0.0);
        assert_eq!(c.eval(1.0, Side::Left).unwrap(), 1.0);
        assert_eq!(c.eval(0.0, Side::Left).unwrap(), 1.0);
        assert_eq!(c.eval(0.0, Side::Right).unwrap(), 1.0);
        assert_eq!(c.eval(50.0, Side::Right).unwrap(), 0.0);
        assert!(c.eval(-1.0, Side::Right).is_err());
    }

    #[test]
    fn km_uncensored_is_empirical() {
        let t = [4.0, 1.0, 3.0, 2.0, 5.0];
        let c = kaplan_meier(&t, &[true; 5]).unwrap();
        for (j, s) in c.survival_probs.iter().enumerate() {
            assert!((s - (1.0 - (j + 1) as f64 / 5.0)).abs() < 1e-15);
        }
        let none = kaplan_meier(&t, &[false; 5]).unwrap();
        assert!(none.jump_times.is_empty());
        assert_eq!(none.eval(10.0, Side::Right).unwrap(), 1.0);
    }

    #[test]
    fn km_errors() {
        assert!(kaplan_meier(&[], &[]).is_err());
        assert!(kaplan_meier(&[1.0, 0.0], &[true, true]).is_err());
        assert!(kaplan_meier(&[1.0, -2.0], &[true, true]).is_err());
    }

    #[test]
    fn ties_count_censorings_at_risk() {
        // event and censoring both at t=2: at risk 3 at t=2
        let c = kaplan_meier(&[1.0, 2.0, 2.0, 4.0], &[true, true, false, true]).unwrap();
        assert!((c.eval(2.0, Side::Right).unwrap() - 0.75 * (2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn censoring_curve_examples() {
        let g = censoring_km(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
        assert_eq!(g.eval(2.0, Side::Right).unwrap(), 0.5);
        assert_eq!(g.eval(1.9, Side::Right).unwrap(), 1.0);
        let none = censoring_km(&[1.0, 2.0], &[true, true]).unwrap();
        assert!(none.jump_times.is_empty());
    }

    #[test]
    fn conditional_expectation_examples() {
        let all = kaplan_meier(&[1.0, 2.0, 3.0], &[true; 3]).unwrap();
        assert!((conditional_residual_expectation(&all, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((conditional_residual_expectation(&all, 1.5).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(conditional_residual_expectation(&all, 3.0).unwrap(), 3.0);
        assert_eq!(conditional_residual_expectation(&all, 7.0).unwrap(), 7.0);
    }

    #[test]
    fn conditional_expectation_uses_tail_at_max_time() {
        // S: 1 -> 2/3 at t=1, then censored at 2 and 3; tail 2/3 sits at 3
        let c = kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, false]).unwrap();
        // no jump beyond 0.5 other than t=1 plus tail
        let e = conditional_residual_expectation(&c, 0.5).unwrap();
        assert!((e - (1.0 / 3.0 + 3.0 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn inverse_integral_examples() {
        let none = censoring_km(&[1.0, 2.0], &[true, true]).unwrap();
        assert_eq!(inverse_g_integral(&none, 1.7).unwrap(), 1.7);
        assert_eq!(inverse_g_integral(&none, 0.0).unwrap(), 0.0);
        // G = 1 on [0,1), 0.5 afterwards
        let g = censoring_km(&[1.0, 5.0], &[false, true]).unwrap();
        assert_eq!(g.eval(1.0, Side::Right).unwrap(), 0.5);
        assert!((inverse_g_integral(&g, 2.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_integral_rejects_zero_tail() {
        let g = censoring_km(&[1.0, 2.0], &[true, false]).unwrap();
        assert_eq!(g.eval(2.0, Side::Right).unwrap(), 0.0);
        assert!(inverse_g_integral(&g, 2.0).is_ok());
        assert!(matches!(
            inverse_g_integral(&g, 2.5),
            Err(KanAftError::UnsupportedTail { .. })
        ));
    }
}
