//! Cycle-level scalar damage with softening and creep of the angle response.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the damage law. Pressures and stresses in kPa, times in s,
/// angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueParams {
    /// Damage per cycle at twice the reference stress.
    pub alpha: f64,
    /// Stress exponent.
    pub m: f64,
    /// Reference von Mises stress, kPa.
    pub sigma_ref: f64,
    pub d_max: f64,
    /// Softening gain.
    pub gamma: f64,
    /// Creep onset pressure, kPa.
    pub p_c: f64,
    /// Creep rate per kPa above onset per unit damage, deg/s/kPa.
    pub k_c: f64,
    /// Plant response time, s.
    pub tau_r: f64,
    /// Pressure width over which softening ramps in, kPa.
    pub delta_r: f64,
}

impl FatigueParams {
    /// Default exponents, cap and onset with the rate gains at zero.
    pub fn with_reference(sigma_ref: f64) -> Self {
        FatigueParams {
            alpha: 0.0,
            m: 2.0,
            sigma_ref,
            d_max: 0.5,
            gamma: 0.0,
            p_c: 32.5,
            k_c: 0.0,
            tau_r: 0.6,
            delta_r: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.alpha >= 0.0, "alpha must be >= 0"),
            (self.m >= 1.0, "m must be >= 1"),
            (self.d_max > 0.0 && self.d_max < 1.0, "d_max must lie in (0, 1)"),
            (self.gamma >= 0.0, "gamma must be >= 0"),
            (self.k_c >= 0.0, "k_c must be >= 0"),
            (self.tau_r > 0.0, "tau_r must be > 0"),
            (self.sigma_ref > 0.0, "sigma_ref must be > 0"),
            (self.delta_r > 0.0, "delta_r must be > 0"),
            (self.p_c.is_finite(), "p_c must be finite"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(format!("fatigue: {msg}")));
            }
        }
        Ok(())
    }

    /// Softening ramp `clamp((p - p_c) / delta_r, 0, 1)`.
    pub fn ramp(&self, p: f64) -> f64 {
        ((p - self.p_c) / self.delta_r).clamp(0.0, 1.0)
    }
}

/// One completed cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub peak_vm_kpa: f64,
    pub delta_d: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DamageState {
    pub d: f64,
    pub cycles: usize,
    pub history: Vec<CycleRecord>,
}

impl DamageState {
    pub fn pristine() -> Self {
        DamageState::default()
    }

    /// Writes `cycle,peak_vm_kPa,delta_D,D`.
    pub fn write_history_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["cycle", "peak_vm_kPa", "delta_D", "D"])?;
        for (k, r) in self.history.iter().enumerate() {
            wr.write_record([
                (k + 1).to_string(),
                format!("{:?}", r.peak_vm_kpa),
                format!("{:?}", r.delta_d),
                format!("{:?}", r.d),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Damage increment of one cycle whose peak hotspot stress is `peak_vm`.
pub fn cycle_update(damage: &DamageState, peak_vm: f64, params: &FatigueParams) -> DamageState {
    let over = (peak_vm / params.sigma_ref - 1.0).max(0.0);
    let d = (damage.d + params.alpha * over.powf(params.m)).min(params.d_max).max(damage.d);
    let mut next = damage.clone();
    next.history.push(CycleRecord {
        peak_vm_kpa: peak_vm,
        delta_d: d - damage.d,
        d,
    });
    next.d = d;
    next.cycles += 1;
    next
}

/// Steady-state angle of the damaged actuator.
pub fn softened_angle(theta_fem: f64, p: f64, d: f64, params: &FatigueParams) -> f64 {
    theta_fem * (1.0 + params.gamma * d * params.ramp(p))
}

/// Creep rate in deg/s.
pub fn creep_rate(p: f64, d: f64, params: &FatigueParams) -> f64 {
    params.k_c * d * (p - params.p_c).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FatigueParams {
        FatigueParams {
            alpha: 0.02,
            gamma: 0.6,
            k_c: 0.05,
            ..FatigueParams::with_reference(100.0)
        }
    }

    #[test]
    fn cycle_update_hand_value() {
        let d = cycle_update(&DamageState::pristine(), 200.0, &params());
        assert!((d.d - 0.02).abs() < 1e-15);
        assert_eq!(d.cycles, 1);
        assert_eq!(d.history.len(), 1);
    }

    #[test]
    fn below_reference_stress_no_damage() {
        let d = cycle_update(&DamageState::pristine(), 100.0, &params());
        assert_eq!(d.d, 0.0);
        assert_eq!(d.cycles, 1);
    }

    #[test]
    fn zero_rate_is_identity() {
        let p = FatigueParams { alpha: 0.0, ..params() };
        let d = cycle_update(&DamageState::pristine(), 1e6, &p);
        assert_eq!(d.d, 0.0);
    }

    #[test]
    fn damage_is_capped() {
        let p = FatigueParams { alpha: 10.0, ..params() };
        let d = cycle_update(&DamageState::pristine(), 500.0, &p);
        assert_eq!(d.d, p.d_max);
    }

    #[test]
    fn softened_angle_hand_value() {
        let p = params();
        let v = softened_angle(150.0, p.p_c + p.delta_r, 0.3, &p);
        assert!((v - 177.0).abs() < 1e-12);
        assert_eq!(softened_angle(150.0, p.p_c, 0.3, &p), 150.0);
        assert_eq!(softened_angle(150.0, 45.0, 0.0, &p), 150.0);
    }

    #[test]
    fn creep_rate_hand_value() {
        let p = params();
        assert!((creep_rate(p.p_c + 10.0, 0.2, &p) - 0.1).abs() < 1e-15);
        assert_eq!(creep_rate(p.p_c - 1.0, 0.4, &p), 0.0);
        assert_eq!(creep_rate(45.0, 0.0, &p), 0.0);
    }

    #[test]
    fn history_csv_header() {
        let d = cycle_update(&DamageState::pristine(), 200.0, &params());
        let mut buf = Vec::new();
        d.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("cycle,peak_vm_kPa,delta_D,D\n1,200.0,"));
    }

    #[test]
    fn validation_rejects_bad_cap() {
        let p = FatigueParams { d_max: 1.0, ..params() };
        assert!(p.validate().is_err());
        assert!(params().validate().is_ok());
    }
}
