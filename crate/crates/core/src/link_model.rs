//! Link budget for directional mm-wave links.
//!
//! Everything here is a pure function over linear SI quantities: watts, hertz,
//! meters, with angles in degrees and the residual self-interference level
//! `si_level` as a linear power fraction. Decibel values only appear in the
//! antenna model and in the conversion helpers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Main-lobe width as a multiple of the half-power beamwidth.
const MAIN_LOBE_FACTOR: f64 = 2.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("angle {0}° outside [0°, 180°]")]
    AngleOutOfRange(f64),
    #[error("invalid half-power beamwidth {0}°")]
    InvalidBeamwidth(f64),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) / 1000.0
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts * 1000.0)
}

/// Boresight gain in dB of an antenna with the given half-power beamwidth.
pub fn max_gain(theta_3db: f64) -> Result<f64, LinkError> {
    if !(theta_3db > 0.0 && theta_3db < 360.0) {
        return Err(LinkError::InvalidBeamwidth(theta_3db));
    }
    let half = (theta_3db / 2.0).to_radians();
    Ok(20.0 * (1.6162 / half.sin()).log10())
}

/// Piecewise main-lobe / side-lobe antenna pattern parameterised by the
/// half-power beamwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    theta_3db: f64,
}

impl AntennaPattern {
    pub fn new(theta_3db: f64) -> Result<Self, LinkError> {
        if !(theta_3db > 0.0 && MAIN_LOBE_FACTOR * theta_3db / 2.0 <= 180.0) {
            return Err(LinkError::InvalidBeamwidth(theta_3db));
        }
        Ok(Self { theta_3db })
    }

    pub fn half_power_beamwidth(&self) -> f64 {
        self.theta_3db
    }

    pub fn main_lobe_width(&self) -> f64 {
        MAIN_LOBE_FACTOR * self.theta_3db
    }

    pub fn max_gain_db(&self) -> f64 {
        // theta_3db was validated on construction.
        max_gain(self.theta_3db).expect("validated beamwidth")
    }

    pub fn side_lobe_gain_db(&self) -> f64 {
        -0.4111 * self.theta_3db.ln() - 10.579
    }

    /// Gain in dB at `theta` degrees off boresight. The main-lobe edge
    /// `theta == main_lobe_width / 2` belongs to the main lobe.
    pub fn gain_db(&self, theta: f64) -> Result<f64, LinkError> {
        if !(0.0..=180.0).contains(&theta) {
            return Err(LinkError::AngleOutOfRange(theta));
        }
        if theta <= self.main_lobe_width() / 2.0 {
            let x = 2.0 * theta / self.theta_3db;
            Ok(self.max_gain_db() - 3.01 * x * x)
        } else {
            Ok(self.side_lobe_gain_db())
        }
    }
}

/// Free-function form of [`AntennaPattern::gain_db`].
pub fn antenna_gain(theta: f64, pattern: &AntennaPattern) -> Result<f64, LinkError> {
    pattern.gain_db(theta)
}

/// Physical-layer constants shared by every link in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    /// Total system bandwidth W in Hz.
    pub bandwidth_hz: f64,
    /// Fraction of W reserved for the base station.
    pub bs_share: f64,
    /// Fraction of W reserved for the mobile relay.
    pub mr_share: f64,
    pub tx_power_w: f64,
    /// One-sided noise power spectral density in W/Hz.
    pub noise_psd_w_per_hz: f64,
    pub path_loss_exp: f64,
    /// Transceiver efficiency in (0, 1).
    pub efficiency: f64,
    /// Residual self-interference after cancellation, as a linear fraction
    /// of the relay's transmit power.
    pub si_level: f64,
    pub wavelength_m: f64,
    pub bs_beamwidth_deg: f64,
    pub mr_beamwidth_deg: f64,
    pub user_beamwidth_deg: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1e9,
            bs_share: 0.4,
            mr_share: 0.6,
            tx_power_w: dbm_to_watts(30.0),
            noise_psd_w_per_hz: dbm_to_watts(-174.0),
            path_loss_exp: 3.0,
            efficiency: 0.5,
            si_level: 1e-15,
            wavelength_m: SPEED_OF_LIGHT / 60e9,
            bs_beamwidth_deg: 60.0,
            mr_beamwidth_deg: 60.0,
            user_beamwidth_deg: 60.0,
        }
    }
}

impl RadioConfig {
    /// Friis constant (λ/4π)².
    pub fn k0(&self) -> f64 {
        let x = self.wavelength_m / (4.0 * std::f64::consts::PI);
        x * x
    }

    pub fn bs_bandwidth(&self) -> f64 {
        self.bs_share * self.bandwidth_hz
    }

    pub fn mr_bandwidth(&self) -> f64 {
        self.mr_share * self.bandwidth_hz
    }

    /// Sets the BS share and gives the remainder to the relay.
    pub fn with_bs_share(mut self, a: f64) -> Self {
        self.bs_share = a;
        self.mr_share = 1.0 - a;
        self
    }

    pub fn bs_antenna(&self) -> Result<AntennaPattern, LinkError> {
        AntennaPattern::new(self.bs_beamwidth_deg)
    }

    pub fn mr_antenna(&self) -> Result<AntennaPattern, LinkError> {
        AntennaPattern::new(self.mr_beamwidth_deg)
    }

    pub fn user_antenna(&self) -> Result<AntennaPattern, LinkError> {
        AntennaPattern::new(self.user_beamwidth_deg)
    }

    /// Returns every violated invariant, or `Ok` when the config is usable.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_power_w", self.tx_power_w),
            ("noise_psd_w_per_hz", self.noise_psd_w_per_hz),
            ("path_loss_exp", self.path_loss_exp),
            ("wavelength_m", self.wavelength_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be finite and > 0 (got {v})"));
            }
        }
        for (name, v) in [("bs_share", self.bs_share), ("mr_share", self.mr_share)] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name} must lie in [0, 1] (got {v})"));
            }
        }
        if (self.bs_share + self.mr_share - 1.0).abs() > 1e-9 {
            errs.push(format!(
                "bs_share + mr_share must equal 1 (got {} + {})",
                self.bs_share, self.mr_share
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            errs.push(format!("efficiency must lie in (0, 1) (got {})", self.efficiency));
        }
        if !(self.si_level.is_finite() && self.si_level >= 0.0) {
            errs.push(format!("si_level must be >= 0 (got {})", self.si_level));
        }
        for (name, v) in [
            ("bs_beamwidth_deg", self.bs_beamwidth_deg),
            ("mr_beamwidth_deg", self.mr_beamwidth_deg),
            ("user_beamwidth_deg", self.user_beamwidth_deg),
        ] {
            if AntennaPattern::new(v).is_err() {
                errs.push(format!("{name} must lie in (0, {:.4}] degrees (got {v})", 360.0 / MAIN_LOBE_FACTOR));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
}

pub fn received_power(tx_power_w: f64, geom: &LinkGeometry, cfg: &RadioConfig) -> f64 {
    debug_assert!(geom.distance_m > 0.0);
    cfg.k0()
        * db_to_linear(geom.tx_gain_db)
        * db_to_linear(geom.rx_gain_db)
        * geom.distance_m.powf(-cfg.path_loss_exp)
        * tx_power_w
}

/// Linear SNR over the effective bandwidth of the link.
pub fn snr(p_r: f64, bandwidth: f64, cfg: &RadioConfig) -> f64 {
    debug_assert!(bandwidth > 0.0);
    p_r / (cfg.noise_psd_w_per_hz * bandwidth)
}

/// Shannon rate of a link whose receiver is half-duplex.
pub fn rate_hd(p_r: f64, bandwidth: f64, cfg: &RadioConfig) -> f64 {
    cfg.efficiency * bandwidth * (1.0 + snr(p_r, bandwidth, cfg)).log2()
}

/// Shannon rate with residual self-interference `si_level * tx_power` added
/// to the noise floor.
pub fn rate_fd(p_r: f64, bandwidth: f64, tx_power_of_receiver: f64, cfg: &RadioConfig) -> f64 {
    debug_assert!(bandwidth > 0.0);
    let interference = cfg.noise_psd_w_per_hz * bandwidth + cfg.si_level * tx_power_of_receiver;
    cfg.efficiency * bandwidth * (1.0 + p_r / interference).log2()
}

/// End-to-end rate of a full-duplex relay path: both hops run at once, so
/// the weaker hop is the bottleneck.
pub fn two_hop_rate_fd(r_first_hop: f64, r_second_hop: f64) -> f64 {
    r_first_hop.min(r_second_hop)
}

/// End-to-end rate of a half-duplex relay path. The hops time-share the
/// channel, giving `r1 * r2 / (r1 + r2)`.
pub fn two_hop_rate_hd(r_first_hop: f64, r_second_hop: f64) -> f64 {
    if r_first_hop <= 0.0 || r_second_hop <= 0.0 {
        return 0.0;
    }
    if r_first_hop.is_infinite() {
        return r_second_hop;
    }
    if r_second_hop.is_infinite() {
        return r_first_hop;
    }
    r_first_hop * r_second_hop / (r_first_hop + r_second_hop)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn max_gain_values() {
        // 20*log10(1.6162 / sin 15°), evaluated at 30 digits.
        assert!((max_gain(30.0).unwrap() - 15.909_977_437_209_966).abs() < 1e-12);
        assert!((max_gain(180.0).unwrap() - 4.169_902_048_596_748).abs() < 1e-12);
        assert_eq!(max_gain(42.0).unwrap(), max_gain(42.0).unwrap());
        assert!(max_gain(0.0).is_err());
        assert!(max_gain(-3.0).is_err());
        assert!(max_gain(360.0).is_err());
    }

    #[test]
    fn pattern_points() {
        let p = AntennaPattern::new(30.0).unwrap();
        assert_eq!(p.gain_db(0.0).unwrap(), p.max_gain_db());
        assert!((p.gain_db(15.0).unwrap() - (p.max_gain_db() - 3.01)).abs() < 1e-12);
        assert!((p.gain_db(100.0).unwrap() - -11.977_232_243_601_312).abs() < 1e-12);
        // boundary is main lobe
        let edge = p.main_lobe_width() / 2.0;
        let x: f64 = 2.0 * edge / 30.0;
        assert_eq!(p.gain_db(edge).unwrap(), p.max_gain_db() - 3.01 * x * x);
        assert!(p.gain_db(edge + 1e-9).unwrap() == p.side_lobe_gain_db());
    }

    #[test]
    fn pattern_rejects_bad_input() {
        let p = AntennaPattern::new(30.0).unwrap();
        assert_eq!(p.gain_db(-0.1), Err(LinkError::AngleOutOfRange(-0.1)));
        assert!(p.gain_db(180.1).is_err());
        assert!(AntennaPattern::new(0.0).is_err());
        assert!(AntennaPattern::new(140.0).is_err());
        assert!(AntennaPattern::new(f64::NAN).is_err());
    }

    #[test]
    fn main_lobe_beats_side_lobe() {
        for w in 1..=60 {
            let p = AntennaPattern::new(w as f64).unwrap();
            assert!(p.max_gain_db() > p.side_lobe_gain_db(), "beamwidth {w}");
        }
    }

    #[test]
    fn received_power_identities() {
        let cfg = RadioConfig::default();
        let g = LinkGeometry { distance_m: 1.0, tx_gain_db: 0.0, rx_gain_db: 0.0 };
        assert!(rel(received_power(2.0, &g, &cfg), 2.0 * cfg.k0()) < 1e-15);
        let far = LinkGeometry { distance_m: 20.0, ..g };
        let farther = LinkGeometry { distance_m: 40.0, ..g };
        assert!(rel(received_power(1.0, &far, &cfg) / received_power(1.0, &farther, &cfg), 8.0) < 1e-12);
    }

    #[test]
    fn fspl_gap_60_vs_2_4_ghz() {
        let mmw = RadioConfig::default();
        let legacy = RadioConfig { wavelength_m: SPEED_OF_LIGHT / 2.4e9, ..mmw };
        let g = LinkGeometry { distance_m: 100.0, tx_gain_db: 10.0, rx_gain_db: 3.0 };
        let gap = linear_to_db(received_power(1.0, &g, &legacy) / received_power(1.0, &g, &mmw));
        assert!((gap - 27.958_800_173_440_752).abs() < 1e-9);
    }

    #[test]
    fn noise_floor() {
        let cfg = RadioConfig::default();
        assert!(rel(cfg.noise_psd_w_per_hz, 3.981_071_705_534_972e-21) < 1e-12);
        assert!(rel(cfg.noise_psd_w_per_hz * 0.6e9, 2.388_643_023_320_983_5e-12) < 1e-12);
        let w = 0.6e9;
        assert!(rel(snr(cfg.noise_psd_w_per_hz * w, w, &cfg), 1.0) < 1e-15);
        let p = 1e-11;
        assert!(rel(snr(p, w / 2.0, &cfg), 2.0 * snr(p, w, &cfg)) < 1e-15);
    }

    #[test]
    fn hd_rate_basics() {
        let cfg = RadioConfig { efficiency: 0.5, ..Default::default() };
        let w = 1e9;
        assert!(rel(rate_hd(cfg.noise_psd_w_per_hz * w, w, &cfg), 0.5e9) < 1e-15);
        assert_eq!(rate_hd(0.0, w, &cfg), 0.0);
    }

    #[test]
    fn fd_rate_reference_values() {
        // P_r = 1e-10 W over 0.6 GHz, evaluated with 30-digit arithmetic.
        let w = 0.6e9;
        let base = RadioConfig { si_level: 0.0, ..Default::default() };
        let r0 = rate_fd(1e-10, w, 1.0, &base);
        assert!(rel(r0, 1_626_516_188.126_010_3) < 1e-12);
        assert_eq!(r0, rate_hd(1e-10, w, &base));
        let r15 = rate_fd(1e-10, w, 1.0, &RadioConfig { si_level: 1e-15, ..base });
        assert!(rel(r15, 1_626_339_258.832_626) < 1e-12);
        assert!((r0 - r15) / r0 < 1e-3);
        let r12 = rate_fd(1e-10, w, 1.0, &RadioConfig { si_level: 1e-12, ..base });
        assert!(rel(r12, 1_479_367_873.111_702_5) < 1e-12);
        assert!(r12 < r0);
    }

    #[test]
    fn two_hop_compositions() {
        assert_eq!(two_hop_rate_fd(3e9, 5e9), 3e9);
        assert_eq!(two_hop_rate_fd(7.0, 7.0), 7.0);
        assert_eq!(two_hop_rate_hd(4e9, 4e9), 2e9);
        assert_eq!(two_hop_rate_hd(0.0, 4e9), 0.0);
        assert_eq!(two_hop_rate_hd(4e9, 0.0), 0.0);
        assert_eq!(two_hop_rate_hd(4e9, f64::INFINITY), 4e9);
        assert!(rel(two_hop_rate_hd(1e9, 1e18), 1e9) < 1e-8);
    }

    #[test]
    fn default_config_is_valid() {
        RadioConfig::default().validate().unwrap();
        let bad = RadioConfig { bs_share: 0.5, efficiency: 1.0, ..Default::default() };
        let errs = bad.validate().unwrap_err();
        assert_eq!(errs.len(), 2, "{errs:?}");
    }
}
