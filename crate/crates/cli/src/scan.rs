//! Closed-form parameter scans over cavity length.

use std::f64::consts::{PI, TAU};

use anyhow::{bail, ensure, Context};
use fp_biphoton::{
    channel_rate, phase_from_geometry, transmission_coincidence_rate, Channel, DetectionOutcome,
    MirrorCoefficients, SPEED_OF_LIGHT,
};
use rayon::prelude::*;

use crate::config::{Scan2d, ScanSingle};
use crate::output::{Cell, Table};

pub fn mirrors(section: &str, t: f64) -> anyhow::Result<MirrorCoefficients> {
    MirrorCoefficients::from_transmission(t).with_context(|| format!("{section}.t = {t}"))
}

/// Scan unit: half the wavelength of the sum frequency, `πc/ω_sum`. Moving
/// both arms by one unit advances the joint phase by 2π.
pub fn half_wavelength(omega_sum: f64) -> f64 {
    PI * SPEED_OF_LIGHT / omega_sum
}

pub fn check_grid(section: &str, periods: f64, steps: usize) -> anyhow::Result<()> {
    ensure!(periods.is_finite() && periods > 0.0, "{section}.periods = {periods} must be positive");
    ensure!(steps >= 2, "{section}.steps = {steps} must be at least 2");
    Ok(())
}

/// Length change of one arm, with angular frequency `omega`, that moves the
/// joint phase from `theta` to the nearest multiple of 2π.
fn resonance_correction(theta: f64, omega: f64) -> f64 {
    let to_go = if theta > PI { TAU - theta } else { -theta };
    to_go * SPEED_OF_LIGHT / (2.0 * omega)
}

/// Shifts `d_left` (and `d_right` too when `both`) onto a joint resonance.
/// Two passes absorb the rounding of the first.
pub fn resonant_lengths(
    omega_left: f64,
    omega_right: f64,
    mut d_left: f64,
    mut d_right: f64,
    both: bool,
) -> anyhow::Result<(f64, f64)> {
    for _ in 0..2 {
        let theta = phase_from_geometry(omega_left, omega_right, d_left, d_right)?;
        if both {
            let shift = resonance_correction(theta, omega_left + omega_right);
            d_left += shift;
            d_right += shift;
        } else {
            d_left += resonance_correction(theta, omega_left);
        }
    }
    Ok((d_left, d_right))
}

fn parse_channel(name: &str) -> anyhow::Result<Channel> {
    match name.trim().to_ascii_uppercase().as_str() {
        "TT" => Ok(Channel::TT),
        "RR" => Ok(Channel::RR),
        "RT" => Ok(Channel::RT),
        "TR" => Ok(Channel::TR),
        _ => match Channel::from_detector_pair(name.trim()) {
            Some(c) => Ok(c),
            None => bail!("scan2d.channel = {name:?}: expected TT, RR, RT or TR"),
        },
    }
}

/// Rate of `outcome`; the transmission coincidence uses its cancellation-free
/// form.
pub fn outcome_rate(mirrors: &MirrorCoefficients, theta: f64, outcome: DetectionOutcome) -> f64 {
    if outcome == DetectionOutcome::transmission_coincidence() {
        transmission_coincidence_rate(mirrors, theta)
    } else {
        channel_rate(mirrors, theta, outcome)
    }
}

fn offsets(periods_in_units: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| periods_in_units * i as f64 / (steps - 1) as f64).collect()
}

/// Rate over the `(d_L, d_R)` plane. Offsets are in units of
/// [`half_wavelength`]; one phase period along an axis spans
/// `ω_sum/ω_axis` units.
pub fn scan2d(cfg: &Scan2d) -> anyhow::Result<Table> {
    let m = mirrors("scan2d", cfg.t)?;
    check_grid("scan2d", cfg.periods, cfg.steps)?;
    let outcome = DetectionOutcome::new(parse_channel(&cfg.channel)?, cfg.offset_m);
    let (d_left, d_right) = if cfg.resonant_reference {
        resonant_lengths(cfg.omega_left, cfg.omega_right, cfg.d_left, cfg.d_right, false).context("scan2d")?
    } else {
        phase_from_geometry(cfg.omega_left, cfg.omega_right, cfg.d_left, cfg.d_right).context("scan2d")?;
        (cfg.d_left, cfg.d_right)
    };
    let omega_sum = cfg.omega_left + cfg.omega_right;
    let unit = half_wavelength(omega_sum);
    let left = offsets(cfg.periods * omega_sum / cfg.omega_left, cfg.steps);
    let right = offsets(cfg.periods * omega_sum / cfg.omega_right, cfg.steps);

    let rows = (0..left.len() * right.len())
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (left[idx / right.len()], right[idx % right.len()]);
            let theta = phase_from_geometry(cfg.omega_left, cfg.omega_right, d_left + a * unit, d_right + b * unit)?;
            Ok(vec![Cell::Num(a), Cell::Num(b), Cell::Num(theta), Cell::Num(outcome_rate(&m, theta, outcome))])
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Table { columns: vec!["dL_offset", "dR_offset", "theta_rad", "rate"], rows })
}

/// Transmission coincidence of the single-cavity geometry (`d_L = d_R = d`)
/// for each listed `T`.
pub fn scan_single(cfg: &ScanSingle) -> anyhow::Result<Table> {
    ensure!(!cfg.t_values.is_empty(), "scan_single.t_values is empty");
    let all: Vec<MirrorCoefficients> =
        cfg.t_values.iter().map(|&t| mirrors("scan_single", t)).collect::<anyhow::Result<_>>()?;
    check_grid("scan_single", cfg.periods, cfg.steps)?;
    let d0 = if cfg.resonant_reference {
        resonant_lengths(cfg.omega_left, cfg.omega_right, cfg.d, cfg.d, true)?.0
    } else {
        phase_from_geometry(cfg.omega_left, cfg.omega_right, cfg.d, cfg.d)?;
        cfg.d
    };
    let unit = half_wavelength(cfg.omega_left + cfg.omega_right);
    let grid = offsets(cfg.periods, cfg.steps);
    let thetas = grid
        .par_iter()
        .map(|&x| {
            let d = d0 + x * unit;
            Ok((d, phase_from_geometry(cfg.omega_left, cfg.omega_right, d, d)?))
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .context("scan_single")?;
    let mut rows = Vec::with_capacity(all.len() * grid.len());
    for m in &all {
        for (&x, &(d, theta)) in grid.iter().zip(&thetas) {
            rows.push(vec![
                Cell::Num(m.t()),
                Cell::Num(x),
                Cell::Num(d),
                Cell::Num(theta),
                Cell::Num(transmission_coincidence_rate(m, theta)),
            ]);
        }
    }
    Ok(Table { columns: vec!["t_field", "d_offset", "d_meters", "theta_rad", "rate"], rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fp_biphoton::phase::distance_to_resonance;

    #[test]
    fn resonant_reference_lands_on_resonance() {
        let (dl, dr) = resonant_lengths(2.4e15, 2.3e15, 1e-2, 1.1e-2, false).unwrap();
        assert_eq!(dr, 1.1e-2);
        assert!(distance_to_resonance(phase_from_geometry(2.4e15, 2.3e15, dl, dr).unwrap()) < 1e-9);
        let (a, b) = resonant_lengths(2.4e15, 2.4e15, 3e-2, 3e-2, true).unwrap();
        assert_eq!(a, b);
        assert!(distance_to_resonance(phase_from_geometry(2.4e15, 2.4e15, a, b).unwrap()) < 1e-9);
    }

    #[test]
    fn channel_names() {
        assert_eq!(parse_channel("rr").unwrap(), Channel::RR);
        assert_eq!(parse_channel("L1R2").unwrap(), Channel::TR);
        assert!(parse_channel("XX").is_err());
    }

    #[test]
    fn small_scan2d() {
        let cfg = Scan2d { steps: 5, ..Scan2d::default() };
        let t = scan2d(&cfg).unwrap();
        assert_eq!(t.rows.len(), 25);
    }
}
