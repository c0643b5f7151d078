use std::f64::consts::TAU;
use std::fs::File;
use std::path::Path;

use anyhow::{ensure, Context};
use fp_biphoton::spectral::{
    cavity_scan, spectral_readout, Abscissa, EnvelopeFunction, ScanMetadata, ScanResult, SpectralReadout,
};
use fp_biphoton::{MirrorCoefficients, SPEED_OF_LIGHT};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{EnvelopeShape, EnvelopeSpec, SpectralReadoutConfig, SpectralScan};
use crate::output::{Cell, Table};
use crate::scan::{check_grid, half_wavelength, mirrors, resonant_lengths};

/// Relative size of the discarded round trips when `l_max` is automatic.
const AUTO_TAIL: f64 = 1e-17;

fn synthetic_envelope(spec: &EnvelopeSpec, round_trip_time: f64) -> anyhow::Result<EnvelopeFunction> {
    let k = spec.samples_per_round_trip;
    ensure!(k >= 2, "spectral_scan.envelope.samples_per_round_trip = {k} must be at least 2");
    ensure!(spec.round_trips >= 1, "spectral_scan.envelope.round_trips must be at least 1");
    ensure!(!spec.components.is_empty(), "spectral_scan.envelope.components is empty");
    ensure!(
        spec.components.iter().all(|f| f.is_finite()),
        "spectral_scan.envelope.components must be finite"
    );
    let n = k * spec.round_trips;
    let step = round_trip_time / k as f64;
    let fsr = TAU / round_trip_time;
    let centre = 0.5 * (n - 1) as f64;
    let sigma = spec.width_round_trips * k as f64;
    if spec.shape == EnvelopeShape::Gaussian {
        ensure!(sigma > 0.0, "spectral_scan.envelope.width_round_trips must be positive");
    }
    let samples = (0..n)
        .map(|i| {
            let window = match spec.shape {
                EnvelopeShape::Flat => 1.0,
                EnvelopeShape::Gaussian => (-0.5 * ((i as f64 - centre) / sigma).powi(2)).exp(),
                EnvelopeShape::Narrow => f64::from(u8::from(i < k / 2)),
            };
            let tau = i as f64 * step;
            spec.components.iter().map(|f| Complex64::cis(f * fsr * tau)).sum::<Complex64>() * window
        })
        .collect();
    Ok(EnvelopeFunction::new(0.0, step, samples).context("spectral_scan.envelope")?.normalized())
}

fn auto_l_max(m: &MirrorCoefficients, envelope: &EnvelopeFunction, round_trip_time: f64) -> u64 {
    let cap = (envelope.len() as f64 * envelope.tau_step() / round_trip_time).ceil() as u64 + 1;
    let r4 = m.r4();
    if r4 == 0.0 {
        return 0;
    }
    let needed = (AUTO_TAIL.ln() / r4.ln()).ceil();
    if needed.is_finite() { (needed as u64).min(cap) } else { cap }
}

pub fn spectral_scan(cfg: &SpectralScan) -> anyhow::Result<Table> {
    let m = mirrors("spectral_scan", cfg.t)?;
    check_grid("spectral_scan", cfg.periods, cfg.steps)?;
    let (d0, _) = if cfg.resonant_reference {
        resonant_lengths(cfg.omega_left, cfg.omega_right, cfg.d, cfg.d, true)?
    } else {
        (cfg.d, cfg.d)
    };
    let omega_sum = cfg.omega_left + cfg.omega_right;
    let round_trip_time = 2.0 * d0 / SPEED_OF_LIGHT;
    let (envelope, id) = match &cfg.envelope_path {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("spectral_scan.envelope_path {}", path.display()))?;
            let env = EnvelopeFunction::read_csv(file)
                .with_context(|| format!("spectral_scan.envelope_path {}", path.display()))?;
            (env.normalized(), path.display().to_string())
        }
        None => (synthetic_envelope(&cfg.envelope, round_trip_time)?, format!("{:?}", cfg.envelope.shape).to_lowercase()),
    };
    let l_max = if cfg.l_max == 0 { auto_l_max(&m, &envelope, round_trip_time) } else { cfg.l_max };
    let unit = half_wavelength(omega_sum);
    let d_values: Vec<f64> =
        (0..cfg.steps).map(|i| d0 + unit * cfg.periods * i as f64 / (cfg.steps - 1) as f64).collect();
    let scan = cavity_scan(&envelope, &m, &d_values, omega_sum, l_max, &id).context("spectral_scan")?;
    Ok(scan_table(&scan))
}

fn scan_table(scan: &ScanResult) -> Table {
    let rows = (0..scan.rates.len())
        .map(|i| {
            let d = match scan.kind {
                Abscissa::CavityLength => Cell::Num(scan.abscissa[i]),
                Abscissa::Phase => Cell::Text(String::new()),
            };
            vec![d, Cell::Num(scan.theta[i]), Cell::Num(scan.rates[i])]
        })
        .collect();
    Table { columns: vec!["d_meters", "theta_rad", "rate"], rows }
}

/// Reads a `d_meters,theta_rad,rate` scan, skipping `#` comment lines.
pub fn read_scan(path: &Path, t_field: f64) -> anyhow::Result<ScanResult> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("spectral_readout.scan_path {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    ensure!(
        headers.iter().eq(["d_meters", "theta_rad", "rate"]),
        "{}: expected header d_meters,theta_rad,rate",
        path.display()
    );
    let (mut d, mut theta, mut rates) = (Vec::new(), Vec::new(), Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let num = |j: usize| -> anyhow::Result<f64> {
            record[j].parse::<f64>().with_context(|| format!("{} row {}: column {}", path.display(), i + 1, j + 1))
        };
        d.push(if record[0].is_empty() { None } else { Some(num(0)?) });
        theta.push(num(1)?);
        rates.push(num(2)?);
    }
    ensure!(rates.len() >= 3, "{}: need at least 3 scan rows", path.display());
    let kind = if d.iter().all(Option::is_some) { Abscissa::CavityLength } else { Abscissa::Phase };
    let abscissa = match kind {
        Abscissa::CavityLength => d.into_iter().flatten().collect(),
        Abscissa::Phase => theta.clone(),
    };
    Ok(ScanResult {
        kind,
        abscissa,
        theta,
        rates,
        metadata: ScanMetadata { t_field, l_max: 0, envelope_id: path.display().to_string() },
    })
}

#[derive(Debug, Serialize)]
pub struct ReadoutReport {
    pub free_spectral_range: f64,
    pub half_linewidth: f64,
    pub warnings: Vec<String>,
    pub peaks: Vec<PeakRow>,
}

#[derive(Debug, Serialize)]
pub struct PeakRow {
    pub frequency_offset: f64,
    pub fsr_fraction: f64,
    pub weight: f64,
    pub theta: f64,
}

impl ReadoutReport {
    fn from_readout(r: SpectralReadout, fsr: f64) -> Self {
        Self {
            free_spectral_range: fsr,
            half_linewidth: r.half_linewidth,
            warnings: r
                .warnings
                .iter()
                .map(|_| "offsets are only determined modulo the free spectral range".to_owned())
                .collect(),
            peaks: r
                .peaks
                .into_iter()
                .map(|p| PeakRow {
                    frequency_offset: p.frequency_offset,
                    fsr_fraction: p.frequency_offset / fsr,
                    weight: p.weight,
                    theta: p.theta,
                })
                .collect(),
        }
    }

    pub fn table(&self) -> Table {
        let rows = self
            .peaks
            .iter()
            .map(|p| vec![Cell::Num(p.frequency_offset), Cell::Num(p.fsr_fraction), Cell::Num(p.weight), Cell::Num(p.theta)])
            .collect();
        Table { columns: vec!["frequency_offset", "fsr_fraction", "weight", "theta_rad"], rows }
    }
}

pub fn readout(cfg: &SpectralReadoutConfig) -> anyhow::Result<ReadoutReport> {
    let m = mirrors("spectral_readout", cfg.t)?;
    let scan = read_scan(&cfg.scan_path, cfg.t)?;
    let fsr = match (cfg.free_spectral_range, scan.kind) {
        (Some(f), _) => f,
        (None, Abscissa::CavityLength) => std::f64::consts::PI * SPEED_OF_LIGHT / scan.abscissa[0],
        (None, Abscissa::Phase) => {
            anyhow::bail!("spectral_readout.free_spectral_range is required for a phase scan")
        }
    };
    ensure!(fsr.is_finite() && fsr > 0.0, "spectral_readout.free_spectral_range = {fsr} must be positive");
    let r = spectral_readout(&scan, &m, fsr).context("spectral_readout")?;
    Ok(ReadoutReport::from_readout(r, fsr))
}
