//! Bundled synthetic anomaly field.
//!
//! The repository ships a small band-limited temperature-anomaly-like map
//! on a 5 degree lat-lon grid so the gridded-field pipeline runs offline.
//! The field is a fixed closed-form coefficient triangle synthesized at the
//! cell centers; `data/anomaly_sample_5deg.csv` holds exactly the output of
//! [`render_sample_anomaly`], which a test verifies byte for byte.

use std::fmt::Write as _;

use sphere_heat::harmonics::eval_ylm;
use sphere_heat::{Coeffs, Degree, HarmonicCoeffs};

/// Degree cap of the bundled field.
pub const SAMPLE_DEGREE: usize = 8;

/// Grid spacing of the bundled field in degrees.
pub const SAMPLE_RESOLUTION: f64 = 5.0;

/// The coefficient triangle behind the bundled map: a deterministic mix of
/// all modes up to [`SAMPLE_DEGREE`] with power falling off near the cap.
pub fn sample_anomaly_coeffs() -> Coeffs {
    let mut c = HarmonicCoeffs::zeros(SAMPLE_DEGREE);
    for d in Degree::modes_up_to(SAMPLE_DEGREE) {
        let ell = d.ell() as f64;
        let damp = 1.0 / (1.0 + ell * ell);
        c.values_mut()[d.index()] = 3.0 * damp * (2.7 * (d.index() as f64 + 1.0)).sin();
    }
    c
}

/// Renders the bundled field as `lat_degrees,lon_degrees,value` rows at
/// cell centers, latitudes south to north, longitudes eastward from zero.
pub fn render_sample_anomaly() -> String {
    let c = sample_anomaly_coeffs();
    let n_lat = (180.0 / SAMPLE_RESOLUTION) as usize;
    let n_lon = (360.0 / SAMPLE_RESOLUTION) as usize;
    let mut text = String::new();
    for i in 0..n_lat {
        let lat = -90.0 + SAMPLE_RESOLUTION * (i as f64 + 0.5);
        let theta = (90.0 - lat).to_radians();
        for j in 0..n_lon {
            let lon = SAMPLE_RESOLUTION * j as f64;
            let phi = lon.to_radians();
            let value: f64 = c
                .iter()
                .map(|(d, coeff)| coeff * eval_ylm(d, theta, phi))
                .sum();
            writeln!(text, "{lat},{lon},{value}").unwrap();
        }
    }
    text
}
