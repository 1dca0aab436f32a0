//! Footprint scaling of parallel interconnects: 2D crossbar versus 3D
//! volumetric routing.
//!
//! In a crossbar the ports line up along rows and columns, so area grows with
//! the product of the channel counts. Arranging ports as a 2D array on
//! dedicated planes and wiring through the volume makes area linear in the
//! channel count, at the cost of a height proportional to the input count
//! (one wiring plane per input).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Crossbar2D,
    Volumetric3D,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingModel {
    pub mode: ScalingMode,
    /// Port pitch in micrometers.
    pub port_pitch: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub area_mm2: f64,
    /// Wiring depth for the volumetric model; zero for the planar crossbar.
    pub height_um: f64,
}

/// Substrate footprint for N_I inputs and N_O outputs. One pitch cell is
/// counted per port, so a square 3D array of N ports has side sqrt(N) * pitch.
pub fn footprint(model: &ScalingModel, n_inputs: u64, n_outputs: u64) -> Result<Footprint> {
    if !(model.port_pitch > 0.0) {
        return Err(Error::InvalidParameter("port pitch must be positive".into()));
    }
    if n_inputs < 1 || n_outputs < 1 {
        return Err(Error::InvalidParameter("need at least one port per side".into()));
    }
    let pitch = model.port_pitch;
    Ok(match model.mode {
        ScalingMode::Crossbar2D => Footprint {
            area_mm2: (n_inputs as f64 * pitch) * (n_outputs as f64 * pitch) * 1e-6,
            height_um: 0.0,
        },
        ScalingMode::Volumetric3D => Footprint {
            area_mm2: n_inputs.max(n_outputs) as f64 * pitch * pitch * 1e-6,
            height_um: n_inputs as f64 * pitch,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: u64,
    pub area_2d_mm2: f64,
    pub area_3d_mm2: f64,
    pub height_3d_um: f64,
}

/// Evaluate both models at N_I = N_O = N over the given channel counts.
pub fn scaling_report(port_pitch: f64, ns: &[u64]) -> Result<Vec<ScalingRow>> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("channel count range is empty".into()));
    }
    ns.iter()
        .map(|&n| {
            let flat = footprint(
                &ScalingModel { mode: ScalingMode::Crossbar2D, port_pitch },
                n,
                n,
            )?;
            let vol = footprint(
                &ScalingModel { mode: ScalingMode::Volumetric3D, port_pitch },
                n,
                n,
            )?;
            Ok(ScalingRow {
                n,
                area_2d_mm2: flat.area_mm2,
                area_3d_mm2: vol.area_mm2,
                height_3d_um: vol.height_um,
            })
        })
        .collect()
}

pub fn scaling_report_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("n,area_2d_mm2,area_3d_mm2,height_3d_um\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n, r.area_2d_mm2, r.area_3d_mm2, r.height_3d_um
        ));
    }
    out
}

/// Least-squares slope of ln(y) against ln(x). None for fewer than two
/// points or non-positive values.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumetric_full_scale_footprint() {
        let f = footprint(
            &ScalingModel { mode: ScalingMode::Volumetric3D, port_pitch: 20.0 },
            225,
            529,
        )
        .unwrap();
        assert!((f.area_mm2 - 0.2116).abs() < 1e-12);
        assert!((f.area_mm2.sqrt() * 1000.0 - 460.0).abs() < 1e-9); // 0.46 mm side
        assert_eq!(f.height_um, 225.0 * 20.0);
    }

    #[test]
    fn crossbar_unit_cell() {
        let f = footprint(
            &ScalingModel { mode: ScalingMode::Crossbar2D, port_pitch: 20.0 },
            1,
            1,
        )
        .unwrap();
        assert!((f.area_mm2 - 400.0 * 1e-6).abs() < 1e-15);
        assert_eq!(f.height_um, 0.0);
    }

    #[test]
    fn area_ratio_grows_linearly() {
        // 2D area is N^2, 3D is N, so their ratio is proportional to N.
        let pitch = 20.0;
        let ratio = |n: u64| {
            let flat = footprint(
                &ScalingModel { mode: ScalingMode::Crossbar2D, port_pitch: pitch },
                n,
                n,
            )
            .unwrap();
            let vol = footprint(
                &ScalingModel { mode: ScalingMode::Volumetric3D, port_pitch: pitch },
                n,
                n,
            )
            .unwrap();
            flat.area_mm2 / vol.area_mm2
        };
        for n in [10u64, 100, 1000] {
            assert!((ratio(n) - n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn fitted_slopes() {
        let rows = scaling_report(20.0, &[16, 64, 256]).unwrap();
        let p2: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.area_2d_mm2)).collect();
        let p3: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.area_3d_mm2)).collect();
        assert!((fit_loglog_slope(&p2).unwrap() - 2.0).abs() < 1e-9);
        assert!((fit_loglog_slope(&p3).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_row_report_has_no_fit() {
        let rows = scaling_report(20.0, &[81]).unwrap();
        assert_eq!(rows.len(), 1);
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.area_2d_mm2)).collect();
        assert!(fit_loglog_slope(&pts).is_none());
        assert!(scaling_report(20.0, &[]).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = scaling_report(20.0, &[16]).unwrap();
        let csv = scaling_report_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,area_2d_mm2,area_3d_mm2,height_3d_um");
        assert!(lines.next().unwrap().starts_with("16,"));
    }
}
