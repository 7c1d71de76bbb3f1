use serde::{Deserialize, Serialize};

use super::DispatchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub event_id: u64,
    pub value: f64,
    pub flagged: bool,
}

/// Shewhart chart with ±3σ limits over a window of fused scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlChart {
    pub window: usize,
    pub mean: f64,
    pub sigma: f64,
    pub ucl: f64,
    pub lcl: f64,
    pub points: Vec<ControlPoint>,
}

/// Population σ. A constant window yields `mean` equal to that constant
/// exactly (not a rounded average), so none of its points are flagged.
pub fn spc_chart(points: &[(u64, f64)]) -> Result<ControlChart, DispatchError> {
    let n = points.len();
    if n < 2 {
        return Err(DispatchError::Window(n));
    }
    let first = points[0].1;
    let (mean, sigma) = if points.iter().all(|p| p.1 == first) {
        (first, 0.0)
    } else {
        let mean = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let var = points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var.sqrt())
    };
    let ucl = mean + 3.0 * sigma;
    let lcl = mean - 3.0 * sigma;
    Ok(ControlChart {
        window: n,
        mean,
        sigma,
        ucl,
        lcl,
        points: points
            .iter()
            .map(|&(event_id, value)| ControlPoint {
                event_id,
                value,
                flagged: value > ucl || value < lcl,
            })
            .collect(),
    })
}
