use serde::{Deserialize, Serialize};

use super::{NormalizedIris, TransformError};

/// Radial intensity slices of the normalized iris at chosen angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyProfile {
    pub angle_indices: Vec<usize>,
    pub profiles: Vec<Vec<f64>>,
}

impl TomographyProfile {
    /// Mean absolute second difference along the profiles.
    pub fn mean_curvature(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for p in &self.profiles {
            for w in p.windows(3) {
                sum += (w[2] - 2.0 * w[1] + w[0]).abs();
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

pub fn tomography_profiles(n: &NormalizedIris, angle_indices: &[usize]) -> Result<TomographyProfile, TransformError> {
    let profiles = angle_indices
        .iter()
        .map(|&a| {
            if a >= n.angles {
                Err(TransformError::Index {
                    index: a,
                    angles: n.angles,
                })
            } else {
                Ok(n.row(a).to_vec())
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(TomographyProfile {
        angle_indices: angle_indices.to_vec(),
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_grid_constant_profiles() {
        let n = NormalizedIris::constant(8, 4, 0.25).unwrap();
        let t = tomography_profiles(&n, &[0, 3, 7]).unwrap();
        assert!(t.profiles.iter().flatten().all(|&v| v == 0.25));
        assert_eq!(t.mean_curvature(), 0.0);
    }

    #[test]
    fn all_angles_reassemble_grid() {
        let grid: Vec<f64> = (0..32).map(|i| i as f64 / 31.0).collect();
        let n = NormalizedIris::new(8, 4, grid.clone()).unwrap();
        let all: Vec<usize> = (0..8).collect();
        let t = tomography_profiles(&n, &all).unwrap();
        assert_eq!(t.profiles.concat(), grid);
    }

    #[test]
    fn index_out_of_range() {
        let n = NormalizedIris::constant(8, 4, 0.0).unwrap();
        assert_eq!(
            tomography_profiles(&n, &[8]),
            Err(TransformError::Index { index: 8, angles: 8 })
        );
    }
}
