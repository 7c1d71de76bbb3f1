use serde::{Deserialize, Serialize};

use super::{NormalizedIris, TransformError};

/// Per-cell weights forming the height of the weighted iris surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub version: String,
    pub angles: usize,
    pub radii: usize,
    pub sector_weights: Vec<f64>,
}

impl WeightMap {
    pub fn new(angles: usize, radii: usize, sector_weights: Vec<f64>) -> Result<Self, TransformError> {
        let map = WeightMap {
            version: "1".into(),
            angles,
            radii,
            sector_weights,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if self.sector_weights.len() != self.angles * self.radii {
            return Err(TransformError::Shape(format!(
                "weight map has {} cells, expected {}",
                self.sector_weights.len(),
                self.angles * self.radii
            )));
        }
        if self.sector_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(TransformError::Shape("weights must be finite and >= 0".into()));
        }
        if self.sector_weights.iter().all(|&w| w == 0.0) {
            return Err(TransformError::Shape("weight map is all zero".into()));
        }
        Ok(())
    }

    pub fn uniform(angles: usize, radii: usize) -> Self {
        WeightMap::new(angles, radii, vec![1.0; angles * radii]).expect("ones are valid")
    }

    /// Eight equal angular sectors, sector `s` covering rows with
    /// `floor(8 * a / angles) == s`.
    pub fn from_sectors(angles: usize, radii: usize, sectors: [f64; 8]) -> Result<Self, TransformError> {
        let weights = (0..angles)
            .flat_map(|a| std::iter::repeat_n(sectors[8 * a / angles], radii))
            .collect();
        WeightMap::new(angles, radii, weights)
    }

    fn max(&self) -> f64 {
        self.sector_weights.iter().copied().fold(0.0, f64::max)
    }
}

/// `grid * weights / max(weights)`, keeping values in `[0, 1]`.
pub fn apply_weight_surface(n: &NormalizedIris, w: &WeightMap) -> Result<NormalizedIris, TransformError> {
    if (n.angles, n.radii) != (w.angles, w.radii) {
        return Err(TransformError::Shape(format!(
            "grid {}x{} vs weights {}x{}",
            n.angles, n.radii, w.angles, w.radii
        )));
    }
    w.validate()?;
    let peak = w.max();
    let grid = n
        .grid
        .iter()
        .zip(&w.sector_weights)
        .map(|(v, wt)| v * wt / peak)
        .collect();
    NormalizedIris::new(n.angles, n.radii, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> NormalizedIris {
        let grid = (0..64 * 32).map(|i| (i % 97) as f64 / 96.0).collect();
        NormalizedIris::new(64, 32, grid).unwrap()
    }

    #[test]
    fn ones_are_neutral() {
        let n = ramp();
        assert_eq!(apply_weight_surface(&n, &WeightMap::uniform(64, 32)).unwrap(), n);
    }

    #[test]
    fn zero_sector_annihilates_rows() {
        let n = ramp();
        let mut sectors = [1.0; 8];
        sectors[2] = 0.0;
        let out = apply_weight_surface(&n, &WeightMap::from_sectors(64, 32, sectors).unwrap()).unwrap();
        for a in 16..24 {
            assert!(out.row(a).iter().all(|&v| v == 0.0));
        }
        assert_eq!(out.row(0), n.row(0));
    }

    #[test]
    fn differing_maps_differ_where_weights_differ() {
        let n = ramp();
        let mut s = [1.0; 8];
        let a = apply_weight_surface(&n, &WeightMap::from_sectors(64, 32, s).unwrap()).unwrap();
        s[5] = 0.5;
        let b = apply_weight_surface(&n, &WeightMap::from_sectors(64, 32, s).unwrap()).unwrap();
        for i in 0..n.grid.len() {
            let in_sector = (i / 32) * 8 / 64 == 5;
            if in_sector && n.grid[i] != 0.0 {
                assert_ne!(a.grid[i], b.grid[i]);
            } else if !in_sector {
                assert_eq!(a.grid[i], b.grid[i]);
            }
        }
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(WeightMap::new(2, 2, vec![0.0; 4]).is_err());
        assert!(WeightMap::new(2, 2, vec![1.0, -1.0, 1.0, 1.0]).is_err());
        assert!(matches!(
            apply_weight_surface(&ramp(), &WeightMap::uniform(32, 32)),
            Err(TransformError::Shape(_))
        ));
    }
}
