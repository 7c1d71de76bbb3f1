use serde::{Deserialize, Serialize};

/// Selected coefficient values with their flat positions (ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub positions: Vec<usize>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn negated(&self) -> FeatureVector {
        FeatureVector {
            positions: self.positions.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Sign bits of the selected coefficients plus a validity mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrisCode {
    pub bits: Vec<bool>,
    pub mask: Vec<bool>,
}

impl IrisCode {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn full_mask(bits: Vec<bool>) -> Self {
        let mask = vec![true; bits.len()];
        IrisCode { bits, mask }
    }
}

/// Fraction of the RMS magnitude below which a coefficient is masked out.
const MASK_FLOOR: f64 = 0.01;

/// `bit = value >= 0`; `mask = |value| >= 0.01 * rms(values)`. An all-zero
/// vector has an empty mask.
pub fn encode_code(f: &FeatureVector) -> IrisCode {
    let n = f.values.len().max(1) as f64;
    let rms = (f.values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let bits = f.values.iter().map(|&v| v >= 0.0).collect();
    let mask = if rms > 0.0 {
        f.values.iter().map(|v| v.abs() >= MASK_FLOOR * rms).collect()
    } else {
        vec![false; f.values.len()]
    };
    IrisCode { bits, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            positions: (0..values.len()).collect(),
            values,
        }
    }

    #[test]
    fn signs_and_mask() {
        let code = encode_code(&fv(vec![1.0, -2.0, 3.0]));
        assert_eq!(code.bits, vec![true, false, true]);
        assert_eq!(code.mask, vec![true; 3]);
        let zero = encode_code(&fv(vec![0.0; 5]));
        assert_eq!(zero.mask, vec![false; 5]);
        let tiny = encode_code(&fv(vec![100.0, 1e-6, -100.0]));
        assert_eq!(tiny.mask, vec![true, false, true]);
    }

    proptest! {
        #[test]
        fn negation_complements_unmasked_bits(values in proptest::collection::vec(-10.0f64..10.0, 1..200)) {
            let f = fv(values);
            let a = encode_code(&f);
            let b = encode_code(&f.negated());
            prop_assert_eq!(&a.mask, &b.mask);
            for i in 0..a.len() {
                if a.mask[i] {
                    prop_assert_ne!(a.bits[i], b.bits[i]);
                }
            }
        }
    }
}
