/// Binary expansion of a bounded integer `0..=ub`.
///
/// Coefficients are `1, 2, ..., 2^(rho-1)` followed by the remainder
/// `ub - (2^rho - 1)` when it is nonzero, with `rho = floor(log2(ub + 1))`.
/// Every value in `0..=ub` is reachable and nothing above `ub` is.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerEncoding {
    upper_bound: i64,
    coefficients: Vec<i64>,
}

impl IntegerEncoding {
    pub fn upper_bound(&self) -> i64 {
        self.upper_bound
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coefficients
    }

    pub fn bits(&self) -> usize {
        self.coefficients.len()
    }

    pub fn decode(&self, bits: &[bool]) -> i64 {
        self.coefficients
            .iter()
            .zip(bits)
            .filter(|(_, &b)| b)
            .map(|(c, _)| c)
            .sum()
    }
}

pub fn encode_bounded(ub: i64) -> IntegerEncoding {
    assert!(ub >= 0, "upper bound must be non-negative");
    let rho = (ub as u64 + 1).ilog2();
    let mut coefficients: Vec<i64> = (0..rho).map(|b| 1i64 << b).collect();
    let rest = ub - ((1i64 << rho) - 1);
    if rest > 0 {
        coefficients.push(rest);
    }
    IntegerEncoding {
        upper_bound: ub,
        coefficients,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn image(enc: &IntegerEncoding) -> BTreeSet<i64> {
        let k = enc.bits();
        (0u64..1 << k)
            .map(|m| {
                let bits: Vec<bool> = (0..k).map(|b| m >> b & 1 == 1).collect();
                enc.decode(&bits)
            })
            .collect()
    }

    #[test]
    fn examples() {
        assert_eq!(encode_bounded(12).coefficients(), &[1, 2, 4, 5]);
        assert_eq!(encode_bounded(1).coefficients(), &[1]);
        assert!(encode_bounded(0).coefficients().is_empty());
        assert_eq!(encode_bounded(15).coefficients(), &[1, 2, 4, 8]);
        assert_eq!(encode_bounded(20).coefficients(), &[1, 2, 4, 8, 5]);
    }

    #[test]
    fn twelve_is_surjective() {
        assert_eq!(image(&encode_bounded(12)), (0..=12).collect());
    }

    #[test]
    fn surjective_up_to_64() {
        for ub in 0..=64 {
            assert_eq!(image(&encode_bounded(ub)), (0..=ub).collect(), "ub = {ub}");
        }
    }
}
