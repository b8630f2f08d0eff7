//! Round-trip float formatting for the CSV outputs.

/// Formats `x` with 17 significant digits, which is enough for any `f64` to
/// parse back to the identical bit pattern.
pub fn sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // log10 can be off by one right at powers of ten
        if s.parse::<f64>().ok() == Some(x) {
            return s;
        }
    }
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_and_scientific() {
        assert_eq!(sig17(0.0), "0");
        assert_eq!(sig17(0.5), "0.50000000000000000");
        assert_eq!(sig17(10.5), "10.500000000000000");
        assert!(sig17(1e-9).contains('e'));
    }

    proptest! {
        #[test]
        fn round_trips(x in proptest::num::f64::NORMAL) {
            prop_assert_eq!(sig17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
