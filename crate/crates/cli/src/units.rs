//! SI quantities with an optional one-letter scale suffix.

/// Decimal exponent for a suffix letter. `M` is mega, `m` milli.
fn exponent(suffix: char) -> Option<i32> {
    Some(match suffix {
        'f' => -15,
        'p' => -12,
        'n' => -9,
        'u' => -6,
        'm' => -3,
        'k' => 3,
        'M' => 6,
        'G' => 9,
        _ => return None,
    })
}

/// Parse `1p`, `10M`, `5k`, `2.5e-3`, `0.7` and the like.
pub fn parse_quantity(text: &str) -> Result<f64, String> {
    let s = text.trim();
    let bad = || format!("cannot parse {text:?} as a quantity");
    let value: f64 = match s.chars().last().and_then(|c| exponent(c).map(|e| (c, e))) {
        Some((c, e)) => {
            let number = s[..s.len() - c.len_utf8()].trim();
            if number.contains(['e', 'E']) {
                number.parse::<f64>().map_err(|_| bad())? * 10f64.powi(e)
            } else {
                // Folding the suffix into the literal keeps `50n` exactly 50e-9.
                format!("{number}e{e}").parse().map_err(|_| bad())?
            }
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if !value.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn suffixes() {
        assert_eq!(parse_quantity("1p").unwrap(), 1e-12);
        assert_eq!(parse_quantity("10M").unwrap(), 10e6);
        assert_eq!(parse_quantity("5k").unwrap(), 5e3);
        assert_eq!(parse_quantity(" 50n ").unwrap(), 50e-9);
        assert_eq!(parse_quantity("2.5u").unwrap(), 2.5e-6);
        assert_eq!(parse_quantity("3m").unwrap(), 3e-3);
        assert_eq!(parse_quantity("1G").unwrap(), 1e9);
        assert_eq!(parse_quantity("43f").unwrap(), 43e-15);
        assert_eq!(parse_quantity("0.7").unwrap(), 0.7);
        assert_eq!(parse_quantity("3.75e-13").unwrap(), 3.75e-13);
        assert_eq!(parse_quantity("-1").unwrap(), -1.0);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "p", "ek", "1e3.5k", "1x", "1 kOhm", "abc", "1e", "inf", "NaN"] {
            assert!(parse_quantity(s).is_err(), "{s}");
        }
    }

    proptest! {
        #[test]
        fn exponent_format_roundtrips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(parse_quantity(&format!("{x:e}")).unwrap(), x);
        }
    }
}
