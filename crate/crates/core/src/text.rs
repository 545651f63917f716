//! Number formatting for CSV output.

/// Shortest representation that parses back to the same `f64`, switching to
/// exponent notation outside `[1e-4, 1e15)`.
pub fn number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-7, 2.9121085853844875e-7, 1e12, 1e20, -3.3e-300, 0.1 + 0.2] {
            let s = number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(number(1e-7), "1e-7");
        assert_eq!(number(1e6), "1000000");
        assert_eq!(number(0.25), "0.25");
    }
}
