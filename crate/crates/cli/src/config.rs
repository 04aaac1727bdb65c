use serde::Serialize;

use fincrash::{Error, Result};

/// Provenance block written into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: &'static str, args: &impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: serde_json::to_value(args).expect("arguments serialize"),
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Single-line form for `#` comment headers.
    pub fn comment(&self) -> String {
        format!("config {}", serde_json::to_string(self).expect("config serializes"))
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Parses `A:B:STEP` into `A, A + STEP, ...` up to `B` inclusive.
pub fn parse_amplitudes(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<f64> = match parts.len() {
        1 | 3 => parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| invalid("amplitudes", format!("cannot parse {spec:?}; expected A:B:STEP")))?,
        _ => return Err(invalid("amplitudes", format!("expected A:B:STEP, got {spec:?}"))),
    };
    if nums.iter().any(|x| !x.is_finite()) {
        return Err(invalid("amplitudes", "values must be finite"));
    }
    if let [a] = nums[..] {
        if a < 0.0 {
            return Err(invalid("amplitudes", "must be nonnegative"));
        }
        return Ok(vec![a]);
    }
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if a < 0.0 || b < a {
        return Err(invalid("amplitudes", format!("need 0 <= A <= B, got {a}:{b}")));
    }
    if step <= 0.0 {
        return Err(invalid("amplitudes", "STEP must be positive"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    if count > 1_000_000 {
        return Err(invalid("amplitudes", "more than a million rows"));
    }
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

/// Comma-separated list of positive integers.
pub fn parse_orders(spec: &str) -> Result<Vec<usize>> {
    let orders = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| invalid("orders", format!("cannot parse {spec:?}")))?;
    if orders.is_empty() || orders.contains(&0) {
        return Err(invalid("orders", "need one or more orders >= 1"));
    }
    Ok(orders)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitude_grid() {
        let a = parse_amplitudes("0:80:1").unwrap();
        assert_eq!(a.len(), 81);
        assert_eq!(a[80], 80.0);
        assert_eq!(parse_amplitudes("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_amplitudes("5").unwrap(), vec![5.0]);
        assert!(parse_amplitudes("3:1:1").is_err());
        assert!(parse_amplitudes("0:1:0").is_err());
        assert!(parse_amplitudes("0:1").is_err());
        assert!(parse_amplitudes("x:1:1").is_err());
    }

    #[test]
    fn orders() {
        assert_eq!(parse_orders("10,30, 50").unwrap(), vec![10, 30, 50]);
        assert!(parse_orders("0,3").is_err());
        assert!(parse_orders("").is_err());
    }
}
