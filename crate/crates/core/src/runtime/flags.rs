use crate::extended::FloatKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// `|v - t| <= abs_epsilon`.
    Epsilon,
    /// `|v - t| / |t| <= rel_epsilon`, falling back to the absolute test when `t == 0`.
    RelativeEpsilon,
    /// Consistent if either test passes.
    Both,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "epsilon" => Some(Strategy::Epsilon),
            "relative-epsilon" | "relative_epsilon" => Some(Strategy::RelativeEpsilon),
            "both" => Some(Strategy::Both),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuntimeFlags {
    pub rel_epsilon_f32: f64,
    pub rel_epsilon_f64: f64,
    pub abs_epsilon_f32: f64,
    pub abs_epsilon_f64: f64,
    pub strategy: Strategy,
    pub halt_on_error: bool,
    pub check_loads: bool,
    /// Report load-check mismatches instead of silently resuming.
    pub warn_on_load_mismatch: bool,
    pub max_warnings: Option<u64>,
    pub dedup: bool,
}

impl Default for RuntimeFlags {
    fn default() -> Self {
        RuntimeFlags {
            rel_epsilon_f32: 1e-5,
            rel_epsilon_f64: 1e-5,
            abs_epsilon_f32: 2f64.powi(-32),
            abs_epsilon_f64: 2f64.powi(-64),
            strategy: Strategy::Both,
            halt_on_error: false,
            check_loads: false,
            warn_on_load_mismatch: false,
            max_warnings: None,
            dedup: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlagError {
    #[error("malformed option '{0}': expected name=value")]
    Malformed(String),
    #[error("invalid value '{value}' for {name}")]
    InvalidValue { name: String, value: String },
    #[error("unknown option '{0}'")]
    Unknown(String),
}

impl RuntimeFlags {
    pub fn rel_epsilon(&self, kind: FloatKind) -> f64 {
        match kind {
            FloatKind::F32 => self.rel_epsilon_f32,
            FloatKind::F64 => self.rel_epsilon_f64,
        }
    }

    pub fn abs_epsilon(&self, kind: FloatKind) -> f64 {
        match kind {
            FloatKind::F32 => self.abs_epsilon_f32,
            FloatKind::F64 => self.abs_epsilon_f64,
        }
    }

    pub fn validate(&self) -> Result<(), FlagError> {
        let eps = [
            ("rel_epsilon", self.rel_epsilon_f32),
            ("rel_epsilon", self.rel_epsilon_f64),
            ("abs_epsilon", self.abs_epsilon_f32),
            ("abs_epsilon", self.abs_epsilon_f64),
        ];
        for (name, v) in eps {
            if v.is_nan() || v < 0.0 {
                return Err(FlagError::InvalidValue { name: name.into(), value: v.to_string() });
            }
        }
        Ok(())
    }

    /// Applies one `name=value` setting. Returns `Ok(false)` if the name is
    /// not a runtime flag so callers can route it elsewhere.
    pub fn apply(&mut self, name: &str, value: &str) -> Result<bool, FlagError> {
        let name = name.replace('-', "_");
        let bad = || FlagError::InvalidValue { name: name.clone(), value: value.to_string() };
        let eps = || -> Result<f64, FlagError> {
            let v: f64 = value.parse().map_err(|_| bad())?;
            if v.is_nan() || v < 0.0 {
                return Err(bad());
            }
            Ok(v)
        };
        match name.as_str() {
            "rel_epsilon" => {
                let v = eps()?;
                self.rel_epsilon_f32 = v;
                self.rel_epsilon_f64 = v;
            }
            "rel_epsilon_f32" => self.rel_epsilon_f32 = eps()?,
            "rel_epsilon_f64" => self.rel_epsilon_f64 = eps()?,
            "abs_epsilon" => {
                let v = eps()?;
                self.abs_epsilon_f32 = v;
                self.abs_epsilon_f64 = v;
            }
            "abs_epsilon_f32" => self.abs_epsilon_f32 = eps()?,
            "abs_epsilon_f64" => self.abs_epsilon_f64 = eps()?,
            "strategy" => self.strategy = Strategy::parse(value).ok_or_else(bad)?,
            "halt_on_error" => self.halt_on_error = parse_bool(value).ok_or_else(bad)?,
            "check_loads" => self.check_loads = parse_bool(value).ok_or_else(bad)?,
            "warn_on_load_mismatch" => self.warn_on_load_mismatch = parse_bool(value).ok_or_else(bad)?,
            "dedup" => self.dedup = parse_bool(value).ok_or_else(bad)?,
            "max_warnings" => {
                let n: u64 = value.parse().map_err(|_| bad())?;
                self.max_warnings = (n > 0).then_some(n);
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Splits an `NSAN_OPTIONS`-style string: comma-separated `name=value`
/// pairs. A bare `name` means `name=1`.
pub fn parse_options(text: &str) -> Result<Vec<(String, String)>, FlagError> {
    let mut out = Vec::new();
    for part in text.split([',', ':']) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => out.push((k.trim().to_string(), v.trim().to_string())),
            Some(_) => return Err(FlagError::Malformed(part.to_string())),
            None => {
                if part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    out.push((part.to_string(), "1".to_string()));
                } else {
                    return Err(FlagError::Malformed(part.to_string()));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let f = RuntimeFlags::default();
        assert_eq!(f.rel_epsilon(FloatKind::F32), 1e-5);
        assert_eq!(f.abs_epsilon(FloatKind::F64), 2f64.powi(-64));
        assert_eq!(f.strategy, Strategy::Both);
        assert!(!f.check_loads && !f.halt_on_error && f.dedup);
    }

    #[test]
    fn options_string() {
        let opts = parse_options("rel_epsilon=1e-3,halt_on_error=1, check_loads").unwrap();
        let mut f = RuntimeFlags::default();
        for (k, v) in &opts {
            assert!(f.apply(k, v).unwrap());
        }
        assert_eq!(f.rel_epsilon_f64, 1e-3);
        assert!(f.halt_on_error && f.check_loads);
        assert!(!f.apply("seed", "3").unwrap());
        assert!(f.apply("rel_epsilon", "-1").is_err());
        assert!(parse_options("=3").is_err());
    }
}
