//! Seed literals and flat `key = value` config files.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| Error::Config(format!("invalid seed `{s}`")))
}

/// Parses one `key = value` pair per line. Blank lines and lines starting
/// with `#` are skipped; a later key overrides an earlier one.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(parse_seed("20240601").unwrap(), 20_240_601);
        assert_eq!(parse_seed("0xff").unwrap(), 255);
        assert_eq!(parse_seed("0XFFFFFFFFFFFFFFFF").unwrap(), u64::MAX);
        assert!(parse_seed("-1").is_err());
        assert!(parse_seed("0x").is_err());
        assert!(parse_seed("12a").is_err());
    }

    #[test]
    fn config_lines() {
        let cfg = parse_config("# market\nM = 2\n\nsigma=0.3\nM = 3\n").unwrap();
        assert_eq!(cfg["M"], "3");
        assert_eq!(cfg["sigma"], "0.3");
        assert_eq!(cfg.len(), 2);
        assert!(parse_config("sigma 0.3").is_err());
        assert!(parse_config(" = 1").is_err());
    }
}
