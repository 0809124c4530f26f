//! Canonical `key=value` line form for level descriptors.
//!
//! One level per line, fields separated by single spaces, keys in a fixed
//! order per environment. Lines starting with `#` and blank lines are ignored
//! by [`parse_corpus`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    pub fn parse(line: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::decode(format!("level field `{tok}` is not key=value")))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::decode(format!("duplicate level field `{k}`")));
            }
        }
        Ok(Fields { map })
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::decode(format!("level line missing `{key}`")))
    }

    pub fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::decode(format!("level field `{key}` has invalid value `{raw}`")))
    }

    /// Fails if the line carries keys outside `allowed`.
    pub fn expect_only(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::decode(format!("unknown level field `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Parses a corpus file with one level per line.
pub fn parse_corpus<L, F>(text: &str, parse: F) -> Result<Vec<L>>
where
    F: Fn(&str) -> Result<L>,
{
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(parse)
        .collect()
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn string_to_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::decode(format!("invalid bit `{c}`"))),
        })
        .collect()
}
