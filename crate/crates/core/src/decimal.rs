//! Exact base-10 numbers as scaled integers.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// `mantissa * 10^-scale`.
#[derive(Debug, Clone, Copy)]
pub struct Decimal {
    mantissa: i128,
    scale: u32,
}

const MAX_DIGITS: usize = 30;

impl Decimal {
    pub fn new(mantissa: i128, scale: u32) -> Self {
        Self { mantissa, scale }
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Parses `[+-]digits[.digits]`. Exponents, separators and non-ASCII
    /// digits are rejected.
    pub fn parse(text: &str) -> Option<Self> {
        let s = text.trim();
        let (negative, body) = match s.as_bytes().first()? {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let significant = int_part.trim_start_matches('0').len() + frac_part.len();
        if significant > MAX_DIGITS {
            return None;
        }
        let mut mantissa: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            mantissa = mantissa * 10 + i128::from(b - b'0');
        }
        if negative {
            mantissa = -mantissa;
        }
        Some(Self {
            mantissa,
            scale: frac_part.len() as u32,
        })
    }

    /// Mantissa at `scale`, or `None` if that would drop non-zero digits.
    pub fn mantissa_at(&self, scale: u32) -> Option<i128> {
        if scale >= self.scale {
            10i128
                .checked_pow(scale - self.scale)
                .and_then(|f| self.mantissa.checked_mul(f))
        } else {
            let f = 10i128.checked_pow(self.scale - scale)?;
            (self.mantissa % f == 0).then_some(self.mantissa / f)
        }
    }

    /// Strips trailing fractional zeros.
    pub fn normalized(&self) -> Self {
        let mut d = *self;
        while d.scale > 0 && d.mantissa % 10 == 0 {
            d.mantissa /= 10;
            d.scale -= 1;
        }
        d
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.normalized(), other.normalized());
        a.mantissa == b.mantissa && a.scale == b.scale
    }
}

impl Eq for Decimal {}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_scaled(self.mantissa, self.scale))
    }
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s).ok_or_else(|| format!("not a plain decimal number: {s:?}"))
    }
}

/// Renders `mantissa * 10^-scale` with exactly `scale` fraction digits.
pub fn format_scaled(mantissa: i128, scale: u32) -> String {
    let digits = mantissa.unsigned_abs().to_string();
    let scale = scale as usize;
    let mut out = String::with_capacity(digits.len() + 3);
    if mantissa < 0 {
        out.push('-');
    }
    if scale == 0 {
        out.push_str(&digits);
    } else if digits.len() > scale {
        let (i, f) = digits.split_at(digits.len() - scale);
        out.push_str(i);
        out.push('.');
        out.push_str(f);
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', scale - digits.len()));
        out.push_str(&digits);
    }
    out
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct DecimalVisitor;

        impl Visitor<'_> for DecimalVisitor {
            type Value = Decimal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal number or numeric string")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
                Decimal::parse(v).ok_or_else(|| E::custom(format!("invalid decimal {v:?}")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Decimal, E> {
                Ok(Decimal::new(i128::from(v), 0))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Decimal, E> {
                Ok(Decimal::new(i128::from(v), 0))
            }

            // f64 Display is the shortest string that round-trips, which is
            // the literal the user wrote for any value with <= 15 digits.
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Decimal, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite decimal"));
                }
                self.visit_str(&v.to_string())
            }
        }

        deserializer.deserialize_any(DecimalVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        let d = Decimal::parse("-4.416").unwrap();
        assert_eq!((d.mantissa(), d.scale()), (-4416, 3));
        assert_eq!(d.to_string(), "-4.416");
        assert_eq!(Decimal::parse("00.67").unwrap().to_string(), "0.67");
        assert_eq!(Decimal::parse(".5").unwrap().to_string(), "0.5");
        assert_eq!(format_scaled(7, 3), "0.007");
    }

    #[test]
    fn rejects_non_plain_numbers() {
        for s in ["", "-", ".", "1e3", "1,5", "17:57", "0x10", "1.2.3", "BPM"] {
            assert!(Decimal::parse(s).is_none(), "{s}");
        }
    }

    #[test]
    fn equality_ignores_trailing_zeros() {
        assert_eq!(Decimal::parse("76").unwrap(), Decimal::parse("76.0").unwrap());
        assert_eq!(Decimal::parse("0.67").unwrap(), Decimal::parse("00.670").unwrap());
        assert_ne!(Decimal::parse("36.9").unwrap(), Decimal::parse("35.9").unwrap());
    }

    #[test]
    fn rescaling_is_exact() {
        let d = Decimal::parse("9.99").unwrap();
        assert_eq!(d.mantissa_at(3), Some(9990));
        assert_eq!(d.mantissa_at(1), None);
        assert_eq!(Decimal::parse("2.50").unwrap().mantissa_at(1), Some(25));
    }

    #[test]
    fn deserializes_numbers_and_strings() {
        let v: Vec<Decimal> = serde_json::from_str(r#"[0.001, "9.999", 3, -2.5]"#).unwrap();
        let s: Vec<String> = v.iter().map(ToString::to_string).collect();
        assert_eq!(s, ["0.001", "9.999", "3", "-2.5"]);
    }
}
