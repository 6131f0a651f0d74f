//! C99-style hexadecimal floating point text (`-0x1.8p+1` for -3.0), used by
//! the model file so weights survive a text round trip bit for bit.

pub fn format(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let mut digits = format!("{mantissa:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() {
        String::new()
    } else {
        format!(".{digits}")
    };
    format!("{sign}0x{lead}{frac}p{exp:+}")
}

/// Parses the output of [`format`] (and other normalized or subnormal hex
/// floats with at most 13 fraction digits).
pub fn parse(s: &str) -> Option<f64> {
    let s = s.trim();
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))?;
    let (mant, exp) = rest.split_once(['p', 'P'])?;
    let exp: i64 = exp.parse().ok()?;
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if frac_part.len() > 13 || int_part.is_empty() {
        return None;
    }
    let lead = u64::from_str_radix(int_part, 16).ok()?;
    let frac = if frac_part.is_empty() {
        0
    } else {
        u64::from_str_radix(frac_part, 16).ok()? << (4 * (13 - frac_part.len()))
    };
    let sign_bit = (negative as u64) << 63;
    let bits = match lead {
        0 if frac == 0 => sign_bit,
        0 if exp == -1022 => sign_bit | frac,
        1 if (-1022..=1023).contains(&exp) => sign_bit | (((exp + 1023) as u64) << 52) | frac,
        _ => return None,
    };
    Some(f64::from_bits(bits))
}
