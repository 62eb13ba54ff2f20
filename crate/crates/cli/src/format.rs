//! Number rendering for reports: 12 significant digits, trailing zeros
//! dropped, exponent form outside `1e-5 ..= 1e12`. Vectors and tables are
//! printed relative to their largest entry, so parts below `1e-12` of it
//! show as `0`.

use num_complex::Complex64;

const DIGITS: usize = 12;

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..DIGITS as i32).contains(&exp) {
        format!("{}e{exp}", trim(mantissa))
    } else {
        let decimals = (DIGITS as i32 - 1 - exp) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    }
}

pub fn complex(z: Complex64) -> String {
    match (z.re == 0.0, z.im == 0.0) {
        (_, true) => num(z.re),
        (true, false) => format!("{}i", num(z.im)),
        (false, false) => {
            let sign = if z.im < 0.0 { '-' } else { '+' };
            format!("{}{sign}{}i", num(z.re), num(z.im.abs()))
        }
    }
}

const RELATIVE_FLOOR: f64 = 1e-12;

/// [`complex`] with parts below `1e-12 * scale` shown as zero.
pub fn complex_scaled(z: Complex64, scale: f64) -> String {
    let floor = RELATIVE_FLOOR * scale;
    let clip = |v: f64| if v.abs() < floor { 0.0 } else { v };
    complex(Complex64::new(clip(z.re), clip(z.im)))
}

pub fn scale<'a>(entries: impl IntoIterator<Item = &'a Complex64>) -> f64 {
    entries.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn vector<'a>(entries: impl IntoIterator<Item = &'a Complex64> + Clone) -> String {
    let s = scale(entries.clone());
    let parts: Vec<String> = entries.into_iter().map(|z| complex_scaled(*z, s)).collect();
    format!("[{}]", parts.join(", "))
}
