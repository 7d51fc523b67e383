//! CSV output with fixed column layouts.
//!
//! Every number is printed with 12 significant digits so repeated runs
//! produce identical bytes.

use std::io::{self, Write};

use crate::design::SweepResult;
use crate::spectral::SpectralResponse;
use crate::time::TimeTrace;

pub const TRACE_COLUMNS: &str = "t_us,re_in,im_in,re_out,im_out,p_out";
pub const SPECTRUM_COLUMNS: &str = "omega_rad_per_us,re_r,im_r,abs_r2";
pub const SWEEP_COLUMNS: &str = "delta_mhz,echo_time_ns,eta_first,eta_analytic,reflected_fraction";

/// `%.12g`-style formatting.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Round to the value that [`fmt_sig`] prints.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().unwrap_or(x)
    } else {
        x
    }
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &TimeTrace) -> io::Result<()> {
    writeln!(w, "{TRACE_COLUMNS}")?;
    for ((t, i), o) in trace.times().zip(&trace.a_in).zip(&trace.a_out) {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_sig(t),
            fmt_sig(i.re),
            fmt_sig(i.im),
            fmt_sig(o.re),
            fmt_sig(o.im),
            fmt_sig(o.norm_sqr())
        )?;
    }
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(mut w: W, resp: &SpectralResponse) -> io::Result<()> {
    writeln!(w, "{SPECTRUM_COLUMNS}")?;
    for (omega, r) in resp.omegas.iter().zip(&resp.reflection) {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_sig(*omega),
            fmt_sig(r.re),
            fmt_sig(r.im),
            fmt_sig(r.norm_sqr())
        )?;
    }
    Ok(())
}

/// Missing echoes are written as `nan`.
pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult) -> io::Result<()> {
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in &sweep.records {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_sig(r.delta_mhz),
            fmt_sig(r.echo_time.map_or(f64::NAN, |t| t * 1e3)),
            fmt_sig(r.eta_first),
            fmt_sig(r.eta_analytic),
            fmt_sig(r.reflected_fraction)
        )?;
    }
    Ok(())
}
