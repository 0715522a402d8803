//! Browser bindings for the latency explorer: point evaluation and the two
//! figure-style curves, returned as JSON strings for the canvas renderer in
//! `static/index.html`.

use wasm_bindgen::prelude::*;

use fogpipe::analysis::{
    classify_regime, d2d_threshold, is_d2d_beneficial, min_pipelined_ndt, ndt_vs_mu_breakpoints,
    pipelining_gain_bound,
};
use fogpipe::model::SystemParams;
use fogpipe::scheme::synthesize_serial_policy;

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "null".to_string()
    }
}

fn params(mu: f64, r_f: f64, r_d: f64) -> Result<SystemParams, JsValue> {
    SystemParams::new(mu, r_f, r_d, 2).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Closed-form summary of a single parameter point.
#[wasm_bindgen]
pub fn eval_point(mu: f64, r_f: f64, r_d: f64) -> Result<String, JsValue> {
    let p = params(mu, r_f, r_d)?;
    let ndt = min_pipelined_ndt(&p);
    let regime = classify_regime(&p);
    let threshold = d2d_threshold(&p);
    let (serial, triple) = match synthesize_serial_policy(&p) {
        Ok(policy) => (
            num(policy.ndt.sum()),
            format!(
                "[{}, {}, {}]",
                num(policy.ndt.delta_f),
                num(policy.ndt.delta_e),
                num(policy.ndt.delta_d)
            ),
        ),
        Err(_) => ("null".to_string(), "null".to_string()),
    };
    Ok(format!(
        "{{\"ndt\": {}, \"regime\": \"{}\", \"tie\": {}, \"threshold_raw\": {}, \"threshold\": {}, \
         \"beneficial\": {}, \"gain_bound\": {}, \"serial_achievable\": {}, \"triple\": {}}}",
        num(ndt.value()),
        regime.label(),
        regime.tie,
        num(threshold.raw),
        num(threshold.clamped),
        is_d2d_beneficial(p.mu, p.r_f),
        num(pipelining_gain_bound(p.mu)),
        serial,
        triple,
    ))
}

/// Minimum pipelined NDT against the cache size, with the zero-D2D baseline
/// and the exact breakpoint knots.
#[wasm_bindgen]
pub fn ndt_mu_curve(r_f: f64, r_d: f64, steps: u32) -> Result<String, JsValue> {
    let steps = steps.max(2);
    let mut points = String::from("[");
    for i in 0..=steps {
        let mu = f64::from(i) / f64::from(steps);
        let p = params(mu, r_f, r_d)?;
        let base = params(mu, r_f, 0.0)?;
        if i > 0 {
            points.push(',');
        }
        points.push_str(&format!(
            "[{}, {}, {}]",
            num(mu),
            num(min_pipelined_ndt(&p).value()),
            num(min_pipelined_ndt(&base).value())
        ));
    }
    points.push(']');
    let knots = match ndt_vs_mu_breakpoints(r_f, r_d) {
        Ok(curve) => {
            let items: Vec<String> = curve
                .knots
                .iter()
                .map(|k| format!("[{}, {}]", num(k.mu), num(k.ndt.value())))
                .collect();
            format!("[{}]", items.join(","))
        }
        Err(_) => "[]".to_string(),
    };
    Ok(format!("{{\"points\": {points}, \"knots\": {knots}}}"))
}

/// Pipelined and serial-achievable NDT against the D2D rate, with the
/// threshold where the pipelined curve goes flat.
#[wasm_bindgen]
pub fn ndt_rd_curve(mu: f64, r_f: f64, r_d_max: f64, steps: u32) -> Result<String, JsValue> {
    let steps = steps.max(2);
    let span = if r_d_max > 0.0 { r_d_max } else { 1.0 };
    let threshold = d2d_threshold(&params(mu, r_f, 0.0)?).clamped;
    let mut points = String::from("[");
    for i in 0..=steps {
        let r_d = span * f64::from(i) / f64::from(steps);
        let p = params(mu, r_f, r_d)?;
        let serial = match synthesize_serial_policy(&p) {
            Ok(policy) => num(policy.ndt.sum()),
            Err(_) => "null".to_string(),
        };
        if i > 0 {
            points.push(',');
        }
        points.push_str(&format!(
            "[{}, {}, {}]",
            num(r_d),
            num(min_pipelined_ndt(&p).value()),
            serial
        ));
    }
    points.push(']');
    Ok(format!(
        "{{\"points\": {points}, \"threshold\": {}}}",
        num(threshold)
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_point_is_valid_json_shape() {
        let s = eval_point(0.5, 0.25, 0.0).unwrap();
        assert!(s.contains("\"ndt\": 1.2"));
        assert!(s.contains("EdgeD2DLimited"));
    }

    #[test]
    fn curves_have_expected_lengths() {
        let s = ndt_mu_curve(0.25, 0.125, 10).unwrap();
        assert!(s.contains("\"knots\""));
        let s = ndt_rd_curve(0.5, 0.25, 1.0, 10).unwrap();
        assert!(s.contains("\"threshold\": 0.25"));
    }
}
