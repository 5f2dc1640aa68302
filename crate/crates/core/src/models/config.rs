//! Plain-text model description: one `name = value` per line, `#` starts a
//! comment. The `model` key is mandatory; every other key defaults to the
//! published value.
//!
//! ```text
//! model = hh
//! I = 10
//! t_end = 50
//! ```

use super::{GateSign, HHParams, ModelKind, ModelSpec, SDSParams};
use crate::error::{Error, Result};

const HH_INITIAL_KEYS: [&str; 4] = ["V0", "m0", "n0", "h0"];
const SDS_INITIAL_KEYS: [&str; 9] = ["V1_0", "V2_0", "V3_0", "cCa0", "n0", "m0", "h0", "r0", "s0"];

fn hh_fields(p: &mut HHParams) -> [(&'static str, &mut f64); 8] {
    [
        ("C", &mut p.c),
        ("I", &mut p.i),
        ("g_K", &mut p.g_k),
        ("g_Na", &mut p.g_na),
        ("g_L", &mut p.g_l),
        ("V_K", &mut p.v_k),
        ("V_Na", &mut p.v_na),
        ("V_L", &mut p.v_l),
    ]
}

fn sds_fields(p: &mut SDSParams) -> [(&'static str, &mut f64); 19] {
    [
        ("C1", &mut p.c1),
        ("C2", &mut p.c2),
        ("C3", &mut p.c3),
        ("R_m1", &mut p.rm1),
        ("R_m2", &mut p.rm2),
        ("R_m3", &mut p.rm3),
        ("R_a2", &mut p.ra2),
        ("R_a3", &mut p.ra3),
        ("V_Na", &mut p.v_na),
        ("V_K", &mut p.v_k),
        ("V_Ca", &mut p.v_ca),
        ("V_L", &mut p.v_l),
        ("g_Na", &mut p.g_na),
        ("g_K", &mut p.g_k),
        ("g_Ca", &mut p.g_ca),
        ("g_KCa", &mut p.g_kca),
        ("I", &mut p.i),
        ("tau", &mut p.tau),
        ("B", &mut p.b),
    ]
}

/// Every numeric field of a spec, in file order.
fn numeric_fields(spec: &mut ModelSpec) -> Vec<(&'static str, &mut f64)> {
    match spec {
        ModelSpec::Hh {
            params,
            initial,
            t_end,
        } => {
            let mut v: Vec<_> = hh_fields(params).into_iter().collect();
            v.extend(HH_INITIAL_KEYS.into_iter().zip(initial.iter_mut()));
            v.push(("t_end", t_end));
            v
        }
        ModelSpec::Sds {
            params,
            initial,
            t_end,
        } => {
            let mut v: Vec<_> = sds_fields(params).into_iter().collect();
            v.extend(SDS_INITIAL_KEYS.into_iter().zip(initial.iter_mut()));
            v.push(("t_end", t_end));
            v
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

pub fn parse_config(text: &str) -> Result<ModelSpec> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected `name = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(config_err(line, "empty key"));
        }
        if entries
            .iter()
            .any(|(_, k, _): &(usize, &str, &str)| *k == key)
        {
            return Err(config_err(line, format!("duplicate key `{key}`")));
        }
        entries.push((line, key, value));
    }

    let (model_line, _, model) = entries
        .iter()
        .find(|(_, k, _)| *k == "model")
        .copied()
        .ok_or_else(|| config_err(0, "missing `model` line"))?;
    let kind = ModelKind::parse(model)
        .ok_or_else(|| config_err(model_line, format!("unknown model `{model}`")))?;
    let mut spec = ModelSpec::standard(kind);

    for &(line, key, value) in &entries {
        if key == "model" {
            continue;
        }
        if key == "gate_sign" {
            match &mut spec {
                ModelSpec::Sds { params, .. } => {
                    params.gate_sign = GateSign::parse(value).ok_or_else(|| {
                        config_err(
                            line,
                            format!("gate_sign must be standard or verbatim, got `{value}`"),
                        )
                    })?;
                    continue;
                }
                ModelSpec::Hh { .. } => {
                    return Err(config_err(line, "unknown key `gate_sign` for model hh"))
                }
            }
        }
        let mut fields = numeric_fields(&mut spec);
        let slot = fields.iter_mut().find(|(k, _)| *k == key).ok_or_else(|| {
            config_err(
                line,
                format!("unknown key `{key}` for model {}", kind.name()),
            )
        })?;
        let v: f64 = value
            .parse()
            .map_err(|_| config_err(line, format!("`{value}` is not a number")))?;
        if !v.is_finite() {
            return Err(config_err(line, format!("`{key}` must be finite")));
        }
        *slot.1 = v;
    }
    if !(spec.t_end() > 0.0) {
        return Err(config_err(0, "t_end must be positive"));
    }
    Ok(spec)
}

/// Writes every field; values use the shortest representation that parses
/// back to the same `f64`.
pub fn write_config(spec: &ModelSpec) -> String {
    let mut spec = spec.clone();
    let mut out = format!("model = {}\n", spec.kind().name());
    if let ModelSpec::Sds { params, .. } = &spec {
        out.push_str(&format!("gate_sign = {}\n", params.gate_sign.name()));
    }
    for (k, v) in numeric_fields(&mut spec) {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_all_digits() {
        for kind in [ModelKind::Hh, ModelKind::Sds] {
            let spec = ModelSpec::standard(kind);
            assert_eq!(parse_config(&write_config(&spec)).unwrap(), spec);
        }
        let mut spec = ModelSpec::standard(ModelKind::Sds);
        if let ModelSpec::Sds {
            params, initial, ..
        } = &mut spec
        {
            params.gate_sign = GateSign::Verbatim;
            initial[3] = 0.1 + 0.2;
        }
        assert_eq!(parse_config(&write_config(&spec)).unwrap(), spec);
    }

    #[test]
    fn overrides_and_comments() {
        let spec = parse_config("# test\nmodel = hh  # trailing\n\nI = 10\nt_end=5\n").unwrap();
        match spec {
            ModelSpec::Hh { params, t_end, .. } => {
                assert_eq!(params.i, 10.0);
                assert_eq!(params.g_k, 36.0);
                assert_eq!(t_end, 5.0);
            }
            _ => panic!("wrong model"),
        }
    }

    #[test]
    fn rejects_unknown_and_missing() {
        assert!(matches!(
            parse_config("model = hh\nfoo = 1\n"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(parse_config("I = 1\n"), Err(Error::Config { .. })));
        assert!(matches!(
            parse_config("model = hh\ngate_sign = standard\n"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("model = sds\nB = x\n"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("model = hh\nI = 1\nI = 2\n"),
            Err(Error::Config { line: 3, .. })
        ));
    }
}
