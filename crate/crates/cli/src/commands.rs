use std::collections::BTreeMap;

use bkp_tau::fermionic::{hirota_residual, oracle_sum};
use bkp_tau::integrals::{braden_first_term, braden_g, grand_z, integral_i, integral_i5, GrandSpec, QuadratureSpec};
use bkp_tau::partitions::{delta_star, enumerate_dp, enumerate_dp2, enumerate_dp_prime, StrictPartition};
use bkp_tau::polyring::{Family, GradedPoly};
use bkp_tau::qfunctions::{q_at_tinf, q_rows, q_schur};
use bkp_tau::tausums::{
    model_distribution, sample, specialize_dmatrix, specialize_pair_coeffs, sum_series, sum_series_at,
    sum_series_tinf, Number, Truncation,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    GrandzConfig, IntegralConfig, OracleConfig, SampleConfig, SpecializeConfig, SpecializeTarget, SumConfig,
};
use crate::error::CliError;
use crate::output::{num, Report};

/// Agreement required between the fermionic oracle and the series.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionSet {
    Dp,
    DpPrime,
    Dp2,
}

#[derive(Serialize)]
struct PartitionsArgs {
    set: PartitionSet,
    max_part: u32,
    max_length: usize,
}

pub fn partitions(set: PartitionSet, max_part: u32, max_length: usize) -> Result<Report, CliError> {
    let list = match set {
        PartitionSet::Dp => enumerate_dp(max_part, max_length),
        PartitionSet::DpPrime => enumerate_dp_prime(max_part, max_length),
        PartitionSet::Dp2 => enumerate_dp2(max_part),
    };
    let rows: Vec<Vec<String>> = list
        .iter()
        .map(|p| vec![p.to_string(), p.weight().to_string(), p.len().to_string(), delta_star(p).to_string()])
        .collect();
    let result: Vec<_> = list
        .iter()
        .map(|p| json!({"partition": p, "weight": p.weight(), "delta_star": delta_star(p).to_string()}))
        .collect();
    Ok(Report::new("partitions", &PartitionsArgs { set, max_part, max_length })?
        .result(json!({"count": list.len(), "partitions": result}))
        .table(vec!["partition", "weight", "length", "delta_star"], rows))
}

#[derive(Serialize)]
struct QfnArgs {
    partition: StrictPartition,
    cap: u32,
    family: &'static str,
}

fn poly_rows(p: &GradedPoly) -> Vec<Vec<String>> {
    p.terms().map(|(m, c)| vec![m.to_string(), c.to_string()]).collect()
}

pub fn qfn(partition: &str, cap: u32, tbar: bool) -> Result<Report, CliError> {
    let alpha: StrictPartition = partition.parse()?;
    let mut q = q_schur(&alpha, cap)?.poly;
    if tbar {
        q = q.swap_families();
    }
    let family = if tbar { "tbar" } else { "t" };
    Ok(Report::new("qfn", &QfnArgs { partition: alpha.clone(), cap, family })?
        .result(json!({
            "partition": alpha,
            "polynomial": q,
            "display": q.to_string(),
            "value_at_t_infinity": q_at_tinf(&alpha).to_string(),
        }))
        .table(vec!["monomial", "coefficient"], poly_rows(&q)))
}

pub fn sum(cfg: &SumConfig) -> Result<Report, CliError> {
    let report = Report::new("sum", cfg)?;
    if cfg.closed_form {
        let v = sum_series_tinf(&cfg.data.closed_form()?, &cfg.truncation)?;
        return Ok(report
            .result(json!({"value": v, "value_f64": v.to_f64()}))
            .table(vec!["series", "value", "value_f64"], vec![vec![
                format!("{:?}", cfg.data.series),
                v.to_string(),
                num(v.to_f64()),
            ]]));
    }
    let series = cfg.data.series()?;
    match &cfg.times {
        Some(times) => {
            times.validate()?;
            let t: Vec<(u32, f64)> = times.t.iter().map(|(k, v)| (*k, *v)).collect();
            let tb: Vec<(u32, f64)> = times.tbar.iter().map(|(k, v)| (*k, *v)).collect();
            let v = sum_series_at(&series, &cfg.truncation, &t, &tb)?;
            Ok(report
                .result(json!({"value": v}))
                .table(vec!["series", "value"], vec![vec![format!("{:?}", cfg.data.series), num(v)]]))
        }
        None => {
            let p = sum_series(&series, &cfg.truncation)?;
            Ok(report
                .result(json!({"polynomial": p, "display": p.to_string(), "cap": p.cap()}))
                .table(vec!["monomial", "coefficient"], poly_rows(&p)))
        }
    }
}

pub fn specialize(cfg: &SpecializeConfig) -> Result<Report, CliError> {
    let report = Report::new("specialize", cfg)?;
    if cfg.target == SpecializeTarget::S5 {
        let w = cfg.weights.clone().ok_or_else(|| CliError::Validation("target S5 needs `weights`".into()))?;
        w.validate()?;
        let d = specialize_dmatrix(&w, cfg.max_n);
        let rows = d.entries.iter().map(|((n, m), v)| vec![n.to_string(), m.to_string(), v.to_string()]).collect();
        return Ok(report.result(json!({"dmatrix": d})).table(vec!["n", "m", "value"], rows));
    }
    let target = cfg.spec_target()?;
    let pc = specialize_pair_coeffs(&target, cfg.max_n);
    let mut rows: Vec<Vec<String>> = pc
        .matrix
        .iter()
        .map(|((n, m), c)| vec![n.to_string(), m.to_string(), c.scale.to_string(), poly_text(&c.poly)])
        .collect();
    rows.extend(pc.vector.iter().map(|(n, c)| vec![n.to_string(), String::new(), c.scale.to_string(), poly_text(&c.poly)]));
    Ok(report.result(json!({"pair_coefficients": pc})).table(vec!["n", "m", "scale", "polynomial"], rows))
}

fn poly_text(p: &Option<GradedPoly>) -> String {
    p.as_ref().map(|p| p.to_string()).unwrap_or_else(|| "1".into())
}

pub fn sample_cmd(cfg: &SampleConfig, seed: Option<u64>) -> Result<Report, CliError> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let model = cfg.model()?;
    let t: Vec<(u32, Number)> = cfg.t.iter().map(|(k, v)| (*k, v.clone())).collect();
    let tb: Vec<(u32, Number)> = cfg.tbar.iter().map(|(k, v)| (*k, v.clone())).collect();
    let table = model_distribution(&model, &cfg.truncation, &t, &tb)?;
    let draws = sample(&table, cfg.seed, cfg.count);
    let mut counts: BTreeMap<&StrictPartition, usize> = BTreeMap::new();
    for d in &draws {
        *counts.entry(d).or_default() += 1;
    }
    let rows: Vec<Vec<String>> = table
        .entries
        .iter()
        .map(|e| {
            vec![
                e.partition.to_string(),
                e.weight.to_string(),
                e.probability.to_string(),
                num(e.probability.to_f64()),
                counts.get(&e.partition).copied().unwrap_or(0).to_string(),
            ]
        })
        .collect();
    let entries: Vec<_> = table
        .entries
        .iter()
        .map(|e| {
            json!({
                "partition": e.partition,
                "weight": e.weight,
                "probability": e.probability,
                "count": counts.get(&e.partition).copied().unwrap_or(0),
            })
        })
        .collect();
    let exact_sum = table.exact_sum().map(|s| s.to_string());
    Ok(Report::new("sample", &cfg)?
        .result(json!({"total": table.total, "exact_probability_sum": exact_sum, "entries": entries}))
        .table(vec!["partition", "weight", "probability", "probability_f64", "count"], rows))
}

pub fn oracle(cfg: &OracleConfig) -> Result<(Report, bool), CliError> {
    cfg.times.validate()?;
    let series = cfg.data.series()?;
    let t: Vec<(u32, f64)> = cfg.times.t.iter().map(|(k, v)| (*k, *v)).collect();
    let tb: Vec<(u32, f64)> = cfg.times.tbar.iter().map(|(k, v)| (*k, *v)).collect();
    let fermionic = oracle_sum(&series, cfg.window, &t, &tb)?;
    let trunc = Truncation::new(cfg.window, cfg.window as usize, 0);
    let combinatorial = sum_series_at(&series, &trunc, &t, &tb)?;
    let diff = (fermionic - combinatorial).abs();
    let ok = diff <= ORACLE_TOLERANCE * combinatorial.abs().max(1.0);
    let report = Report::new("oracle", cfg)?
        .tolerance(ORACLE_TOLERANCE)
        .result(json!({"oracle": fermionic, "series": combinatorial, "difference": diff, "agrees": ok}))
        .table(
            vec!["series", "oracle", "series_value", "difference", "agrees"],
            vec![vec![format!("{:?}", cfg.data.series), num(fermionic), num(combinatorial), num(diff), ok.to_string()]],
        );
    Ok((report, ok))
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    Partition(String),
    Sum(SumConfig),
    Poly(GradedPoly),
}

#[derive(Serialize)]
struct HirotaArgs<'a> {
    tau: &'a TauSource,
    cap: u32,
}

/// Residual of `Q_α`, of a summed series or of a given polynomial, and
/// whether it vanishes.
pub fn hirota(source: &TauSource, cap: u32) -> Result<(Report, bool), CliError> {
    let tau = match source {
        TauSource::Partition(p) => q_schur(&p.parse()?, cap)?.poly,
        TauSource::Sum(cfg) => {
            let mut trunc = cfg.truncation;
            trunc.degree_cap = cap;
            sum_series(&cfg.data.series()?, &trunc)?
        }
        TauSource::Poly(p) => p.clone().with_cap(cap),
    };
    let r = hirota_residual(&tau)?;
    let report = Report::new("hirota", &HirotaArgs { tau: source, cap })?
        .result(json!({"residual": r, "vanishes": r.is_zero(), "exact_through_degree": r.cap()}))
        .table(vec!["monomial", "coefficient"], poly_rows(&r));
    Ok((report, r.is_zero()))
}

pub fn integral(cfg: &IntegralConfig) -> Result<Report, CliError> {
    let spec = cfg.ensemble.grand_spec()?;
    let qs = &cfg.ensemble.quadrature;
    let rep = match &spec {
        GrandSpec::Single { id, measure, times, kernel } => {
            integral_i(*id, cfg.n, measure, times, kernel.as_ref(), qs, cfg.tolerance)?
        }
        GrandSpec::Bilinear { measure, times1, times2 } => {
            integral_i5(cfg.n, measure, times1, times2, qs, cfg.tolerance)?
        }
    };
    Ok(Report::new("integral", cfg)?
        .tolerance(cfg.tolerance)
        .result(serde_json::to_value(&rep)?)
        .table(
            vec!["id", "n", "value", "imag", "refined", "difference", "converged", "node_count"],
            vec![vec![
                cfg.ensemble.id.to_string(),
                cfg.n.to_string(),
                num(rep.re),
                num(rep.im),
                num(rep.refined_re),
                num(rep.difference),
                rep.converged.to_string(),
                rep.nodes.to_string(),
            ]],
        ))
}

pub fn grandz(cfg: &GrandzConfig) -> Result<Report, CliError> {
    let spec = cfg.ensemble.grand_spec()?;
    let z = grand_z(&spec, cfg.mu, cfg.n_max, &cfg.ensemble.quadrature, cfg.tolerance)?;
    Ok(Report::new("grandz", cfg)?
        .tolerance(cfg.tolerance)
        .result(serde_json::to_value(&z)?)
        .table(
            vec!["id", "n_max", "mu", "value", "imag", "tail_estimate", "converged", "node_count"],
            vec![vec![
                cfg.ensemble.id.to_string(),
                cfg.n_max.to_string(),
                num(cfg.mu),
                num(z.re),
                num(z.im),
                num(z.tail_estimate),
                z.converged.to_string(),
                cfg.ensemble.quadrature.node_count().to_string(),
            ]],
        ))
}

#[derive(Serialize)]
struct BradenArgs {
    r: f64,
    sign: i32,
    n_max: usize,
    quadrature: QuadratureSpec,
    tolerance: f64,
}

pub fn braden(r: f64, sign: i32, n_max: usize, qs: QuadratureSpec, tolerance: f64) -> Result<Report, CliError> {
    let g = braden_g(r, sign, n_max, &qs, tolerance)?;
    let mut partial = 0.0;
    let rows: Vec<Vec<String>> = g
        .terms
        .iter()
        .enumerate()
        .map(|(n, t)| {
            partial += t;
            vec![n.to_string(), num(*t), num(partial)]
        })
        .collect();
    Ok(Report::new("braden", &BradenArgs { r, sign, n_max, quadrature: qs, tolerance })?
        .tolerance(tolerance)
        .result(json!({
            "value": g.value,
            "terms": g.terms,
            "converged": g.converged,
            "first_term_bessel": braden_first_term(r),
        }))
        .table(vec!["n", "term", "partial_sum"], rows))
}

/// `q_n` rows, used by `qfn --rows`.
pub fn qrows(max_n: u32, cap: u32) -> Result<Report, CliError> {
    let rows = q_rows(max_n, cap, Family::T);
    let table = rows.iter().enumerate().map(|(n, p)| vec![n.to_string(), p.to_string()]).collect();
    #[derive(Serialize)]
    struct Args {
        rows: u32,
        cap: u32,
    }
    Ok(Report::new("qfn", &Args { rows: max_n, cap })?
        .result(json!({"rows": rows}))
        .table(vec!["n", "polynomial"], table))
}
