//! Orchestration: one function per mode, each returning a JSON report that
//! embeds the resolved configuration, plus any CSV artifacts.
//!
//! Exit statuses: `0` success, `1` a verification failed (a witness is
//! included in the report and the message), `2` the configuration was
//! rejected.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chern::{
    coefficient_scan, integrality_check, solenoid_preimage, solenoid_pullback, suspension_ranks,
    ElementSpec,
};
use crate::cohomology::{koszul_complex, verify_containment_for_module, CohomologyError, Verdict};
use crate::exact::{format_rat, pfaffian, rat_determinant, Rat};
use crate::frequency::{even_subsets, frequency_group, DecompositionTerm, FrequencyError};
use crate::odometer::{level_module, z_i_mu, SubgroupChain};
use crate::random::{random_chain, random_integral_element, random_skew, rng_from_seed};
use crate::spectral::{
    butterfly, detect_gaps, label_gaps, GapVerdict, LabelParams, LabelledGap, SpectralError,
};

pub use config::{ConfigError, Mode, RunConfig};

pub const ARTIFACT_NAME: &str = env!("CARGO_PKG_NAME");
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GAUGE: &str = "landau: (U_k psi)(x) = exp(2 pi i sum_{j<k} theta_jk x_j) psi(x - e_k)";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<SpectralError> for RunError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::IncommensurateFlux { .. }
            | SpectralError::IncommensuratePotential { .. }
            | SpectralError::PotentialLength { .. }
            | SpectralError::Dimension(_)
            | SpectralError::EmptyVolume
            | SpectralError::TooFewVolumes => RunError::Config(ConfigError::Invalid {
                field: "/spectral".into(),
                message: e.to_string(),
            }),
            other => RunError::Compute(other.to_string()),
        }
    }
}

impl From<FrequencyError> for RunError {
    fn from(e: FrequencyError) -> Self {
        RunError::Compute(e.to_string())
    }
}

impl From<CohomologyError> for RunError {
    fn from(e: CohomologyError) -> Self {
        RunError::Compute(e.to_string())
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(_) | RunError::Io { .. } => 1,
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    /// Paths relative to the output directory, with contents.
    pub artifacts: Vec<(String, String)>,
    /// One-line summary; carries the witness on failure.
    pub message: String,
}

impl RunOutcome {
    /// Writes every artifact under `dir` (created if needed).
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, contents) in &self.artifacts {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(written)
    }
}

fn fr(x: &Rat) -> String {
    format_rat(x)
}

fn one_based(subset: &[usize]) -> Vec<usize> {
    subset.iter().map(|i| i + 1).collect()
}

fn envelope(config: &RunConfig, result: Value, passed: bool) -> Value {
    json!({
        "artifact": { "name": ARTIFACT_NAME, "version": ARTIFACT_VERSION },
        "mode": config.mode.name(),
        "config": config,
        "status": if passed { "ok" } else { "fail" },
        "result": result,
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Runs `config` and assembles its report and artifacts in memory.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let (result, passed, message, mut extra) = match config.mode {
        Mode::Freq => run_freq(config)?,
        Mode::Coh => run_coh(config)?,
        Mode::Chern => run_chern(config)?,
        Mode::Spectrum => run_spectrum(config)?,
        Mode::Verify => run_verify(config)?,
        Mode::Butterfly => run_butterfly(config)?,
    };
    let report = envelope(config, result, passed);
    let mut artifacts = vec![(config.outputs.report.clone(), pretty(&report))];
    artifacts.append(&mut extra);
    Ok(RunOutcome {
        exit_code: if passed { 0 } else { 1 },
        report,
        artifacts,
        message,
    })
}

type ModeResult = (Value, bool, String, Vec<(String, String)>);

fn run_freq(config: &RunConfig) -> Result<ModeResult, RunError> {
    let chain = config.chain()?;
    let theta = config.theta()?;
    let level = config.level.unwrap_or(chain.depth());
    let group = frequency_group(&theta, &chain, level)?;
    let result = json!({
        "theta": theta.upper().iter().map(fr).collect::<Vec<_>>(),
        "chain_id": config.chain.id(config.seed),
        "level": level,
        "contributions": group.contributions.iter().map(|c| json!({
            "I": one_based(&c.subset),
            "pfaffian": fr(&c.pfaffian),
            "z_i_mu_generator": fr(c.z_i_mu.generator()),
        })).collect::<Vec<_>>(),
        "total_generator": fr(group.total.generator()),
    });
    let msg = format!(
        "frequency group at level {level}: ({})Z",
        fr(group.total.generator())
    );
    Ok((result, true, msg, Vec::new()))
}

#[derive(Serialize)]
struct ContainmentRow {
    level: usize,
    #[serde(rename = "I")]
    subset: Vec<usize>,
    lhs_generator: String,
    rhs_generator: String,
    verdict: Verdict,
    lifts: bool,
}

fn containment_rows(
    chain: &SubgroupChain,
    max_level: usize,
) -> Result<Vec<ContainmentRow>, RunError> {
    let mut rows = Vec::new();
    for level in 1..=max_level {
        let module = level_module(chain, level).map_err(|e| RunError::Compute(e.to_string()))?;
        let complex = koszul_complex(&module)?;
        for subset in even_subsets(chain.p()) {
            let r = verify_containment_for_module(&complex, level, &subset)?;
            rows.push(ContainmentRow {
                level,
                subset: one_based(&subset),
                lhs_generator: fr(r.lhs.generator()),
                rhs_generator: fr(r.rhs.generator()),
                verdict: r.verdict,
                lifts: r.lifts,
            });
        }
    }
    Ok(rows)
}

fn first_failure(rows: &[ContainmentRow]) -> Option<String> {
    rows.iter().find(|r| r.verdict == Verdict::Fail).map(|r| {
        format!(
            "containment FAIL at level {} I={:?}: ({})Z not in ({})Z",
            r.level, r.subset, r.lhs_generator, r.rhs_generator
        )
    })
}

fn run_coh(config: &RunConfig) -> Result<ModeResult, RunError> {
    let chain = config.chain()?;
    let max_level = config.level.unwrap_or(chain.depth());
    let rows = containment_rows(&chain, max_level)?;
    let witness = first_failure(&rows);
    let passed = witness.is_none();
    let result = json!({
        "chain_id": config.chain.id(config.seed),
        "p": chain.p(),
        "levels": max_level,
        "rows": rows,
        "witness": witness,
    });
    let msg = witness.unwrap_or_else(|| format!("all {} containment checks PASS", rows.len()));
    Ok((result, passed, msg, Vec::new()))
}

fn run_chern(config: &RunConfig) -> Result<ModeResult, RunError> {
    let spec = config
        .element
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid {
            field: "/element".into(),
            message: "chern mode needs an element".into(),
        })?;
    let a = spec.to_element().map_err(|e| ConfigError::Invalid {
        field: "/element".into(),
        message: e.to_string(),
    })?;
    let report = integrality_check(&a);
    let scan = coefficient_scan(&a);
    let agree = (report.verdict == Verdict::Pass) == scan.is_none();
    let mut result = json!({
        "element": ElementSpec::from_element(&a),
        "verdict": report.verdict,
        "witness": report.witness,
        "probes_evaluated": report.probes_evaluated,
        "coefficient_scan": scan.as_ref().map(|(i, c)| json!({"indices": i, "coeff": fr(c)})),
        "characterizations_agree": agree,
        "suspension": (a.n() >= 1).then(|| suspension_ranks(a.n())).map(|s| json!({
            "multiplicities": s.multiplicities,
            "even_k_rank": s.even_k_rank(),
            "odd_k_rank": s.odd_k_rank(),
        })),
    });
    let mut ok = agree;
    if let Some(degrees) = &config.degrees {
        let invalid = |e: crate::chern::ExteriorError| ConfigError::Invalid {
            field: "/degrees".into(),
            message: e.to_string(),
        };
        let pulled = solenoid_pullback(&a, degrees).map_err(invalid)?;
        let pulled_verdict = integrality_check(&pulled).verdict;
        let preserved = report.verdict == Verdict::Fail || pulled_verdict == Verdict::Pass;
        let round_trip = solenoid_preimage(&pulled, degrees).map_err(invalid)?;
        ok &= preserved;
        result["pullback"] = json!({
            "degrees": degrees,
            "element": ElementSpec::from_element(&pulled),
            "verdict": pulled_verdict,
            "integrality_preserved": preserved,
            "preimage_recovers_input": report.verdict == Verdict::Fail || round_trip.as_ref() == Some(&a),
        });
    }
    let msg = match &report.witness {
        None => "integrality PASS".to_string(),
        Some(w) => format!(
            "integrality FAIL: subtorus {:?}, pairs {:?}, value {}",
            w.subtorus,
            w.pairs,
            fr(&w.value)
        ),
    };
    Ok((result, ok, msg, Vec::new()))
}

fn decomposition_json(terms: &[DecompositionTerm]) -> Vec<Value> {
    terms
        .iter()
        .filter(|t| !t.multiplier.is_zero())
        .map(|t| {
            json!({
                "I": one_based(&t.subset),
                "multiplier": t.multiplier.to_string(),
                "pfaffian": fr(&t.pfaffian),
                "z_i_mu_generator": fr(&t.z_i_mu_generator),
            })
        })
        .collect()
}

fn gap_row(g: &LabelledGap) -> Value {
    json!({
        "E_lo": g.gap.e_lo,
        "E_hi": g.gap.e_hi,
        "ids": g.gap.ids,
        "ids_by_volume": g.gap.ids_by_volume.iter().map(|(l, r)| json!([l, fr(r)])).collect::<Vec<_>>(),
        "label": g.label.as_ref().map(fr),
        "verdict": g.verdict,
        "label_stable": g.label_stable,
        "decomposition": g.membership.as_ref().map(|m| decomposition_json(&m.decomposition)),
    })
}

fn theta_12(config: &RunConfig) -> Result<Rat, RunError> {
    let theta = config.theta()?;
    Ok(if theta.p() >= 2 {
        theta.entry(0, 1).clone()
    } else {
        Rat::zero()
    })
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub const GAPS_CSV_HEADER: [&str; 10] = [
    "theta_num",
    "theta_den",
    "L_list",
    "E_lo",
    "E_hi",
    "ids",
    "label_num",
    "label_den",
    "verdict",
    "level",
];
pub const BUTTERFLY_CSV_HEADER: [&str; 4] = ["theta_num", "theta_den", "band_lo", "band_hi"];

/// Gap detection, labelling and membership for the configured operator.
pub fn mgl_verify(config: &RunConfig) -> Result<(Value, Vec<LabelledGap>), RunError> {
    let spec = config.hamiltonian()?;
    let chain = config.chain()?;
    let params = config.gap_params();
    let s = &config.spectral;
    let gaps = detect_gaps(&spec, &s.volumes, &params)?;
    let label_params = LabelParams {
        eps: s.eps,
        q_max: s.q_max,
        max_level: s.max_level.unwrap_or(chain.depth()),
    };
    let labelled = label_gaps(&gaps, &spec.theta, &chain, &label_params)?;
    let count = |f: fn(&GapVerdict) -> bool| labelled.iter().filter(|g| f(&g.verdict)).count();
    let result = json!({
        "gauge": GAUGE,
        "provenance": {
            "volumes": s.volumes,
            "delta": params.delta,
            "tol": params.tol,
            "eps": s.eps,
            "q_max": s.q_max,
            "max_level": label_params.max_level,
            "boundary": s.boundary,
        },
        "gaps": labelled.iter().map(gap_row).collect::<Vec<_>>(),
        "summary": {
            "gaps": labelled.len(),
            "member": count(|v| matches!(v, GapVerdict::Member { .. })),
            "not_found": count(|v| matches!(v, GapVerdict::NotFoundUpTo { .. })),
            "unresolved": count(|v| matches!(v, GapVerdict::Unresolved)),
            "unstable_labels": labelled.iter().filter(|g| !g.label_stable).count(),
        },
    });
    Ok((result, labelled))
}

fn run_spectrum(config: &RunConfig) -> Result<ModeResult, RunError> {
    let (result, labelled) = mgl_verify(config)?;
    let theta = theta_12(config)?;
    let l_list = config
        .spectral
        .volumes
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let rows = labelled
        .iter()
        .map(|g| {
            let (num, den) = g
                .label
                .as_ref()
                .map(|x| (x.numer().to_string(), x.denom().to_string()))
                .unwrap_or_default();
            let (verdict, level) = match g.verdict {
                GapVerdict::Member { level } => ("MEMBER", level.to_string()),
                GapVerdict::NotFoundUpTo { max_level } => {
                    ("NOT_FOUND_UP_TO", max_level.to_string())
                }
                GapVerdict::Unresolved => ("UNRESOLVED", String::new()),
            };
            vec![
                theta.numer().to_string(),
                theta.denom().to_string(),
                l_list.clone(),
                format!("{:.10}", g.gap.e_lo),
                format!("{:.10}", g.gap.e_hi),
                format!("{:.10}", g.gap.ids),
                num,
                den,
                verdict.to_string(),
                level,
            ]
        })
        .collect();
    let csv = csv_string(&GAPS_CSV_HEADER, rows);
    let msg = format!("{} gaps", labelled.len());
    Ok((
        result,
        true,
        msg,
        vec![(config.outputs.gaps_csv.clone(), csv)],
    ))
}

fn run_butterfly(config: &RunConfig) -> Result<ModeResult, RunError> {
    let b = &config.butterfly;
    let rows = butterfly(b.q_max, b.volume)?;
    let csv = csv_string(
        &BUTTERFLY_CSV_HEADER,
        rows.iter()
            .map(|r| {
                vec![
                    r.theta_num.to_string(),
                    r.theta_den.to_string(),
                    format!("{:.10}", r.band_lo),
                    format!("{:.10}", r.band_hi),
                ]
            })
            .collect(),
    );
    let result = json!({ "q_max": b.q_max, "target_volume": b.volume, "rows": rows.len() });
    let msg = format!("{} band rows", rows.len());
    Ok((
        result,
        true,
        msg,
        vec![(config.outputs.butterfly_csv.clone(), csv)],
    ))
}

/// Randomized exact suites: containment and the `Z ⊆ Z_I[μ] ⊆ Z_∅[μ]`
/// sandwich on random chains, `Pf² = det`, and the two integrality
/// characterizations on random exterior elements. All draws come from the
/// config seed.
fn run_verify(config: &RunConfig) -> Result<ModeResult, RunError> {
    let v = &config.verify;
    let mut rng = rng_from_seed(config.seed);
    let mut chains = Vec::new();
    for _ in 0..v.random_chains {
        let depth = rand::Rng::gen_range(&mut rng, 1..=v.max_depth);
        chains.push(random_chain(&mut rng, 2, depth, v.max_index));
    }
    for _ in 0..v.wide_chains {
        let depth = rand::Rng::gen_range(&mut rng, 1..=2);
        chains.push(random_chain(&mut rng, 4, depth, v.wide_max_index));
    }
    let mut failures: Vec<String> = Vec::new();
    let mut chain_rows = Vec::new();
    for (k, chain) in chains.iter().enumerate() {
        let rows = containment_rows(chain, chain.depth())?;
        if let Some(w) = first_failure(&rows) {
            failures.push(format!("chain {k}: {w}"));
        }
        let sandwich = sandwich_holds(chain).map_err(RunError::Compute)?;
        if !sandwich {
            failures.push(format!("chain {k}: sandwich violated"));
        }
        chain_rows.push(json!({
            "p": chain.p(),
            "matrices": (1..=chain.depth()).map(|j| chain.matrix(j).expect("level exists").to_i64_rows()).collect::<Vec<_>>(),
            "indices": (1..=chain.depth()).map(|j| chain.index(j).expect("level exists")).collect::<Vec<_>>(),
            "containment_checks": rows.len(),
            "containment": if rows.iter().all(|r| r.verdict == Verdict::Pass) { "PASS" } else { "FAIL" },
            "sandwich": if sandwich { "PASS" } else { "FAIL" },
        }));
    }

    let mut pf_fail = 0;
    for _ in 0..v.pfaffians {
        let n = 2 * rand::Rng::gen_range(&mut rng, 0..=4);
        let a = random_skew(&mut rng, n, 9, 6);
        let pf = pfaffian(&a).map_err(|e| RunError::Compute(e.to_string()))?;
        if &pf * &pf != rat_determinant(&a) {
            pf_fail += 1;
        }
    }
    if pf_fail > 0 {
        failures.push(format!("{pf_fail} Pfaffians violate Pf^2 = det"));
    }

    let mut chern_disagree = 0;
    for _ in 0..v.chern_elements {
        let n = rand::Rng::gen_range(&mut rng, 1..=6);
        let a = random_integral_element(&mut rng, n, 5);
        for b in [a.clone(), perturb_to_half(&mut rng, &a)] {
            let verdict = integrality_check(&b).verdict;
            if (verdict == Verdict::Pass) != coefficient_scan(&b).is_none() {
                chern_disagree += 1;
            }
        }
    }
    if chern_disagree > 0 {
        failures.push(format!(
            "{chern_disagree} elements where probe and scan disagree"
        ));
    }

    let passed = failures.is_empty();
    let result = json!({
        "seed": config.seed,
        "chains": chain_rows,
        "pfaffians": { "checked": v.pfaffians, "failures": pf_fail },
        "chern": { "checked": 2 * v.chern_elements, "disagreements": chern_disagree },
        "failures": failures,
    });
    let msg = if passed {
        format!("verify PASS ({} chains)", chains.len())
    } else {
        failures.join("; ")
    };
    Ok((result, passed, msg, Vec::new()))
}

/// `Z ⊆ Z_I[μ] ⊆ Z_∅[μ]` for every even `I` at every level, with equality
/// at `I = {1..p}`.
pub fn sandwich_holds(chain: &SubgroupChain) -> Result<bool, String> {
    let integers = crate::exact::QSubgroup::integers();
    let all: Vec<usize> = (0..chain.p()).collect();
    for level in 1..=chain.depth() {
        let bottom = z_i_mu(chain, &[], level).map_err(|e| e.to_string())?;
        let top = z_i_mu(chain, &all, level).map_err(|e| e.to_string())?;
        if chain.p() % 2 == 0 && top != integers {
            return Ok(false);
        }
        for subset in even_subsets(chain.p()) {
            let z = z_i_mu(chain, &subset, level).map_err(|e| e.to_string())?;
            if !integers.is_subgroup_of(&z) || !z.is_subgroup_of(&bottom) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Copy of `a` with one coefficient (possibly a zero one) shifted by `1/2`.
pub fn perturb_to_half<R: rand::Rng>(
    rng: &mut R,
    a: &crate::chern::ExteriorElement,
) -> crate::chern::ExteriorElement {
    let n = a.n();
    let mask: u64 = rng.gen_range(0..1u64 << n);
    let indices: Vec<usize> = (0..n)
        .filter(|b| mask >> b & 1 == 1)
        .map(|b| b + 1)
        .collect();
    let half = crate::chern::ExteriorElement::monomial(n, &indices, Rat::new(1.into(), 2.into()))
        .expect("valid indices");
    a.add(&half).expect("same n")
}

/// Reads, validates and runs a config file; `command` must agree with the
/// config's own mode.
pub fn run_file(path: &Path, command: Mode, seed: Option<u64>) -> Result<RunOutcome, RunError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let (Some(seed), Some(obj)) = (seed, value.as_object_mut()) {
        obj.insert("seed".into(), json!(seed));
    }
    let config = RunConfig::from_value(value)?;
    if config.mode != command {
        return Err(ConfigError::ModeMismatch {
            config: config.mode,
            command,
        }
        .into());
    }
    run(&config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: Value) -> RunConfig {
        RunConfig::from_value(v).unwrap()
    }

    #[test]
    fn freq_report_for_hofstadter_third() {
        let out = run(&cfg(json!({"mode": "freq", "theta": {"upper": ["1/3"]}}))).unwrap();
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.report["result"]["total_generator"], "1/3");
        assert_eq!(out.report["config"]["theta"]["upper"][0], "1/3");
        assert_eq!(out.report["artifact"]["name"], ARTIFACT_NAME);
    }

    #[test]
    fn coh_on_dyadic_plane_passes() {
        let out = run(&cfg(
            json!({"mode": "coh", "chain": {"kind": "diagonal", "degrees": [2, 2], "depth": 3}}),
        ))
        .unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.message);
        assert_eq!(out.report["result"]["rows"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn chern_reports_witness() {
        let out = run(&cfg(json!({
            "mode": "chern",
            "element": {"n": 2, "terms": [{"indices": [], "coeff": "1"}, {"indices": [1, 2], "coeff": "1/2"}]},
            "degrees": [2, 3]
        })))
        .unwrap();
        assert_eq!(out.exit_code, 0);
        assert_eq!(out.report["result"]["verdict"], "FAIL");
        assert_eq!(out.report["result"]["witness"]["value"], "1/2");
        assert_eq!(out.report["result"]["characterizations_agree"], true);
        let missing = run(&cfg(json!({"mode": "chern"}))).unwrap_err();
        assert_eq!(missing.exit_code(), 2);
    }

    #[test]
    fn small_verify_run_is_deterministic() {
        let c = cfg(json!({"mode": "verify", "seed": 5, "verify": {
            "random_chains": 4, "wide_chains": 1, "pfaffians": 20, "chern_elements": 5
        }}));
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.exit_code, 0, "{}", a.message);
        assert_eq!(a.artifacts, b.artifacts);
    }
}
