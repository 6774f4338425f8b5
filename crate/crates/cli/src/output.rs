//! Output records and their CSV / JSON renderings.

use std::fmt::Write;

use num_complex::Complex64;
use serde::Serialize;

use csm_core::spectral::{StationaryPoint, ThetaScan};
use csm_core::tonks::TgReference;
use csm_core::workflow::TwoParticleResonance;

/// `%.6g`-style: six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub g: f64,
    pub theta_opt: f64,
    #[serde(rename = "E_rez")]
    pub e_rez: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "S")]
    pub s: [f64; 2],
    #[serde(rename = "S_lin")]
    pub s_lin: [f64; 2],
    pub lambda_head: Vec<[f64; 2]>,
    pub flags: Vec<String>,
}

impl SweepRecord {
    pub fn new(r: &TwoParticleResonance, head: usize) -> Self {
        let e = &r.analysis.entropy;
        Self {
            g: r.g,
            theta_opt: r.state.theta,
            e_rez: r.state.energy,
            gamma: r.state.width,
            s: pair(e.vn),
            s_lin: pair(e.lin),
            lambda_head: r.analysis.spectrum.lambda.iter().take(head).map(|&l| pair(l)).collect(),
            flags: r.diagnostics.flags(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRecord {
    pub index: usize,
    pub theta_opt: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "W")]
    pub w: [f64; 2],
    pub rate: f64,
    pub ambiguous: bool,
}

impl ResonanceRecord {
    pub fn new(index: usize, p: &StationaryPoint) -> Self {
        Self {
            index,
            theta_opt: p.theta,
            energy: p.value.re,
            gamma: -2.0 * p.value.im,
            w: pair(p.value),
            rate: p.rate,
            ambiguous: p.ambiguous,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub values: Vec<[f64; 2]>,
    pub rates: Vec<f64>,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub thetas: Vec<f64>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub stabilized: Vec<ResonanceRecord>,
}

impl ScanRecord {
    pub fn new(scan: &ThetaScan, stabilized: &[StationaryPoint]) -> Self {
        Self {
            thetas: scan.thetas.clone(),
            trajectories: scan
                .trajectories
                .iter()
                .map(|t| TrajectoryRecord {
                    values: t.values.iter().map(|&z| pair(z)).collect(),
                    rates: t.rates.clone(),
                    ambiguous: t.ambiguous,
                })
                .collect(),
            stabilized: stabilized
                .iter()
                .enumerate()
                .map(|(k, p)| ResonanceRecord::new(k, p))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TgRecord {
    pub theta_orbital: f64,
    #[serde(rename = "E_rez")]
    pub e_rez: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "W0")]
    pub w0: [f64; 2],
    #[serde(rename = "W1")]
    pub w1: [f64; 2],
    #[serde(rename = "S")]
    pub s: [f64; 2],
    #[serde(rename = "S_lin")]
    pub s_lin: [f64; 2],
    pub lambda_head: Vec<[f64; 2]>,
    pub trace_defect: f64,
}

impl TgRecord {
    pub fn new(r: &TgReference, theta_orbital: f64, head: usize) -> Self {
        Self {
            theta_orbital,
            e_rez: r.energy,
            gamma: r.width,
            w0: pair(r.w0),
            w1: pair(r.w1),
            s: pair(r.analysis.entropy.vn),
            s_lin: pair(r.analysis.entropy.lin),
            lambda_head: r.analysis.spectrum.lambda.iter().take(head).map(|&l| pair(l)).collect(),
            trace_defect: r.projection.trace_defect,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Document<'a, C: Serialize, R: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub records: &'a [R],
}

pub fn json<C: Serialize, R: Serialize>(command: &str, config: &C, records: &[R]) -> String {
    let mut s = serde_json::to_string_pretty(&Document {
        command,
        config,
        records,
    })
    .expect("records are plain data");
    s.push('\n');
    s
}

fn lambda_header(out: &mut String, head: usize) {
    for k in 0..head {
        write!(out, ",lambda{k}_re,lambda{k}_im").unwrap();
    }
}

fn row(out: &mut String, values: &[f64]) {
    let cells: Vec<String> = values.iter().map(|&v| sig6(v)).collect();
    out.push_str(&cells.join(","));
}

fn lambda_cells(out: &mut String, head: &[[f64; 2]], width: usize) {
    for k in 0..width {
        let [re, im] = head.get(k).copied().unwrap_or([f64::NAN, f64::NAN]);
        write!(out, ",{},{}", sig6(re), sig6(im)).unwrap();
    }
}

pub fn sweep_csv(records: &[SweepRecord], head: usize, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str("g,theta_opt,E_rez,Gamma,S_re,S_im,Slin_re,Slin_im");
    lambda_header(&mut out, head);
    out.push('\n');
    for r in records {
        for f in &r.flags {
            writeln!(out, "# g={}: {f}", sig6(r.g)).unwrap();
        }
        row(
            &mut out,
            &[r.g, r.theta_opt, r.e_rez, r.gamma, r.s[0], r.s[1], r.s_lin[0], r.s_lin[1]],
        );
        lambda_cells(&mut out, &r.lambda_head, head);
        out.push('\n');
    }
    out
}

pub fn resonance_csv(records: &[ResonanceRecord], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str("index,theta_opt,E,Gamma,W_re,W_im,rate\n");
    for r in records {
        if r.ambiguous {
            writeln!(out, "# resonance {}: ambiguous trajectory matching", r.index).unwrap();
        }
        write!(out, "{},", r.index).unwrap();
        row(&mut out, &[r.theta_opt, r.energy, r.gamma, r.w[0], r.w[1], r.rate]);
        out.push('\n');
    }
    out
}

pub fn scan_csv(scan: &ScanRecord, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    for p in &scan.stabilized {
        writeln!(
            out,
            "# stabilized {}: theta={} W=({},{}) rate={}",
            p.index,
            sig6(p.theta_opt),
            sig6(p.w[0]),
            sig6(p.w[1]),
            sig6(p.rate)
        )
        .unwrap();
    }
    out.push_str("theta,trajectory,W_re,W_im,rate\n");
    // one block per trajectory, blank-line separated for gnuplot
    for (t, traj) in scan.trajectories.iter().enumerate() {
        if t > 0 {
            out.push('\n');
        }
        for (k, w) in traj.values.iter().enumerate() {
            write!(out, "{},{t},", sig6(scan.thetas[k])).unwrap();
            row(&mut out, &[w[0], w[1], traj.rates[k]]);
            out.push('\n');
        }
    }
    out
}

pub fn tg_csv(r: &TgRecord, head: usize, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str("theta_orbital,E_rez,Gamma,W0_re,W0_im,W1_re,W1_im,S_re,S_im,Slin_re,Slin_im");
    lambda_header(&mut out, head);
    out.push('\n');
    row(
        &mut out,
        &[
            r.theta_orbital,
            r.e_rez,
            r.gamma,
            r.w0[0],
            r.w0[1],
            r.w1[0],
            r.w1[1],
            r.s[0],
            r.s[1],
            r.s_lin[0],
            r.s_lin[1],
        ],
    );
    lambda_cells(&mut out, &r.lambda_head, head);
    out.push('\n');
    out
}
