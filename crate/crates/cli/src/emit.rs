//! JSON and CSV encodings of a [`Report`].
//!
//! JSON keeps struct field order, so key order is fixed by the types, and
//! floats use the shortest representation that parses back to the same
//! value. CSV is one table per command with a header row.

use serde::Serialize;

use crate::run::{CommandResult, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn emit(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("reports contain only finite floats");
            out.push(b'\n');
            out
        }
        Format::Csv => emit_csv(report),
    }
}

pub fn parse_json(bytes: &[u8]) -> serde_json::Result<Report> {
    serde_json::from_slice(bytes)
}

#[derive(Serialize)]
struct TraceRow {
    y: f64,
    norm: f64,
}

#[derive(Serialize)]
struct ResonanceRow {
    r: f64,
    multiplicity: usize,
    mu_re: f64,
    mu_im: f64,
}

#[derive(Serialize)]
struct CertificateRow<'a> {
    claim: &'a str,
    premise_established: bool,
    pass: bool,
    premise_witness: Option<f64>,
    conclusion_witness: Option<f64>,
}

#[derive(Serialize)]
struct SweepCaseRow {
    index: usize,
    seed: u64,
    lambda: f64,
    premise_established: bool,
    pass: bool,
    premise_witness: Option<f64>,
    conclusion_witness: Option<f64>,
    error: Option<String>,
}

fn table<T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("flat rows serialize");
    }
    w.into_inner().expect("in-memory flush")
}

fn emit_csv(report: &Report) -> Vec<u8> {
    match &report.result {
        CommandResult::Limit(l) => table(
            l.norms_trace.iter().map(|&(y, norm)| TraceRow { y, norm }),
            &["y", "norm"],
        ),
        CommandResult::Scan(s) => table(
            s.resonances.iter().map(|r| ResonanceRow {
                r: r.r,
                multiplicity: r.multiplicity,
                mu_re: r.mu.re,
                mu_im: r.mu.im,
            }),
            &["r", "multiplicity", "mu_re", "mu_im"],
        ),
        CommandResult::Verify(c) => table(
            [CertificateRow {
                claim: &c.claim,
                premise_established: !c.vacuous,
                pass: c.pass,
                premise_witness: c.premise.witness_coupling(),
                conclusion_witness: c.conclusion.as_ref().and_then(|e| e.witness_coupling()),
            }],
            &["claim", "premise_established", "pass", "premise_witness", "conclusion_witness"],
        ),
        CommandResult::Flow(f) => table([f], &["lambda", "r_from", "r_to", "flow"]),
        CommandResult::Sweep(s) => table(
            &s.rows,
            &[s.axis.name(), "t_norm", "im_min_eig", "sigma_min", "converged", "near_resonance"],
        ),
        CommandResult::VerifySweep(s) => table(
            s.rows.iter().map(|r| SweepCaseRow {
                index: r.index,
                seed: r.seed,
                lambda: r.lambda,
                premise_established: r.premise_established,
                pass: r.pass,
                premise_witness: r.premise_witness,
                conclusion_witness: r.conclusion_witness,
                error: r.error.clone(),
            }),
            &[
                "index",
                "seed",
                "lambda",
                "premise_established",
                "pass",
                "premise_witness",
                "conclusion_witness",
                "error",
            ],
        ),
    }
}
