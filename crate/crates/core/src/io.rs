//! JSON artifacts: circuit files, Hamiltonian files and classical proofs.
//!
//! Output is canonical: object keys sorted, floats written with 17
//! significant digits, complex numbers as `[re, im]` pairs and matrices as
//! row-major lists of such pairs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::circuit::{Gate, VerificationCircuit};
use crate::cldm::{split_support, SLHProof};
use crate::error::{HamlabError, Result};
use crate::kitaev::KitaevHamiltonian;
use crate::linalg::{CMatrix, C64};
use crate::operator::{LocalTerm, SparseMatrix};
use crate::optimize::SLHInstance;
use crate::qstate::{Bipartition, DensityMatrix, QubitLayout};

/// Unitarity tolerance for matrices read from files.
pub const FILE_UNITARY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitCounts {
    pub ancilla: usize,
    pub proof1: usize,
    pub proof2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GateSpec {
    Unitary { targets: Vec<usize>, matrix: Vec<[f64; 2]> },
    Cswap { control: usize, r1: Vec<usize>, r2: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFile {
    pub qubits: QubitCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registers: Option<Vec<usize>>,
    pub accept_qubit: usize,
    pub gates: Vec<GateSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<usize>,
}

/// One Hamiltonian term, given either densely over its support or as
/// sparse `[i, j, re, im]` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub support: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<(usize, usize, f64, f64)>>,
    /// `in`, `prop` or `out` for compiled clock Hamiltonians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    /// Largest number of nonzeros in a row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianFile {
    pub qubits: usize,
    pub partition: PartitionSpec,
    pub a: f64,
    pub b: f64,
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofEntry {
    #[serde(rename = "A")]
    pub a: Vec<[f64; 2]>,
    #[serde(rename = "B")]
    pub b: Vec<[f64; 2]>,
}

// ---------------------------------------------------------------------------
// Canonical writer
// ---------------------------------------------------------------------------

fn write_value(v: &Value, out: &mut String) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else {
                let x = n.as_f64().expect("json numbers are u64, i64 or f64");
                out.push_str(&format_float(x)?);
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).map_err(|e| HamlabError::Parse(e.to_string()))?),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).map_err(|e| HamlabError::Parse(e.to_string()))?);
                out.push(':');
                write_value(&map[k], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(HamlabError::InvalidParameter(format!("cannot serialize non-finite value {x}")));
    }
    Ok(format!("{x:.16e}"))
}

/// Serialize with sorted keys and fixed float formatting.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| HamlabError::Parse(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, &mut out)?;
    Ok(out)
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| HamlabError::Parse(e.to_string()))
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

pub fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

/// Row-major pairs to a square matrix.
pub fn pairs_to_matrix(pairs: &[[f64; 2]]) -> Result<CMatrix> {
    let dim = (pairs.len() as f64).sqrt().round() as usize;
    if dim * dim != pairs.len() || dim == 0 {
        return Err(HamlabError::Parse(format!("{} entries do not form a square matrix", pairs.len())));
    }
    if pairs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(HamlabError::Parse("matrix has non-finite entries".into()));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        let [re, im] = pairs[i * dim + j];
        C64::new(re, im)
    }))
}

fn sparse_entries(m: &SparseMatrix) -> Vec<(usize, usize, f64, f64)> {
    m.triplets().map(|(i, j, v)| (i, j, v.re, v.im)).collect()
}

// ---------------------------------------------------------------------------
// Circuits
// ---------------------------------------------------------------------------

impl CircuitFile {
    pub fn from_circuit(c: &VerificationCircuit) -> Self {
        let gates = c
            .gates()
            .iter()
            .map(|g| match g {
                Gate::Unitary { targets, matrix } => GateSpec::Unitary {
                    targets: targets.clone(),
                    matrix: matrix_to_pairs(matrix),
                },
                Gate::ControlledSwap { control, r1, r2 } => GateSpec::Cswap {
                    control: *control,
                    r1: r1.clone(),
                    r2: r2.clone(),
                },
            })
            .collect();
        Self {
            qubits: QubitCounts {
                ancilla: c.ancilla(),
                proof1: c.proof1(),
                proof2: c.proof2(),
            },
            registers: c.registers().map(|r| r.to_vec()),
            accept_qubit: c.accept_qubit(),
            gates,
        }
    }

    pub fn to_circuit(&self) -> Result<VerificationCircuit> {
        let gates = self
            .gates
            .iter()
            .map(|g| match g {
                GateSpec::Unitary { targets, matrix } => {
                    Gate::unitary_with_tol(targets.clone(), pairs_to_matrix(matrix)?, FILE_UNITARY_TOL)
                }
                GateSpec::Cswap { control, r1, r2 } => Gate::controlled_register_swap(*control, r1.clone(), r2.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        VerificationCircuit::new(
            gates,
            self.qubits.ancilla,
            self.qubits.proof1,
            self.qubits.proof2,
            self.registers.clone(),
            self.accept_qubit,
        )
    }
}

/// Syntax errors map to [`HamlabError::Parse`]; semantic ones keep their
/// own variant.
pub fn parse_circuit(text: &str) -> Result<VerificationCircuit> {
    parse_json::<CircuitFile>(text)?.to_circuit()
}

pub fn circuit_to_json(c: &VerificationCircuit) -> Result<String> {
    to_canonical_json(&CircuitFile::from_circuit(c))
}

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

/// `b = 1/(8(T+1))` when no threshold is supplied for a compiled circuit.
pub fn default_thresholds(steps: usize) -> (f64, f64) {
    (0.0, 1.0 / (8.0 * (steps + 1) as f64))
}

impl HamiltonianFile {
    /// Term groups `in`, `prop` (one per step) and `out` over the whole
    /// register, with the natural cut (C, A, P1) | (P2).
    pub fn from_compiled(k: &KitaevHamiltonian, a: f64, b: f64) -> Self {
        let n = k.num_qubits();
        let support: Vec<usize> = (0..n).collect();
        let term = |m: &SparseMatrix, group: &str, t: Option<usize>, gate: Option<String>| TermSpec {
            support: support.clone(),
            matrix: None,
            entries: Some(sparse_entries(m)),
            group: Some(group.to_string()),
            t,
            gate,
            sparsity: Some(m.max_row_nnz()),
        };
        let mut terms = vec![term(&k.h_in, "in", None, None)];
        for (i, h) in k.terms.iter().enumerate() {
            let kind = match k.circuit().gates()[i] {
                Gate::Unitary { .. } => "unitary",
                Gate::ControlledSwap { .. } => "cswap",
            };
            terms.push(term(h, "prop", Some(i + 1), Some(kind.to_string())));
        }
        terms.push(term(&k.h_out, "out", None, None));
        let p2 = k.proof2_qubits();
        Self {
            qubits: n,
            partition: PartitionSpec {
                a: (0..n).filter(|q| !p2.contains(q)).collect(),
                b: p2,
            },
            a,
            b,
            terms,
        }
    }

    pub fn from_instance(inst: &SLHInstance) -> Self {
        Self {
            qubits: inst.n(),
            partition: PartitionSpec {
                a: inst.partition().side_a().to_vec(),
                b: inst.partition().side_b().to_vec(),
            },
            a: inst.a(),
            b: inst.b(),
            terms: inst
                .terms()
                .iter()
                .map(|t| TermSpec {
                    support: t.support.clone(),
                    matrix: Some(matrix_to_pairs(&t.matrix)),
                    entries: None,
                    group: None,
                    t: None,
                    gate: None,
                    sparsity: None,
                })
                .collect(),
        }
    }

    /// Dense local matrix of term `i` over its support.
    pub fn term_matrix(&self, i: usize) -> Result<CMatrix> {
        let spec = &self.terms[i];
        let dim = 1usize << spec.support.len();
        match (&spec.matrix, &spec.entries) {
            (Some(pairs), None) => {
                let m = pairs_to_matrix(pairs)?;
                if m.nrows() != dim {
                    return Err(HamlabError::MalformedInstance(format!(
                        "term {i}: matrix of dimension {} on {} qubits",
                        m.nrows(),
                        spec.support.len()
                    )));
                }
                Ok(m)
            }
            (None, Some(entries)) => {
                let mut m = CMatrix::zeros(dim, dim);
                for &(r, c, re, im) in entries {
                    if r >= dim || c >= dim {
                        return Err(HamlabError::MalformedInstance(format!("term {i}: entry ({r}, {c}) out of range")));
                    }
                    m[(r, c)] += C64::new(re, im);
                }
                Ok(m)
            }
            _ => Err(HamlabError::MalformedInstance(format!(
                "term {i} needs exactly one of \"matrix\" or \"entries\""
            ))),
        }
    }

    pub fn to_instance(&self) -> Result<SLHInstance> {
        let terms = (0..self.terms.len())
            .map(|i| LocalTerm::new(self.qubits, self.terms[i].support.clone(), self.term_matrix(i)?))
            .collect::<Result<Vec<_>>>()?;
        let partition = Bipartition::new(self.partition.a.clone(), self.partition.b.clone(), self.qubits)?;
        SLHInstance::new(self.qubits, terms, partition, self.a, self.b)
    }
}

pub fn parse_hamiltonian_file(text: &str) -> Result<HamiltonianFile> {
    parse_json(text)
}

pub fn parse_instance(text: &str) -> Result<SLHInstance> {
    parse_hamiltonian_file(text)?.to_instance()
}

pub fn instance_to_json(inst: &SLHInstance) -> Result<String> {
    to_canonical_json(&HamiltonianFile::from_instance(inst))
}

// ---------------------------------------------------------------------------
// Proofs
// ---------------------------------------------------------------------------

pub fn proof_to_json(proof: &SLHProof) -> Result<String> {
    let entries: Vec<ProofEntry> = proof
        .marginals
        .iter()
        .map(|(a, b)| ProofEntry {
            a: matrix_to_pairs(a.matrix()),
            b: matrix_to_pairs(b.matrix()),
        })
        .collect();
    to_canonical_json(&entries)
}

fn proof_matrix(pairs: &[[f64; 2]], qubits: usize, i: usize, side: &str) -> Result<DensityMatrix> {
    let m = pairs_to_matrix(pairs)?;
    if m.nrows() != 1 << qubits {
        return Err(HamlabError::MalformedProof(format!(
            "term {i} side {side}: dimension {} for {qubits} qubits",
            m.nrows()
        )));
    }
    DensityMatrix::new(m, QubitLayout::free(qubits))
        .map_err(|e| HamlabError::MalformedProof(format!("term {i} side {side}: {e}")))
}

/// Proof file for `inst`; every matrix must be a valid density matrix over
/// its side of the term's support.
pub fn parse_proof(text: &str, inst: &SLHInstance) -> Result<SLHProof> {
    let entries: Vec<ProofEntry> = parse_json(text)?;
    if entries.len() != inst.terms().len() {
        return Err(HamlabError::MalformedProof(format!(
            "proof has {} entries for {} terms",
            entries.len(),
            inst.terms().len()
        )));
    }
    let marginals = entries
        .iter()
        .zip(inst.terms())
        .enumerate()
        .map(|(i, (e, term))| {
            let (ai, bi) = split_support(inst, &term.support);
            Ok((proof_matrix(&e.a, ai.len(), i, "A")?, proof_matrix(&e.b, bi.len(), i, "B")?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SLHProof { marginals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{hm_wrap, random_circuit};
    use crate::kitaev::compile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(format_float(1.0).unwrap(), "1.0000000000000000e0");
        assert_eq!(format_float(-0.1).unwrap(), "-1.0000000000000001e-1");
        let x = 0.1 + 0.2;
        let back: f64 = format_float(x).unwrap().parse().unwrap();
        assert_eq!(back, x);
        assert!(format_float(f64::NAN).is_err());
    }

    #[test]
    fn keys_are_sorted() {
        let v = serde_json::json!({"b": 1, "a": [2.5, {"z": true, "c": null}]});
        assert_eq!(
            to_canonical_json(&v).unwrap(),
            r#"{"a":[2.5000000000000000e0,{"c":null,"z":true}],"b":1}"#
        );
    }

    #[test]
    fn circuit_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inner = random_circuit(1, 2, 0, 3, &mut rng).unwrap();
        let c = hm_wrap(&inner, &[1, 1]).unwrap();
        let text = circuit_to_json(&c).unwrap();
        let again = circuit_to_json(&parse_circuit(&text).unwrap()).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn compile_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_circuit(1, 1, 1, 2, &mut rng).unwrap();
        let k = compile(&c).unwrap();
        let (a, b) = default_thresholds(c.steps());
        let first = to_canonical_json(&HamiltonianFile::from_compiled(&k, a, b)).unwrap();
        let parsed = parse_hamiltonian_file(&first).unwrap();
        assert_eq!(to_canonical_json(&parsed).unwrap(), first);
        let reparsed = parse_circuit(&circuit_to_json(&c).unwrap()).unwrap();
        let second = to_canonical_json(&HamiltonianFile::from_compiled(&compile(&reparsed).unwrap(), a, b)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_circuit("{"), Err(HamlabError::Parse(_))));
        let bad = r#"{"qubits":{"ancilla":1,"proof1":1,"proof2":0},"accept_qubit":0,
            "gates":[{"kind":"unitary","targets":[0],"matrix":[[1,0],[1,0],[0,0],[1,0]]}]}"#;
        assert!(matches!(parse_circuit(bad), Err(HamlabError::NotUnitary(_))));
    }
}
