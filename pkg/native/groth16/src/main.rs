//! Groth16 prover/verifier over BN254 for externally supplied R1CS files.
//!
//! Subcommands:
//!   setup  --r1cs F --pk OUT --vk OUT [--seed N]
//!   prove  --r1cs F --pk F --witness F --proof OUT
//!   verify --vk F --publics F --proof F
//!   verify-batch --vk F --publics F --proofs F   (one hex proof per line)
//!
//! Exit codes: 0 accept/success, 1 reject, 2 usage or input error.

use std::collections::HashMap;
use std::fs;
use std::process::exit;

use ark_bn254::{Bn254, Fr};
use ark_ff::PrimeField;
use ark_groth16::Groth16;
use ark_relations::r1cs::{
    ConstraintSynthesizer, ConstraintSystemRef, LinearCombination, SynthesisError, Variable,
};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use ark_snark::SNARK;
use ark_std::rand::{rngs::StdRng, SeedableRng};

const BN254_SCALAR_HEX: &str = "30644e72e131a029b85045b68181585d2833e84879b9709143e1f593f0000001";

type Terms = Vec<(usize, Fr)>;

struct R1csFile {
    n_wires: usize,
    n_public: usize,
    rows: Vec<(Terms, Terms, Terms)>,
}

fn fr_from_hex(s: &str) -> Result<Fr, String> {
    let s = if s.len() % 2 == 1 { format!("0{s}") } else { s.to_string() };
    let bytes = hex::decode(&s).map_err(|e| format!("bad hex: {e}"))?;
    Ok(Fr::from_be_bytes_mod_order(&bytes))
}

fn parse_terms(s: &str) -> Result<Terms, String> {
    if s == "-" {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|t| {
            let (w, c) = t.split_once(':').ok_or_else(|| format!("bad term {t}"))?;
            Ok((
                w.parse::<usize>().map_err(|e| format!("bad wire: {e}"))?,
                fr_from_hex(c)?,
            ))
        })
        .collect()
}

fn parse_r1cs(path: &str) -> Result<R1csFile, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let mut lines = text.lines();
    let magic = lines.next().ok_or("empty r1cs file")?;
    if magic != "unlearn-r1cs v1" {
        return Err(format!("unsupported r1cs header {magic:?}"));
    }
    let mut header = HashMap::new();
    for _ in 0..4 {
        let line = lines.next().ok_or("truncated r1cs header")?;
        let (k, v) = line.split_once(' ').ok_or("bad header line")?;
        header.insert(k.to_string(), v.to_string());
    }
    let modulus = header.get("modulus").ok_or("missing modulus")?;
    if modulus.trim_start_matches('0') != BN254_SCALAR_HEX.trim_start_matches('0') {
        return Err("r1cs modulus is not the BN254 scalar field".into());
    }
    let get = |k: &str| -> Result<usize, String> {
        header
            .get(k)
            .ok_or(format!("missing {k}"))?
            .parse()
            .map_err(|e| format!("bad {k}: {e}"))
    };
    let n_wires = get("wires")?;
    let n_public = get("public")?;
    let n_constraints = get("constraints")?;
    let mut rows = Vec::with_capacity(n_constraints);
    for _ in 0..n_constraints {
        let line = lines.next().ok_or("truncated constraint list")?;
        let mut parts = line.split('|');
        let a = parse_terms(parts.next().ok_or("missing A")?)?;
        let b = parse_terms(parts.next().ok_or("missing B")?)?;
        let c = parse_terms(parts.next().ok_or("missing C")?)?;
        rows.push((a, b, c));
    }
    Ok(R1csFile { n_wires, n_public, rows })
}

fn parse_values(path: &str, expect_header: &str) -> Result<Vec<Fr>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    let mut lines = text.lines();
    let magic = lines.next().ok_or("empty values file")?;
    if magic != expect_header {
        return Err(format!("unsupported header {magic:?}"));
    }
    let count_line = lines.next().ok_or("missing count")?;
    let (_, n) = count_line.split_once(' ').ok_or("bad count line")?;
    let n: usize = n.parse().map_err(|e| format!("bad count: {e}"))?;
    let vals: Result<Vec<Fr>, String> = lines.take(n).map(fr_from_hex).collect();
    let vals = vals?;
    if vals.len() != n {
        return Err("truncated values file".into());
    }
    Ok(vals)
}

struct FileCircuit {
    file: R1csFile,
    // Full assignment including the leading constant 1; absent for setup.
    assignment: Option<Vec<Fr>>,
}

impl ConstraintSynthesizer<Fr> for FileCircuit {
    fn generate_constraints(self, cs: ConstraintSystemRef<Fr>) -> Result<(), SynthesisError> {
        let value = |i: usize| -> Result<Fr, SynthesisError> {
            self.assignment
                .as_ref()
                .map(|a| a.get(i).copied().ok_or(SynthesisError::AssignmentMissing))
                .unwrap_or(Err(SynthesisError::AssignmentMissing))
        };
        let mut vars = Vec::with_capacity(self.file.n_wires);
        vars.push(Variable::One);
        for i in 1..=self.file.n_public {
            vars.push(cs.new_input_variable(|| value(i))?);
        }
        for i in (self.file.n_public + 1)..self.file.n_wires {
            vars.push(cs.new_witness_variable(|| value(i))?);
        }
        let as_lc = |terms: &Terms| -> LinearCombination<Fr> {
            let mut lc = LinearCombination::zero();
            for (w, c) in terms {
                lc += (*c, vars[*w]);
            }
            lc
        };
        for (a, b, c) in &self.file.rows {
            cs.enforce_constraint(as_lc(a), as_lc(b), as_lc(c))?;
        }
        Ok(())
    }
}

fn parse_args(args: &[String]) -> HashMap<String, String> {
    let mut out = HashMap::new();
    let mut i = 0;
    while i + 1 < args.len() {
        if let Some(key) = args[i].strip_prefix("--") {
            out.insert(key.to_string(), args[i + 1].clone());
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

fn required<'a>(opts: &'a HashMap<String, String>, key: &str) -> Result<&'a String, String> {
    opts.get(key).ok_or(format!("missing --{key}"))
}

fn make_rng(opts: &HashMap<String, String>) -> Result<StdRng, String> {
    match opts.get("seed") {
        Some(s) => Ok(StdRng::seed_from_u64(
            s.parse().map_err(|e| format!("bad seed: {e}"))?,
        )),
        None => {
            use std::io::Read;
            let mut seed = [0u8; 32];
            fs::File::open("/dev/urandom")
                .and_then(|mut f| f.read_exact(&mut seed))
                .map_err(|e| format!("cannot read system entropy: {e}"))?;
            Ok(StdRng::from_seed(seed))
        }
    }
}

fn run() -> Result<i32, String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cmd = args.first().ok_or("usage: unlearn-groth16 <setup|prove|verify|verify-batch>")?;
    let opts = parse_args(&args[1..]);
    match cmd.as_str() {
        "setup" => {
            let file = parse_r1cs(required(&opts, "r1cs")?)?;
            let mut rng = make_rng(&opts)?;
            let circuit = FileCircuit { file, assignment: None };
            let (pk, vk) = Groth16::<Bn254>::circuit_specific_setup(circuit, &mut rng)
                .map_err(|e| format!("setup failed: {e}"))?;
            let mut buf = Vec::new();
            pk.serialize_compressed(&mut buf).map_err(|e| e.to_string())?;
            fs::write(required(&opts, "pk")?, &buf).map_err(|e| e.to_string())?;
            buf.clear();
            vk.serialize_compressed(&mut buf).map_err(|e| e.to_string())?;
            fs::write(required(&opts, "vk")?, &buf).map_err(|e| e.to_string())?;
            Ok(0)
        }
        "prove" => {
            let file = parse_r1cs(required(&opts, "r1cs")?)?;
            let assignment = parse_values(required(&opts, "witness")?, "unlearn-wit v1")?;
            if assignment.len() != file.n_wires {
                return Err("witness length does not match circuit".into());
            }
            let pk_bytes = fs::read(required(&opts, "pk")?).map_err(|e| e.to_string())?;
            let pk = ark_groth16::ProvingKey::<Bn254>::deserialize_compressed_unchecked(
                &pk_bytes[..],
            )
            .map_err(|e| format!("bad proving key: {e}"))?;
            let mut rng = make_rng(&opts)?;
            let circuit = FileCircuit { file, assignment: Some(assignment) };
            let proof = Groth16::<Bn254>::prove(&pk, circuit, &mut rng)
                .map_err(|e| format!("prove failed: {e}"))?;
            let mut buf = Vec::new();
            proof.serialize_compressed(&mut buf).map_err(|e| e.to_string())?;
            fs::write(required(&opts, "proof")?, &buf).map_err(|e| e.to_string())?;
            Ok(0)
        }
        "verify" => {
            let vk_bytes = fs::read(required(&opts, "vk")?).map_err(|e| e.to_string())?;
            let vk = ark_groth16::VerifyingKey::<Bn254>::deserialize_compressed(&vk_bytes[..])
                .map_err(|e| format!("bad verifying key: {e}"))?;
            let publics = parse_values(required(&opts, "publics")?, "unlearn-pub v1")?;
            let proof_bytes = fs::read(required(&opts, "proof")?).map_err(|e| e.to_string())?;
            let accepted = match ark_groth16::Proof::<Bn254>::deserialize_compressed(
                &proof_bytes[..],
            ) {
                Ok(proof) => Groth16::<Bn254>::verify(&vk, &publics, &proof).unwrap_or(false),
                Err(_) => false,
            };
            println!("{}", if accepted { "OK" } else { "FAIL" });
            Ok(if accepted { 0 } else { 1 })
        }
        "verify-batch" => {
            let vk_bytes = fs::read(required(&opts, "vk")?).map_err(|e| e.to_string())?;
            let vk = ark_groth16::VerifyingKey::<Bn254>::deserialize_compressed(&vk_bytes[..])
                .map_err(|e| format!("bad verifying key: {e}"))?;
            let pvk = ark_groth16::prepare_verifying_key(&vk);
            let publics = parse_values(required(&opts, "publics")?, "unlearn-pub v1")?;
            let text = fs::read_to_string(required(&opts, "proofs")?).map_err(|e| e.to_string())?;
            for line in text.lines() {
                let accepted = hex::decode(line.trim())
                    .ok()
                    .and_then(|bytes| {
                        ark_groth16::Proof::<Bn254>::deserialize_compressed(&bytes[..]).ok()
                    })
                    .map(|proof| {
                        Groth16::<Bn254>::verify_proof(&pvk, &proof, &publics).unwrap_or(false)
                    })
                    .unwrap_or(false);
                println!("{}", if accepted { "OK" } else { "FAIL" });
            }
            Ok(0)
        }
        other => Err(format!("unknown subcommand {other:?}")),
    }
}

fn main() {
    match run() {
        Ok(code) => exit(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            exit(2);
        }
    }
}
