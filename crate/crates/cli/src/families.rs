use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rigidkron::circuit::{KronFactor, SynchronousCircuit};
use rigidkron::disjointness::{r1, rn_depth_d};
use rigidkron::field::{Field, FieldCtx, PrimeField, DEFAULT_MODULUS};
use rigidkron::io;
use rigidkron::rigidity::{
    cube_decomposition_general, cube_rank1_decomposition, dft_matrix, h2_rank1_decomposition, h4_rank1_decomposition,
    hadamard, RigidityDecomposition,
};
use rigidkron::synth::{rigidity_exponent, synth_depth_d};
use rigidkron::transform::{build_vf_witness, vf_matrix, TruthTable};
use rigidkron::{Error, SparseMatrix};

use crate::commands::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Hadamard,
    Disjointness,
    Kron2,
    Vf,
    Dft,
}

impl FromStr for Family {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "hadamard" => Family::Hadamard,
            "disjointness" => Family::Disjointness,
            "kron2" => Family::Kron2,
            "vf" => Family::Vf,
            "dft" => Family::Dft,
            _ => return Err(CliError::Usage(format!("unknown family '{s}'"))),
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Hadamard => "hadamard",
            Family::Disjointness => "disjointness",
            Family::Kron2 => "kron2",
            Family::Vf => "vf",
            Family::Dft => "dft",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Base {
    Auto,
    H2,
    H3Cube,
    H4,
    Js(Option<usize>),
}

impl FromStr for Base {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "auto" => Base::Auto,
            "h2" => Base::H2,
            "h3cube" => Base::H3Cube,
            "h4" => Base::H4,
            "js" => Base::Js(None),
            _ => match s.strip_prefix("js:").map(str::parse) {
                Some(Ok(m)) if m > 0 => Base::Js(Some(m)),
                _ => return Err(CliError::Usage(format!("unknown base '{s}'"))),
            },
        })
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Base::Auto => f.write_str("auto"),
            Base::H2 => f.write_str("h2"),
            Base::H3Cube => f.write_str("h3cube"),
            Base::H4 => f.write_str("h4"),
            Base::Js(None) => f.write_str("js"),
            Base::Js(Some(m)) => write!(f, "js:{m}"),
        }
    }
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

pub fn ctx_from_flag(field: Option<u64>) -> CliResult<FieldCtx> {
    Ok(FieldCtx::from_descriptor(field.unwrap_or(DEFAULT_MODULUS as u64))?)
}

/// Field for a run: the base matrix file decides for kron2, the flag or the
/// table header for vf, the flag or the default prime otherwise.
pub fn resolve_ctx(family: Family, field: Option<u64>, matrix: Option<&Path>, table: Option<&Path>) -> CliResult<FieldCtx> {
    let from_flag = field.map(FieldCtx::from_descriptor).transpose()?;
    match family {
        Family::Kron2 => {
            let path = matrix.ok_or_else(|| CliError::Usage("kron2 needs --matrix".into()))?;
            let ctx = io::peek_field(&read_file(path)?)?;
            match from_flag {
                Some(c) if c != ctx => Err(CliError::Usage(format!("--field {c} disagrees with the matrix file over {ctx}"))),
                _ => Ok(ctx),
            }
        }
        Family::Vf if from_flag.is_none() => {
            let path = table.ok_or_else(|| CliError::Usage("vf needs --table".into()))?;
            Ok(io::peek_field(&read_file(path)?)?)
        }
        _ => ctx_from_flag(field),
    }
}

/// File inputs parsed into the run's field.
pub struct Inputs<F: Field> {
    pub matrix: Option<SparseMatrix<F>>,
    pub table: Option<TruthTable<F>>,
}

pub fn load_inputs<F: Field>(f: &F, family: Family, matrix: Option<&Path>, table: Option<&Path>) -> CliResult<Inputs<F>> {
    let mut out = Inputs { matrix: None, table: None };
    match family {
        Family::Kron2 => {
            let path = matrix.ok_or_else(|| CliError::Usage("kron2 needs --matrix".into()))?;
            let m = io::read_matrix(f, &read_file(path)?)?;
            if !m.is_square() {
                return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() }.into());
            }
            out.matrix = Some(m);
        }
        Family::Vf => {
            let path = table.ok_or_else(|| CliError::Usage("vf needs --table".into()))?;
            let t = io::read_truth_table_as(f, &read_file(path)?)?;
            if t.q() != 2 {
                return Err(CliError::Usage("vf needs a table over {0,1}".into()));
            }
            out.table = Some(t);
        }
        _ => {}
    }
    Ok(out)
}

/// Number of Kronecker slots (or the DFT size).
pub fn slots<F: Field>(family: Family, n: Option<usize>, inputs: &Inputs<F>) -> CliResult<usize> {
    if let Some(t) = &inputs.table {
        return match n {
            Some(n) if n != t.n() => Err(CliError::Usage(format!("--n {n} disagrees with the table arity {}", t.n()))),
            _ => Ok(t.n()),
        };
    }
    n.ok_or_else(|| CliError::Usage(format!("{family} needs --n")))
}

pub enum Target<F: Field> {
    Kron(KronFactor<F>),
    Dense(SparseMatrix<F>),
}

impl<F: Field> Target<F> {
    pub fn materialize(&self) -> CliResult<SparseMatrix<F>> {
        Ok(match self {
            Target::Kron(k) => k.materialize()?,
            Target::Dense(m) => m.clone(),
        })
    }

    pub fn as_kron(&self) -> KronFactor<F> {
        match self {
            Target::Kron(k) => k.clone(),
            Target::Dense(m) => KronFactor::single(m.clone()),
        }
    }
}

pub fn target<F: Field>(f: &F, family: Family, n: usize, inputs: &Inputs<F>) -> CliResult<Target<F>> {
    Ok(match family {
        Family::Hadamard => Target::Kron(KronFactor::single(hadamard(f, 1)?).power(n)),
        Family::Disjointness => Target::Kron(KronFactor::single(r1(f)?).power(n)),
        Family::Kron2 => Target::Kron(KronFactor::single(inputs.matrix.clone().expect("loaded")).power(n)),
        Family::Vf => Target::Dense(vf_matrix(inputs.table.as_ref().expect("loaded"))?),
        Family::Dft => {
            let p = f.ctx().modulus().ok_or_else(|| CliError::Usage("dft needs a prime field".into()))?;
            let pf = PrimeField::new(p as u64)?;
            Target::Dense(dft_matrix(n, &pf)?.map_field(f.clone(), |x| f.from_i64(*x as i64)))
        }
    })
}

pub struct Built<F: Field> {
    pub circuit: SynchronousCircuit<F>,
    pub base: String,
    /// Side length of one Kronecker slot.
    pub q: usize,
}

fn hadamard_base<F: Field>(f: &F, base: Base) -> CliResult<(usize, RigidityDecomposition<F>)> {
    Ok(match base {
        Base::H2 => (2, h2_rank1_decomposition(f)?),
        Base::H3Cube => (3, cube_rank1_decomposition(f, &f.from_i64(-1))?),
        Base::H4 => (4, h4_rank1_decomposition(f)?),
        _ => unreachable!("resolved by caller"),
    })
}

/// Built-in base with the smallest exponent `c` that fits in `n` slots.
fn auto_hadamard_base<F: Field>(f: &F, n: usize) -> CliResult<Base> {
    let mut best: Option<(f64, Base)> = None;
    for b in [Base::H2, Base::H3Cube, Base::H4] {
        let (bits, dec) = hadamard_base(f, b)?;
        if bits > n {
            continue;
        }
        let c = rigidity_exponent(dec.target.rows(), dec.rank_bound, dec.changes);
        if best.map_or(true, |(bc, _)| c < bc) {
            best = Some((c, b));
        }
    }
    best.map(|(_, b)| b).ok_or_else(|| CliError::Usage(format!("n = {n} is smaller than every built-in base")))
}

pub fn synthesize<F: Field>(f: &F, family: Family, n: usize, d: usize, base: Base, inputs: &Inputs<F>) -> CliResult<Built<F>> {
    if d < 2 {
        return Err(Error::DepthTooSmall { got: d, min: 2 }.into());
    }
    let bad_base = || CliError::Usage(format!("base {base} does not apply to {family}"));
    match family {
        Family::Hadamard => {
            let base = match base {
                Base::Auto => auto_hadamard_base(f, n)?,
                Base::Js(_) => return Err(bad_base()),
                b => b,
            };
            let (bits, dec) = hadamard_base(f, base)?;
            if n < bits {
                return Err(CliError::Usage(format!("n = {n} is smaller than base {base}")));
            }
            let mut circuit = synth_depth_d(&dec, n / bits, d)?;
            if n % bits > 0 {
                circuit = circuit.kron_tail(&hadamard(f, n % bits)?)?;
            }
            Ok(Built { circuit, base: base.to_string(), q: 2 })
        }
        Family::Disjointness => {
            let m = match base {
                Base::Auto | Base::Js(None) => None,
                Base::Js(m) => m,
                _ => return Err(bad_base()),
            };
            let circuit = rn_depth_d(f, n, d, m)?;
            Ok(Built { circuit, base: format!("js:{}", m.unwrap_or(n.div_ceil(d))), q: 2 })
        }
        Family::Kron2 => {
            if !matches!(base, Base::Auto | Base::H3Cube) {
                return Err(bad_base());
            }
            let m = inputs.matrix.as_ref().expect("loaded");
            if m.shape() != (2, 2) {
                return Err(CliError::Usage("kron2 needs a 2x2 base matrix".into()));
            }
            if n < 3 {
                return Err(CliError::Usage("kron2 needs n >= 3".into()));
            }
            let dec = cube_decomposition_general(m)?;
            let mut circuit = synth_depth_d(&dec, n / 3, d)?;
            if n % 3 > 0 {
                circuit = circuit.kron_tail(&m.kron_power(n % 3)?)?;
            }
            Ok(Built { circuit, base: "h3cube".into(), q: 2 })
        }
        Family::Vf => {
            let m = match base {
                Base::Auto | Base::Js(None) => None,
                Base::Js(m) => m,
                _ => return Err(bad_base()),
            };
            let table = inputs.table.as_ref().expect("loaded");
            let witness = build_vf_witness(table)?;
            // V_f = R_n D_f R_n: the diagonal is folded into the last factor
            // of the first copy of the R_n circuit.
            let half = rn_depth_d(f, n, d, m)?.materialize_factors()?;
            let mut factors = half.clone();
            let last = factors.len() - 1;
            factors[last] = factors[last].scale_cols(&witness.b)?;
            factors.extend(half);
            let circuit = SynchronousCircuit::from_matrices(factors)?;
            Ok(Built { circuit, base: format!("js:{}", m.unwrap_or(n.div_ceil(d))), q: 2 })
        }
        Family::Dft => Err(CliError::Usage("no construction for dft; it is too rigid for this approach (see `rigidity`)".into())),
    }
}

/// Dense butterfly baseline: `n` slots of side `q` in `min(d, n)` nearly
/// equal groups, each group costing `q^(n + g)` wires.
pub fn trivial_wires(q: usize, n: usize, d: usize) -> u128 {
    let groups = d.min(n).max(1);
    (0..groups)
        .map(|l| {
            let g = n / groups + usize::from(l < n % groups);
            (q as u128).pow((n + g) as u32)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_names_round_trip() {
        for s in ["auto", "h2", "h3cube", "h4", "js", "js:4"] {
            assert_eq!(s.parse::<Base>().unwrap().to_string(), s);
        }
        assert!("js:0".parse::<Base>().is_err());
        assert!("h5".parse::<Base>().is_err());
        assert!("circle".parse::<Family>().is_err());
    }

    #[test]
    fn trivial_baseline() {
        assert_eq!(trivial_wires(2, 8, 2), 8192);
        assert_eq!(trivial_wires(2, 12, 3), 196608);
        assert_eq!(trivial_wires(2, 3, 5), 3 * 16);
    }

    #[test]
    fn auto_picks_h4() {
        let f = PrimeField::default();
        assert_eq!(auto_hadamard_base(&f, 8).unwrap(), Base::H4);
        assert_eq!(auto_hadamard_base(&f, 3).unwrap(), Base::H3Cube);
        assert_eq!(auto_hadamard_base(&f, 2).unwrap(), Base::H2);
        assert!(auto_hadamard_base(&f, 1).is_err());
    }
}
