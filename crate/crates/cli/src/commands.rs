use std::fmt;
use std::fs;
use std::io as stdio;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rigidkron::circuit::{probe_circuit, verify_circuit, verify_circuit_kron, SynchronousCircuit};
use rigidkron::disjointness::{dense_removal, removal_threshold, REMOVAL_CSV_HEADER};
use rigidkron::field::{Field, FieldCtx, PrimeField, Rationals};
use rigidkron::io;
use rigidkron::mm::{mm_cost_report, rect_mm_exponent, MmBackend, MM_CSV_HEADER};
use rigidkron::rigidity::{brute_force_rigidity, RigiditySearch};
use rigidkron::transform::{batch_sums, Convention};
use rigidkron::Error;

use crate::families::{
    ctx_from_flag, load_inputs, read_file, resolve_ctx, slots, synthesize, target, trivial_wires, Base, Family, Inputs,
    Target,
};
use crate::{BatchArgs, BenchArgs, Cli, Command, DisjointArgs, ExportArgs, MmcostArgs, RigidityArgs, SynthArgs, TargetArgs, VerifyArgs};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(PathBuf, stdio::Error),
    Usage(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 3 for resource caps, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::DimensionCap { .. } | Error::WorkCapExceeded { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Usage(s) => f.write_str(s),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

/// Binds `$f` to the concrete field for `$ctx` and evaluates `$body`.
macro_rules! with_field {
    ($ctx:expr, $f:ident => $body:expr) => {
        match $ctx {
            FieldCtx::Prime(p) => {
                let $f = PrimeField::new(p as u64)?;
                $body
            }
            FieldCtx::Rational => {
                let $f = Rationals;
                $body
            }
        }
    };
}

pub fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Verify(a) => verify(cli, a),
        Command::Rigidity(a) => rigidity(cli, a),
        Command::Batch(a) => batch(a),
        Command::DisjointStats(a) => disjoint_stats(a),
        Command::Bench(a) => bench(a),
        Command::Mmcost(a) => mmcost(cli, a),
        Command::Export(a) => export(a),
    }
}

fn write_out(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn family_of(t: &TargetArgs) -> CliResult<Family> {
    t.family.parse()
}

fn fmt_bound(b: Option<f64>) -> String {
    b.map_or_else(|| "-".to_string(), |b| format!("{b:.1}"))
}

/// Dense `N^2` for vf, the butterfly baseline for Kronecker powers.
fn baseline(family: Family, q: usize, n: usize, d: usize) -> u128 {
    match family {
        Family::Vf => (q as u128).pow(2 * n as u32),
        _ => trivial_wires(q, n, d),
    }
}

fn synth(a: &SynthArgs) -> CliResult<u8> {
    let family = family_of(&a.target)?;
    let base: Base = a.base.parse()?;
    let ctx = resolve_ctx(family, a.target.field, a.target.matrix.as_deref(), a.target.table.as_deref())?;
    with_field!(ctx, f => synth_in(&f, family, base, a))
}

fn synth_in<F: Field>(f: &F, family: Family, base: Base, a: &SynthArgs) -> CliResult<u8> {
    let inputs = load_inputs(f, family, a.target.matrix.as_deref(), a.target.table.as_deref())?;
    let n = slots(family, a.target.n, &inputs)?;
    let built = synthesize(f, family, n, a.depth, base, &inputs)?;
    let c = &built.circuit;
    if let Some(out) = &a.out {
        write_out(out, &io::write_circuit(c)?)?;
    }
    println!(
        "family={family} n={n} N={} d={} base={} wires={} trivial={} bound={}",
        c.rows(),
        c.depth(),
        built.base,
        c.wires(),
        baseline(family, built.q, n, a.depth),
        fmt_bound(c.formula.map(|fb| fb.stated(c.depth()))),
    );
    Ok(0)
}

fn verify(cli: &Cli, a: &VerifyArgs) -> CliResult<u8> {
    let family = family_of(&a.target)?;
    let text = read_file(&a.circuit)?;
    let ctx = io::peek_field(&text)?;
    if let Some(fd) = a.target.field {
        if FieldCtx::from_descriptor(fd)? != ctx {
            return Err(CliError::Usage(format!("--field {fd} disagrees with the circuit file over {ctx}")));
        }
    }
    with_field!(ctx, f => verify_in(cli, &f, family, &text, a))
}

fn verify_in<F: Field>(cli: &Cli, f: &F, family: Family, text: &str, a: &VerifyArgs) -> CliResult<u8> {
    let circ: SynchronousCircuit<F> = io::read_circuit(f, text)?;
    let inputs = load_inputs(f, family, a.target.matrix.as_deref(), a.target.table.as_deref())?;
    let n = match (a.target.n, &inputs.table, family) {
        (Some(n), _, _) => n,
        (None, Some(_), _) => slots(family, None, &inputs)?,
        (None, None, Family::Dft) => circ.rows() as usize,
        (None, None, Family::Kron2) => {
            let q = inputs.matrix.as_ref().expect("loaded").rows() as u128;
            slots_of(circ.rows(), q)?
        }
        (None, None, _) => slots_of(circ.rows(), 2)?,
    };
    let tgt = target(f, family, n, &inputs)?;
    let (rows, cols) = match &tgt {
        Target::Kron(k) => (k.rows(), k.cols()),
        Target::Dense(m) => (m.rows() as u128, m.cols() as u128),
    };
    if (rows, cols) != (circ.rows(), circ.cols()) {
        println!("equal=false wires={} depth={} shape={}x{} target={rows}x{cols}", circ.wires(), circ.depth(), circ.rows(), circ.cols());
        return Ok(1);
    }
    let report = match (a.probe, &tgt) {
        (Some(trials), _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            probe_circuit(&circ, &tgt.as_kron(), trials, &mut rng)?
        }
        (None, Target::Kron(k)) => verify_circuit_kron(&circ, k)?,
        (None, Target::Dense(m)) => verify_circuit(&circ, m)?,
    };
    println!("equal={} wires={} depth={}", report.equal, report.wires, report.depth);
    Ok(if report.equal { 0 } else { 1 })
}

/// `n` with `q^n = rows`.
fn slots_of(rows: u128, q: u128) -> CliResult<usize> {
    let mut n = 0;
    let mut x = 1u128;
    while x < rows {
        x = x.saturating_mul(q);
        n += 1;
    }
    if x != rows || q < 2 {
        return Err(CliError::Usage(format!("circuit size {rows} is not a power of {q}; pass --n")));
    }
    Ok(n)
}

fn rigidity(cli: &Cli, a: &RigidityArgs) -> CliResult<u8> {
    let m = match (&a.matrix, &a.family) {
        (Some(path), None) => {
            let text = read_file(path)?;
            let ctx = io::peek_field(&text)?;
            let p = ctx.modulus().ok_or(Error::RationalUnsupported)?;
            if let Some(fd) = a.field {
                if FieldCtx::from_descriptor(fd)? != ctx {
                    return Err(CliError::Usage(format!("--field {fd} disagrees with the matrix file over {ctx}")));
                }
            }
            io::read_matrix(&PrimeField::new(p as u64)?, &text)?
        }
        (None, Some(fam)) => {
            let family: Family = fam.parse()?;
            if matches!(family, Family::Kron2 | Family::Vf) {
                return Err(CliError::Usage(format!("{family} targets need a matrix file here")));
            }
            let p = ctx_from_flag(a.field)?.modulus().ok_or(Error::RationalUnsupported)?;
            let f = PrimeField::new(p as u64)?;
            let n = a.n.ok_or_else(|| CliError::Usage("--family needs --n".into()))?;
            target(&f, family, n, &Inputs { matrix: None, table: None })?.materialize()?
        }
        _ => return Err(CliError::Usage("give exactly one of --matrix and --family".into())),
    };
    match brute_force_rigidity(&m, a.rank, a.max_changes, cli.work_cap)? {
        RigiditySearch::Found { changes, witness } => {
            println!("{changes}");
            if let Some(out) = &a.out {
                write_out(out, &io::write_witness(&witness))?;
            }
        }
        RigiditySearch::ExceedsBound { max_changes } => println!(">{max_changes}"),
    }
    Ok(0)
}

fn batch(a: &BatchArgs) -> CliResult<u8> {
    let text = read_file(&a.table)?;
    let ctx = match a.field {
        Some(fd) => FieldCtx::from_descriptor(fd)?,
        None => io::peek_field(&text)?,
    };
    let conv = Convention::from_str(&a.convention)?;
    let points_text = read_file(&a.points)?;
    with_field!(ctx, f => {
        let table = io::read_truth_table_as(&f, &text)?;
        let n = table.n();
        let points = io::read_points(&points_text, n)?;
        let res = batch_sums(&table, &points, conv)?;
        for (x, v) in &res.answers {
            println!("{} {}", io::format_point(*x, n), f.format(v));
        }
        eprintln!("# ops adds={} subs={} mults={}", res.ops.adds, res.ops.subs, res.ops.mults);
        if let Some(w) = &res.warning {
            eprintln!("warning: {w}");
        }
        Ok(0)
    })
}

/// Accepts `p/q`, integers and decimals.
fn parse_fraction(s: &str) -> CliResult<BigRational> {
    let bad = || CliError::Usage(format!("cannot parse '{s}' as a fraction"));
    if let Some((int, frac)) = s.split_once('.') {
        let num: BigRational = format!("{int}{frac}").parse().map_err(|_| bad())?;
        let den: BigRational = format!("1{}", "0".repeat(frac.len())).parse().map_err(|_| bad())?;
        return Ok(num / den);
    }
    s.parse().map_err(|_| bad())
}

fn disjoint_stats(a: &DisjointArgs) -> CliResult<u8> {
    let k = match (a.k, &a.a) {
        (Some(k), _) => k,
        (None, Some(s)) => removal_threshold(a.n, &parse_fraction(s)?),
        (None, None) => return Err(CliError::Usage("give --k or --a".into())),
    };
    let report = dense_removal(a.n, k)?;
    println!("{REMOVAL_CSV_HEADER}");
    println!("{}", report.csv_row());
    Ok(0)
}

/// `start:stop:step` (inclusive) or a comma list.
fn parse_list(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse list '{s}'"));
    let nums = |t: &str| t.split(|c| c == ':' || c == ',').map(|x| x.trim().parse::<usize>().map_err(|_| bad())).collect::<CliResult<Vec<_>>>();
    if s.contains(':') {
        let v = nums(s)?;
        let (start, stop, step) = match v[..] {
            [a, b] => (a, b, 1),
            [a, b, c] if c > 0 => (a, b, c),
            _ => return Err(bad()),
        };
        Ok((start..=stop).step_by(step).collect())
    } else {
        nums(s)
    }
}

pub const BENCH_CSV_HEADER: &str = "family,n,N,d,base,wires,trivial_wires,formula_bound,ratio_nlogn";

fn bench(a: &BenchArgs) -> CliResult<u8> {
    let family: Family = a.family.parse()?;
    let base: Base = a.base.parse()?;
    let ns = parse_list(&a.n)?;
    let ds = parse_list(&a.depth)?;
    let ctx = resolve_ctx(family, a.field, a.matrix.as_deref(), a.table.as_deref())?;
    with_field!(ctx, f => {
        let inputs = load_inputs(&f, family, a.matrix.as_deref(), a.table.as_deref())?;
        println!("{BENCH_CSV_HEADER}");
        for &n in &ns {
            let n = slots(family, Some(n), &inputs)?;
            for &d in &ds {
                let built = synthesize(&f, family, n, d, base, &inputs)?;
                let c = &built.circuit;
                let big_n = c.rows();
                let nlogn = big_n as f64 * (big_n as f64).log2();
                println!(
                    "{family},{n},{big_n},{},{},{},{},{},{:.4}",
                    c.depth(),
                    built.base,
                    c.wires(),
                    baseline(family, built.q, n, d),
                    c.formula.map_or_else(String::new, |fb| format!("{:.1}", fb.stated(c.depth()))),
                    c.wires() as f64 / nlogn,
                );
            }
        }
        Ok(0)
    })
}

fn mmcost(cli: &Cli, a: &MmcostArgs) -> CliResult<u8> {
    let backends: Vec<MmBackend> = match a.backend.as_str() {
        "both" => vec![MmBackend::Naive, MmBackend::strassen()],
        s => vec![s.parse()?],
    };
    let ks = parse_list(&a.k)?;
    println!("{MM_CSV_HEADER}");
    let mut ok = true;
    for &k in &ks {
        for &b in &backends {
            let r = mm_cost_report(a.q, a.n, k, b, cli.seed)?;
            ok &= r.verified;
            println!("{}", r.csv_row());
        }
    }
    for &k in &ks {
        eprintln!("# k={k} rect_exponent={:.4}", rect_mm_exponent(k));
    }
    if !ok {
        eprintln!("error: round-based product disagreed with the direct evaluation");
        return Ok(1);
    }
    Ok(0)
}

fn export(a: &ExportArgs) -> CliResult<u8> {
    let family = family_of(&a.target)?;
    let ctx = resolve_ctx(family, a.target.field, a.target.matrix.as_deref(), a.target.table.as_deref())?;
    with_field!(ctx, f => {
        let inputs = load_inputs(&f, family, a.target.matrix.as_deref(), a.target.table.as_deref())?;
        let n = slots(family, a.target.n, &inputs)?;
        let text = io::write_matrix(&target(&f, family, n, &inputs)?.materialize()?);
        match &a.out {
            Some(p) => write_out(p, &text)?,
            None => print!("{text}"),
        }
        Ok(0)
    })
}
