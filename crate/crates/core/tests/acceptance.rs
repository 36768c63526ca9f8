//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS or FAIL line; exits nonzero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ncstoch::automata::{
    build_code_exprs, check_code_decomposition, check_prop1, check_structure, code_series, monoid_closure,
    uniform_weights, verify_thm2, Automaton, BoolMat, Thm2Config, DEFAULT_MONOID_CAP,
};
use ncstoch::commutative::{compare_b_with_lambda_det, verify_b_equals_lambda_det, verify_lemma5_and_tree_theorem};
use ncstoch::exact_arith::{limit_matrix, multiplicity_of_one, q, QMatrix, Rational};
use ncstoch::free_series::TruncSeries;
use ncstoch::quasidet::{verify_quasidet_basics, verify_retakh_identities, verify_thm6_series};
use ncstoch::ratexpr::{eval_bernoulli, eval_series, parse, RatExpr};
use ncstoch::report::{Report, Status};
use ncstoch::sampling::{random_stochastic, trial_rng};
use ncstoch::stochastic::{
    build_c, build_p, parse_scalar_fixture, verify_fundamental_identity, verify_point, verify_thm1, GenericMatrix,
    Thm1Config,
};

const SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn require(r: &Report) -> Result<(), String> {
    match r.failures().next() {
        None if r.all_pass() => Ok(()),
        None => Err(format!("{}: no checks ran", r.command)),
        Some(c) => Err(format!(
            "{} / {} [{:?}]: {} {}",
            r.command,
            c.name,
            c.status,
            c.residual,
            c.witness.as_deref().unwrap_or("")
        )),
    }
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn thm1_suite() -> Outcome {
    let start = Instant::now();
    let mut checks = 0;
    for (n, bound) in [(2, 6), (3, 6), (4, 4)] {
        let r = verify_thm1(&Thm1Config::new(n, bound, vec![1, 2, 3], 10, SEED)).map_err(|e| e.to_string())?;
        require(&r)?;
        checks += r.checks.len();
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(300), || format!("took {took:?}"))?;
    Ok(format!("{checks} checks, {:.1}s", took.as_secs_f64()))
}

fn example1() -> Outcome {
    let g = GenericMatrix::new(2).map_err(|e| e.to_string())?;
    let c1 = build_c(&g, 0).map_err(|e| e.to_string())?;
    let p1 = build_p(&g, 0).map_err(|e| e.to_string())?;
    ensure(c1 == parse("a + b (d)^* c").unwrap(), || format!("C_1 = {}", c1.render()))?;
    ensure(p1 == parse("1 + b (d)^*").unwrap(), || format!("P_1 = {}", p1.render()))?;
    let text = std::fs::read_to_string(fixture("example1.json")).map_err(|e| e.to_string())?;
    let (g, a) = parse_scalar_fixture(&text).map_err(|e| e.to_string())?;
    let r = verify_point(&g, &a);
    require(&r)?;
    let want = serde_json::json!(["2/5", "3/5"]);
    ensure(r.parameters["P_inverse"] == want, || format!("P^-1 = {}", r.parameters["P_inverse"]))?;
    ensure(r.parameters["alpha"] == want, || format!("alpha = {}", r.parameters["alpha"]))?;
    Ok("P^-1 = alpha = (2/5, 3/5)".into())
}

fn fundamental() -> Outcome {
    for n in 1..=3 {
        require(&verify_fundamental_identity(n, 5).map_err(|e| e.to_string())?)?;
    }
    Ok("n = 1, 2, 3 at degree 5".into())
}

fn example2() -> Outcome {
    let text = std::fs::read_to_string(fixture("example2.aut")).map_err(|e| e.to_string())?;
    let aut = Automaton::parse(&text).map_err(|e| e.to_string())?;
    let s = check_structure(&aut, DEFAULT_MONOID_CAP).map_err(|e| e.to_string())?;
    ensure(s.unambiguous && s.complete && s.transitive, || format!("{s:?}"))?;
    let mon = monoid_closure(&aut, DEFAULT_MONOID_CAP).map_err(|e| e.to_string())?;
    let ba = BoolMat::from_rows(&[vec![0, 0, 0], vec![0, 1, 0], vec![0, 1, 0]]);
    ensure(mon.contains(&ba), || "mu(ba) missing".into())?;
    ensure(mon.max_rows == vec![vec![0, 1, 0], vec![1, 0, 1]], || format!("rows {:?}", mon.max_rows))?;
    ensure(mon.max_cols == vec![vec![0, 1, 1], vec![1, 1, 0]], || format!("cols {:?}", mon.max_cols))?;
    require(&check_prop1(&aut, &mon))?;

    let alpha = aut.alphabet();
    let (c1, _) = code_series(&aut, 0, 6).map_err(|e| e.to_string())?;
    let fact = eval_series(&parse("(1 + a) (a + b + c - 1) (1 + b)").unwrap(), &alpha, 6).map_err(|e| e.to_string())?;
    let lhs = c1.sub(&TruncSeries::one(&alpha, 6)).map_err(|e| e.to_string())?;
    ensure(lhs == fact, || format!("C_1 - 1 - product = {}", lhs.sub(&fact).unwrap()))?;

    let w = uniform_weights(&aut);
    let inv: Vec<Rational> = (0..3)
        .map(|i| eval_bernoulli(&build_code_exprs(&aut, i).unwrap().1, &w).map(|p| p.recip()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure(inv == vec![q(3, 7), q(1, 7), q(3, 7)], || format!("P^-1 = {inv:?}"))?;
    let col = |c: &[u8]| -> Rational { (0..3).filter(|&i| c[i] == 1).map(|i| inv[i].clone()).sum() };
    ensure(mon.max_cols.iter().all(|c| col(c) == q(4, 7)), || "maximal columns differ from 4/7".into())?;

    let r = verify_thm2(&aut, &Thm2Config::new(6, vec![1, 2], 10, SEED)).map_err(|e| e.to_string())?;
    require(&r)?;
    Ok(format!("monoid {} elements, thm2 {} checks", mon.elements.len(), r.checks.len()))
}

fn trees_and_minors() -> Outcome {
    for n in 2..=5 {
        require(&verify_lemma5_and_tree_theorem(n, 10, SEED).map_err(|e| e.to_string())?)?;
    }
    let mut eps = Vec::new();
    for n in 2..=3 {
        require(&verify_b_equals_lambda_det(n).map_err(|e| e.to_string())?)?;
        eps.push(format!("eps_{n} = {}", compare_b_with_lambda_det(n).map_err(|e| e.to_string())?.epsilon.unwrap()));
    }
    Ok(eps.join(", "))
}

fn quasideterminants() -> Outcome {
    require(&verify_quasidet_basics(4, 20, SEED))?;
    for n in 2..=4 {
        for k in 1..=2 {
            require(&verify_retakh_identities(n, k, 20, SEED).map_err(|e| e.to_string())?)?;
        }
    }
    for n in 1..=3 {
        require(&verify_thm6_series(n, 6).map_err(|e| e.to_string())?)?;
    }
    Ok("basics, (n,k) in {2,3,4}x{1,2}, path sums to degree 6".into())
}

fn negative_controls() -> Outcome {
    let mut cfg = Thm1Config::new(3, 4, vec![1, 2], 5, SEED);
    cfg.break_row = Some(1);
    let r = verify_thm1(&cfg).map_err(|e| e.to_string())?;
    for name in ["series: eigenvector", "matrix k=1: eigenvector", "matrix k=2: eigenvector"] {
        let c = r.find(name).ok_or_else(|| format!("{name} missing"))?;
        ensure(c.status == Status::Fail, || format!("{name} did not fail"))?;
    }

    let mut aut = Automaton::example2();
    aut.matrix_mut(0).set(0, 0, 1);
    let s = check_structure(&aut, DEFAULT_MONOID_CAP).map_err(|e| e.to_string())?;
    ensure(!s.unambiguous, || "corrupted automaton reported unambiguous".into())?;
    let r = verify_thm2(&aut, &Thm2Config::new(4, vec![1], 2, SEED)).map_err(|e| e.to_string())?;
    ensure(!r.all_pass(), || "thm2 passed on an ambiguous automaton".into())?;

    let m = |rows: [[u8; 2]; 2]| BoolMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    let parity = Automaton::new(2, vec![("a", m([[0, 1], [1, 0]])), ("b", m([[1, 0], [0, 1]]))]).unwrap();
    let (_, p1) = build_code_exprs(&parity, 0).map_err(|e| e.to_string())?;
    let w = uniform_weights(&parity);
    let good = check_code_decomposition(&parity, 0, &RatExpr::one(), &p1, &RatExpr::zero(), 6, &w).map_err(|e| e.to_string())?;
    require(&good)?;
    let bad = check_code_decomposition(&parity, 0, &RatExpr::one(), &p1, &parse("a b").unwrap(), 6, &w)
        .map_err(|e| e.to_string())?;
    let c = bad.find("A* = S C* P + F").ok_or("decomposition check missing")?;
    ensure(c.status == Status::Fail, || "wrong F accepted".into())?;
    let witness = c.witness.clone().unwrap_or_default();
    ensure(witness.starts_with("a.b"), || format!("witness {witness}"))?;
    Ok(format!("wrong F witness {witness}"))
}

fn limit_and_multiplicity() -> Outcome {
    for trial in 0..20u64 {
        let n = 1 + (trial as usize % 5);
        let m = random_stochastic(&mut trial_rng(SEED, trial), n);
        let l = limit_matrix(&m).map_err(|e| e.to_string())?;
        ensure(l.rank() == 1, || format!("trial {trial}: rank {}", l.rank()))?;
        ensure((1..n).all(|i| l.row(i) == l.row(0)), || format!("trial {trial}: rows differ"))?;
        ensure(&l * &m == l, || format!("trial {trial}: L M != L"))?;
        ensure(multiplicity_of_one(&m) == 1, || format!("trial {trial}: multiplicity {}", multiplicity_of_one(&m)))?;
    }
    let id = QMatrix::identity(2);
    ensure(multiplicity_of_one(&id) == 2, || "identity multiplicity".into())?;
    Ok("20 instances, n <= 5".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("stochastic identities, n in {2,3,4}, k in {1,2,3}", thm1_suite),
        ("example 1 closed forms and stationary vector", example1),
        ("fundamental factorization as series", fundamental),
        ("example 2 automaton and its identities", example2),
        ("arborescences, minors and det derivative", trees_and_minors),
        ("quasideterminants and path sums", quasideterminants),
        ("negative controls", negative_controls),
        ("limit matrix and multiplicity of 1", limit_and_multiplicity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(note) => println!("criterion {} PASS  {name} ({note})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
