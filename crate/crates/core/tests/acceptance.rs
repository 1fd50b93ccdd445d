//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vqrsim::benchmark::{BenchmarkConfig, Benchmarks, PercentileClass};
use vqrsim::corpus::{Corpus, UniversityId};
use vqrsim::crediting::{credits, CreditMode};
use vqrsim::indicators::{FaiiConfig, FaiiSettings, Productivity, Scope};
use vqrsim::pipeline::{cmd_run, evaluate, RunConfig, Thresholds};
use vqrsim::ranking::{compare, correlation, CorrelationKind, RankingList, Scenario};
use vqrsim::rules::{MeritOutcome, RuleSet};
use vqrsim::selection::{solve_exact, solve_greedy, Candidate, SelectionProblem};
use vqrsim::synth::{generate, CoauthorDistribution, SectorSpec, SynthSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Criterion 1 -------------------------------------------------------------

fn matrix_fidelity() -> Outcome {
    use MeritOutcome::*;
    // Rows: citation class 1..4; columns: journal class 1..4.
    let early = [[A, A, A, IR], [B, B, B, IR], [IR, C, C, C], [IR, D, D, D]];
    let late = [[A, IR, IR, IR], [A, B, C, D], [A, B, C, D], [IR, IR, IR, D]];
    let start = Instant::now();
    let rules = RuleSet::chemistry();
    let mut checked = 0;
    for (years, table) in [(2004..=2008, early), (2009..=2010, late)] {
        for year in years {
            let m = rules.matrix_for(year).map_err(|e| e.to_string())?;
            for ic in 1..=4u8 {
                for ir in 1..=4u8 {
                    let got = m.cell(PercentileClass::new(ic).unwrap(), PercentileClass::new(ir).unwrap());
                    let want = table[ic as usize - 1][ir as usize - 1];
                    check(got == want, || {
                        format!("year {year} cell ({ic},{ir}): {got:?} != {want:?}")
                    })?;
                    if year == 2004 || year == 2009 {
                        checked += 1;
                    }
                }
            }
        }
    }
    check(checked == 32, || format!("{checked} cells checked"))?;
    check(start.elapsed() < Duration::from_secs(1), || "slower than 1 s".into())?;
    Ok(format!("{checked} cells match, every year of the window"))
}

// Criterion 2 -------------------------------------------------------------

fn merit_constants() -> Outcome {
    let r = RuleSet::chemistry();
    let got = [
        r.merit_scores.a,
        r.merit_scores.b,
        r.merit_scores.c,
        r.merit_scores.d,
        r.penalty_fraud,
        r.penalty_inadmissible,
        r.penalty_missing,
    ];
    let want = [1.0, 0.8, 0.5, 0.0, -2.0, -1.0, -0.5];
    check(got == want, || format!("{got:?} != {want:?}"))?;
    Ok("A/B/C/D = 1/0.8/0.5/0, penalties -2/-1/-0.5".into())
}

// Criterion 3 -------------------------------------------------------------

struct Instance {
    quotas: Vec<u32>,
    /// Per publication: (researcher index, weight).
    edges: Vec<Vec<(usize, f64)>>,
}

impl Instance {
    fn problem(&self) -> SelectionProblem {
        let quotas = self
            .quotas
            .iter()
            .enumerate()
            .map(|(r, q)| (format!("r{r}").into(), *q))
            .collect();
        let candidates = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(p, es)| {
                es.iter().map(move |&(r, w)| Candidate {
                    researcher_id: format!("r{r}").into(),
                    publication_id: format!("p{p:02}").into(),
                    weight: w,
                })
            })
            .collect();
        SelectionProblem::new("U".into(), candidates, quotas).unwrap()
    }

    /// Exhaustive search: every publication goes to nobody or to one of its
    /// authors with quota left.
    fn brute_force(&self) -> f64 {
        fn go(inst: &Instance, p: usize, left: &mut Vec<u32>) -> f64 {
            if p == inst.edges.len() {
                return 0.0;
            }
            let mut best = go(inst, p + 1, left);
            for &(r, w) in &inst.edges[p] {
                if left[r] > 0 {
                    left[r] -= 1;
                    best = best.max(w + go(inst, p + 1, left));
                    left[r] += 1;
                }
            }
            best
        }
        go(self, 0, &mut self.quotas.clone())
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_res = rng.gen_range(1..=5);
    let n_pub = rng.gen_range(1..=10);
    let graded = rng.gen_bool(0.5);
    let quotas = (0..n_res).map(|_| rng.gen_range(1..=3)).collect();
    let edges = (0..n_pub)
        .map(|_| {
            let k = rng.gen_range(1..=n_res.min(3));
            let mut authors: Vec<usize> = (0..n_res).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n_res);
                authors.swap(i, j);
            }
            authors[..k]
                .iter()
                .map(|&r| {
                    let w = if graded {
                        [0.0, 0.5, 0.8, 1.0][rng.gen_range(0..4)]
                    } else {
                        rng.gen_range(0.0..3.0)
                    };
                    (r, w)
                })
                .collect()
        })
        .collect();
    Instance { quotas, edges }
}

fn selection_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20042010);
    let fixture = Instance {
        quotas: vec![1, 1],
        edges: vec![vec![(0, 0.9), (1, 0.8)], vec![(0, 0.85), (1, 0.1)]],
    };
    let mut instances = vec![fixture];
    while instances.len() < 200 {
        instances.push(random_instance(&mut rng));
    }
    let mut strictly_worse = 0;
    for (i, inst) in instances.iter().enumerate() {
        let problem = inst.problem();
        let oracle = inst.brute_force();
        let exact = solve_exact(&problem);
        let greedy = solve_greedy(&problem);
        check((exact.total_weight - oracle).abs() <= 1e-9, || {
            format!("instance {i}: exact {} vs brute force {oracle}", exact.total_weight)
        })?;
        check(greedy.total_weight <= oracle + 1e-9, || {
            format!("instance {i}: greedy {} above optimum {oracle}", greedy.total_weight)
        })?;
        let mut used = BTreeSet::new();
        for c in &exact.chosen {
            check(used.insert(c.publication_id.clone()), || {
                format!("instance {i}: publication used twice")
            })?;
        }
        for (r, n) in &exact.per_researcher_counts {
            check(*n <= problem.quotas()[r], || format!("instance {i}: quota exceeded"))?;
        }
        if greedy.total_weight < oracle - 1e-9 {
            strictly_worse += 1;
        }
    }
    let f = instances[0].problem();
    check((solve_exact(&f).total_weight - 1.65).abs() < 1e-12, || {
        "2x2 fixture exact != 1.65".into()
    })?;
    check((solve_greedy(&f).total_weight - 1.0).abs() < 1e-12, || {
        "2x2 fixture greedy != 1.0".into()
    })?;
    check(strictly_worse >= 1, || "greedy never strictly suboptimal".into())?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "200 instances optimal, greedy strictly worse on {strictly_worse}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// Criterion 4 -------------------------------------------------------------

fn credit_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let unis: Vec<UniversityId> = ["U1", "U2", "U3"].map(UniversityId::from).to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=60);
        let aff: Vec<Option<UniversityId>> = (0..n)
            .map(|_| rng.gen_bool(0.8).then(|| unis[rng.gen_range(0..unis.len())].clone()))
            .collect();
        for mode in [CreditMode::EqualSplit, CreditMode::LifeScienceByline] {
            let v = credits(mode, &aff);
            check(v.len() == n, || "credit vector length".into())?;
            check(v.iter().all(|c| *c >= 0.0), || format!("negative credit in {v:?}"))?;
            worst = worst.max((v.iter().sum::<f64>() - 1.0).abs());
        }
    }
    check(worst <= 1e-12, || format!("sum deviates by {worst:e}"))?;

    let same: Vec<Option<UniversityId>> = vec![Some("U1".into()); 10];
    let mut want = vec![0.025; 10];
    want[0] = 0.4;
    want[9] = 0.4;
    let got = credits(CreditMode::LifeScienceByline, &same);
    check(close(&got, &want), || format!("10-author fixture {got:?}"))?;

    let mut diff: Vec<Option<UniversityId>> = vec![Some("U1".into()); 6];
    diff[5] = Some("U2".into());
    let got = credits(CreditMode::LifeScienceByline, &diff);
    check(close(&got, &[0.3, 0.15, 0.05, 0.05, 0.15, 0.3]), || {
        format!("6-author fixture {got:?}")
    })?;
    Ok(format!(
        "20000 vectors, max |sum - 1| = {worst:.1e}; byline fixtures match"
    ))
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
}

// Criterion 5 -------------------------------------------------------------

fn with_salaries_scaled(corpus: &Corpus, factor: f64) -> Corpus {
    let researchers = corpus
        .researchers()
        .iter()
        .cloned()
        .map(|mut r| {
            r.salary *= factor;
            r
        })
        .collect();
    Corpus::new(
        corpus.universities().to_vec(),
        researchers,
        corpus.publications().to_vec(),
        corpus.authorships().to_vec(),
        corpus.window(),
    )
    .unwrap()
}

fn productivity(corpus: &Corpus) -> Productivity {
    let benchmarks = Benchmarks::build(corpus, &BenchmarkConfig::default()).unwrap();
    let settings = FaiiSettings::default();
    Productivity::compute(corpus, &FaiiConfig::new(&benchmarks, &settings)).unwrap()
}

fn fss_closure() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for seed in [5, 55, 555] {
        let corpus = generate(&SynthSpec {
            n_universities: 12,
            researchers_per_university: 40,
            n_sds: Some(5),
            ..SynthSpec::new(seed)
        })
        .map_err(|e| e.to_string())?;
        let prod = productivity(&corpus);
        let sds: BTreeSet<String> = prod.sds_codes().map(str::to_owned).collect();
        for s in &sds {
            let (mut num, mut den) = (0.0, 0.0);
            for (u, cell_sds) in prod.cells() {
                if cell_sds == s {
                    let p = prod.fss_sds(u, s).map_err(|e| e.to_string())?;
                    num += p.salary * p.raw_fss / p.national_mean_fss;
                    den += p.salary;
                }
            }
            worst = worst.max((num / den - 1.0).abs());
        }

        let scaled = with_salaries_scaled(&corpus, 7.0);
        let prod7 = productivity(&scaled);
        let udas: BTreeSet<&str> = corpus.researchers().iter().map(|r| r.uda.as_str()).collect();
        let scopes: Vec<Scope> = udas
            .iter()
            .map(|u| Scope::Uda((*u).to_owned()))
            .chain([Scope::University])
            .collect();
        for u in corpus.universities() {
            for scope in &scopes {
                let a = prod.fss_aggregate(&u.id, scope).map_err(|e| e.to_string())?;
                let b = prod7.fss_aggregate(&u.id, scope).map_err(|e| e.to_string())?;
                worst_scale = worst_scale.max((a.fss_value - b.fss_value).abs());
            }
        }
        let config = RunConfig {
            thresholds: Thresholds { uda: 0, overall: 0 },
            ..RunConfig::default()
        };
        let (r1, r7) = (evaluate(&corpus, &config).unwrap(), evaluate(&scaled, &config).unwrap());
        for ((scope, scenario), list) in &r1.rankings {
            if *scenario == Scenario::Fss {
                let other = &r7.rankings[&(scope.clone(), *scenario)];
                let ranks = |l: &RankingList| {
                    l.entries
                        .iter()
                        .map(|e| (e.university_id.clone(), e.rank))
                        .collect::<Vec<_>>()
                };
                check(ranks(list) == ranks(other), || {
                    format!("seed {seed}: fss ranking of {scope} changed")
                })?;
            }
        }
    }
    check(worst <= 1e-9, || format!("closure deviates by {worst:e}"))?;
    check(worst_scale <= 1e-9, || {
        format!("7x salary changes fss by {worst_scale:e}")
    })?;
    Ok(format!(
        "3 corpora: closure error {worst:.1e}, 7x salary change {worst_scale:.1e}, rankings identical"
    ))
}

// Criterion 6 -------------------------------------------------------------

fn faii_invariance() -> Outcome {
    let corpus = generate(&SynthSpec {
        n_universities: 8,
        researchers_per_university: 30,
        ..SynthSpec::new(66)
    })
    .map_err(|e| e.to_string())?;
    let (year, category) = (2006, corpus.researchers()[0].sds.clone());
    let in_cell = |p: &vqrsim::Publication| p.year == year && p.subject_category == category && p.indexed;

    let mut scaled_pubs = corpus.publications().to_vec();
    for p in &mut scaled_pubs {
        if in_cell(p) {
            p.citations *= 5;
        }
    }
    let scaled = Corpus::new(
        corpus.universities().to_vec(),
        corpus.researchers().to_vec(),
        scaled_pubs,
        corpus.authorships().to_vec(),
        corpus.window(),
    )
    .unwrap();

    let settings = FaiiSettings::default();
    let faii_all = |c: &Corpus| -> Result<Vec<f64>, String> {
        let b = Benchmarks::build(c, &BenchmarkConfig::default()).map_err(|e| e.to_string())?;
        let cfg = FaiiConfig::new(&b, &settings);
        let mut out = Vec::new();
        for p in c.publications().iter().filter(|p| in_cell(p)) {
            let aff = c.byline_affiliations(&p.id).map_err(|e| e.to_string())?;
            for a in c.authors_of(&p.id).map_err(|e| e.to_string())? {
                out.push(
                    cfg.faii(p, a, &aff, CreditMode::EqualSplit)
                        .map_err(|e| e.to_string())?,
                );
            }
        }
        Ok(out)
    };
    let (before, after) = (faii_all(&corpus)?, faii_all(&scaled)?);
    check(!before.is_empty(), || "empty reference cell".into())?;
    check(before.iter().any(|v| *v > 0.0), || {
        "no cited publication in cell".into()
    })?;
    let worst = before
        .iter()
        .zip(&after)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(worst <= 1e-12, || format!("FAII moved by {worst:e}"))?;
    Ok(format!(
        "{} FAII values in cell ({year}, {category}) unchanged, max diff {worst:.1e}",
        before.len()
    ))
}

// Criterion 7 -------------------------------------------------------------

fn statistics_oracle() -> Outcome {
    let tol = 1e-12;
    let cases: Vec<(Vec<f64>, Vec<f64>, CorrelationKind, f64)> = vec![
        (
            vec![1., 2., 3., 4., 5.],
            vec![3., 5., 7., 9., 11.],
            CorrelationKind::Pearson,
            1.0,
        ),
        (
            vec![1., 2., 3., 4., 5.],
            vec![5., 4., 3., 2., 1.],
            CorrelationKind::Spearman,
            -1.0,
        ),
        (vec![1., 2., 3.], vec![1., 3., 2.], CorrelationKind::Spearman, 0.5),
        // Σd² = 2 over n = 4: 1 - 12/60.
        (
            vec![10., 20., 30., 40.],
            vec![1., 3., 2., 4.],
            CorrelationKind::Spearman,
            0.8,
        ),
        // Centered (-1,0,1) against (-1,-1,2): 3 / sqrt(2 * 6).
        (
            vec![1., 2., 3.],
            vec![0., 0., 3.],
            CorrelationKind::Pearson,
            3.0 / 12f64.sqrt(),
        ),
        // Ties: midranks (1.5,1.5,3) vs (1,2,3).
        (
            vec![1., 1., 2.],
            vec![1., 2., 3.],
            CorrelationKind::Spearman,
            1.5 / 3f64.sqrt(),
        ),
    ];
    for (xs, ys, kind, want) in &cases {
        let got = correlation(xs, ys, *kind).map_err(|e| e.to_string())?;
        check((got - want).abs() <= tol, || {
            format!("{kind:?}({xs:?}, {ys:?}) = {got}, want {want}")
        })?;
    }
    let l = RankingList::from_scores(
        "X",
        None,
        (0..9)
            .map(|i| (format!("U{i}").into(), ((i * 7) % 9) as f64 / 3.0))
            .collect(),
    )
    .unwrap();
    let r = compare(&l, &l).map_err(|e| e.to_string())?;
    check(
        r.ranks.pct_shifting_rank == 0.0 && r.ranks.max_shift == 0 && r.ranks.avg_shift == 0.0,
        || "rank shifts in identity report".into(),
    )?;
    check(
        r.quartiles.pct_shifting_quartile == 0.0 && r.quartiles.max_q_shift == 0,
        || "quartile shifts in identity report".into(),
    )?;
    check(
        (r.ranks.score_correlation.unwrap() - 1.0).abs() <= tol
            && (r.quartiles.quartile_correlation.unwrap() - 1.0).abs() <= tol
            && r.quartiles.top_to_nontop == Some(0.0),
        || "identity correlations".into(),
    )?;
    Ok(format!(
        "{} closed-form cases within 1e-12; compare(L, L) is the identity",
        cases.len()
    ))
}

// Criterion 8 -------------------------------------------------------------

fn field_contrast_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_universities: 20,
        researchers_per_university: 100,
        publications_per_researcher_mean: 4.0,
        citation_coauthor_elasticity: 0.5,
        university_effect_sigma: 0.6,
        researcher_effect_sigma: 0.4,
        sectors: vec![
            SectorSpec {
                external_author_rate: Some(0.95),
                coauthor_factor_sigma: Some(0.6),
                coauthors: CoauthorDistribution::Lognormal {
                    mean: 60.0,
                    sigma: 0.6,
                    min: 10,
                    max: 300,
                },
                ..sector("FIS/01", "PHYS")
            },
            SectorSpec {
                coauthors: CoauthorDistribution::Lognormal {
                    mean: 3.5,
                    sigma: 0.3,
                    min: 1,
                    max: 8,
                },
                ..sector("AGR/01", "AGRI")
            },
        ],
        ..SynthSpec::new(seed)
    }
}

fn sector(sds: &str, uda: &str) -> SectorSpec {
    serde_json::from_value(serde_json::json!({ "sds": sds, "uda": uda })).unwrap()
}

fn mean_authors(corpus: &Corpus, uda: &str) -> f64 {
    let lead_area: HashMap<_, _> = corpus.researchers().iter().map(|r| (&r.id, r.uda.as_str())).collect();
    let mut sizes = BTreeMap::new();
    for a in corpus.authorships() {
        if let Some(rid) = a.author_key.researcher() {
            if lead_area[rid] == uda {
                sizes.insert(a.publication_id.clone(), a.total_authors);
            }
        }
    }
    sizes.values().map(|&n| n as f64).sum::<f64>() / sizes.len() as f64
}

fn directional_field_contrast() -> Outcome {
    let mut lines = Vec::new();
    for seed in 1..=5 {
        let corpus = generate(&field_contrast_spec(seed)).map_err(|e| e.to_string())?;
        let (phys_n, agri_n) = (mean_authors(&corpus, "PHYS"), mean_authors(&corpus, "AGRI"));
        check(phys_n >= 50.0 && agri_n <= 4.0, || {
            format!("seed {seed}: mean authors {phys_n:.1} / {agri_n:.1} outside the required ranges")
        })?;
        let out = evaluate(&corpus, &RunConfig::default()).map_err(|e| e.to_string())?;
        let corr = |uda: &str| {
            out.comparisons
                .get(&(uda.to_owned(), Scenario::Vqr, Scenario::FaiiTopK))
                .and_then(|r| r.ranks.score_correlation)
        };
        let (Some(phys), Some(agri)) = (corr("PHYS"), corr("AGRI")) else {
            return Err(format!("seed {seed}: correlation undefined"));
        };
        check(phys < agri, || {
            format!("seed {seed}: physics {phys:.3} >= agriculture {agri:.3}")
        })?;
        lines.push(format!("{phys:.2}<{agri:.2}"));
    }
    Ok(format!(
        "vqr~faii score correlation physics<agriculture on 5 seeds: {}",
        lines.join(" ")
    ))
}

// Criterion 9 -------------------------------------------------------------

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        n_universities: 20,
        researchers_per_university: 100,
        publications_per_researcher_mean: 5.0,
        ..SynthSpec::new(2004)
    };
    let corpus = generate(&spec).map_err(|e| e.to_string())?;
    vqrsim::corpus::write_corpus(&corpus, tmp.path().join("corpus")).map_err(|e| e.to_string())?;
    let config = tmp.path().join("run.json");
    std::fs::write(&config, r#"{"corpus_dir": "corpus"}"#).map_err(|e| e.to_string())?;

    let mut times = Vec::new();
    for name in ["a", "b"] {
        let start = Instant::now();
        cmd_run(&config, Some(&tmp.path().join(name))).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
    }
    let (a, b) = (
        read_dir_bytes(&tmp.path().join("a")),
        read_dir_bytes(&tmp.path().join("b")),
    );
    check(a.len() > 3 * 5, || format!("only {} files written", a.len()))?;
    check(a == b, || "outputs differ between runs".into())?;
    let slowest = times.iter().max().unwrap();
    check(*slowest < Duration::from_secs(10), || format!("run took {slowest:?}"))?;
    Ok(format!(
        "{} universities / {} researchers / {} publications: {} identical files, slowest run {:.2} s",
        corpus.universities().len(),
        corpus.researchers().len(),
        corpus.publications().len(),
        a.len(),
        slowest.as_secs_f64()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("matrix fidelity", matrix_fidelity),
        ("merit constants", merit_constants),
        ("selection optimality", selection_optimality),
        ("credit conservation", credit_conservation),
        ("fss closure", fss_closure),
        ("faii invariance", faii_invariance),
        ("statistics oracle", statistics_oracle),
        ("physics vs agriculture correlation", directional_field_contrast),
        ("end-to-end determinism and scale", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
