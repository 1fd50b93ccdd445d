use std::collections::BTreeMap;

use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, LogNormal};

use vqrsim::corpus::{load_corpus, write_corpus, CorpusPaths};
use vqrsim::synth::{generate, CitationModel, CoauthorDistribution, LognormalParams, SectorSpec, SynthSpec};

fn sector(sds: &str) -> SectorSpec {
    serde_json::from_value(serde_json::json!({ "sds": sds, "uda": "AREA" })).unwrap()
}

#[test]
fn same_seed_gives_identical_files() {
    let spec = SynthSpec {
        n_universities: 4,
        researchers_per_university: 25,
        ..SynthSpec::new(42)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_corpus(&generate(&spec).unwrap(), a.path()).unwrap();
    write_corpus(&generate(&spec).unwrap(), b.path()).unwrap();
    for name in [
        CorpusPaths::UNIVERSITIES,
        CorpusPaths::RESEARCHERS,
        CorpusPaths::PUBLICATIONS,
        CorpusPaths::AUTHORSHIPS,
    ] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn cited_mean_matches_model() {
    let model = CitationModel {
        base: LognormalParams { mean: 8.0, sigma: 1.1 },
        year_factors: BTreeMap::new(),
    };
    let spec = SynthSpec {
        n_universities: 20,
        researchers_per_university: 100,
        university_effect_sigma: 0.0,
        researcher_effect_sigma: 0.0,
        sectors: vec![SectorSpec {
            citations: model.clone(),
            ..sector("S1")
        }],
        ..SynthSpec::new(1000)
    };
    let corpus = generate(&spec).unwrap();

    // E[floor X | floor X >= 1] = sum_{k>=1} P(X >= k) / P(X >= 1).
    let x = LogNormal::new(model.base.mu(), model.base.sigma).unwrap();
    let expected: f64 = (1..200_000).map(|k| x.sf(k as f64)).sum::<f64>() / x.sf(1.0);

    let mut cells: BTreeMap<i32, Vec<u64>> = BTreeMap::new();
    for p in corpus.publications() {
        cells.entry(p.year).or_default().push(p.citations);
    }
    let mut tested = 0;
    for (year, cites) in cells {
        if cites.len() < 1000 {
            continue;
        }
        let cited: Vec<f64> = cites.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect();
        let mean = cited.iter().sum::<f64>() / cited.len() as f64;
        assert!(
            (mean / expected - 1.0).abs() < 0.10,
            "year {year}: {mean} vs model {expected}"
        );
        tested += 1;
    }
    assert!(tested >= 5, "only {tested} cells had 1000 samples");
}

#[test]
fn bylines_are_complete_permutations() {
    let spec = SynthSpec {
        n_universities: 5,
        researchers_per_university: 60,
        sectors: vec![SectorSpec {
            coauthors: CoauthorDistribution::Lognormal {
                mean: 20.0,
                sigma: 0.8,
                min: 1,
                max: 50,
            },
            ..sector("BIG")
        }],
        ..SynthSpec::new(9)
    };
    let corpus = generate(&spec).unwrap();
    for p in corpus.publications() {
        let byline = corpus.authors_of(&p.id).unwrap();
        let total = byline[0].total_authors;
        let positions: Vec<u32> = byline.iter().map(|a| a.byline_position).collect();
        assert_eq!(positions, (1..=total).collect::<Vec<_>>());
        assert!(byline.iter().any(|a| !a.author_key.is_external()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn corpus_round_trips_through_csv(seed in any::<u64>(), unis in 1u32..5, per in 2u32..20, missing in 0.0f64..0.5) {
        let spec = SynthSpec {
            n_universities: unis,
            researchers_per_university: per,
            n_sds: Some(2),
            missing_metric_rate: missing,
            sectors: vec![],
            ..SynthSpec::new(seed)
        };
        let spec = SynthSpec {
            sectors: spec.resolved_sectors().unwrap().into_iter().map(|s| SectorSpec {
                coauthors: CoauthorDistribution::Uniform { min: 1, max: 2 },
                ..s
            }).collect(),
            ..spec
        };
        let corpus = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(&corpus, dir.path()).unwrap();
        let back = load_corpus(&paths, corpus.window()).unwrap();
        prop_assert_eq!(back, corpus);
    }
}
