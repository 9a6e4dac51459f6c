//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use videodna_core::align::{banded_local_align, local_align, Alignment, ScoringParams, Step};
use videodna_core::benchmark::{bench, QueryPlan};
use videodna_core::bitcode::{hamming_from_signs, Bitcode};
use videodna_core::metric::{
    calibrate_threshold, equal_error_rate, tfidf_distance, train_metric_traced, TrainConfig,
    TrainReport,
};
use videodna_core::mutate::{
    generate_training_pairs, mutate_sequence, MutationKind, MutationSpec, PairSet,
};
use videodna_core::phylo::{distance_matrix, neighbor_joining, parse_newick, DistanceMatrix};
use videodna_core::search::{build_index, search, BandIndex, SearchParams};
use videodna_core::synth::{random_code, synth_code_shots, synth_corpus, SynthConfig};
use videodna_core::vocab::compute_idf;
use videodna_core::{DescriptorKind, IdfWeights, MetricModel, VideoDna, Vocabulary};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spatial_specs(strength: u8) -> Vec<MutationSpec> {
    MutationKind::ALL
        .iter()
        .filter(|k| k.is_spatial())
        .map(|&k| MutationSpec::new(k, strength, 0).unwrap())
        .collect()
}

/// The desk-scale model shared by the metric, search and alignment criteria.
struct Desk {
    train: Vec<VideoDna>,
    held_out: PairSet,
    model: MetricModel,
    report: TrainReport,
    training_time: Duration,
}

fn desk() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let t = Instant::now();
        let corpus = |videos, length, seed| {
            synth_corpus(&SynthConfig {
                videos,
                length,
                seed,
                ..SynthConfig::default()
            })
            .unwrap()
        };
        let train = corpus(60, 200, 101);
        let validation = corpus(30, 100, 102);
        let held_out_corpus = corpus(60, 200, 103);
        let specs = spatial_specs(1);
        let pairs = generate_training_pairs(&train, &specs, 2000, 8000, 1).unwrap();
        let validation = generate_training_pairs(&validation, &specs, 500, 2000, 2).unwrap();
        let held_out = generate_training_pairs(&held_out_corpus, &specs, 1000, 4000, 3).unwrap();
        let (model, report) =
            train_metric_traced(&pairs.to_training_set(), &TrainConfig::default()).unwrap();
        let (model, _) = calibrate_threshold(model, &validation.to_training_set()).unwrap();
        Desk {
            train,
            held_out,
            model,
            report,
            training_time: t.elapsed(),
        }
    })
}

fn code_seq(id: &str, codes: Vec<Bitcode>) -> VideoDna {
    VideoDna::from_codes(id, codes).unwrap()
}

fn random_codes(rng: &mut ChaCha8Rng, n: usize, bits: usize) -> Vec<Bitcode> {
    (0..n).map(|_| random_code(rng, bits)).collect()
}

/// Exhaustive local alignment score: every pair of non-empty substrings and
/// every monotone set of matched pairs inside them, the remaining elements
/// of both substrings being gaps.
fn brute_force_local(x: &[Bitcode], y: &[Bitcode], threshold: f64, s0: f64, g: f64) -> f64 {
    let sigma =
        |i: usize, j: usize| s0 * (threshold - x[i].hamming(&y[j]).unwrap() as f64) / threshold;
    let mut best = 0.0f64;
    for a in 0..x.len() {
        for b in a + 1..=x.len() {
            for c in 0..y.len() {
                for d in c + 1..=y.len() {
                    // Depth-first over chains of matched pairs.
                    let mut stack: Vec<(usize, usize, usize, f64)> = vec![(a, c, 0, 0.0)];
                    while let Some((i0, j0, k, s)) = stack.pop() {
                        let gaps = (b - a - k) + (d - c - k);
                        best = best.max(s + g * gaps as f64);
                        for i in i0..b {
                            for j in j0..d {
                                stack.push((i + 1, j + 1, k + 1, s + sigma(i, j)));
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = ScoringParams::bitcode(8.0).unwrap();
    let mut positive = 0;
    for case in 0..500 {
        let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let (x, y) = (random_codes(&mut rng, m, 16), random_codes(&mut rng, n, 16));
        let a = local_align(
            &code_seq("x", x.clone()),
            &code_seq("y", y.clone()),
            &params,
        )
        .unwrap();
        let oracle = brute_force_local(&x, &y, 8.0, params.match_scale, params.gap);
        if a.score != oracle {
            return Err(format!(
                "case {case}: dp {} vs brute force {oracle}",
                a.score
            ));
        }
        positive += usize::from(oracle > 0.0);
    }
    Ok(format!(
        "500/500 scores equal the exhaustive enumeration ({positive} non-zero)"
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = ScoringParams::bitcode(32.0).unwrap();
    for case in 0..200 {
        let (m, n) = (rng.random_range(1..=40), rng.random_range(1..=40));
        // Related sequences so alignments are non-trivial.
        let base = random_codes(&mut rng, m.max(n), 64);
        let noisy = |rng: &mut ChaCha8Rng, len: usize| -> Vec<Bitcode> {
            base[..len]
                .iter()
                .map(|c| {
                    let mut c = c.clone();
                    for _ in 0..rng.random_range(0..20) {
                        let i = rng.random_range(0..64);
                        c.set(i, !c.get(i));
                    }
                    c
                })
                .collect()
        };
        let x = code_seq("x", noisy(&mut rng, m));
        let y = code_seq("y", noisy(&mut rng, n));
        let full = local_align(&x, &y, &params).unwrap();
        let banded = banded_local_align(&x, &y, &params, 0, m.max(n)).unwrap();
        if full != banded {
            return Err(format!("case {case}: banded alignment differs"));
        }
    }
    Ok("200/200 banded alignments identical in score and path".into())
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..10_000 {
        let (a, b, c): (u64, u64, u64) = (rng.random(), rng.random(), rng.random());
        let (u, v, w) = (
            Bitcode::from_u64(a, 64),
            Bitcode::from_u64(b, 64),
            Bitcode::from_u64(c, 64),
        );
        let d = |p: &Bitcode, q: &Bitcode| p.hamming(q).unwrap();
        let signs = |x: u64| -> Vec<i8> {
            (0..64)
                .map(|i| if (x >> (63 - i)) & 1 == 1 { 1 } else { -1 })
                .collect()
        };
        let algebraic = hamming_from_signs(&signs(a), &signs(b)).unwrap();
        let ok = d(&u, &u) == 0
            && d(&u, &v) == d(&v, &u)
            && (d(&u, &v) == 0) == (a == b)
            && d(&u, &w) <= d(&u, &v) + d(&v, &w)
            && d(&u, &v) == (a ^ b).count_ones()
            && algebraic == d(&u, &v) as f64;
        if !ok {
            return Err(format!("case {case}: {a:016X} {b:016X} {c:016X}"));
        }
    }
    Ok("10000/10000 pairs satisfy the axioms and equal popcount(xor)".into())
}

fn criterion_4() -> Outcome {
    let desk = desk();
    let rounds = &desk.report.rounds;
    let mut previous = 1.0f64;
    let mut monotone = true;
    for r in rounds.iter().take_while(|r| r.error < 0.5) {
        monotone &= r.boost_loss <= previous;
        previous = r.boost_loss;
    }
    let model = &desk.model;
    let ham = |pairs: &[videodna_core::mutate::Pair]| -> Vec<f64> {
        pairs
            .iter()
            .map(|p| model.distance(&p.left.values, &p.right.values).unwrap() as f64)
            .collect()
    };
    let bags: Vec<Vec<f32>> = desk.train.iter().flat_map(|s| s.rows().to_vec()).collect();
    let idf = compute_idf(&bags).unwrap();
    let tfidf = |pairs: &[videodna_core::mutate::Pair]| -> Vec<f64> {
        pairs
            .iter()
            .map(|p| tfidf_distance(&p.left.values, &p.right.values, &idf).unwrap())
            .collect()
    };
    let h = &desk.held_out;
    let learned = equal_error_rate(&ham(&h.positives), &ham(&h.negatives)).unwrap();
    let baseline = equal_error_rate(&tfidf(&h.positives), &tfidf(&h.negatives)).unwrap();
    check(
        monotone && model.bits() == 64 && learned.rate < baseline.rate,
        format!(
            "(a) loss non-increasing over {} rounds: {monotone}, final loss {:.3e}; (b) held-out EER {:.5} ({} bits) vs tf-idf {:.5}; training {:.1}s",
            rounds.len(),
            previous,
            learned.rate,
            model.bits(),
            baseline.rate,
            desk.training_time.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let desk = desk();
    let t = Instant::now();
    let corpus = synth_corpus(&SynthConfig {
        videos: 100,
        length: 600,
        seed: 105,
        ..SynthConfig::default()
    })
    .unwrap();
    let mut specs = spatial_specs(1);
    specs.push(MutationSpec::new(MutationKind::TimeShift, 1, 0).unwrap());
    let plan = QueryPlan {
        queries: 500,
        lengths: vec![5, 10, 15, 20, 30],
        specs,
        seed: 5,
    };
    let params = SearchParams::new(ScoringParams::for_model(&desk.model).unwrap());
    let report = bench(&corpus, &desk.model, &plan, &params, 4).unwrap();
    let elapsed = t.elapsed();
    let sweep: Vec<(usize, f64)> = report
        .by_length()
        .into_iter()
        .map(|(l, r)| (l, r.precision()))
        .collect();
    let at10 = sweep.iter().find(|(l, _)| *l == 10).map_or(0.0, |s| s.1);
    let monotone = sweep.windows(2).all(|w| w[0].1 <= w[1].1);
    let table: Vec<String> = sweep.iter().map(|(l, p)| format!("{l}:{p:.3}")).collect();
    check(
        at10 >= 0.95 && monotone && elapsed < Duration::from_secs(600),
        format!(
            "precision@1 at length 10 = {at10:.3}; sweep {} (non-decreasing: {monotone}); {:.1}s",
            table.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let desk = desk();
    let corpus = synth_corpus(&SynthConfig {
        videos: 200,
        length: 60,
        seed: 106,
        ..SynthConfig::default()
    })
    .unwrap();
    let kinds = [
        MutationKind::Indel,
        MutationKind::SubstitutionSegment,
        MutationKind::LocalSpeed,
    ];
    let params = ScoringParams::for_model(&desk.model).unwrap();
    let (mut total, mut correct) = (0usize, 0usize);
    for (k, original) in corpus.iter().enumerate() {
        let spec = MutationSpec::new(kinds[k % kinds.len()], 1, 1000 + k as u64).unwrap();
        let (mut mutated, map) = mutate_sequence(original, &[spec]).unwrap();
        let mut original = original.clone();
        desk.model.encode_into(&mut original).unwrap();
        desk.model.encode_into(&mut mutated).unwrap();
        let a = local_align(&mutated, &original, &params).unwrap();
        for s in &a.steps {
            if let Step::Match(i, j) = *s {
                total += 1;
                if map[i].is_some_and(|g| g.abs_diff(j) <= 1) {
                    correct += 1;
                }
            }
        }
    }
    let rate = correct as f64 / total.max(1) as f64;
    check(
        rate >= 0.95,
        format!(
            "{correct}/{total} aligned positions within one interval of groundtruth ({rate:.4})"
        ),
    )
}

/// A random unrooted binary tree over `n` leaves as an edge list; leaves are
/// nodes `0..n`.
fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> (usize, Vec<(usize, usize, f64)>) {
    let mut edges = vec![(0, 1, rng.random_range(0.1..1.0))];
    let mut next = n;
    for leaf in 2..n {
        let e = rng.random_range(0..edges.len());
        let (a, b, l) = edges.swap_remove(e);
        let mid = next;
        next += 1;
        let cut = rng.random_range(0.1..0.9);
        edges.push((a, mid, l * cut));
        edges.push((mid, b, l * (1.0 - cut)));
        edges.push((mid, leaf, rng.random_range(0.1..1.0)));
    }
    (next, edges)
}

fn tree_distances(nodes: usize, edges: &[(usize, usize, f64)], n: usize) -> Vec<f64> {
    let mut adj = vec![Vec::new(); nodes];
    for &(a, b, l) in edges {
        adj[a].push((b, l));
        adj[b].push((a, l));
    }
    let mut out = vec![0.0; n * n];
    for s in 0..n {
        let mut dist = vec![f64::NAN; nodes];
        dist[s] = 0.0;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, l) in &adj[u] {
                if dist[v].is_nan() {
                    dist[v] = dist[u] + l;
                    stack.push(v);
                }
            }
        }
        out[s * n..(s + 1) * n].copy_from_slice(&dist[..n]);
    }
    out
}

/// Leaf bipartitions of every edge with their lengths, keyed by the side
/// without leaf "L0".
fn tree_splits(
    nodes: usize,
    edges: &[(usize, usize, f64)],
    labels: &[String],
) -> BTreeMap<BTreeSet<String>, f64> {
    let n = labels.len();
    let mut adj = vec![Vec::new(); nodes];
    for &(a, b, _) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let all: BTreeSet<String> = labels.iter().cloned().collect();
    let mut out = BTreeMap::new();
    for &(a, b, l) in edges {
        let mut side = BTreeSet::new();
        let mut stack = vec![(b, a)];
        while let Some((u, p)) = stack.pop() {
            if u < n {
                side.insert(labels[u].clone());
            }
            for &v in &adj[u] {
                if v != p {
                    stack.push((v, u));
                }
            }
        }
        let key = if side.contains(&labels[0]) {
            all.difference(&side).cloned().collect()
        } else {
            side
        };
        *out.entry(key).or_insert(0.0) += l;
    }
    out
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(4..=8);
        let (nodes, edges) = random_tree(&mut rng, n);
        let labels: Vec<String> = (0..n).map(|i| format!("L{i}")).collect();
        let m = DistanceMatrix::new(labels.clone(), tree_distances(nodes, &edges, n)).unwrap();
        let tree = neighbor_joining(&m).unwrap();
        let expected = tree_splits(nodes, &edges, &labels);
        let got: BTreeMap<BTreeSet<String>, f64> = tree
            .split_lengths()
            .into_iter()
            .filter(|(_, l)| *l > 1e-12)
            .collect();
        if got.keys().ne(expected.keys()) {
            return Err(format!("case {case}: topology differs"));
        }
        for (s, l) in &expected {
            worst = worst.max((got[s] - l).abs());
        }
        if worst > 1e-9 {
            return Err(format!("case {case}: branch length error {worst:e}"));
        }
    }
    Ok(format!(
        "100/100 topologies recovered, max branch length error {worst:.1e}"
    ))
}

fn criterion_8() -> Outcome {
    let threshold = 12.0;
    let params = ScoringParams::bitcode(threshold).unwrap();
    let mut rooted = 0;
    for seed in 0..20u64 {
        let shots = synth_code_shots(16, 64, 4, 15, 2, 800 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Version x drops one interior shot of the base; x.y drops a further
        // interior shot of x.
        let mut interior: Vec<usize> = (3..shots.len() - 3).collect();
        interior.shuffle(&mut rng);
        let render = |removed: &[usize]| -> Vec<Bitcode> {
            shots
                .iter()
                .enumerate()
                .filter(|(k, _)| !removed.contains(k))
                .flat_map(|(_, s)| s.iter().cloned())
                .collect()
        };
        let mut versions = Vec::new();
        for x in 0..2 {
            let own = interior[3 * x];
            versions.push(code_seq(&format!("{}", x + 1), render(&[own])));
            for y in 0..2 {
                let further = interior[3 * x + 1 + y];
                versions.push(code_seq(
                    &format!("{}.{}", x + 1, y + 1),
                    render(&[own, further]),
                ));
            }
        }
        let m = distance_matrix(&versions, &params).unwrap();
        let tree = neighbor_joining(&m).unwrap();
        let splits = tree.split_lengths();
        let all: BTreeSet<String> = versions.iter().map(|v| v.source_id().to_string()).collect();
        for x in ["1", "2"] {
            let family: BTreeSet<String> = all
                .iter()
                .filter(|l| l.split('.').next() == Some(x))
                .cloned()
                .collect();
            let rest: BTreeSet<String> = all.difference(&family).cloned().collect();
            if !splits.contains_key(&family) && !splits.contains_key(&rest) {
                return Err(format!(
                    "seed {seed}: versions of {x} do not form a clade: {}",
                    tree.to_newick()
                ));
            }
        }
        let dendrogram = tree.midpoint_root();
        let grouped = ["1", "2"].iter().all(|x| {
            ["1", "2"].iter().all(|y| {
                let child = format!("{x}.{y}");
                dendrogram
                    .common_ancestor(&[x, child.as_str()])
                    .is_some_and(|a| {
                        dendrogram
                            .clade(a)
                            .iter()
                            .all(|l| l.split('.').next() == Some(*x))
                    })
            })
        });
        rooted += usize::from(grouped);
    }
    check(
        rooted == 20,
        format!("20/20 unrooted trees separate the two families; midpoint-rooted family clades in {rooted}/20"),
    )
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let mut sequences = Vec::new();
    for s in 0..1000u64 {
        let shots = synth_code_shots(200, 64, 4, 15, 2, 9000 + s).unwrap();
        let codes: Vec<Bitcode> = shots.into_iter().flatten().take(1000).collect();
        sequences.push(code_seq(&format!("v{s}"), codes));
    }
    let index: BandIndex = build_index(&sequences, 4).unwrap();
    let build = t.elapsed();
    let params = SearchParams::new(ScoringParams::bitcode(32.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut latencies = Vec::new();
    for _ in 0..101 {
        let s = rng.random_range(0..sequences.len());
        let start = rng.random_range(0..sequences[s].len() - 10);
        let codes: Vec<Bitcode> = sequences[s].bitcodes().unwrap()[start..start + 10]
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for _ in 0..3 {
                    let i = rng.random_range(0..64);
                    c.set(i, !c.get(i));
                }
                c
            })
            .collect();
        let query = code_seq("q", codes);
        let t = Instant::now();
        let hits = search(&query, &index, &params).unwrap();
        latencies.push(t.elapsed());
        std::hint::black_box(hits);
    }
    latencies.sort_unstable();
    let median = latencies[latencies.len() / 2];
    check(
        median < Duration::from_millis(500),
        format!(
            "median {:.3} ms over 101 queries on {} nucleotides (max {:.3} ms, index build {:.1}s)",
            median.as_secs_f64() * 1e3,
            index.nucleotides(),
            latencies[latencies.len() - 1].as_secs_f64() * 1e3,
            build.as_secs_f64()
        ),
    )
}

fn roundtrip<T>(value: &T, write: impl Fn(&T, &mut Vec<u8>), read: impl Fn(&[u8]) -> T) -> bool {
    let mut first = Vec::new();
    write(value, &mut first);
    let back = read(&first);
    let mut second = Vec::new();
    write(&back, &mut second);
    first == second
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut note = |name: &'static str, ok: bool, failures: &mut Vec<&'static str>| {
        *counts.entry(name).or_insert(0) += 1;
        if !ok {
            failures.push(name);
        }
    };
    for _ in 0..25 {
        let kind = if rng.random() {
            DescriptorKind::Grayscale
        } else {
            DescriptorKind::Color
        };
        let (k, d) = (rng.random_range(1..20), rng.random_range(1..70));
        let centroids: Vec<Vec<f32>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let vocab = Vocabulary::from_centroids(kind, &centroids).unwrap();
        note(
            "VDVC",
            roundtrip(
                &vocab,
                |v, b| v.write_to(b).unwrap(),
                |b| Vocabulary::read_from(b).unwrap(),
            ),
            &mut failures,
        );

        let idf = IdfWeights::new(
            (0..d).map(|_| rng.random_range(0.0..5.0)).collect(),
            rng.random(),
        )
        .unwrap();
        note(
            "VDIF",
            roundtrip(
                &idf,
                |v, b| v.write_to(b).unwrap(),
                |b| IdfWeights::read_from(b).unwrap(),
            ),
            &mut failures,
        );

        let len = rng.random_range(0..30);
        let rows: Vec<Vec<f32>> = (0..len)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..9.0)).collect())
            .collect();
        let mut dna = VideoDna::new("x", 2.0, 1.0, d, rows).unwrap();
        if rng.random() {
            let bits = rng.random_range(1..130);
            dna.set_bitcodes(random_codes(&mut rng, len, bits)).unwrap();
        }
        note(
            "VDNA",
            roundtrip(
                &dna,
                |v, b| v.write_to(b).unwrap(),
                |b| VideoDna::read_from(b, "x").unwrap(),
            ),
            &mut failures,
        );

        let bits = rng.random_range(1..80);
        let rows: Vec<Vec<f32>> = (0..bits)
            .map(|_| {
                let r: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.iter().map(|v| (v / n) as f32).collect()
            })
            .collect();
        let offsets = (0..bits).map(|_| rng.random_range(-3.0..3.0)).collect();
        let model = MetricModel::new(rows, offsets, rng.random_range(0.0..bits as f32)).unwrap();
        note(
            "VDMM",
            roundtrip(
                &model,
                |v, b| v.write_to(b).unwrap(),
                |b| MetricModel::read_from(b).unwrap(),
            ),
            &mut failures,
        );

        let bits = [16, 32, 64, 128][rng.random_range(0..4)];
        let seqs: Vec<VideoDna> = (0..rng.random_range(1..6))
            .map(|s| {
                let n = rng.random_range(1..40);
                code_seq(&format!("s{s}"), random_codes(&mut rng, n, bits))
            })
            .collect();
        let index = build_index(&seqs, 4).unwrap();
        note(
            "VDIX",
            roundtrip(
                &index,
                |v, b| v.write_to(b).unwrap(),
                |b| BandIndex::read_from(b).unwrap(),
            ),
            &mut failures,
        );

        let n = rng.random_range(2..9);
        let (nodes, edges) = random_tree(&mut rng, n);
        let labels: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let m = DistanceMatrix::new(labels, tree_distances(nodes, &edges, n)).unwrap();
        let newick = neighbor_joining(&m).unwrap().to_newick();
        note(
            "Newick",
            roundtrip(
                &newick,
                |v, b| b.extend_from_slice(parse_newick(v).unwrap().to_newick().as_bytes()),
                |b| String::from_utf8(b.to_vec()).unwrap(),
            ),
            &mut failures,
        );

        let params = ScoringParams::bitcode(32.0).unwrap();
        let (m, n) = (rng.random_range(1..20), rng.random_range(1..20));
        let x = code_seq("x", random_codes(&mut rng, m, 64));
        let y = code_seq("y", random_codes(&mut rng, n, 64));
        let alignment = local_align(&x, &y, &params).unwrap();
        note(
            "alignment text",
            roundtrip(
                &alignment,
                |v, b| b.extend_from_slice(v.to_text().as_bytes()),
                |b| Alignment::parse_text(std::str::from_utf8(b).unwrap()).unwrap(),
            ),
            &mut failures,
        );
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    check(
        failures.is_empty(),
        format!(
            "byte-identical round trips: {}; failures: {:?}",
            summary.join(", "),
            failures
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("DP oracle equivalence", criterion_1),
        ("banded consistency", criterion_2),
        ("Hamming metric", criterion_3),
        ("metric learning", criterion_4),
        ("desk-scale search precision", criterion_5),
        ("temporal-mutation alignment", criterion_6),
        ("neighbor joining exactness", criterion_7),
        ("phylogeny scenario", criterion_8),
        ("search latency", criterion_9),
        ("format round trips", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
