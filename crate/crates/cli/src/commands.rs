use std::fs::File;
use std::io::{self, BufReader, BufWriter, StdoutLock, Write};
use std::path::{Path, PathBuf};

use videodna_core::align::{banded_local_align, global_align, local_align, ScoringParams};
use videodna_core::benchmark::{bench, QueryPlan};
use videodna_core::metric::{calibrate_threshold, train_metric_traced};
use videodna_core::mutate::{mutate_sequence_with_donors, MutationSpec, PairSet};
use videodna_core::phylo::{distance_matrix, neighbor_joining, progressive_msa, DistanceMatrix};
use videodna_core::search::{build_index, search, write_results_tsv, BandIndex, SearchParams};
use videodna_core::sequencer::{
    extract_frame_features, load_frame, read_feature_file, sequence_features, write_feature_file,
    SequencerConfig,
};
use videodna_core::synth::{synth_corpus, SynthConfig};
use videodna_core::vocab::{compute_idf, train_vocabulary_traced, KMeansConfig};
use videodna_core::{DescriptorKind, IdfWeights, MetricModel, TrainConfig, VideoDna, Vocabulary};

use crate::config::Settings;
use crate::corpus;
use crate::error::{CliError, CliResult, WithPath};
use crate::{Command, Descriptor, Mode, ScoringArgs};

pub fn dispatch(command: Command, s: &Settings) -> CliResult<()> {
    match command {
        Command::Extract {
            frames,
            fps,
            output,
        } => extract(&frames, fps, &output, s),
        Command::VocabTrain {
            kind,
            k,
            output,
            features,
        } => vocab_train(kind, k, &output, &features, s),
        Command::Sequence {
            gray_vocab,
            color_vocab,
            source_id,
            output,
            db,
            features,
        } => sequence(
            &gray_vocab,
            &color_vocab,
            source_id,
            output,
            db,
            &features,
            s,
        ),
        Command::Idf { db, output } => idf(&db, &output),
        Command::Pairs {
            db,
            specs,
            positives,
            negatives,
            output,
        } => pairs(&db, &specs, positives, negatives, &output, s),
        Command::MetricTrain {
            pairs,
            validation,
            output,
            report,
        } => metric_train(&pairs, validation.as_deref(), &output, report.as_deref(), s),
        Command::Encode {
            model,
            input,
            output,
        } => encode(&model, &input, &output),
        Command::IndexBuild { db, model, output } => index_build(&db, model.as_deref(), &output, s),
        Command::Search {
            index,
            model,
            top,
            query,
        } => search_index(&index, model.as_deref(), top, &query, s),
        Command::Align {
            a,
            b,
            scoring,
            global,
            band,
        } => align(&a, &b, &scoring, global, band, s),
        Command::Msa { db, scoring } => msa(&db, &scoring, s),
        Command::Phylo {
            db,
            matrix,
            write_matrix,
            midpoint,
            scoring,
        } => phylo(
            db.as_deref(),
            matrix.as_deref(),
            write_matrix.as_deref(),
            midpoint,
            &scoring,
            s,
        ),
        Command::Mutate {
            input,
            spec,
            specs,
            donors,
            output,
            groundtruth,
        } => mutate(
            &input,
            &spec,
            specs.as_deref(),
            donors.as_deref(),
            &output,
            groundtruth.as_deref(),
        ),
        Command::Bench {
            db,
            model,
            queries,
            lengths,
            specs,
            out,
        } => run_bench(
            &db,
            &model,
            queries,
            lengths,
            specs.as_deref(),
            out.as_deref(),
            s,
        ),
        Command::Synth {
            videos,
            length,
            genres,
            db,
        } => synth(videos, length, genres, &db, s),
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).at(path)?))
}

/// Runs `write` against a buffered file and flushes it.
fn write_file<F>(path: &Path, write: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> videodna_core::Result<()>,
{
    let mut w = create(path)?;
    write(&mut w).at(path)?;
    w.flush().at(path)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path).at(path)?))
}

fn stdout_write<F>(write: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<StdoutLock<'static>>) -> videodna_core::Result<()>,
{
    let mut w = BufWriter::new(io::stdout().lock());
    write(&mut w)?;
    w.flush().map_err(|e| CliError::Core(e.into()))
}

fn read_model(path: &Path) -> CliResult<MetricModel> {
    MetricModel::read_from(open(path)?).at(path)
}

fn read_vocab(path: &Path) -> CliResult<Vocabulary> {
    Vocabulary::read_from(open(path)?).at(path)
}

fn read_specs(path: &Path) -> CliResult<Vec<MutationSpec>> {
    let text = std::fs::read_to_string(path).at(path)?;
    MutationSpec::parse_list(&text).at(path)
}

fn read_features(path: &Path) -> CliResult<Vec<videodna_core::sequencer::FrameFeatures>> {
    read_feature_file(open(path)?).at(path)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "sequence".into(), |s| s.to_string_lossy().into_owned())
}

fn extract(frames: &Path, fps: f64, output: &Path, s: &Settings) -> CliResult<()> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(CliError::usage(format!(
            "--fps must be positive, got {fps}"
        )));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(frames)
        .at(frames)?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()
        .at(frames)?;
    paths.retain(|p| p.is_file());
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!("{}: no frames", frames.display())));
    }
    let mut features = Vec::with_capacity(paths.len());
    for (k, p) in paths.iter().enumerate() {
        let image = load_frame(p).at(p)?;
        features
            .push(extract_frame_features(&image, s.max_points, k as u64, k as f64 / fps).at(p)?);
    }
    write_file(output, |w| write_feature_file(w, &features))
}

fn vocab_train(
    kind: Descriptor,
    k: Option<usize>,
    output: &Path,
    files: &[PathBuf],
    s: &Settings,
) -> CliResult<()> {
    let (kind, k) = match kind {
        Descriptor::Gray => (DescriptorKind::Grayscale, k.unwrap_or(s.k_gray)),
        Descriptor::Color => (DescriptorKind::Color, k.unwrap_or(s.k_color)),
    };
    let mut descriptors = Vec::new();
    for f in files {
        for frame in read_features(f)? {
            for p in frame.points {
                descriptors.push(match kind {
                    DescriptorKind::Grayscale => p.gray_desc,
                    DescriptorKind::Color => p.color_desc,
                });
            }
        }
    }
    let config = KMeansConfig {
        k,
        seed: s.seed,
        max_iters: s.kmeans_iters,
    };
    let run = train_vocabulary_traced(&descriptors, kind, &config)?;
    eprintln!(
        "{} descriptors, {} iterations, objective {:.6}",
        descriptors.len(),
        run.iterations,
        run.objective.last().copied().unwrap_or(0.0)
    );
    write_file(output, |w| run.vocabulary.write_to(w))
}

fn sequencer_config(s: &Settings) -> SequencerConfig {
    SequencerConfig {
        interval: s.interval,
        step: s.step,
        max_points: s.max_points,
        overlap_fraction: s.overlap,
    }
}

fn sequence(
    gray: &Path,
    color: &Path,
    source_id: Option<String>,
    output: Option<PathBuf>,
    db: Option<PathBuf>,
    features: &[PathBuf],
    s: &Settings,
) -> CliResult<()> {
    let (gray, color) = (read_vocab(gray)?, read_vocab(color)?);
    let config = sequencer_config(s);
    if features.len() > 1 && (output.is_some() || source_id.is_some()) {
        return Err(CliError::usage(
            "--output and --source-id take a single feature file; use --db",
        ));
    }
    let mut sequences = Vec::with_capacity(features.len());
    for f in features {
        let id = source_id.clone().unwrap_or_else(|| file_stem(f));
        sequences.push(sequence_features(&read_features(f)?, &gray, &color, &config, &id).at(f)?);
    }
    match (output, db) {
        (Some(out), _) => corpus::write_dna(&out, &sequences[0]),
        (None, Some(dir)) => corpus::save(&dir, &sequences),
        (None, None) => Err(CliError::usage("one of --output or --db is required")),
    }
}

fn idf(db: &Path, output: &Path) -> CliResult<()> {
    let seqs = corpus::load(db)?;
    let bags: Vec<Vec<f32>> = seqs.iter().flat_map(|s| s.rows().iter().cloned()).collect();
    let weights = compute_idf(&bags).at(db)?;
    write_file(output, |w| weights.write_to(w))
}

fn pairs(
    db: &Path,
    specs: &Path,
    positives: usize,
    negatives: usize,
    output: &Path,
    s: &Settings,
) -> CliResult<()> {
    let seqs = corpus::load(db)?;
    let specs = read_specs(specs)?;
    let set = videodna_core::mutate::generate_training_pairs(
        &seqs, &specs, positives, negatives, s.seed,
    )?;
    set.write_dir(output).at(output)
}

fn metric_train(
    pairs: &Path,
    validation: Option<&Path>,
    output: &Path,
    report: Option<&Path>,
    s: &Settings,
) -> CliResult<()> {
    let set = PairSet::read_dir(pairs).at(pairs)?.to_training_set();
    let config = TrainConfig {
        bits: s.bits,
        threshold: s.threshold.map(|t| t as f32),
        subspace_size: s.subspace,
        regularization: s.regularization,
        seed: s.seed,
    };
    let (mut model, trace) = train_metric_traced(&set, &config)?;
    if trace.truncated {
        eprintln!(
            "boosting stopped after {} of {} bits",
            model.bits(),
            trace.requested_bits
        );
    }
    if let Some(dir) = validation {
        let validation = PairSet::read_dir(dir).at(dir)?.to_training_set();
        let (calibrated, eer) = calibrate_threshold(model, &validation)?;
        eprintln!(
            "validation EER {:.4} at threshold {}",
            eer.rate,
            calibrated.threshold()
        );
        model = calibrated;
        if let Some(t) = s.threshold {
            model = model.with_threshold(t as f32)?;
        }
    }
    if let Some(path) = report {
        write_file(path, |w| {
            writeln!(w, "# round\terror\talpha\tboost_loss")?;
            for (k, r) in trace.rounds.iter().enumerate() {
                writeln!(w, "{}\t{}\t{}\t{}", k + 1, r.error, r.alpha, r.boost_loss)?;
            }
            Ok(())
        })?;
    }
    write_file(output, |w| model.write_to(w))
}

fn encode(model: &Path, input: &Path, output: &Path) -> CliResult<()> {
    let model = read_model(model)?;
    if corpus::is_corpus(input) {
        let mut seqs = corpus::load(input)?;
        for s in &mut seqs {
            model.encode_into(s)?;
        }
        corpus::save(output, &seqs)
    } else {
        let mut dna = corpus::read_dna_file(input)?;
        model.encode_into(&mut dna).at(input)?;
        corpus::write_dna(output, &dna)
    }
}

/// Encodes every sequence with `model`, or checks that all carry bitcodes.
fn ensure_codes(seqs: &mut [VideoDna], model: Option<&MetricModel>, what: &str) -> CliResult<()> {
    match model {
        Some(m) => seqs
            .iter_mut()
            .try_for_each(|s| m.encode_into(s).map_err(CliError::from)),
        None => match seqs.iter().find(|s| s.bitcodes().is_none()) {
            Some(s) => Err(CliError::usage(format!(
                "{what} {} has no bitcodes; pass --model",
                s.source_id()
            ))),
            None => Ok(()),
        },
    }
}

fn index_build(db: &Path, model: Option<&Path>, output: &Path, s: &Settings) -> CliResult<()> {
    let model = model.map(read_model).transpose()?;
    let mut seqs = corpus::load(db)?;
    ensure_codes(&mut seqs, model.as_ref(), "sequence")?;
    let index = build_index(&seqs, s.bands).at(db)?;
    write_file(output, |w| index.write_to(w))
}

/// Bitcode threshold: flag or config, then the model's, then half the bits.
fn threshold(s: &Settings, model: Option<&MetricModel>, bits: usize) -> f64 {
    s.threshold
        .or(model.map(|m| m.threshold() as f64))
        .unwrap_or(bits as f64 / 2.0)
}

fn scoring(mode: ScoringParams, s: &Settings) -> CliResult<ScoringParams> {
    Ok(mode.with_match_scale(s.match_scale)?.with_gap(s.gap)?)
}

fn search_index(
    index: &Path,
    model: Option<&Path>,
    top: Option<usize>,
    query: &Path,
    s: &Settings,
) -> CliResult<()> {
    let idx = BandIndex::read_from(open(index)?).at(index)?;
    let model = model.map(read_model).transpose()?;
    let mut q = corpus::read_dna_file(query)?;
    ensure_codes(std::slice::from_mut(&mut q), model.as_ref(), "query")?;
    let mut params = SearchParams::new(scoring(
        ScoringParams::bitcode(threshold(s, model.as_ref(), idx.bits()))?,
        s,
    )?);
    params.min_seeds = s.min_seeds;
    params.diagonal_slack = s.diagonal_slack;
    params.band_halfwidth = s.band_halfwidth;
    params.shortlist_cap = s.shortlist_cap;
    let mut hits = search(&q, &idx, &params).at(query)?;
    if let Some(n) = top {
        hits.truncate(n);
    }
    stdout_write(|w| write_results_tsv(w, &hits))
}

/// Scoring for `sequences`, encoding them first in bitcode mode.
fn prepare(
    args: &ScoringArgs,
    sequences: &mut [VideoDna],
    s: &Settings,
) -> CliResult<ScoringParams> {
    let model = args.model.as_deref().map(read_model).transpose()?;
    let params = match args.mode {
        Mode::Bitcode => {
            ensure_codes(sequences, model.as_ref(), "sequence")?;
            let bits = sequences.first().map_or(0, |q| q.code_bits());
            ScoringParams::bitcode(threshold(s, model.as_ref(), bits))?
        }
        Mode::Tfidf => return tfidf(args, sequences, s),
    };
    scoring(params, s)
}

fn tfidf(args: &ScoringArgs, sequences: &[VideoDna], s: &Settings) -> CliResult<ScoringParams> {
    let dim = sequences.first().map_or(0, |q| q.dim());
    let idf = match args.idf.as_deref() {
        Some(p) => IdfWeights::read_from(open(p)?).at(p)?,
        None => IdfWeights::uniform(dim),
    };
    scoring(ScoringParams::tfidf(idf, s.rho)?, s)
}

fn align(
    a: &Path,
    b: &Path,
    args: &ScoringArgs,
    global: bool,
    band: Option<(i64, usize)>,
    s: &Settings,
) -> CliResult<()> {
    let mut seqs = [corpus::read_dna_file(a)?, corpus::read_dna_file(b)?];
    let params = prepare(args, &mut seqs, s)?;
    let [x, y] = &seqs;
    let alignment = match (global, band) {
        (true, _) => global_align(x, y, &params)?,
        (false, Some((center, halfwidth))) => banded_local_align(x, y, &params, center, halfwidth)?,
        (false, None) => local_align(x, y, &params)?,
    };
    stdout_write(|w| Ok(w.write_all(alignment.to_text().as_bytes())?))
}

fn msa(db: &Path, args: &ScoringArgs, s: &Settings) -> CliResult<()> {
    let mut seqs = corpus::load(db)?;
    let params = prepare(args, &mut seqs, s)?;
    let tree = neighbor_joining(&distance_matrix(&seqs, &params)?)?;
    // Profiles are mean bags, so they are always compared by tf-idf.
    let msa = progressive_msa(&seqs, &tree, &tfidf(args, &seqs, s)?)?;
    stdout_write(|w| Ok(w.write_all(msa.to_text().as_bytes())?))
}

fn phylo(
    db: Option<&Path>,
    matrix: Option<&Path>,
    write_matrix: Option<&Path>,
    midpoint: bool,
    args: &ScoringArgs,
    s: &Settings,
) -> CliResult<()> {
    let m = match (db, matrix) {
        (_, Some(path)) => DistanceMatrix::read_tsv(open(path)?).at(path)?,
        (Some(dir), None) => {
            let mut seqs = corpus::load(dir)?;
            let params = prepare(args, &mut seqs, s)?;
            distance_matrix(&seqs, &params).at(dir)?
        }
        (None, None) => return Err(CliError::usage("one of --db or --matrix is required")),
    };
    if let Some(path) = write_matrix {
        write_file(path, |w| m.write_tsv(w))?;
    }
    let tree = neighbor_joining(&m)?;
    let newick = if midpoint {
        tree.midpoint_root().to_newick()
    } else {
        tree.to_newick()
    };
    stdout_write(|w| Ok(writeln!(w, "{newick}")?))
}

fn mutate(
    input: &Path,
    inline: &[String],
    file: Option<&Path>,
    donors: Option<&Path>,
    output: &Path,
    groundtruth: Option<&Path>,
) -> CliResult<()> {
    let mut specs = inline
        .iter()
        .map(|l| {
            MutationSpec::parse_line(l).map_err(|e| CliError::usage(format!("--spec {l:?}: {e}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(path) = file {
        specs.extend(read_specs(path)?);
    }
    if specs.is_empty() {
        return Err(CliError::usage("no mutation given; pass --spec or --specs"));
    }
    let donors = donors.map(corpus::load).transpose()?.unwrap_or_default();
    let dna = corpus::read_dna_file(input)?;
    let (out, map) = mutate_sequence_with_donors(&dna, &specs, &donors).at(input)?;
    corpus::write_dna(output, &out)?;
    if let Some(path) = groundtruth {
        write_file(path, |w| {
            writeln!(w, "# output\tsource")?;
            for (i, m) in map.iter().enumerate() {
                match m {
                    Some(j) => writeln!(w, "{i}\t{j}")?,
                    None => writeln!(w, "{i}\t-")?,
                }
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn run_bench(
    db: &Path,
    model: &Path,
    queries: usize,
    lengths: Vec<usize>,
    specs: Option<&Path>,
    out: Option<&Path>,
    s: &Settings,
) -> CliResult<()> {
    let model = read_model(model)?;
    let corpus = corpus::load(db)?;
    let specs = specs.map(read_specs).transpose()?.unwrap_or_default();
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(CliError::usage("--lengths must list positive lengths"));
    }
    let plan = QueryPlan {
        queries,
        lengths,
        specs,
        seed: s.seed,
    };
    let mut params = SearchParams::new(scoring(
        ScoringParams::bitcode(threshold(s, Some(&model), model.bits()))?,
        s,
    )?);
    params.min_seeds = s.min_seeds;
    params.diagonal_slack = s.diagonal_slack;
    params.band_halfwidth = s.band_halfwidth;
    params.shortlist_cap = s.shortlist_cap;
    let report = bench(&corpus, &model, &plan, &params, s.bands).at(db)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).at(dir)?;
        write_file(&dir.join("lengths.tsv"), |w| report.write_length_tsv(w))?;
        write_file(&dir.join("kinds.tsv"), |w| report.write_kind_tsv(w))?;
        write_file(&dir.join("summary.tsv"), |w| report.write_summary_tsv(w))?;
        write_file(&dir.join("queries.tsv"), |w| report.write_queries_tsv(w))?;
    }
    stdout_write(|w| report.write_length_tsv(w))
}

fn synth(videos: usize, length: usize, genres: usize, db: &Path, s: &Settings) -> CliResult<()> {
    let config = SynthConfig {
        videos,
        length,
        genres,
        k_gray: s.k_gray,
        k_color: s.k_color,
        seed: s.seed,
        ..SynthConfig::default()
    };
    let seqs = synth_corpus(&config).map_err(|e| CliError::usage(e.to_string()))?;
    corpus::save(db, &seqs)
}
