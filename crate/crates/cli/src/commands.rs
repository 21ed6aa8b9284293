use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use kanon_core::corpus::{
    corpus_stats, export_bio as write_bio, read_corpus, write_corpus, Corpus, EntityType,
    IdentifierType, PredictedSpan,
};
use kanon_core::eval::{agreement_report, evaluate as score, gold_layer, ToleranceConfig};
use kanon_core::exec::{with_threads, Execution};
use kanon_core::gazetteer::Matcher;
use kanon_core::index::{count_is_k_anonymous, InvertedIndex};
use kanon_core::kg::{parse_kg_records, VariantRules, Whitelist};
use kanon_core::masker::{redact_text, MaskerConfig};
use kanon_core::normalize::normalize_term;
use kanon_core::pipeline::Annotator;
use serde_json::json;

use crate::output::{now, open, write_atomic, RunManifest};
use crate::{
    AgreementArgs, AnnotateArgs, BuildIndexArgs, EvaluateArgs, ExportBioArgs, Failure, QueryArgs,
    StatsArgs,
};

fn io_err(e: std::io::Error) -> Failure {
    Failure::io(e.to_string())
}

fn load_index(path: &std::path::Path) -> Result<InvertedIndex, Failure> {
    InvertedIndex::deserialize(open(path)?)
        .map_err(|e| Failure::from(e).prefixed(&path.display().to_string()))
}

fn load_corpus(path: &std::path::Path) -> Result<Corpus, Failure> {
    read_corpus(open(path)?).map_err(|e| Failure::from(e).prefixed(&path.display().to_string()))
}

impl Failure {
    fn prefixed(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub fn build_index(args: &BuildIndexArgs) -> Result<(), Failure> {
    let started = now();
    let mut manifest = RunManifest::new(
        "build-index",
        json!({
            "whitelist": args.whitelist.as_ref().map(|p| p.display().to_string()),
            "no_whitelist": args.no_whitelist,
            "variants": args.variants,
            "nationalities": args.nationalities.as_ref().map(|p| p.display().to_string()),
            "locations": args.locations.as_ref().map(|p| p.display().to_string()),
        }),
        started,
    );

    let parsed = parse_kg_records(open(&args.kg)?)
        .map_err(|e| Failure::from(e).prefixed(&args.kg.display().to_string()))?;
    manifest.input(&args.kg)?;
    if parsed.records.is_empty() {
        log::warn!("{}: no records; writing an empty index", args.kg.display());
        eprintln!("warning: {} contains no records", args.kg.display());
    }

    let whitelist = match (&args.whitelist, args.no_whitelist) {
        (_, true) => Whitelist::empty(),
        (Some(path), false) => {
            manifest.input(path)?;
            Whitelist::from_reader(open(path)?)?
        }
        (None, false) => Whitelist::from_words(Whitelist::DEFAULT_WORDS),
    };

    let rules = if args.variants {
        let mut rules = VariantRules::new();
        if let Some(path) = &args.nationalities {
            manifest.input(path)?;
            rules
                .load_nationalities(open(path)?)
                .map_err(|e| Failure::from(e).prefixed(&path.display().to_string()))?;
        }
        if let Some(path) = &args.locations {
            manifest.input(path)?;
            rules
                .load_location_aliases(open(path)?)
                .map_err(|e| Failure::from(e).prefixed(&path.display().to_string()))?;
        }
        Some(rules)
    } else {
        None
    };

    let index = InvertedIndex::build(&parsed.records, &whitelist, rules.as_ref());
    write_atomic(&args.out, |w| index.serialize(w).map_err(Failure::from))?;
    manifest.finish(&[&args.out])?;
    println!(
        "indexed {} persons, {} terms -> {}",
        index.num_persons(),
        index.num_terms(),
        args.out.display()
    );
    if parsed.dropped_terms > 0 {
        println!("dropped {} empty terms", parsed.dropped_terms);
    }
    Ok(())
}

pub fn annotate(args: &AnnotateArgs) -> Result<(), Failure> {
    let config = MaskerConfig {
        k: args.k,
        max_arity: args.max_arity,
        strategy: args.strategy,
        seed: args.seed,
    };
    config.validate()?;
    let started = now();

    let index = load_index(&args.index)?;
    let corpus = load_corpus(&args.corpus)?;
    let matcher = Matcher::from_index(&index);
    let annotator = Annotator::new(&index, &matcher, config)?;
    let exec = if args.threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let (annotated, annotations) =
        with_threads(args.threads, || annotator.annotate_corpus(&corpus, exec))?;

    // build every optional output in memory first so a failure leaves no
    // partial files behind
    let redacted = match &args.redacted {
        Some(_) => Some(
            annotated
                .documents
                .iter()
                .map(|d| {
                    redact_text(&d.text, &d.pred, &args.placeholder)
                        .map(|text| json!({"doc_id": d.doc_id, "text": text}).to_string())
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };

    write_atomic(&args.out, |w| write_corpus(&annotated, w).map_err(Failure::from))?;
    let mut outputs = vec![args.out.as_path()];
    if let Some(path) = &args.trace {
        write_atomic(path, |w| {
            for a in &annotations {
                let line = json!({"doc_id": a.doc_id, "mask": a.mask});
                writeln!(w, "{line}").map_err(io_err)?;
            }
            Ok(())
        })?;
        outputs.push(path);
    }
    if let (Some(path), Some(lines)) = (&args.redacted, &redacted) {
        write_atomic(path, |w| {
            lines
                .iter()
                .try_for_each(|l| writeln!(w, "{l}"))
                .map_err(io_err)
        })?;
        outputs.push(path);
    }

    let mut manifest = RunManifest::new(
        "annotate",
        json!({
            "k": config.k,
            "max_arity": config.max_arity,
            "strategy": config.strategy.to_string(),
            "seed": config.seed,
            "threads": args.threads,
            "placeholder": args.placeholder,
        }),
        started,
    );
    manifest.input(&args.index)?;
    manifest.input(&args.corpus)?;
    manifest.finish(&outputs)?;

    let spans: usize = annotations.iter().map(|a| a.spans.len()).sum();
    println!(
        "annotated {} documents, {} predicted spans -> {}",
        annotations.len(),
        spans,
        args.out.display()
    );
    Ok(())
}

pub fn query(args: &QueryArgs) -> Result<(), Failure> {
    let index = load_index(&args.index)?;
    let terms: Vec<String> = args.terms.iter().map(|t| normalize_term(t)).collect();
    let matching = index.matching(&terms);
    let count = if terms.iter().any(|t| index.postings_of(t).is_empty()) {
        0
    } else {
        matching.len()
    };
    println!("terms: {}", terms.join(" | "));
    for t in &terms {
        println!("  {t}: {}", index.postings_of(t).len());
    }
    println!("count: {count}");
    for k in [2, 5] {
        let verdict = if count_is_k_anonymous(count, k)? {
            if count == 0 {
                format!("{k}-anonymous (no matching individual)")
            } else {
                format!("{k}-anonymous")
            }
        } else {
            format!("NOT {k}-anonymous")
        };
        println!("k={k}: {verdict}");
    }
    if count > 0 && count <= 20 {
        let ids: Vec<String> = matching.ids().iter().map(u32::to_string).collect();
        println!("ids: {}", ids.join(","));
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let gold = load_corpus(&args.gold)?;
    let pred = load_corpus(&args.pred)?;
    let tolerance = match &args.tolerance_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
            ToleranceConfig::from_json(&text)?
        }
        None => ToleranceConfig::default(),
    };

    let gold_ids: BTreeSet<&str> = gold.documents.iter().map(|d| d.doc_id.as_str()).collect();
    let pred_ids: BTreeSet<&str> = pred.documents.iter().map(|d| d.doc_id.as_str()).collect();
    // an empty prediction file means "nothing predicted"
    if !pred.is_empty() && gold_ids != pred_ids {
        let mut msg = String::from("document ids differ between gold and predictions");
        for id in gold_ids.difference(&pred_ids) {
            msg.push_str(&format!("\n  only in gold: {id}"));
        }
        for id in pred_ids.difference(&gold_ids) {
            msg.push_str(&format!("\n  only in predictions: {id}"));
        }
        return Err(Failure::validation(msg));
    }

    let mut texts = BTreeMap::new();
    for d in &gold.documents {
        texts.insert(d.doc_id.clone(), d.text.clone());
    }
    let mut predicted: BTreeMap<String, Vec<PredictedSpan>> = BTreeMap::new();
    for d in &pred.documents {
        if texts.get(&d.doc_id) != Some(&d.text) {
            return Err(Failure::validation(format!(
                "document '{}': text differs between gold and predictions",
                d.doc_id
            )));
        }
        predicted.insert(d.doc_id.clone(), d.pred.clone());
    }
    let gold_spans = gold_layer(&gold, args.annotator.as_deref())?;
    let report = score(&predicted, &gold_spans, &texts, &tolerance)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Failure::io(e.to_string()))?
    );
    Ok(())
}

pub fn export_bio(args: &ExportBioArgs) -> Result<(), Failure> {
    let started = now();
    let corpus = load_corpus(&args.corpus)?;
    write_atomic(&args.out, |w| write_bio(&corpus.documents, w).map_err(Failure::from))?;
    let mut manifest = RunManifest::new("export-bio", json!({}), started);
    manifest.input(&args.corpus)?;
    manifest.finish(&[&args.out])?;
    println!("wrote {} documents -> {}", corpus.len(), args.out.display());
    Ok(())
}

pub fn stats(args: &StatsArgs) -> Result<(), Failure> {
    let corpus = load_corpus(&args.corpus)?;
    let stats = corpus_stats(&corpus);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&stats).map_err(|e| Failure::io(e.to_string()))?
        );
        return Ok(());
    }
    println!("documents: {}", stats.documents);
    println!("gold spans: {}", stats.gold_spans);
    println!();
    println!("{:<12} {:>8}", "entity type", "mentions");
    for t in EntityType::ALL {
        println!("{:<12} {:>8}", t.to_string(), stats.entity_mentions.get(&t).unwrap_or(&0));
    }
    println!();
    println!("{:<12} {:>8} {:>8}", "identifier", "count", "share");
    for t in IdentifierType::ALL {
        println!(
            "{:<12} {:>8} {:>7.1}%",
            t.to_string(),
            stats.identifier_counts.get(&t).unwrap_or(&0),
            stats.identifier_percentage(t)
        );
    }
    Ok(())
}

pub fn agreement(args: &AgreementArgs) -> Result<(), Failure> {
    let corpus = load_corpus(&args.corpus)?;
    let report = agreement_report(&corpus)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| Failure::io(e.to_string()))?
    );
    Ok(())
}
