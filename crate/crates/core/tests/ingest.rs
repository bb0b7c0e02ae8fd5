mod common;

use influence_scan::ingest::{
    load_document, resolve_passage, IngestError, MarkerProblem, PassageSelector,
};
use influence_scan::{extract_passage, Manifest, Side};

use common::*;

#[test]
fn crlf_fixture_matches_hand_normalized_copy() {
    let doc = load_document(fixtures_dir().join("crlf_blank_lines.txt"), "crlf").unwrap();
    let expected =
        std::fs::read_to_string(fixtures_dir().join("crlf_blank_lines.normalized.txt")).unwrap();
    assert_eq!(doc.text, expected);
    assert!(!doc.text.contains('\r'));
    assert_eq!(doc.text.matches("\n\n").count(), 1);
    assert!(!doc.text.contains("\n\n\n"));
    assert_eq!(doc.char_count, expected.chars().count());
}

#[test]
fn corpus_files_have_no_boilerplate() {
    let manifest = Manifest::load(table1_manifest()).unwrap();
    for entry in &manifest.documents {
        let doc = manifest.load_document(&entry.id).unwrap();
        assert!(!doc.text.contains("PROJECT GUTENBERG"), "{}", entry.id);
        assert!(!doc.text.contains("Updated editions"), "{}", entry.id);
        assert!(!doc.text.contains('\r'), "{}", entry.id);
        assert_eq!(doc.text.trim(), doc.text, "{}", entry.id);
    }
}

#[test]
fn crlf_corpus_file_loads_like_the_others() {
    let raw = std::fs::read(fixtures_dir().join("corpus/moby_dick.txt")).unwrap();
    assert!(raw.windows(2).any(|w| w == b"\r\n"));
    let doc = load_document(fixtures_dir().join("corpus/moby_dick.txt"), "moby").unwrap();
    assert!(doc.text.starts_with("CHAPTER 31. Queen Mab."));
}

#[test]
fn israel_potter_chapter_four_by_markers() {
    let doc = load_document(
        fixtures_dir().join("corpus/israel_potter_melville.txt"),
        "ip",
    )
    .unwrap();
    let sel = PassageSelector::MarkerPair {
        start: "CHAPTER 4".into(),
        end: "CHAPTER 5".into(),
    };
    let passage = resolve_passage(&doc, &sel).unwrap();
    assert!(passage
        .text
        .starts_with("Seeing that the pursuit had been given over"));
    assert!(passage
        .text
        .ends_with("struck out again upon the road to London."));
    let by_chars: String = doc
        .text
        .chars()
        .skip(passage.char_start)
        .take(passage.char_end - passage.char_start)
        .collect();
    assert_eq!(by_chars, passage.text);
}

#[test]
fn ambiguous_marker_in_corpus_is_reported() {
    let doc = load_document(
        fixtures_dir().join("corpus/israel_potter_melville.txt"),
        "ip",
    )
    .unwrap();
    let sel = PassageSelector::MarkerPair {
        start: "CHAPTER".into(),
        end: "CHAPTER 5".into(),
    };
    match extract_passage(&doc, &sel) {
        Err(IngestError::MarkerNotFound {
            kind: MarkerProblem::Ambiguous(3),
            ..
        }) => {}
        other => panic!("expected ambiguity, got {other:?}"),
    }
}

#[test]
fn table1_manifest_resolves_every_instance() {
    let manifest = Manifest::load(table1_manifest()).unwrap();
    assert_eq!(manifest.instances.len(), 4);
    for inst in &manifest.instances {
        for side in Side::BOTH {
            let doc = manifest.load_document(inst.doc_id(side)).unwrap();
            let passage = resolve_passage(&doc, inst.range(side)).unwrap();
            assert!(
                passage.text.split_whitespace().count() > 40,
                "instance {} {side}",
                inst.instance_id
            );
        }
    }
}

#[test]
fn expert_spans_cover_the_quoted_phrases() {
    let manifest = Manifest::load(table1_manifest()).unwrap();
    let inst = &manifest.instances[0];
    let mut phrases = Vec::new();
    for span in &inst.expert_spans {
        let doc = manifest.load_document(inst.doc_id(span.side)).unwrap();
        let passage = extract_passage(&doc, inst.range(span.side)).unwrap();
        let text: String = passage
            .chars()
            .skip(span.start)
            .take(span.end - span.start)
            .collect();
        phrases.push((span.side, text));
    }
    assert_eq!(
        phrases,
        vec![
            (
                Side::Candidate,
                "a plurality of husbands, instead of wives".to_string()
            ),
            (Side::Reference, "of a plurality of husbands".to_string()),
        ]
    );
}

#[test]
fn line_span_selects_religio_section() {
    let manifest = Manifest::load(table1_manifest()).unwrap();
    let inst = &manifest.instances[2];
    let doc = manifest.load_document(&inst.reference_doc).unwrap();
    let text = extract_passage(&doc, &inst.reference_range).unwrap();
    assert!(text.starts_with("We carry with us the wonders we seek without us"));
    assert!(text.ends_with("turn it round sometimes for my recreation."));
    assert_eq!(text.matches("\n\n").count(), 2);
}
