use proptest::prelude::*;
use schoolroom::embeddings::{
    parse_embeddings, read_embeddings, write_embeddings, EmbeddingFile, EmbeddingHeader, EmbeddingRecord,
};
use schoolroom::wav::{read_wav, write_wav, Encoding, RangePolicy, PCM_SCALE};
use schoolroom_core::pairing::{normalize_embeddings, Role, Utterance};
use schoolroom_core::AudioBuffer;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pcm16_round_trip_within_one_lsb(samples in prop::collection::vec(-1.0f64..1.0, 1..2000), rate in 8000u32..48001) {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        let buf = AudioBuffer::new(samples.clone(), rate).unwrap();
        write_wav(&buf, &a, Encoding::Pcm16, RangePolicy::Strict).unwrap();
        let once = read_wav(&a).unwrap();
        write_wav(&once, &b, Encoding::Pcm16, RangePolicy::Strict).unwrap();
        let twice = read_wav(&b).unwrap();
        prop_assert_eq!(once.sample_rate(), rate);
        prop_assert_eq!(once.samples(), twice.samples());
        for (x, y) in samples.iter().zip(once.samples()) {
            prop_assert!((x - y).abs() <= 1.0 / PCM_SCALE);
        }
    }

    #[test]
    fn float32_round_trip_is_bit_identical(samples in prop::collection::vec(-1.0f64..1.0, 1..2000)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let buf = AudioBuffer::new(samples.iter().map(|&x| f64::from(x as f32)).collect(), 16_000).unwrap();
        write_wav(&buf, &p, Encoding::Float32, RangePolicy::Strict).unwrap();
        let back = read_wav(&p).unwrap();
        prop_assert_eq!(back.samples(), buf.samples());
    }
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn embedding_file_feeds_the_matcher() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.jsonl");
    let records = vec![
        EmbeddingRecord {
            id: "c0".into(),
            role: Role::Child,
            dim: Some(3),
            values: unit(vec![1.0, 0.2, 0.0]),
        },
        EmbeddingRecord {
            id: "a0".into(),
            role: Role::Adult,
            dim: None,
            values: unit(vec![0.9, 0.3, 0.1]),
        },
        EmbeddingRecord {
            id: "a1".into(),
            role: Role::Adult,
            dim: None,
            values: unit(vec![0.0, 0.1, 1.0]),
        },
    ];
    let file = EmbeddingFile {
        header: EmbeddingHeader {
            model_name: "m".into(),
            dim: 3,
            count: 3,
        },
        records,
    };
    write_embeddings(&path, &file).unwrap();
    let back = read_embeddings(&path).unwrap();
    assert_eq!(back, file);
    assert!(back.violations().is_empty());

    let utts: Vec<Utterance> = back
        .records
        .iter()
        .map(|r| Utterance {
            id: r.id.clone(),
            transcript: String::new(),
            embedding: r.values.clone(),
            duration_s: 1.0,
            speaker_id: r.id.clone(),
            role: r.role,
            source_corpus: "x".into(),
        })
        .collect();
    let normalized = normalize_embeddings(utts.clone()).unwrap();
    for (u, n) in utts.iter().zip(&normalized) {
        for (x, y) in u.embedding.iter().zip(&n.embedding) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn broken_embedding_files_are_rejected_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.jsonl");
    std::fs::write(
        &path,
        "{\"model_name\":\"m\",\"dim\":2,\"count\":2}\n{\"id\":\"a\",\"role\":\"adult\",\"values\":[0.6,0.8]}\n{\"id\":\"b\",\"role\":\"child\",\"values\":[1.0,1.0]}\n",
    )
    .unwrap();
    let parsed = parse_embeddings(&path).unwrap();
    let v = parsed.violations();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].line, 3);
    assert!(read_embeddings(&path).is_err());

    std::fs::write(
        &path,
        "{\"model_name\":\"m\",\"dim\":2,\"count\":1}\n{\"id\":\"a\",\"role\":\"teacher\",\"values\":[1,0]}\n",
    )
    .unwrap();
    match parse_embeddings(&path) {
        Err(schoolroom::Error::Format { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a format error, got {other:?}"),
    }
}
