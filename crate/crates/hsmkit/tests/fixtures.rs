use hsmkit::fixtures::{artificial_tables, psa_pooled_tables, ARTIFICIAL_TABLE_SIZE, PSA_TABLE_SIZE};
use hsmkit::tables::TableCollection;

const ARTIFICIAL_PRINTED: [(&str, [f64; 4]); 8] = [
    ("A,H", [0.345, 0.101, 0.125, 0.429]),
    ("A,I", [0.271, 0.175, 0.084, 0.469]),
    ("A,U", [0.115, 0.331, 0.269, 0.285]),
    ("H,I", [0.335, 0.035, 0.021, 0.610]),
    ("H,U", [0.296, 0.073, 0.088, 0.543]),
    ("I,U", [0.300, 0.055, 0.100, 0.545]),
    ("H,A", [0.286, 0.083, 0.143, 0.488]),
    ("U,I", [0.325, 0.059, 0.095, 0.521]),
];

const DEATH_PRINTED: [(&str, [f64; 4]); 6] = [
    ("P,I", [0.529, 0.166, 0.072, 0.232]),
    ("P,B", [0.612, 0.092, 0.074, 0.223]),
    ("P,L", [0.501, 0.201, 0.064, 0.235]),
    ("I,B", [0.539, 0.074, 0.128, 0.259]),
    ("I,L", [0.441, 0.181, 0.127, 0.251]),
    ("B,L", [0.495, 0.188, 0.086, 0.232]),
];

const HARM_PRINTED: [(&str, [f64; 4]); 6] = [
    ("P,I", [0.438, 0.134, 0.049, 0.379]),
    ("P,B", [0.459, 0.099, 0.069, 0.374]),
    ("P,L", [0.378, 0.176, 0.083, 0.362]),
    ("I,B", [0.419, 0.078, 0.109, 0.394]),
    ("I,L", [0.324, 0.169, 0.124, 0.383]),
    ("B,L", [0.356, 0.184, 0.102, 0.359]),
];

fn check(c: &TableCollection, condition: &str, printed: &[(&str, [f64; 4])], n: f64) {
    for (ctx, freqs) in printed {
        let t = c
            .tables
            .iter()
            .find(|t| t.condition == condition && t.context_key() == *ctx)
            .unwrap_or_else(|| panic!("missing {condition}/{ctx}"));
        for (count, f) in t.counts.iter().zip(freqs) {
            let rounded = (count / n * 1000.0).round() / 1000.0;
            assert_eq!(rounded, *f, "{condition}/{ctx}");
        }
    }
}

#[test]
fn artificial_tables_match_printed_frequencies() {
    let c = artificial_tables();
    assert_eq!(c.tables.len(), 8);
    check(&c, "default", &ARTIFICIAL_PRINTED, ARTIFICIAL_TABLE_SIZE);
    let labels = c.cell_labels(&c.tables[0]).unwrap();
    assert_eq!(labels, vec!["YY", "YN", "NY", "NN"]);
}

#[test]
fn pooled_tables_match_printed_frequencies() {
    let c = psa_pooled_tables();
    assert_eq!(c.tables.len(), 12);
    assert_eq!(c.conditions, vec!["death", "harm"]);
    assert!(c.tables.iter().all(|t| t.pooled_orders));
    check(&c, "death", &DEATH_PRINTED, PSA_TABLE_SIZE);
    check(&c, "harm", &HARM_PRINTED, PSA_TABLE_SIZE);
    for t in &c.tables {
        assert!((t.total() - PSA_TABLE_SIZE).abs() <= 0.002 * PSA_TABLE_SIZE, "{}", t.context_key());
    }
}
