use std::io::Write;
use std::path::PathBuf;

use skewclust::io::{ingest_csv, read_csv, scale_columns, unscale, CsvOptions, LabelColumn};
use skewclust::Error;

fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn labelled(column: &str) -> CsvOptions {
    CsvOptions {
        label: Some(LabelColumn::Name(column.into())),
        ..CsvOptions::default()
    }
}

#[test]
fn iris_shape_and_classes() {
    let ds = ingest_csv(data_file("iris.csv"), &labelled("species")).unwrap();
    assert_eq!((ds.n(), ds.p()), (150, 4));
    assert_eq!(ds.classes(), ["setosa", "versicolor", "virginica"]);
    let truth = ds.truth().unwrap();
    for c in 0..3 {
        assert_eq!(truth.labels().iter().filter(|&&l| l == c).count(), 50);
    }
    assert_eq!(ds.column_names[0], "sepal_length");
}

#[test]
fn wine_and_crabs_load() {
    let wine = ingest_csv(data_file("wine.csv"), &labelled("cultivar")).unwrap();
    assert_eq!((wine.n(), wine.p(), wine.classes().len()), (178, 13, 3));
    let crabs = ingest_csv(data_file("crabs.csv"), &labelled("group")).unwrap();
    assert_eq!((crabs.n(), crabs.p(), crabs.classes().len()), (200, 5, 4));
}

#[test]
fn question_marks_become_missing_labels() {
    let text = std::fs::read_to_string(data_file("iris.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    for line in &mut lines[5..=8] {
        let cut = line.rfind(',').unwrap();
        line.truncate(cut + 1);
        line.push('?');
    }
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "{}", lines.join("\n")).unwrap();
    let options = CsvOptions {
        missing_label: Some("?".into()),
        ..labelled("species")
    };
    let ds = ingest_csv(file.path(), &options).unwrap();
    let known = ds.known_labels().unwrap();
    let missing: Vec<usize> = (0..ds.n()).filter(|&j| known[j].is_none()).collect();
    assert_eq!(missing, [4, 5, 6, 7]);
    assert_eq!(ds.classes().len(), 3);
    assert!(ds.truth().is_none());
}

#[test]
fn scaled_iris_is_standardized_and_reversible() {
    let raw = ingest_csv(data_file("iris.csv"), &labelled("species")).unwrap();
    let ds = scale_columns(&raw).unwrap();
    let n = ds.n() as f64;
    for col in ds.matrix.column_iter() {
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
    }
    assert!((unscale(&ds).matrix - &raw.matrix).amax() < 1e-12);
}

#[test]
fn structured_errors() {
    let bad = "a,b\n1,2\n3,x\n";
    match read_csv(bad.as_bytes(), &CsvOptions::default()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(read_csv("a,b\n1,2\n3\n".as_bytes(), &CsvOptions::default()).is_err());
    assert!(read_csv("".as_bytes(), &CsvOptions::default()).is_err());
    assert!(matches!(ingest_csv("/nonexistent/file.csv", &CsvOptions::default()), Err(Error::Io(_))));
}
