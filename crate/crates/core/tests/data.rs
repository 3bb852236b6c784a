use breslow_core::data::{
    depth_class_of, merge_datasets, parse_feature_file, parse_feature_str, stage_of, write_feature_file,
    write_feature_string, BreslowStage, Dataset, DepthClass, Sample, ThicknessMm,
};
use proptest::prelude::*;

fn sample_strategy(dim: usize) -> impl Strategy<Value = (String, Vec<f64>, Option<f64>, bool)> {
    (
        "[^\t\n\r#][^\t\n\r]{0,12}",
        prop::collection::vec(
            prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL,
            dim,
        ),
        prop::option::of(0.0f64..12.0),
        any::<bool>(),
    )
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (1usize..6).prop_flat_map(|dim| {
        prop::collection::vec(sample_strategy(dim), 0..20).prop_map(move |rows| {
            let samples = rows
                .into_iter()
                .enumerate()
                .map(|(i, (id, features, t, high))| {
                    let id = format!("{id}{i}");
                    match t {
                        Some(t) => Sample::with_thickness(id, "src", features, ThicknessMm::new(t).unwrap()),
                        None => {
                            let label = if high { DepthClass::High } else { DepthClass::Low };
                            Sample::new(id, "src", features, None, label)
                        }
                    }
                    .unwrap()
                })
                .collect();
            Dataset::new(dim, samples).unwrap()
        })
    })
}

fn bits(ds: &Dataset) -> Vec<(String, String, Vec<u64>, Option<u64>, DepthClass)> {
    ds.iter()
        .map(|s| {
            (
                s.id().to_string(),
                s.source().to_string(),
                s.features().iter().map(|f| f.to_bits()).collect(),
                s.thickness().map(|t| t.value().to_bits()),
                s.label(),
            )
        })
        .collect()
}

proptest! {
    #[test]
    fn feature_file_roundtrip_is_bit_exact(ds in dataset_strategy()) {
        let text = write_feature_string(&ds, &["generated by a test"]);
        let back = parse_feature_str(&text).unwrap();
        prop_assert_eq!(back.dim(), ds.dim());
        prop_assert_eq!(bits(&back), bits(&ds));
        prop_assert_eq!(back.source_counts(), ds.source_counts());
    }

    #[test]
    fn merge_is_associative_in_counts(a in 1usize..30, b in 1usize..30, c in 1usize..30) {
        let part = |src: &str, n: usize| {
            let samples = (0..n)
                .map(|i| {
                    let t = ThicknessMm::new(0.1 * i as f64).unwrap();
                    Sample::namespaced(src, &i.to_string(), vec![i as f64], Some(t), depth_class_of(t)).unwrap()
                })
                .collect();
            Dataset::new(1, samples).unwrap()
        };
        let (x, y, z) = (part("a", a), part("b", b), part("c", c));
        let left = merge_datasets(&[merge_datasets(&[x.clone(), y.clone()]).unwrap(), z.clone()]).unwrap();
        let right = merge_datasets(&[x, merge_datasets(&[y, z]).unwrap()]).unwrap();
        prop_assert_eq!(left.source_counts(), right.source_counts());
        prop_assert_eq!(left.len(), a + b + c);
    }

    #[test]
    fn stage_and_class_agree(t in 0.0f64..10.0) {
        let t = ThicknessMm::new(t).unwrap();
        prop_assert_eq!(depth_class_of(t) == DepthClass::Low, stage_of(t) == BreslowStage::I);
    }
}

#[test]
fn file_roundtrip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.tsv");
    let s = Sample::with_thickness("x/1", "x", vec![0.1, -2.5e-300, 7.0], ThicknessMm::new(0.76).unwrap()).unwrap();
    let ds = Dataset::new(3, vec![s]).unwrap();
    write_feature_file(&ds, &path).unwrap();
    assert_eq!(parse_feature_file(&path).unwrap(), ds);
}

#[test]
fn hash_prefixed_ids_are_rejected() {
    assert!(Sample::new("#1", "s", vec![0.0], None, DepthClass::Low).is_err());
}
