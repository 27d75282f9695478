//! Catalog-size forward passes. Run sequentially in one test to bound memory.

use fuznet::autodiff::Tensor;
use fuznet::layers::{Frame, StackedBlstm};
use fuznet::modelzoo::build_single_feature_model;
use fuznet::rng::SeededRng;
use fuznet::synthdata::{Catalog, Partition, SessionRecord};
use fuznet::ParamStore64;

fn noise(rows: usize, cols: usize, seed: u64) -> Tensor<f64> {
    let mut rng = SeededRng::new(seed);
    let data = (0..rows * cols).map(|_| rng.normal()).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

#[test]
fn catalog_shapes_end_to_end() {
    let catalog = Catalog::full();

    let text = catalog.lookup("text_use").unwrap().clone();
    assert_eq!(text.shape(), [400, 512]);
    let mut store = ParamStore64::new();
    let mut rng = SeededRng::new(1);
    let enc = StackedBlstm::new(&mut store, "t", 512, 200, 2, &mut rng).unwrap();
    let mut frame = Frame::bind(&store);
    let x = frame.tape.constant(noise(400, 512, 2));
    let h = enc.forward(&mut frame, x).unwrap();
    assert_eq!(frame.tape.shape(h), [400, 400]);
    drop(frame);

    let model = build_single_feature_model(&text, 3).unwrap();
    let session = SessionRecord {
        session_id: "full".into(),
        partition: Partition::Test,
        phq8: 0,
        features: [("text_use".to_string(), noise(400, 512, 4))].into(),
    };
    assert!(model.predict(&session).unwrap().is_finite());
    drop(model);

    let fau = catalog.lookup("fau_lld").unwrap().clone();
    assert_eq!(fau.shape(), [15000, 35]);
    let mut store = ParamStore64::new();
    let enc = StackedBlstm::new(&mut store, "v", 35, 200, 1, &mut rng).unwrap();
    let mut frame = Frame::bind(&store);
    let x = frame.tape.constant(noise(15000, 35, 5));
    let h = enc.forward(&mut frame, x).unwrap();
    assert_eq!(frame.tape.shape(h), [15000, 400]);
    let pooled = frame.tape.max_over_time(h).unwrap();
    assert_eq!(frame.tape.shape(pooled), [400]);
    assert!(frame.value(pooled).is_finite());
}
