//! Frame-level average precision on hand-made cases, then frame-mAP over a
//! small multi-class example.

use keynet::eval::{frame_ap, frame_map, ActorPrediction, GroundTruth, FRAME_AP_IOU};
use keynet::tracking::BBox;

fn bbox(x: f64) -> BBox {
    BBox::new(x, 0.0, x + 10.0, 20.0).expect("valid box")
}

fn pred(frame: usize, x: f64, scores: &[f64]) -> ActorPrediction {
    ActorPrediction { frame, bbox: bbox(x), scores: scores.to_vec() }
}

fn main() -> keynet::Result<()> {
    let gt = vec![GroundTruth { frame: 0, bbox: bbox(0.0), labels: vec![0] }];

    let exact = [pred(0, 0.0, &[0.9])];
    println!("exact match:            AP {:?}", frame_ap(&exact, &gt, 0, FRAME_AP_IOU));

    // a false positive outranks the true positive
    let fp_first = [pred(0, 50.0, &[0.9]), pred(0, 0.0, &[0.8])];
    println!("FP at 0.9, TP at 0.8:   AP {:?}", frame_ap(&fp_first, &gt, 0, FRAME_AP_IOU));

    let dup = [pred(0, 0.0, &[0.9]), pred(0, 1.0, &[0.8])];
    println!("duplicate on one GT:    AP {:?}", frame_ap(&dup, &gt, 0, FRAME_AP_IOU));

    let truth = vec![
        GroundTruth { frame: 0, bbox: bbox(0.0), labels: vec![0] },
        GroundTruth { frame: 0, bbox: bbox(30.0), labels: vec![1] },
        GroundTruth { frame: 1, bbox: bbox(0.0), labels: vec![0, 1] },
    ];
    let preds = vec![
        pred(0, 0.0, &[0.9, 0.2, 0.1]),
        pred(0, 31.0, &[0.3, 0.7, 0.1]),
        pred(1, 2.0, &[0.6, 0.4, 0.8]),
    ];
    let report = frame_map(&preds, &truth, 3, FRAME_AP_IOU)?;
    let names = ["a", "b", "c"].map(String::from);
    print!("{}", report.to_csv(&names));
    Ok(())
}
