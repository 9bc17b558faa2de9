use tempfile::TempDir;
use wslabel::io::{
    load_bounds, load_ds_params, load_labeling, load_labels, load_predictions, save_bounds,
    save_ds_params, save_labeling, save_predictions, write_hard_labels,
};
use wslabel::{appendix_instance, majority_vote, OcdsParams, PolytopeSpec};

#[test]
fn demo_instance_survives_a_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let inst = appendix_instance();
    let preds_path = dir.path().join("preds.csv");
    save_predictions(&preds_path, &inst.preds).unwrap();
    assert_eq!(load_predictions(&preds_path, Some(2)).unwrap(), inst.preds);

    let labels_path = dir.path().join("labels.csv");
    let mut buf = Vec::new();
    write_hard_labels(&mut buf, &inst.true_labels).unwrap();
    std::fs::write(&labels_path, buf).unwrap();
    assert_eq!(load_labels(&labels_path, 2).unwrap().to_hard(), inst.true_labels);

    let g = majority_vote(&inst.preds);
    let g_path = dir.path().join("g.csv");
    save_labeling(&g_path, &g).unwrap();
    assert_eq!(load_labeling(&g_path).unwrap(), g);
}

#[test]
fn bounds_and_params_round_trip() {
    let dir = TempDir::new().unwrap();
    let spec = PolytopeSpec::new(vec![0.1 + 0.2, 2.0 / 3.0, 0.5], vec![1e-9, 0.25, 0.0]).unwrap();
    let path = dir.path().join("b.toml");
    save_bounds(&path, &spec).unwrap();
    assert_eq!(load_bounds(&path).unwrap(), spec);

    let params = OcdsParams::new(vec![0.25, 0.75], vec![Some(0.6), None, Some(1.0 / 3.0)]).unwrap();
    let path = dir.path().join("p.toml");
    save_ds_params(&path, &params).unwrap();
    assert_eq!(load_ds_params(&path).unwrap(), params);
}
