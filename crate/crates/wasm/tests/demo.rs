use nvlaser_wasm::{contrast_map, feasibility_regions, odmr_spectrum, presets};

#[test]
fn lists_presets() {
    let names = presets();
    assert!(names.split(',').any(|n| n == "D3"), "{names}");
}

#[test]
fn contrast_map_shape() {
    let c = contrast_map("D3", 1e4, 1e7, 1e2, 1e8, 6).unwrap();
    assert_eq!(c.len(), 36);
    assert!(c.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn odmr_layout() {
    let out = odmr_spectrum("D3", 1e-20, 0.02).unwrap();
    let m = (out.len() - 2) / 2;
    assert_eq!(out.len(), 2 * m + 2);
    let (f, p) = (&out[..m], &out[m..2 * m]);
    assert!(f.windows(2).all(|w| w[1] > w[0]));
    assert!(p.iter().all(|v| *v >= 0.0));
    let (off, on) = (out[2 * m], out[2 * m + 1]);
    assert!(on < off);
}

#[test]
fn regions_are_coded() {
    let r = feasibility_regions("D3", 1e-22, 1e-19, 4, 0.01, 0.1, 3).unwrap();
    assert_eq!(r.len(), 12);
    assert!(r.iter().all(|k| *k <= 2));
}

#[test]
fn rejects_bad_input() {
    assert!(contrast_map("nope", 1e4, 1e7, 1e2, 1e8, 4).is_err());
    assert!(contrast_map("D3", 1e7, 1e4, 1e2, 1e8, 4).is_err());
    assert!(odmr_spectrum("D3", -1.0, 0.02).is_err());
    assert!(feasibility_regions("D3", 1e-22, 1e-19, 1, 0.01, 0.1, 3).is_err());
}
