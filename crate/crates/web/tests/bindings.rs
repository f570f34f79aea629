use droem_web::{cutoff_probe_json, defect_curve_json, LiveView};

fn circle(view: &mut LiveView, frames: usize) -> Vec<u8> {
    let mut last = Vec::new();
    for k in 0..frames {
        let a = k as f64 * 0.1;
        last = view.advance(0.5 * a.cos(), 0.5 * a.sin(), 1).unwrap();
    }
    last
}

#[test]
fn frames_are_rgba_of_the_requested_size() {
    let mut view = LiveView::new(40, 0.3, 0.9).unwrap();
    let rgba = view.advance(0.1, -0.2, 2).unwrap();
    assert_eq!((view.width(), view.height()), (40, 40));
    assert_eq!(rgba.len(), 40 * 40 * 4);
    assert!(rgba.chunks_exact(4).all(|p| p[3] == 255));
    assert!((view.time() - 2.0 / 60.0).abs() < 1e-12);
}

#[test]
fn a_resting_pointer_leaves_the_state_alone() {
    let mut view = LiveView::new(24, 0.3, 0.9).unwrap();
    let before = view.digest();
    for _ in 0..5 {
        view.advance(0.3, 0.3, 1).unwrap();
    }
    assert_eq!(view.digest(), before);
}

#[test]
fn pointer_motion_evolves_the_state_deterministically() {
    let mut a = LiveView::new(24, 0.3, 0.9).unwrap();
    let mut b = LiveView::new(24, 0.3, 0.9).unwrap();
    let start = a.digest();
    let (fa, fb) = (circle(&mut a, 12), circle(&mut b, 12));
    assert_ne!(a.digest(), start);
    assert_eq!(a.digest(), b.digest());
    assert_eq!(fa, fb);
}

#[test]
fn pointer_outside_the_disk_is_clamped() {
    let mut view = LiveView::new(16, 0.3, 0.9).unwrap();
    view.advance(0.0, 0.0, 1).unwrap();
    view.advance(3.0, -4.0, 1).unwrap();
    view.advance(10.0, 10.0, 1).unwrap();
}

#[test]
fn drag_rate_changes_the_picture() {
    let mut still = LiveView::new(32, 0.0, 0.0).unwrap();
    let mut dragged = LiveView::new(32, 1.0, 1.0).unwrap();
    assert_ne!(still.advance(0.4, 0.0, 1).unwrap(), dragged.advance(0.4, 0.0, 1).unwrap());
}

#[test]
fn defect_curve_has_a_linear_exponent() {
    let json = defect_curve_json(2, -2, "1/5, 1/10, 1/20", 24, 12).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let p = v["exponent"].as_f64().unwrap();
    assert!((0.7..=1.3).contains(&p), "{p}");
    assert_eq!(v["norms"].as_array().unwrap().len(), 3);
    let sl2: serde_json::Value = serde_json::from_str(&defect_curve_json(1, -1, "1/5,1/10,1/20", 12, 6).unwrap()).unwrap();
    assert_eq!(sl2["exact"], true);
}

#[test]
fn defect_curve_rejects_bad_input() {
    assert!(defect_curve_json(2, -2, "1/5, x", 12, 6).is_err());
    assert!(defect_curve_json(2, -2, "1/5, 1/10", 12, 6).is_err());
    assert!(defect_curve_json(2, -2, "1/5, 0, 1/10", 12, 6).is_err());
}

#[test]
fn cutoff_probe_reports_the_weight_grading_as_exact() {
    for (h, n) in [("1/2", 1), ("1", 2), ("3/4", 3)] {
        let v: serde_json::Value = serde_json::from_str(&cutoff_probe_json(h, n, 10).unwrap()).unwrap();
        let entries = v["entries"].as_array().unwrap();
        let grading = entries.iter().find(|e| e["relation"] == "[L0,L-1]=L-1" && e["convention"] == "weight grading").unwrap();
        assert_eq!(grading["verdict"], "exact", "h={h} N={n}");
    }
    assert!(cutoff_probe_json("-1", 2, 10).is_err());
    assert!(cutoff_probe_json("abc", 2, 10).is_err());
}
