use teleoptic::bell::povm_elements;
use teleoptic::protocol::OutcomeId;
use teleoptic::verification::overlap_table;
use teleoptic::{JonesVectorF32, Real, TeleportRunF32, TeleportRunF64};

#[test]
fn f32_pipeline_agrees_with_f64() {
    for (theta, phi) in [(0.4f64, 1.0f64), (1.1, 0.4), (2.9, 5.5)] {
        let psi32 = JonesVectorF32::from_bloch(theta as f32, phi as f32);
        let r32 = TeleportRunF32::new(&psi32).unwrap();
        let r64 = TeleportRunF64::new(&psi32.to_f64()).unwrap();
        for k in OutcomeId::ALL {
            let (a, b) = (r32.outcome(k), r64.outcome(k));
            assert!((a.fidelity - 1.0).abs() < f32::check_eps());
            assert!((f64::from(a.probability) - b.probability).abs() < 1e-6);
            assert_eq!(a.plan, b.plan);
        }
        let t = overlap_table(&psi32).unwrap();
        for (k, row) in t.iter().enumerate() {
            assert!((row[k] - 1.0).abs() < f32::check_eps());
        }
    }
}

#[test]
fn f32_povm_is_complete() {
    let e = povm_elements(&JonesVectorF32::from_bloch(1.7, 2.3)).unwrap();
    let trace: f32 = e.iter().map(|m| m[0][0].re + m[1][1].re).sum();
    assert!((trace - 2.0).abs() < f32::check_eps());
    let off: num_complex::Complex<f32> = e.iter().map(|m| m[0][1]).sum();
    assert!(off.norm() < f32::check_eps());
}
