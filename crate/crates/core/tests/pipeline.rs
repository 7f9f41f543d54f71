use approx::assert_relative_eq;
use faraday_cavity::lindblad::master_transmittance;
use faraday_cavity::measurement::{conditional_population, no_click_population, Port};
use faraday_cavity::montecarlo::{
    average_rotation, mean_relative_coupling_sq, sample_selected_trajectories, CoincidenceConfig,
    MotionModel,
};
use faraday_cavity::optics::{rotation_angle, rotation_angle_tuned, transmittance, Tuning};
use faraday_cavity::params::{mhz, CavityAnchor, ParamFile, SystemParams};
use faraday_cavity::scans::{max_rotation, scan_length};

#[test]
fn config_to_rotation_maximum() {
    let file = ParamFile::from_toml_str("g0_mhz = 2.8\nkappa_mhz = 4.5\n").unwrap();
    let p = file.resolve().unwrap().system;
    let m = max_rotation(&p, Tuning::ProbeEqualsCavity).unwrap();
    assert!((m.magnitude().to_degrees() - 21.1).abs() < 0.5);
    assert!(!m.warning);
    let direct = rotation_angle(m.delta_star, p.g0, &p).unwrap();
    assert_relative_eq!(direct, m.angle, epsilon = 1e-12);
}

#[test]
fn master_equation_agrees_at_the_optimum() {
    let p = SystemParams::default();
    let m = max_rotation(&p, Tuning::ProbeEqualsCavity).unwrap();
    let exact = transmittance(m.delta_star, p.g0, &p).t_minus;
    let me = master_transmittance(m.delta_star, 0.0, p.g0, &p).unwrap().t_minus;
    assert!((me - exact).norm() / exact.norm() < 1e-6);
}

#[test]
fn length_scan_passes_through_anchor() {
    let anchor = CavityAnchor::default();
    let scan = scan_length(&anchor, &[100e-6, 150e-6, 200e-6], Tuning::CavityEqualsAtom).unwrap();
    let at_anchor = scan.point_near(150e-6).unwrap().max_angle;
    let direct = max_rotation(&anchor.params, Tuning::CavityEqualsAtom).unwrap().magnitude();
    assert_relative_eq!(at_anchor, direct, max_relative = 1e-6);
}

#[test]
fn motion_halves_the_rotation() {
    let p = SystemParams::default();
    let motion = MotionModel::default().with_seed(11);
    let trajs = sample_selected_trajectories(&motion, &CoincidenceConfig::default(), &p, 500).unwrap();
    let g2 = mean_relative_coupling_sq(&trajs, &p);
    assert!(g2 > 0.3 && g2 < 0.8, "{g2}");
    let deltas: Vec<f64> = [-1.0, -0.6, 0.6, 1.0].iter().map(|&d| mhz(d)).collect();
    let peak = average_rotation(&trajs, &motion, &deltas, &p)
        .unwrap()
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    let pinned = max_rotation(&p, Tuning::ProbeEqualsCavity).unwrap().magnitude();
    assert!(peak > 0.3 * pinned && peak < 0.7 * pinned);
}

#[test]
fn spin_readout_outcomes_partition_the_prior() {
    let p = SystemParams::default();
    let t = transmittance(mhz(-1.1), p.g0, &p);
    let prior = 0.3;
    let phi = 1.0;
    let tr = conditional_population(prior, phi, &t, Port::Transmitted).unwrap();
    let rf = conditional_population(prior, phi, &t, Port::Reflected).unwrap();
    let (lost, w) = no_click_population(prior, &t).unwrap();
    let total = tr.click_probability * tr.p_down_given_click + rf.click_probability * rf.p_down_given_click + w * lost;
    assert_relative_eq!(total, prior, epsilon = 1e-12);
}

#[test]
fn decoupled_atom_does_nothing() {
    let p = SystemParams::default().with_g0(0.0);
    for d in [-2.0, 0.0, 1.5] {
        assert_eq!(rotation_angle_tuned(Tuning::CavityEqualsAtom, mhz(d), 0.0, &p).unwrap(), 0.0);
    }
}
