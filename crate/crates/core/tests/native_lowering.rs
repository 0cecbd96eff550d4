mod common;

use std::f64::consts::PI;

use common::*;
use pce_core::cartan::{optimize, CartanConfig};
use pce_core::circuit::*;
use pce_core::experiment::first_site_x;
use pce_core::linalg::Mat2;
use pce_core::model::{build_model, ModelKind, ModelSpec};
use pce_core::transpile::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_mat2(m: &M) -> Mat2 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn from_mat2(m: &Mat2) -> M {
    M::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

fn rz(a: f64) -> M {
    M::from_row_slice(2, 2, &[c(0.0, -a / 2.0).exp(), c(0.0, 0.0), c(0.0, 0.0), c(0.0, a / 2.0).exp()])
}

fn rx(a: f64) -> M {
    let (co, si) = ((a / 2.0).cos(), (a / 2.0).sin());
    M::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)])
}

#[test]
fn haar_unitaries_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let u = haar(2, &mut rng);
        let (phi, theta, lam) = zxzxz(&to_mat2(&u)).unwrap();
        for a in [phi, theta, lam] {
            assert!(a > -PI && a <= PI);
        }
        worst = worst.max(phase_free_distance(&from_mat2(&zxzxz_matrix(phi, theta, lam)), &u));
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

/// The block rebuilt from hand-written RZ and RX(π/2) matrices.
#[test]
fn block_convention_matches_hand_built_product() {
    let x90 = rx(PI / 2.0);
    let (phi, theta, lam) = (0.7, 1.9, -2.4);
    let hand = rz(phi - PI / 2.0) * &x90 * rz(PI - theta) * &x90 * rz(lam - PI / 2.0);
    assert!(phase_free_distance(&from_mat2(&zxzxz_matrix(phi, theta, lam)), &hand) < 1e-12);
}

#[test]
fn near_degenerate_blocks_reconstruct() {
    for eps in [0.0, 1e-13, 1e-12, 1e-10, 1e-8, 1e-6] {
        for theta in [eps, PI - eps] {
            for (a, b) in [(0.3, -1.1), (2.9, 2.9), (-3.0, 0.0)] {
                let u = rz(a) * rx(theta) * rz(b);
                let (phi, t, lam) = zxzxz(&to_mat2(&u)).unwrap();
                let err = phase_free_distance(&from_mat2(&zxzxz_matrix(phi, t, lam)), &u);
                assert!(err < 1e-12, "theta={theta:e} a={a} b={b}: {err:e}");
            }
        }
    }
}

#[test]
fn controlled_y_followed_by_rotations() {
    let mut c = Circuit::new(3);
    for g in [Gate::Cy(1, 2), Gate::X90(2), Gate::Rz(2, Param::Bound(1.259290051189951))] {
        c.push(g).unwrap();
    }
    let n = to_native(&c).unwrap();
    assert!(phase_free_distance(&n.unitary().unwrap(), &c.unitary().unwrap()) < 1e-12);
}

#[test]
fn hadamard_tests_lower_faithfully() {
    let specs = [
        ModelSpec::new(ModelKind::Tfxy, 2),
        ModelSpec::new(ModelKind::Tfxy, 3),
        ModelSpec::new(ModelKind::Heisenberg, 2),
        ModelSpec::new(ModelKind::Heisenberg, 3),
    ];
    for spec in specs {
        let h = build_model(&spec).unwrap();
        let d = optimize(&h, &CartanConfig::default()).unwrap();
        let x = first_site_x(spec.sites).unwrap();
        let sym_evo = build_time_evolution(&d, Time::Symbolic).unwrap();
        for basis in [Basis::Real, Basis::Imag] {
            let sym = build_hadamard_test(&x, &x, &sym_evo, basis).unwrap();
            let native_sym = to_native(&sym).unwrap();
            for t in [0.0, 1.3, 4.4] {
                let bound = sym.bind_time(t).unwrap();
                let native = to_native(&bound).unwrap();
                assert_eq!(native_sym.bind_time(t).unwrap(), native, "{spec:?} t={t}");
                let err = phase_free_distance(&native.unitary().unwrap(), &bound.unitary().unwrap());
                assert!(err < 1e-9, "{spec:?} t={t}: {err:e}");
            }
        }
    }
}

#[test]
fn native_blocks_have_fixed_shape() {
    let mut c = Circuit::new(3);
    for g in [Gate::H(0), Gate::Rx(1, Param::Bound(0.3)), Gate::Cx(0, 2), Gate::Cy(2, 1), Gate::Ry(0, Param::Bound(1.0)), Gate::Measure(0)] {
        c.push(g).unwrap();
    }
    let n = to_native(&c).unwrap();
    // Between two-qubit ops and measures, each qubit's ops come in VZ X90 VZ X90 VZ groups.
    let mut run: Vec<Vec<&NativeOp<VzPhase>>> = vec![Vec::new(); 3];
    let check = |ops: &Vec<&NativeOp<VzPhase>>| {
        assert!(ops.len().is_multiple_of(5));
        for chunk in ops.chunks(5) {
            assert!(matches!(chunk[0], NativeOp::Vz { .. }));
            assert!(matches!(chunk[1], NativeOp::X90 { .. }));
            assert!(matches!(chunk[2], NativeOp::Vz { .. }));
            assert!(matches!(chunk[3], NativeOp::X90 { .. }));
            assert!(matches!(chunk[4], NativeOp::Vz { .. }));
        }
    };
    for op in &n.ops {
        match op {
            NativeOp::Vz { qubit, .. } | NativeOp::X90 { qubit } => run[*qubit].push(op),
            NativeOp::Cz { a, b } => {
                check(&run[*a]);
                check(&run[*b]);
                run[*a].clear();
                run[*b].clear();
            }
            NativeOp::Measure { qubit } => {
                check(&run[*qubit]);
                run[*qubit].clear();
            }
        }
    }
    run.iter().for_each(check);
    assert!(phase_free_distance(&n.unitary().unwrap(), &c.unitary().unwrap()) < 1e-9);
}

#[derive(Debug, Clone)]
enum G {
    H(usize),
    X90(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    SlotRz(usize),
    Cx(usize, usize),
    Cy(usize, usize),
    Cz(usize, usize),
}

fn gate_strategy() -> impl Strategy<Value = G> {
    let q = 0usize..3;
    let pair = (0usize..3, 1usize..3).prop_map(|(a, d)| (a, (a + d) % 3));
    let ang = -4.0f64..4.0;
    prop_oneof![
        q.clone().prop_map(G::H),
        q.clone().prop_map(G::X90),
        (q.clone(), ang.clone()).prop_map(|(q, a)| G::Rx(q, a)),
        (q.clone(), ang.clone()).prop_map(|(q, a)| G::Ry(q, a)),
        (q.clone(), ang).prop_map(|(q, a)| G::Rz(q, a)),
        q.prop_map(G::SlotRz),
        pair.clone().prop_map(|(a, b)| G::Cx(a, b)),
        pair.clone().prop_map(|(a, b)| G::Cy(a, b)),
        pair.prop_map(|(a, b)| G::Cz(a, b)),
    ]
}

fn build(gates: &[G]) -> Circuit {
    let mut c = Circuit::new(3);
    for g in gates {
        let gate = match *g {
            G::H(q) => Gate::H(q),
            G::X90(q) => Gate::X90(q),
            G::Rx(q, a) => Gate::Rx(q, Param::Bound(a)),
            G::Ry(q, a) => Gate::Ry(q, Param::Bound(a)),
            G::Rz(q, a) => Gate::Rz(q, Param::Bound(a)),
            G::SlotRz(q) => {
                let s = c.add_slot(format!("s{}", c.slots().len()), Some(1.0 + c.slots().len() as f64));
                Gate::Rz(q, Param::Slot(s))
            }
            G::Cx(a, b) => Gate::Cx(a, b),
            G::Cy(a, b) => Gate::Cy(a, b),
            G::Cz(a, b) => Gate::Cz(a, b),
        };
        c.push(gate).unwrap();
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Either the slots survive (and binding commutes with lowering) or the
    /// lowering reports a structural error; bound circuits always lower.
    #[test]
    fn lowering_preserves_unitary_and_slots(gates in proptest::collection::vec(gate_strategy(), 0..14), t in -2.0f64..2.0) {
        let c = build(&gates);
        let bound = c.bind_time(t).unwrap();
        let native = to_native(&bound).unwrap();
        prop_assert!(phase_free_distance(&native.unitary().unwrap(), &bound.unitary().unwrap()) < 1e-9);
        match to_native(&c) {
            Ok(sym) => prop_assert_eq!(sym.bind_time(t).unwrap(), native),
            Err(e) => prop_assert!(matches!(e, pce_core::PceError::Structural { .. }), "{e}"),
        }
    }
}
