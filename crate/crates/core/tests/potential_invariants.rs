use equivar::coxeter::{dihedral_generators, generate_group};
use equivar::potential::{eval_q, make_triangle_potential, PotentialSpec, QSpec};
use proptest::prelude::*;
use std::sync::OnceLock;

fn triangle() -> &'static PotentialSpec {
    static W: OnceLock<PotentialSpec> = OnceLock::new();
    W.get_or_init(|| make_triangle_potential().unwrap())
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (-1.5f64..1.5, -1.5f64..1.5).prop_map(|(a, b)| [a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gradient_matches_central_differences(u in point()) {
        let w = triangle();
        let mut grad = [0.0; 2];
        w.value_and_gradient(&u, &mut grad);
        let step = 1e-5;
        let mut err = 0.0f64;
        for k in 0..2 {
            let (mut a, mut b) = (u, u);
            a[k] += step;
            b[k] -= step;
            let fd = (w.value(&a) - w.value(&b)) / (2.0 * step);
            err = err.max((fd - grad[k]).abs());
        }
        let scale = 1.0 + grad[0].hypot(grad[1]);
        prop_assert!(err <= 1e-6 * scale, "{err}");
    }

    #[test]
    fn hessian_is_symmetric(u in point()) {
        let w = triangle();
        let h = w.hessian(&u);
        prop_assert!((h.get(0, 1) - h.get(1, 0)).abs() <= 1e-8);
    }

    #[test]
    fn potential_is_group_invariant(u in point()) {
        let w = triangle();
        let g = generate_group(2, &dihedral_generators(3)).unwrap();
        let v = w.value(&u);
        for e in g.elements() {
            let gv = w.value(&e.apply(&u));
            prop_assert!((gv - v).abs() <= 1e-10 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn distance_monitor_is_convex(u in point(), v in point()) {
        let q = QSpec::distance(&[1.0, 0.0], 1.25);
        let mid = [(u[0] + v[0]) / 2.0, (u[1] + v[1]) / 2.0];
        prop_assert!(q.value(&mid) <= (q.value(&u) + q.value(&v)) / 2.0 + 1e-12);
    }

    #[test]
    fn monitor_grows_along_the_potential_near_a1(r in 1e-4f64..0.234, t in 0.0f64..std::f64::consts::TAU) {
        // <Q_u, W_u> >= c^2 Q on the q_bar ball around a1
        let w = triangle();
        let q = QSpec::distance(&[1.0, 0.0], w.m);
        let u = [1.0 + r * t.cos(), r * t.sin()];
        let (qv, qg) = eval_q(&q, &u);
        let mut wg = [0.0; 2];
        w.value_and_gradient(&u, &mut wg);
        let pairing = qg[0] * wg[0] + qg[1] * wg[1];
        prop_assert!(pairing >= w.c * w.c * qv, "{pairing} < {}", w.c * w.c * qv);
    }
}
