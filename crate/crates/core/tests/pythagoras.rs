use proptest::prelude::*;
use relent::maxent::{maxent_linear, LinearConstraint};
use relent::ml::{fit_independence, fit_quasi_symmetry, fit_symmetry, fit_threeway, ThreeWayModel};
use relent::simplex::{relative_entropy, Distribution, JointTable, SquareTable, ThreeWayTable};

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len)
}

fn rows(r: usize, c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(weights(c), r)
}

fn square(m: usize) -> impl Strategy<Value = SquareTable> {
    rows(m, m).prop_map(|w| SquareTable::new(JointTable::from_weight_rows(&w).unwrap()).unwrap())
}

proptest! {
    #[test]
    fn convex_family((f, g, a) in (2usize..7).prop_flat_map(|m| (weights(m), weights(m), prop::collection::vec(-2.0f64..2.0, m)))) {
        let f = Distribution::from_weights(f).unwrap();
        let g = Distribution::from_weights(g).unwrap();
        let c = LinearConstraint::new(a.clone(), f.mean_of(&a).unwrap()).unwrap();
        let p = maxent_linear(&g, &c, 1e-14).unwrap().projected;
        let split = relative_entropy(&f, &p).unwrap() + relative_entropy(&p, &g).unwrap();
        prop_assert!((relative_entropy(&f, &g).unwrap() - split).abs() < 1e-8);
    }

    #[test]
    fn independence_family((data, a, b) in (2usize..5, 2usize..5).prop_flat_map(|(r, c)| (rows(r, c), weights(r), weights(c)))) {
        let data = JointTable::from_weight_rows(&data).unwrap();
        let model = JointTable::product(&Distribution::from_weights(a).unwrap(), &Distribution::from_weights(b).unwrap()).unwrap();
        let fit = fit_independence(&data).fitted;
        let split = data.divergence_to(&fit).unwrap() + fit.divergence_to(&model).unwrap();
        prop_assert!((data.divergence_to(&model).unwrap() - split).abs() < 1e-10);
    }

    #[test]
    fn symmetric_family((data, model) in (2usize..5).prop_flat_map(|m| (square(m), square(m)))) {
        let model = fit_symmetry(&model).fitted;
        let fit = fit_symmetry(&data).fitted;
        let split = data.divergence_to(&fit).unwrap() + fit.divergence_to(&model).unwrap();
        prop_assert!((data.divergence_to(&model).unwrap() - split).abs() < 1e-10);
    }

    #[test]
    fn quasi_symmetric_family((data, model) in (2usize..5).prop_flat_map(|m| (square(m), square(m)))) {
        let model = fit_quasi_symmetry(&model, 1e-13, 100_000).unwrap().fitted;
        let fit = fit_quasi_symmetry(&data, 1e-13, 100_000).unwrap().fitted;
        let split = data.divergence_to(&fit).unwrap() + fit.divergence_to(&model).unwrap();
        prop_assert!((data.divergence_to(&model).unwrap() - split).abs() < 1e-7);
    }

    #[test]
    fn threeway_chain((dims, w) in (2usize..4, 2usize..4, 2usize..4).prop_flat_map(|(a, b, c)| (Just([a, b, c]), weights(a * b * c)))) {
        let t = ThreeWayTable::from_weights(dims, w).unwrap();
        let l = fit_threeway(&t, ThreeWayModel::L).unwrap();
        let n = fit_threeway(&t, ThreeWayModel::N).unwrap();
        let m = fit_threeway(&t, ThreeWayModel::M).unwrap();
        // N contains L, and the leftover step from the N fit to the L fit is the M divergence
        let step = n.fitted.divergence_to(&l.fitted).unwrap();
        prop_assert!((l.divergence - n.divergence - step).abs() < 1e-10);
        prop_assert!((step - m.divergence).abs() < 1e-10);
    }
}
