use flowrl::nn::{mlp_backward, mlp_forward, Activation, MlpParams};
use flowrl::rng;
use rand::Rng;

fn random_net<R: Rng>(r: &mut R) -> (MlpParams, Vec<f64>, Vec<f64>) {
    let depth = r.random_range(1..=3);
    let mut dims = vec![r.random_range(1..=5)];
    for _ in 0..depth {
        dims.push(r.random_range(1..=12));
    }
    let params = MlpParams::init(&dims, Activation::Tanh, r).unwrap();
    let input = (0..dims[0]).map(|_| r.random_range(-2.0..2.0)).collect();
    let g = (0..dims[depth]).map(|_| r.random_range(-1.0..1.0)).collect();
    (params, input, g)
}

fn scalar_loss(p: &MlpParams, input: &[f64], g: &[f64]) -> f64 {
    mlp_forward(p, input).unwrap().iter().zip(g).map(|(y, w)| y * w).sum()
}

#[test]
fn every_entry_matches_central_differences_on_random_nets() {
    let mut r = rng::stream(11, &[]);
    let h = 1e-5;
    for case in 0..100 {
        let (p, input, g) = random_net(&mut r);
        let (grads, grad_in) = mlp_backward(&p, &input, &g).unwrap();
        for (k, analytic) in grads.values().enumerate() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            *plus.values_mut().nth(k).unwrap() += h;
            *minus.values_mut().nth(k).unwrap() -= h;
            let fd = (scalar_loss(&plus, &input, &g) - scalar_loss(&minus, &input, &g)) / (2.0 * h);
            let err = (analytic - fd).abs() / analytic.abs().max(1.0);
            assert!(err < 1e-4, "case {case}, param {k}: analytic {analytic}, fd {fd}");
        }
        for (k, analytic) in grad_in.iter().enumerate() {
            let mut plus = input.clone();
            let mut minus = input.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (scalar_loss(&p, &plus, &g) - scalar_loss(&p, &minus, &g)) / (2.0 * h);
            assert!((analytic - fd).abs() / analytic.abs().max(1.0) < 1e-4);
        }
    }
}

#[test]
fn two_sixteen_two_net_matches_relative_tolerance() {
    let mut r = rng::stream(7, &[]);
    let p = MlpParams::init(&[2, 16, 2], Activation::Tanh, &mut r).unwrap();
    let input = [0.3, -0.8];
    let g = [0.7, -1.3];
    let (grads, _) = mlp_backward(&p, &input, &g).unwrap();
    let h = 1e-5;
    for (k, analytic) in grads.values().enumerate() {
        let mut plus = p.clone();
        let mut minus = p.clone();
        *plus.values_mut().nth(k).unwrap() += h;
        *minus.values_mut().nth(k).unwrap() -= h;
        let fd = (scalar_loss(&plus, &input, &g) - scalar_loss(&minus, &input, &g)) / (2.0 * h);
        let rel = (analytic - fd).abs() / (analytic.abs() + fd.abs()).max(1e-8);
        assert!(rel < 1e-4 || (analytic - fd).abs() < 1e-10, "param {k}: {analytic} vs {fd}");
    }
}

#[test]
fn forward_is_pure() {
    let mut r = rng::stream(3, &[]);
    for _ in 0..20 {
        let (p, input, _) = random_net(&mut r);
        let a = mlp_forward(&p, &input).unwrap();
        let b = mlp_forward(&p, &input).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
