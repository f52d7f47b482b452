use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tae_core::autodiff::{Graph, NodeId};
use tae_core::gradcheck::finite_difference_check;
use tae_core::{Error, Tensor};

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
}

fn rand_shape(rng: &mut ChaCha8Rng) -> Vec<usize> {
    match rng.gen_range(0..2) {
        0 => vec![rng.gen_range(1..=7)],
        _ => vec![rng.gen_range(1..=3), rng.gen_range(1..=4)],
    }
}

fn dot(g: &mut Graph, y: NodeId, w: &Tensor) -> tae_core::Result<NodeId> {
    let w = g.constant(w.clone());
    let p = g.mul(y, w)?;
    g.sum(p)
}

/// Runs `cases` random checks of a unary op on random shapes.
fn check_unary(seed: u64, op: impl Fn(&mut Graph, NodeId) -> tae_core::Result<NodeId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let shape = rand_shape(&mut rng);
        let x = rand_tensor(&mut rng, shape.clone());
        let w = rand_tensor(&mut rng, shape);
        let err = finite_difference_check(
            |g, ids| {
                let y = op(g, ids[0])?;
                dot(g, y, &w)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err:e}");
    }
}

fn check_binary(seed: u64, op: impl Fn(&mut Graph, NodeId, NodeId) -> tae_core::Result<NodeId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let shape = rand_shape(&mut rng);
        let a = rand_tensor(&mut rng, shape.clone());
        let b = rand_tensor(&mut rng, shape.clone());
        let w = rand_tensor(&mut rng, shape);
        let err = finite_difference_check(
            |g, ids| {
                let y = op(g, ids[0], ids[1])?;
                dot(g, y, &w)
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err:e}");
    }
}

#[test]
fn fd_matmul() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for trial in 0..100 {
        let (m, k, n) = (rng.gen_range(1..=4), rng.gen_range(1..=5), rng.gen_range(1..=4));
        let (sa, sb, so) = match trial % 3 {
            0 => (vec![m, k], vec![k, n], vec![m, n]),
            1 => (vec![m, k], vec![k], vec![m]),
            _ => (vec![k], vec![k], vec![1]),
        };
        let (a, b, w) = (rand_tensor(&mut rng, sa), rand_tensor(&mut rng, sb), rand_tensor(&mut rng, so));
        let err = finite_difference_check(
            |g, ids| {
                let y = g.matmul(ids[0], ids[1])?;
                dot(g, y, &w)
            },
            &[a, b],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "trial {trial}: {err:e}");
    }
}

#[test]
fn fd_add() {
    check_binary(11, |g, a, b| g.add(a, b));
}

#[test]
fn fd_elementwise_multiply() {
    check_binary(12, |g, a, b| g.mul(a, b));
}

#[test]
fn fd_mse() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let shape = rand_shape(&mut rng);
        let inputs = [rand_tensor(&mut rng, shape.clone()), rand_tensor(&mut rng, shape)];
        let err = finite_difference_check(|g, ids| g.mse(ids[0], ids[1]), &inputs, 1e-5).unwrap();
        assert!(err < 1e-4, "{err:e}");
    }
}

#[test]
fn fd_concat() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let parts: Vec<Tensor> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let len = rng.gen_range(1..=4);
                rand_tensor(&mut rng, vec![len])
            })
            .collect();
        let total = parts.iter().map(Tensor::numel).sum();
        let w = rand_tensor(&mut rng, vec![total]);
        let err = finite_difference_check(
            |g, ids| {
                let y = g.concat(ids)?;
                dot(g, y, &w)
            },
            &parts,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err:e}");
    }
}

#[test]
fn fd_slice() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let len = rng.gen_range(1..=9);
        let start = rng.gen_range(0..len);
        let end = rng.gen_range(start + 1..=len);
        let x = rand_tensor(&mut rng, vec![len]);
        let w = rand_tensor(&mut rng, vec![end - start]);
        let err = finite_difference_check(
            |g, ids| {
                let y = g.slice(ids[0], start, end)?;
                dot(g, y, &w)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err:e}");
    }
}

#[test]
fn fd_sigmoid() {
    check_unary(16, |g, x| g.sigmoid(x));
}

#[test]
fn fd_tanh() {
    check_unary(17, |g, x| g.tanh(x));
}

#[test]
fn fd_softmax_lastdim() {
    check_unary(18, |g, x| g.softmax(x));
}

#[test]
fn fd_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..100 {
        let shape = rand_shape(&mut rng);
        let factor = rng.gen_range(-4.0..4.0);
        let x = rand_tensor(&mut rng, shape.clone());
        let w = rand_tensor(&mut rng, shape);
        let err = finite_difference_check(
            |g, ids| {
                let y = g.scale(ids[0], factor)?;
                dot(g, y, &w)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err:e}");
    }
}

#[test]
fn fd_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..100 {
        let shape = rand_shape(&mut rng);
        let x = rand_tensor(&mut rng, shape);
        let err = finite_difference_check(
            |g, ids| {
                let s = g.sum(ids[0])?;
                let t = g.tanh(s)?;
                g.sum(t)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err:e}");
    }
}

#[test]
fn fd_mul_scalar() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let shape = rand_shape(&mut rng);
        let x = rand_tensor(&mut rng, shape.clone());
        let s = rand_tensor(&mut rng, vec![1]);
        let w = rand_tensor(&mut rng, shape);
        let err = finite_difference_check(
            |g, ids| {
                let y = g.mul_scalar(ids[0], ids[1])?;
                dot(g, y, &w)
            },
            &[x, s],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err:e}");
    }
}

#[test]
fn gradcheck_examples() {
    let x = Tensor::vector(vec![0.0]).unwrap();
    let sig = finite_difference_check(
        |g, ids| {
            let s = g.sigmoid(ids[0])?;
            g.sum(s)
        },
        &[x],
        1e-5,
    )
    .unwrap();
    assert!(sig < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let inputs = [rand_tensor(&mut rng, vec![8]), rand_tensor(&mut rng, vec![8])];
    let mse = finite_difference_check(|g, ids| g.mse(ids[0], ids[1]), &inputs, 1e-5).unwrap();
    assert!(mse < 1e-6);
}

#[test]
fn forward_examples() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = g.constant(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
    let y = g.matmul(a, b).unwrap();
    assert_eq!(g.value(y).shape(), [2, 1]);
    assert_eq!(g.value(y).values(), [3.0, 7.0]);

    let z = g.constant(Tensor::vector(vec![0.0, 0.0]).unwrap());
    let s = g.softmax(z).unwrap();
    assert_eq!(g.value(s).values(), [0.5, 0.5]);
    let sg = g.sigmoid(z).unwrap();
    assert_eq!(g.value(sg).values(), [0.5, 0.5]);
}

#[test]
fn backward_examples() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![0.0]).unwrap());
    let s = g.sigmoid(x).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), [0.25]);

    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.5, -2.0]).unwrap());
    let t = g.constant(Tensor::vector(vec![1.5, -2.0]).unwrap());
    let l = g.mse(x, t).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).unwrap(), [0.0, 0.0]);

    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![3.0]).unwrap());
    let sq = g.mul(x, x).unwrap();
    let l = g.sum(sq).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).unwrap(), [6.0]);
    // A second call accumulates.
    g.backward(l).unwrap();
    assert_eq!(g.grad(x).unwrap(), [12.0]);
    g.zero_grad();
    assert_eq!(g.grad(x).unwrap(), [0.0]);
}

#[test]
fn ignored_parameter_gets_exact_zero() {
    let mut g = Graph::new();
    let used = g.param(Tensor::vector(vec![0.3, 0.7]).unwrap());
    let unused = g.param(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
    let _dangling = g.tanh(unused).unwrap();
    let t = g.tanh(used).unwrap();
    let l = g.sum(t).unwrap();
    g.backward(l).unwrap();
    assert_eq!(g.grad(unused).unwrap(), [0.0, 0.0, 0.0]);
    assert!(g.grad(used).unwrap().iter().all(|&v| v != 0.0));
}

#[test]
fn non_scalar_loss_rejected() {
    let mut g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
    assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
}

#[test]
fn shape_errors_name_the_op() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::vector(vec![1.0, 2.0]).unwrap());
    let b = g.constant(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
    match g.add(a, b) {
        Err(Error::Shape { op, expected, actual }) => {
            assert_eq!(op, "add");
            assert_eq!(expected, [2]);
            assert_eq!(actual, [3]);
        }
        other => panic!("{other:?}"),
    }
    let msg = g.mul(a, b).unwrap_err().to_string();
    assert!(msg.contains("elementwise_multiply"), "{msg}");
    let m = g.constant(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
    assert!(g.matmul(m, a).is_err());
    assert!(matches!(g.slice(b, 1, 4), Err(Error::SliceRange { .. })));
    assert!(g.slice(b, 2, 2).is_err());
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..4, cols in 1usize..8, seed in any::<u64>(), spread in 0.1f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-spread..spread)).collect();
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(rows, cols, values).unwrap());
        let y = g.softmax(x).unwrap();
        for row in g.value(y).values().chunks(cols) {
            let total: f64 = row.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12, "row sums to {}", total);
            // Underflow to exactly 0 is possible for very spread logits.
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        if spread < 5.0 {
            prop_assert!(g.value(y).values().iter().all(|&p| p > 0.0 && p < 1.0 || cols == 1));
        }
    }

    #[test]
    fn apply_is_pure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_tensor(&mut rng, vec![3, 4]);
        let b = rand_tensor(&mut rng, vec![4]);
        let run = || {
            let mut g = Graph::new();
            let (x, y) = (g.constant(a.clone()), g.constant(b.clone()));
            let m = g.matmul(x, y).unwrap();
            let s = g.softmax(m).unwrap();
            let t = g.tanh(s).unwrap();
            g.value(t).clone()
        };
        prop_assert!(run().bit_eq(&run()));
    }
}
