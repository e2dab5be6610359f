//! Finite-difference checks of first- and second-order gradients for every
//! recorded operation.

use alae_autodiff::{Array, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type F<'t> = Var<'t, f64>;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Array<f64> {
    let n: usize = shape.iter().product();
    Array::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Evaluates `f` on fresh leaves and returns (value, analytic gradients).
fn eval_grad(
    f: &dyn for<'t> Fn(&'t Tape<f64>, &[F<'t>]) -> F<'t>,
    inputs: &[Array<f64>],
) -> (f64, Vec<Array<f64>>) {
    let tape = Tape::new();
    let vars: Vec<F> = inputs.iter().map(|a| tape.leaf(a.clone(), true)).collect();
    let out = f(&tape, &vars);
    let grads = tape.grad(out, &vars, false);
    (out.item(), grads.iter().map(|g| (*g.value()).clone()).collect())
}

fn eval(f: &dyn for<'t> Fn(&'t Tape<f64>, &[F<'t>]) -> F<'t>, inputs: &[Array<f64>]) -> f64 {
    let tape = Tape::new();
    let vars: Vec<F> = inputs.iter().map(|a| tape.leaf(a.clone(), true)).collect();
    f(&tape, &vars).item()
}

fn check(name: &str, f: &dyn for<'t> Fn(&'t Tape<f64>, &[F<'t>]) -> F<'t>, inputs: Vec<Array<f64>>) {
    let (_, grads) = eval_grad(f, &inputs);
    let h = 1e-6;
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let mut plus = inputs.clone();
            plus[i].data_mut()[j] += h;
            let mut minus = inputs.clone();
            minus[i].data_mut()[j] -= h;
            let fd = (eval(f, &plus) - eval(f, &minus)) / (2.0 * h);
            let an = grads[i].data()[j];
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
            assert!(err < 1e-5, "{name}: input {i}[{j}] analytic {an} vs fd {fd}");
        }
    }
}

/// Checks `f` and the squared norm of its input gradient, which exercises
/// every vector-Jacobian product a second time.
fn check2(name: &str, f: &dyn for<'t> Fn(&'t Tape<f64>, &[F<'t>]) -> F<'t>, inputs: Vec<Array<f64>>) {
    check(name, f, inputs.clone());
    check(
        &format!("{name} (second order)"),
        &|tape, xs| {
            let out = f(tape, xs);
            let gs = tape.grad(out, xs, true);
            let mut acc = gs[0].square().sum();
            for g in &gs[1..] {
                acc = acc + g.square().sum();
            }
            acc
        },
        inputs,
    );
}

#[test]
fn elementwise_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random(&[3, 4], &mut rng);
    let b = random(&[4], &mut rng);
    let pos = random(&[3, 4], &mut rng).map(|v| v.abs() + 0.5);
    check2("add", &|_, x| (x[0] + x[1]).square().sum(), vec![a.clone(), b.clone()]);
    check2("sub", &|_, x| (x[0] - x[1]).square().sum(), vec![a.clone(), b.clone()]);
    check2("mul", &|_, x| (x[0] * x[1] * x[0]).sum(), vec![a.clone(), b.clone()]);
    check2("div", &|_, x| (x[0] / x[1]).sum(), vec![a.clone(), pos.clone()]);
    check2("sqrt", &|_, x| (x[0].sqrt() * x[0]).sum(), vec![pos.clone()]);
    check2("sigmoid", &|_, x| (x[0].sigmoid() * x[0]).sum(), vec![a.clone()]);
    check2("softplus", &|_, x| (x[0].softplus() * x[0]).sum(), vec![a.clone()]);
    check2("tanh", &|_, x| (x[0].tanh() * x[0]).sum(), vec![a.clone()]);
    check2("neg/scale", &|_, x| (-x[0]).scale(3.0).add_scalar(1.0).square().mean(), vec![a.clone()]);
    check2("leaky", &|_, x| (x[0].leaky_relu(0.2) * x[0]).sum(), vec![a.clone()]);
}

#[test]
fn reductions_and_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random(&[2, 3, 2, 4], &mut rng);
    check2(
        "instance stats",
        &|_, x| {
            let mu = x[0].mean_axes_keepdim(&[1, 2]);
            let c = x[0] - mu;
            let var = c.square().mean_axes_keepdim(&[1, 2]).add_scalar(1e-3);
            ((c / var.sqrt()) * x[0]).sum() + var.sum()
        },
        vec![a.clone()],
    );
    check2(
        "reshape/broadcast",
        &|_, x| {
            let r = x[0].reshape(&[6, 8]);
            let s = r.sum_axes_keepdim(&[0]).broadcast_to(&[6, 8]);
            (r * s).sum()
        },
        vec![a],
    );
}

#[test]
fn matmul_all_transposes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random(&[3, 4], &mut rng);
    let b = random(&[4, 2], &mut rng);
    let at = random(&[4, 3], &mut rng);
    let bt = random(&[2, 4], &mut rng);
    check2("mm", &|_, x| x[0].matmul(x[1]).square().sum(), vec![a.clone(), b.clone()]);
    check2("mm ta", &|_, x| x[0].matmul_t(x[1], true, false).square().sum(), vec![at.clone(), b.clone()]);
    check2("mm tb", &|_, x| x[0].matmul_t(x[1], false, true).square().sum(), vec![a.clone(), bt.clone()]);
    check2("mm ta tb", &|_, x| x[0].matmul_t(x[1], true, true).square().sum(), vec![at, bt]);
}

#[test]
fn spatial_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&[2, 4, 4, 2], &mut rng);
    let w = random(&[18, 3], &mut rng);
    check2(
        "conv",
        &|_, v| {
            let s = v[0].shape();
            let y = v[0].im2col(3, 1).matmul(v[1]).reshape(&[s[0], s[1], s[2], 3]);
            (y.leaky_relu(0.2) * y).sum()
        },
        vec![x.clone(), w],
    );
    check2("up2", &|_, v| v[0].up2().square().sum(), vec![x.clone()]);
    check2("down2", &|_, v| v[0].down2().square().sum(), vec![x.clone()]);
    check2("up2 adjoint", &|_, v| v[0].up2_adjoint().square().sum(), vec![x.clone()]);
    check2("down2 adjoint", &|_, v| v[0].down2_adjoint().square().sum(), vec![x.clone()]);
    check2(
        "col2im",
        &|_, v| v[0].col2im(1, 2, 2, 3, 1).square().sum(),
        vec![random(&[4, 9], &mut rng)],
    );
}

#[test]
fn concat_slice() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random(&[3, 2], &mut rng);
    let b = random(&[3, 3], &mut rng);
    check2(
        "concat",
        &|_, v| {
            let c = Var::concat_last(&[v[0], v[1]]);
            (c.square() * c).sum() + c.slice_last(1, 3).pad_last(0, 4).square().sum()
        },
        vec![a, b],
    );
}

#[test]
fn gradient_of_unused_input_is_zero() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(Array::ones(&[2]), true);
    let y = tape.leaf(Array::ones(&[3]), true);
    let out = x.square().sum();
    let g = tape.grad(out, &[x, y], false);
    assert_eq!(g[0].value().data(), &[2.0, 2.0]);
    assert_eq!(g[1].value().data(), &[0.0; 3]);
}

#[test]
fn without_create_graph_gradients_are_constants() {
    let tape = Tape::<f64>::new();
    let x = tape.leaf(Array::ones(&[2]), true);
    let out = x.square().sum();
    let g = tape.grad(out, &[x], false);
    assert!(!g[0].requires_grad());
    let g = tape.grad(out, &[x], true);
    assert!(g[0].requires_grad());
}
